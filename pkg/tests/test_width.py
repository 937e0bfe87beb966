import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoplane.entropy import normalize_gram, rbf_gram, von_neumann_entropy, eigenvalues
from infoplane.exceptions import (
    DegenerateDistances,
    LabelOutOfRange,
    NonPositiveSigma,
    SizeMismatch,
    TooFewSamples,
    ValidationError,
    ZeroNorm,
)
from infoplane.width import (
    LabelKernelSpec,
    WidthGrid,
    WidthState,
    alignment_curve,
    ema_update,
    ideal_label_gram,
    kernel_alignment,
    label_gram,
    mean_pairwise_distance,
    select_sigma,
)


def two_blobs(rng, n_per=20, dim=4, separation=10.0, spread=0.5):
    a = rng.normal(scale=spread, size=(n_per, dim))
    b = rng.normal(scale=spread, size=(n_per, dim)) + separation
    points = np.vstack([a, b])
    labels = np.array([0] * n_per + [1] * n_per)
    return points, labels


class TestKernelAlignment:
    def test_self_alignment_is_one(self):
        rng = np.random.default_rng(0)
        gram = rbf_gram(rng.normal(size=(12, 3)), 1.0)
        assert kernel_alignment(gram, gram) == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        a = rbf_gram(rng.normal(size=(10, 3)), 1.0).values
        b = rbf_gram(rng.normal(size=(10, 3)), 2.0).values
        base = kernel_alignment(a, b)
        for c in [1e-4, 0.5, 3.0, 1e5]:
            assert kernel_alignment(c * a, b) == pytest.approx(base, abs=1e-12)

    def test_matches_scalar_loop_oracle(self):
        a = np.array([[1.0, 0.2, 0.1], [0.2, 1.0, 0.4], [0.1, 0.4, 1.0]])
        b = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.3], [0.0, 0.3, 1.0]])
        inner = sum(a[i, j] * b[i, j] for i in range(3) for j in range(3))
        norm_a = math.sqrt(sum(a[i, j] ** 2 for i in range(3) for j in range(3)))
        norm_b = math.sqrt(sum(b[i, j] ** 2 for i in range(3) for j in range(3)))
        assert kernel_alignment(a, b) == pytest.approx(
            inner / (norm_a * norm_b), abs=1e-14
        )

    def test_nonnegative_kernels_stay_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rbf_gram(rng.normal(size=(15, 4)), rng.uniform(0.5, 4))
            b = rbf_gram(rng.normal(size=(15, 2)), rng.uniform(0.5, 4))
            value = kernel_alignment(a, b)
            assert 0.0 <= value <= 1.0

    def test_errors(self):
        with pytest.raises(SizeMismatch):
            kernel_alignment(np.ones((3, 3)), np.ones((4, 4)))
        with pytest.raises(ZeroNorm):
            kernel_alignment(np.zeros((3, 3)), np.ones((3, 3)))


class TestMeanPairwiseDistance:
    def test_two_points(self):
        assert mean_pairwise_distance([[0.0, 0.0], [0.0, 3.0]]) == pytest.approx(3.0)

    def test_three_collinear_points(self):
        assert mean_pairwise_distance([0.0, 1.0, 2.0]) == pytest.approx(4.0 / 3.0)

    def test_matches_quadratic_loop(self):
        rng = np.random.default_rng(3)
        points = rng.normal(size=(50, 6))
        total = 0.0
        count = 0
        for i in range(50):
            for j in range(i + 1, 50):
                total += float(np.linalg.norm(points[i] - points[j]))
                count += 1
        assert mean_pairwise_distance(points) == pytest.approx(
            total / count, abs=1e-12
        )

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            mean_pairwise_distance([[1.0, 2.0]])


class TestSelectSigma:
    def test_separated_blobs_align_with_labels(self):
        rng = np.random.default_rng(4)
        points, labels = two_blobs(rng)
        gram_y = ideal_label_gram(labels)
        grid = WidthGrid(0.1, 10.0, 75)
        sigma = select_sigma(points, gram_y, grid)
        assert sigma > 0
        best = kernel_alignment(rbf_gram(points, sigma), gram_y)
        assert best > 0.9

    def test_exact_ties_break_toward_smallest_sigma(self):
        # At widths ~1e9 times the data scale every kernel entry rounds to
        # exactly 1.0, so all grid candidates score an identical alignment
        # of 1.0 against the all-ones label Gram and the tie-break applies.
        rng = np.random.default_rng(5)
        points = rng.normal(size=(10, 3))
        all_ones = ideal_label_gram(np.zeros(10, dtype=int))
        grid = WidthGrid(1e9, 1e10, 7)
        _, alignments = alignment_curve(points, all_ones, grid)
        assert np.all(alignments == 1.0)
        sigma = select_sigma(points, all_ones, grid)
        assert sigma == pytest.approx(1e9 * mean_pairwise_distance(points), rel=1e-12)

    def test_near_singleton_grid(self):
        rng = np.random.default_rng(6)
        points, labels = two_blobs(rng, n_per=10)
        grid = WidthGrid(0.999, 1.001, 2)
        sigma = select_sigma(points, ideal_label_gram(labels), grid)
        md = mean_pairwise_distance(points)
        assert md * 0.99 < sigma < md * 1.01

    def test_identical_activations_rejected(self):
        points = np.ones((8, 3))
        labels = np.arange(8) % 2
        with pytest.raises(DegenerateDistances):
            select_sigma(points, ideal_label_gram(labels), WidthGrid())

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        points, labels = two_blobs(rng)
        gram_y = ideal_label_gram(labels)
        first = select_sigma(points, gram_y, WidthGrid())
        second = select_sigma(points, gram_y, WidthGrid())
        assert first == second

    def test_argmax_index_invariant_under_joint_rescaling(self):
        # RBF depends only on distance/sigma, and the grid scales with the
        # mean distance, so rescaling the data moves sigma* proportionally.
        rng = np.random.default_rng(8)
        points, labels = two_blobs(rng)
        gram_y = ideal_label_gram(labels)
        grid = WidthGrid(0.1, 10.0, 30)
        sigma = select_sigma(points, gram_y, grid)
        for c in [0.2, 5.0]:
            scaled = select_sigma(c * points, gram_y, grid)
            assert scaled == pytest.approx(c * sigma, rel=1e-9)

    def test_curve_shape(self):
        rng = np.random.default_rng(9)
        points, labels = two_blobs(rng)
        sigmas, alignments = alignment_curve(points, ideal_label_gram(labels), WidthGrid(0.1, 10, 40))
        assert sigmas.shape == alignments.shape == (40,)
        assert np.all(np.diff(sigmas) > 0)


class TestEmaUpdate:
    def test_first_update_adopts_sigma_star(self):
        state = ema_update(WidthState(layer_id=1, beta=0.9), 2.0)
        assert state.current_sigma == 2.0
        assert state.iteration == 1

    def test_beta_zero_tracks_latest(self):
        state = WidthState(layer_id=0, beta=0.0)
        for value in [1.0, 9.0, 5.0]:
            state = ema_update(state, value)
        assert state.current_sigma == 5.0

    def test_blend(self):
        state = WidthState(layer_id=0, beta=0.9, current_sigma=1.0, iteration=1)
        updated = ema_update(state, 2.0)
        assert updated.current_sigma == pytest.approx(1.1, abs=1e-15)

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveSigma):
            ema_update(WidthState(layer_id=0), 0.0)

    @given(
        beta=st.floats(min_value=0.0, max_value=1.0),
        stars=st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=1, max_size=30),
    )
    @settings(max_examples=200, deadline=None)
    def test_stays_within_observed_range(self, beta, stars):
        state = WidthState(layer_id=0, beta=beta)
        for value in stars:
            state = ema_update(state, value)
            assert min(stars) - 1e-9 <= state.current_sigma <= max(stars) + 1e-9


class TestLabelGram:
    def test_all_labels_equal(self):
        gram = label_gram([3] * 6, LabelKernelSpec(0.1), num_classes=4)
        np.testing.assert_array_equal(gram.values, np.ones((6, 6)))

    def test_off_class_entries_vanish_at_default_width(self):
        gram = label_gram([0, 0, 1, 1], LabelKernelSpec(0.1), num_classes=2)
        off = gram.values[0, 2]
        assert off == pytest.approx(math.exp(-2 / 0.1**2), rel=1e-12)
        assert off < 1e-86
        np.testing.assert_array_equal(gram.values[:2, :2], np.ones((2, 2)))

    def test_balanced_ten_classes_reach_log2_10(self):
        labels = np.repeat(np.arange(10), 10)
        density = normalize_gram(label_gram(labels, LabelKernelSpec(0.1), 10))
        assert von_neumann_entropy(density) == pytest.approx(math.log2(10), abs=1e-6)

    def test_ideal_gram_spectrum(self):
        labels = np.repeat(np.arange(5), 8)
        density = normalize_gram(ideal_label_gram(labels))
        lam = eigenvalues(density)
        np.testing.assert_allclose(lam[:5], np.full(5, 1 / 5), atol=1e-10)
        assert np.all(lam[5:] < 1e-10)

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            label_gram([0, 5], LabelKernelSpec(0.1), num_classes=3)
        with pytest.raises(LabelOutOfRange):
            label_gram([0, -1], LabelKernelSpec(0.1), num_classes=3)

    def test_unbalanced_counts_match_expected_spectrum(self):
        labels = np.array([0] * 75 + [1] * 25)
        density = normalize_gram(ideal_label_gram(labels))
        lam = eigenvalues(density)
        np.testing.assert_allclose(sorted(lam[:2], reverse=True), [0.75, 0.25], atol=1e-10)


class TestGridAndState:
    def test_grid_validation(self):
        with pytest.raises(ValidationError):
            WidthGrid(multiplier_lo=0.0, multiplier_hi=1.0)
        with pytest.raises(ValidationError):
            WidthGrid(multiplier_lo=2.0, multiplier_hi=1.0)
        with pytest.raises(ValidationError):
            WidthGrid(n_samples=1)

    def test_grid_spacing_is_linear(self):
        sigmas = WidthGrid(0.1, 10.0, 75).sigmas(2.0)
        assert len(sigmas) == 75
        np.testing.assert_allclose(np.diff(sigmas), np.diff(sigmas)[0], rtol=1e-9)
        assert sigmas[0] == pytest.approx(0.2)
        assert sigmas[-1] == pytest.approx(20.0)

    def test_state_validation(self):
        with pytest.raises(ValidationError):
            WidthState(layer_id=0, beta=1.5)
        with pytest.raises(ValidationError):
            WidthState(layer_id=0, current_sigma=-1.0)

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lutharm.lut import (
    CHUNK_SIZE,
    Lut3D,
    _accumulate,
    _accumulate_numpy,
    _evaluate_numpy,
    apply_lut,
    constant_lut,
    corner_weights,
    evaluate_lut,
    fit_lut_heuristic,
    identity_lut,
    invalid_ratio,
    lattice_colors,
    lattice_similarity,
)

# colors on a 1e-6 grid: real inputs come from 8-bit sources, and denormal
# colors only exercise floating-point underflow
color_values = st.integers(0, 255_000_000).map(lambda x: x / 1e6)
colors_strategy = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=color_values)
bins_strategy = st.sampled_from([1, 2, 3, 4, 8, 16, 32, 64, 128])


def brute_force_fit(inputs, targets, bins):
    """Direct evaluation of the weighted-average rule over every entry."""
    n = bins + 1
    out = np.zeros((n, n, n, 3))
    wsum = np.zeros((n, n, n))
    for v in itertools.product(range(n), repeat=3):
        w = np.array([lattice_similarity(c, v, bins) for c in inputs])
        wsum[v] = w.sum()
        if wsum[v] > 0:
            out[v] = (w[:, None] * targets).sum(axis=0) / wsum[v]
    return out, wsum


class TestLattice:
    def test_entry_count(self):
        assert identity_lut(32).n_entries == 33**3

    def test_lattice_colors_span(self):
        axis = lattice_colors(4)[:, 0, 0, 0]
        np.testing.assert_array_equal(axis, [0, 64, 128, 192, 256])

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            Lut3D(2, np.zeros((2, 2, 2, 3)), np.zeros((3, 3, 3)))

    def test_lut_is_immutable(self):
        lut = identity_lut(2)
        with pytest.raises(ValueError):
            lut.outputs[0, 0, 0, 0] = 5


class TestLatticeSimilarity:
    def test_zero_distance(self):
        assert lattice_similarity((0, 0, 0), (0, 0, 0), 32) == 1.0

    def test_half_cell(self):
        assert lattice_similarity((4, 4, 4), (0, 0, 0), 32) == pytest.approx(0.125, abs=1e-15)

    def test_outside_support(self):
        assert lattice_similarity((16, 0, 0), (0, 0, 0), 32) == 0.0

    @given(st.tuples(*[color_values] * 3), bins_strategy)
    def test_corner_weights_match_similarity(self, color, bins):
        index, weight = corner_weights(np.array([color]), bins)
        n = bins + 1
        for flat, w in zip(index[0], weight[0]):
            v = np.unravel_index(flat, (n, n, n))
            assert w == pytest.approx(lattice_similarity(color, v, bins), abs=1e-12)

    @given(colors_strategy, bins_strategy)
    def test_partition_of_unity(self, colors, bins):
        _, weight = corner_weights(colors, bins)
        np.testing.assert_allclose(weight.sum(axis=1), 1.0, atol=1e-12, rtol=0)
        assert np.all(weight >= 0)

    def test_top_value_reaches_last_point(self):
        index, weight = corner_weights(np.array([[252.0, 0, 0]]), 32)
        top = [np.unravel_index(i, (33, 33, 33))[0] for i, w in zip(index[0], weight[0]) if w > 0]
        assert max(top) == 32


class TestFitHeuristic:
    def test_single_aligned_pair(self):
        lut = fit_lut_heuristic([[8, 8, 8]], [[100, 50, 25]], 32)
        np.testing.assert_allclose(lut.outputs[1, 1, 1], [100, 50, 25])
        assert lut.n_null == lut.n_entries - 1

    def test_two_pairs_average(self):
        lut = fit_lut_heuristic([[4, 4, 4], [4, 4, 4]], [[10, 10, 10], [20, 20, 20]], 32)
        live = ~lut.null
        assert np.count_nonzero(live) == 8
        np.testing.assert_allclose(lut.outputs[live], 15.0)
        assert np.all(lut.null[2:, :, :])

    def test_identity_pairs_reproduced(self, rng):
        colors = rng.uniform(0, 255, (500, 3))
        lut = fit_lut_heuristic(colors, colors, 8)
        values, valid = evaluate_lut(lut, colors)
        assert valid.all()
        # weighted average of identity targets is not exactly identity in general;
        # the reproduction property holds for lattice-aligned data
        aligned = rng.integers(0, 9, (200, 3)) * 32.0
        aligned = np.minimum(aligned, 255)
        aligned = aligned[np.all(aligned % 32 == 0, axis=1)]
        lut = fit_lut_heuristic(aligned, aligned, 8)
        values, valid = evaluate_lut(lut, aligned)
        np.testing.assert_allclose(values, aligned, atol=1e-9)

    def test_empty_input_gives_all_null(self):
        lut = fit_lut_heuristic(np.zeros((0, 3)), np.zeros((0, 3)), 4)
        assert lut.n_null == lut.n_entries

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            fit_lut_heuristic(np.zeros((3, 3)), np.zeros((2, 3)), 4)

    @given(colors_strategy, st.sampled_from([1, 2, 3]), st.randoms(use_true_random=False))
    def test_matches_brute_force(self, inputs, bins, rnd):
        targets = np.array([[rnd.uniform(0, 255) for _ in range(3)] for _ in range(len(inputs))])
        lut = fit_lut_heuristic(inputs, targets, bins)
        out, wsum = brute_force_fit(inputs, targets, bins)
        np.testing.assert_allclose(lut.weights, wsum, atol=1e-12)
        live = wsum > 0
        np.testing.assert_allclose(lut.outputs[live], out[live], atol=1e-9)
        assert np.array_equal(lut.null, wsum == 0)

    @given(colors_strategy, st.sampled_from([2, 4, 8]))
    def test_outputs_within_target_range(self, inputs, bins):
        targets = inputs[::-1].copy()
        lut = fit_lut_heuristic(inputs, targets, bins)
        live = lut.outputs[~lut.null]
        assert np.all(live >= targets.min(axis=0) - 1e-9)
        assert np.all(live <= targets.max(axis=0) + 1e-9)

    @given(colors_strategy, colors_strategy, st.sampled_from([2, 4, 8]))
    def test_more_pairs_never_add_nulls(self, a, b, bins):
        small = fit_lut_heuristic(a, a, bins)
        both = np.concatenate([a, b])
        large = fit_lut_heuristic(both, both, bins)
        assert not np.any(large.null & ~small.null)

    def test_kernel_matches_numpy_reference(self, rng):
        inputs = rng.uniform(0, 255, (5000, 3))
        targets = rng.uniform(0, 255, (5000, 3))
        w1, t1 = _accumulate(inputs, targets, 16)
        w2, t2 = _accumulate_numpy(inputs, targets, 16)
        np.testing.assert_allclose(w1, w2, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(t1, t2, rtol=1e-12, atol=1e-9)

    def test_threads_bit_identical(self, rng):
        n = 3 * CHUNK_SIZE + 123
        inputs = rng.uniform(0, 255, (n, 3))
        targets = rng.uniform(0, 255, (n, 3))
        one = fit_lut_heuristic(inputs, targets, 32, threads=1)
        four = fit_lut_heuristic(inputs, targets, 32, threads=4)
        assert np.array_equal(one.outputs, four.outputs)
        assert np.array_equal(one.weights, four.weights)


class TestApply:
    def test_identity_reproduces_frame(self, rng):
        frame = rng.uniform(0, 255, (20, 30, 3))
        result = apply_lut(identity_lut(32), frame, np.ones((20, 30), bool))
        np.testing.assert_allclose(result.frame, frame, atol=1e-6)
        assert not result.invalid.any()

    def test_constant_lut(self, rng):
        frame = rng.uniform(0, 255, (5, 5, 3))
        mask = rng.random((5, 5)) < 0.5
        result = apply_lut(constant_lut(8, (7, 7, 7)), frame, mask)
        np.testing.assert_allclose(result.frame[mask], 7.0, atol=1e-12)
        np.testing.assert_array_equal(result.frame[~mask], frame[~mask])

    def test_single_live_corner_renormalizes(self):
        n = 3
        weights = np.zeros((n, n, n))
        outputs = np.zeros((n, n, n, 3))
        weights[1, 0, 1] = 1.0
        outputs[1, 0, 1] = (200, 0, 0)
        lut = Lut3D(2, outputs, weights)
        result = apply_lut(lut, np.full((1, 1, 3), 64.0), np.ones((1, 1), bool))
        np.testing.assert_allclose(result.frame[0, 0], [200, 0, 0])
        assert not result.invalid.any()

    def test_invalid_uses_fallback(self):
        lut = fit_lut_heuristic([[0, 0, 0]], [[9, 9, 9]], 2)
        frame = np.array([[[0, 0, 0], [250, 250, 250]]], dtype=float)
        fallback = np.full((1, 2, 3), 42.0)
        mask = np.ones((1, 2), bool)
        result = apply_lut(lut, frame, mask, fallback=fallback)
        np.testing.assert_allclose(result.frame[0, 0], 9.0)
        np.testing.assert_allclose(result.frame[0, 1], 42.0)
        assert result.invalid.tolist() == [[False, True]]
        no_fallback = apply_lut(lut, frame, mask)
        np.testing.assert_array_equal(no_fallback.frame[0, 1], frame[0, 1])

    def test_background_untouched(self, rng):
        frame = rng.uniform(0, 255, (6, 6, 3))
        mask = np.zeros((6, 6), bool)
        mask[2:4, 2:4] = True
        result = apply_lut(constant_lut(4, (1, 2, 3)), frame, mask)
        np.testing.assert_array_equal(result.frame[~mask], frame[~mask])

    @given(colors_strategy, st.sampled_from([1, 2, 4, 8]), st.integers(0, 2**32 - 1))
    def test_output_is_convex_combination(self, colors, bins, seed):
        n = bins + 1
        outputs = np.random.default_rng(seed).uniform(0, 255, (n, n, n, 3))
        lut = Lut3D(bins, outputs, np.ones((n, n, n)))
        values, valid = evaluate_lut(lut, colors)
        assert valid.all()
        assert np.all(values >= outputs.reshape(-1, 3).min(axis=0) - 1e-9)
        assert np.all(values <= outputs.reshape(-1, 3).max(axis=0) + 1e-9)

    @given(colors_strategy, st.sampled_from([1, 2, 4]), st.integers(0, 2**32 - 1))
    def test_kernel_matches_numpy_reference(self, colors, bins, seed):
        r = np.random.default_rng(seed)
        n = bins + 1
        weights = (r.random((n, n, n)) < 0.5).astype(float)
        lut = Lut3D(bins, r.uniform(0, 255, (n, n, n, 3)), weights)
        v1, ok1 = evaluate_lut(lut, colors)
        v2, ok2 = _evaluate_numpy(lut, colors)
        assert np.array_equal(ok1, ok2)
        np.testing.assert_allclose(v1[ok1], v2[ok2], rtol=1e-12, atol=1e-9)
        assert np.all(np.isnan(v1[~ok1]))

    def test_threads_bit_identical(self, rng):
        frame = rng.uniform(0, 255, (300, 300, 3))
        mask = np.ones((300, 300), bool)
        lut = fit_lut_heuristic(frame[::3, ::3].reshape(-1, 3), frame[::3, ::3].reshape(-1, 3)[::-1], 16)
        a = apply_lut(lut, frame, mask, threads=1)
        b = apply_lut(lut, frame, mask, threads=3)
        assert np.array_equal(a.frame, b.frame)
        assert np.array_equal(a.invalid, b.invalid)


class TestInvalidRatio:
    def _result(self, n_fg, n_invalid):
        mask = np.zeros((1, 20), bool)
        mask[0, :n_fg] = True
        invalid = np.zeros((1, 20), bool)
        invalid[0, :n_invalid] = True
        from lutharm.lut import ApplyResult

        return ApplyResult(np.zeros((1, 20, 3)), invalid), mask

    def test_none(self):
        assert invalid_ratio(*self._result(10, 0)) == 0.0

    def test_all(self):
        assert invalid_ratio(*self._result(10, 10)) == 1.0

    def test_partial(self):
        assert invalid_ratio(*self._result(10, 3)) == pytest.approx(0.3)

    def test_empty_foreground(self):
        assert invalid_ratio(*self._result(0, 0)) == 0.0

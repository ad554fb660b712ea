import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lutharm.lut import evaluate_lut, fit_lut_heuristic, identity_lut, lattice_colors
from lutharm.lutopt import (
    LutDivergenceError,
    design_matrix,
    fit_lut_gd,
    fit_lut_ls_oracle,
    mapping_error,
    stable_step_size,
)


def random_pairs(seed, n=200, bins=None):
    r = np.random.default_rng(seed)
    inputs = r.uniform(0, 255, (n, 3))
    targets = np.clip(inputs @ r.uniform(0.6, 1.2, (3, 3)).T / 2 + r.normal(0, 10, (n, 3)), 0, 255)
    return inputs, targets


def aligned_pairs(seed, bins=4, n=1000):
    """Lattice-aligned inputs with one consistent target per lattice point."""
    r = np.random.default_rng(seed)
    d = 256 / bins
    idx = r.integers(0, bins, (n, 3))  # stay below 256 so colors are in range
    inputs = idx * d
    table = r.uniform(0, 255, (bins + 1,) * 3 + (3,))
    targets = table[idx[:, 0], idx[:, 1], idx[:, 2]]
    return inputs, targets


class TestMappingError:
    def test_identity_on_identity_pairs(self, rng):
        c = rng.uniform(0, 255, (50, 3))
        assert mapping_error(identity_lut(16), c, c) == pytest.approx(0.0, abs=1e-18)

    def test_single_pair_hand_value(self):
        assert mapping_error(identity_lut(32), [[0, 0, 0]], [[3, 0, 0]]) == pytest.approx(3.0)

    def test_exact_fit_is_zero(self):
        inputs, targets = aligned_pairs(0)
        lut = fit_lut_heuristic(inputs, targets, 4)
        assert mapping_error(lut, inputs, targets) < 1e-18

    def test_all_invalid_raises(self):
        lut = fit_lut_heuristic([[0, 0, 0]], [[1, 1, 1]], 2)
        with pytest.raises(ValueError):
            mapping_error(lut, [[250, 250, 250]], [[0, 0, 0]])

    def test_empty_pairs_rejected(self):
        with pytest.raises(ValueError):
            mapping_error(identity_lut(2), np.zeros((0, 3)), np.zeros((0, 3)))


class TestDesignMatrix:
    def test_rows_reproduce_lookup(self, rng):
        inputs = rng.uniform(0, 255, (100, 3))
        lut = fit_lut_heuristic(inputs, rng.uniform(0, 255, (100, 3)), 4)
        W, touched, _ = design_matrix(inputs, 4)
        np.testing.assert_allclose(W.sum(axis=1).A1, 1.0, atol=1e-12)
        pred = W @ lut.outputs.reshape(-1, 3)[touched]
        np.testing.assert_allclose(pred, evaluate_lut(lut, inputs)[0], atol=1e-9)


class TestGradientDescent:
    def test_zero_steps_returns_identity(self, rng):
        inputs, targets = random_pairs(1)
        lut = fit_lut_gd(inputs, targets, 4, steps=0)
        np.testing.assert_array_equal(lut.outputs, identity_lut(4).outputs)

    def test_untouched_entries_are_null(self):
        lut = fit_lut_gd([[8, 8, 8]], [[100, 50, 25]], 32, steps=10)
        assert lut.n_null == lut.n_entries - 1

    def test_single_pair_converges(self):
        lut = fit_lut_gd([[8, 8, 8]], [[100, 50, 25]], 32, steps=200)
        assert mapping_error(lut, [[8, 8, 8]], [[100, 50, 25]]) < 1e-3

    @pytest.mark.parametrize("seed", range(5))
    def test_beats_heuristic(self, seed):
        inputs, targets = random_pairs(seed)
        heuristic = fit_lut_heuristic(inputs, targets, 3)
        gd = fit_lut_gd(inputs, targets, 3, steps=2000)
        assert mapping_error(gd, inputs, targets) <= mapping_error(heuristic, inputs, targets) + 1e-6

    @given(st.integers(0, 10_000), st.sampled_from([2, 3, 4]))
    def test_monotone_with_default_step(self, seed, bins):
        inputs, targets = random_pairs(seed, n=60)
        history = []
        fit_lut_gd(inputs, targets, bins, steps=50, history=history)
        assert len(history) == 51
        assert np.all(np.diff(history) <= 1e-9 * max(history[0], 1.0))

    def test_step_size_bound(self, rng):
        inputs, _ = random_pairs(2)
        step = stable_step_size(inputs, 4)
        W, _, _ = design_matrix(inputs, 4)
        L = 2 * np.linalg.eigvalsh((W.T @ W).toarray()).max() / (3 * inputs.shape[0])
        assert step == pytest.approx(1 / L, rel=1e-6)

    def test_divergence_detected(self):
        inputs, targets = random_pairs(3)
        with pytest.raises(LutDivergenceError):
            fit_lut_gd(inputs, targets, 3, steps=5000, step_size=1e6)

    def test_init_is_used(self):
        inputs, targets = aligned_pairs(4)
        exact = fit_lut_heuristic(inputs, targets, 4)
        lut = fit_lut_gd(inputs, targets, 4, steps=0, init=exact)
        assert mapping_error(lut, inputs, targets) < 1e-18
        with pytest.raises(ValueError):
            fit_lut_gd(inputs, targets, 8, init=exact)


class TestLeastSquaresOracle:
    def test_aligned_data_matches_heuristic(self):
        inputs, targets = aligned_pairs(5)
        heuristic = fit_lut_heuristic(inputs, targets, 4)
        oracle = fit_lut_ls_oracle(inputs, targets, 4)
        live = ~heuristic.null
        assert np.array_equal(live, ~oracle.null)
        np.testing.assert_allclose(oracle.outputs[live], heuristic.outputs[live], atol=1e-9)

    def test_matches_lstsq(self, rng):
        inputs, targets = random_pairs(6, n=50)
        oracle = fit_lut_ls_oracle(inputs, targets, 2)
        W, touched, _ = design_matrix(inputs, 2)
        ref, *_ = np.linalg.lstsq(W.toarray(), targets, rcond=None)
        assert mapping_error(oracle, inputs, targets) == pytest.approx(
            float(np.sum((W.toarray() @ ref - targets) ** 2)) / (3 * 50), rel=1e-8
        )

    def test_untouched_entries_identity_and_null(self):
        lut = fit_lut_ls_oracle([[8, 8, 8]], [[100, 50, 25]], 32)
        null = lut.null
        np.testing.assert_array_equal(lut.outputs[null], lattice_colors(32)[null])

    @pytest.mark.parametrize("seed", range(5))
    def test_optimality_chain(self, seed):
        inputs, targets = random_pairs(seed, n=50)
        me = {
            "ls": mapping_error(fit_lut_ls_oracle(inputs, targets, 2), inputs, targets),
            "gd": mapping_error(fit_lut_gd(inputs, targets, 2, steps=2000), inputs, targets),
            "heuristic": mapping_error(fit_lut_heuristic(inputs, targets, 2), inputs, targets),
        }
        assert me["ls"] <= me["gd"] + 1e-6
        assert me["gd"] <= me["heuristic"] + 1e-6

    def test_fixed_point_of_gd(self):
        inputs, targets = random_pairs(7, n=80)
        oracle = fit_lut_ls_oracle(inputs, targets, 2)
        again = fit_lut_gd(inputs, targets, 2, steps=100, init=oracle)
        assert abs(mapping_error(again, inputs, targets) - mapping_error(oracle, inputs, targets)) < 1e-9

    def test_singular_system_uses_ridge(self):
        # every pair sits at the same color: entries are not separately identifiable
        inputs = np.tile([[10.0, 20.0, 30.0]], (5, 1))
        targets = np.tile([[1.0, 2.0, 3.0]], (5, 1))
        lut = fit_lut_ls_oracle(inputs, targets, 2)
        assert mapping_error(lut, inputs, targets) < 1e-6

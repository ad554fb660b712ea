"""Direct optimization of LUT entries against the mapping error.

The mapping ``f(c) = sum_v w(c, v) * o_v`` is linear in the entry outputs
``o``, so the mapping error ``1/(3N) * sum_n ||f(c_n) - t_n||^2`` is a convex
quadratic.  :func:`fit_lut_gd` minimizes it by plain gradient descent;
:func:`fit_lut_ls_oracle` solves the normal equations exactly and exists to
check the descent.

Only entries inside some pair's trilinear footprint take part.  The rest
keep their initial value and are flagged null, so invalid-pixel semantics
are the same as for :func:`lutharm.lut.fit_lut_heuristic`.
"""

from __future__ import annotations

import logging
import warnings
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse

from .lut import Lut3D, corner_weights, evaluate_lut, lattice_colors

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 500
LS_RIDGE = 1e-8
LS_MAX_ENTRIES = 5000


class LutDivergenceError(FloatingPointError):
    """Gradient descent produced non-finite values; the step is too large."""


def _pairs(inputs, targets):
    inputs = np.asarray(inputs, dtype=np.float64).reshape(-1, 3)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    if inputs.shape != targets.shape:
        raise ValueError(f"inputs {inputs.shape} and targets {targets.shape} differ")
    if inputs.shape[0] == 0:
        raise ValueError("at least one pixel pair is required")
    return inputs, targets


def design_matrix(inputs, bins: int):
    """Sparse ``(N, V_touched)`` trilinear weight matrix over touched entries.

    Returns:
        ``(W, touched, weight_sums)`` where ``touched`` holds the flat lattice
        indices of the columns of ``W`` and ``weight_sums`` is the full-lattice
        vector of accumulated weights.
    """
    index, weight = corner_weights(inputs, bins)
    n_pairs = index.shape[0]
    n_entries = (bins + 1) ** 3
    weight_sums = np.bincount(index.ravel(), weights=weight.ravel(), minlength=n_entries)
    touched = np.flatnonzero(weight_sums > 0)
    column = np.full(n_entries, -1, dtype=np.intp)
    column[touched] = np.arange(touched.size)
    keep = weight.ravel() > 0
    rows = np.repeat(np.arange(n_pairs), 8)[keep]
    cols = column[index.ravel()[keep]]
    W = scipy.sparse.csr_matrix(
        (weight.ravel()[keep], (rows, cols)), shape=(n_pairs, touched.size)
    )
    return W, touched, weight_sums


def mapping_error(lut: Lut3D, inputs, targets) -> float:
    """Mean squared per-channel error of ``lut`` on its pairs, [0, 255] scale.

    Pairs whose eight corners are all null are left out of both the sum and
    the count.

    Raises:
        ValueError: if every pair is invalid.
    """
    inputs, targets = _pairs(inputs, targets)
    values, valid = evaluate_lut(lut, inputs)
    if not valid.any():
        raise ValueError("mapping error undefined: every pair maps to null entries")
    diff = values[valid] - targets[valid]
    return float(np.sum(diff * diff) / (3 * diff.shape[0]))


def _largest_eigenvalue(W, iterations: int = 200, seed: int = 0) -> float:
    # power iteration on W^T W
    v = np.random.default_rng(seed).uniform(0.5, 1.5, W.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        u = W.T @ (W @ v)
        norm = np.linalg.norm(u)
        if norm == 0:
            return 0.0
        lam_new = float(v @ u)
        v = u / norm
        if abs(lam_new - lam) <= 1e-10 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


def stable_step_size(inputs, bins: int) -> float:
    """Step ``1/L`` for the mapping-error gradient, ``L`` its Lipschitz constant."""
    inputs = np.asarray(inputs, dtype=np.float64).reshape(-1, 3)
    W, _, _ = design_matrix(inputs, bins)
    lam = _largest_eigenvalue(W)
    return 3 * inputs.shape[0] / (2 * lam) if lam > 0 else 1.0


def _assemble(bins: int, base: np.ndarray, touched, values, weight_sums) -> Lut3D:
    n = bins + 1
    outputs = base.reshape(-1, 3).copy()
    outputs[touched] = values
    return Lut3D(bins, outputs.reshape(n, n, n, 3), weight_sums.reshape(n, n, n))


def fit_lut_gd(
    inputs,
    targets,
    bins: int,
    steps: int = DEFAULT_STEPS,
    step_size: Optional[float] = None,
    init: Optional[Lut3D] = None,
    history: Optional[list] = None,
) -> Lut3D:
    """Fit a LUT by gradient descent on the mapping error.

    Args:
        inputs, targets: ``(N, 3)`` pixel pairs.
        bins: bins per axis.
        steps: number of descent iterations; 0 returns the start point.
        step_size: learning rate.  ``None`` uses :func:`stable_step_size`,
            which guarantees a monotone objective.
        init: starting LUT (default: identity).  Must have ``bins`` bins.
        history: if a list is given, the mapping error before the first
            step and after every step is appended to it.

    Raises:
        LutDivergenceError: if the iterate becomes non-finite.
    """
    inputs, targets = _pairs(inputs, targets)
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if init is None:
        base = lattice_colors(bins)
    else:
        if init.bins != bins:
            raise ValueError(f"init has {init.bins} bins, expected {bins}")
        base = np.array(init.outputs)

    W, touched, weight_sums = design_matrix(inputs, bins)
    n_pairs = inputs.shape[0]
    if step_size is None:
        lam = _largest_eigenvalue(W)
        step_size = 3 * n_pairs / (2 * lam) if lam > 0 else 1.0
    o = base.reshape(-1, 3)[touched].copy()
    WT = W.T.tocsr()
    scale = 2.0 / (3 * n_pairs)

    residual = W @ o - targets
    if history is not None:
        history.append(float(np.sum(residual * residual)) / (3 * n_pairs))
    for it in range(steps):
        # overflow is reported below as a divergence error
        with np.errstate(over="ignore", invalid="ignore"):
            o -= step_size * scale * (WT @ residual)
            residual = W @ o - targets
        if not np.all(np.isfinite(residual)):
            raise LutDivergenceError(
                f"gradient descent diverged at step {it + 1} (step_size={step_size:g})"
            )
        if history is not None:
            history.append(float(np.sum(residual * residual)) / (3 * n_pairs))
    return _assemble(bins, base, touched, o, weight_sums)


def fit_lut_ls_oracle(inputs, targets, bins: int, ridge: float = LS_RIDGE) -> Lut3D:
    """Exact least-squares LUT over touched entries via the normal equations.

    The system is solved unregularized when it is well conditioned; a
    singular or ill-conditioned system is solved with ``ridge`` added to
    the diagonal.  Untouched entries keep identity outputs and are null.
    """
    inputs, targets = _pairs(inputs, targets)
    W, touched, weight_sums = design_matrix(inputs, bins)
    if touched.size > LS_MAX_ENTRIES:
        raise ValueError(
            f"{touched.size} touched entries exceed the dense oracle limit {LS_MAX_ENTRIES}"
        )
    A = (W.T @ W).toarray()
    b = W.T @ targets
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            o = scipy.linalg.solve(A, b, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        logger.info("normal equations singular; solving with ridge %g", ridge)
        o = scipy.linalg.solve(A + ridge * np.eye(A.shape[0]), b, assume_a="sym")
    return _assemble(bins, lattice_colors(bins), touched, o, weight_sums)

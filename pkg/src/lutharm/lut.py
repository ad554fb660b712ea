"""3D color lookup tables: fitting from pixel pairs and trilinear application.

The lattice has ``B + 1`` points per axis at spacing ``d = 256 / B``, so
lattice point ``v`` indexes the color ``v * d`` and the top point sits at
256.  Entries are addressed ``[r, g, b]``; the flattened index used by the
accumulators is ``(r * (B + 1) + g) * (B + 1) + b``.

An entry whose accumulated similarity weight is exactly zero is *null*: it
carries no output.  When a color is looked up, null corners are dropped and
the remaining trilinear coefficients renormalized; if all eight corners are
null the color is *invalid*.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import as_frame, as_mask, check_same_size

logger = logging.getLogger(__name__)

# Pairs per accumulation chunk.  Fixed so that the floating summation order
# does not depend on the number of worker threads.
CHUNK_SIZE = 1 << 16

# (dr, dg, db) offsets of the eight cell corners, in a fixed order.
CORNERS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.intp)


@dataclass(frozen=True, eq=False)
class Lut3D:
    """A ``(B+1)^3`` lattice of output colors with per-entry weight sums.

    Attributes:
        bins: number of bins ``B`` per axis.
        outputs: ``(B+1, B+1, B+1, 3)`` output colors; meaningless where null.
        weights: ``(B+1, B+1, B+1)`` accumulated similarity sums.
    """

    bins: int
    outputs: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if int(self.bins) < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        n = int(self.bins) + 1
        outputs = np.array(self.outputs, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if outputs.shape != (n, n, n, 3):
            raise ValueError(f"outputs must have shape {(n, n, n, 3)}, got {outputs.shape}")
        if weights.shape != (n, n, n):
            raise ValueError(f"weights must have shape {(n, n, n)}, got {weights.shape}")
        outputs.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "bins", int(self.bins))
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        """Lattice points per axis, ``B + 1``."""
        return self.bins + 1

    @property
    def bin_size(self) -> float:
        return 256.0 / self.bins

    @property
    def n_entries(self) -> int:
        return self.size**3

    @property
    def null(self) -> np.ndarray:
        return self.weights == 0

    @property
    def n_null(self) -> int:
        return int(np.count_nonzero(self.null))

    def is_dense(self) -> bool:
        return self.n_null == 0

    def __repr__(self) -> str:
        return f"Lut3D(bins={self.bins}, null={self.n_null}/{self.n_entries})"


def lattice_colors(bins: int) -> np.ndarray:
    """Indexing colors of every lattice point, shape ``(B+1, B+1, B+1, 3)``."""
    axis = np.arange(bins + 1, dtype=np.float64) * (256.0 / bins)
    r, g, b = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([r, g, b], axis=-1)


def identity_lut(bins: int) -> Lut3D:
    """Dense LUT whose every entry outputs its own indexing color.

    Trilinear interpolation of this lattice reproduces any color in
    [0, 256] exactly, so the top entries hold 256 rather than 255.
    """
    n = bins + 1
    return Lut3D(bins, lattice_colors(bins), np.ones((n, n, n)))


def constant_lut(bins: int, color) -> Lut3D:
    n = bins + 1
    outputs = np.broadcast_to(np.asarray(color, dtype=np.float64), (n, n, n, 3))
    return Lut3D(bins, outputs, np.ones((n, n, n)))


def lut_from_function(bins: int, func) -> Lut3D:
    """Dense LUT sampling ``func`` (``(..., 3) -> (..., 3)``) at lattice colors."""
    n = bins + 1
    outputs = np.asarray(func(lattice_colors(bins)), dtype=np.float64)
    return Lut3D(bins, outputs, np.ones((n, n, n)))


def lattice_similarity(color, index, bins: int) -> float:
    """Similarity between a color and one lattice point.

    ``prod_z max(0, 1 - |z - z'| / d)`` over the three channels, with
    ``z' = index * d`` and ``d = 256 / bins``.
    """
    d = 256.0 / bins
    c = np.asarray(color, dtype=np.float64)
    z = np.asarray(index, dtype=np.float64) * d
    return float(np.prod(np.maximum(0.0, 1.0 - np.abs(c - z) / d)))


def corner_weights(colors: np.ndarray, bins: int):
    """Flat indices and trilinear weights of the 8 corners around each color.

    Colors are clipped to the lattice span [0, 256].

    Returns:
        ``(index, weight)``, both ``(N, 8)``; ``index`` is intp into the
        flattened lattice and ``weight`` rows sum to 1.
    """
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    t = np.clip(colors * (bins / 256.0), 0.0, float(bins))
    base = np.minimum(np.floor(t), bins - 1).astype(np.intp)
    frac = t - base
    # axis_w[:, ch, k] is the weight of offset k along channel ch
    axis_w = np.stack([1.0 - frac, frac], axis=-1)
    n = bins + 1
    index = np.empty((colors.shape[0], 8), dtype=np.intp)
    weight = np.empty((colors.shape[0], 8), dtype=np.float64)
    for k, (dr, dg, db) in enumerate(CORNERS):
        index[:, k] = ((base[:, 0] + dr) * n + base[:, 1] + dg) * n + base[:, 2] + db
        weight[:, k] = axis_w[:, 0, dr] * axis_w[:, 1, dg] * axis_w[:, 2, db]
    return index, weight


def _accumulate(inputs: np.ndarray, targets: np.ndarray, bins: int):
    n_entries = (bins + 1) ** 3
    wsum = np.zeros(n_entries)
    tsum = np.zeros((n_entries, 3))
    _kernels.accumulate(
        np.ascontiguousarray(inputs), np.ascontiguousarray(targets), bins, wsum, tsum
    )
    return wsum, tsum


def _accumulate_numpy(inputs: np.ndarray, targets: np.ndarray, bins: int):
    # reference formulation of _accumulate, kept for cross-checking
    n_entries = (bins + 1) ** 3
    index, weight = corner_weights(inputs, bins)
    flat = index.ravel()
    wsum = np.bincount(flat, weights=weight.ravel(), minlength=n_entries)
    tsum = np.empty((n_entries, 3))
    for ch in range(3):
        tsum[:, ch] = np.bincount(
            flat, weights=(weight * targets[:, ch : ch + 1]).ravel(), minlength=n_entries
        )
    return wsum, tsum


def fit_lut_heuristic(inputs, targets, bins: int, threads: int = 1) -> Lut3D:
    """Fit a LUT as the similarity-weighted average of target colors.

    Each entry's output is ``sum_n w(c_n, v) * t_n / sum_n w(c_n, v)``;
    entries no pair touches stay null.

    Args:
        inputs: ``(N, 3)`` source colors on [0, 255].
        targets: ``(N, 3)`` target colors aligned with ``inputs``.
        bins: bins per axis.
        threads: worker threads for accumulation.  The result is
            bit-identical for every value.

    Returns:
        The fitted :class:`Lut3D`.  Empty input gives an all-null LUT.
    """
    inputs = np.asarray(inputs, dtype=np.float64).reshape(-1, 3)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    if inputs.shape != targets.shape:
        raise ValueError(f"inputs {inputs.shape} and targets {targets.shape} differ")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    n = bins + 1
    wsum = np.zeros(n**3)
    tsum = np.zeros((n**3, 3))
    starts = range(0, inputs.shape[0], CHUNK_SIZE)

    def work(s):
        return _accumulate(inputs[s : s + CHUNK_SIZE], targets[s : s + CHUNK_SIZE], bins)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    # merge in chunk order regardless of which worker produced what
    for w, t in parts:
        wsum += w
        tsum += t

    outputs = np.zeros((n**3, 3))
    touched = wsum > 0
    outputs[touched] = tsum[touched] / wsum[touched, None]
    return Lut3D(bins, outputs.reshape(n, n, n, 3), wsum.reshape(n, n, n))


def evaluate_lut(lut: Lut3D, colors) -> tuple[np.ndarray, np.ndarray]:
    """Map colors through the LUT with null-aware trilinear interpolation.

    Returns:
        ``(values, valid)``: ``(N, 3)`` mapped colors and an ``(N,)`` bool
        array that is False where all eight corners are null (those rows
        of ``values`` are NaN).
    """
    colors = np.ascontiguousarray(np.asarray(colors, dtype=np.float64).reshape(-1, 3))
    values = np.empty_like(colors)
    valid = np.empty(colors.shape[0], dtype=bool)
    _kernels.lookup(
        colors, lut.bins, lut.outputs.reshape(-1, 3), ~lut.null.ravel(), values, valid
    )
    return values, valid


def _evaluate_numpy(lut: Lut3D, colors) -> tuple[np.ndarray, np.ndarray]:
    # reference formulation of evaluate_lut, kept for cross-checking
    index, weight = corner_weights(colors, lut.bins)
    live = ~lut.null.ravel()
    weight = weight * live[index]
    total = weight.sum(axis=1)
    valid = total > 0
    table = lut.outputs.reshape(-1, 3)
    values = np.einsum("nk,nkc->nc", weight, table[index])
    with np.errstate(invalid="ignore", divide="ignore"):
        values = values / total[:, None]
    values[~valid] = np.nan
    return values, valid


@dataclass(frozen=True, eq=False)
class ApplyResult:
    """LUT result frame plus the mask of invalid foreground pixels."""

    frame: np.ndarray
    invalid: np.ndarray


def apply_lut(
    lut: Lut3D,
    frame,
    mask,
    fallback: Optional[np.ndarray] = None,
    threads: int = 1,
) -> ApplyResult:
    """Transform the foreground of ``frame`` through ``lut``.

    Background pixels are copied unchanged.  Invalid pixels take the
    ``fallback`` frame's value, or keep their input value if no fallback
    is given.  Outputs are not clamped.
    """
    frame = as_frame(frame)
    mask = as_mask(mask)
    check_same_size(frame, mask)
    if fallback is not None:
        fallback = as_frame(fallback)
        check_same_size(frame, fallback)

    colors = frame[mask]
    if threads > 1 and colors.shape[0] > CHUNK_SIZE:
        starts = range(0, colors.shape[0], CHUNK_SIZE)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: evaluate_lut(lut, colors[s : s + CHUNK_SIZE]), starts))
        values = np.concatenate([p[0] for p in parts])
        valid = np.concatenate([p[1] for p in parts])
    else:
        values, valid = evaluate_lut(lut, colors)

    source = fallback if fallback is not None else frame
    values[~valid] = source[mask][~valid]
    out = np.array(frame)
    out[mask] = values
    invalid = np.zeros(mask.shape, dtype=bool)
    invalid[mask] = ~valid
    out.setflags(write=False)
    invalid.setflags(write=False)
    return ApplyResult(out, invalid)


def invalid_ratio(result: ApplyResult, mask) -> float:
    """Fraction of foreground pixels that were invalid; 0 for empty foreground."""
    mask = as_mask(mask)
    check_same_size(result.invalid, mask)
    n_fg = int(np.count_nonzero(mask))
    if n_fg == 0:
        return 0.0
    return float(np.count_nonzero(result.invalid & mask)) / n_fg

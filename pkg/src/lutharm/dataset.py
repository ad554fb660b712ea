"""Composite-video synthesis from real clips and authored LUTs.

A composite keeps the real background and replaces the foreground with its
LUT-transferred colors.  One LUT is drawn per sample and applied to every
frame.  Candidate LUT pools are thinned to a mutually diverse subset by
repeatedly dropping one member of the closest remaining pair.
"""

from __future__ import annotations

import logging
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import VideoSample, as_frame, as_mask, check_same_size, foreground_ratio
from .lut import Lut3D, evaluate_lut
from .metrics import fmse

logger = logging.getLogger(__name__)

DEFAULT_MIN_RATIO = 0.01
DEFAULT_LENGTH = 20
DEFAULT_K = 100


def make_composite(real, mask, lut: Lut3D) -> np.ndarray:
    """``M * f(I) + (1 - M) * I`` for a dense LUT ``f``."""
    if not lut.is_dense():
        raise ValueError(f"composite LUT must be dense; {lut.n_null} null entries")
    real = as_frame(real)
    mask = as_mask(mask)
    check_same_size(real, mask)
    out = np.array(real)
    if mask.any():
        out[mask], _ = evaluate_lut(lut, real[mask])
    return as_frame(out)


def lut_pairwise_distance(luts: Sequence[Lut3D], probes) -> np.ndarray:
    """Mean foreground MSE between composites made with each pair of LUTs.

    Args:
        luts: at least two dense LUTs.
        probes: ``(frame, mask)`` pairs; probes with an empty foreground are
            skipped with a warning.

    Returns:
        Symmetric ``(L, L)`` matrix with zero diagonal.
    """
    if len(luts) < 2:
        raise ValueError("need at least two LUTs")
    usable = []
    for k, (frame, mask) in enumerate(probes):
        mask = as_mask(mask)
        if not mask.any():
            logger.warning("probe %d has an empty foreground; skipped", k)
            continue
        usable.append((as_frame(frame), mask))
    if not usable:
        raise ValueError("no probe has a foreground")

    n = len(luts)
    dist = np.zeros((n, n))
    for frame, mask in usable:
        fg = [evaluate_lut(lut, frame[mask])[0] for lut in luts]
        for a in range(n):
            for b in range(a + 1, n):
                d = fg[a] - fg[b]
                dist[a, b] += float(np.sum(d * d)) / (3 * d.shape[0])
    dist /= len(usable)
    return dist + dist.T


def select_diverse_luts(distance, k: int) -> list:
    """Thin a pool to ``k`` members by repeatedly breaking up the closest pair.

    Each round takes the closest remaining pair (ties: lexicographically
    smallest index pair) and removes the member with the smaller sum of
    distances to the other remaining items (ties: the larger index).

    Returns:
        Surviving indices in increasing order.
    """
    dist = np.asarray(distance, dtype=np.float64)
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {dist.shape}")
    if not 0 <= k <= n:
        raise ValueError(f"cannot keep {k} of {n} items")
    alive = list(range(n))
    while len(alive) > k:
        sub = dist[np.ix_(alive, alive)]
        masked = sub + np.diag(np.full(len(alive), np.inf))
        flat = int(np.argmin(masked))  # row-major: first minimum is the smallest (a, b)
        a, b = divmod(flat, len(alive))
        a, b = min(a, b), max(a, b)
        sums = sub.sum(axis=1)
        drop = a if sums[a] < sums[b] else b
        del alive[drop]
    return alive


def filter_samples(
    frames: Sequence[np.ndarray],
    object_masks: Mapping[str, Sequence[Optional[np.ndarray]]],
    video_id: str = "video",
    min_ratio: float = DEFAULT_MIN_RATIO,
    length: int = DEFAULT_LENGTH,
) -> list:
    """Cut per-object samples out of an annotated clip.

    For each object the first run of ``length`` consecutive frames in which
    it is present (non-empty mask) becomes a sample; samples whose mean
    foreground ratio is below ``min_ratio`` are dropped.

    Args:
        frames: the clip's frames.
        object_masks: per object id, one mask (or None when absent) per frame.
    """
    samples = []
    for obj, masks in object_masks.items():
        if len(masks) != len(frames):
            raise ValueError(f"object {obj!r}: {len(masks)} masks for {len(frames)} frames")
        present = [m is not None and bool(np.any(m)) for m in masks]
        start = None
        run = 0
        for j, p in enumerate(present):
            run = run + 1 if p else 0
            if run == length:
                start = j - length + 1
                break
        if start is None:
            continue
        sel = range(start, start + length)
        sel_masks = [as_mask(masks[j]) for j in sel]
        ratio = float(np.mean([foreground_ratio(m) for m in sel_masks]))
        if ratio < min_ratio:
            logger.info("object %s: mean foreground ratio %.4f below %.4f", obj, ratio, min_ratio)
            continue
        samples.append(
            VideoSample(
                id=f"{video_id}_{obj}",
                frames=[frames[j] for j in sel],
                masks=sel_masks,
                extra={"start": start},
            )
        )
    return samples


def synthesize_dataset(reals: Sequence[VideoSample], luts, seed: int = 0):
    """Make one composite sample per real sample with a randomly drawn LUT.

    Args:
        reals: real samples (their ``frames`` are taken as ground truth).
        luts: dense LUTs, as a mapping ``{lut_id: Lut3D}`` or a sequence
            (ids are then the string indices).
        seed: seed for the LUT draw.

    Returns:
        ``(composites, manifest)``.  Composite samples carry the real frames
        as ``real`` and the drawn ``lut_id``; the manifest records the seed
        and, per sample, its id, frame count, LUT id and review status.
    """
    if not isinstance(luts, Mapping):
        luts = {str(i): lut for i, lut in enumerate(luts)}
    if not luts:
        raise ValueError("empty LUT pool")
    ids = sorted(luts)
    for lut_id in ids:
        if not luts[lut_id].is_dense():
            raise ValueError(f"LUT {lut_id!r} has null entries")
    rng = np.random.default_rng(seed)
    composites = []
    entries = []
    for sample in reals:
        lut_id = ids[int(rng.integers(len(ids)))]
        lut = luts[lut_id]
        frames = [make_composite(f, m, lut) for f, m in zip(sample.frames, sample.masks)]
        composites.append(
            VideoSample(
                id=sample.id,
                frames=frames,
                masks=sample.masks,
                flows=sample.flows,
                real=sample.frames,
                lut_id=lut_id,
            )
        )
        entries.append({"id": sample.id, "frames": len(sample), "lut_id": lut_id, "review": ""})
    return composites, {"seed": seed, "samples": entries}

"""Neighbor-window LUT refinement of per-frame harmonization results.

For frame ``i`` the composite foreground colors of its ``2T`` neighbors are
paired with the harmonizer's outputs at the same pixels, a LUT is fit to
those pairs and applied to frame ``i``.  The LUT result is then fused with
the frame's own harmonizer result.

Processing is two-phase: every frame is harmonized first, then the LUT
stage runs per frame (optionally on a thread pool, with results identical
for any pool size).
"""

from __future__ import annotations

import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .core import VideoSample, as_frame, as_mask, check_same_size
from .lut import Lut3D, apply_lut, fit_lut_heuristic
from .metrics import MetricReport, evaluate_frames

logger = logging.getLogger(__name__)

DEFAULT_T = 8
DEFAULT_B = 32


class Harmonizer(Protocol):
    """Per-frame harmonizer: adjusts foreground colors, leaves background alone."""

    name: str

    def harmonize(self, frame: np.ndarray, mask: np.ndarray, index: Optional[int] = None) -> np.ndarray:
        ...


class IdentityHarmonizer:
    name = "identity"

    def harmonize(self, frame, mask, index=None):
        return as_frame(frame)


class ChannelAffineHarmonizer:
    """Match foreground per-channel mean and std to the background's.

    ``strength`` blends between the input (0) and the full statistics
    transfer (1).  ``noise`` adds i.i.d. Gaussian noise (gray levels) to the
    foreground.  ``jitter`` adds a per-frame random color-mapping error: a
    smooth function of the input color, a sum of random sinusoids whose
    total std is ``jitter`` gray levels, redrawn for every frame.  Both are
    seeded from ``seed`` and the frame index (or the frame bytes when no
    index is given), so results are reproducible.
    """

    JITTER_WAVES = 16

    name = "affine"

    def __init__(self, strength: float = 1.0, noise: float = 0.0, jitter: float = 0.0, seed: int = 0):
        self.strength = strength
        self.noise = noise
        self.jitter = jitter
        self.seed = seed

    def _rng(self, frame, index):
        key = index if index is not None else zlib.crc32(np.ascontiguousarray(frame).tobytes())
        return np.random.default_rng([self.seed, int(key)])

    def harmonize(self, frame, mask, index=None):
        frame = as_frame(frame)
        mask = as_mask(mask)
        check_same_size(frame, mask)
        out = np.array(frame)
        fg = frame[mask]
        bg = frame[~mask]
        if fg.shape[0] == 0:
            return as_frame(out)
        if bg.shape[0] > 0:
            mu_f, sd_f = fg.mean(axis=0), fg.std(axis=0)
            mu_b, sd_b = bg.mean(axis=0), bg.std(axis=0)
            gain = np.where(sd_f > 1e-6, sd_b / np.maximum(sd_f, 1e-6), 1.0)
            mapped = (fg - mu_f) * gain + mu_b
            fg = (1 - self.strength) * fg + self.strength * mapped
        if self.noise > 0 or self.jitter > 0:
            rng = self._rng(frame, index)
            if self.jitter > 0:
                k = self.JITTER_WAVES
                amp = self.jitter * np.sqrt(2.0 / k)
                src = frame[mask] / 255.0
                for ch in range(3):
                    freq = rng.normal(0.0, 2 * np.pi, (k, 3))
                    phase = rng.uniform(0, 2 * np.pi, k)
                    fg[:, ch] += amp * np.sin(src @ freq.T + phase).sum(axis=1)
            if self.noise > 0:
                fg = fg + rng.normal(0.0, self.noise, fg.shape)
        out[mask] = np.clip(fg, 0.0, 255.0)
        return as_frame(out)


class OracleHarmonizer:
    """Returns the ground-truth frame; needs the frame index.  For testing."""

    name = "oracle"

    def __init__(self, truth: Sequence[np.ndarray]):
        self.truth = [as_frame(t) for t in truth]

    def harmonize(self, frame, mask, index=None):
        if index is None:
            raise ValueError("the oracle harmonizer needs the frame index")
        frame = as_frame(frame)
        mask = as_mask(mask)
        out = np.array(frame)
        out[mask] = self.truth[index][mask]
        return as_frame(out)


def get_harmonizer(name: str, sample: Optional[VideoSample] = None, **kwargs) -> Harmonizer:
    if name == "identity":
        return IdentityHarmonizer()
    if name in ("affine", "channel_affine"):
        return ChannelAffineHarmonizer(**kwargs)
    if name == "oracle":
        if sample is None or sample.real is None:
            raise ValueError("the oracle harmonizer needs a sample with ground truth")
        return OracleHarmonizer(sample.real)
    raise ValueError(f"unknown harmonizer {name!r}")


@dataclass(frozen=True)
class Fusion:
    """How the LUT result and harmonizer result are combined."""

    kind: str = "lut"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("lut", "harm", "blend"):
            raise ValueError(f"unknown fusion {self.kind!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"blend weight must lie in [0, 1], got {self.alpha}")

    @classmethod
    def lut_only(cls):
        return cls("lut", 1.0)

    @classmethod
    def harmonizer_only(cls):
        return cls("harm", 0.0)

    @classmethod
    def blend(cls, alpha: float):
        return cls("blend", alpha)

    @property
    def weight(self) -> float:
        return {"lut": 1.0, "harm": 0.0}.get(self.kind, self.alpha)

    def fuse(self, lut_result, harm_result, mask, invalid) -> np.ndarray:
        if self.kind == "lut":
            return lut_result
        if self.kind == "harm":
            return harm_result
        a = self.alpha
        out = np.array(harm_result)
        region = np.asarray(mask) & ~np.asarray(invalid)
        out[region] = a * lut_result[region] + (1 - a) * harm_result[region]
        return out


def neighbor_window(i: int, T: int, n: int) -> list:
    """Indices ``i-T .. i-1, i+1 .. i+T``, clamped to ``[0, n-1]`` by replication."""
    if not 0 <= i < n:
        raise IndexError(f"frame {i} out of range for {n} frames")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    before = [max(j, 0) for j in range(i - T, i)]
    after = [min(j, n - 1) for j in range(i + 1, i + T + 1)]
    return before + after


def collect_pairs(sample: VideoSample, harmonized: Sequence[np.ndarray], window: Sequence[int]):
    """Stack (composite, harmonized) foreground colors over ``window``.

    Returns:
        ``(inputs, targets)``, each ``(N, 3)``, in window order and row-major
        order within each frame.  Repeated indices contribute repeatedly.
    """
    if len(harmonized) != len(sample):
        raise ValueError(f"{len(harmonized)} harmonized frames for a {len(sample)}-frame sample")
    if not window:
        return np.zeros((0, 3)), np.zeros((0, 3))
    inputs = [sample.frames[j][sample.masks[j]] for j in window]
    targets = [np.asarray(harmonized[j])[sample.masks[j]] for j in window]
    return np.concatenate(inputs), np.concatenate(targets)


@dataclass
class FrameResult:
    refined: np.ndarray
    lut_result: np.ndarray
    harm_result: np.ndarray
    invalid: np.ndarray
    lut: Lut3D
    seconds: float = 0.0


def _fit(inputs, targets, B, method, **opts) -> Lut3D:
    if method == "heuristic":
        return fit_lut_heuristic(inputs, targets, B)
    from . import lutopt

    if inputs.shape[0] == 0:
        return fit_lut_heuristic(inputs, targets, B)
    if method == "gd":
        return lutopt.fit_lut_gd(inputs, targets, B, **opts)
    if method == "ls":
        return lutopt.fit_lut_ls_oracle(inputs, targets, B)
    raise ValueError(f"unknown fitting method {method!r}")


def _lut_stage(sample, harmonized, i, T, B, fusion, method, fg_cache, **opts) -> FrameResult:
    start = time.perf_counter()
    window = neighbor_window(i, T, len(sample))
    if window:
        inputs = np.concatenate([fg_cache[0][j] for j in window])
        targets = np.concatenate([fg_cache[1][j] for j in window])
    else:
        inputs = targets = np.zeros((0, 3))
    lut = _fit(inputs, targets, B, method, **opts)
    applied = apply_lut(lut, sample.frames[i], sample.masks[i], fallback=harmonized[i])
    seconds = time.perf_counter() - start
    refined = fusion.fuse(applied.frame, harmonized[i], sample.masks[i], applied.invalid)
    return FrameResult(as_frame(refined), applied.frame, harmonized[i], applied.invalid, lut, seconds)


def _foreground_cache(sample, harmonized):
    comp = [f[m] for f, m in zip(sample.frames, sample.masks)]
    harm = [np.asarray(h)[m] for h, m in zip(harmonized, sample.masks)]
    return comp, harm


def harmonize_all(sample: VideoSample, harmonizer: Harmonizer) -> list:
    """First phase: run the per-frame harmonizer over every frame."""
    return [harmonizer.harmonize(f, m, index=i) for i, (f, m) in enumerate(zip(sample.frames, sample.masks))]


def harmonize_frame(
    sample: VideoSample,
    i: int,
    harmonizer: Optional[Harmonizer] = None,
    T: int = DEFAULT_T,
    B: int = DEFAULT_B,
    fusion: Fusion = Fusion(),
    harmonized: Optional[Sequence[np.ndarray]] = None,
    method: str = "heuristic",
    **opts,
) -> FrameResult:
    """Harmonize frame ``i`` with neighbor-window LUT refinement.

    Either ``harmonizer`` or precomputed ``harmonized`` frames must be
    given.  With ``T=0`` the window is empty, every foreground pixel is
    invalid and the LUT result equals the harmonizer result.
    """
    if harmonized is None:
        if harmonizer is None:
            raise ValueError("need a harmonizer or precomputed harmonized frames")
        harmonized = harmonize_all(sample, harmonizer)
    harmonized = [as_frame(h) for h in harmonized]
    cache = _foreground_cache(sample, harmonized)
    return _lut_stage(sample, harmonized, i, T, B, fusion, method, cache, **opts)


def fit_blend_weight(triples) -> float:
    """Scalar blend weight minimizing the fused foreground MSE.

    Args:
        triples: iterable of ``(lut_result, harm_result, gt, mask)`` or
            ``(lut_result, harm_result, gt, mask, invalid)``; invalid
            pixels are excluded.

    Returns:
        ``clamp(sum <l - h, g - h> / sum ||l - h||^2, 0, 1)``; 0 (with a
        warning) when the LUT and harmonizer results coincide.
    """
    num = 0.0
    den = 0.0
    for item in triples:
        l, h, g, m = (np.asarray(x, dtype=np.float64) for x in item[:4])
        region = m.astype(bool)
        if len(item) > 4:
            region &= ~np.asarray(item[4], dtype=bool)
        dl = l[region] - h[region]
        dg = g[region] - h[region]
        num += float(np.sum(dl * dg))
        den += float(np.sum(dl * dl))
    if den == 0:
        logger.warning("LUT and harmonizer results coincide; blend weight set to 0")
        return 0.0
    return float(min(1.0, max(0.0, num / den)))


@dataclass
class VideoResult:
    refined: list
    lut_results: list
    harm_results: list
    invalid: list
    invalid_ratios: list
    timings: list
    report: Optional[MetricReport] = None
    lut_report: Optional[MetricReport] = None
    harm_report: Optional[MetricReport] = None
    luts: list = field(default_factory=list)

    @property
    def mean_invalid_ratio(self) -> float:
        return float(np.mean(self.invalid_ratios))

    @property
    def mean_seconds(self) -> float:
        return float(np.mean(self.timings))


def harmonize_video(
    sample: VideoSample,
    harmonizer: Harmonizer,
    T: int = DEFAULT_T,
    B: int = DEFAULT_B,
    fusion: Fusion = Fusion(),
    threads: int = 1,
    method: str = "heuristic",
    evaluate: bool = True,
    keep_luts: bool = False,
    **opts,
) -> VideoResult:
    """Run the full two-phase pipeline over a clip.

    Metric reports are filled in when the sample carries ground truth and
    ``evaluate`` is set.  ``timings`` holds the per-frame LUT fit+apply time.
    """
    harmonized = harmonize_all(sample, harmonizer)
    cache = _foreground_cache(sample, harmonized)

    def work(i):
        return _lut_stage(sample, harmonized, i, T, B, fusion, method, cache, **opts)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(work, range(len(sample))))
    else:
        frames = [work(i) for i in range(len(sample))]

    result = VideoResult(
        refined=[f.refined for f in frames],
        lut_results=[f.lut_result for f in frames],
        harm_results=[f.harm_result for f in frames],
        invalid=[f.invalid for f in frames],
        invalid_ratios=[
            float(np.count_nonzero(f.invalid)) / max(1, int(np.count_nonzero(m)))
            for f, m in zip(frames, sample.masks)
        ],
        timings=[f.seconds for f in frames],
        luts=[f.lut for f in frames] if keep_luts else [],
    )
    if evaluate and sample.real is not None:
        result.report = evaluate_frames(result.refined, sample.real, sample.masks)
        result.lut_report = evaluate_frames(result.lut_results, sample.real, sample.masks)
        result.harm_report = evaluate_frames(result.harm_results, sample.real, sample.masks)
    return result

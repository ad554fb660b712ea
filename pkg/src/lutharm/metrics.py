"""Harmonization quality metrics and Plackett-Luce ranking scores.

All frame metrics work on the [0, 255] scale.  MSE and PSNR cover the whole
frame; fMSE and fSSIM are restricted to the foreground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy import ndimage

from .core import as_frame, as_mask, check_same_size

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2

PL_RIDGE = 1e-6
PL_TOL = 1e-9
PL_MAX_ITER = 10_000


def _pair(pred, gt):
    pred, gt = as_frame(pred), as_frame(gt)
    if pred.shape != gt.shape:
        check_same_size(pred, gt)
    return pred, gt


def mse(pred, gt) -> float:
    pred, gt = _pair(pred, gt)
    return float(np.mean((pred - gt) ** 2))


def fmse(pred, gt, mask) -> float:
    """Squared error summed over foreground pixels, divided by ``3 * #fg``."""
    pred, gt = _pair(pred, gt)
    mask = as_mask(mask)
    check_same_size(pred, mask)
    n_fg = int(np.count_nonzero(mask))
    if n_fg == 0:
        raise ValueError("fMSE undefined for an empty foreground")
    diff = pred[mask] - gt[mask]
    return float(np.sum(diff * diff) / (3 * n_fg))


def psnr_from_mse(value: float) -> float:
    if value < 255.0**2 * 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0**2 / value))


def psnr(pred, gt) -> float:
    """Whole-frame PSNR in dB with peak 255, capped at 100 dB."""
    return psnr_from_mse(mse(pred, gt))


def _gaussian_kernel() -> np.ndarray:
    radius = SSIM_WINDOW // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return k / k.sum()


def _blur(img: np.ndarray) -> np.ndarray:
    k = _gaussian_kernel()
    out = ndimage.correlate1d(img, k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def ssim_map(pred, gt) -> np.ndarray:
    """Per-pixel SSIM, channel-averaged, with an 11x11 Gaussian window (sigma 1.5)."""
    pred, gt = _pair(pred, gt)
    h, w = pred.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"frame {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    maps = []
    for ch in range(3):
        x, y = pred[..., ch], gt[..., ch]
        mx, my = _blur(x), _blur(y)
        sxx = _blur(x * x) - mx * mx
        syy = _blur(y * y) - my * my
        sxy = _blur(x * y) - mx * my
        num = (2 * mx * my + SSIM_C1) * (2 * sxy + SSIM_C2)
        den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2)
        maps.append(num / den)
    return np.mean(maps, axis=0)


def fssim(pred, gt, mask) -> float:
    """SSIM map averaged over foreground pixels."""
    mask = as_mask(mask)
    smap = ssim_map(pred, gt)
    check_same_size(smap[..., None], mask)
    if not mask.any():
        raise ValueError("fSSIM undefined for an empty foreground")
    return float(np.mean(smap[mask]))


@dataclass
class MetricReport:
    """Per-frame metrics and their means over frames."""

    frames: list = field(default_factory=list)

    METRICS = ("mse", "fmse", "psnr", "fssim")

    def add(self, pred, gt, mask) -> dict:
        row = {
            "mse": mse(pred, gt),
            "fmse": fmse(pred, gt, mask),
            "psnr": psnr(pred, gt),
            "fssim": fssim(pred, gt, mask),
        }
        self.frames.append(row)
        return row

    def mean(self, name: str) -> float:
        if not self.frames:
            return float("nan")
        return float(np.mean([row[name] for row in self.frames]))

    @property
    def mse(self) -> float:
        return self.mean("mse")

    @property
    def fmse(self) -> float:
        return self.mean("fmse")

    @property
    def psnr(self) -> float:
        return self.mean("psnr")

    @property
    def fssim(self) -> float:
        return self.mean("fssim")

    def to_dict(self) -> dict:
        return {
            "mean": {name: self.mean(name) for name in self.METRICS},
            "frames": [dict(row) for row in self.frames],
        }

    def to_table(self) -> str:
        lines = [f"{'frame':>6} {'MSE':>10} {'fMSE':>10} {'PSNR':>8} {'fSSIM':>8}"]
        for i, row in enumerate(self.frames):
            lines.append(
                f"{i:>6} {row['mse']:>10.4f} {row['fmse']:>10.4f} "
                f"{row['psnr']:>8.3f} {row['fssim']:>8.4f}"
            )
        lines.append(
            f"{'mean':>6} {self.mse:>10.4f} {self.fmse:>10.4f} "
            f"{self.psnr:>8.3f} {self.fssim:>8.4f}"
        )
        return "\n".join(lines)


def evaluate_frames(preds, gts, masks) -> MetricReport:
    if not (len(preds) == len(gts) == len(masks)):
        raise ValueError("pred, gt and mask lists differ in length")
    report = MetricReport()
    for p, g, m in zip(preds, gts, masks):
        report.add(p, g, m)
    return report


def _encode_rankings(rankings: Sequence[Sequence[Hashable]]):
    if len(rankings) == 0:
        raise ValueError("at least one ranking is required")
    items = sorted(set(rankings[0]), key=lambda x: (str(type(x)), x))
    if len(items) != len(rankings[0]) or len(items) < 2:
        raise ValueError(f"malformed ranking {list(rankings[0])!r}")
    code = {item: i for i, item in enumerate(items)}
    encoded = np.empty((len(rankings), len(items)), dtype=np.intp)
    for m, ranking in enumerate(rankings):
        ranking = list(ranking)
        if len(ranking) != len(items) or set(ranking) != set(items):
            raise ValueError(f"ranking {m} is not a permutation of {items!r}: {ranking!r}")
        encoded[m] = [code[x] for x in ranking]
    return items, encoded


def plackett_luce_scores(
    rankings: Sequence[Sequence[Hashable]],
    ridge: float = PL_RIDGE,
    tol: float = PL_TOL,
    max_iter: int = PL_MAX_ITER,
) -> dict:
    """Fit Plackett-Luce worths to full rankings by minorization-maximization.

    Each ranking lists items best first.  A Gamma(1 + ridge, 1) prior on every
    worth keeps the estimate finite when an item never wins (or always
    wins); with ``ridge=1e-6`` it is negligible on mixed data.

    Returns:
        ``{item: score}`` in sorted item order, where ``score`` is the
        normalized worth, i.e. the model probability of ranking first.
        Scores sum to 1.
    """
    items, R = _encode_rankings(rankings)
    M, K = R.shape
    # wins: times chosen at a stage with >= 2 remaining items
    wins = np.bincount(R[:, : K - 1].ravel(), minlength=K).astype(np.float64)
    position = np.empty_like(R)
    position[np.arange(M)[:, None], R] = np.arange(K)
    stage_of = np.minimum(position, K - 2)

    theta = np.ones(K)
    scores = theta / theta.sum()
    for _ in range(max_iter):
        worth = theta[R]
        remaining = np.cumsum(worth[:, ::-1], axis=1)[:, ::-1][:, : K - 1]
        reach = np.cumsum(1.0 / remaining, axis=1)
        # stage_of is indexed [ranking, item], so columns line up with items
        denom = np.take_along_axis(reach, stage_of, axis=1).sum(axis=0)
        theta = (wins + ridge) / (denom + ridge)
        new_scores = theta / theta.sum()
        delta = float(np.max(np.abs(new_scores - scores)))
        scores = new_scores
        if delta < tol:
            break
    return {item: float(s) for item, s in zip(items, scores)}


def plackett_luce_log_likelihood(rankings, worths) -> float:
    """Log-likelihood of full rankings under worths ``{item: worth}``."""
    total = 0.0
    for ranking in rankings:
        w = np.array([worths[x] for x in ranking], dtype=np.float64)
        tail = np.cumsum(w[::-1])[::-1]
        total += float(np.sum(np.log(w[:-1]) - np.log(tail[:-1])))
    return total

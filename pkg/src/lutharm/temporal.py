"""Flow warping, occlusion-aware mask propagation and temporal loss.

Flows are backward flows on the grid of the later frame: ``flow[y, x]``
gives the displacement from pixel ``(x, y)`` of frame ``j + 1`` to its
position in frame ``j``.  Warping therefore gathers from the earlier frame
and needs no splatting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import as_flow, as_frame, as_mask, check_same_size

DEFAULT_LAMBDA = 50.0
DEFAULT_THRESHOLD = 4.5


def backward_warp(source, flow) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly sample ``source`` at ``p + flow(p)`` for every pixel ``p``.

    ``source`` may be a frame ``(H, W, C)`` or a mask/field ``(H, W)``;
    masks are warped as real-valued fields.

    Returns:
        ``(warped, validity)``.  Samples that land outside the image are
        clamped to the border and get validity 0; all others get 1.
    """
    src = np.asarray(source, dtype=np.float64)
    flow = as_flow(flow)
    check_same_size(src, flow)
    h, w = flow.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = xs + flow[..., 0]
    sy = ys + flow[..., 1]
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.minimum(np.floor(sx).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(sy).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    if src.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    warped = top * (1 - fy) + bottom * fy
    return warped, inside.astype(np.float64)


def occlusion_mask(gt_next, warped_gt, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """``exp(-lam * ||d||^2)`` per pixel, ``d`` the RGB difference scaled to [0, 1]."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    a = as_frame(gt_next)
    b = np.asarray(warped_gt, dtype=np.float64)
    check_same_size(a, b)
    delta = (a - b) / 255.0
    return np.exp(-lam * np.sum(delta * delta, axis=-1))


def propagate_mask(mask, flow, occlusion) -> np.ndarray:
    """Soft mask of the next frame: occlusion x warped mask x warp validity."""
    mask = as_mask(mask)
    occlusion = np.asarray(occlusion, dtype=np.float64)
    check_same_size(mask, occlusion)
    warped, valid = backward_warp(mask.astype(np.float64), flow)
    return np.clip(occlusion * warped * valid, 0.0, 1.0)


def temporal_loss(pred_prev, pred_next, flow, soft_mask) -> float:
    """Masked squared difference of the warped previous frame and the next frame.

    ``sum(M^2 * ||S(prev) - next||^2) / (3 * sum(M))`` on the [0, 255] scale,
    where ``M`` is ``soft_mask`` times the warp validity.

    Raises:
        ValueError: if the effective mask has zero mass.
    """
    prev = as_frame(pred_prev)
    nxt = as_frame(pred_next)
    m = np.asarray(soft_mask, dtype=np.float64)
    check_same_size(prev, nxt, m)
    warped, valid = backward_warp(prev, flow)
    m = m * valid
    mass = float(m.sum())
    if mass <= 0:
        raise ValueError("temporal loss undefined for a zero-mass mask")
    diff = warped - nxt
    return float(np.sum(m * m * np.sum(diff * diff, axis=-1)) / (3 * mass))


@dataclass
class EvalPair:
    """Two adjacent frames with the flow between them.

    ``flow`` is the backward flow on the grid of the ``*_next`` frames and
    ``mask_prev`` the annotated foreground of the earlier frame.
    """

    gt_prev: np.ndarray
    gt_next: np.ndarray
    flow: np.ndarray
    mask_prev: np.ndarray
    pred_prev: Optional[np.ndarray] = None
    pred_next: Optional[np.ndarray] = None
    index: int = 0

    def next_mask(self, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
        warped_gt, _ = backward_warp(self.gt_prev, self.flow)
        return propagate_mask(self.mask_prev, self.flow, occlusion_mask(self.gt_next, warped_gt, lam))

    def ground_truth_loss(self, lam: float = DEFAULT_LAMBDA) -> float:
        return temporal_loss(self.gt_prev, self.gt_next, self.flow, self.next_mask(lam))

    def prediction_loss(self, lam: float = DEFAULT_LAMBDA) -> float:
        if self.pred_prev is None or self.pred_next is None:
            raise ValueError("pair has no predictions")
        return temporal_loss(self.pred_prev, self.pred_next, self.flow, self.next_mask(lam))


def select_eval_pairs(
    pairs: Sequence[EvalPair],
    threshold: float = DEFAULT_THRESHOLD,
    lam: float = DEFAULT_LAMBDA,
) -> list:
    """Keep the pairs whose ground-truth temporal loss is below ``threshold``.

    A pair with exactly zero loss is always kept, so ``threshold=0`` keeps
    the perfectly consistent pairs.  Pairs whose propagated mask is empty
    cannot be scored and are skipped.  Input order is preserved.
    """
    selected = []
    for pair in pairs:
        try:
            tl = pair.ground_truth_loss(lam)
        except ValueError:
            continue
        if tl < threshold or tl == 0:
            selected.append(pair)
    return selected


def video_pairs(gts, masks, flows, preds=None) -> list:
    """Build the adjacent-frame pairs of a clip; ``flows[i]`` links frames i, i+1."""
    if len(flows) != len(gts) - 1:
        raise ValueError(f"expected {len(gts) - 1} flows, got {len(flows)}")
    pairs = []
    for i, flow in enumerate(flows):
        pairs.append(
            EvalPair(
                gt_prev=gts[i],
                gt_next=gts[i + 1],
                flow=flow,
                mask_prev=masks[i],
                pred_prev=None if preds is None else preds[i],
                pred_next=None if preds is None else preds[i + 1],
                index=i,
            )
        )
    return pairs


def video_temporal_loss(
    preds,
    gts,
    masks,
    flows,
    lam: float = DEFAULT_LAMBDA,
    threshold: Optional[float] = DEFAULT_THRESHOLD,
) -> tuple[float, dict]:
    """Mean temporal loss of ``preds`` over the pairs that pass selection.

    Returns:
        ``(mean_tl, per_pair)`` where ``per_pair`` maps the index of each
        selected pair to its loss.  ``mean_tl`` is NaN if nothing is selected.
    """
    pairs = video_pairs(gts, masks, flows, preds)
    pairs = select_eval_pairs(pairs, np.inf if threshold is None else threshold, lam)
    per_pair = {p.index: p.prediction_loss(lam) for p in pairs}
    if not per_pair:
        return float("nan"), per_pair
    return float(np.mean(list(per_pair.values()))), per_pair

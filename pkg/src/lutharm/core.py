"""Shared array conventions and the video sample container.

Frames are ``(H, W, 3)`` float64 arrays on the [0, 255] scale, masks are
``(H, W)`` bool arrays (True = foreground) and flows are ``(H, W, 2)``
float arrays holding ``(u, v)`` pixel displacements.  Plain ndarrays are
used throughout; the helpers here only validate and normalize them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when arrays that must share a spatial size do not."""


def as_frame(data) -> np.ndarray:
    """Return ``data`` as a read-only ``(H, W, 3)`` float64 frame."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"frame must have shape (H, W, 3), got {arr.shape}")
    arr.setflags(write=False)
    return arr


def as_mask(data) -> np.ndarray:
    """Return ``data`` as a read-only ``(H, W)`` bool mask."""
    arr = np.array(data)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim != 2:
        raise DimensionError(f"mask must have shape (H, W), got {arr.shape}")
    arr = arr.astype(bool)
    arr.setflags(write=False)
    return arr


def as_flow(data) -> np.ndarray:
    """Return ``data`` as a read-only ``(H, W, 2)`` float64 flow field."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise DimensionError(f"flow must have shape (H, W, 2), got {arr.shape}")
    arr.setflags(write=False)
    return arr


def check_same_size(*arrays: np.ndarray) -> tuple[int, int]:
    """Check that all arrays share ``(H, W)`` and return it."""
    sizes = {a.shape[:2] for a in arrays}
    if len(sizes) != 1:
        raise DimensionError(f"spatial sizes differ: {sorted(sizes)}")
    return sizes.pop()


def foreground_ratio(mask: np.ndarray) -> float:
    return float(np.count_nonzero(mask)) / mask.size


def foreground_pixels(frame: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Foreground colors of ``frame`` as an ``(N, 3)`` array in row-major order."""
    check_same_size(frame, mask)
    return np.asarray(frame, dtype=np.float64)[np.asarray(mask, dtype=bool)]


@dataclass
class VideoSample:
    """An ordered clip: composite frames, masks and optional extras.

    ``frames`` are the inputs the pipeline harmonizes (composites for a
    synthesized sample, reals for a raw one).  ``real`` holds ground truth
    when known.  ``flows[i]`` is the backward flow on the grid of frame
    ``i + 1`` pointing into frame ``i``.
    """

    id: str
    frames: list
    masks: list
    flows: Optional[list] = None
    real: Optional[list] = None
    lut_id: Optional[str] = None
    review: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = [as_frame(f) for f in self.frames]
        self.masks = [as_mask(m) for m in self.masks]
        if not self.frames:
            raise ValueError(f"sample {self.id!r} has no frames")
        if len(self.frames) != len(self.masks):
            raise ValueError(
                f"sample {self.id!r}: {len(self.frames)} frames but {len(self.masks)} masks"
            )
        check_same_size(*self.frames, *self.masks)
        if self.real is not None:
            self.real = [as_frame(f) for f in self.real]
            if len(self.real) != len(self.frames):
                raise ValueError(f"sample {self.id!r}: ground truth length mismatch")
            check_same_size(self.frames[0], *self.real)
        if self.flows is not None:
            self.flows = [as_flow(f) for f in self.flows]
            if len(self.flows) != len(self.frames) - 1:
                raise ValueError(
                    f"sample {self.id!r}: expected {len(self.frames) - 1} flows, "
                    f"got {len(self.flows)}"
                )
            if self.flows:
                check_same_size(self.frames[0], *self.flows)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]

    def mean_foreground_ratio(self) -> float:
        return float(np.mean([foreground_ratio(m) for m in self.masks]))


def stack_pairs(inputs: Sequence[np.ndarray], targets: Sequence[np.ndarray]):
    """Concatenate per-frame pixel lists into ``(N, 3)`` input/target arrays."""
    if len(inputs) != len(targets):
        raise ValueError("input and target lists differ in length")
    if not inputs:
        empty = np.zeros((0, 3))
        return empty, empty.copy()
    return (
        np.concatenate([np.asarray(a, dtype=np.float64).reshape(-1, 3) for a in inputs]),
        np.concatenate([np.asarray(a, dtype=np.float64).reshape(-1, 3) for a in targets]),
    )

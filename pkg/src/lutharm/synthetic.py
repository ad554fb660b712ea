"""Deterministic synthetic clips and LUTs for demos and tests.

The foreground is a textured ellipse translating at a constant sub-pixel
velocity over a static textured background, so the backward flow is known
exactly: the foreground's displacement inside the ellipse, zero elsewhere.
"""

from __future__ import annotations

import numpy as np

from .core import VideoSample
from .lut import Lut3D, lut_from_function


def _texture(x, y, rng, lo, hi):
    # smooth per-channel sums of oriented sinusoids
    out = np.zeros(x.shape + (3,))
    for ch in range(3):
        acc = np.zeros(x.shape)
        for _ in range(4):
            fx, fy = rng.uniform(-0.08, 0.08, 2)
            phase = rng.uniform(0, 2 * np.pi)
            acc += np.sin(fx * x + fy * y + phase)
        out[..., ch] = acc / 4
    span = out.max(axis=(0, 1)) - out.min(axis=(0, 1))
    out = (out - out.min(axis=(0, 1))) / np.where(span > 0, span, 1)
    return lo + (hi - lo) * out


def make_synthetic_video(
    n_frames: int = 20,
    size: tuple = (256, 256),
    seed: int = 0,
    velocity: tuple = (1.5, 0.75),
    radius: tuple = (0.3, 0.22),
    color_range: tuple = (30.0, 225.0),
    noise: float = 0.0,
    match_stats: bool = True,
    sample_id: str = "synthetic",
) -> VideoSample:
    """A real (non-composite) clip with masks and exact backward flows.

    Frames are integer-valued like an 8-bit source.  ``velocity`` is the
    foreground motion in pixels per frame ``(dx, dy)``; ``radius`` the
    ellipse semi-axes as fractions of the frame size.  ``noise`` is the std
    of per-frame i.i.d. sensor noise in gray levels.  With ``match_stats``
    the foreground texture is rescaled so its per-channel mean and std match
    the background's, as in a natural, already harmonious frame.
    """
    h, w = size
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    lo, hi = color_range
    background = _texture(xs, ys, rng, lo, hi)

    fg_rng = np.random.default_rng(rng.integers(1 << 31))
    coeffs = [(fg_rng.uniform(-0.12, 0.12, 2), fg_rng.uniform(0, 2 * np.pi)) for _ in range(12)]

    def fg_texture(u, v):
        out = np.zeros(u.shape + (3,))
        for ch in range(3):
            acc = np.zeros(u.shape)
            for (fx, fy), ph in coeffs[ch * 4 : ch * 4 + 4]:
                acc += np.sin(fx * u + fy * v + ph)
            out[..., ch] = lo + (hi - lo) * (acc / 8 + 0.5)
        return out

    dx, dy = velocity
    rx, ry = radius[0] * w, radius[1] * h
    cx0 = w * 0.5 - dx * (n_frames - 1) / 2
    cy0 = h * 0.5 - dy * (n_frames - 1) / 2

    gain, shift = np.ones(3), np.zeros(3)
    if match_stats:
        inside = ((xs - w * 0.5) / rx) ** 2 + ((ys - h * 0.5) / ry) ** 2 <= 1.0
        ref = fg_texture(xs - w * 0.5, ys - h * 0.5)[inside]
        bg = background[~inside]
        gain = bg.std(axis=0) / np.maximum(ref.std(axis=0), 1e-6)
        shift = bg.mean(axis=0) - ref.mean(axis=0) * gain
    noise_rng = np.random.default_rng(rng.integers(1 << 31))

    frames, masks = [], []
    for j in range(n_frames):
        cx, cy = cx0 + dx * j, cy0 + dy * j
        mask = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
        frame = np.array(background)
        frame[mask] = fg_texture(xs - cx, ys - cy)[mask] * gain + shift
        if noise > 0:
            frame = frame + noise_rng.normal(0.0, noise, frame.shape)
        frames.append(np.clip(np.round(frame), 0, 255))
        masks.append(mask)

    flows = []
    for j in range(1, n_frames):
        flow = np.zeros((h, w, 2))
        flow[masks[j]] = (-dx, -dy)
        flows.append(flow)

    return VideoSample(id=sample_id, frames=frames, masks=masks, flows=flows)


def random_color_transform(seed: int = 0, strength: float = 1.0):
    """A smooth, monotone-ish random color mapping on [0, 255]^3.

    Per-channel gamma, a near-identity 3x3 channel mix and an offset,
    clipped to [0, 255].  ``strength`` scales the departure from identity.
    """
    rng = np.random.default_rng(seed)
    gamma = np.exp(rng.uniform(-0.35, 0.35, 3) * strength)
    mix = np.eye(3) + rng.uniform(-0.12, 0.12, (3, 3)) * strength
    mix /= mix.sum(axis=1, keepdims=True)
    offset = rng.uniform(-20, 20, 3) * strength

    def transform(colors):
        c = np.clip(np.asarray(colors, dtype=np.float64) / 255.0, 0, 1)
        c = c**gamma
        c = c @ mix.T
        return np.clip(255.0 * c + offset, 0, 255)

    return transform


def random_dense_lut(bins: int = 32, seed: int = 0, strength: float = 1.0) -> Lut3D:
    """Dense LUT sampling :func:`random_color_transform`; a stand-in for authored LUTs."""
    return lut_from_function(bins, random_color_transform(seed, strength))

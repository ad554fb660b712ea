"""Fitting a 3D LUT from pixel pairs and applying it to a frame.

A LUT is fitted as a similarity-weighted average of target colors, so
only lattice entries near observed colors get an output.  Colors whose
eight surrounding entries were never observed are *invalid* and fall back
to another result.
"""

import numpy as np

from lutharm import apply_lut, fit_lut_heuristic, invalid_ratio, lut_from_function

rng = np.random.default_rng(0)

# A warm color grade we would like to learn from examples.
def warm(colors):
    return np.clip(colors * [1.08, 1.0, 0.86] + [12, 4, -6], 0, 255)

# Observed pairs cover only the darker half of the color cube.
inputs = rng.uniform(0, 128, (20_000, 3))
targets = warm(inputs)

lut = fit_lut_heuristic(inputs, targets, bins=32)
print(lut)
print(f"{lut.n_null} of {lut.n_entries} entries were never observed")

# Apply it to a frame whose foreground mixes dark and bright colors.
frame = rng.uniform(0, 255, (64, 64, 3))
mask = np.zeros((64, 64), bool)
mask[16:48, 16:48] = True
fallback = np.full_like(frame, 128.0)

result = apply_lut(lut, frame, mask, fallback=fallback)
print(f"invalid ratio: {invalid_ratio(result, mask):.3f}")

# On valid pixels the learned grade tracks the true one closely.
valid = mask & ~result.invalid
err = np.abs(result.frame[valid] - warm(frame[valid]))
print(f"mean |error| on valid pixels: {err.mean():.3f} gray levels")

# A dense LUT sampled from the function itself has no invalid pixels at all.
dense = lut_from_function(32, warm)
print(f"dense LUT invalid ratio: {invalid_ratio(apply_lut(dense, frame, mask), mask):.3f}")

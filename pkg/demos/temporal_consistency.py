"""Measuring temporal consistency with flow-warped frames.

The temporal loss warps the previous result with the backward flow and
compares it with the next result, inside the propagated foreground mask.
The mask is down-weighted where the ground truth itself disagrees after
warping, which hides flow errors and occlusions.
"""

import numpy as np

from lutharm import (
    ChannelAffineHarmonizer,
    harmonize_video,
    make_synthetic_video,
    random_dense_lut,
    synthesize_dataset,
    video_temporal_loss,
)
from lutharm.temporal import video_pairs

# A noise-free clip: sensor noise alone would push every ground-truth pair
# above the selection threshold.
real = make_synthetic_video(n_frames=20, size=(128, 128), seed=1)
(sample,), _ = synthesize_dataset([real], [random_dense_lut(32, seed=7)], seed=1)

# Ground-truth pairs with a large loss are unreliable and left out.
losses = [p.ground_truth_loss() for p in video_pairs(sample.real, sample.masks, sample.flows)]
print("ground-truth TL per pair:", " ".join(f"{v:.2f}" for v in losses))

harmonizer = ChannelAffineHarmonizer(noise=10, jitter=10, seed=1)
for T in (0, 8):
    result = harmonize_video(sample, harmonizer, T=T, B=32, evaluate=False)
    tl, per_pair = video_temporal_loss(result.refined, sample.real, sample.masks, sample.flows)
    print(f"T={T}: temporal loss {tl:.2f} over {len(per_pair)} selected pairs")

tl_gt, _ = video_temporal_loss(sample.real, sample.real, sample.masks, sample.flows)
print(f"ground truth itself: {tl_gt:.2f}")

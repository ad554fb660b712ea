"""Removing flicker from a per-frame harmonizer with neighbor-fit LUTs.

We synthesize a composite clip whose foreground went through a color LUT,
then harmonize it with a deliberately unstable per-frame harmonizer (its
color error changes every frame).  Fitting a LUT on the neighboring frames'
(composite, harmonized) colors averages that error out.
"""

from lutharm import (
    ChannelAffineHarmonizer,
    Fusion,
    fit_blend_weight,
    harmonize_video,
    make_synthetic_video,
    random_dense_lut,
    synthesize_dataset,
)

real = make_synthetic_video(n_frames=20, size=(128, 128), seed=0, noise=2.0)
(sample,), _ = synthesize_dataset([real], [random_dense_lut(32, seed=100)], seed=0)
harmonizer = ChannelAffineHarmonizer(noise=10, jitter=10, seed=0)

print(" T   fMSE(LUT)  invalid ratio  ms/frame")
for T in (0, 2, 4, 8):
    result = harmonize_video(sample, harmonizer, T=T, B=32)
    print(f"{T:>2}  {result.lut_report.fmse:9.2f}  {result.mean_invalid_ratio:13.5f}  {result.mean_seconds * 1000:8.2f}")

# Blending the two results with a weight fitted on ground truth.
base = harmonize_video(sample, harmonizer, T=8, B=32)
alpha = fit_blend_weight(zip(base.lut_results, base.harm_results, sample.real, sample.masks, base.invalid))
blend = harmonize_video(sample, harmonizer, T=8, B=32, fusion=Fusion.blend(alpha))
print(f"\nblend weight {alpha:.3f}: fMSE {blend.report.fmse:.2f} "
      f"(LUT {base.lut_report.fmse:.2f}, harmonizer {base.harm_report.fmse:.2f})")
print(blend.report.to_table().splitlines()[-1])

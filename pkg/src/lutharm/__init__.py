"""Video harmonization by color-mapping consistency with 3D lookup tables.

A per-frame harmonizer adjusts each frame's foreground; a 3D LUT fitted on
the (composite, harmonized) foreground colors of the neighboring frames then
re-maps the current frame, which removes frame-to-frame flicker.
"""

from .core import DimensionError, VideoSample, as_flow, as_frame, as_mask, foreground_ratio
from .dataset import (
    filter_samples,
    lut_pairwise_distance,
    make_composite,
    select_diverse_luts,
    synthesize_dataset,
)
from .lut import (
    ApplyResult,
    Lut3D,
    apply_lut,
    constant_lut,
    corner_weights,
    evaluate_lut,
    fit_lut_heuristic,
    identity_lut,
    invalid_ratio,
    lattice_similarity,
    lut_from_function,
)
from .lutopt import LutDivergenceError, fit_lut_gd, fit_lut_ls_oracle, mapping_error
from .metrics import (
    MetricReport,
    evaluate_frames,
    fmse,
    fssim,
    mse,
    plackett_luce_scores,
    psnr,
)
from .pipeline import (
    ChannelAffineHarmonizer,
    Fusion,
    IdentityHarmonizer,
    OracleHarmonizer,
    collect_pairs,
    fit_blend_weight,
    get_harmonizer,
    harmonize_frame,
    harmonize_video,
    neighbor_window,
)
from .synthetic import make_synthetic_video, random_color_transform, random_dense_lut
from .temporal import (
    EvalPair,
    backward_warp,
    occlusion_mask,
    propagate_mask,
    select_eval_pairs,
    temporal_loss,
    video_temporal_loss,
)

__version__ = "0.1.0"

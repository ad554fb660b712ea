"""Building a composite-video dataset from real clips and a LUT pool.

A pool of candidate LUTs is thinned to a mutually diverse subset: the
distance between two LUTs is the foreground MSE between the composites they
produce on probe frames, and one member of the closest pair is dropped
until K remain.  Every real clip then gets one randomly drawn LUT.
"""

import json
import tempfile
from pathlib import Path

from lutharm import (
    lut_pairwise_distance,
    make_synthetic_video,
    random_dense_lut,
    select_diverse_luts,
    synthesize_dataset,
)
from lutharm import io

pool = {f"grade{k:02d}": random_dense_lut(16, seed=k, strength=0.3 + 0.1 * (k % 5)) for k in range(12)}
reals = [make_synthetic_video(n_frames=20, size=(64, 64), seed=s, sample_id=f"clip{s}") for s in range(3)]
probes = [(r.frames[0], r.masks[0]) for r in reals]

names = sorted(pool)
distance = lut_pairwise_distance([pool[n] for n in names], probes)
keep = [names[i] for i in select_diverse_luts(distance, 5)]
print("diverse subset:", ", ".join(keep))

composites, manifest = synthesize_dataset(reals, {n: pool[n] for n in keep}, seed=42)
print(json.dumps(manifest, indent=2))

with tempfile.TemporaryDirectory() as tmp:
    for sample in composites:
        io.write_sample(Path(tmp) / sample.id, sample)
    back = io.read_sample(Path(tmp) / composites[0].id)
    print(f"re-read {back.id}: {len(back)} frames, {len(back.flows)} flows, LUT {back.lut_id}")

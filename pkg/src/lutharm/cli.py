"""Command-line front end: ``lutharm <subcommand> [options]``.

Every subcommand accepts ``--threads`` (default: ``$LUTHARM_THREADS`` or all
cores) and ``--format text|json``.  Errors print a one-line diagnosis to
stderr and exit with status 1; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .core import VideoSample
from .dataset import DEFAULT_K, lut_pairwise_distance, select_diverse_luts, synthesize_dataset
from .lut import apply_lut, invalid_ratio
from .lutopt import DEFAULT_STEPS, LutDivergenceError
from .metrics import evaluate_frames, plackett_luce_scores
from .pipeline import (
    DEFAULT_B,
    DEFAULT_T,
    Fusion,
    _fit,
    collect_pairs,
    get_harmonizer,
    harmonize_all,
    harmonize_video,
    neighbor_window,
)
from .temporal import DEFAULT_LAMBDA, DEFAULT_THRESHOLD, video_temporal_loss

logger = logging.getLogger("lutharm")

THREADS_ENV = "LUTHARM_THREADS"
LUT_SUFFIXES = (".json", ".lut", ".cube")


class CliError(Exception):
    """A user-facing error reported as a single line."""


def _threads(value: Optional[int]) -> int:
    if value is not None:
        n = value
    elif os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be an integer, got {os.environ[THREADS_ENV]!r}") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise CliError(f"thread count must be >= 1, got {n}")
    return n


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, default=float))
    else:
        print(text)


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise CliError(f"{what} directory not found: {path}")
    return path


def _lut_files(directory: Path) -> dict:
    _require_dir(directory, "LUT")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in LUT_SUFFIXES)
    if not files:
        raise CliError(f"no LUT files ({', '.join(LUT_SUFFIXES)}) in {directory}")
    return {p.stem: p for p in files}


def _sample_dirs(directory: Path) -> list:
    """A sample directory itself, or every sample directory directly below it."""
    _require_dir(directory, "sample")
    if any((directory / sub).is_dir() for sub in ("real", "composite")):
        return [directory]
    found = sorted(p for p in directory.iterdir() if p.is_dir() and any((p / s).is_dir() for s in ("real", "composite")))
    if not found:
        raise CliError(f"no samples under {directory}")
    return found


def _harmonized_frames(args, sample: VideoSample, directory: Path) -> list:
    stored = directory / "harmonized"
    if args.harmonizer is None and stored.is_dir():
        frames = io.read_frames(stored)
        if len(frames) != len(sample):
            raise CliError(f"{stored}: {len(frames)} frames for a {len(sample)}-frame sample")
        return frames
    harmonizer = get_harmonizer(args.harmonizer or "identity", sample, **_harm_kwargs(args))
    return harmonize_all(sample, harmonizer)


def _harm_kwargs(args) -> dict:
    if (args.harmonizer or "identity") in ("affine", "channel_affine"):
        return {"noise": args.noise, "jitter": args.jitter, "seed": args.seed}
    return {}


def cmd_fit_lut(args) -> int:
    directory = Path(args.sample)
    sample = io.read_sample(_require_dir(directory, "sample"))
    if not 0 <= args.frame < len(sample):
        raise CliError(f"frame {args.frame} out of range for {len(sample)} frames")
    harmonized = _harmonized_frames(args, sample, directory)
    window = neighbor_window(args.frame, args.t, len(sample))
    inputs, targets = collect_pairs(sample, harmonized, window)
    opts = {}
    if args.method == "gd":
        opts = {"steps": args.steps, "step_size": args.step_size}
    lut = _fit(inputs, targets, args.b, args.method, **opts)
    io.write_lut(args.out, lut)
    payload = {
        "out": str(args.out),
        "bins": lut.bins,
        "pairs": int(inputs.shape[0]),
        "null_entries": lut.n_null,
        "entries": lut.n_entries,
    }
    _emit(args, payload, f"wrote {args.out}: B={lut.bins}, {inputs.shape[0]} pairs, {lut.n_null}/{lut.n_entries} null")
    return 0


def cmd_apply_lut(args) -> int:
    lut = io.read_lut(args.lut)
    src = _require_dir(Path(args.inp), "input")
    if (src / "masks").is_dir():
        sample = io.read_sample(src)
        frames, masks = sample.frames, sample.masks
    else:
        frames = io.read_frames(src)
        if not frames:
            raise CliError(f"no frames in {src}")
        if args.masks:
            masks = io.read_masks(_require_dir(Path(args.masks), "mask"), len(frames))
        else:
            masks = [np.ones(f.shape[:2], dtype=bool) for f in frames]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads(args.threads)
    ratios = []
    for i, (frame, mask) in enumerate(zip(frames, masks)):
        result = apply_lut(lut, frame, mask, threads=threads)
        io.write_frame(out / io.FRAME_PATTERN.format(i), result.frame)
        ratios.append(invalid_ratio(result, mask))
    mean = float(np.mean(ratios))
    payload = {"frames": len(frames), "invalid_ratio": mean, "per_frame": ratios}
    _emit(args, payload, f"applied to {len(frames)} frames; invalid ratio {mean:.6f}")
    return 0


def cmd_harmonize(args) -> int:
    directory = Path(args.sample)
    sample = io.read_sample(_require_dir(directory, "sample"))
    if args.fusion == "blend":
        fusion = Fusion.blend(args.alpha)
    else:
        fusion = Fusion(args.fusion, 1.0 if args.fusion == "lut" else 0.0)
    harmonizer = get_harmonizer(args.harmonizer, sample, **_harm_kwargs(args))
    opts = {"steps": args.steps, "step_size": args.step_size} if args.method == "gd" else {}
    result = harmonize_video(
        sample, harmonizer, T=args.t, B=args.b, fusion=fusion, threads=_threads(args.threads), method=args.method, **opts
    )
    out = Path(args.out)
    io.write_frames(out, result.refined)
    payload = {
        "frames": len(sample),
        "invalid_ratio": result.mean_invalid_ratio,
        "seconds_per_frame": result.mean_seconds,
    }
    lines = [
        f"wrote {len(sample)} frames to {out}",
        f"invalid ratio {result.mean_invalid_ratio:.6f}, LUT fit+apply {result.mean_seconds * 1000:.2f} ms/frame",
    ]
    if result.report is not None:
        payload["metrics"] = result.report.to_dict()
        lines.append(result.report.to_table())
        (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
        (out / "report.txt").write_text("\n".join(lines[1:]) + "\n")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_make_composite(args) -> int:
    luts = {name: io.read_lut(path) for name, path in _lut_files(Path(args.luts)).items()}
    reals = []
    for d in _sample_dirs(Path(args.real)):
        sample = io.read_sample(d)
        if sample.real is not None:
            sample = VideoSample(sample.id, sample.real, sample.masks, sample.flows)
        reals.append(sample)
    composites, manifest = synthesize_dataset(reals, luts, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for sample in composites:
        io.write_sample(out / sample.id, sample)
    (out / io.MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    text = "\n".join(f"{e['id']}: lut {e['lut_id']}" for e in manifest["samples"])
    _emit(args, manifest, text)
    return 0


def cmd_select_luts(args) -> int:
    files = _lut_files(Path(args.luts))
    names = list(files)
    if args.k > len(names):
        raise CliError(f"cannot keep {args.k} of {len(names)} LUTs")
    luts = [io.read_lut(files[n]) for n in names]
    probes = []
    for d in _sample_dirs(Path(args.probes)):
        sample = io.read_sample(d)
        frames = sample.real if sample.real is not None else sample.frames
        probes.extend(zip(frames, sample.masks))
    if len(names) == args.k:
        keep = list(range(len(names)))
    else:
        keep = select_diverse_luts(lut_pairwise_distance(luts, probes), args.k)
    selected = [names[i] for i in keep]
    if args.out:
        Path(args.out).write_text("".join(f"{n}\n" for n in selected))
    _emit(args, {"selected": selected}, "\n".join(selected))
    return 0


def cmd_eval(args) -> int:
    preds = io.read_frames(_require_dir(Path(args.pred), "prediction"))
    gts = io.read_frames(_require_dir(Path(args.gt), "ground-truth"))
    if len(preds) != len(gts) or not preds:
        raise CliError(f"{len(preds)} predicted frames but {len(gts)} ground-truth frames")
    masks = io.read_masks(_require_dir(Path(args.masks), "mask"), len(preds))
    report = evaluate_frames(preds, gts, masks)
    _emit(args, report.to_dict(), report.to_table())
    return 0


def cmd_temporal_loss(args) -> int:
    preds = io.read_frames(_require_dir(Path(args.pred), "prediction"))
    gts = io.read_frames(_require_dir(Path(args.gt), "ground-truth"))
    if len(preds) != len(gts) or len(preds) < 2:
        raise CliError(f"need matching clips of >= 2 frames, got {len(preds)} and {len(gts)}")
    masks = io.read_masks(_require_dir(Path(args.masks), "mask"), len(preds))
    flows = io.read_flows(_require_dir(Path(args.flows), "flow"), len(preds) - 1)
    mean, per_pair = video_temporal_loss(preds, gts, masks, flows, lam=args.lam, threshold=args.threshold)
    payload = {"temporal_loss": mean, "selected_pairs": len(per_pair), "per_pair": per_pair}
    lines = [f"pair {i}: {v:.6f}" for i, v in per_pair.items()]
    lines.append(f"TL {mean:.6f} over {len(per_pair)} of {len(flows)} pairs")
    _emit(args, payload, "\n".join(lines))
    return 0


def read_rankings(path) -> list:
    """One ranking per line, best first; items separated by commas or whitespace."""
    rankings = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        items = [tok for tok in line.replace(",", " ").split()]
        if len(set(items)) != len(items):
            raise CliError(f"{path}:{lineno}: repeated item in ranking")
        rankings.append(items)
    if not rankings:
        raise CliError(f"{path}: no rankings")
    return rankings


def cmd_pl_scores(args) -> int:
    scores = plackett_luce_scores(read_rankings(args.rankings))
    text = "\n".join(f"{item}\t{score:.6f}" for item, score in scores.items())
    _emit(args, {"scores": scores}, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help=f"worker threads; None means ${THREADS_ENV}, then all cores")
    common.add_argument("--format", choices=("text", "json"), default="text", help="report format (default: %(default)s)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="lutharm", description="Video harmonization with neighbor-fit 3D LUTs.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def harm_options(p, default):
        p.add_argument("--harmonizer", choices=("identity", "affine", "oracle"), default=default, help="per-frame harmonizer")
        p.add_argument("--seed", type=int, default=0, help="seed of the affine harmonizer's perturbations")
        p.add_argument("--noise", type=float, default=0.0, help="affine harmonizer per-pixel noise (gray levels)")
        p.add_argument("--jitter", type=float, default=0.0, help="affine harmonizer per-frame color error (gray levels)")

    def fit_options(p):
        p.add_argument("--t", type=int, default=DEFAULT_T, help="neighbor frames on each side")
        p.add_argument("--b", type=int, default=DEFAULT_B, help="LUT bins per axis")
        p.add_argument("--method", choices=("heuristic", "gd", "ls"), default="heuristic", help="LUT fitting method")
        p.add_argument("--steps", type=int, default=DEFAULT_STEPS, help="gradient-descent steps")
        p.add_argument("--step-size", type=float, default=None, help="gradient-descent step; None means 1/L estimated from the data")

    p = sub.add_parser("fit-lut", parents=[common], formatter_class=fmt, help="fit a LUT for one frame")
    p.add_argument("--sample", required=True, help="sample directory")
    p.add_argument("--frame", type=int, required=True, help="frame index")
    fit_options(p)
    harm_options(p, None)
    p.add_argument("--out", required=True, help="output LUT (.json native or .cube)")
    p.set_defaults(func=cmd_fit_lut)

    p = sub.add_parser("apply-lut", parents=[common], formatter_class=fmt, help="apply a LUT to frames")
    p.add_argument("--lut", required=True, help="LUT file (.json native or .cube)")
    p.add_argument("--in", dest="inp", required=True, help="frame directory or sample directory")
    p.add_argument("--masks", default=None, help="mask directory; None means the sample's masks or the whole frame")
    p.add_argument("--out", required=True, help="output frame directory")
    p.set_defaults(func=cmd_apply_lut)

    p = sub.add_parser("harmonize", parents=[common], formatter_class=fmt, help="run the full pipeline on a sample")
    p.add_argument("--sample", required=True, help="sample directory")
    fit_options(p)
    p.add_argument("--fusion", choices=("lut", "harm", "blend"), default="lut", help="result fusion")
    p.add_argument("--alpha", type=float, default=0.5, help="LUT weight for --fusion blend")
    harm_options(p, "affine")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_harmonize)

    p = sub.add_parser("make-composite", parents=[common], formatter_class=fmt, help="synthesize composite samples")
    p.add_argument("--real", required=True, help="real sample directory, or a directory of them")
    p.add_argument("--luts", required=True, help="directory of dense LUT files")
    p.add_argument("--seed", type=int, default=0, help="seed of the per-sample LUT draw")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_make_composite)

    p = sub.add_parser("select-luts", parents=[common], formatter_class=fmt, help="pick a mutually diverse LUT subset")
    p.add_argument("--luts", required=True, help="directory of dense LUT files")
    p.add_argument("--probes", required=True, help="sample directory, or a directory of them, used as probes")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="number of LUTs to keep")
    p.add_argument("--out", default=None, help="write selected LUT names here, one per line")
    p.set_defaults(func=cmd_select_luts)

    p = sub.add_parser("eval", parents=[common], formatter_class=fmt, help="MSE/fMSE/PSNR/fSSIM table")
    p.add_argument("--pred", required=True, help="predicted frame directory")
    p.add_argument("--gt", required=True, help="ground-truth frame directory")
    p.add_argument("--masks", required=True, help="mask directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("temporal-loss", parents=[common], formatter_class=fmt, help="temporal loss over selected pairs")
    p.add_argument("--pred", required=True, help="predicted frame directory")
    p.add_argument("--gt", required=True, help="ground-truth frame directory")
    p.add_argument("--flows", required=True, help="directory of backward .flo files")
    p.add_argument("--masks", required=True, help="mask directory")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA, help="occlusion sharpness")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD, help="pair selection threshold")
    p.set_defaults(func=cmd_temporal_loss)

    p = sub.add_parser("pl-scores", parents=[common], formatter_class=fmt, help="Plackett-Luce scores")
    p.add_argument("--rankings", required=True, help="file with one ranking per line, best first")
    p.set_defaults(func=cmd_pl_scores)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, io.FormatError, ValueError, OSError, LutDivergenceError) as exc:
        print(f"lutharm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

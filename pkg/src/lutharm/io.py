"""File formats and the on-disk sample layout.

* frames: 8-bit RGB PNG, loaded to float [0, 255]; written with clamping and
  round-half-away-from-zero.
* masks: 8-bit grayscale PNG, foreground where the value is >= 128.
* flows: Middlebury ``.flo`` (little-endian float32 magic 202021.25, int32
  width, int32 height, row-major interleaved float32 ``u, v``).
* LUTs: a native JSON format that keeps null entries and weights, plus
  ``.cube`` import/export.

A sample directory holds ``real/``, ``composite/``, ``masks/`` and optional
``flows/`` with files numbered ``%05d``, plus a JSON ``manifest``.
"""

from __future__ import annotations

import json
import logging
import re
import warnings
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .core import VideoSample, as_flow, as_frame, as_mask
from .lut import Lut3D, lattice_colors

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLO_MAGIC = 202021.25
LUT_FORMAT = "lutharm-lut3d"
MANIFEST = "manifest"
FRAME_PATTERN = "{:05d}.png"
FLOW_PATTERN = "{:05d}.flo"
# .cube values span [0, 1] over the lattice span [0, 256]
CUBE_SCALE = 256.0


class FormatError(ValueError):
    """A file does not follow the expected format."""


def _size(resize) -> Optional[tuple]:
    if resize is None:
        return None
    if isinstance(resize, int):
        return (resize, resize)
    return tuple(resize)


def quantize(frame) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero to uint8."""
    arr = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 255.0)
    return np.floor(arr + 0.5).astype(np.uint8)


def read_frame(path: PathLike, resize=None) -> np.ndarray:
    """Load an 8-bit RGB image.  ``resize`` is ``(H, W)`` or an int (bilinear)."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        size = _size(resize)
        if size is not None:
            img = img.resize((size[1], size[0]), Image.BILINEAR)
        return as_frame(np.asarray(img, dtype=np.float64))


def write_frame(path: PathLike, frame) -> None:
    Image.fromarray(quantize(as_frame(frame)), mode="RGB").save(path, format="PNG")


def read_mask(path: PathLike, resize=None) -> np.ndarray:
    """Load a grayscale mask; pixels >= 128 are foreground.  Resizing is nearest."""
    with Image.open(path) as img:
        img = img.convert("L")
        size = _size(resize)
        if size is not None:
            img = img.resize((size[1], size[0]), Image.NEAREST)
        return as_mask(np.asarray(img) >= 128)


def write_mask(path: PathLike, mask) -> None:
    data = np.where(as_mask(mask), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def read_flo(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes, need 12)")
    magic = np.frombuffer(raw, "<f4", count=1, offset=0)[0]
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0, expected {FLO_MAGIC}")
    width, height = (int(v) for v in np.frombuffer(raw, "<i4", count=2, offset=4))
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: invalid size {width}x{height} at byte 4")
    expected = 12 + 8 * width * height
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload ends at byte {len(raw)}, expected {expected} for {width}x{height}"
        )
    data = np.frombuffer(raw, "<f4", count=2 * width * height, offset=12)
    return as_flow(data.reshape(height, width, 2))


def write_flo(path: PathLike, flow) -> None:
    flow = as_flow(flow)
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(np.array([FLO_MAGIC], "<f4").tobytes())
        f.write(np.array([w, h], "<i4").tobytes())
        f.write(flow.astype("<f4").tobytes())


def resize_flow(flow, size) -> np.ndarray:
    """Bilinearly resample a flow field and rescale its vectors to the new grid."""
    flow = as_flow(flow)
    h, w = flow.shape[:2]
    nh, nw = _size(size)
    out = np.empty((nh, nw, 2))
    for ch, scale in ((0, nw / w), (1, nh / h)):
        img = Image.fromarray(flow[..., ch].astype(np.float32), mode="F")
        out[..., ch] = np.asarray(img.resize((nw, nh), Image.BILINEAR), dtype=np.float64) * scale
    return as_flow(out)


def lut_to_dict(lut: Lut3D) -> dict:
    outputs = lut.outputs.reshape(-1, 3)
    null = lut.null.ravel()
    return {
        "format": LUT_FORMAT,
        "version": 1,
        "bins": lut.bins,
        "order": "r,g,b with b fastest",
        "entries": [None if n else [float(x) for x in o] for o, n in zip(outputs, null)],
        "weights": [float(w) for w in lut.weights.ravel()],
    }


def lut_from_dict(data: dict, source: str = "<dict>") -> Lut3D:
    if data.get("format") != LUT_FORMAT:
        raise FormatError(f"{source}: not a {LUT_FORMAT} file")
    bins = int(data["bins"])
    n = bins + 1
    entries = data["entries"]
    weights = np.asarray(data["weights"], dtype=np.float64)
    if len(entries) != n**3 or weights.size != n**3:
        raise FormatError(f"{source}: expected {n**3} entries for {bins} bins, got {len(entries)}")
    outputs = np.zeros((n**3, 3))
    for k, entry in enumerate(entries):
        if entry is None:
            if weights[k] != 0:
                raise FormatError(f"{source}: entry {k} is null but has weight {weights[k]}")
            continue
        if len(entry) != 3:
            raise FormatError(f"{source}: entry {k} is not an RGB triple")
        if weights[k] == 0:
            raise FormatError(f"{source}: entry {k} has an output but zero weight")
        outputs[k] = entry
    return Lut3D(bins, outputs.reshape(n, n, n, 3), weights.reshape(n, n, n))


def write_lut(path: PathLike, lut: Lut3D) -> None:
    """Write a LUT; ``.cube`` paths are exported as cube, others as native JSON."""
    if Path(path).suffix.lower() == ".cube":
        write_cube(path, lut)
        return
    Path(path).write_text(json.dumps(lut_to_dict(lut)))


def read_lut(path: PathLike) -> Lut3D:
    if Path(path).suffix.lower() == ".cube":
        return read_cube(path)
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from None
    return lut_from_dict(data, str(path))


def write_cube(path: PathLike, lut: Lut3D, title: Optional[str] = None) -> list:
    """Export as ``.cube`` (red index fastest, values scaled to [0, 1]).

    Null entries are filled with identity outputs; a warning is issued and
    their indices are listed in ``<path>.filled``.

    Returns:
        The ``(r, g, b)`` indices of filled entries.
    """
    outputs = np.array(lut.outputs)
    null = lut.null
    filled = [tuple(int(i) for i in idx) for idx in np.argwhere(null)]
    sidecar = Path(str(path) + ".filled")
    if filled:
        outputs[null] = lattice_colors(lut.bins)[null]
        warnings.warn(
            f"{path}: {len(filled)} null LUT entries filled with identity (see {sidecar.name})",
            UserWarning,
            stacklevel=2,
        )
        sidecar.write_text("".join(f"{r} {g} {b}\n" for r, g, b in filled))
    lines = []
    if title:
        lines.append(f'TITLE "{title}"')
    lines += [
        f"LUT_3D_SIZE {lut.size}",
        "DOMAIN_MIN 0.0 0.0 0.0",
        "DOMAIN_MAX 1.0 1.0 1.0",
    ]
    # red fastest: iterate b, then g, then r
    values = outputs.transpose(2, 1, 0, 3).reshape(-1, 3) / CUBE_SCALE
    lines += [f"{r:.10f} {g:.10f} {b:.10f}" for r, g, b in values]
    Path(path).write_text("\n".join(lines) + "\n")
    return filled


_KEYWORD = re.compile(r"^[A-Z_][A-Z_0-9]*\b")


def read_cube(path: PathLike) -> Lut3D:
    """Import a 3D ``.cube`` file as a dense LUT with ``B = N - 1``."""
    size = None
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _KEYWORD.match(line)
        if m:
            key = m.group(0)
            parts = line.split()
            if key == "LUT_3D_SIZE":
                size = int(parts[1])
            elif key == "LUT_1D_SIZE":
                raise FormatError(f"{path}:{lineno}: 1D LUTs are not supported")
            elif key == "DOMAIN_MIN":
                if [float(x) for x in parts[1:4]] != [0.0, 0.0, 0.0]:
                    raise FormatError(f"{path}:{lineno}: only DOMAIN_MIN 0 0 0 is supported")
            elif key == "DOMAIN_MAX":
                if [float(x) for x in parts[1:4]] != [1.0, 1.0, 1.0]:
                    raise FormatError(f"{path}:{lineno}: only DOMAIN_MAX 1 1 1 is supported")
            continue
        try:
            values = [float(x) for x in line.split()]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: cannot parse {line!r}") from None
        if len(values) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 values, got {len(values)}")
        rows.append(values)
    if size is None or size < 2:
        raise FormatError(f"{path}: missing or invalid LUT_3D_SIZE")
    if len(rows) != size**3:
        raise FormatError(f"{path}: expected {size**3} entries, found {len(rows)}")
    data = np.asarray(rows).reshape(size, size, size, 3).transpose(2, 1, 0, 3) * CUBE_SCALE
    return Lut3D(size - 1, data, np.ones((size, size, size)))


def _numbered(directory: Path, suffix: str) -> list:
    pattern = re.compile(r"^(\d{5})" + re.escape(suffix) + "$")
    found = sorted(int(m.group(1)) for p in directory.iterdir() if (m := pattern.match(p.name)))
    if found != list(range(len(found))):
        missing = sorted(set(range(max(found) + 1)) - set(found)) if found else []
        raise FormatError(f"{directory}: frame numbering has gaps, missing {missing[:5]}")
    return found


def read_frames(directory: PathLike, resize=None) -> list:
    directory = Path(directory)
    return [read_frame(directory / FRAME_PATTERN.format(i), resize) for i in _numbered(directory, ".png")]


def write_frames(directory: PathLike, frames) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_frame(directory / FRAME_PATTERN.format(i), frame)


def read_masks(directory: PathLike, count: Optional[int] = None, resize=None) -> list:
    directory = Path(directory)
    if count is None:
        count = len(_numbered(directory, ".png"))
    masks = []
    for i in range(count):
        path = directory / FRAME_PATTERN.format(i)
        if not path.exists():
            raise FormatError(f"missing mask for frame {i}: {path}")
        masks.append(read_mask(path, resize))
    return masks


def write_masks(directory: PathLike, masks) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, mask in enumerate(masks):
        write_mask(directory / FRAME_PATTERN.format(i), mask)


def read_flows(directory: PathLike, count: Optional[int] = None, resize=None) -> list:
    directory = Path(directory)
    if count is None:
        count = len(_numbered(directory, ".flo"))
    flows = []
    for i in range(count):
        path = directory / FLOW_PATTERN.format(i)
        if not path.exists():
            raise FormatError(f"missing flow {i}: {path}")
        flow = read_flo(path)
        flows.append(flow if resize is None else resize_flow(flow, resize))
    return flows


def write_flows(directory: PathLike, flows) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, flow in enumerate(flows):
        write_flo(directory / FLOW_PATTERN.format(i), flow)


def read_manifest(directory: PathLike) -> dict:
    path = Path(directory) / MANIFEST
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from None


def read_sample(directory: PathLike, resize=None) -> VideoSample:
    """Load a sample directory.

    ``frames`` come from ``composite/`` when present, otherwise ``real/``;
    ``real/`` becomes ground truth when both exist.  Every frame needs a
    mask; ``flows/`` is optional but must then hold ``n - 1`` files.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: not a directory")
    composite, real = directory / "composite", directory / "real"
    if composite.is_dir():
        frames = read_frames(composite, resize)
        truth = read_frames(real, resize) if real.is_dir() else None
    elif real.is_dir():
        frames = read_frames(real, resize)
        truth = None
    else:
        raise FormatError(f"{directory}: no composite/ or real/ frames")
    if not frames:
        raise FormatError(f"{directory}: sample has no frames")
    if truth is not None and len(truth) != len(frames):
        raise FormatError(f"{directory}: {len(frames)} composite but {len(truth)} real frames")
    if not (directory / "masks").is_dir():
        raise FormatError(f"{directory}: missing masks/ directory")
    masks = read_masks(directory / "masks", len(frames), resize)
    flows = None
    if (directory / "flows").is_dir():
        flows = read_flows(directory / "flows", len(frames) - 1, resize)
    manifest = read_manifest(directory)
    return VideoSample(
        id=str(manifest.get("id", directory.name)),
        frames=frames,
        masks=masks,
        flows=flows,
        real=truth,
        lut_id=manifest.get("lut_id"),
        review=manifest.get("review", ""),
    )


def write_sample(directory: PathLike, sample: VideoSample) -> None:
    """Write a sample in the layout :func:`read_sample` expects."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if sample.real is not None:
        write_frames(directory / "composite", sample.frames)
        write_frames(directory / "real", sample.real)
    else:
        write_frames(directory / "real", sample.frames)
    write_masks(directory / "masks", sample.masks)
    if sample.flows:
        write_flows(directory / "flows", sample.flows)
    manifest = {
        "id": sample.id,
        "frames": len(sample),
        "lut_id": sample.lut_id,
        "review": sample.review,
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")

"""RGB-D scene loading, saving, and synthetic generation.

On-disk layout of a scene directory:

    0000.ppm, 0001.ppm, ...   8-bit binary RGB (P6, maxval 255)
    0000.pgm, 0001.pgm, ...   16-bit binary depth (P5, maxval 65535,
                              big-endian), millimeters, 0 = invalid
    meta.json                 camera intrinsics and timing

Depth lives in memory as float64 meters (0.0 = invalid) and is quantized
to 1 mm on disk, which caps representable range at 65.535 m.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEPTH_QUANTUM_M = 1e-3
MAX_DEPTH_M = 65535 * DEPTH_QUANTUM_M

META_KEYS = (
    "width", "height", "fps", "z_max_m",
    "fx_px", "fy_px", "cx_px", "cy_px", "mirror_fov_deg",
)


class SceneIOError(ValueError):
    """Base class for scene directory problems."""


class MissingPair(SceneIOError):
    """A frame has an RGB file without depth, or depth without RGB."""


class DimensionMismatch(SceneIOError):
    """RGB, depth, or metadata dimensions disagree."""


class MalformedHeader(SceneIOError):
    """A netpbm header or meta.json could not be parsed."""


class EmptyScene(SceneIOError):
    """A generated frame contains no valid geometry."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera model in pixel units."""

    width: int
    height: int
    fx_px: float
    fy_px: float
    cx_px: float
    cy_px: float


@dataclass(frozen=True)
class SceneMeta:
    """Scene-level metadata; maps 1:1 onto meta.json."""

    width: int
    height: int
    fps: float
    z_max_m: float
    fx_px: float
    fy_px: float
    cx_px: float
    cy_px: float
    mirror_fov_deg: float

    def __post_init__(self):
        if not 0 < self.z_max_m <= MAX_DEPTH_M:
            raise ValueError(
                f"z_max_m must be in (0, {MAX_DEPTH_M}] m, got {self.z_max_m}"
            )

    @property
    def intrinsics(self) -> Intrinsics:
        return Intrinsics(
            self.width, self.height, self.fx_px, self.fy_px, self.cx_px, self.cy_px
        )


@dataclass
class SceneFrame:
    """One RGB-D frame.

    rgb       (H, W, 3) uint8
    depth_gt  (H, W) float64 meters; 0.0 marks invalid / no geometry
    """

    rgb: np.ndarray
    depth_gt: np.ndarray
    intrinsics: Intrinsics
    frame_index: int
    timestamp_s: float


@dataclass
class SceneSequence:
    frames: list[SceneFrame]
    meta: SceneMeta


# ---------- netpbm primitives ----------

_TOKEN_RE = re.compile(rb"^\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_pnm_tokens(data: bytes, count: int, path: Path) -> tuple[list[bytes], int]:
    """Pull `count` whitespace/comment-delimited header tokens; return offset."""
    tokens, pos = [], 0
    for _ in range(count):
        m = _TOKEN_RE.match(data[pos:])
        if not m:
            raise MalformedHeader(f"{path}: truncated netpbm header")
        tokens.append(m.group(1))
        pos += m.end()
    # exactly one whitespace byte separates the header from raster data
    if pos >= len(data) or data[pos:pos + 1] not in (b"\n", b" ", b"\t", b"\r"):
        raise MalformedHeader(f"{path}: missing separator after netpbm header")
    return tokens, pos + 1


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary P6 RGB image (maxval 255) as (H, W, 3) uint8."""
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(b"P6"):
        raise MalformedHeader(f"{path}: expected P6 magic, got {data[:2]!r}")
    (magic, w, h, maxval), offset = _read_pnm_tokens(data, 4, path)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise MalformedHeader(f"{path}: non-numeric netpbm header fields") from None
    if maxval != 255:
        raise MalformedHeader(f"{path}: P6 maxval must be 255, got {maxval}")
    expected = w * h * 3
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise MalformedHeader(
            f"{path}: raster has {len(raster)} bytes, expected {expected}"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError(f"rgb must be (H, W, 3) uint8, got {rgb.shape} {rgb.dtype}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_pgm16(path: str | Path) -> np.ndarray:
    """Read a binary P5 16-bit image (maxval 65535, big-endian) as (H, W) uint16."""
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise MalformedHeader(f"{path}: expected P5 magic, got {data[:2]!r}")
    (magic, w, h, maxval), offset = _read_pnm_tokens(data, 4, path)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise MalformedHeader(f"{path}: non-numeric netpbm header fields") from None
    if maxval != 65535:
        raise MalformedHeader(f"{path}: P5 maxval must be 65535, got {maxval}")
    expected = w * h * 2
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise MalformedHeader(
            f"{path}: raster has {len(raster)} bytes, expected {expected}"
        )
    return np.frombuffer(raster, dtype=">u2").reshape(h, w).astype(np.uint16)


def write_pgm16(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim != 2 or values.dtype != np.uint16:
        raise ValueError(f"values must be (H, W) uint16, got {values.shape} {values.dtype}")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(values.astype(">u2").tobytes())


def depth_to_millimeters(depth_m: np.ndarray) -> np.ndarray:
    """Quantize float meters to uint16 mm; 0 stays invalid. Raises on overflow."""
    depth_m = np.asarray(depth_m, dtype=np.float64)
    if np.any(depth_m < 0):
        raise ValueError("depth values must be non-negative")
    mm = np.round(depth_m / DEPTH_QUANTUM_M)
    if np.any(mm > 65535):
        raise ValueError(f"depth exceeds {MAX_DEPTH_M} m, not representable in 16 bits")
    return mm.astype(np.uint16)


def millimeters_to_depth(mm: np.ndarray) -> np.ndarray:
    return mm.astype(np.float64) / 1000.0


# ---------- scene directories ----------

def save_scene(seq: SceneSequence, directory: str | Path) -> None:
    """Write frames and meta.json; frame files are zero-padded by index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for frame in seq.frames:
        stem = f"{frame.frame_index:04d}"
        write_ppm(directory / f"{stem}.ppm", frame.rgb)
        write_pgm16(directory / f"{stem}.pgm", depth_to_millimeters(frame.depth_gt))
    meta = {k: getattr(seq.meta, k) for k in META_KEYS}
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_scene(directory: str | Path) -> SceneSequence:
    """Load a scene directory; frames come back sorted by index."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise MalformedHeader(f"{meta_path}: missing")
    try:
        raw = json.loads(meta_path.read_text())
    except json.JSONDecodeError as e:
        raise MalformedHeader(f"{meta_path}: invalid JSON ({e})") from None
    missing = [k for k in META_KEYS if k not in raw]
    if missing:
        raise MalformedHeader(f"{meta_path}: missing keys {missing}")
    meta = SceneMeta(**{k: raw[k] for k in META_KEYS})

    ppm_stems = {p.stem for p in directory.glob("*.ppm")}
    pgm_stems = {p.stem for p in directory.glob("*.pgm")}
    for stem in sorted(ppm_stems - pgm_stems):
        raise MissingPair(f"{directory / (stem + '.ppm')}: no matching depth (.pgm)")
    for stem in sorted(pgm_stems - ppm_stems):
        raise MissingPair(f"{directory / (stem + '.pgm')}: no matching RGB (.ppm)")

    for stem in sorted(ppm_stems):
        if not stem.isdigit():
            raise MalformedHeader(
                f"{directory / (stem + '.ppm')}: frame stems must be numeric"
            )

    frames = []
    for stem in sorted(ppm_stems, key=lambda s: int(s)):
        rgb = read_ppm(directory / f"{stem}.ppm")
        mm = read_pgm16(directory / f"{stem}.pgm")
        if rgb.shape[:2] != mm.shape:
            raise DimensionMismatch(
                f"{directory / (stem + '.pgm')}: depth is {mm.shape}, "
                f"RGB is {rgb.shape[:2]}"
            )
        if rgb.shape[:2] != (meta.height, meta.width):
            raise DimensionMismatch(
                f"{directory / (stem + '.ppm')}: image is {rgb.shape[:2]}, "
                f"meta.json says {(meta.height, meta.width)}"
            )
        index = int(stem)
        frames.append(
            SceneFrame(
                rgb=rgb,
                depth_gt=millimeters_to_depth(mm),
                intrinsics=meta.intrinsics,
                frame_index=index,
                timestamp_s=index / meta.fps,
            )
        )
    return SceneSequence(frames=frames, meta=meta)


# ---------- synthetic scenes ----------

@dataclass(frozen=True)
class Primitive:
    """One fronto-parallel scene element.

    kind          "plane" (fills the frustum), "box" (cuboid, rendered by
                  its front face), or "quad" (flat rectangle)
    z_m           depth of the plane / front face (m)
    center_xy_m   (X, Y) of the box/quad center in camera coords at z (m)
    size_xy_m     (width, height) of the box/quad (m); ignored for planes
    color         base RGB, 0..255
    texture       "flat", "checker", or "noise"
    checker_m     checker cell edge (m)
    noise_texel_m noise texel edge (m)
    velocity_m_s  (vx, vy, vz) linear motion in camera coords (m/s)
    """

    kind: str
    z_m: float
    center_xy_m: tuple[float, float] = (0.0, 0.0)
    size_xy_m: tuple[float, float] | None = None
    color: tuple[int, int, int] = (128, 128, 128)
    texture: str = "flat"
    checker_m: float = 0.1
    noise_texel_m: float = 0.01
    velocity_m_s: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("plane", "box", "quad"):
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if self.kind != "plane" and self.size_xy_m is None:
            raise ValueError(f"{self.kind} primitive needs size_xy_m")
        if self.texture not in ("flat", "checker", "noise"):
            raise ValueError(f"unknown texture {self.texture!r}")
        if not self.z_m > 0:
            raise ValueError(f"primitive depth must be > 0, got {self.z_m}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a generated RGB-D sequence.

    The camera's horizontal FOV matches the scan mirror FOV (co-located,
    matched-FOV convention used across the package); fx = fy, principal
    point at the image center.
    """

    width: int = 160
    height: int = 120
    fov_deg: float = 25.0
    fps: float = 30.0
    n_frames: int = 1
    z_max_m: float = 3.0
    primitives: tuple[Primitive, ...] = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        if not self.primitives:
            raise EmptyScene("scene spec has no primitives")

    @property
    def meta(self) -> SceneMeta:
        fx = (self.width / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)
        return SceneMeta(
            width=self.width,
            height=self.height,
            fps=self.fps,
            z_max_m=self.z_max_m,
            fx_px=fx,
            fy_px=fx,
            cx_px=self.width / 2.0,
            cy_px=self.height / 2.0,
            mirror_fov_deg=self.fov_deg,
        )


def _noise_tile(seed: int, prim_index: int) -> np.ndarray:
    """Deterministic 256x256 grayscale tile, fixed per (seed, primitive)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, prim_index]))
    return rng.integers(0, 256, size=(256, 256), dtype=np.uint8)


def _shade(prim: Primitive, local_x_m, local_y_m, tile) -> np.ndarray:
    """Per-pixel RGB for a primitive, in its own (moving) coordinates."""
    shape = np.broadcast(local_x_m, local_y_m).shape
    base = np.empty(shape + (3,), dtype=np.uint8)
    base[...] = np.array(prim.color, dtype=np.uint8)
    if prim.texture == "flat":
        return base
    if prim.texture == "checker":
        parity = (
            np.floor(local_x_m / prim.checker_m).astype(np.int64)
            + np.floor(local_y_m / prim.checker_m).astype(np.int64)
        ) % 2
        dark = (np.array(prim.color, dtype=np.float64) * 0.25).astype(np.uint8)
        out = base.copy()
        out[parity == 1] = dark
        return out
    # noise: sample the tile in local metric coords so texture rides along
    u = (np.floor(local_x_m / prim.noise_texel_m).astype(np.int64)) % 256
    v = (np.floor(local_y_m / prim.noise_texel_m).astype(np.int64)) % 256
    gray = tile[v, u].astype(np.float64) / 255.0
    color = np.array(prim.color, dtype=np.float64)
    out = (color * (0.25 + 0.75 * gray[..., None])).astype(np.uint8)
    return out


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> SceneSequence:
    """Render a scene recipe with a z-buffer; same (spec, seed) gives identical bytes.

    Depth is quantized to the 1 mm disk quantum at generation time so that
    save/load round-trips are bit-exact.
    """
    meta = spec.meta
    intr = meta.intrinsics
    w, h = spec.width, spec.height
    tiles = [
        _noise_tile(seed, i) if p.texture == "noise" else None
        for i, p in enumerate(spec.primitives)
    ]
    # pixel-center coordinates for texture/frustum math
    px = np.arange(w, dtype=np.float64) + 0.5
    py = np.arange(h, dtype=np.float64) + 0.5

    frames = []
    for k in range(spec.n_frames):
        t = k / spec.fps
        zbuf = np.full((h, w), np.inf)
        depth = np.zeros((h, w))
        rgb = np.zeros((h, w, 3), dtype=np.uint8)

        for i, prim in enumerate(spec.primitives):
            vx, vy, vz = prim.velocity_m_s
            z = prim.z_m + vz * t
            if z <= 0:
                continue
            cx_m = prim.center_xy_m[0] + vx * t
            cy_m = prim.center_xy_m[1] + vy * t

            if prim.kind == "plane":
                ix0, ix1, iy0, iy1 = 0, w, 0, h
            else:
                half_w = prim.size_xy_m[0] / 2.0
                half_h = prim.size_xy_m[1] / 2.0
                # project the rect edges, then take pixels whose centers fall inside
                ex0 = intr.cx_px + intr.fx_px * (cx_m - half_w) / z
                ex1 = intr.cx_px + intr.fx_px * (cx_m + half_w) / z
                ey0 = intr.cy_px + intr.fy_px * (cy_m - half_h) / z
                ey1 = intr.cy_px + intr.fy_px * (cy_m + half_h) / z
                ix0 = max(0, math.ceil(ex0 - 0.5))
                ix1 = min(w, math.ceil(ex1 - 0.5))
                iy0 = max(0, math.ceil(ey0 - 0.5))
                iy1 = min(h, math.ceil(ey1 - 0.5))
                if ix0 >= ix1 or iy0 >= iy1:
                    continue

            sub_px = px[ix0:ix1]
            sub_py = py[iy0:iy1]
            # camera-space coordinates of the hit points, then primitive-local
            x_m = (sub_px[None, :] - intr.cx_px) / intr.fx_px * z - cx_m
            y_m = (sub_py[:, None] - intr.cy_px) / intr.fy_px * z - cy_m
            shade = _shade(prim, np.broadcast_to(x_m, (iy1 - iy0, ix1 - ix0)),
                           np.broadcast_to(y_m, (iy1 - iy0, ix1 - ix0)), tiles[i])

            region_z = zbuf[iy0:iy1, ix0:ix1]
            win = z < region_z
            region_z[win] = z
            depth[iy0:iy1, ix0:ix1][win] = z
            rgb[iy0:iy1, ix0:ix1][win] = shade[win]

        valid = depth > 0
        if not valid.any():
            raise EmptyScene(f"frame {k}: no primitive intersects the frustum")
        # quantize to the disk quantum so in-memory == on-disk
        mm = np.round(depth[valid] / DEPTH_QUANTUM_M)
        if np.any(mm > 65535):
            raise ValueError(f"frame {k}: depth exceeds {MAX_DEPTH_M} m")
        depth[valid] = mm / 1000.0

        frames.append(
            SceneFrame(
                rgb=rgb,
                depth_gt=depth,
                intrinsics=intr,
                frame_index=k,
                timestamp_s=t,
            )
        )
    return SceneSequence(frames=frames, meta=meta)

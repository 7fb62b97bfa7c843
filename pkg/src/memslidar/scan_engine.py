"""Scan-pattern scheduling for a MEMS-steered single-beam rangefinder.

The rangefinder delivers a fixed stream of depth measurements per second;
a scan mirror steers each one.  At a target frame rate, the per-frame
sample budget is what is left of the frame period after fixed per-frame
overhead, times the measurement rate:

    budget(fps) = floor((1/fps - overhead) * rate)

Pattern generators spend that budget three ways: an equi-angular serpentine
grid over the full FOV, an entropy-weighted random pattern, and a foveated
pattern that concentrates density inside a region of interest.  Angles are
apex radians; (theta, phi) = (azimuth, elevation) relative to the optical
axis, positive toward +x / +y in image coordinates.

The mirror and guide camera are co-located with matched horizontal FOV,
so angle <-> pixel mapping is the shared pinhole  x = cx + fx*tan(theta).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scene_io import Intrinsics

DEFAULT_SAMPLE_RATE_HZ = 1600.0
DEFAULT_MIRROR_FOV_RAD = math.radians(25.0)

# Measured frame-rate / samples-per-frame pairs for the reference engine;
# fit_budget() recovers (rate, overhead) from them.
REFERENCE_BUDGET_PAIRS = (
    (30.0, 28), (24.0, 40), (18.0, 60), (12.0, 104), (6.0, 231),
)


class ScanEngineError(ValueError):
    pass


class OverheadExceedsFrame(ScanEngineError):
    """Frame period leaves no time for sampling at this fps."""


class SingularFit(ScanEngineError):
    """Budget observations cannot pin down two parameters."""


class DegenerateMap(UserWarning):
    """Importance map carries no signal; generator fell back to the grid."""


class ROIOutOfBounds(ScanEngineError):
    """Region of interest does not fit the image."""


class Regime(str, Enum):
    FULL_FOV = "full_fov"
    ENTROPY_ADAPTIVE = "entropy_adaptive"
    FOVEATED_ROI = "foveated_roi"
    DENSITY_SWEEP = "density_sweep"


@dataclass(frozen=True)
class MirrorModel:
    """Scan mirror + rangefinder timing.

    fov_rad            full scan FOV, apex angle (rad)
    sample_rate_hz     depth measurements per second
    frame_overhead_s   fixed per-frame dead time (readout, flyback)
    volts_to_rad       linear drive map: angle = gain * volts + offset,
                       per axis ((gain_x, offset_x), (gain_y, offset_y))
    """

    fov_rad: float = DEFAULT_MIRROR_FOV_RAD
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    frame_overhead_s: float = 0.0
    volts_to_rad: tuple[tuple[float, float], tuple[float, float]] = (
        (math.radians(2.5), 0.0),
        (math.radians(2.5), 0.0),
    )

    def __post_init__(self):
        if not 0 < self.fov_rad <= math.pi:
            raise ValueError(f"mirror FOV must be in (0, pi] rad, got {self.fov_rad}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be > 0, got {self.sample_rate_hz}")
        if self.frame_overhead_s < 0:
            raise ValueError(f"overhead must be >= 0, got {self.frame_overhead_s}")
        for gain, _offset in self.volts_to_rad:
            if gain == 0:
                raise ValueError("drive gain must be nonzero")

    def angles_to_volts(self, theta_rad: float, phi_rad: float) -> tuple[float, float]:
        (gx, ox), (gy, oy) = self.volts_to_rad
        return (theta_rad - ox) / gx, (phi_rad - oy) / gy


@dataclass(frozen=True)
class ROI:
    """Pixel-space region of interest with sampling density weights.

    The rectangle spans [x0, x1) x [y0, y1).  Densities are relative
    per-pixel sampling weights in [0, 1] with inside >= outside; the
    foveated generator splits the budget so per-area densities honor
    their ratio.
    """

    x0: int
    y0: int
    x1: int
    y1: int
    inside_density: float = 1.0
    outside_density: float = 0.0

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ROIOutOfBounds(f"empty ROI rectangle {(self.x0, self.y0, self.x1, self.y1)}")
        if not (0.0 <= self.outside_density <= 1.0 and 0.0 <= self.inside_density <= 1.0):
            raise ValueError("densities must be in [0, 1]")
        if self.inside_density < self.outside_density:
            raise ValueError("inside density must be >= outside density")

    def validate_bounds(self, width: int, height: int) -> None:
        if self.x0 < 0 or self.y0 < 0 or self.x1 > width or self.y1 > height:
            raise ROIOutOfBounds(
                f"ROI {(self.x0, self.y0, self.x1, self.y1)} outside {width}x{height} image"
            )

    @property
    def area_px(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class ScanSample:
    t_s: float
    theta_rad: float
    phi_rad: float


@dataclass
class ScanPattern:
    """Time-ordered mirror directions for one frame."""

    samples: list[ScanSample]
    fps: float
    regime: Regime
    seed: int | None = None
    budget: int | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def to_json(self) -> str:
        doc = {
            "fps": self.fps,
            "regime": self.regime.value,
            "seed": self.seed,
            "budget": self.budget,
            "samples": [
                {"t_s": s.t_s, "theta_rad": s.theta_rad, "phi_rad": s.phi_rad}
                for s in self.samples
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScanPattern":
        doc = json.loads(text)
        return cls(
            samples=[
                ScanSample(s["t_s"], s["theta_rad"], s["phi_rad"])
                for s in doc["samples"]
            ],
            fps=doc["fps"],
            regime=Regime(doc["regime"]),
            seed=doc.get("seed"),
            budget=doc.get("budget"),
        )


@dataclass(frozen=True)
class BudgetFit:
    sample_rate_hz: float
    frame_overhead_s: float
    residual_rmse: float
    residuals: tuple[float, ...]


# ---------- timing ----------

def budget(model: MirrorModel, fps: float) -> int:
    """Samples available per frame at the requested rate."""
    if not fps > 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    frame_s = 1.0 / fps
    if frame_s <= model.frame_overhead_s:
        raise OverheadExceedsFrame(
            f"frame period {frame_s:.6f} s <= overhead {model.frame_overhead_s:.6f} s"
        )
    return int(math.floor((frame_s - model.frame_overhead_s) * model.sample_rate_hz))


def fps_for_budget(model: MirrorModel, n_samples: int) -> float:
    """Frame rate at which the budget is exactly n_samples (inverse of budget)."""
    if n_samples < 1:
        raise ValueError(f"need >= 1 sample, got {n_samples}")
    # pad by a sliver of a sample so budget's floor lands on n despite rounding
    return 1.0 / ((n_samples + 1e-9) / model.sample_rate_hz + model.frame_overhead_s)


def fit_budget(observations) -> BudgetFit:
    """Least-squares (rate, overhead) from (fps, samples) observations.

    The model is linear once rewritten as samples = rate/fps - rate*overhead,
    so an ordinary least-squares solve recovers both parameters.
    """
    obs = [(float(fps), float(n)) for fps, n in observations]
    if len(obs) < 2:
        raise SingularFit(f"need >= 2 observations, got {len(obs)}")
    x = np.array([1.0 / fps for fps, _ in obs])
    y = np.array([n for _, n in obs])
    if np.ptp(x) == 0.0:
        raise SingularFit("all observations share one fps; overhead is unidentifiable")
    design = np.stack([x, -np.ones_like(x)], axis=1)
    (rate, rate_x_overhead), *_ = np.linalg.lstsq(design, y, rcond=None)
    if rate == 0.0:
        raise SingularFit("fitted rate is zero")
    overhead = rate_x_overhead / rate
    residuals = tuple(float(r) for r in (design @ (rate, rate_x_overhead) - y))
    rmse = float(np.sqrt(np.mean(np.square(residuals))))
    return BudgetFit(
        sample_rate_hz=float(rate),
        frame_overhead_s=float(overhead),
        residual_rmse=rmse,
        residuals=residuals,
    )


def reference_mirror_model(fov_rad: float = DEFAULT_MIRROR_FOV_RAD) -> MirrorModel:
    """Mirror model with timing fitted to the reference budget table."""
    fit = fit_budget(REFERENCE_BUDGET_PAIRS)
    return MirrorModel(
        fov_rad=fov_rad,
        sample_rate_hz=fit.sample_rate_hz,
        frame_overhead_s=fit.frame_overhead_s,
    )


# ---------- angle <-> pixel mapping (shared-FOV pinhole) ----------

def image_intrinsics(model: MirrorModel, image_dims: tuple[int, int]) -> Intrinsics:
    """Pinhole intrinsics for a camera sharing the mirror's horizontal FOV."""
    w, h = image_dims
    fx = (w / 2.0) / math.tan(model.fov_rad / 2.0)
    return Intrinsics(width=w, height=h, fx_px=fx, fy_px=fx,
                      cx_px=w / 2.0, cy_px=h / 2.0)


def pixel_to_angles(
    px: np.ndarray, py: np.ndarray, intr: Intrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates to mirror angles (apex radians)."""
    theta = np.arctan((np.asarray(px, dtype=np.float64) + 0.5 - intr.cx_px) / intr.fx_px)
    phi = np.arctan((np.asarray(py, dtype=np.float64) + 0.5 - intr.cy_px) / intr.fy_px)
    return theta, phi


def angles_to_pixel(
    theta_rad: np.ndarray, phi_rad: np.ndarray, intr: Intrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Mirror angles to continuous pixel coordinates (floor to index)."""
    px = intr.cx_px + intr.fx_px * np.tan(np.asarray(theta_rad, dtype=np.float64))
    py = intr.cy_px + intr.fy_px * np.tan(np.asarray(phi_rad, dtype=np.float64))
    return px, py


def _angular_extent(model: MirrorModel, image_dims: tuple[int, int]) -> tuple[float, float, float, float]:
    """(theta_min, theta_max, phi_min, phi_max) covered by the image."""
    w, h = image_dims
    intr = image_intrinsics(model, image_dims)
    theta_half = math.atan((w / 2.0) / intr.fx_px)   # == fov/2 by construction
    phi_half = math.atan((h / 2.0) / intr.fy_px)
    return -theta_half, theta_half, -phi_half, phi_half


# ---------- pattern generators ----------

def _timestamps(model: MirrorModel, n: int) -> np.ndarray:
    """Strictly increasing in-frame times: overhead first, then one per tick."""
    return model.frame_overhead_s + np.arange(n) / model.sample_rate_hz


def _serpentine_grid(
    extent: tuple[float, float, float, float], n: int
) -> list[tuple[float, float]]:
    """Near-square cell-centered grid of n points, serpentine row order.

    Columns = floor(sqrt(n)); rows fill top-down, the last row may be
    partial.  Cell-centering keeps every point strictly inside the extent.
    """
    t0, t1, p0, p1 = extent
    cols = max(1, int(math.isqrt(n)))
    rows = math.ceil(n / cols)
    dt = (t1 - t0) / cols
    dp = (p1 - p0) / rows
    pts = []
    remaining = n
    for r in range(rows):
        row_count = min(cols, remaining)
        remaining -= row_count
        phi = p0 + (r + 0.5) * dp
        cols_in_row = range(row_count)
        if r % 2 == 1:  # serpentine: reverse every other row to minimize slew
            cols_in_row = reversed(list(cols_in_row))
        for c in cols_in_row:
            theta = t0 + (c + 0.5) * dt
            pts.append((theta, phi))
    return pts


def gen_full_fov(
    model: MirrorModel, fps: float, image_dims: tuple[int, int]
) -> ScanPattern:
    """Equi-angular serpentine raster over the full (image-clipped) FOV."""
    n = budget(model, fps)
    extent = _angular_extent(model, image_dims)
    pts = _serpentine_grid(extent, n)
    times = _timestamps(model, len(pts))
    samples = [ScanSample(float(t), th, ph) for t, (th, ph) in zip(times, pts)]
    return ScanPattern(samples=samples, fps=fps, regime=Regime.FULL_FOV, budget=n)


def gen_density_sweep(
    model: MirrorModel, fps: float, image_dims: tuple[int, int], density: float
) -> ScanPattern:
    """Full-FOV raster at a fraction of the budget (density study regime)."""
    if not 0 < density <= 1:
        raise ValueError(f"density must be in (0, 1], got {density}")
    n = budget(model, fps)
    n_used = max(1, int(round(n * density)))
    extent = _angular_extent(model, image_dims)
    pts = _serpentine_grid(extent, n_used)
    times = _timestamps(model, len(pts))
    samples = [ScanSample(float(t), th, ph) for t, (th, ph) in zip(times, pts)]
    return ScanPattern(samples=samples, fps=fps, regime=Regime.DENSITY_SWEEP, budget=n)


def gen_entropy_adaptive(
    model: MirrorModel,
    fps: float,
    entropy_values: np.ndarray,
    seed: int = 0,
) -> ScanPattern:
    """Sample pixels without replacement, weighted by local image entropy.

    Weights are entropy + epsilon with epsilon = 1% of the map maximum, so
    zero-entropy regions keep a trickle of coverage.  An all-zero map has
    nothing to say; the generator warns and falls back to the grid.
    """
    values = np.asarray(entropy_values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"entropy map must be 2-D, got shape {values.shape}")
    if np.any(values < 0):
        raise ValueError("entropy values must be non-negative")
    h, w = values.shape
    peak = float(values.max()) if values.size else 0.0
    if peak == 0.0:
        warnings.warn(
            "entropy map is all zeros; falling back to the full-FOV grid",
            DegenerateMap,
        )
        return gen_full_fov(model, fps, (w, h))

    n = min(budget(model, fps), values.size)
    weights = values + 0.01 * peak
    p = (weights / weights.sum()).ravel()
    rng = np.random.default_rng(seed)
    flat = rng.choice(values.size, size=n, replace=False, p=p)
    ys, xs = np.divmod(flat, w)
    intr = image_intrinsics(model, (w, h))
    theta, phi = pixel_to_angles(xs, ys, intr)
    times = _timestamps(model, n)
    samples = [
        ScanSample(float(t), float(th), float(ph))
        for t, th, ph in zip(times, theta, phi)
    ]
    return ScanPattern(
        samples=samples, fps=fps, regime=Regime.ENTROPY_ADAPTIVE,
        seed=seed, budget=budget(model, fps),
    )


def _roi_angular_rect(
    roi: ROI, intr: Intrinsics
) -> tuple[float, float, float, float]:
    """Angular extent of the ROI rectangle (its pixel-edge bounds)."""
    t0 = math.atan((roi.x0 - intr.cx_px) / intr.fx_px)
    t1 = math.atan((roi.x1 - intr.cx_px) / intr.fx_px)
    p0 = math.atan((roi.y0 - intr.cy_px) / intr.fy_px)
    p1 = math.atan((roi.y1 - intr.cy_px) / intr.fy_px)
    return t0, t1, p0, p1


def gen_foveated(
    model: MirrorModel,
    fps: float,
    roi: ROI,
    image_dims: tuple[int, int],
) -> ScanPattern:
    """Split the budget between ROI and periphery by per-area density.

    Counts are allocated so that (samples/area) inside vs outside matches
    inside_density : outside_density, with the total pinned at the budget.
    Both regions get equi-angular sub-grids; with outside_density = 0 the
    whole budget lands inside the ROI.  An ROI covering the full image
    degenerates to exactly the full-FOV raster.
    """
    w, h = image_dims
    roi.validate_bounds(w, h)
    n = budget(model, fps)
    intr = image_intrinsics(model, image_dims)

    area_in = roi.area_px
    area_out = w * h - area_in
    w_in = roi.inside_density * area_in
    w_out = roi.outside_density * area_out
    if w_in + w_out == 0:
        raise ValueError("ROI densities are both zero; nothing to sample")
    n_in = int(round(n * w_in / (w_in + w_out)))
    n_out = n - n_in

    pts: list[tuple[float, float]] = []
    if n_in > 0:
        pts.extend(_serpentine_grid(_roi_angular_rect(roi, intr), n_in))
    if n_out > 0:
        pts.extend(_outside_grid(roi, intr, model, image_dims, n_out))

    times = _timestamps(model, len(pts))
    samples = [ScanSample(float(t), th, ph) for t, (th, ph) in zip(times, pts)]
    return ScanPattern(samples=samples, fps=fps, regime=Regime.FOVEATED_ROI, budget=n)


def _outside_grid(
    roi: ROI,
    intr: Intrinsics,
    model: MirrorModel,
    image_dims: tuple[int, int],
    n_out: int,
) -> list[tuple[float, float]]:
    """n_out near-uniform points over the full FOV minus the ROI rectangle.

    Lays a full-FOV grid sized so that enough points miss the ROI, then
    thins evenly (by serpentine index) to the exact count.
    """
    w, h = image_dims
    frac_out = 1.0 - roi.area_px / (w * h)
    if frac_out <= 0:
        raise ValueError("ROI covers the image; no outside region to sample")
    extent = _angular_extent(model, image_dims)
    m = max(n_out, int(math.ceil(n_out / frac_out)))
    for _ in range(64):
        grid = _serpentine_grid(extent, m)
        keep = []
        for theta, phi in grid:
            px = intr.cx_px + intr.fx_px * math.tan(theta)
            py = intr.cy_px + intr.fy_px * math.tan(phi)
            ix, iy = int(math.floor(px)), int(math.floor(py))
            if not (roi.x0 <= ix < roi.x1 and roi.y0 <= iy < roi.y1):
                keep.append((theta, phi))
        if len(keep) >= n_out:
            idx = np.round(np.linspace(0, len(keep) - 1, n_out)).astype(int)
            return [keep[i] for i in idx]
        m = max(m + 1, int(m * 1.2))
    raise RuntimeError("could not place outside-ROI samples")  # pragma: no cover

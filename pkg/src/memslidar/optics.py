"""Closed-form receiver/transmitter trade-off models for a MEMS-scanned LIDAR.

Three receiver architectures are characterized at a working range Z:

* retroreflective  -- the outgoing MEMS mirror doubles as the receive
  aperture, so the aperture is pinned to the beam waist and the return
  signal falls off steeply with range.
* receiver_array   -- an n x n detector array behind a lens of aperture A;
  wide instantaneous FOV, large focal volume.
* single_detector  -- one detector behind the lens.  With the detector
  in focus (u >= f) the FOV collapses as the target recedes; deliberately
  under-focusing it (u < f) defocuses the return over a blur kernel whose
  angular size is nearly range-independent, buying a consistent FOV at a
  fixed sensitivity cost.

Conventions: SI units (meters, seconds) and *apex* angles in radians
throughout.  Solid-angle steradians appear only in `acuity_gain`, via
``2*pi*(1 - cos(apex/2))``.  Received radiance is reported in inverse
meters: it is a normalized area-times-solid-angle proxy, useful for
comparing designs, not an absolute photon count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# §-style design-space bounds enforced by sweep(): modest beam quality and
# waist, bench-scale receiver optics.
SWEEP_BOUNDS = {
    "beam_quality_m": (1.0, 100.0),
    "waist_radius_m": (0.1e-3, 5e-3),
    "aperture_m": (0.0, 0.10),
    "focal_length_m": (0.0, 50e-3),
    "image_distance_m": (0.0, 50e-3),
}

SWEEP_CSV_HEADER = (
    "design_kind,M,w0_m,lambda_m,n,A_m,u_m,f_m,Z_m,fov_rad,rr_per_m,volume_m3,flag"
)

FLAG_NONPHYSICAL_DIVERGENCE = "nonphysical_divergence"
FLAG_DEGENERATE_FOCUS = "degenerate_focus"
FLAG_ZERO_KERNEL = "zero_kernel"


class OpticsError(ValueError):
    """Base class for receiver-geometry errors."""


class DegenerateFocus(OpticsError):
    """Working range equals the focal length: the image distance diverges."""


class ZeroKernel(OpticsError):
    """Detector exactly in focus: blur kernel is a point, radiance unbounded."""


class InvalidVariant(OpticsError):
    """Operation asked for a design variant it does not apply to."""


class DesignKind(str, Enum):
    RETROREFLECTIVE = "retroreflective"
    RECEIVER_ARRAY = "receiver_array"
    SINGLE_DETECTOR = "single_detector"


@dataclass(frozen=True)
class TransmitterSpec:
    """Laser + MEMS scan mirror parameters.

    beam_quality_m        M^2-style beam quality factor, >= 1 (dimensionless)
    waist_radius_m        beam waist radius w_o at the mirror (m)
    wavelength_m          laser wavelength (m)
    mirror_fov_rad        full scan FOV of the mirror, apex angle (rad), in (0, pi]
    """

    beam_quality_m: float
    waist_radius_m: float
    wavelength_m: float
    mirror_fov_rad: float

    def __post_init__(self):
        if not self.beam_quality_m >= 1.0:
            raise ValueError(f"beam quality must be >= 1, got {self.beam_quality_m}")
        if not self.waist_radius_m > 0:
            raise ValueError(f"waist radius must be > 0, got {self.waist_radius_m}")
        if not self.wavelength_m > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength_m}")
        if not 0 < self.mirror_fov_rad <= math.pi:
            raise ValueError(
                f"mirror FOV must be in (0, pi] rad, got {self.mirror_fov_rad}"
            )


@dataclass(frozen=True)
class ReceiverSpec:
    """Receive-side optics.

    design_kind           one of DesignKind
    aperture_m            lens aperture diameter A (m); ignored for the
                          retroreflective design, whose aperture is the
                          mirror itself (the transmit waist)
    image_distance_m      lens-to-detector distance u (m)
    focal_length_m        lens focal length f (m)
    detector_count_n      detectors per side of the array (n x n); 1 for
                          the single-detector and retroreflective designs
    """

    design_kind: DesignKind
    aperture_m: float
    image_distance_m: float
    focal_length_m: float
    detector_count_n: int = 1

    def __post_init__(self):
        if not self.aperture_m > 0:
            raise ValueError(f"aperture must be > 0, got {self.aperture_m}")
        if not self.image_distance_m > 0:
            raise ValueError(f"image distance must be > 0, got {self.image_distance_m}")
        if not self.focal_length_m > 0:
            raise ValueError(f"focal length must be > 0, got {self.focal_length_m}")
        if self.detector_count_n < 1:
            raise ValueError(f"detector count must be >= 1, got {self.detector_count_n}")
        if self.design_kind != DesignKind.RECEIVER_ARRAY and self.detector_count_n != 1:
            raise ValueError(f"{self.design_kind.value} design requires n = 1")


@dataclass(frozen=True)
class CameraSpec:
    """Guide-camera geometry for angular-acuity comparisons.

    fov_rad         full camera FOV, apex angle (rad)
    pixel_count     total pixel count I (e.g. 640*480)
    """

    fov_rad: float
    pixel_count: int

    def __post_init__(self):
        if not 0 < self.fov_rad <= math.pi:
            raise ValueError(f"camera FOV must be in (0, pi] rad, got {self.fov_rad}")
        if self.pixel_count < 1:
            raise ValueError(f"pixel count must be >= 1, got {self.pixel_count}")


@dataclass(frozen=True)
class DesignCharacterization:
    """Figures of merit for one design at one working range.

    fov_rad          instantaneous receive FOV, apex angle (rad); always
                     capped at the mirror scan FOV
    rr_per_m         received radiance proxy (1/m); +inf on singular rows
    volume_m3        light-collecting focal volume (m^3)
    range_m          working range Z this row was evaluated at (m)
    flag             "" when healthy; otherwise semicolon-joined warnings
                     (nonphysical_divergence, degenerate_focus, zero_kernel)
    """

    fov_rad: float
    rr_per_m: float
    volume_m3: float
    range_m: float
    flag: str = ""


def apex_to_solid_angle(apex_rad: float) -> float:
    """Solid angle (sr) of a cone with the given apex angle (rad)."""
    return 2.0 * math.pi * (1.0 - math.cos(apex_rad / 2.0))


def solid_angle_to_apex(solid_sr: float) -> float:
    """Apex angle (rad) of a cone subtending the given solid angle (sr)."""
    if not 0 <= solid_sr <= 4 * math.pi:
        raise ValueError(f"solid angle must be in [0, 4*pi] sr, got {solid_sr}")
    return 2.0 * math.acos(1.0 - solid_sr / (2.0 * math.pi))


def beam_divergence(tx: TransmitterSpec) -> float:
    """Full divergence apex angle (rad) of the scanned beam.

    Diffraction-limited Gaussian-beam divergence scaled by beam quality:
    grows with beam quality squared and wavelength, shrinks with waist.
    Values >= pi are non-physical (the formula has left its small-angle
    validity); callers flag but do not reject them.
    """
    return (
        tx.beam_quality_m**2
        * tx.wavelength_m
        / (tx.waist_radius_m * math.pi)
    )


def divergence_is_physical(omega_laser_rad: float) -> bool:
    return omega_laser_rad < math.pi


def acuity_gain(tx: TransmitterSpec, cam: CameraSpec) -> float:
    """How much coarser the laser dot is than one camera pixel.

    Ratio of the dot's solid angle to the per-pixel solid angle of the
    guide camera.  A gain of ~1000 means one depth sample covers about a
    thousand camera pixels worth of angular resolution, which is the
    opening for guided completion: the camera sees structure the scanner
    cannot afford to sample.
    """
    dot_sr = apex_to_solid_angle(beam_divergence(tx))
    pixel_sr = apex_to_solid_angle(cam.fov_rad) / cam.pixel_count
    return dot_sr / pixel_sr


def _focus_kernel_apex(aperture_m: float, u_m: float, f_m: float, z_m: float) -> float:
    """Blur-kernel apex angle (rad) for a single detector behind a thin lens.

    A target at range Z images at u' = f*Z/(Z - f).  A detector at u sees
    that image defocused into a kernel of diameter |u - u'| * A / u'; the
    apex angle is taken at the detector distance u.

    Raises DegenerateFocus at Z == f and ZeroKernel at u == u' (geometry
    gives a point response; downstream code emits sentinel rows instead
    of dividing by zero).
    """
    if z_m == f_m:
        raise DegenerateFocus(
            f"working range {z_m} m equals focal length; image distance diverges"
        )
    u_image = f_m * z_m / (z_m - f_m)
    kernel_diameter_m = abs(u_m - u_image) * aperture_m / u_image
    if kernel_diameter_m == 0.0:
        raise ZeroKernel(
            f"detector exactly in focus at Z={z_m} m (u = u' = {u_m} m)"
        )
    return 2.0 * math.atan(kernel_diameter_m / (2.0 * u_m))


def fov_limit_underfocused(rx: ReceiverSpec) -> float:
    """Large-range FOV limit (rad) of the under-focused single detector.

    As Z -> inf the blur kernel apex settles at 2*atan(A*(f-u)/(2*u*f)),
    which is why the under-focused variant keeps a near-constant FOV.
    Only defined for u < f.
    """
    if rx.design_kind != DesignKind.SINGLE_DETECTOR:
        raise InvalidVariant(f"FOV limit applies to single_detector, not {rx.design_kind.value}")
    if not rx.image_distance_m < rx.focal_length_m:
        raise InvalidVariant(
            f"FOV limit requires under-focus (u < f); got u={rx.image_distance_m}, "
            f"f={rx.focal_length_m}"
        )
    a, u, f = rx.aperture_m, rx.image_distance_m, rx.focal_length_m
    return 2.0 * math.atan(a * (f - u) / (2.0 * u * f))


def characterize(
    tx: TransmitterSpec, rx: ReceiverSpec, range_m: float
) -> DesignCharacterization:
    """Evaluate FOV, received radiance, and focal volume at one range.

    Parameters
    ----------
    tx, rx : transmitter and receiver geometry.
    range_m : working range Z (m); must be > 0, and > f for the
        single-detector focus geometry.

    Raises
    ------
    DegenerateFocus, ZeroKernel for the single-detector singularities;
    sweep() converts these to sentinel rows rather than dropping them.
    """
    if not range_m > 0:
        raise ValueError(f"range must be > 0, got {range_m}")
    omega_laser = beam_divergence(tx)
    flag = "" if divergence_is_physical(omega_laser) else FLAG_NONPHYSICAL_DIVERGENCE
    omega_mirror = tx.mirror_fov_rad
    falloff = 2.0 * range_m * math.tan(omega_laser / 2.0)

    if rx.design_kind == DesignKind.RETROREFLECTIVE:
        # Mirror is the aperture: receive cone subtends the waist, capped
        # at the transmit divergence (cannot receive more than was sent).
        w0 = tx.waist_radius_m
        received_apex = min(2.0 * math.atan(w0 / (2.0 * range_m)), omega_laser)
        rr = (received_apex / omega_laser) / falloff
        volume = math.pi * rx.image_distance_m * w0**2 / 12.0
        fov = omega_mirror
    elif rx.design_kind == DesignKind.RECEIVER_ARRAY:
        rr = 1.0 / falloff
        volume = rx.image_distance_m * rx.aperture_m**2
        fov = min(
            2.0 * math.atan(rx.aperture_m / (2.0 * rx.image_distance_m)), omega_mirror
        )
    elif rx.design_kind == DesignKind.SINGLE_DETECTOR:
        if range_m < rx.focal_length_m:
            raise ValueError(
                f"single-detector geometry needs Z > f; got Z={range_m}, "
                f"f={rx.focal_length_m}"
            )
        kernel_apex = _focus_kernel_apex(
            rx.aperture_m, rx.image_distance_m, rx.focal_length_m, range_m
        )
        rr = 1.0 / (kernel_apex * falloff)
        volume = math.pi * rx.image_distance_m * rx.aperture_m**2 / 12.0
        fov = min(kernel_apex, omega_mirror)
    else:  # pragma: no cover - enum is closed
        raise InvalidVariant(f"unknown design kind {rx.design_kind}")

    return DesignCharacterization(
        fov_rad=fov, rr_per_m=rr, volume_m3=volume, range_m=range_m, flag=flag
    )


def _sentinel_characterization(
    tx: TransmitterSpec, rx: ReceiverSpec, range_m: float, reason: str
) -> DesignCharacterization:
    """Singular-row stand-in: radiance pinned at +inf, FOV at 0."""
    omega_laser = beam_divergence(tx)
    flag = reason
    if not divergence_is_physical(omega_laser):
        flag = FLAG_NONPHYSICAL_DIVERGENCE + ";" + flag
    volume = math.pi * rx.image_distance_m * rx.aperture_m**2 / 12.0
    return DesignCharacterization(
        fov_rad=0.0, rr_per_m=math.inf, volume_m3=volume, range_m=range_m, flag=flag
    )


def _check_sweep_bounds(tx_grid, rx_grid) -> None:
    for tx in tx_grid:
        lo, hi = SWEEP_BOUNDS["beam_quality_m"]
        if not lo <= tx.beam_quality_m <= hi:
            raise ValueError(f"beam quality {tx.beam_quality_m} outside [{lo}, {hi}]")
        lo, hi = SWEEP_BOUNDS["waist_radius_m"]
        if not lo <= tx.waist_radius_m <= hi:
            raise ValueError(f"waist radius {tx.waist_radius_m} m outside [{lo}, {hi}] m")
    for rx in rx_grid:
        if rx.aperture_m > SWEEP_BOUNDS["aperture_m"][1]:
            raise ValueError(f"aperture {rx.aperture_m} m exceeds {SWEEP_BOUNDS['aperture_m'][1]} m")
        if rx.focal_length_m > SWEEP_BOUNDS["focal_length_m"][1]:
            raise ValueError(
                f"focal length {rx.focal_length_m} m exceeds {SWEEP_BOUNDS['focal_length_m'][1]} m"
            )
        if rx.image_distance_m > SWEEP_BOUNDS["image_distance_m"][1]:
            raise ValueError(
                f"image distance {rx.image_distance_m} m exceeds {SWEEP_BOUNDS['image_distance_m'][1]} m"
            )


def sweep(tx_grid, rx_grid, range_grid_m) -> list[dict]:
    """Characterize every (transmitter, receiver, range) combination.

    Row order is the lexicographic product of the input grids (tx-major,
    then rx, then range), so output is deterministic and chunkable.
    Singular focus geometries are emitted as sentinel rows with a reason
    in the ``flag`` column, never dropped.

    Returns a list of row dicts with keys matching SWEEP_CSV_HEADER.
    """
    tx_grid = list(tx_grid)
    rx_grid = list(rx_grid)
    range_grid_m = [float(z) for z in range_grid_m]
    if not tx_grid or not rx_grid or not range_grid_m:
        raise ValueError("sweep grids must be non-empty")
    _check_sweep_bounds(tx_grid, rx_grid)

    rows = []
    for tx in tx_grid:
        for rx in rx_grid:
            for z in range_grid_m:
                try:
                    ch = characterize(tx, rx, z)
                except DegenerateFocus:
                    ch = _sentinel_characterization(tx, rx, z, FLAG_DEGENERATE_FOCUS)
                except ZeroKernel:
                    ch = _sentinel_characterization(tx, rx, z, FLAG_ZERO_KERNEL)
                # Effective aperture: the retro design receives through the
                # mirror, so its aperture column reports the waist.
                eff_aperture = (
                    tx.waist_radius_m
                    if rx.design_kind == DesignKind.RETROREFLECTIVE
                    else rx.aperture_m
                )
                rows.append(
                    {
                        "design_kind": rx.design_kind.value,
                        "M": tx.beam_quality_m,
                        "w0_m": tx.waist_radius_m,
                        "lambda_m": tx.wavelength_m,
                        "n": rx.detector_count_n,
                        "A_m": eff_aperture,
                        "u_m": rx.image_distance_m,
                        "f_m": rx.focal_length_m,
                        "Z_m": z,
                        "fov_rad": ch.fov_rad,
                        "rr_per_m": ch.rr_per_m,
                        "volume_m3": ch.volume_m3,
                        "flag": ch.flag,
                    }
                )
    return rows


def format_sweep_csv(rows) -> str:
    """Render sweep rows as CSV text (9 significant digits for floats)."""
    lines = [SWEEP_CSV_HEADER]
    float_cols = ("M", "w0_m", "lambda_m", "A_m", "u_m", "f_m", "Z_m",
                  "fov_rad", "rr_per_m", "volume_m3")
    for row in rows:
        fields = []
        for col in SWEEP_CSV_HEADER.split(","):
            v = row[col]
            fields.append(f"{v:.9g}" if col in float_cols else str(v))
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def find_crossovers(rows) -> list[dict]:
    """Locate ranges where one design's received radiance overtakes another's.

    Scans sweep rows grouped by (transmitter, receiver-geometry) and, for
    each ordered pair of design kinds sharing a transmitter, reports the
    first range bracket [z_lo, z_hi] where the sign of (rr_a - rr_b)
    flips, with a log-interpolated crossover estimate.
    """
    # Group rows into per-design range profiles keyed by transmitter params.
    profiles: dict[tuple, dict[str, list]] = {}
    for row in rows:
        if row["flag"]:
            continue
        tx_key = (row["M"], row["w0_m"], row["lambda_m"])
        rxp = profiles.setdefault(tx_key, {})
        key = (row["design_kind"], row["n"], row["A_m"], row["u_m"], row["f_m"])
        rxp.setdefault(key, []).append((row["Z_m"], row["rr_per_m"]))

    crossovers = []
    for tx_key, by_design in profiles.items():
        keys = sorted(by_design.keys())
        for i, ka in enumerate(keys):
            for kb in keys[i + 1:]:
                if ka[0] == kb[0]:
                    continue  # same design kind: not a cross-architecture pair
                prof_a = sorted(by_design[ka])
                prof_b = sorted(by_design[kb])
                shared = sorted(
                    set(z for z, _ in prof_a) & set(z for z, _ in prof_b)
                )
                if len(shared) < 2:
                    continue
                rr_a = dict(prof_a)
                rr_b = dict(prof_b)
                prev_z, prev_d = None, None
                for z in shared:
                    d = rr_a[z] - rr_b[z]
                    if prev_d is not None and d != 0 and (d > 0) != (prev_d > 0):
                        # log-linear interpolation of the sign change
                        t = prev_d / (prev_d - d)
                        z_star = math.exp(
                            math.log(prev_z) + t * (math.log(z) - math.log(prev_z))
                        )
                        crossovers.append(
                            {
                                "M": tx_key[0],
                                "w0_m": tx_key[1],
                                "lambda_m": tx_key[2],
                                "design_a": ka[0],
                                "design_b": kb[0],
                                "z_lo_m": prev_z,
                                "z_hi_m": z,
                                "z_star_m": z_star,
                                "winner_above": ka[0] if d > 0 else kb[0],
                            }
                        )
                        break
                    prev_z, prev_d = z, d
    return crossovers


def log_range_grid(z_min_m: float, z_max_m: float, count: int) -> np.ndarray:
    """Log-spaced range grid (m), inclusive of both endpoints."""
    if not (z_min_m > 0 and z_max_m > z_min_m and count >= 2):
        raise ValueError("need 0 < z_min < z_max and count >= 2")
    return np.geomspace(z_min_m, z_max_m, count)

"""Deciding where to point the scanner: entropy and motion cues.

Two foveation signals are supported.  Local Shannon entropy of the guide
camera's grayscale image marks texture worth sampling densely; a
running-mean background model marks moving objects.  Both produce pixel
rectangles consumed by the foveated pattern generator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .scan_engine import ROI, ROIOutOfBounds

MAX_ENTROPY_BITS = 8.0  # 8-bit grayscale upper bound


class FoveationError(ValueError):
    pass


def grayscale(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion (BT.601 weights) to float64, 0..255."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {rgb.shape}")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return 0.299 * r + 0.587 * g + 0.114 * b


@dataclass(frozen=True)
class EntropyMap:
    """Per-pixel windowed entropy in bits, same shape as the source image."""

    values: np.ndarray
    window_px: int


def entropy_map(rgb: np.ndarray, window_px: int = 15) -> EntropyMap:
    """Shannon entropy of the grayscale histogram in a sliding window.

    Borders are replicate-padded so every pixel sees a full window.  The
    implementation counts each gray level with a box filter over an
    indicator image; a brute-force per-pixel histogram gives identical
    values and is kept as the test oracle.
    """
    if window_px < 3 or window_px % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window_px}")
    gray = np.round(grayscale(rgb)).astype(np.uint8)
    h, w = gray.shape
    half = window_px // 2
    padded = np.pad(gray, half, mode="edge")
    area = float(window_px * window_px)

    # integral image per gray level present; loop is over <=256 levels
    entropy = np.zeros((h, w))
    for level in np.unique(padded):
        ind = (padded == level).astype(np.float64)
        sat = ind.cumsum(axis=0).cumsum(axis=1)
        sat = np.pad(sat, ((1, 0), (1, 0)))
        counts = (
            sat[window_px:, window_px:]
            - sat[:-window_px, window_px:]
            - sat[window_px:, :-window_px]
            + sat[:-window_px, :-window_px]
        )
        p = counts / area
        nz = p > 0
        entropy[nz] -= p[nz] * np.log2(p[nz])
    return EntropyMap(values=entropy, window_px=window_px)


def max_entropy_roi(emap: EntropyMap, roi_dims_px: tuple[int, int]) -> ROI:
    """Placement of a fixed-size window maximizing summed entropy.

    Exact search over all placements via a summed-area table; ties go to
    the smallest (y0, x0) in row-major order.  Returned ROI defaults to
    all-inside density (inside 1.0, outside 0.0).
    """
    values = emap.values
    h, w = values.shape
    rw, rh = roi_dims_px
    if rw < 1 or rh < 1 or rw > w or rh > h:
        raise ROIOutOfBounds(f"ROI window {rw}x{rh} does not fit {w}x{h} map")
    sat = values.cumsum(axis=0).cumsum(axis=1)
    sat = np.pad(sat, ((1, 0), (1, 0)))
    sums = (
        sat[rh:, rw:]
        - sat[:-rh, rw:]
        - sat[rh:, :-rw]
        + sat[:-rh, :-rw]
    )
    flat = int(np.argmax(sums))  # first maximum in row-major order = smallest (y0, x0)
    y0, x0 = divmod(flat, sums.shape[1])
    return ROI(x0=x0, y0=y0, x1=x0 + rw, y1=y0 + rh)


@dataclass(frozen=True)
class BackgroundModel:
    """Running-mean background for motion foveation.

    mean_gray        float64 running mean, or None before the first frame
    alpha            update weight for the newest frame
    diff_threshold   gray-level change that counts as motion
    min_blob_area_px smallest connected region worth an ROI
    margin_px        dilation applied to the detected bounding box
    """

    mean_gray: np.ndarray | None = None
    alpha: float = 0.05
    diff_threshold: float = 25.0
    min_blob_area_px: int = 100
    margin_px: int = 10

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.diff_threshold <= 0:
            raise ValueError("diff threshold must be positive")
        if self.min_blob_area_px < 1:
            raise ValueError("min blob area must be >= 1")
        if self.margin_px < 0:
            raise ValueError("margin must be >= 0")


_OPEN_STRUCTURE = np.ones((3, 3), dtype=bool)


def update_and_detect(
    model: BackgroundModel, rgb: np.ndarray
) -> tuple[BackgroundModel, ROI | None]:
    """Detect motion against the running mean, then fold the frame in.

    Pipeline: |gray - mean| > threshold, 3x3 morphological opening,
    8-connected components, largest component at least min_blob_area_px,
    bounding box dilated by margin_px and clamped to the image.  Returns
    the updated model and the ROI (None when nothing moved).  The first
    frame only seeds the mean.
    """
    gray = grayscale(rgb)
    if model.mean_gray is None:
        return replace(model, mean_gray=gray), None
    if model.mean_gray.shape != gray.shape:
        raise FoveationError(
            f"frame is {gray.shape}, background model is {model.mean_gray.shape}"
        )

    diff = np.abs(gray - model.mean_gray) > model.diff_threshold
    opened = ndimage.binary_opening(diff, structure=_OPEN_STRUCTURE)
    roi = None
    if opened.any():
        labels, n_labels = ndimage.label(opened, structure=_OPEN_STRUCTURE)
        sizes = np.bincount(labels.ravel())[1:]  # skip background label 0
        best = int(np.argmax(sizes)) + 1
        if sizes[best - 1] >= model.min_blob_area_px:
            ys, xs = np.nonzero(labels == best)
            h, w = gray.shape
            roi = ROI(
                x0=max(0, int(xs.min()) - model.margin_px),
                y0=max(0, int(ys.min()) - model.margin_px),
                x1=min(w, int(xs.max()) + 1 + model.margin_px),
                y1=min(h, int(ys.max()) + 1 + model.margin_px),
            )

    new_mean = (1.0 - model.alpha) * model.mean_gray + model.alpha * gray
    return replace(model, mean_gray=new_mean), roi

"""Eye-corner detection.

The corner serves as the head-motion reference point: per-column intensity
variance (the vertical variance projection function) collapses past the
corner where lids and sclera give way to featureless skin, so the largest
variance-derivative step marks the corner's column. The corner's row comes
from the eyelid curve traced by Sobel gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AreaOutsideImage, EmptyRange, NoCornerFound
from .imgproc import GrayImage, sobel
from .iris import Circle, EyeRegion

# Minimum peak column variance (intensity^2) for the search area to count as
# structured; below this, flat skin.
VARIANCE_FLOOR = 4.0

# The search area is kept near the eye by clamping to the eye box padded by
# this many iris radii per side. The detected eye box hugs the iris (sclera
# is bright and segments as background), while the corner sits ~2.5 R from
# the iris center, so an unpadded clamp would cut the corner itself off.
_EYE_BOX_PAD_RADII = 3.0


@dataclass(frozen=True)
class VpfProfile:
    """Per-column statistics over rows [y1, y2]: mean, variance, variance step."""

    x_range: tuple[int, int]  # inclusive columns
    y_range: tuple[int, int]  # inclusive rows
    mean: np.ndarray
    variance: np.ndarray
    derivative: np.ndarray  # variance[i+1] - variance[i]; one shorter than variance


@dataclass(frozen=True)
class CornerPoint:
    x: int
    y: float  # subpixel: the gaze vector is corner-relative, and the eyeball
    # model turns one row of corner error into ~0.8 deg of vertical gaze
    side: str  # "nasal" | "temporal"


def vpf(img: GrayImage, x_range: tuple[int, int], y_range: tuple[int, int]) -> VpfProfile:
    """Column-wise mean and variance of intensity over the row interval."""
    x1, x2 = int(x_range[0]), int(x_range[1])
    y1, y2 = int(y_range[0]), int(y_range[1])
    if y2 <= y1 or x2 < x1:
        raise EmptyRange(f"degenerate range x={x_range} y={y_range}")
    if x1 < 0 or y1 < 0 or x2 >= img.width or y2 >= img.height:
        raise EmptyRange(f"range x={x_range} y={y_range} outside {img.width}x{img.height}")
    block = img.pixels[y1:y2 + 1, x1:x2 + 1].astype(np.float64)
    mean = block.mean(axis=0)
    variance = ((block - mean) ** 2).mean(axis=0)
    return VpfProfile(
        x_range=(x1, x2), y_range=(y1, y2),
        mean=mean, variance=variance, derivative=np.diff(variance),
    )


def corner_search_area(iris: Circle, eye: EyeRegion, side: str,
                       bounds: tuple[int, int] | None = None) -> tuple[int, int, int, int]:
    """Rectangle to search for the corner: 1.5 R to 3.5 R out from the iris
    center on the requested side, 2 R tall, clamped near the eye.

    ``bounds`` is an optional (width, height) image clamp. Returns
    (x_min, y_min, x_max, y_max), inclusive.
    """
    if side not in ("nasal", "temporal"):
        raise ValueError(f"side must be 'nasal' or 'temporal', got {side!r}")
    a, b, r = iris.a, iris.b, iris.r
    if side == "temporal":
        x_lo, x_hi = a + 1.5 * r, a + 3.5 * r
    else:
        x_lo, x_hi = a - 3.5 * r, a - 1.5 * r
    y_lo, y_hi = b - r, b + r

    ex0, ey0, ex1, ey1 = eye.bounding_box
    pad = _EYE_BOX_PAD_RADII * r
    x_lo = max(x_lo, ex0 - pad)
    x_hi = min(x_hi, ex1 + pad)
    y_lo = max(y_lo, ey0 - pad)
    y_hi = min(y_hi, ey1 + pad)
    if bounds is not None:
        w, h = bounds
        x_lo, y_lo = max(x_lo, 0), max(y_lo, 0)
        x_hi, y_hi = min(x_hi, w - 1), min(y_hi, h - 1)
    x0, y0 = int(round(x_lo)), int(round(y_lo))
    x1, y1 = int(round(x_hi)), int(round(y_hi))
    if x1 <= x0 or y1 <= y0:
        raise AreaOutsideImage(
            f"corner search area empty after clamping (side={side}, iris R={r:.1f})")
    return (x0, y0, x1, y1)


def trace_eyelid(img: GrayImage, area: tuple[int, int, int, int]) -> np.ndarray:
    """Per-column eyelid row inside the area, as float rows.

    Each column takes the row of maximum Sobel gradient magnitude, refined
    to subpixel by a three-point parabola through the peak and its vertical
    neighbors, then median-smoothed over 3 columns against lash noise.
    """
    x0, y0, x1, y1 = area
    # pad the crop one pixel so the Sobel interior covers the whole area
    cx0, cy0 = max(x0 - 1, 0), max(y0 - 1, 0)
    cx1, cy1 = min(x1 + 1, img.width - 1), min(y1 + 1, img.height - 1)
    crop = GrayImage(img.pixels[cy0:cy1 + 1, cx0:cx1 + 1])
    mag = sobel(crop).magnitude[y0 - cy0:y1 - cy0 + 1, x0 - cx0:x1 - cx0 + 1]
    n_rows = mag.shape[0]
    k = np.argmax(mag, axis=0)
    cols = np.arange(mag.shape[1])
    peak = mag[k, cols]
    lo = mag[np.maximum(k - 1, 0), cols]
    hi = mag[np.minimum(k + 1, n_rows - 1), cols]
    denom = lo - 2.0 * peak + hi
    interior = (k > 0) & (k < n_rows - 1) & (np.abs(denom) > 1e-12)
    off = np.zeros(len(cols))
    np.divide(0.5 * (lo - hi), denom, out=off, where=interior)
    rows = y0 + k + np.clip(off, -0.5, 0.5)
    if len(rows) >= 3:
        sm = rows.copy()
        sm[1:-1] = np.median(np.stack([rows[:-2], rows[1:-1], rows[2:]]), axis=0)
        rows = sm
    return rows


def detect_corner(img: GrayImage, iris: Circle, eye: EyeRegion, side: str) -> CornerPoint:
    """Locate the corner inside its search area.

    x: the column at the structured side of the largest variance step (the
    profile collapses crossing the corner, so the step's sign tells which
    neighbor still has structure). y: the traced eyelid row at that column.
    """
    area = corner_search_area(iris, eye, side, bounds=(img.width, img.height))
    x0, y0, x1, y1 = area
    profile = vpf(img, (x0, x1), (y0, y1))
    if float(profile.variance.max()) < VARIANCE_FLOOR:
        raise NoCornerFound(
            f"variance peak {profile.variance.max():.2f} below floor {VARIANCE_FLOOR}")
    if len(profile.derivative) == 0:
        raise NoCornerFound("search area only one column wide")
    i = int(np.argmax(np.abs(profile.derivative)))
    # rising step: structure begins at i+1; falling step: it ends at i
    corner_x = x0 + i + (1 if profile.derivative[i] > 0 else 0)
    lid_rows = trace_eyelid(img, area)
    corner_y = float(lid_rows[corner_x - x0])
    return CornerPoint(x=corner_x, y=corner_y, side=side)

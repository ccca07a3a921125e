"""Raster types and preprocessing primitives.

Everything the per-frame pipeline needs before geometry starts: block-mean
downsampling, isodata threshold selection, dark-foreground segmentation,
8-connected region labeling, and 3x3 Sobel gradients. All operations are
pure functions of their inputs; images are immutable once constructed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall, NonDivisibleDimensions

# ITU-R 601 luma weights used when collapsing color input to grayscale.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=np.uint8)


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster; ``pixels`` is a row-major (height, width) array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D intensity array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must have positive width and height")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError("pixels must be integers in [0, 255]; use from_array for floats")
            if px.min() < 0 or px.max() > 255:
                raise ValueError("intensities outside [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        """Coerce an array-like (integer or float) into a GrayImage, rounding and clipping."""
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("pixels must be finite")
        return cls(np.clip(np.rint(a), 0, 255).astype(np.uint8))


@dataclass(frozen=True)
class BinaryImage:
    """Segmentation mask; True marks foreground (dark pixels at or below threshold)."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2 or m.dtype != np.bool_:
            raise ValueError("mask must be a 2-D boolean array")
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class Region:
    """One 8-connected foreground component."""

    label: int
    pixel_count: int
    bounding_box: tuple[int, int, int, int]  # (x_min, y_min, x_max, y_max), inclusive
    centroid: tuple[float, float]  # (x, y)


@dataclass(frozen=True)
class GradientMap:
    """Sobel responses; gx/gy are signed, magnitude = hypot(gx, gy)."""

    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    @property
    def height(self) -> int:
        return self.gx.shape[0]


def downsample(img: GrayImage, factor: int) -> GrayImage:
    """Shrink by an integer factor; each output pixel is the rounded block mean.

    Width and height must both be divisible by the factor. Rounding is
    half-up, so a 2x2 block [0, 255, 255, 0] averages to 128.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return img
    h, w = img.height, img.width
    if h % factor or w % factor:
        raise NonDivisibleDimensions(
            f"{w}x{h} image is not divisible by factor {factor}")
    blocks = img.pixels.reshape(h // factor, factor, w // factor, factor)
    sums = blocks.astype(np.uint32).sum(axis=(1, 3))
    n = factor * factor
    # (2*sum + n) // (2*n) is exact round-half-up for non-negative integers
    out = ((2 * sums + n) // (2 * n)).astype(np.uint8)
    return GrayImage(out)


def isodata_threshold(img: GrayImage) -> float:
    """Threshold by iterative intensity-class splitting.

    Starting from the global mean, T moves to the midpoint of the means of
    the two classes it induces (pixels <= T vs. pixels > T) until it shifts
    by less than 0.5 or 100 rounds pass. A single-intensity image yields
    that intensity.
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256).astype(np.float64)
    csum = np.cumsum(hist)
    cwsum = np.cumsum(hist * np.arange(256.0))
    total = csum[-1]
    wtotal = cwsum[-1]
    t = wtotal / total
    for _ in range(100):
        k = int(t)  # pixel values are integers, so "<= t" splits at floor(t)
        n_lo = csum[k]
        if n_lo == 0 or n_lo == total:
            return float(t)
        mean_lo = cwsum[k] / n_lo
        mean_hi = (wtotal - cwsum[k]) / (total - n_lo)
        t_new = (mean_lo + mean_hi) / 2.0
        # converged once the integer split stops moving; a |change| < 0.5 test
        # alone can quit while the threshold is still drifting across an
        # integer boundary, leaving a split the update rule would still move
        if int(t_new) == k:
            return float(t_new)
        t = t_new
    return float(t)


def segment(img: GrayImage, threshold: float) -> BinaryImage:
    """Mark pixels at or below the threshold as foreground (iris, eyebrow are dark)."""
    if not 0 <= threshold <= 255:
        raise ValueError("threshold must lie in [0, 255]")
    return BinaryImage(img.pixels <= threshold)


def connected_components(bin_img: BinaryImage) -> list[Region]:
    """Label 8-connected foreground regions, largest first.

    Ties on pixel count are broken by smaller y_min, then smaller x_min.
    An empty mask yields an empty list.
    """
    labels, count = ndimage.label(bin_img.mask, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel())[1:]  # skip background
    slices = ndimage.find_objects(labels)
    ys, xs = np.nonzero(bin_img.mask)
    lab = labels[ys, xs]
    sx = np.bincount(lab, weights=xs)[1:]
    sy = np.bincount(lab, weights=ys)[1:]
    regions = []
    for i in range(count):
        sl_y, sl_x = slices[i]
        n = int(sizes[i])
        regions.append(Region(
            label=i + 1,
            pixel_count=n,
            bounding_box=(sl_x.start, sl_y.start, sl_x.stop - 1, sl_y.stop - 1),
            centroid=(sx[i] / n, sy[i] / n),
        ))
    regions.sort(key=lambda r: (-r.pixel_count, r.bounding_box[1], r.bounding_box[0]))
    return regions


def sobel(img: GrayImage) -> GradientMap:
    """3x3 Sobel gradients; border pixels are left at zero.

    gx is positive where intensity increases to the right, gy where it
    increases downward.
    """
    if img.height < 3 or img.width < 3:
        raise ImageTooSmall("sobel needs at least a 3x3 image")
    p = img.pixels.astype(np.float64)
    gx = np.zeros_like(p)
    gy = np.zeros_like(p)
    gx[1:-1, 1:-1] = (
        (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy[1:-1, 1:-1] = (
        (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    return GradientMap(gx=gx, gy=gy, magnitude=np.hypot(gx, gy))


# --- file I/O ------------------------------------------------------------

def load_image(path) -> GrayImage:
    """Read a grayscale image from PGM (P5) or PNG; color input is collapsed by luma."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
            return GrayImage(arr)
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
        wr, wg, wb = LUMA_WEIGHTS
        luma = wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]
        return GrayImage(np.rint(luma).astype(np.uint8))


def save_image(img: GrayImage, path) -> None:
    """Write a GrayImage as PGM (P5) or PNG, chosen by extension."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        path.write_bytes(header + img.pixels.tobytes())
        return
    from PIL import Image

    Image.fromarray(img.pixels, mode="L").save(path)


def _read_pgm(path: Path) -> GrayImage:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval; '#' comments allowed between tokens
    pos, fields = 2, []
    while len(fields) < 3:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\d+)").match(data, pos)
        if not m:
            raise ValueError(f"{path}: malformed PGM header")
        fields.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = fields
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    px = raster.reshape(height, width)
    if maxval != 255:
        px = np.rint(px.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return GrayImage(px)

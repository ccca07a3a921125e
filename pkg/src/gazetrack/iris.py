"""Iris-center detection.

Stage order: pick the eye region from the segmented low-resolution image
(eyebrow above, eye below), localize the iris column by window scanning,
collect iris-sclera boundary samples with a zigzag walk on the
full-resolution image, then estimate the circle by double circle fitting —
an algebraic least-squares fit, one outlier-elimination round, and a refit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateSamples,
    EyeRegionTooSmall,
    InsufficientRegions,
    NoSamples,
    TooFewInliers,
)
from .imgproc import BinaryImage, GrayImage, Region


@dataclass(frozen=True)
class Circle:
    """Circle in image coordinates: center (a, b), radius r (pixels)."""

    a: float
    b: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"radius must be finite and positive, got {self.r}")


@dataclass(frozen=True)
class EyeRegion:
    """Eye and eyebrow boxes in full-resolution coordinates, plus the working threshold.

    ``scale`` records the downsampling factor of the segmented image the
    boxes were detected on, so window scanning can map back to that grid.
    Boxes are (x_min, y_min, x_max, y_max), inclusive.
    """

    bounding_box: tuple[int, int, int, int]
    eyebrow_box: tuple[int, int, int, int]
    threshold: float
    scale: int = 1

    def __post_init__(self):
        if self.bounding_box[1] < self.eyebrow_box[1]:
            raise ValueError("eye region must not start above the eyebrow")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")


@dataclass(frozen=True)
class MomentSystem:
    """Moment sums and solved algebraic parameters of the circle fit.

    The normal equations read M · [B, C, D]^T = -[m_xz, m_yz, m_z]^T with
    M = [[m_xx, m_xy, m_x], [m_xy, m_yy, m_y], [m_x, m_y, n]], where
    z_i = x_i^2 + y_i^2. The circle is a = -B/2, b = -C/2,
    R = sqrt(a^2 + b^2 - D).
    """

    m_xx: float
    m_xy: float
    m_yy: float
    m_x: float
    m_y: float
    m_xz: float
    m_yz: float
    m_z: float
    n: int
    B: float
    C: float
    D: float

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.m_xx, self.m_xy, self.m_x],
            [self.m_xy, self.m_yy, self.m_y],
            [self.m_x, self.m_y, float(self.n)],
        ])

    def rhs(self) -> np.ndarray:
        return -np.array([self.m_xz, self.m_yz, self.m_z])


def locate_eye_region(bin_img: BinaryImage, regions: list[Region],
                      threshold: float, scale: int = 1) -> EyeRegion:
    """Pick eyebrow and eye from the two largest dark regions.

    The upper of the two (smaller centroid y) is the eyebrow; the lower is
    the eye. Boxes are scaled up by ``scale`` to full-resolution pixels.
    """
    if len(regions) < 2:
        raise InsufficientRegions(
            f"need eyebrow and eye blobs, found {len(regions)} region(s)")
    first, second = regions[0], regions[1]
    if first.centroid[1] <= second.centroid[1]:
        brow, eye = first, second
    else:
        brow, eye = second, first
    if eye.bounding_box[1] < brow.bounding_box[1]:
        # centroid order said eyebrow-over-eye but the boxes interleave:
        # not the face layout this detector reads
        raise InsufficientRegions("dark regions do not stack as eyebrow over eye")
    return EyeRegion(
        bounding_box=_scale_box(eye.bounding_box, scale),
        eyebrow_box=_scale_box(brow.bounding_box, scale),
        threshold=threshold,
        scale=scale,
    )


def _scale_box(box, s: int) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = box
    return (x0 * s, y0 * s, (x1 + 1) * s - 1, (y1 + 1) * s - 1)


def window_width(eye_width: int) -> int:
    """Scan-window width: 0.15 of the eye-region width, rounded half-up, at least 1."""
    return max(1, int(0.15 * eye_width + 0.5))


def scan_iris_window(bin_img: BinaryImage, eye: EyeRegion) -> int:
    """Slide a window across the eye region; return the full-resolution x
    of the leftmost position with the most foreground pixels.

    The window is eye-region high and 0.15 eye-widths wide, stepped one
    pixel at a time on the segmented image's grid.
    """
    s = eye.scale
    x0, y0, x1, y1 = eye.bounding_box
    # back to the segmented image's grid
    lx0, ly0 = x0 // s, y0 // s
    lx1, ly1 = (x1 + 1) // s - 1, (y1 + 1) // s - 1
    lx1 = min(lx1, bin_img.width - 1)
    ly1 = min(ly1, bin_img.height - 1)
    w_eye = lx1 - lx0 + 1
    if w_eye < 7 or ly1 < ly0:
        raise EyeRegionTooSmall(f"eye region width {w_eye} px; window scan needs >= 7")
    win = window_width(w_eye)
    counts = bin_img.mask[ly0:ly1 + 1, lx0:lx1 + 1].sum(axis=0)
    sums = np.convolve(counts, np.ones(win, dtype=np.int64), mode="valid")
    best = int(np.argmax(sums))  # argmax takes the first maximum: leftmost tie-break
    return (lx0 + best) * s


def extract_samples(img: GrayImage, threshold: float,
                    seed: tuple[int, int], eye: EyeRegion) -> np.ndarray:
    """Zigzag boundary sampling; returns an (n, 2) array of (x, y) samples.

    The seed column is scanned outward to the top and bottom edges of its
    dark run. Neighboring columns then reuse the previous column's boundary
    rows as starting points, probing at most 3 rows outward/inward before
    declaring the arc lost on that side. Interior dark specks never produce
    samples because only run-edge pixels (dark with a bright outward
    neighbor) qualify. Recorded ordinates sit half a pixel outward of the
    dark pixel — the midpoint of the dark/bright transition — which removes
    the half-pixel-per-side radius shrink of on-pixel sampling.

    The walk is clamped to the eye box padded by one segmentation block per
    side: block-mean segmentation erodes the blob by up to a block wherever
    a block straddles the boundary, so the box itself systematically cuts
    the outermost arc columns.
    """
    pad = eye.scale
    x0, y0, x1, y1 = eye.bounding_box
    x0, y0 = max(x0 - pad, 0), max(y0 - pad, 0)
    x1, y1 = min(x1 + pad, img.width - 1), min(y1 + pad, img.height - 1)
    sx, sy = int(round(seed[0])), int(round(seed[1]))
    if not (x0 <= sx <= x1 and y0 <= sy <= y1):
        raise ValueError(f"seed {seed} outside eye region {eye.bounding_box}")
    dark = img.pixels <= threshold

    col = dark[y0:y1 + 1, sx]
    if not col.any():
        raise NoSamples(f"no dark pixel in seed column x={sx}")
    rows = np.flatnonzero(col)
    r = sy - y0
    if not col[r]:
        r = rows[np.argmin(np.abs(rows - r))]  # jump to the nearest dark run
    top = r
    while top > 0 and col[top - 1]:
        top -= 1
    bot = r
    while bot < len(col) - 1 and col[bot + 1]:
        bot += 1
    top += y0
    bot += y0

    samples = [(sx, top - 0.5), (sx, bot + 0.5)]
    for step in (1, -1):
        prev_top, prev_bot = top, bot
        track_top = track_bot = True
        x = sx + step
        while (track_top or track_bot) and x0 <= x <= x1:
            if track_top:
                t = _track_edge(dark, x, prev_top, y0, y1, up=True)
                if t is None:
                    track_top = False
                else:
                    samples.append((x, t - 0.5))
                    prev_top = t
            if track_bot:
                b = _track_edge(dark, x, prev_bot, y0, y1, up=False)
                if b is None:
                    track_bot = False
                else:
                    samples.append((x, b + 0.5))
                    prev_bot = b
            x += step
    return np.array(samples, dtype=np.float64)


# Probe order around the previous row: outward first, then inward, one pixel
# at a time up to 3 rows. A boundary row is dark with its outward neighbor
# bright (or at the region edge).
_UP_OFFSETS = (0, -1, 1, -2, 2, -3, 3)


def _track_edge(dark, x, prev, y0, y1, up):
    sign = 1 if up else -1
    for off in _UP_OFFSETS:
        r = prev + sign * off
        if not y0 <= r <= y1:
            continue
        if not dark[r, x]:
            continue
        outward = r - 1 if up else r + 1
        if outward < y0 or outward > y1 or not dark[outward, x]:
            return r
    return None


def build_moment_system(samples) -> MomentSystem:
    """Assemble the raw moment sums and the algebraic parameters (B, C, D)."""
    pts = _as_points(samples)
    circ = fit_circle_algebraic(pts)
    x, y = pts[:, 0], pts[:, 1]
    z = x * x + y * y
    return MomentSystem(
        m_xx=float((x * x).sum()), m_xy=float((x * y).sum()), m_yy=float((y * y).sum()),
        m_x=float(x.sum()), m_y=float(y.sum()),
        m_xz=float((x * z).sum()), m_yz=float((y * z).sum()), m_z=float(z.sum()),
        n=len(pts),
        B=-2.0 * circ.a, C=-2.0 * circ.b, D=circ.a ** 2 + circ.b ** 2 - circ.r ** 2,
    )


def fit_circle_algebraic(samples) -> Circle:
    """Least-squares circle through the samples via the linearized system.

    Minimizes the sum of squared algebraic distances (z + Bx + Cy + D)^2,
    solving the symmetric positive-definite normal equations by Cholesky
    decomposition. Coordinates are shifted to their centroid first so the
    solve stays well-conditioned far from the origin; the result is mapped
    back exactly.
    """
    pts = _as_points(samples)
    n = len(pts)
    if n < 3:
        raise DegenerateSamples(f"circle fit needs >= 3 samples, got {n}")
    cx, cy = pts[:, 0].mean(), pts[:, 1].mean()
    u = pts[:, 0] - cx
    v = pts[:, 1] - cy
    z = u * u + v * v
    m = np.array([
        [(u * u).sum(), (u * v).sum(), u.sum()],
        [(u * v).sum(), (v * v).sum(), v.sum()],
        [u.sum(), v.sum(), float(n)],
    ])
    rhs = -np.array([(u * z).sum(), (v * z).sum(), z.sum()])
    try:
        b_alg, c_alg, d_alg = linalg.cho_solve(linalg.cho_factor(m), rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSamples(f"singular moment matrix: {exc}") from None
    a = -b_alg / 2.0
    b = -c_alg / 2.0
    r2 = a * a + b * b - d_alg
    if not math.isfinite(r2) or r2 <= 0:
        raise DegenerateSamples(f"non-positive squared radius {r2}")
    return Circle(a + cx, b + cy, math.sqrt(r2))


@lru_cache(maxsize=8)
def _triple_indices(m: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(m), 3)), dtype=np.intp)


def _consensus_circle(pts: np.ndarray) -> Circle | None:
    """Consensus-best circle among circumcircles of anchor triples.

    Up to 16 anchors are taken evenly in angle order around the centroid;
    every anchor triple proposes its circumcircle. Proposals are scored by
    how many samples they explain within a tight band (1 px or 2% of the
    proposed radius, whichever is larger), ties broken by median |dist - R|.
    Proposals with a radius beyond 1.25x the sample bounding-box diagonal
    are discarded: an eyelid edge is a near-collinear run, so the only
    circles hugging it are enormous, and the cap removes that impostor
    class no matter how many samples the run contributes. Returns None when
    every triple is degenerate.
    """
    n = len(pts)
    ang = np.arctan2(pts[:, 1] - pts[:, 1].mean(), pts[:, 0] - pts[:, 0].mean())
    order = np.argsort(ang, kind="stable")
    anchors = pts[order[np.unique(np.linspace(0, n - 1, min(16, n)).astype(int))]]
    idx = _triple_indices(len(anchors))
    p1, p2, p3 = anchors[idx[:, 0]], anchors[idx[:, 1]], anchors[idx[:, 2]]
    a1 = 2.0 * (p2 - p1)
    a2 = 2.0 * (p3 - p1)
    b1 = (p2 * p2).sum(axis=1) - (p1 * p1).sum(axis=1)
    b2 = (p3 * p3).sum(axis=1) - (p1 * p1).sum(axis=1)
    det = a1[:, 0] * a2[:, 1] - a1[:, 1] * a2[:, 0]
    diag = math.hypot(float(np.ptp(pts[:, 0])), float(np.ptp(pts[:, 1])))
    with np.errstate(divide="ignore", invalid="ignore"):
        cx = (b1 * a2[:, 1] - b2 * a1[:, 1]) / det
        cy = (a1[:, 0] * b2 - a2[:, 0] * b1) / det
        rr = np.hypot(p1[:, 0] - cx, p1[:, 1] - cy)
    ok = (np.abs(det) > 1e-9) & np.isfinite(rr) & (rr > 0) & (rr <= 1.25 * diag)
    if not ok.any():
        return None
    cx, cy, rr = cx[ok], cy[ok], rr[ok]
    d = np.abs(np.hypot(pts[None, :, 0] - cx[:, None],
                        pts[None, :, 1] - cy[:, None]) - rr[:, None])
    band = np.maximum(1.0, 0.02 * rr)
    counts = (d <= band[:, None]).sum(axis=1)
    best = int(np.lexsort((np.median(d, axis=1), -counts))[0])
    return Circle(float(cx[best]), float(cy[best]), float(rr[best]))


def double_circle_fit(samples) -> tuple[Circle, np.ndarray]:
    """Fit, eliminate far-from-circle samples, refit; returns (circle, inliers).

    The first fit is least squares seeded by a consensus circle: a plain
    fit over everything is useless as an elimination reference under eyelid
    occlusion, where a coherent near-collinear run can be nearly half the
    samples and drags the unweighted fit far enough that its residuals no
    longer separate the run from true boundary points. Elimination then
    drops points with |dist - R| > max(2*sigma, 0.1*R) around the first fit,
    with sigma a robust residual scale (1.4826 * MAD of signed residuals),
    and the survivors are refit once.
    """
    pts = _as_points(samples)
    if len(pts) < 6:
        raise TooFewInliers(f"double fit needs >= 6 samples, got {len(pts)}")
    _, final, keep = _double_fit_stages(pts)
    return final, pts[keep]


def _double_fit_stages(pts: np.ndarray) -> tuple[Circle, Circle, np.ndarray]:
    """First fit, final fit, and the survivor mask of the elimination round."""
    seed_circle = _consensus_circle(pts)
    if seed_circle is None:
        first = fit_circle_algebraic(pts)
    else:
        s = np.hypot(pts[:, 0] - seed_circle.a, pts[:, 1] - seed_circle.b) - seed_circle.r
        sigma0 = 1.4826 * np.median(np.abs(s - np.median(s)))
        agree = np.abs(s) <= max(2.0 * sigma0, 0.1 * seed_circle.r)
        first = fit_circle_algebraic(pts[agree]) if agree.sum() >= 3 else \
            fit_circle_algebraic(pts)

    res = np.hypot(pts[:, 0] - first.a, pts[:, 1] - first.b) - first.r
    sigma = 1.4826 * np.median(np.abs(res - np.median(res)))
    keep = np.abs(res) <= max(2.0 * sigma, 0.1 * first.r)
    if int(keep.sum()) < 3:
        raise TooFewInliers(f"only {int(keep.sum())} samples survive elimination")
    if keep.all():
        return first, first, keep
    kept = pts[keep]
    final = fit_circle_algebraic(kept)
    # least squares minimizes the residual sum, not the max; on rare
    # configurations the refit raises the worst survivor residual, and then
    # the first fit already explains the survivors better
    d_first = np.abs(np.hypot(kept[:, 0] - first.a, kept[:, 1] - first.b) - first.r)
    d_final = np.abs(np.hypot(kept[:, 0] - final.a, kept[:, 1] - final.b) - final.r)
    if d_final.max() > d_first.max():
        final = first
    return first, final, keep


def _as_points(samples) -> np.ndarray:
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateSamples(f"expected (n, 2) samples, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateSamples("samples contain non-finite coordinates")
    return pts

"""Synthetic eye scenes with exact ground truth.

Every accuracy number in the test suite is measured against these renders:
the iris circle, corner positions, and gaze targets are known by
construction. The scene is a skin background, an eyebrow blob, an almond
eye opening bounded by two quadratic eyelid curves meeting at the corners,
sclera fill, iris and pupil disks clipped to the opening, dark lash lines
along the lids, and optional Gaussian noise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InvalidSpec, TargetUnreachable
from .gaze import EyeballModel, ScreenGeometry, delta_from_gaze
from .imgproc import GrayImage


@dataclass(frozen=True)
class Intensities:
    sclera: int = 230
    skin: int = 180
    iris: int = 60
    pupil: int = 20
    eyebrow: int = 50


@dataclass(frozen=True)
class SyntheticEyeSpec:
    """Scene parameters; None fields are derived from the iris by resolve()."""

    size: tuple[int, int] = (640, 480)  # (width, height)
    iris_center: tuple[float, float] = (320.0, 240.0)
    iris_radius: float = 35.0
    pupil_radius: float = 14.0
    corner_temporal: tuple[float, float] | None = None  # default: center + (2.5 R, 0)
    corner_nasal: tuple[float, float] | None = None     # default: center - (2.5 R, 0)
    eyelid_coverage: float = 0.0  # fraction of iris diameter hidden by the upper lid
    eyebrow_box: tuple[int, int, int, int] | None = None
    intensities: Intensities = Intensities()
    noise_sigma: float = 0.0
    seed: int = 0


def resolve(spec: SyntheticEyeSpec) -> SyntheticEyeSpec:
    """Fill derived defaults (corners, eyebrow box) and validate invariants."""
    w, h = spec.size
    cx, cy = spec.iris_center
    r = spec.iris_radius
    if w < 16 or h < 16:
        raise InvalidSpec(f"image {w}x{h} too small")
    if not 0 < spec.pupil_radius < r:
        raise InvalidSpec("pupil radius must be positive and smaller than the iris")
    if not (r <= cx <= w - 1 - r and r <= cy <= h - 1 - r):
        raise InvalidSpec(f"iris disk (center {spec.iris_center}, R {r}) leaves the image")
    if not 0.0 <= spec.eyelid_coverage <= 0.9:
        raise InvalidSpec(f"eyelid_coverage {spec.eyelid_coverage} outside [0, 0.9]")
    if spec.noise_sigma < 0:
        raise InvalidSpec("noise_sigma must be non-negative")
    i = spec.intensities
    if not (i.sclera > i.skin > i.iris > i.pupil):
        raise InvalidSpec("intensity ordering sclera > skin > iris > pupil required")

    temporal = spec.corner_temporal or (cx + 2.5 * r, cy)
    nasal = spec.corner_nasal or (cx - 2.5 * r, cy)
    if not nasal[0] < cx < temporal[0]:
        raise InvalidSpec("corners must straddle the iris center horizontally")
    brow = spec.eyebrow_box
    if brow is None:
        mid = (nasal[0] + temporal[0]) / 2.0
        y_c = (nasal[1] + temporal[1]) / 2.0
        # leave clearance below the brow: an upward gaze lifts the opening's
        # apex (and its lash fringe) by the iris travel, and the brow must
        # stay a separate blob through the whole reachable pose range
        brow = (int(mid - 2.5 * r), int(y_c - 2.6 * r), int(mid + 2.5 * r), int(y_c - 2.0 * r))
    bx0, by0, bx1, by1 = brow
    if not (0 <= bx0 < bx1 < w and 0 <= by0 < by1 < h):
        raise InvalidSpec(f"eyebrow box {brow} outside the image")
    return replace(spec, corner_temporal=temporal, corner_nasal=nasal, eyebrow_box=brow)


def _quadratic_through(p1, p2, x_mid, y_mid):
    """Coefficients of y = a x^2 + b x + c through two points and one midspan value."""
    m = np.array([
        [p1[0] ** 2, p1[0], 1.0],
        [p2[0] ** 2, p2[0], 1.0],
        [x_mid ** 2, x_mid, 1.0],
    ])
    return np.linalg.solve(m, np.array([p1[1], p2[1], y_mid], dtype=np.float64))


def eyelid_curves(spec: SyntheticEyeSpec, xs) -> tuple[np.ndarray, np.ndarray]:
    """Row of the upper and lower lid boundary at each column in xs.

    Both curves pass through the two corners and describe the resting
    almond opening: the upper arc clears the iris top by 0.25 R, the lower
    clears the bottom by 0.15 R. eyelid_coverage does not move them — the
    descended lid is a separate straight edge (see occlusion_row).
    """
    spec = resolve(spec)
    cx, cy = spec.iris_center
    r = spec.iris_radius
    xs = np.asarray(xs, dtype=np.float64)
    up_mid = cy - 1.25 * r
    lo_mid = cy + 1.15 * r
    cu = _quadratic_through(spec.corner_nasal, spec.corner_temporal, cx, up_mid)
    cl = _quadratic_through(spec.corner_nasal, spec.corner_temporal, cx, lo_mid)
    return np.polyval(cu, xs), np.polyval(cl, xs)


def occlusion_row(spec: SyntheticEyeSpec) -> float | None:
    """Subpixel row of the descended upper-lid edge, or None when fully open.

    eyelid_coverage is the fraction of the iris diameter hidden, so the lid
    edge sits coverage * diameter below the iris top, as a horizontal line
    across the opening.
    """
    spec = resolve(spec)
    if spec.eyelid_coverage <= 0:
        return None
    cy = spec.iris_center[1]
    r = spec.iris_radius
    return (cy - r) + 2.0 * spec.eyelid_coverage * r


def render(spec: SyntheticEyeSpec) -> tuple[GrayImage, dict]:
    """Rasterize the scene; returns the image and its ground-truth record."""
    spec = resolve(spec)
    w, h = spec.size
    cx, cy = spec.iris_center
    r = spec.iris_radius
    ints = spec.intensities

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    canvas = np.full((h, w), float(ints.skin))

    bx0, by0, bx1, by1 = spec.eyebrow_box
    ex, ey = (bx0 + bx1) / 2.0, (by0 + by1) / 2.0
    rx, ry = (bx1 - bx0) / 2.0, (by1 - by0) / 2.0
    canvas[((xx - ex) / rx) ** 2 + ((yy - ey) / ry) ** 2 <= 1.0] = ints.eyebrow

    xs = np.arange(w, dtype=np.float64)
    y_up, y_lo = eyelid_curves(spec, xs)
    opening = (yy >= y_up[None, :]) & (yy <= y_lo[None, :])
    canvas[opening] = ints.sclera

    dist2 = (xx - cx) ** 2 + (yy - cy) ** 2
    canvas[opening & (dist2 <= r * r)] = ints.iris
    canvas[opening & (dist2 <= spec.pupil_radius ** 2)] = ints.pupil

    y_lid = occlusion_row(spec)
    if y_lid is not None:
        canvas[opening & (yy < y_lid)] = ints.skin

    # lash fringe along both lids, between the corners only, kept off the
    # iris disk so the boundary the zigzag samples stays circle-true
    eff_up = y_up if y_lid is None else np.maximum(y_up, y_lid)
    x_lo_corner = min(spec.corner_nasal[0], spec.corner_temporal[0])
    x_hi_corner = max(spec.corner_nasal[0], spec.corner_temporal[0])
    span = ((xx >= x_lo_corner) & (xx <= x_hi_corner)
            & (dist2 >= (r + 2.0) ** 2) & (eff_up[None, :] < y_lo[None, :]))
    for curve in (eff_up, y_lo):
        canvas[span & (np.abs(yy - curve[None, :]) <= 1.0)] = ints.eyebrow

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        canvas = canvas + rng.normal(0.0, spec.noise_sigma, size=canvas.shape)

    img = GrayImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))
    truth = {
        "iris": {"cx": cx, "cy": cy, "r": r},
        "pupil_r": spec.pupil_radius,
        "corner": {"x": spec.corner_temporal[0], "y": spec.corner_temporal[1]},
        "corner_nasal": {"x": spec.corner_nasal[0], "y": spec.corner_nasal[1]},
        "eyelid_coverage": spec.eyelid_coverage,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
        "target_screen": None,
        "spec_sha": spec_hash(spec),
    }
    return img, truth


def spec_hash(spec: SyntheticEyeSpec) -> str:
    blob = json.dumps(asdict(spec), sort_keys=True, default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def render_gaze_sweep(base: SyntheticEyeSpec, model: EyeballModel, targets,
                      screen: ScreenGeometry) -> list[tuple[GrayImage, dict]]:
    """Render one frame per screen target by inverting the gaze model.

    The base pose is taken as gazing at the screen center; each target's
    displacement g (mm) maps back to an iris-center offset while the
    corners, lids, and eyebrow stay fixed. Ground truth records the target.
    """
    base = resolve(base)
    cx, cy = base.iris_center
    ref = (screen.width / 2.0, screen.height / 2.0)
    px_per_mm = base.iris_radius / model.r_iris_mm
    out = []
    for idx, (tx, ty) in enumerate(targets):
        if not (0 <= tx < screen.width and 0 <= ty < screen.height):
            raise TargetUnreachable(f"target ({tx}, {ty}) off the {screen.width}x{screen.height} screen")
        g = ((tx - ref[0]) * screen.pitch_mm, -(ty - ref[1]) * screen.pitch_mm)
        d_mm = delta_from_gaze(g, model)
        if max(abs(d_mm[0]), abs(d_mm[1])) >= model.r_ball:
            raise TargetUnreachable(f"target ({tx}, {ty}) needs |delta| >= r_ball")
        center = (cx + d_mm[0] * px_per_mm, cy - d_mm[1] * px_per_mm)
        shifted = replace(base, iris_center=center, seed=base.seed + idx)
        try:
            img, truth = render(shifted)
        except InvalidSpec as exc:
            raise TargetUnreachable(f"target ({tx}, {ty}): {exc}") from None
        truth["target_screen"] = {"x": float(tx), "y": float(ty)}
        out.append((img, truth))
    return out


def render_failure_case(spec: SyntheticEyeSpec, mode: str) -> GrayImage:
    """Scenes the pipeline must refuse: heavy lid occlusion or an iris
    wandered to the opening's edge."""
    spec = resolve(spec)
    if mode == "heavy-occlusion":
        bad = replace(spec, eyelid_coverage=max(spec.eyelid_coverage, 0.7))
    elif mode == "off-frame-iris":
        w = spec.size[0]
        cx = min(spec.iris_center[0] + 2.0 * spec.iris_radius,
                 w - 1 - spec.iris_radius)
        bad = replace(spec, iris_center=(cx, spec.iris_center[1]),
                      corner_temporal=spec.corner_temporal,
                      corner_nasal=spec.corner_nasal,
                      eyebrow_box=spec.eyebrow_box)
    else:
        raise ValueError(f"unknown failure mode {mode!r}")
    img, _ = render(bad)
    return img

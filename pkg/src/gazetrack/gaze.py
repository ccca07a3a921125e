"""Gaze estimation from the corner-to-iris displacement.

A spherical eyeball of radius r_ball sits at distance d from the screen
plane. An iris-center displacement of delta millimeters from the reference
gaze corresponds to a rotation theta = arcsin(delta / r_ball) and a screen
displacement g = d * tan(theta), per axis independently. A two-cross
calibration anchors the pixel scale, the reference vector, and a per-axis
linear map from g to screen pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .corner import CornerPoint
from .errors import DegenerateCalibration, NotCalibrated
from .iris import Circle


class _OffScreen:
    """Singleton marker for a gaze point that leaves the screen rectangle."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OffScreen"

    def __bool__(self):
        return False


OFF_SCREEN = _OffScreen()


@dataclass(frozen=True)
class EyeballModel:
    """Geometric constants: eyeball radius, eye-to-screen distance, iris radius (mm)."""

    r_ball: float = 12.5
    d: float = 650.0
    r_iris_mm: float = 5.9

    def __post_init__(self):
        if not 12.0 <= self.r_ball <= 13.0:
            raise ValueError(f"r_ball {self.r_ball} outside the anthropometric 12-13 mm range")
        if self.d <= 0:
            raise ValueError("screen distance d must be positive")
        if self.r_iris_mm <= 0:
            raise ValueError("r_iris_mm must be positive")


@dataclass(frozen=True)
class ScreenGeometry:
    """Screen raster (pixels) and pixel pitch (millimeters per pixel)."""

    width: int = 1920
    height: int = 1080
    pitch_mm: float = 0.265

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.pitch_mm <= 0:
            raise ValueError("screen needs positive dimensions and pitch")


@dataclass(frozen=True)
class GazeSample:
    """Displacements at one frame: delta on the eye (mm), g on the screen plane (mm)."""

    delta: tuple[float, float]
    g: tuple[float, float]
    clamped: bool = False


@dataclass(frozen=True)
class CalibrationMap:
    """Everything learned from the two-cross calibration."""

    reference_vector: tuple[float, float]  # corner->iris, pixels, at the reference gaze
    px_to_mm: float
    alpha: tuple[float, float]  # screen px per mm of g
    beta: tuple[float, float]   # screen px offset
    model: EyeballModel

    def __post_init__(self):
        if self.px_to_mm <= 0:
            raise ValueError("px_to_mm must be positive")
        if self.alpha[0] == 0 or self.alpha[1] == 0:
            raise ValueError("alpha must be nonzero per axis (invertible map)")


def displacement(iris: Circle, corner: CornerPoint | tuple[float, float],
                 cal: CalibrationMap | None) -> tuple[float, float]:
    """Iris displacement from the reference gaze, in millimeters.

    Works on the corner->iris vector, so rigid head translation moves iris
    and corner together and cancels exactly. Image y grows downward; the
    sign is flipped so upward gaze gives positive delta-y.
    """
    if cal is None:
        raise NotCalibrated("no calibration map")
    cx, cy = (corner.x, corner.y) if isinstance(corner, CornerPoint) else corner
    dx_px = (iris.a - cx) - cal.reference_vector[0]
    dy_px = (iris.b - cy) - cal.reference_vector[1]
    return (dx_px * cal.px_to_mm, -dy_px * cal.px_to_mm)


def gaze_from_delta(delta: tuple[float, float], model: EyeballModel) -> GazeSample:
    """Map eye-surface displacement (mm) to screen-plane displacement (mm).

    theta = arcsin(delta / r_ball), g = d * tan(theta), axes independent.
    |delta| beyond r_ball is clamped and flagged.
    """
    g = []
    clamped = False
    for v in delta:
        s = v / model.r_ball
        if s > 1.0 or s < -1.0:
            s = max(-1.0, min(1.0, s))
            clamped = True
        g.append(model.d * math.tan(math.asin(s)))
    return GazeSample(delta=(delta[0], delta[1]), g=(g[0], g[1]), clamped=clamped)


def delta_from_gaze(g: tuple[float, float], model: EyeballModel) -> tuple[float, float]:
    """Inverse of gaze_from_delta: delta = r_ball * sin(atan(g / d)) per axis."""
    return tuple(model.r_ball * math.sin(math.atan(v / model.d)) for v in g)


def calibrate(readings, model: EyeballModel, iris_radius_px: float) -> CalibrationMap:
    """Build the map from two (corner->iris vector, screen cross) readings.

    The physical iris radius anchors the pixel scale; the reference vector
    is the midpoint of the two measured vectors; each axis gets a two-point
    linear solve screen = alpha * g + beta.
    """
    if len(readings) != 2:
        raise DegenerateCalibration(f"need exactly 2 readings, got {len(readings)}")
    (v1, s1), (v2, s2) = readings
    if s1[0] == s2[0] or s1[1] == s2[1]:
        raise DegenerateCalibration(f"crosses {s1} and {s2} coincide on an axis")
    if iris_radius_px <= 0:
        raise DegenerateCalibration(f"iris radius {iris_radius_px} px is not usable")
    px_to_mm = model.r_iris_mm / iris_radius_px
    ref = ((v1[0] + v2[0]) / 2.0, (v1[1] + v2[1]) / 2.0)

    def to_g(v):
        d_mm = ((v[0] - ref[0]) * px_to_mm, -(v[1] - ref[1]) * px_to_mm)
        return gaze_from_delta(d_mm, model).g

    g1, g2 = to_g(v1), to_g(v2)
    alpha, beta = [], []
    for axis in (0, 1):
        dg = g2[axis] - g1[axis]
        if dg == 0:
            raise DegenerateCalibration(
                f"measured vectors coincide on axis {axis}; gains unsolvable")
        a = (s2[axis] - s1[axis]) / dg
        alpha.append(a)
        beta.append(s1[axis] - a * g1[axis])
    return CalibrationMap(
        reference_vector=ref, px_to_mm=px_to_mm,
        alpha=(alpha[0], alpha[1]), beta=(beta[0], beta[1]), model=model,
    )


def to_screen(g: tuple[float, float], cal: CalibrationMap | None,
              screen: ScreenGeometry):
    """Screen point for a gaze displacement; OFF_SCREEN when it leaves the raster."""
    if cal is None:
        raise NotCalibrated("no calibration map")
    x = cal.alpha[0] * g[0] + cal.beta[0]
    y = cal.alpha[1] * g[1] + cal.beta[1]
    if not (0 <= x < screen.width and 0 <= y < screen.height):
        return OFF_SCREEN
    return (x, y)


def angular_error(error_mm: float, d: float) -> float:
    """View angle (degrees) subtended by an on-screen error at distance d."""
    if d <= 0:
        raise ValueError("distance d must be positive")
    return math.degrees(math.atan(error_mm / d))


# --- persistence -----------------------------------------------------------

def save_calibration(cal: CalibrationMap, path) -> None:
    doc = {
        "reference_vector": list(cal.reference_vector),
        "px_to_mm": cal.px_to_mm,
        "alpha": list(cal.alpha),
        "beta": list(cal.beta),
        "model": {"r_ball": cal.model.r_ball, "d": cal.model.d,
                  "r_iris_mm": cal.model.r_iris_mm},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_calibration(path) -> CalibrationMap:
    doc = json.loads(Path(path).read_text())
    model = EyeballModel(**doc["model"])
    return CalibrationMap(
        reference_vector=tuple(doc["reference_vector"]),
        px_to_mm=doc["px_to_mm"],
        alpha=tuple(doc["alpha"]),
        beta=tuple(doc["beta"]),
        model=model,
    )

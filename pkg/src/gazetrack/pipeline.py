"""Per-frame orchestration and streaming.

process_frame runs the full detection chain and converts every failure into
a status — it never raises on image content. run_stream replays a frame
source through the pipeline and fans results out to sinks;
run_calibration_sequence drives the two-cross calibration; bench measures
throughput.
"""

from __future__ import annotations

import hashlib
import json
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import corner as corner_mod
from . import imgproc, iris as iris_mod
from .errors import CalibrationFailed, GazeTrackError, SourceUnavailable
from .gaze import (
    OFF_SCREEN,
    CalibrationMap,
    EyeballModel,
    ScreenGeometry,
    calibrate,
    displacement,
    gaze_from_delta,
    to_screen,
)
from .imgproc import GrayImage, load_image
from .iris import Circle, EyeRegion

STATUS_OK = "Ok"
STATUS_IRIS_OCCLUSION = "IrisOcclusion"
STATUS_NO_EYE = "NoEye"
STATUS_NO_CORNER = "NoCorner"
STATUS_NOT_CALIBRATED = "NotCalibrated"

STATUSES = (STATUS_OK, STATUS_IRIS_OCCLUSION, STATUS_NO_EYE,
            STATUS_NO_CORNER, STATUS_NOT_CALIBRATED)


@dataclass(frozen=True)
class PipelineConfig:
    downsample_factor: int = 8
    side: str = "temporal"
    model: EyeballModel = EyeballModel()
    screen: ScreenGeometry = ScreenGeometry()
    smoothing_window: int = 1  # 1 = off; applied by run_stream, not process_frame
    dwell_frames: int = 30
    min_valid_frames: int = 10


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    t_ms: float
    status: str
    iris: Circle | None = None
    corner: corner_mod.CornerPoint | None = None
    delta: tuple[float, float] | None = None
    screen: object = None  # (x, y), OFF_SCREEN, or None when absent
    inlier_count: int = 0
    processing_time_us: int = 0

    def to_json_dict(self) -> dict:
        if self.screen is None or self.screen is OFF_SCREEN:
            screen = None
        else:
            screen = {"x": self.screen[0], "y": self.screen[1]}
        return {
            "frame_id": self.frame_id,
            "t_ms": self.t_ms,
            "status": self.status,
            "iris": None if self.iris is None else
                {"cx": self.iris.a, "cy": self.iris.b, "r": self.iris.r},
            "corner": None if self.corner is None else
                {"x": self.corner.x, "y": self.corner.y},
            "delta": None if self.delta is None else
                {"dx": self.delta[0], "dy": self.delta[1]},
            "screen": screen,
            "inliers": self.inlier_count,
            "proc_us": self.processing_time_us,
        }


def expected_arc_samples(r: float) -> int:
    """Sample budget for an unoccluded iris of radius r.

    The zigzag abandons an arc once the boundary moves more than 3 rows per
    column, i.e. beyond |x - a| = 3R/sqrt(10) ~ 0.9487 R; two arcs, two
    samples per tracked column.
    """
    return 4 * int(0.9487 * r)


# Occlusion gates (beyond the bare minimum needed to fit at all):
# - count gate: fewer inliers than a quarter of the expected budget;
# - visibility gate: no inlier rises to the fitted center's height, so the
#   whole upper half is hidden. Coverage 0.5 puts the lid exactly at the
#   center (passes); 0.6 leaves the topmost point 0.2 R below it (fails).
_MIN_SAMPLES = 6


def _occluded(circle: Circle, inliers: np.ndarray) -> bool:
    if len(inliers) < max(_MIN_SAMPLES, expected_arc_samples(circle.r) // 4):
        return True
    top_margin = max(3.0, 0.06 * circle.r)
    return float(inliers[:, 1].min()) - circle.b > top_margin


def process_frame(img: GrayImage, cal: CalibrationMap | None,
                  config: PipelineConfig = PipelineConfig(),
                  trace: dict | None = None) -> FrameResult:
    """Run the full chain on one frame; failures become statuses, never raises.

    When a dict is passed as ``trace``, intermediate artifacts (eye region,
    samples, inliers) are recorded in it for diagnostics.
    """
    t0 = time.perf_counter()
    t_ms = time.time() * 1000.0

    def done(status, **fields):
        us = int((time.perf_counter() - t0) * 1e6)
        return FrameResult(frame_id=0, t_ms=t_ms, status=status,
                           processing_time_us=us, **fields)

    # --- eye region on the downsampled frame
    try:
        factor = config.downsample_factor
        low = _downsample_safe(img, factor)
        threshold = imgproc.isodata_threshold(low)
        seg = imgproc.segment(low, threshold)
        regions = imgproc.connected_components(seg)
        eye = iris_mod.locate_eye_region(seg, regions, threshold, scale=factor)
        win_x = iris_mod.scan_iris_window(seg, eye)
    except GazeTrackError:
        return done(STATUS_NO_EYE)

    # --- iris circle at full resolution
    try:
        threshold = _refine_threshold(low, eye, win_x, threshold)
        eye = replace(eye, threshold=threshold)
        ex0, ey0, ex1, ey1 = eye.bounding_box
        w_full = iris_mod.window_width(ex1 - ex0 + 1)
        seed = (min(win_x + w_full // 2, ex1), (ey0 + ey1) // 2)
        if trace is not None:
            trace["eye"] = eye
            trace["seed"] = seed
        samples = iris_mod.extract_samples(img, threshold, seed, eye)
        if trace is not None:
            trace["samples"] = samples
        if len(samples) < _MIN_SAMPLES:
            return done(STATUS_IRIS_OCCLUSION)
        circle, inliers = iris_mod.double_circle_fit(samples)
        if trace is not None:
            trace["inliers"] = inliers
        if _occluded(circle, inliers):
            return done(STATUS_IRIS_OCCLUSION)
    except GazeTrackError:
        return done(STATUS_IRIS_OCCLUSION)
    n_inliers = len(inliers)

    # --- corner
    try:
        cpt = corner_mod.detect_corner(img, circle, eye, config.side)
    except GazeTrackError:
        return done(STATUS_NO_CORNER, iris=circle, inlier_count=n_inliers)

    # --- gaze
    if cal is None:
        return done(STATUS_NOT_CALIBRATED, iris=circle, corner=cpt,
                    inlier_count=n_inliers)
    try:
        delta = displacement(circle, cpt, cal)
        sample = gaze_from_delta(delta, cal.model)
        point = to_screen(sample.g, cal, config.screen)
    except GazeTrackError:
        return done(STATUS_NOT_CALIBRATED, iris=circle, corner=cpt,
                    inlier_count=n_inliers)
    return done(STATUS_OK, iris=circle, corner=cpt, delta=delta,
                screen=point, inlier_count=n_inliers)


def _downsample_safe(img: GrayImage, factor: int) -> GrayImage:
    if factor <= 1:
        return img
    h, w = img.height, img.width
    if h < factor or w < factor:
        return img
    h2, w2 = (h // factor) * factor, (w // factor) * factor
    if (h2, w2) != (h, w):
        img = GrayImage(img.pixels[:h2, :w2])  # trim the non-divisible fringe
    return imgproc.downsample(img, factor)


def _refine_threshold(low: GrayImage, eye: EyeRegion, win_x: int,
                      fallback: float) -> float:
    """Recompute isodata locally around the detected iris column.

    Nominally a box of 3x3 window-widths on the downsampled frame, but when
    the segmented eye blob hugs the iris that box can fall entirely inside
    the iris disk, where isodata would split iris against pupil instead of
    iris against sclera. The box is therefore floored to cover the eye blob
    plus a half-blob margin of surrounding sclera and skin per side.
    """
    s = eye.scale
    x0, y0, x1, y1 = eye.bounding_box
    lx0, ly0, lx1, ly1 = x0 // s, y0 // s, (x1 + 1) // s - 1, (y1 + 1) // s - 1
    w = iris_mod.window_width(lx1 - lx0 + 1)
    cx = win_x // s + w // 2
    cy = (ly0 + ly1) // 2
    half_x = max((3 * w) // 2, (3 * (lx1 - lx0 + 1)) // 4, 1)
    half_y = max((3 * w) // 2, (3 * (ly1 - ly0 + 1)) // 4, 1)
    bx0, bx1 = max(cx - half_x, 0), min(cx + half_x, low.width - 1)
    by0, by1 = max(cy - half_y, 0), min(cy + half_y, low.height - 1)
    if bx1 <= bx0 or by1 <= by0:
        return fallback
    crop = GrayImage(low.pixels[by0:by1 + 1, bx0:bx1 + 1])
    return imgproc.isodata_threshold(crop)


# --- frame sources ---------------------------------------------------------

class DirectorySource:
    """Replays every .pgm/.png in a directory, sorted by name."""

    kind = "image-directory"

    def __init__(self, path, fps: float = 0.0, loop: bool = False):
        self.path = Path(path)
        self.fps = fps
        self.loop = loop
        if not self.path.is_dir():
            raise SourceUnavailable(f"{path} is not a directory")
        self.files = sorted(p for p in self.path.iterdir()
                            if p.suffix.lower() in (".pgm", ".png"))
        if not self.files:
            raise SourceUnavailable(f"no .pgm/.png images under {path}")

    def frames(self):
        while True:
            for p in self.files:
                yield load_image(p)
                if self.fps > 0:
                    time.sleep(1.0 / self.fps)
            if not self.loop:
                return


class ManifestSource:
    """Replays a dataset in manifest order; optionally filtered by role."""

    kind = "manifest-dataset"

    def __init__(self, manifest_path, fps: float = 0.0, loop: bool = False,
                 roles=None, repeat: int = 1):
        self.manifest_path = Path(manifest_path)
        if self.manifest_path.is_dir():
            self.manifest_path = self.manifest_path / "manifest.json"
        if not self.manifest_path.is_file():
            raise SourceUnavailable(f"manifest not found at {self.manifest_path}")
        self.doc = json.loads(self.manifest_path.read_text())
        self.fps = fps
        self.loop = loop
        root = self.manifest_path.parent
        entries = self.doc.get("images", [])
        if roles is not None:
            entries = [e for e in entries if e.get("role") in roles]
        if not entries:
            raise SourceUnavailable(f"no frames selected from {self.manifest_path}")
        if repeat < 1:
            raise ValueError(f"repeat must be >= 1, got {repeat}")
        self.entries = entries
        self.repeat = repeat
        self._root = root

    def frames(self):
        while True:
            for entry in self.entries:
                img = load_image(self._root / entry["file"])
                for _ in range(self.repeat):
                    yield img
                    if self.fps > 0:
                        time.sleep(1.0 / self.fps)
            if not self.loop:
                return


class ListSource:
    """In-memory source, mostly for tests and calibration replays."""

    kind = "list"

    def __init__(self, images, fps: float = 0.0, loop: bool = False):
        if not images:
            raise SourceUnavailable("empty image list")
        self.images = list(images)
        self.fps = fps
        self.loop = loop

    def frames(self):
        while True:
            for img in self.images:
                yield img
                if self.fps > 0:
                    time.sleep(1.0 / self.fps)
            if not self.loop:
                return


class CameraSource:
    """Live capture through OpenCV, when the optional dependency is present."""

    kind = "live-capture"

    def __init__(self, device: int = 0, fps: float = 0.0):
        try:
            import cv2
        except ImportError as exc:
            raise SourceUnavailable(f"OpenCV not installed: {exc}") from None
        self._cv2 = cv2
        self.cap = cv2.VideoCapture(device)
        if not self.cap.isOpened():
            raise SourceUnavailable(f"cannot open capture device {device}")
        self.fps = fps

    def frames(self):
        while True:
            ok, frame = self.cap.read()
            if not ok:
                return
            gray = self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2GRAY)
            yield GrayImage(gray)


def run_stream(source, cal: CalibrationMap | None,
               config: PipelineConfig = PipelineConfig(), sinks=()):
    """Process a source and yield FrameResults in order, fanning out to sinks.

    frame_id is assigned sequentially; optional screen-point smoothing
    (config.smoothing_window > 1) is applied here so process_frame itself
    stays stateless.
    """
    window = deque(maxlen=max(1, config.smoothing_window))
    for frame_id, img in enumerate(source.frames()):
        result = process_frame(img, cal, config)
        result = replace(result, frame_id=frame_id)
        if config.smoothing_window > 1:
            if result.status == STATUS_OK and isinstance(result.screen, tuple):
                window.append(result.screen)
                sx = sum(p[0] for p in window) / len(window)
                sy = sum(p[1] for p in window) / len(window)
                result = replace(result, screen=(sx, sy))
        for sink in sinks:
            sink(result)
        yield result


class NdjsonSink:
    """Writes one FrameResult JSON object per line."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def __call__(self, result: FrameResult):
        self._fh.write(json.dumps(result.to_json_dict()) + "\n")

    def close(self):
        self._fh.close()


def run_calibration_sequence(source, screen: ScreenGeometry, crosses,
                             config: PipelineConfig = PipelineConfig()) -> CalibrationMap:
    """Two-cross calibration: dwell on each cross, median the measurements.

    Consumes dwell_frames frames per cross from the source; frames with a
    detected iris and corner count as valid, and at least min_valid_frames
    are required per cross.
    """
    if len(crosses) != 2:
        raise CalibrationFailed(f"need exactly 2 crosses, got {len(crosses)}")
    gen = source.frames()
    vectors = []
    radii = []
    for cross_idx in range(2):
        vx, vy, rs = [], [], []
        for _ in range(config.dwell_frames):
            try:
                img = next(gen)
            except StopIteration:
                break
            res = process_frame(img, None, config)
            if res.iris is not None and res.corner is not None:
                vx.append(res.iris.a - res.corner.x)
                vy.append(res.iris.b - res.corner.y)
                rs.append(res.iris.r)
        if len(vx) < config.min_valid_frames:
            raise CalibrationFailed(
                f"cross {cross_idx}: only {len(vx)} valid frames of "
                f"{config.dwell_frames} (need {config.min_valid_frames})")
        vectors.append((float(np.median(vx)), float(np.median(vy))))
        radii.extend(rs)
    readings = [(vectors[0], tuple(crosses[0])), (vectors[1], tuple(crosses[1]))]
    return calibrate(readings, config.model, float(np.median(radii)))


def bench(images, repetitions: int = 1,
          config: PipelineConfig = PipelineConfig(),
          cal: CalibrationMap | None = None, min_frames: int = 1000) -> dict:
    """Throughput report over >= min_frames processings of the dataset.

    Results are checksummed so the work cannot be optimized away and reruns
    can be compared for determinism.
    """
    if not images:
        raise ValueError("bench needs a non-empty dataset")
    n_needed = max(min_frames, repetitions * len(images))
    digest = hashlib.sha256()
    times = []
    count = 0
    while count < n_needed:
        for img in images:
            t0 = time.perf_counter()
            res = process_frame(img, cal, config)
            times.append(time.perf_counter() - t0)
            digest.update(res.status.encode())
            if res.iris is not None:
                digest.update(f"{res.iris.a:.3f},{res.iris.b:.3f},{res.iris.r:.3f}".encode())
            count += 1
            if count >= n_needed:
                break
    arr = np.array(times)
    return {
        "frames": count,
        "mean_ms": float(arr.mean() * 1e3),
        "median_ms": float(np.median(arr) * 1e3),
        "p99_ms": float(np.percentile(arr, 99) * 1e3),
        "fps": float(1.0 / arr.mean()),
        "checksum": digest.hexdigest(),
    }

"""Visual-camera gaze tracking.

Iris-center detection by double circle fitting, eye-corner detection by the
variance projection function, and eyeball-model gaze estimation, with a
synthetic-scene oracle, a CLI, and a WebSocket streaming service.
"""

from .corner import CornerPoint, VpfProfile, corner_search_area, detect_corner, vpf
from .errors import GazeTrackError
from .estimator import GazeTracker
from .gaze import (
    OFF_SCREEN,
    CalibrationMap,
    EyeballModel,
    GazeSample,
    ScreenGeometry,
    angular_error,
    calibrate,
    displacement,
    gaze_from_delta,
    load_calibration,
    save_calibration,
    to_screen,
)
from .imgproc import (
    BinaryImage,
    GrayImage,
    Region,
    connected_components,
    downsample,
    isodata_threshold,
    load_image,
    save_image,
    segment,
    sobel,
)
from .iris import (
    Circle,
    EyeRegion,
    double_circle_fit,
    extract_samples,
    fit_circle_algebraic,
    locate_eye_region,
    scan_iris_window,
)
from .pipeline import (
    DirectorySource,
    FrameResult,
    ListSource,
    ManifestSource,
    PipelineConfig,
    bench,
    process_frame,
    run_calibration_sequence,
    run_stream,
)
from .synth import SyntheticEyeSpec, render, render_failure_case, render_gaze_sweep

__version__ = "0.1.0"

__all__ = [
    "BinaryImage", "CalibrationMap", "Circle", "CornerPoint", "DirectorySource",
    "EyeRegion", "EyeballModel", "FrameResult", "GazeSample", "GazeTracker",
    "GazeTrackError", "GrayImage", "ListSource", "ManifestSource", "OFF_SCREEN",
    "PipelineConfig", "Region", "ScreenGeometry", "SyntheticEyeSpec", "VpfProfile",
    "angular_error", "bench", "calibrate", "connected_components", "corner_search_area",
    "detect_corner", "displacement", "double_circle_fit", "downsample",
    "extract_samples", "fit_circle_algebraic", "gaze_from_delta", "isodata_threshold",
    "load_calibration", "load_image", "locate_eye_region", "process_frame", "render",
    "render_failure_case", "render_gaze_sweep", "run_calibration_sequence",
    "run_stream", "save_calibration", "save_image", "scan_iris_window", "segment",
    "sobel", "to_screen",
]

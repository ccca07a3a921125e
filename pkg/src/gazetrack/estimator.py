"""Estimator-style wrapper around the pipeline.

GazeTracker follows the fit/predict convention: fit() consumes frames
labeled with the two calibration cross positions and learns the
CalibrationMap; predict() maps new frames to screen coordinates, emitting
NaN rows where detection fails.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import CalibrationFailed
from .gaze import OFF_SCREEN, EyeballModel, ScreenGeometry, calibrate, gaze_from_delta
from .imgproc import GrayImage
from .pipeline import PipelineConfig, process_frame


def _as_frames(X) -> list[GrayImage]:
    if isinstance(X, GrayImage):
        return [X]
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [GrayImage(frame) for frame in X]
    frames = []
    for item in X:
        frames.append(item if isinstance(item, GrayImage) else GrayImage(np.asarray(item)))
    if not frames:
        raise ValueError("X contains no frames")
    return frames


class GazeTracker(BaseEstimator):
    """Two-cross calibrated gaze estimator.

    Parameters
    ----------
    r_ball, d, r_iris_mm : eyeball-model constants, millimeters.
    side : which eye corner anchors head motion, "temporal" or "nasal".
    screen_width, screen_height : target raster, pixels.
    downsample_factor : eye-region search resolution divisor.
    smoothing_window : reserved for streaming use; predict() is per-frame.
    """

    def __init__(self, r_ball=12.5, d=650.0, r_iris_mm=5.9, side="temporal",
                 screen_width=1920, screen_height=1080, downsample_factor=8,
                 smoothing_window=1):
        self.r_ball = r_ball
        self.d = d
        self.r_iris_mm = r_iris_mm
        self.side = side
        self.screen_width = screen_width
        self.screen_height = screen_height
        self.downsample_factor = downsample_factor
        self.smoothing_window = smoothing_window

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            downsample_factor=self.downsample_factor,
            side=self.side,
            model=EyeballModel(r_ball=self.r_ball, d=self.d, r_iris_mm=self.r_iris_mm),
            screen=ScreenGeometry(width=self.screen_width, height=self.screen_height),
            smoothing_window=self.smoothing_window,
        )

    def fit(self, X, y):
        """Learn the calibration from frames labeled with cross positions.

        X: sequence of grayscale frames; y: (n, 2) screen positions with
        exactly two distinct rows — the two calibration crosses.
        """
        frames = _as_frames(X)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != 2 or len(y) != len(frames):
            raise ValueError(f"y must be (n_frames, 2) cross positions, got {y.shape}")
        crosses = np.unique(y, axis=0)
        if len(crosses) != 2:
            raise ValueError(f"y must contain exactly 2 distinct crosses, got {len(crosses)}")

        config = self._config()
        vectors, radii = [], []
        for cross in crosses:
            idx = np.where((y == cross).all(axis=1))[0]
            vx, vy = [], []
            for i in idx:
                res = process_frame(frames[i], None, config)
                if res.iris is not None and res.corner is not None:
                    vx.append(res.iris.a - res.corner.x)
                    vy.append(res.iris.b - res.corner.y)
                    radii.append(res.iris.r)
            if not vx:
                raise CalibrationFailed(
                    f"no usable frames for cross at {tuple(cross)}")
            vectors.append((float(np.median(vx)), float(np.median(vy))))
        readings = [(vectors[0], tuple(crosses[0])), (vectors[1], tuple(crosses[1]))]
        self.calibration_ = calibrate(readings, config.model, float(np.median(radii)))
        self.n_frames_fit_ = len(frames)
        return self

    def predict(self, X) -> np.ndarray:
        """Screen coordinates per frame, (n, 2); NaN rows where detection fails.

        Off-screen gaze still yields the mapped coordinates so callers can
        see where beyond the raster the gaze landed.
        """
        check_is_fitted(self, "calibration_")
        config = self._config()
        cal = self.calibration_
        frames = _as_frames(X)
        out = np.full((len(frames), 2), np.nan)
        for i, frame in enumerate(frames):
            res = process_frame(frame, cal, config)
            if res.status != "Ok":
                continue
            if res.screen is OFF_SCREEN:
                # reconstruct the unclipped map output
                g = gaze_from_delta(res.delta, cal.model).g
                out[i, 0] = cal.alpha[0] * g[0] + cal.beta[0]
                out[i, 1] = cal.alpha[1] * g[1] + cal.beta[1]
            else:
                out[i] = res.screen
        return out

    def score(self, X, y) -> float:
        """Negative mean Euclidean screen error (pixels) over detected frames."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=np.float64)
        ok = ~np.isnan(pred[:, 0])
        if not ok.any():
            return float("-inf")
        err = np.linalg.norm(pred[ok] - y[ok], axis=1)
        return -float(err.mean())

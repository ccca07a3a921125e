"""Exception types raised by the tracking pipeline."""


class GazeTrackError(Exception):
    """Base class for all gazetrack errors."""


# --- image preprocessing ---

class NonDivisibleDimensions(GazeTrackError):
    """Image dimensions are not divisible by the downsampling factor."""


class ImageTooSmall(GazeTrackError):
    """Image is smaller than the operation's minimum size."""


# --- iris detection ---

class InsufficientRegions(GazeTrackError):
    """Fewer than two foreground regions; cannot split eyebrow from eye."""


class EyeRegionTooSmall(GazeTrackError):
    """Eye region too narrow for the scanning window."""


class NoSamples(GazeTrackError):
    """Seed column contains no dark pixel; nothing to sample."""


class DegenerateSamples(GazeTrackError):
    """Sample set is collinear, coincident, or otherwise unfittable."""


class TooFewInliers(GazeTrackError):
    """Not enough samples survived outlier elimination."""


# --- corner detection ---

class EmptyRange(GazeTrackError):
    """Projection range is empty or outside the image."""


class AreaOutsideImage(GazeTrackError):
    """Corner search area is empty after clamping."""


class NoCornerFound(GazeTrackError):
    """Variance profile carries no structure in the search area."""


# --- gaze mapping ---

class NotCalibrated(GazeTrackError):
    """Operation requires a calibration map that is not available."""


class DegenerateCalibration(GazeTrackError):
    """Calibration crosses coincide on at least one screen axis."""


class CalibrationFailed(GazeTrackError):
    """Too few valid frames were collected during a calibration dwell."""


# --- synthesis / sources ---

class InvalidSpec(GazeTrackError):
    """Synthetic eye specification violates its invariants."""


class TargetUnreachable(GazeTrackError):
    """Gaze target requires an iris displacement the scene cannot render."""


class SourceUnavailable(GazeTrackError):
    """Frame source could not be opened."""

import numpy as np
import pytest

from gazetrack import (CalibrationMap, EyeballModel, ListSource, PipelineConfig,
                       ScreenGeometry, SyntheticEyeSpec, render,
                       render_gaze_sweep, run_calibration_sequence)

KNOT_A = (96.0, 1026.0)
KNOT_B = (1824.0, 54.0)


def knot_frames(base: SyntheticEyeSpec, model: EyeballModel,
                screen: ScreenGeometry):
    """One rendered frame per calibration cross, truth attached."""
    return render_gaze_sweep(base, model, [KNOT_A, KNOT_B], screen)


@pytest.fixture(scope="session")
def default_config() -> PipelineConfig:
    return PipelineConfig()


@pytest.fixture(scope="session")
def clean_render():
    """Noise-free default scene and its ground truth."""
    return render(SyntheticEyeSpec())


@pytest.fixture(scope="session")
def calibration(default_config) -> CalibrationMap:
    """Two-cross calibration learned from rendered dwells."""
    knots = knot_frames(SyntheticEyeSpec(noise_sigma=4.0, eyelid_coverage=0.1,
                                         seed=11),
                        default_config.model, default_config.screen)
    frames = [knots[0][0]] * default_config.dwell_frames \
        + [knots[1][0]] * default_config.dwell_frames
    source = ListSource(frames)
    return run_calibration_sequence(source, default_config.screen,
                                    [KNOT_A, KNOT_B], default_config)

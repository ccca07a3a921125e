"""Acceptance gate: every release-blocking behavior, one test per criterion.

Each test states its threshold inline and fails with the measured value, so
the pytest -v line for this file doubles as the acceptance report.
"""
import math

import numpy as np
import pytest

from gazetrack.corner import vpf
from gazetrack.gaze import angular_error
from gazetrack.imgproc import GrayImage, isodata_threshold
from gazetrack.iris import double_circle_fit, fit_circle_algebraic
from gazetrack.pipeline import (STATUS_IRIS_OCCLUSION, STATUSES, PipelineConfig,
                                bench, process_frame)
from gazetrack.synth import SyntheticEyeSpec, render, render_gaze_sweep, resolve
from oracles import (geometric_cost, grid_circle_fit, isodata_fixed_points,
                     vpf_reference)

CONFIG = PipelineConfig()


def on_circle(rng, a, b, r, n):
    th = rng.uniform(0, 2 * math.pi, n)
    if n == 3:
        # keep the triple well-conditioned: exact but never near-collinear
        while np.min(np.diff(np.sort(th))) < math.radians(10):
            th = rng.uniform(0, 2 * math.pi, 3)
    return np.c_[a + r * np.cos(th), b + r * np.sin(th)]


def test_circle_fit_exact_recovery_on_1000_random_circles():
    worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(-200, 200, 2)
        r = rng.uniform(0.5, 150)
        pts = on_circle(rng, a, b, r, int(rng.integers(3, 60)))
        c = fit_circle_algebraic(pts)
        rel = max(abs(c.a - a), abs(c.b - b), abs(c.r - r)) / max(1.0, r)
        worst = max(worst, rel)
    assert worst <= 1e-9, f"worst relative parameter error {worst:.3e}"


def test_algebraic_fit_cost_within_10pct_of_grid_search_oracle():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        a, b = rng.uniform(-40, 40, 2)
        r = rng.uniform(8, 60)
        th = rng.uniform(0, 2 * math.pi, 50)
        rad = r + rng.normal(0, 0.02 * r, 50)
        pts = np.c_[a + rad * np.cos(th), b + rad * np.sin(th)]
        alg = fit_circle_algebraic(pts)
        ga, gb, gr = grid_circle_fit(pts)
        ratio = geometric_cost(pts, alg.a, alg.b, alg.r) \
            / geometric_cost(pts, ga, gb, gr)
        worst = max(worst, ratio)
    assert worst <= 1.10, f"worst cost ratio vs oracle {worst:.4f}"


def test_outlier_rejection_100_of_100_seeds():
    failures = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        th = rng.uniform(0, 2 * math.pi, 20)
        inliers = np.c_[np.cos(th), np.sin(th)]
        out_th = rng.uniform(0, 2 * math.pi, 3)
        outliers = 2.0 * np.c_[np.cos(out_th), np.sin(out_th)]
        c, kept = double_circle_fit(np.vstack([inliers, outliers]))
        ok = (max(abs(c.a), abs(c.b), abs(c.r - 1.0)) <= 1e-6
              and len(kept) == 20
              and np.abs(np.hypot(kept[:, 0], kept[:, 1]) - 1.0).max() <= 1e-6)
        failures += not ok
    assert failures == 0, f"{failures}/100 fixtures mis-fit or kept an outlier"


def test_vpf_matches_double_loop_on_100_random_images():
    for seed in range(100):
        rng = np.random.default_rng(200 + seed)
        h, w = int(rng.integers(8, 40)), int(rng.integers(8, 40))
        arr = rng.integers(0, 256, (h, w)).astype(np.uint8)
        x0 = int(rng.integers(0, w - 2))
        x1 = int(rng.integers(x0, w - 1))
        y0 = int(rng.integers(0, h - 2))
        y1 = int(rng.integers(y0 + 1, h))
        p = vpf(GrayImage(arr), (x0, x1), (y0, y1))
        mean_ref, var_ref = vpf_reference(arr, (x0, x1), (y0, y1))
        assert np.allclose(p.mean, mean_ref, rtol=1e-9, atol=1e-9)
        assert np.allclose(p.variance, var_ref, rtol=1e-9, atol=1e-9)


def test_isodata_matches_exhaustive_search_on_100_histograms():
    for seed in range(100):
        rng = np.random.default_rng(300 + seed)
        kind = seed % 3
        if kind == 0:
            arr = rng.integers(0, 256, (24, 32))
        elif kind == 1:
            lo = rng.normal(rng.uniform(20, 100), rng.uniform(2, 30), 400)
            hi = rng.normal(rng.uniform(120, 240), rng.uniform(2, 30), 300)
            arr = np.clip(np.concatenate([lo, hi]), 0, 255).astype(int).reshape(20, 35)
        else:
            arr = np.clip(rng.normal(128, rng.uniform(2, 60), (16, 16)), 0, 255).astype(int)
        img = GrayImage(arr.astype(np.uint8))
        t = isodata_threshold(img)
        fixed = isodata_fixed_points(img.pixels)
        assert int(t) in fixed, f"seed {seed}: threshold {t} not a fixed point of {fixed}"


def test_synthetic_iris_accuracy_200_noisy_renders():
    detected = 0
    worst_center = worst_radius = 0.0
    for i in range(200):
        rng = np.random.default_rng(5000 + i)
        spec = SyntheticEyeSpec(
            iris_center=(320.0 + rng.uniform(-12, 12), 240.0 + rng.uniform(-8, 8)),
            eyelid_coverage=float(rng.uniform(0, 0.25)),
            noise_sigma=8.0,
            seed=int(rng.integers(1 << 31)),
        )
        img, truth = render(spec)
        res = process_frame(img, None, CONFIG)
        if res.iris is None:
            continue
        detected += 1
        worst_center = max(worst_center,
                           abs(res.iris.a - truth["iris"]["cx"]),
                           abs(res.iris.b - truth["iris"]["cy"]))
        worst_radius = max(worst_radius, abs(res.iris.r - truth["iris"]["r"]))
    assert detected >= 0.95 * 200, f"detection rate {detected}/200"
    assert worst_center <= 2.0, f"worst iris-center error {worst_center:.2f} px"
    assert worst_radius <= 2.0, f"worst radius error {worst_radius:.2f} px"
    print(f"[accuracy] detected {detected}/200, "
          f"worst center {worst_center:.2f} px, radius {worst_radius:.2f} px")


def test_end_to_end_angular_accuracy_5x5_sweep(calibration):
    base = SyntheticEyeSpec(noise_sigma=4.0, eyelid_coverage=0.1, seed=11)
    targets = [(96.0 + ix * (1728.0 / 4), 54.0 + iy * (972.0 / 4))
               for iy in range(5) for ix in range(5)]
    frames = render_gaze_sweep(base, CONFIG.model, targets, CONFIG.screen)
    err_h, err_v = [], []
    for (img, _), tgt in zip(frames, targets):
        res = process_frame(img, calibration, CONFIG)
        assert res.status == "Ok", f"target {tgt}: {res.status}"
        err_h.append(abs(res.screen[0] - tgt[0]))
        err_v.append(abs(res.screen[1] - tgt[1]))

    def to_deg(px):
        return angular_error(px * CONFIG.screen.pitch_mm, CONFIG.model.d)

    mean_h = to_deg(float(np.mean(err_h)))
    mean_v = to_deg(float(np.mean(err_v)))
    print(f"[e2e] mean horizontal {mean_h:.3f} deg, vertical {mean_v:.3f} deg "
          f"(max {to_deg(max(err_h)):.3f} / {to_deg(max(err_v)):.3f})")
    assert mean_h <= 2.50, f"mean horizontal error {mean_h:.3f} deg"
    assert mean_v <= 3.07, f"mean vertical error {mean_v:.3f} deg"
    # synthetic input should sit far below the human-trial ceilings
    assert mean_h < 1.0 and mean_v < 1.0, (mean_h, mean_v)
    # degree <-> millimeter anchor at the working distance
    assert abs(angular_error(50.0, 650.0) - 4.40) <= 0.05


def test_heavy_occlusion_is_refused_on_50_of_50_fixtures():
    for i in range(50):
        rng = np.random.default_rng(700 + i)
        spec = SyntheticEyeSpec(
            iris_center=(320.0 + rng.uniform(-6, 6), 240.0 + rng.uniform(-6, 6)),
            eyelid_coverage=float(rng.uniform(0.6, 0.7)),
            noise_sigma=float(rng.uniform(0, 8)),
            seed=int(rng.integers(1 << 31)),
        )
        img, _ = render(spec)
        res = process_frame(img, None, CONFIG)
        assert res.status == STATUS_IRIS_OCCLUSION, \
            f"fixture {i} (coverage {spec.eyelid_coverage:.2f}): {res.status}"
        assert res.iris is None, "a circle was fabricated under occlusion"


def fuzz_image(rng) -> GrayImage:
    kind = rng.integers(0, 5)
    if kind == 0:
        arr = rng.integers(0, 256, (480, 640))
    elif kind == 1:
        arr = np.full((480, 640), int(rng.integers(0, 256)))
        for _ in range(int(rng.integers(1, 8))):
            x, y = rng.integers(0, 600), rng.integers(0, 440)
            w, h = rng.integers(2, 200), rng.integers(2, 200)
            arr[y:y + h, x:x + w] = rng.integers(0, 256)
    elif kind == 2:
        arr = np.linspace(0, 255, 640)[None, :].repeat(480, axis=0)
        arr = arr + rng.normal(0, rng.uniform(0, 30), (480, 640))
    elif kind == 3:
        arr = rng.normal(128, 2, (480, 640))
    else:
        h, w = int(rng.integers(8, 64)), int(rng.integers(8, 64))
        arr = rng.integers(0, 256, (h, w))
    return GrayImage(np.clip(arr, 0, 255).astype(np.uint8))


def test_no_image_content_crashes_the_pipeline_1000_fuzz():
    rng = np.random.default_rng(424242)
    for _ in range(1000):
        res = process_frame(fuzz_image(rng), None, CONFIG)
        assert res.status in STATUSES


def test_throughput_sustains_30fps_single_threaded():
    frames = []
    for i in range(5):
        rng = np.random.default_rng(900 + i)
        spec = SyntheticEyeSpec(
            iris_center=(320.0 + rng.uniform(-12, 12), 240.0 + rng.uniform(-8, 8)),
            eyelid_coverage=float(rng.uniform(0, 0.25)),
            noise_sigma=8.0, seed=i)
        frames.append(render(spec)[0])
    report = bench(frames, config=CONFIG, min_frames=400)
    fps = report["fps"]
    print(f"[throughput] {fps:.0f} fps (mean {report['mean_ms']:.2f} ms, "
          f"p99 {report['p99_ms']:.2f} ms); 300 Hz reference is "
          f"{'within' if fps >= 300 else 'beyond'} margin at {fps / 300.0:.2f}x")
    assert fps >= 30.0, f"{fps:.1f} fps under the 30 fps floor"


def translated_scene(spec: SyntheticEyeSpec, tx: float, ty: float) -> SyntheticEyeSpec:
    from dataclasses import replace
    spec = resolve(spec)
    bx0, by0, bx1, by1 = spec.eyebrow_box
    return replace(
        spec,
        iris_center=(spec.iris_center[0] + tx, spec.iris_center[1] + ty),
        corner_temporal=(spec.corner_temporal[0] + tx, spec.corner_temporal[1] + ty),
        corner_nasal=(spec.corner_nasal[0] + tx, spec.corner_nasal[1] + ty),
        eyebrow_box=(int(bx0 + tx), int(by0 + ty), int(bx1 + tx), int(by1 + ty)),
    )


def rolled_with_skin(img: GrayImage, tx: int, ty: int, fill: int = 180) -> GrayImage:
    arr = np.roll(np.roll(img.pixels, tx, axis=1), ty, axis=0)
    out = arr.copy()
    if tx > 0:
        out[:, :tx] = fill
    elif tx < 0:
        out[:, tx:] = fill
    if ty > 0:
        out[:ty, :] = fill
    elif ty < 0:
        out[ty:, :] = fill
    return GrayImage(out)


OFFSETS = [(-40, 0), (40, 0), (0, -40), (0, 40), (28, 28), (-28, -28)]


def test_head_motion_translation_changes_gaze_at_most_3px(calibration):
    # reading 1: the same scene re-rendered at the translated position
    base = SyntheticEyeSpec(eyelid_coverage=0.1, seed=77)
    ref = process_frame(render(base)[0], calibration, CONFIG)
    assert ref.status == "Ok"
    worst = 0.0
    for tx, ty in OFFSETS:
        img, _ = render(translated_scene(base, tx, ty))
        res = process_frame(img, calibration, CONFIG)
        assert res.status == "Ok", f"offset ({tx},{ty}): {res.status}"
        worst = max(worst, abs(res.screen[0] - ref.screen[0]),
                    abs(res.screen[1] - ref.screen[1]))
    assert worst <= 3.0, f"re-rendered translation moved gaze {worst:.2f} px"

    # reading 2: the captured frame itself shifted rigidly, noise and all
    noisy = render(SyntheticEyeSpec(eyelid_coverage=0.1, noise_sigma=8.0,
                                    seed=77))[0]
    ref2 = process_frame(noisy, calibration, CONFIG)
    assert ref2.status == "Ok"
    worst2 = 0.0
    for tx, ty in OFFSETS:
        res = process_frame(rolled_with_skin(noisy, tx, ty), calibration, CONFIG)
        assert res.status == "Ok", f"offset ({tx},{ty}): {res.status}"
        worst2 = max(worst2, abs(res.screen[0] - ref2.screen[0]),
                     abs(res.screen[1] - ref2.screen[1]))
    assert worst2 <= 3.0, f"rolled-frame translation moved gaze {worst2:.2f} px"
    print(f"[head-motion] worst screen shift: re-render {worst:.3f} px, "
          f"rolled frame {worst2:.3f} px")

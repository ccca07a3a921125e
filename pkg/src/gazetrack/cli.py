"""Command-line interface.

Subcommands: synth (render datasets), detect (inspect one image), eval
(batch accuracy report), serve (WebSocket stream), bench (throughput).
Exit codes: 0 success — per-frame detection failures are data, not errors;
2 usage or input problems; 3 environment/I-O problems.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from .errors import GazeTrackError, InvalidSpec, SourceUnavailable
from .gaze import (
    EyeballModel,
    ScreenGeometry,
    angular_error,
    gaze_from_delta,
    load_calibration,
)
from .imgproc import load_image, save_image
from .iris import fit_circle_algebraic
from .pipeline import (
    ListSource,
    ManifestSource,
    NdjsonSink,
    PipelineConfig,
    bench,
    process_frame,
    run_calibration_sequence,
)

_CONFIG_KEYS = {
    "screen_width": int, "screen_height": int, "pitch_mm": float,
    "r_ball": float, "d": float, "r_iris_mm": float,
    "side": str, "smoothing_window": int, "downsample_factor": int,
    "dwell_frames": int, "min_valid_frames": int, "port": int,
}


def load_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{ln}: unknown key {key!r}")
        values[key] = _CONFIG_KEYS[key](val)
    return values


def build_config(args) -> tuple[PipelineConfig, dict]:
    values = {}
    if getattr(args, "config", None):
        values = load_config_file(args.config)
    model = EyeballModel(
        r_ball=values.get("r_ball", 12.5),
        d=values.get("d", 650.0),
        r_iris_mm=values.get("r_iris_mm", 5.9),
    )
    screen = ScreenGeometry(
        width=values.get("screen_width", 1920),
        height=values.get("screen_height", 1080),
        pitch_mm=values.get("pitch_mm", 0.265),
    )
    config = PipelineConfig(
        downsample_factor=values.get("downsample_factor", 8),
        side=values.get("side", "temporal"),
        model=model,
        screen=screen,
        smoothing_window=values.get("smoothing_window", 1),
        dwell_frames=values.get("dwell_frames", 30),
        min_valid_frames=values.get("min_valid_frames", 10),
    )
    return config, values


def _parse_pair(text: str, sep: str = "x") -> tuple[int, int]:
    a, _, b = text.partition(sep)
    return int(a), int(b)


# --- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    out = Path(args.out)
    try:
        spec = synth_mod.SyntheticEyeSpec(
            size=_parse_pair(args.size),
            iris_radius=args.iris_radius,
            pupil_radius=args.pupil_radius or args.iris_radius * 0.4,
            iris_center=(_parse_pair(args.size)[0] / 2.0, _parse_pair(args.size)[1] / 2.0),
            eyelid_coverage=args.coverage,
            noise_sigma=args.noise,
            seed=args.seed,
        )
        synth_mod.resolve(spec)
    except (InvalidSpec, ValueError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2

    screen = ScreenGeometry(*_parse_pair(args.screen), pitch_mm=args.pitch)
    model = EyeballModel()
    entries = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.sweep:
            cols, rows = _parse_pair(args.sweep)
            xs = np.linspace(0.1 * screen.width, 0.9 * screen.width, cols)
            ys = np.linspace(0.1 * screen.height, 0.9 * screen.height, rows)
            targets = [(float(x), float(y)) for y in ys for x in xs]
            knots = [(0.05 * screen.width, 0.95 * screen.height),
                     (0.95 * screen.width, 0.05 * screen.height)]
            rendered = synth_mod.render_gaze_sweep(spec, model, knots + targets, screen)
            for i, (img, truth) in enumerate(rendered):
                role = ("knot_a", "knot_b")[i] if i < 2 else "target"
                entries.append(_write_entry(out, img, truth, i, role, args.format))
        else:
            from dataclasses import replace as dc_replace
            for i in range(args.count):
                img, truth = synth_mod.render(dc_replace(spec, seed=spec.seed + i))
                entries.append(_write_entry(out, img, truth, i, "single", args.format))
        manifest = {
            "screen": {"w": screen.width, "h": screen.height, "pitch_mm": screen.pitch_mm},
            "model": {"r_ball": model.r_ball, "d": model.d, "r_iris_mm": model.r_iris_mm},
            "size": list(spec.size),
            "images": entries,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    except (InvalidSpec, GazeTrackError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"write failed: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(entries)} images + manifest.json to {out}")
    return 0


def _write_entry(out: Path, img, truth: dict, index: int, role: str, fmt: str) -> dict:
    name = f"eye_{index:04d}.{fmt}"
    save_image(img, out / name)
    return {"file": name, "role": role, **truth}


# --- detect -----------------------------------------------------------------

def cmd_detect(args) -> int:
    try:
        img = load_image(args.image)
    except (OSError, ValueError) as exc:
        print(f"cannot read {args.image}: {exc}", file=sys.stderr)
        return 2
    config, _ = build_config(args)
    cal = load_calibration(args.calibration) if args.calibration else None
    trace: dict = {}
    result = process_frame(img, cal, config, trace=trace)
    if args.overlay:
        try:
            _draw_overlay(img, trace, result, args.overlay)
        except OSError as exc:
            print(f"cannot write overlay: {exc}", file=sys.stderr)
            return 3
    if args.json:
        print(json.dumps(result.to_json_dict(), indent=2))
    else:
        iris = result.iris
        where = (f"iris ({iris.a:.1f}, {iris.b:.1f}) R {iris.r:.1f}"
                 if iris else "no iris")
        print(f"{args.image}: {result.status}, {where}, "
              f"{result.inlier_count} inliers, {result.processing_time_us} us")
    return 0


def _draw_overlay(img, trace, result, path):
    from PIL import Image, ImageDraw

    rgb = np.repeat(img.pixels[:, :, None], 3, axis=2)
    im = Image.fromarray(rgb, mode="RGB")
    draw = ImageDraw.Draw(im)
    eye = trace.get("eye")
    if eye is not None:
        draw.rectangle(eye.bounding_box, outline=(0, 190, 0))
        draw.rectangle(eye.eyebrow_box, outline=(90, 90, 255))
    samples = trace.get("samples")
    if samples is not None and len(samples) >= 3:
        for x, y in samples:
            draw.point((x, y), fill=(255, 60, 60))
        try:
            first = fit_circle_algebraic(samples)
            draw.ellipse([first.a - first.r, first.b - first.r,
                          first.a + first.r, first.b + first.r],
                         outline=(240, 220, 0))
        except GazeTrackError:
            pass
    if result.iris is not None:
        c = result.iris
        draw.ellipse([c.a - c.r, c.b - c.r, c.a + c.r, c.b + c.r],
                     outline=(0, 220, 220))
    if result.corner is not None:
        x, y = result.corner.x, result.corner.y
        draw.line([x - 6, y, x + 6, y], fill=(255, 0, 255))
        draw.line([x, y - 6, x, y + 6], fill=(255, 0, 255))
    im.save(path)


# --- eval -------------------------------------------------------------------

def cmd_eval(args) -> int:
    dataset = Path(args.dataset)
    manifest_path = dataset / "manifest.json" if dataset.is_dir() else dataset
    if not manifest_path.is_file():
        print(f"no manifest at {manifest_path}", file=sys.stderr)
        return 2
    doc = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    by_role: dict[str, list] = {}
    for entry in doc.get("images", []):
        by_role.setdefault(entry.get("role", ""), []).append(entry)
    knot_a = by_role.get("knot_a", [])
    knot_b = by_role.get("knot_b", [])
    targets = by_role.get("target", [])
    if not (knot_a and knot_b and targets):
        print("manifest needs knot_a, knot_b and target images", file=sys.stderr)
        return 2
    for knots in (knot_a, knot_b):
        if any(e.get("target_screen") is None for e in knots):
            print("knot images need target_screen ground truth", file=sys.stderr)
            return 2

    config, values = build_config(args)
    screen = ScreenGeometry(doc["screen"]["w"], doc["screen"]["h"],
                            doc["screen"]["pitch_mm"]) if "screen" in doc else config.screen
    config = _with_screen(config, screen)

    img_a = load_image(root / knot_a[0]["file"])
    img_b = load_image(root / knot_b[0]["file"])
    crosses = [(knot_a[0]["target_screen"]["x"], knot_a[0]["target_screen"]["y"]),
               (knot_b[0]["target_screen"]["x"], knot_b[0]["target_screen"]["y"])]
    source = ListSource([img_a] * config.dwell_frames + [img_b] * config.dwell_frames)
    try:
        cal = run_calibration_sequence(source, screen, crosses, config)
    except GazeTrackError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 2

    per_image = []
    status_counts: dict[str, int] = {}
    errs = []
    for entry in targets:
        img = load_image(root / entry["file"])
        res = process_frame(img, cal, config)
        status_counts[res.status] = status_counts.get(res.status, 0) + 1
        record = {"file": entry["file"], "status": res.status}
        if res.status == "Ok":
            g = gaze_from_delta(res.delta, cal.model).g
            px = (cal.alpha[0] * g[0] + cal.beta[0],
                  cal.alpha[1] * g[1] + cal.beta[1])
            truth = entry["target_screen"]
            ex = abs(px[0] - truth["x"]) * screen.pitch_mm
            ey = abs(px[1] - truth["y"]) * screen.pitch_mm
            errs.append((ex, ey))
            record["estimate"] = {"x": px[0], "y": px[1]}
            record["err_mm"] = {"x": ex, "y": ey}
            record["err_deg"] = {"x": angular_error(ex, cal.model.d),
                                 "y": angular_error(ey, cal.model.d)}
        per_image.append(record)

    detected = len(errs)
    d = cal.model.d
    report = {
        "frames": len(targets),
        "detected": detected,
        "detection_rate": detected / len(targets),
        "status_counts": status_counts,
        "d_mm": d,
        "pitch_mm": screen.pitch_mm,
        "per_image": per_image,
    }
    if errs:
        arr = np.array(errs)
        mean_mm = arr.mean(axis=0)
        max_mm = arr.max(axis=0)
        report["mean_err_mm"] = {"x": float(mean_mm[0]), "y": float(mean_mm[1])}
        report["max_err_mm"] = {"x": float(max_mm[0]), "y": float(max_mm[1])}
        report["mean_err_deg"] = {"x": angular_error(float(mean_mm[0]), d),
                                  "y": angular_error(float(mean_mm[1]), d)}
        report["max_err_deg"] = {"x": angular_error(float(max_mm[0]), d),
                                 "y": angular_error(float(max_mm[1]), d)}
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    _print_eval_table(report)
    return 0


def _with_screen(config: PipelineConfig, screen: ScreenGeometry) -> PipelineConfig:
    from dataclasses import replace as dc_replace
    return dc_replace(config, screen=screen)


def _print_eval_table(report: dict):
    print(f"frames:          {report['frames']}")
    print(f"detected:        {report['detected']}  "
          f"(rate {report['detection_rate']:.3f})")
    print(f"statuses:        {report['status_counts']}")
    if "mean_err_mm" in report:
        m, x = report["mean_err_mm"], report["max_err_mm"]
        md, xd = report["mean_err_deg"], report["max_err_deg"]
        print(f"mean error:      {m['x']:7.2f} mm / {md['x']:5.3f} deg (horizontal)")
        print(f"                 {m['y']:7.2f} mm / {md['y']:5.3f} deg (vertical)")
        print(f"max error:       {x['x']:7.2f} mm / {xd['x']:5.3f} deg (horizontal)")
        print(f"                 {x['y']:7.2f} mm / {xd['y']:5.3f} deg (vertical)")


# --- serve / bench ----------------------------------------------------------

def cmd_serve(args) -> int:
    from .serve import serve_forever

    # surface the "listening on ws://..." line; with --port 0 it is the only
    # way to learn the bound port
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    config, values = build_config(args)
    port = args.port if args.port is not None else values.get("port", 8008)
    try:
        source = _open_source(args.source, loop=not args.no_loop,
                              repeat=args.repeat)
        cal = load_calibration(args.calibration) if args.calibration else None
        sinks = []
        log_sink = None
        if args.log:
            log_sink = NdjsonSink(args.log)
            sinks.append(log_sink)
        try:
            serve_forever(source, config, port=port, host=args.host,
                          fps=args.fps, cal=cal, sinks=sinks,
                          wait_for_client=args.wait_client)
        finally:
            if log_sink:
                log_sink.close()
    except SourceUnavailable as exc:
        print(f"source unavailable: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"cannot serve on port {port}: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        pass
    return 0


def _open_source(path, loop: bool, repeat: int = 1):
    from .pipeline import DirectorySource

    p = Path(path)
    if p.is_file() or (p.is_dir() and (p / "manifest.json").is_file()):
        return ManifestSource(p, loop=loop, repeat=repeat)
    if repeat != 1:
        raise ValueError("--repeat needs a manifest dataset")
    return DirectorySource(p, loop=loop)


def cmd_bench(args) -> int:
    config, _ = build_config(args)
    try:
        source = _open_source(args.dataset, loop=False)
    except SourceUnavailable as exc:
        print(f"dataset unavailable: {exc}", file=sys.stderr)
        return 2
    images = list(source.frames())
    report = bench(images, repetitions=args.repetitions, config=config,
                   min_frames=args.min_frames)
    print(json.dumps(report, indent=2))
    return 0


# --- parser -----------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gazetrack",
                                description="camera gaze tracking pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="render synthetic eye datasets")
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--size", default="640x480")
    sp.add_argument("--iris-radius", type=float, default=35.0)
    sp.add_argument("--pupil-radius", type=float, default=None)
    sp.add_argument("--coverage", type=float, default=0.0, help="eyelid coverage 0..0.9")
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sweep", default=None, metavar="CxR",
                    help="gaze-target grid, e.g. 5x5; adds two calibration knots")
    sp.add_argument("--screen", default="1920x1080")
    sp.add_argument("--pitch", type=float, default=0.265, help="screen mm per pixel")
    sp.add_argument("--format", choices=("png", "pgm"), default="png")
    sp.set_defaults(func=cmd_synth)

    dp = sub.add_parser("detect", help="run the pipeline on one image")
    dp.add_argument("image")
    dp.add_argument("--overlay", default=None, help="write an annotated PNG here")
    dp.add_argument("--json", action="store_true")
    dp.add_argument("--calibration", default=None)
    dp.add_argument("--config", default=None)
    dp.set_defaults(func=cmd_detect)

    ep = sub.add_parser("eval", help="calibrate on a dataset's knots and score its targets")
    ep.add_argument("dataset")
    ep.add_argument("--report", default=None, help="write the JSON report here")
    ep.add_argument("--config", default=None)
    ep.set_defaults(func=cmd_eval)

    vp = sub.add_parser("serve", help="stream FrameResults over WebSocket")
    vp.add_argument("--source", required=True, help="dataset directory or manifest")
    vp.add_argument("--port", type=int, default=None)
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--fps", type=float, default=30.0)
    vp.add_argument("--no-loop", action="store_true", help="stop after one pass")
    vp.add_argument("--repeat", type=int, default=1,
                    help="stream each manifest frame N times (dwell windows)")
    vp.add_argument("--wait-client", action="store_true",
                    help="hold the replay until a client connects")
    vp.add_argument("--log", default=None, help="NDJSON result log")
    vp.add_argument("--calibration", default=None)
    vp.add_argument("--config", default=None)
    vp.set_defaults(func=cmd_serve)

    bp = sub.add_parser("bench", help="throughput benchmark")
    bp.add_argument("--dataset", required=True)
    bp.add_argument("--repetitions", type=int, default=1)
    bp.add_argument("--min-frames", type=int, default=1000)
    bp.add_argument("--config", default=None)
    bp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, InvalidSpec) as exc:
        # bad config values or spec parameters that slipped past a subcommand
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

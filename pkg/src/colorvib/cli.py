"""Command-line entry points for every pipeline stage.

Each subcommand is a thin wrapper over the library: identical inputs yield
identical outputs whether driven from here or from Python. Machine-readable
results go to stdout as one JSON record per line; diagnostics go to stderr.
Exit codes: 0 success, 1 domain error, 2 usage error.

All geometric flags are in millimeters unless suffixed `-px`; the display
profile supplies the mm/px scale.
"""

from __future__ import annotations

import json
import sys

import click

from . import gazeanalysis, psychometry, stimulus, vibration
from .colorimetry import XyChromaticity, XyYColor, xyy_to_srgb8
from .errors import ColorVibError
from .psychometry import Condition, ThresholdTable, UserCalibration

CONFIG_ENV_VAR = "COLORVIB_CONFIG"


def _emit(record: dict) -> None:
    click.echo(json.dumps(record, sort_keys=True))


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Color-vibration stimulus synthesis, experiment service, and analysis."""


@main.command()
@click.option("--x", "x", type=float, required=True, help="CIE-x chromaticity (dimensionless).")
@click.option("--y", "y", type=float, required=True, help="CIE-y chromaticity (dimensionless).")
@click.option("--Y", "Y", type=float, required=True, help="Relative luminance in [0, 1].")
def convert(x, y, Y):
    """Convert a single xyY color to display 8-bit sRGB."""
    try:
        rgb = xyy_to_srgb8(XyYColor(XyChromaticity(x, y), Y))
    except (ColorVibError, ValueError) as exc:
        _fail(exc)
    _emit({"xyY": [x, y, Y], "srgb8": list(rgb.as_tuple())})


@main.command()
@click.option("--x", "x", type=float, required=True, help="Ellipse center CIE-x.")
@click.option("--y", "y", type=float, required=True, help="Ellipse center CIE-y.")
@click.option("--Y", "Y", type=float, default=0.4, show_default=True, help="Relative luminance in [0, 1].")
@click.option("--r", "r", type=float, required=True, help="Amplitude ratio along the ellipse major axis.")
@click.option("--w", "w", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.5, show_default=True, help="Weight splitting the pair toward the yellowish side.")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None, help="Ellipse catalog file; bundled catalog when omitted.")
def pair(x, y, Y, r, w, catalog_path):
    """Print the vibration pair for the catalog ellipse centered at (x, y)."""
    try:
        catalog = vibration.load_catalog(catalog_path) if catalog_path else vibration.load_default_catalog()
        try:
            ellipse = catalog.at_center(x, y, tol=1e-6)
        except KeyError as exc:
            raise click.UsageError(str(exc))
        vp = vibration.weighted_pair(ellipse, r, w, Y)
        rgb_plus, rgb_minus = vibration.pair_to_display(vp)
        max_r = vibration.max_gamut_ratio(ellipse, w, Y)
    except ColorVibError as exc:
        _fail(exc)
    _emit(
        {
            "ellipse_index": ellipse.index,
            "r": r,
            "w": w,
            "Y": Y,
            "plus_xy": [vp.plus.x, vp.plus.y],
            "minus_xy": [vp.minus.x, vp.minus.y],
            "plus_srgb8": list(rgb_plus.as_tuple()),
            "minus_srgb8": list(rgb_minus.as_tuple()),
            "max_gamut_ratio": max_r,
            "gamut_margin": max_r - r,
        }
    )


@main.command(name="stimulus")
@click.option("--image", "image_path", type=click.Path(exists=True), required=True, help="Input raster image.")
@click.option("--roi-x-px", type=float, required=True, help="ROI center x in image pixels.")
@click.option("--roi-y-px", type=float, required=True, help="ROI center y in image pixels.")
@click.option("--roi-diameter", type=float, default=stimulus.ROI_DIAMETER_MM, show_default=True, help="ROI circle diameter in mm.")
@click.option("--vibration-diameter", type=float, default=stimulus.VIBRATION_DIAMETER_MM, show_default=True, help="Vibration circle diameter in mm.")
@click.option("--condition", type=click.Choice([c.value for c in stimulus.GuidanceCondition]), required=True)
@click.option("--table", "table_path", type=click.Path(exists=True), default=None, help="Threshold table CSV (vibration conditions).")
@click.option("--calibration", "cal_path", type=click.Path(exists=True), default=None, help="User calibration JSON (vibration conditions).")
@click.option("--profile", "profile_path", type=click.Path(exists=True), default=None, help="Display profile JSON; built-in reference panel when omitted.")
@click.option("--out-a", type=click.Path(), required=True, help="Output PNG for frame A.")
@click.option("--out-b", type=click.Path(), required=True, help="Output PNG for frame B.")
@click.option("--meta", "meta_path", type=click.Path(), default=None, help="Output JSON metadata sidecar.")
def stimulus_cmd(image_path, roi_x_px, roi_y_px, roi_diameter, vibration_diameter, condition, table_path, cal_path, profile_path, out_a, out_b, meta_path):
    """Render a guidance frame pair for one image and ROI."""
    try:
        profile = stimulus.load_display_profile(profile_path) if profile_path else stimulus.reference_display_profile()
        table = None
        if table_path:
            with open(table_path, "r", encoding="utf-8") as f:
                table = ThresholdTable.from_csv(f.read())
        cal = None
        if cal_path:
            with open(cal_path, "r", encoding="utf-8") as f:
                raw = json.load(f)
            cal = UserCalibration(
                participant=raw.get("participant", ""),
                fits={float(k): float(v) for k, v in raw["fits"].items()},
            )
        image = stimulus.prepare_image(stimulus.load_frame(image_path))
        roi = stimulus.RoiSpec(
            center_px=(roi_x_px, roi_y_px),
            roi_diameter_mm=roi_diameter,
            vibration_diameter_mm=vibration_diameter,
        )
        pair_frames = stimulus.render_guidance(
            image=image,
            roi=roi,
            condition=stimulus.GuidanceCondition(condition),
            table=table,
            cal=cal,
            profile=profile,
        )
        stimulus.save_frame_pair(pair_frames, out_a, out_b, meta_path)
    except (ColorVibError, ValueError) as exc:
        _fail(exc)
    _emit({"out_a": out_a, "out_b": out_b, "r": pair_frames.metadata["r"], "w": pair_frames.metadata["w"], "condition": condition})


@main.command()
@click.option("--responses", "responses_path", type=click.Path(exists=True), required=True, help="Line-delimited response file.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Output threshold table CSV.")
def fit(responses_path, out_path):
    """Fit psychometric curves and export the threshold table."""
    try:
        with open(responses_path, "r", encoding="utf-8") as f:
            responses = psychometry.load_responses(f)
        if not responses:
            raise ColorVibError("response file contains no records")
        filtered = psychometry.filter_peripheral_misses(responses)
        table, diagnostics = psychometry.build_table(filtered)
        for diag in diagnostics:
            click.echo(f"cell diagnostic: {diag}", err=True)
        required = {
            (cond, p, d, l)
            for cond in Condition
            for p in (0.5, 0.75)
            for d in (60.0, 80.0, 100.0)
            for l in (0.0, 71.0, 121.0, 171.0)
        }
        missing = sorted(
            f"{cond.value}/{p:g} d={d:g} l={l:g}"
            for (cond, p, d, l) in required - set(table.entries)
        )
        if missing:
            click.echo("missing or degenerate cells:", err=True)
            for cell in missing:
                click.echo(f"  {cell}", err=True)
            sys.exit(1)
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(table.to_csv())
    except (ColorVibError, ValueError) as exc:
        _fail(exc)
    _emit({"out": out_path, "cells": len(table.entries), "diagnostics": len(diagnostics)})


@main.command()
@click.option("--recording", "recording_path", type=click.Path(exists=True), required=True, help="Gaze sample file.")
@click.option("--markers", "markers_path", type=click.Path(exists=True), required=True, help="Marker observation track (JSON lines).")
@click.option("--trials", "trials_path", type=click.Path(exists=True), required=True, help="Trial metadata JSON (region size, disk radius, outcome).")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Optional metrics CSV; stdout record is always emitted.")
def gaze(recording_path, markers_path, trials_path, out_path):
    """Compute completion time and explored ratio for recorded trials."""
    try:
        with open(recording_path, "r", encoding="utf-8") as f:
            samples = gazeanalysis.load_gaze_samples(f)
        with open(markers_path, "r", encoding="utf-8") as f:
            observations = gazeanalysis.load_marker_track(f)
        with open(trials_path, "r", encoding="utf-8") as f:
            trial_meta = json.load(f)
        mapped = gazeanalysis.map_recording(samples, observations)
        ratio = gazeanalysis.explored_ratio(
            mapped.points,
            region_size=tuple(trial_meta["region_size_px"]),
            disk_radius_px=float(trial_meta["disk_radius_px"]),
        )
        completion = gazeanalysis.completion_time(
            correct=bool(trial_meta["correct"]),
            latency=trial_meta.get("latency_s"),
            limit_s=float(trial_meta.get("limit_s", 30.0)),
        )
    except (ColorVibError, ValueError) as exc:
        _fail(exc)
    result = {
        "completion_s": completion,
        "explored_ratio": ratio,
        "n_points": int(mapped.points.shape[0]),
        "dropped": mapped.dropped,
    }
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write("completion_s,explored_ratio,n_points,dropped\n")
            f.write(f"{completion},{ratio},{result['n_points']},{result['dropped']}\n")
    _emit(result)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), envvar=CONFIG_ENV_VAR, required=True, help=f"Session config JSON (or ${CONFIG_ENV_VAR}).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8750, show_default=True)
def serve(config_path, host, port):
    """Run the local experiment session service until interrupted."""
    import uvicorn

    from .service import SessionConfig, create_app

    try:
        config = SessionConfig.from_file(config_path)
        app = create_app(config)
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (ColorVibError, ValueError, OSError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()

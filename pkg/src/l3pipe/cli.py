"""Command-line entry point: ``l3pipe <command> ...``.

Commands: simulate, train, priors, render, evaluate, inspect, export-spec.
Every command exits 0 only after all of its outputs are written.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import camsim, colorimetry, io, metrics, sensors
from .core import (
    TARGET_SPACES,
    ClassConfig,
    L3Error,
    SensorSpec,
    TargetImage,
    TransformTable,
    format_saturation_case,
)
from .priors import PriorConfig, apply_priors
from .render import encode_display, render
from .train import RidgeConfig, train_table

log = logging.getLogger("l3pipe")


class CliError(Exception):
    pass


# --- shared helpers -------------------------------------------------------------

def load_spec(arg: str) -> SensorSpec:
    """A built-in sensor name or the path of a TOML sensor spec."""
    if arg in sensors.BUILTIN:
        return sensors.builtin_spec(arg)
    path = Path(arg)
    if not path.exists():
        raise CliError(f"{arg!r} is neither a built-in sensor ({', '.join(sorted(sensors.BUILTIN))}) nor a file")
    return io.read_sensor_spec(path)


def _target_meta_path(target_path) -> Path:
    return Path(target_path).with_suffix(".json")


def write_target(path, target: TargetImage):
    """Target PFM plus a sidecar JSON holding its colour space and white point."""
    io.write_pfm(path, target.data)
    meta = {"space": target.space, "white": [float(v) for v in target.white]}
    _target_meta_path(path).write_text(json.dumps(meta) + "\n")


def read_target(path, space: str | None = None) -> TargetImage:
    """Target PFM; space and white come from the sidecar when present (D65 otherwise)."""
    data = io.read_pfm(path)
    if data.ndim != 3:
        raise io.FormatError("target images must be three-channel PFMs", path)
    meta_path = _target_meta_path(path)
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    stored = meta.get("space")
    if space is not None and stored is not None and space != stored:
        raise CliError(f"{path}: target is in {stored}, not {space}")
    white = np.asarray(meta.get("white", colorimetry.d65_white()), dtype=np.float64)
    return TargetImage(data.astype(np.float64), space or stored or "xyz", white)


def _parse_triplet(text: str | None):
    if text is None:
        return None
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise CliError(f"expected three comma-separated numbers, got {text!r}")
    return np.array(parts)


def _prior_config(args) -> PriorConfig | None:
    if getattr(args, "no_priors", False):
        return None
    return PriorConfig(
        symmetry=not args.no_symmetry,
        smooth=not args.no_smooth,
        interpolate=not args.no_interpolate,
        uniformity=not args.no_uniformity,
    )


def _add_prior_flags(p: argparse.ArgumentParser):
    p.add_argument("--no-symmetry", action="store_true", help="skip symmetry enforcement")
    p.add_argument("--no-smooth", action="store_true", help="skip smoothing across levels")
    p.add_argument("--no-interpolate", action="store_true", help="skip filling empty level bins")
    p.add_argument("--no-uniformity", action="store_true", help="skip the uniform-input constraint")


# --- commands ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = load_spec(args.sensor)
    recipe = camsim.SceneRecipe(args.scene, size=args.size, seed=args.seed, wavelengths=tuple(spec.wavelengths),
                                angle_deg=args.angle, dynamic_range=args.dynamic_range)
    scene = camsim.generate_scene(recipe)
    if args.light is not None:
        scene = camsim.set_light_level(scene, spec, args.light)
    sensor, target = camsim.simulate_pair(scene, spec, args.target, noise=not args.no_noise, seed=args.seed,
                                          workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / (args.prefix or f"{args.scene}-{args.seed}")
    paths = (Path(f"{stem}_sensor.pfm"), Path(f"{stem}_mask.pfm"), Path(f"{stem}_target.pfm"))
    io.write_sensor_image(paths[0], paths[1], sensor)
    write_target(paths[2], target)
    io.write_spectral(f"{stem}.l3spec", scene)
    if args.manifest:
        with open(args.manifest, "a") as f:
            f.write(" ".join(str(p.resolve()) for p in paths) + "\n")
    for p in paths:
        print(p)
    return 0


def _class_config(args, spec: SensorSpec) -> ClassConfig:
    base = sensors.default_class_config(spec)
    if args.class_config:
        base = io.read_class_config(args.class_config, spec.cfa, base)
    changes = {}
    if args.levels is not None:
        changes["n_levels"] = args.levels
    if args.spacing is not None:
        changes["spacing"] = args.spacing
    if args.patch is not None:
        changes["patch_size"] = args.patch
    if args.contrast_split:
        changes["contrast_split"] = True
    if args.no_saturation:
        changes["saturation_cases"] = (frozenset(),)
    return base.replace(**changes) if changes else base


def cmd_train(args) -> int:
    spec = load_spec(args.sensor)
    config = _class_config(args, spec)
    pairs = []
    for sensor_path, mask_path, target_path in io.read_manifest(args.manifest):
        sensor = io.read_sensor_image(sensor_path, mask_path, spec)
        target = read_target(target_path, args.target)
        if (target.height, target.width) != (sensor.height, sensor.width):
            raise CliError(f"{target_path}: size differs from {sensor_path}")
        pairs.append((sensor, target))
    ridge = RidgeConfig(fixed_lambda=args.lam, workers=args.workers)
    table = train_table(pairs, config, ridge, seed=args.seed,
                        provenance={"manifest": str(args.manifest), "sensor": spec.name})
    print("class,pixel_type,level,contrast,saturation,samples,lambda")
    for code, t in table.transforms.items():
        c = t.class_id
        sat = format_saturation_case(config.saturation_cases[c.saturation], spec.cfa.channel_names)
        print(f"{code},{c.pixel_type},{c.level},{c.contrast},{sat},{t.sample_count},{t.lam:.6g}")
    priors = _prior_config(args)
    if priors is not None:
        table = apply_priors(table, priors)
    io.write_table(_parent_ready(args.out), table)
    return 0


def cmd_priors(args) -> int:
    table = io.read_table(args.table)
    io.write_table(_parent_ready(args.out), apply_priors(table, _prior_config(args)))
    return 0


def cmd_render(args) -> int:
    table = io.read_table(args.table)
    spec = load_spec(args.sensor)
    sensor = io.read_sensor_image(args.sensor_pfm, args.mask_pfm, spec)
    image = render(sensor, table, workers=args.workers)
    out = _parent_ready(args.out)
    write_target(out.with_suffix(".pfm"), image)
    if image.space == "lab":
        display = TargetImage(colorimetry.lab_to_xyz(image.data, image.white), "xyz", image.white)
    else:
        display = image
    io.write_ppm(out.with_suffix(".ppm"), encode_display(display, display_white=image.white))
    return 0


def _parent_ready(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path, header, rows):
    text = ",".join(header) + "\n" + "".join(",".join(str(v) for v in r) + "\n" for r in rows)
    if path:
        _parent_ready(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args) -> int:
    if args.kind == "mtf":
        image = io.read_pfm(args.inputs[0])
        if image.ndim == 3:
            image = image[..., args.channel]
        roi = tuple(int(v) for v in args.roi.split(",")) if args.roi else None
        curve = metrics.mtf_slanted_edge(image, roi, pixel_size_um=args.pixel_size)
        _write_csv(args.csv, ["metric", "mtf50_cycles_per_mm", "mtf50_cycles_per_pixel", "edge_angle_deg"],
                   [["mtf", f"{curve.mtf50:.6f}", f"{curve.mtf50_cycles_per_pixel:.6f}", f"{curve.angle_deg:.4f}"]])
        if args.curve:
            _write_csv(args.curve, ["frequency_cycles_per_mm", "mtf"],
                       [[f"{f:.6f}", f"{m:.6f}"] for f, m in zip(curve.frequencies, curve.mtf)])
        return 0
    if len(args.inputs) != 2:
        raise CliError(f"{args.kind} compares two images")
    a = read_target(args.inputs[0])
    b = read_target(args.inputs[1])
    if args.kind == "psnr":
        value = metrics.psnr(a, b, peak=args.peak)
        _write_csv(args.csv, ["metric", "psnr_db"], [["psnr", f"{value:.6f}"]])
        return 0
    white = _parse_triplet(args.white)
    if white is None:
        white = b.white
    if args.kind == "deltaE":
        result = metrics.delta_e_map(a, b, white)
    else:
        spd = metrics.samples_per_degree(args.dpi, args.distance)
        result = metrics.scielab_map(a, b, spd, white)
    _write_csv(args.csv, ["metric", "mean", "median", "p95"], [result.csv_row(args.kind).split(",")])
    if args.map:
        io.write_pfm(_parent_ready(args.map), result.map)
    return 0


def parse_selector(text: str, config: ClassConfig) -> list[int]:
    """``all``, an encoded class number, or ``type=T,level=L[,contrast=C][,saturation=S]``."""
    if text == "all":
        return list(range(config.n_classes))
    if text.isdigit():
        code = int(text)
        if code >= config.n_classes:
            raise CliError(f"class {code} out of range 0..{config.n_classes - 1}")
        return [code]
    fields = {"type": None, "level": None, "contrast": 0, "saturation": 0}
    try:
        for part in text.split(","):
            key, value = part.split("=")
            if key not in fields:
                raise ValueError(key)
            fields[key] = int(value)
    except ValueError:
        raise CliError(
            f"bad class selector {text!r}; use 'all', an encoded class (0..{config.n_classes - 1}) "
            "or type=T,level=L[,contrast=C][,saturation=S]"
        ) from None
    if fields["type"] is None or fields["level"] is None:
        raise CliError("selector needs at least type= and level=")
    radices = config.radices
    parts = (fields["type"], fields["level"], fields["contrast"], fields["saturation"])
    if any(not 0 <= v < r for v, r in zip(parts, radices)):
        raise CliError(f"selector {text!r} outside class space {radices}")
    code = 0
    for v, r in zip(parts, radices):
        code = code * r + v
    return [code]


def type_weight_sums(table: TransformTable) -> list[list]:
    """Rows (class fields, output, input channel, sum, absolute sum) for every class in the table."""
    cfg = table.config
    names = table.cfa.channel_names
    rows = []
    for code, t in table.transforms.items():
        c = t.class_id
        layout = table.cfa.patch_channels(c.pixel_type, cfg.patch_size).ravel()
        sat = format_saturation_case(cfg.saturation_cases[c.saturation], names)
        for r in range(t.weights.shape[1]):
            for ch, name in enumerate(names):
                w = t.spatial[layout == ch, r]
                rows.append([code, c.pixel_type, c.level, c.contrast, sat, r, name,
                             f"{w.sum():.10g}", f"{np.abs(w).sum():.10g}"])
    return rows


def cmd_inspect(args) -> int:
    table = io.read_table(args.table)
    cfg = table.config
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    codes = [c for c in parse_selector(args.select, cfg) if c in table.transforms]
    if not codes:
        raise CliError(f"the table has no transform for selector {args.select!r}")
    k = cfg.patch_size
    for code in codes:
        t = table.transforms[code]
        for r in range(t.weights.shape[1]):
            w = t.spatial[:, r].reshape(k, k)
            stem = out / f"class{code}_out{r}"
            io.write_pfm(f"{stem}.pfm", w)
            peak = np.abs(w).max()
            gray = np.zeros_like(w) if peak == 0 else np.abs(w) / peak
            io.write_ppm(f"{stem}.ppm", np.repeat(np.round(gray * 255).astype(np.uint8)[..., None], 3, axis=2))
    header = ["class", "pixel_type", "level", "contrast", "saturation", "output", "channel", "sum", "abs_sum"]
    _write_csv(out / "type_sums.csv", header, type_weight_sums(table))
    return 0


def cmd_export_spec(args) -> int:
    spec = sensors.builtin_spec(args.name)
    io.write_sensor_spec(_parent_ready(args.out), spec)
    return 0


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="l3pipe", description="Learned local linear camera rendering pipelines.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a sensor capture and its ideal target")
    s.add_argument("--scene", choices=camsim.SCENE_KINDS, default="macbeth")
    s.add_argument("--size", type=int, default=128)
    s.add_argument("--angle", type=float, default=5.0, help="slanted-edge angle in degrees")
    s.add_argument("--dynamic-range", type=float, default=3.0, help="decades of scene luminance")
    s.add_argument("--sensor", default="bayer", help="built-in sensor name or TOML spec path")
    s.add_argument("--light", type=float, default=None, help="target luminance of a perfect white")
    s.add_argument("--target", choices=TARGET_SPACES, default="xyz")
    s.add_argument("--no-noise", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--prefix", default=None)
    s.add_argument("--manifest", default=None, help="append the output triple to this manifest")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="learn a transform table from a manifest of pairs")
    t.add_argument("manifest")
    t.add_argument("--sensor", default="bayer")
    t.add_argument("--class-config", default=None, help="TOML file of class options")
    t.add_argument("--levels", type=int, default=None)
    t.add_argument("--spacing", choices=("linear", "log"), default=None)
    t.add_argument("--patch", type=int, default=None)
    t.add_argument("--contrast-split", action="store_true")
    t.add_argument("--no-saturation", action="store_true", help="no separate saturation classes")
    t.add_argument("--lambda", dest="lam", type=float, default=None, help="fixed ridge penalty (skips GCV)")
    t.add_argument("--target", choices=TARGET_SPACES, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--no-priors", action="store_true")
    _add_prior_flags(t)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser("priors", help="apply prior knowledge to a stored table")
    q.add_argument("table")
    _add_prior_flags(q)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_priors)

    r = sub.add_parser("render", help="render a sensor capture with a table")
    r.add_argument("sensor_pfm")
    r.add_argument("mask_pfm")
    r.add_argument("--table", required=True)
    r.add_argument("--sensor", default="bayer")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", required=True, help="output stem; writes .pfm and .ppm")
    r.set_defaults(func=cmd_render)

    e = sub.add_parser("evaluate", help="colour and resolution metrics")
    e.add_argument("kind", choices=("deltaE", "scielab", "mtf", "psnr"))
    e.add_argument("inputs", nargs="+", help="two target PFMs, or one image for mtf")
    e.add_argument("--white", default=None, help="X,Y,Z white for CIELAB (default: reference image white)")
    e.add_argument("--dpi", type=float, default=96.0)
    e.add_argument("--distance", type=float, default=1.0, help="viewing distance in metres")
    e.add_argument("--peak", type=float, default=1.0)
    e.add_argument("--roi", default=None, help="x0,y0,x1,y1 for mtf")
    e.add_argument("--channel", type=int, default=1)
    e.add_argument("--pixel-size", type=float, default=1.4, help="micrometres, for mtf")
    e.add_argument("--csv", default=None, help="summary CSV (stdout when omitted)")
    e.add_argument("--map", default=None, help="per-pixel map PFM")
    e.add_argument("--curve", default=None, help="mtf curve CSV")
    e.set_defaults(func=cmd_evaluate)

    i = sub.add_parser("inspect", help="weight images and per-channel weight sums")
    i.add_argument("table")
    i.add_argument("--select", default="all")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_inspect)

    x = sub.add_parser("export-spec", help="write a built-in sensor spec as TOML")
    x.add_argument("name", choices=sorted(sensors.BUILTIN))
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_spec)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (L3Error, CliError, ValueError, OSError) as exc:
        print(f"l3pipe {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""File formats: PFM/PPM images, L3SPEC cubes, transform tables, sensor specs, manifests."""

from __future__ import annotations

import json
import re
import struct
import sys
from pathlib import Path

import numpy as np

from .core import (
    AffineTransform,
    CfaPattern,
    ClassConfig,
    SensorImage,
    SensorSpec,
    SpectralImage,
    TransformTable,
    decode_class,
    format_saturation_case,
    parse_saturation_case,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TABLE_FORMAT_VERSION = 1
L3SPEC_MAGIC = b"L3SPEC\x01"


class FormatError(ValueError):
    """Malformed file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = str(path) if path is not None else "<input>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.line = line


# --- PFM / PPM ----------------------------------------------------------------

def write_pfm(path, image: np.ndarray):
    """Little-endian PFM (scale -1); rows are stored bottom to top."""
    img = np.asarray(image, dtype="<f4")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim == 2:
        header = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError("PFM holds one or three channels")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n")
        f.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] not in (b"PF", b"Pf"):
        raise FormatError("not a PFM file", path, 1)
    try:
        w, h = (int(v) for v in parts[1].split())
        scale = float(parts[2])
    except ValueError as exc:
        raise FormatError("bad PFM header", path, 2) from exc
    channels = 3 if parts[0] == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    body = np.frombuffer(parts[3], dtype=dtype, count=count) if len(parts[3]) >= 4 * count else None
    if body is None:
        raise FormatError("truncated PFM data", path)
    img = body.reshape(h, w, channels)[::-1].astype(np.float64)
    return img[..., 0] if channels == 1 else img


def write_ppm(path, rgb: np.ndarray):
    """Binary P6, maxval 255."""
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("PPM needs an (h, w, 3) uint8 array")
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(rgb).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    tokens = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not tokens:
        raise FormatError("not a binary PPM file", path, 1)
    w, h, maxval = (int(t) for t in tokens.groups())
    if maxval != 255:
        raise FormatError("only maxval 255 is supported", path)
    body = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=tokens.end())
    return body.reshape(h, w, 3).copy()


# --- L3SPEC -------------------------------------------------------------------

def encode_spectral(scene: SpectralImage) -> bytes:
    h, w, n = scene.data.shape
    header = L3SPEC_MAGIC + struct.pack("<III", h, w, n)
    wl = np.asarray(scene.wavelengths, dtype="<f4").tobytes()
    planes = np.ascontiguousarray(np.moveaxis(scene.data, 2, 0), dtype="<f4").tobytes()
    return header + wl + planes


def decode_spectral(data: bytes, path=None) -> SpectralImage:
    if not data.startswith(L3SPEC_MAGIC):
        raise FormatError("missing L3SPEC magic", path)
    off = len(L3SPEC_MAGIC)
    if len(data) < off + 12:
        raise FormatError("truncated L3SPEC header", path)
    h, w, n = struct.unpack_from("<III", data, off)
    off += 12
    need = off + 4 * n + 4 * n * h * w
    if len(data) != need:
        raise FormatError(f"L3SPEC size {len(data)} does not match header ({need} bytes)", path)
    wl = np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(np.float64)
    cube = np.frombuffer(data, dtype="<f4", count=n * h * w, offset=off + 4 * n).reshape(n, h, w)
    return SpectralImage(np.moveaxis(cube, 0, 2).astype(np.float64), wl)


def write_spectral(path, scene: SpectralImage):
    Path(path).write_bytes(encode_spectral(scene))


def read_spectral(path) -> SpectralImage:
    return decode_spectral(Path(path).read_bytes(), path)


# --- transform tables -----------------------------------------------------------

def _g17(v: float) -> str:
    return "%.17g" % v


def _config_dict(config: ClassConfig, cfa: CfaPattern) -> dict:
    return {
        "patch_size": config.patch_size,
        "n_levels": config.n_levels,
        "spacing": config.spacing,
        "level_floor": config.level_floor,
        "contrast_split": config.contrast_split,
        "contrast_threshold": config.contrast_threshold,
        "saturation_cases": [format_saturation_case(c, cfa.channel_names) for c in config.saturation_cases],
        "level_bounds": [float(v) for v in config.level_bounds],
    }


def _config_from_dict(d: dict, cfa: CfaPattern) -> ClassConfig:
    return ClassConfig(
        n_pixel_types=cfa.n_pixel_types,
        patch_size=int(d["patch_size"]),
        n_levels=int(d["n_levels"]),
        spacing=d["spacing"],
        level_floor=float(d["level_floor"]),
        contrast_split=bool(d["contrast_split"]),
        contrast_threshold=float(d["contrast_threshold"]),
        saturation_cases=tuple(parse_saturation_case(s, list(cfa.channel_names)) for s in d["saturation_cases"]),
        level_bounds=np.asarray(d["level_bounds"], dtype=np.float64),
    )


def _cfa_dict(cfa: CfaPattern) -> dict:
    return {"block": cfa.block.tolist(), "channel_names": list(cfa.channel_names)}


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def dump_table(table: TransformTable) -> str:
    """Text serialization: JSON with one weight row per line, floats at 17 significant digits."""
    out = ["{"]
    out.append(f'  "format_version": {TABLE_FORMAT_VERSION},')
    out.append(f'  "cfa": {_dumps(_cfa_dict(table.cfa))},')
    out.append(f'  "class_config": {_dumps(_config_dict(table.config, table.cfa))},')
    out.append(f'  "target_space": {_dumps(table.target_space)},')
    out.append(f'  "provenance": {_dumps(table.provenance)},')
    out.append('  "transforms": [')
    items = list(table.transforms.items())
    for i, (code, t) in enumerate(items):
        cid = t.class_id
        lam = "null" if t.lam is None else _g17(t.lam)
        out.append(
            f'    {{"class": {code}, "pixel_type": {cid.pixel_type}, "level": {cid.level}, '
            f'"contrast": {cid.contrast}, "saturation": {cid.saturation}, '
            f'"sample_count": {t.sample_count}, "lambda": {lam}, "weights": ['
        )
        rows = [("      [" + ", ".join(_g17(v) for v in row) + "]") for row in t.weights]
        out.append(",\n".join(rows))
        out.append("    ]}" + ("," if i < len(items) - 1 else ""))
    out.append("  ]")
    out.append("}")
    return "\n".join(out) + "\n"


def parse_table(text: str, path=None) -> TransformTable:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, path, exc.lineno) from exc
    try:
        if doc["format_version"] != TABLE_FORMAT_VERSION:
            raise FormatError(f"unsupported table format version {doc['format_version']}", path)
        cfa = CfaPattern(np.asarray(doc["cfa"]["block"]), tuple(doc["cfa"]["channel_names"]))
        config = _config_from_dict(doc["class_config"], cfa)
        transforms = {}
        for entry in doc["transforms"]:
            code = int(entry["class"])
            lam = entry["lambda"]
            transforms[code] = AffineTransform(
                np.asarray(entry["weights"], dtype=np.float64),
                decode_class(code, config),
                int(entry["sample_count"]),
                None if lam is None else float(lam),
            )
        return TransformTable(config, cfa, doc["target_space"], transforms, doc["provenance"])
    except KeyError as exc:
        raise FormatError(f"missing field {exc.args[0]!r}", path) from exc


def write_table(path, table: TransformTable):
    Path(path).write_text(dump_table(table))


def read_table(path) -> TransformTable:
    return parse_table(Path(path).read_text(), path)


# --- sensor spec and class config files ----------------------------------------------

SPEC_SCALARS = ("pixel_size_um", "f_number", "exposure_s", "well_capacity", "read_noise_e",
                "conversion_gain", "bits", "analog_gain")


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    return "[" + ", ".join(_toml_value(x) for x in v) + "]"


def dump_sensor_spec(spec: SensorSpec) -> str:
    lines = [f"name = {_toml_value(spec.name)}"]
    for key in SPEC_SCALARS:
        lines.append(f"{key} = {_toml_value(getattr(spec, key))}")
    lines += ["", "[cfa]", f"channels = {_toml_value(list(spec.cfa.channel_names))}"]
    lines.append("block = [" + ", ".join(_toml_value(row) for row in spec.cfa.block.tolist()) + "]")
    lines += ["", "[qe]", f"wavelengths = {_toml_value(spec.wavelengths.tolist())}"]
    for name, row in zip(spec.cfa.channel_names, spec.qe):
        lines.append(f"{name} = {_toml_value(row.tolist())}")
    return "\n".join(lines) + "\n"


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _load_toml(text: str, path):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise FormatError(str(exc), path, int(m.group(1)) if m else None) from exc


def parse_sensor_spec(text: str, path=None) -> SensorSpec:
    """Sensor spec from TOML; errors name the offending line."""
    doc = _load_toml(text, path)
    current = "name"
    try:
        cfa_doc = doc["cfa"]
        current = "channels"
        names = tuple(cfa_doc["channels"])
        current = "block"
        cfa = CfaPattern(np.asarray(cfa_doc["block"]), names)
        current = "wavelengths"
        wl = doc["qe"]["wavelengths"]
        qe = []
        for n in names:
            current = n
            qe.append(doc["qe"][n])
        spec = SensorSpec(doc.get("name", "custom"), cfa, np.asarray(wl, dtype=np.float64),
                          np.asarray(qe, dtype=np.float64))
        # scalars one at a time so a bad value is reported on its own line
        for key in SPEC_SCALARS:
            if key in doc:
                current = key
                spec = spec.replace(**{key: doc[key]})
        return spec
    except KeyError as exc:
        raise FormatError(f"missing key {exc.args[0]!r}", path, _line_of(text, current)) from exc
    except (ValueError, TypeError) as exc:
        raise FormatError(str(exc), path, _line_of(text, current)) from exc


def write_sensor_spec(path, spec: SensorSpec):
    Path(path).write_text(dump_sensor_spec(spec))


def read_sensor_spec(path) -> SensorSpec:
    return parse_sensor_spec(Path(path).read_text(), path)


CLASS_KEYS = ("patch_size", "n_levels", "spacing", "level_floor", "contrast_split", "contrast_threshold",
              "saturation_cases")


def parse_class_config(text: str, cfa: CfaPattern, base: ClassConfig | None = None, path=None) -> ClassConfig:
    """TOML overrides (keys as in ClassConfig) applied to ``base``."""
    doc = _load_toml(text, path)
    doc = doc.get("classes", doc)
    changes = {}
    for key, value in doc.items():
        if key not in CLASS_KEYS:
            raise FormatError(f"unknown class option {key!r}", path, _line_of(text, key))
        if key == "saturation_cases":
            try:
                value = tuple(parse_saturation_case(s, list(cfa.channel_names)) for s in value)
            except ValueError as exc:
                raise FormatError(str(exc), path, _line_of(text, key)) from exc
        changes[key] = value
    base = base or ClassConfig(cfa.n_pixel_types)
    try:
        return base.replace(**changes)
    except ValueError as exc:
        raise FormatError(str(exc), path) from exc


def read_class_config(path, cfa: CfaPattern, base: ClassConfig | None = None) -> ClassConfig:
    return parse_class_config(Path(path).read_text(), cfa, base, path)


# --- sensor images and manifests -----------------------------------------------------

def write_sensor_image(values_path, mask_path, sensor: SensorImage):
    write_pfm(values_path, sensor.values)
    write_pfm(mask_path, sensor.saturated.astype(np.float32))


def read_sensor_image(values_path, mask_path, spec: SensorSpec) -> SensorImage:
    values = read_pfm(values_path)
    mask = read_pfm(mask_path) > 0.5
    if values.ndim != 2:
        raise FormatError("sensor data must be a single-channel PFM", values_path)
    return SensorImage(np.clip(values, 0.0, 1.0), mask, spec)


def read_manifest(path) -> list[tuple[Path, Path, Path]]:
    """Lines of ``sensor.pfm  mask.pfm  target.pfm``; blank lines and # comments are skipped.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    out = []
    for i, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError("expected sensor, mask and target paths", path, i)
        out.append(tuple(p if Path(p).is_absolute() else path.parent / p for p in map(Path, parts)))
    if not out:
        raise FormatError("manifest lists no training pairs", path)
    return out


def write_manifest(path, rows):
    Path(path).write_text("".join(f"{a} {b} {c}\n" for a, b, c in rows))

"""Apply a transform table to raw sensor data."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import colorimetry
from .classify import classify_patch, classify_patches, extract_patch, extract_patches
from .core import ConfigurationError, MissingClassError, SensorImage, TargetImage, TransformTable, decode_class

ROWS_PER_CHUNK = 32


def apply_affine(patches: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """out[n, r] = sum_k patches[n, k] * weights[n, k, r] + weights[n, -1, r].

    Accumulates in a fixed k order so every pixel's result is independent of
    how pixels are batched.
    """
    out = weights[:, -1, :].copy()
    for k in range(patches.shape[1]):
        out += patches[:, k, None] * weights[:, k, :]
    return out


def _check(sensor: SensorImage, table: TransformTable):
    if not sensor.cfa.same_layout(table.cfa):
        raise ConfigurationError("sensor CFA does not match the table's CFA")


def _output_white(table: TransformTable) -> np.ndarray:
    return np.asarray(table.provenance.get("white", colorimetry.d65_white()), dtype=np.float64)


def _render_rows(sensor, table, dense, present, rows, class_map):
    cfg = table.config
    values, saturated = extract_patches(sensor, cfg.patch_size, rows)
    if class_map is None:
        types = sensor.cfa.type_mosaic(sensor.height, sensor.width)[rows].ravel()
        codes = classify_patches(values, saturated, types, sensor.cfa, cfg)
    else:
        codes = np.asarray(class_map[rows]).ravel()
    absent = ~present[codes]
    if np.any(absent):
        raise MissingClassError(f"table has no transform for class {decode_class(int(codes[absent][0]), cfg)}")
    return apply_affine(values, dense[codes])


def render(sensor: SensorImage, table: TransformTable, workers: int = 1, class_map: np.ndarray | None = None) -> TargetImage:
    """Classify every pixel, look up its transform and take the inner product with its patch.

    ``class_map`` (encoded classes per pixel) skips classification; the
    result is bit-identical to classifying on the fly.
    """
    _check(sensor, table)
    dense, present, _ = table.dense()
    h = sensor.height
    chunks = [slice(a, min(a + ROWS_PER_CHUNK, h)) for a in range(0, h, ROWS_PER_CHUNK)]

    def work(rows):
        return _render_rows(sensor, table, dense, present, rows, class_map)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(r) for r in chunks]
    out = np.concatenate(parts).reshape(h, sensor.width, -1)
    return TargetImage(out, table.target_space, _output_white(table))


def render_pixel(sensor: SensorImage, table: TransformTable, x: int, y: int) -> np.ndarray:
    """Reference path for one pixel: extract, classify, look up, dot."""
    _check(sensor, table)
    patch = extract_patch(sensor, x, y, table.config.patch_size)
    cid = classify_patch(patch, sensor, table.config)
    t = table.transforms.get(cid.encoded)
    if t is None:
        raise MissingClassError(f"table has no transform for class {cid}")
    return apply_affine(patch.values[None, :-1], t.weights[None])[0]


def encode_display(image: TargetImage, display_white=None) -> np.ndarray:
    """8-bit sRGB; ``display_white`` (XYZ) is shown as (255, 255, 255)."""
    white = colorimetry.d65_white() if display_white is None else np.asarray(display_white, dtype=np.float64)
    if image.space == "xyz":
        linear = colorimetry.xyz_to_linear_srgb(image.data, white)
    elif image.space == "srgb":
        xyz = colorimetry.linear_srgb_to_xyz(image.data, image.white)
        linear = colorimetry.xyz_to_linear_srgb(xyz, white)
    else:
        raise ValueError("convert CIELAB images to XYZ before display encoding")
    encoded = colorimetry.srgb_encode(linear)
    return np.round(encoded * 255.0).astype(np.uint8)

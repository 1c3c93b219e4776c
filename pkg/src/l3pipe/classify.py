"""Patch extraction and class assignment.

The batched functions are the only implementation; the single-patch
helpers call them with one row so both paths give bit-identical classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ANY, ClassConfig, ClassId, SensorImage, decode_class, level_bounds

__all__ = [
    "PatchVector",
    "level_bounds",
    "extract_patch",
    "extract_patches",
    "classify_patch",
    "classify_patches",
    "class_map",
]


@dataclass(frozen=True, eq=False)
class PatchVector:
    """Row-major patch responses followed by the constant 1."""

    values: np.ndarray
    center_x: int
    center_y: int
    class_id: ClassId | None = None


def _check_patch_size(patch_size: int):
    if patch_size < 1 or patch_size % 2 == 0:
        raise ValueError(f"patch size must be odd, got {patch_size}")


def _windows(plane: np.ndarray, patch_size: int, rows: slice) -> np.ndarray:
    r = patch_size // 2
    padded = np.pad(plane, r, mode="reflect") if r else plane
    start = rows.start or 0
    stop = plane.shape[0] if rows.stop is None else rows.stop
    band = padded[start:stop + 2 * r]
    win = sliding_window_view(band, (patch_size, patch_size))
    return win.reshape(-1, patch_size * patch_size)


def extract_patches(sensor: SensorImage, patch_size: int, rows: slice = slice(None)):
    """Patches (n, k*k) and their saturation flags for every pixel in ``rows``, in raster order.

    Borders are mirror padded without repeating the edge pixel.
    """
    _check_patch_size(patch_size)
    values = _windows(sensor.values, patch_size, rows)
    saturated = _windows(sensor.saturated, patch_size, rows)
    return values, saturated


def extract_patch(sensor: SensorImage, x: int, y: int, patch_size: int) -> PatchVector:
    _check_patch_size(patch_size)
    if not (0 <= x < sensor.width and 0 <= y < sensor.height):
        raise ValueError(f"pixel ({x}, {y}) outside the {sensor.width}x{sensor.height} sensor")
    values, _ = extract_patches(sensor, patch_size, slice(y, y + 1))
    return PatchVector(np.append(values[x], 1.0), x, y)


def _saturation_lookup(config: ClassConfig, n_channels: int) -> np.ndarray:
    """Saturation-case index for every bitmask of saturated channels."""
    cases = config.saturation_cases
    table = np.zeros(2**n_channels, dtype=np.int64)
    for mask in range(1, 2**n_channels):
        present = frozenset(c for c in range(n_channels) if mask >> c & 1)
        if present in cases:
            table[mask] = cases.index(present)
        elif ANY in cases:
            table[mask] = cases.index(ANY)
        else:
            best = max(
                (i for i, c in enumerate(cases) if c != ANY and c <= present),
                key=lambda i: (len(cases[i]), i),
            )
            table[mask] = best
    return table


def _patch_channel_maps(cfa, patch_size: int) -> np.ndarray:
    return np.stack([cfa.patch_channels(t, patch_size).ravel() for t in range(cfa.n_pixel_types)])


def classify_patches(values: np.ndarray, saturated: np.ndarray, pixel_types: np.ndarray, cfa,
                     config: ClassConfig) -> np.ndarray:
    """Encoded class of each patch row."""
    pixel_types = np.asarray(pixel_types, dtype=np.int64)
    usable = ~saturated
    count = usable.sum(axis=1)
    total = np.where(usable, values, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.inf)
    level = np.minimum(np.searchsorted(config.level_bounds, mean, side="right"), config.n_levels - 1)

    if config.contrast_split:
        contrast = (values.std(axis=1) > config.contrast_threshold).astype(np.int64)
    else:
        contrast = np.zeros(len(values), dtype=np.int64)

    channels = _patch_channel_maps(cfa, config.patch_size)[pixel_types]
    mask = np.zeros(len(values), dtype=np.int64)
    for c in range(cfa.n_channels):
        hit = np.any(saturated & (channels == c), axis=1)
        mask |= hit.astype(np.int64) << c
    sat_case = _saturation_lookup(config, cfa.n_channels)[mask]

    _, n_levels, n_contrast, n_sat = config.radices
    return ((pixel_types * n_levels + level) * n_contrast + contrast) * n_sat + sat_case


def classify_patch(patch: PatchVector, sensor: SensorImage, config: ClassConfig) -> ClassId:
    x, y = patch.center_x, patch.center_y
    _, saturated = extract_patches(sensor, config.patch_size, slice(y, y + 1))
    values = np.asarray(patch.values[:-1], dtype=np.float64)[None, :]
    pixel_type = sensor.cfa.pixel_type_at(x, y)
    code = classify_patches(values, saturated[x:x + 1], np.array([pixel_type]), sensor.cfa, config)
    return decode_class(int(code[0]), config)


def class_map(sensor: SensorImage, config: ClassConfig, rows: slice = slice(None)) -> np.ndarray:
    """Encoded class of every pixel in ``rows`` as a 2-D array."""
    start = rows.start or 0
    stop = sensor.height if rows.stop is None else rows.stop
    values, saturated = extract_patches(sensor, config.patch_size, slice(start, stop))
    types = sensor.cfa.type_mosaic(sensor.height, sensor.width)[start:stop].ravel()
    codes = classify_patches(values, saturated, types, sensor.cfa, config)
    return codes.reshape(stop - start, sensor.width)

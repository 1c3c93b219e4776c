"""CIE tables and colour-space conversions."""

from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path

import numpy as np

_PACKAGE_DATA = Path(__file__).with_name("data")

# Linear sRGB primaries, D65 white.
XYZ_TO_SRGB = np.array([
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
])
SRGB_TO_XYZ = np.linalg.inv(XYZ_TO_SRGB)

LAB_EPSILON = (6 / 29) ** 3
LAB_KAPPA = (29 / 6) ** 2 / 3


def data_dir() -> Path:
    return Path(os.environ.get("L3_DATA_DIR", _PACKAGE_DATA))


@lru_cache(maxsize=None)
def _load_table(directory: str, name: str) -> np.ndarray:
    t = np.loadtxt(Path(directory) / name, delimiter=",", comments="#", skiprows=2)
    t.setflags(write=False)
    return t


def _cmf_table() -> np.ndarray:
    return _load_table(str(data_dir()), "cie1931_2deg_10nm.csv")


def _d65_table() -> np.ndarray:
    return _load_table(str(data_dir()), "cie_d65_10nm.csv")


def cmf(wavelengths) -> np.ndarray:
    """CIE 1931 colour-matching functions (n, 3), zero outside the tabulated range."""
    t = _cmf_table()
    wl = np.asarray(wavelengths, dtype=np.float64)
    return np.stack([np.interp(wl, t[:, 0], t[:, i], left=0.0, right=0.0) for i in (1, 2, 3)], axis=1)


def illuminant_spd(name: str, wavelengths) -> np.ndarray:
    """Relative spectral power, normalized to 1 at 560 nm.

    D65 is held constant beyond its tabulated ends; only near-infrared
    proxy scenes sample it there.
    """
    wl = np.asarray(wavelengths, dtype=np.float64)
    key = name.upper()
    if key == "E":
        return np.ones_like(wl)
    if key == "D65":
        t = _d65_table()
        return np.interp(wl, t[:, 0], t[:, 1]) / 100.0
    raise ValueError(f"unknown illuminant {name!r}")


def band_widths(wavelengths) -> np.ndarray:
    """Integration weight (nm) of each wavelength sample."""
    wl = np.asarray(wavelengths, dtype=np.float64)
    return np.gradient(wl)


def spectrum_to_xyz(spectra, wavelengths) -> np.ndarray:
    """Unnormalized tristimulus integral of spectra (..., n_wavelengths)."""
    w = cmf(wavelengths) * band_widths(wavelengths)[:, None]
    return np.asarray(spectra, dtype=np.float64) @ w


def d65_white() -> np.ndarray:
    """XYZ of D65 with Y = 1."""
    t = _d65_table()
    xyz = spectrum_to_xyz(t[:, 1], t[:, 0])
    return xyz / xyz[1]


def xyz_to_linear_srgb(xyz, white=None) -> np.ndarray:
    """Linear sRGB with ``white`` mapped to (1, 1, 1).

    The white mapping is a diagonal scale in RGB, so the D65 white of the
    tabulated observer lands exactly on (1, 1, 1).
    """
    white = d65_white() if white is None else np.asarray(white, dtype=np.float64)
    rgb = np.asarray(xyz, dtype=np.float64) @ XYZ_TO_SRGB.T
    return rgb / (XYZ_TO_SRGB @ white)


def linear_srgb_to_xyz(rgb, white=None) -> np.ndarray:
    white = d65_white() if white is None else np.asarray(white, dtype=np.float64)
    scaled = np.asarray(rgb, dtype=np.float64) * (XYZ_TO_SRGB @ white)
    return scaled @ SRGB_TO_XYZ.T


def srgb_encode(linear) -> np.ndarray:
    v = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * np.power(v, 1 / 2.4) - 0.055)


def _lab_f(t):
    return np.where(t > LAB_EPSILON, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)


def _lab_finv(f):
    return np.where(f > 6 / 29, f**3, 3 * (6 / 29) ** 2 * (f - 4 / 29))


def xyz_to_lab_array(xyz, white) -> tuple[np.ndarray, int]:
    """CIELAB of xyz (..., 3); negative inputs are clamped and counted."""
    xyz = np.asarray(xyz, dtype=np.float64)
    white = np.asarray(white, dtype=np.float64)
    if np.any(white <= 0):
        raise ValueError("white point components must be positive")
    negative = int(np.count_nonzero(xyz < 0))
    f = _lab_f(np.maximum(xyz, 0.0) / white)
    lab = np.stack([116 * f[..., 1] - 16, 500 * (f[..., 0] - f[..., 1]), 200 * (f[..., 1] - f[..., 2])], axis=-1)
    return lab, negative


def lab_to_xyz(lab, white) -> np.ndarray:
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16) / 116
    fx = fy + lab[..., 1] / 500
    fz = fy - lab[..., 2] / 200
    return np.stack([_lab_finv(fx), _lab_finv(fy), _lab_finv(fz)], axis=-1) * np.asarray(white)


def to_xyz(data, space: str, white) -> np.ndarray:
    if space == "xyz":
        return np.asarray(data, dtype=np.float64)
    if space == "srgb":
        return linear_srgb_to_xyz(data, white)
    if space == "lab":
        return lab_to_xyz(data, white)
    raise ValueError(f"unknown colour space {space!r}")


def from_xyz(xyz, space: str, white) -> np.ndarray:
    if space == "xyz":
        return np.asarray(xyz, dtype=np.float64)
    if space == "srgb":
        return xyz_to_linear_srgb(xyz, white)
    if space == "lab":
        return xyz_to_lab_array(xyz, white)[0]
    raise ValueError(f"unknown colour space {space!r}")

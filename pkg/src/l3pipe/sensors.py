"""Built-in sensor designs and their default class configurations.

The filter curves are smooth analytic stand-ins (Gaussian pass bands, logistic
edges) multiplied by a generic silicon quantum efficiency.
"""

from __future__ import annotations

import numpy as np

from .core import ANY, CfaPattern, ClassConfig, SensorSpec

VISIBLE = np.arange(400.0, 701.0, 10.0)
EXTENDED = np.arange(400.0, 1001.0, 10.0)


def _logistic(wl, center, width):
    return 1.0 / (1.0 + np.exp(-(wl - center) / width))


def _gauss(wl, center, sigma):
    return np.exp(-0.5 * ((wl - center) / sigma) ** 2)


def silicon_qe(wl):
    """Bare photodiode efficiency: ~0.6 peak near 550 nm, tailing into the NIR."""
    wl = np.asarray(wl, dtype=np.float64)
    rise = _logistic(wl, 380.0, 35.0)
    fall = 1.0 - _logistic(wl, 900.0, 70.0)
    return 0.72 * rise * fall


def ir_cut(wl, edge=660.0):
    return 1.0 - _logistic(np.asarray(wl, dtype=np.float64), edge, 12.0)


def _filters(wl):
    wl = np.asarray(wl, dtype=np.float64)
    # the small short-wave lobe on red mimics the blue lobe of the x colour matching function
    red = 0.9 * (_gauss(wl, 600.0, 40.0) + 0.1 * _gauss(wl, 445.0, 22.0)) * ir_cut(wl)
    green = 0.92 * _gauss(wl, 550.0, 45.0)
    blue = 0.9 * _gauss(wl, 455.0, 25.0)
    return red, green, blue


def bayer_spec(wavelengths=VISIBLE, layout="RGGB", **overrides) -> SensorSpec:
    """Bayer sensor; ``layout`` lists the 2x2 block in row-major order."""
    names = ("R", "G", "B")
    block = np.array([names.index(c) for c in layout]).reshape(2, 2)
    red, green, blue = _filters(wavelengths)
    si = silicon_qe(wavelengths)
    qe = np.stack([red * si, green * si, blue * si])
    params = dict(name=f"bayer-{layout.lower()}", cfa=CfaPattern(block, names), wavelengths=wavelengths, qe=qe)
    params.update(overrides)
    return SensorSpec(**params)


def rgbw_spec(wavelengths=VISIBLE, **overrides) -> SensorSpec:
    """One R, G, B and clear pixel per 2x2 block; the clear pixel sits at (1, 1).

    The clear filter only carries the IR cut, so W collects roughly three
    times the photons of G.
    """
    names = ("R", "G", "B", "W")
    block = np.array([[1, 0], [2, 3]])
    red, green, blue = _filters(wavelengths)
    si = silicon_qe(wavelengths)
    white = 0.95 * ir_cut(wavelengths)
    qe = np.stack([red * si, green * si, blue * si, white * si])
    params = dict(name="rgbw", cfa=CfaPattern(block, names), wavelengths=wavelengths, qe=qe)
    params.update(overrides)
    return SensorSpec(**params)


def rgbw_matched_bayer(wavelengths=VISIBLE, **overrides) -> SensorSpec:
    """The RGBW layout with the clear pixel replaced by green."""
    return bayer_spec(wavelengths, layout="GRBG", **overrides)


def rgbnir_spec(wavelengths=EXTENDED, **overrides) -> SensorSpec:
    """RGB + NIR block; RGB pixels carry an in-pixel IR cut, the NIR pixel a long-pass filter.

    The NIR filter leaks a few percent of red light, which is the only
    visible information the NIR pixel carries.
    """
    names = ("R", "G", "B", "NIR")
    block = np.array([[1, 0], [2, 3]])
    red, green, blue = _filters(wavelengths)
    si = silicon_qe(wavelengths)
    nir = 0.9 * _logistic(np.asarray(wavelengths, dtype=np.float64), 780.0, 15.0) + 0.06 * _logistic(
        np.asarray(wavelengths, dtype=np.float64), 600.0, 20.0
    )
    qe = np.stack([red * si, green * si, blue * si, np.minimum(nir, 1.0) * si])
    params = dict(name="rgbnir", cfa=CfaPattern(block, names), wavelengths=wavelengths, qe=qe, pixel_size_um=2.75)
    params.update(overrides)
    return SensorSpec(**params)


def rgbnir_matched_bayer(wavelengths=EXTENDED, **overrides) -> SensorSpec:
    overrides.setdefault("pixel_size_um", 2.75)
    return bayer_spec(wavelengths, layout="GRBG", **overrides)


def mono_spec(wavelengths=VISIBLE, **overrides) -> SensorSpec:
    si = silicon_qe(wavelengths) * ir_cut(wavelengths)
    params = dict(name="mono", cfa=CfaPattern(np.zeros((1, 1), dtype=int), ("Y",)), wavelengths=wavelengths,
                  qe=si[None, :])
    params.update(overrides)
    return SensorSpec(**params)


BUILTIN = {
    "bayer": bayer_spec,
    "rgbw": rgbw_spec,
    "bayer-grbg": rgbw_matched_bayer,
    "rgbnir": rgbnir_spec,
    "bayer-nir": rgbnir_matched_bayer,
    "mono": mono_spec,
}


def builtin_spec(name: str, **overrides) -> SensorSpec:
    try:
        return BUILTIN[name](**overrides)
    except KeyError:
        raise ValueError(f"unknown sensor {name!r}; choose from {sorted(BUILTIN)}") from None


def default_saturation_cases(cfa: CfaPattern) -> tuple:
    """Per-design saturation classes.

    A clear pixel saturates first and green next, so RGBW gets
    {none, W, W+G}; other designs only separate saturated from unsaturated.
    """
    if cfa.n_channels == 1:
        return (frozenset(),)
    if "W" in cfa.channel_names and "G" in cfa.channel_names:
        w, g = cfa.channel_index("W"), cfa.channel_index("G")
        return (frozenset(), frozenset({w}), frozenset({w, g}))
    return (frozenset(), ANY)


def default_class_config(spec_or_cfa, **overrides) -> ClassConfig:
    cfa = spec_or_cfa.cfa if isinstance(spec_or_cfa, SensorSpec) else spec_or_cfa
    params = dict(n_pixel_types=cfa.n_pixel_types, saturation_cases=default_saturation_cases(cfa))
    params.update(overrides)
    return ClassConfig(**params)

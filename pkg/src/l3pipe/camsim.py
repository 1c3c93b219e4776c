"""Simulation of aligned (sensor, target) image pairs from spectral scenes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import colorimetry
from .core import ConfigurationError, SensorImage, SensorSpec, SpectralImage, TargetImage
from .sensors import VISIBLE

SCENE_KINDS = ("macbeth", "slanted-edge", "gradients", "noise", "faces")

# Radiance (photons s^-1 nm^-1 m^-2 sr^-1) of a perfect white at 560 nm.
DEFAULT_RADIANCE = 4.0e15
NOISE_SPECTRA = 24


@dataclass(frozen=True)
class OpticsSpec:
    f_number: float

    def __post_init__(self):
        if self.f_number <= 0:
            raise ValueError("f-number must be positive")


@dataclass(frozen=True)
class SceneRecipe:
    kind: str
    size: int = 128
    illuminant: str = "D65"
    seed: int = 0
    radiance: float = DEFAULT_RADIANCE
    wavelengths: tuple = tuple(VISIBLE)
    angle_deg: float = 5.0
    dynamic_range: float = 3.0

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; choose from {SCENE_KINDS}")
        if self.size < 16:
            raise ValueError("scenes must be at least 16 pixels on a side")
        if self.radiance <= 0:
            raise ValueError("radiance scale must be positive")


# --- reflectance spectra ---------------------------------------------------

def _rise(wl, lo, hi, center, width):
    return lo + (hi - lo) / (1.0 + np.exp(-(wl - center) / width))


def _bump(wl, peak, center, sigma):
    return peak * np.exp(-0.5 * ((wl - center) / sigma) ** 2)


def chart_reflectances(wavelengths) -> np.ndarray:
    """24 smooth reflectances laid out like the Macbeth ColorChecker (row-major).

    Analytic approximations of the chart's hues, not measured data.
    """
    wl = np.asarray(wavelengths, dtype=np.float64)
    r = [
        _rise(wl, 0.06, 0.24, 610, 40),                                       # dark skin
        _rise(wl, 0.20, 0.62, 590, 40),                                       # light skin
        _rise(wl, 0.30, 0.09, 510, 35) + _bump(wl, 0.03, 700, 60),            # blue sky
        0.05 + _bump(wl, 0.10, 550, 30) + _rise(wl, 0, 0.35, 720, 15),        # foliage
        0.10 + _bump(wl, 0.18, 440, 35) + _rise(wl, 0, 0.22, 650, 25),        # blue flower
        0.08 + _bump(wl, 0.42, 500, 55),                                      # bluish green
        _rise(wl, 0.05, 0.62, 585, 15),                                       # orange
        _rise(wl, 0.42, 0.06, 490, 18) + _rise(wl, 0, 0.08, 680, 20),         # purplish blue
        0.06 + _bump(wl, 0.06, 420, 25) + _rise(wl, 0, 0.52, 600, 12),        # moderate red
        0.05 + _bump(wl, 0.12, 420, 30) + _rise(wl, 0, 0.32, 640, 20),        # purple
        0.05 + _bump(wl, 0.52, 565, 55),                                      # yellow green
        _rise(wl, 0.05, 0.70, 560, 15),                                       # orange yellow
        _rise(wl, 0.32, 0.05, 480, 15),                                       # blue
        0.05 + _bump(wl, 0.32, 530, 35),                                      # green
        _rise(wl, 0.04, 0.60, 605, 10),                                       # red
        _rise(wl, 0.05, 0.80, 535, 15),                                       # yellow
        0.08 + _bump(wl, 0.36, 420, 30) + _rise(wl, 0, 0.52, 610, 15),        # magenta
        _rise(wl, 0.46, 0.05, 560, 20),                                       # cyan
    ]
    r += [np.full_like(wl, v) for v in (0.90, 0.59, 0.36, 0.19, 0.09, 0.031)]
    return np.clip(np.stack(r), 0.0, 1.0)


def random_reflectances(rng: np.random.Generator, wavelengths, n: int) -> np.ndarray:
    """Smooth random reflectances: logistic edges and Gaussian bumps on a base level.

    Amplitudes are large enough that a good share of the samples are as
    saturated as chart colours.
    """
    wl = np.asarray(wavelengths, dtype=np.float64)
    out = np.empty((n, len(wl)))
    for i in range(n):
        r = np.full_like(wl, rng.uniform(0.03, 0.2))
        for _ in range(rng.integers(1, 4)):
            amp = rng.uniform(0.5, 0.95) * rng.choice((-1.0, 1.0))
            if rng.random() < 0.5:
                r += amp / (1.0 + np.exp(-(wl - rng.uniform(420, 720)) / rng.uniform(6, 30)))
            else:
                r += _bump(wl, amp, rng.uniform(380, 1000), rng.uniform(20, 90))
        out[i] = np.clip(r, 0.02, 0.95)
    return out


def _smooth_field(rng, shape, sigma):
    f = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return f / (f.std() + 1e-12)


def _edge_coverage(size, angle_deg, oversample=16):
    """Fraction of each pixel lying right of a line through the image centre."""
    c = (size - 1) / 2
    sub = (np.arange(oversample) + 0.5) / oversample - 0.5
    ys = (np.arange(size)[:, None] + sub[None, :]).ravel()
    xs = (np.arange(size)[:, None] + sub[None, :]).ravel()
    inside = xs[None, :] > c + (ys[:, None] - c) * np.tan(np.deg2rad(angle_deg))
    cov = inside.reshape(size, oversample, size, oversample).mean(axis=(1, 3))
    return cov


def _reflectance_map(recipe: SceneRecipe, wl: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(recipe.seed)
    n = recipe.size
    if recipe.kind == "macbeth":
        refl = chart_reflectances(wl)
        row = (np.arange(n) * 4) // n
        col = (np.arange(n) * 6) // n
        return refl[row[:, None] * 6 + col[None, :]]
    if recipe.kind == "slanted-edge":
        cov = _edge_coverage(n, recipe.angle_deg)
        dark, bright = 0.1, 0.8
        return np.broadcast_to((dark + (bright - dark) * cov)[..., None], (n, n, len(wl))).copy()
    if recipe.kind == "gradients":
        corners = random_reflectances(rng, wl, 4)
        t = np.linspace(0.0, 1.0, n)
        u, v = t[None, :, None], t[:, None, None]
        refl = ((1 - u) * (1 - v) * corners[0] + u * (1 - v) * corners[1]
                + (1 - u) * v * corners[2] + u * v * corners[3])
        ramp = (np.arange(n)[None, :] + np.arange(n)[:, None]) / (2 * n - 2)
        if rng.random() < 0.5:
            ramp = ramp[:, ::-1]
        return refl * (10.0 ** (recipe.dynamic_range * (ramp - 1.0)))[..., None]
    if recipe.kind == "noise":
        k = NOISE_SPECTRA
        spectra = random_reflectances(rng, wl, k)
        fields = np.stack([_smooth_field(rng, (n, n), n / 5) for _ in range(k)])
        labels = fields.argmax(axis=0)
        gain = 10.0 ** (-recipe.dynamic_range * rng.random(k))
        texture = np.clip(1.0 + 0.03 * _smooth_field(rng, (n, n), 1.0), 0.0, None)
        return spectra[labels] * (gain[labels] * texture)[..., None]
    # faces: skin-like ellipses over a textured background, smoothly shaded
    background = random_reflectances(rng, wl, 1)[0]
    refl = np.broadcast_to(background, (n, n, len(wl))).copy()
    yy, xx = np.mgrid[0:n, 0:n]
    for _ in range(3):
        skin = _rise(wl, rng.uniform(0.05, 0.2), rng.uniform(0.35, 0.7), rng.uniform(570, 610), rng.uniform(25, 45))
        cy, cx = rng.uniform(0.2, 0.8, size=2) * n
        ry, rx = rng.uniform(0.12, 0.25) * n, rng.uniform(0.09, 0.18) * n
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        refl[inside] = skin
    shade = 10.0 ** (0.5 * recipe.dynamic_range * (_smooth_field(rng, (n, n), n / 6) * 0.3 - 0.5))
    return refl * shade[..., None]


def generate_scene(recipe: SceneRecipe) -> SpectralImage:
    """Deterministic synthetic radiance cube for ``recipe``."""
    wl = np.asarray(recipe.wavelengths, dtype=np.float64)
    illum = colorimetry.illuminant_spd(recipe.illuminant, wl) * recipe.radiance
    refl = _reflectance_map(recipe, wl)
    return SpectralImage(refl * illum, wl, illum)


# --- optics ----------------------------------------------------------------

def diffraction_cutoff(wavelength_nm, f_number) -> np.ndarray:
    """Incoherent cutoff frequency 1 / (lambda * N) in cycles/mm."""
    return 1.0 / (np.asarray(wavelength_nm, dtype=np.float64) * 1e-6 * f_number)


def diffraction_otf(rho) -> np.ndarray:
    """Circular-aperture OTF at normalized frequency rho = f / f_c."""
    rho = np.clip(np.abs(np.asarray(rho, dtype=np.float64)), 0.0, 1.0)
    return (2 / np.pi) * (np.arccos(rho) - rho * np.sqrt(1.0 - rho**2))


# Beyond this ratio of cutoff to sampling frequency the point-sampled PSF is a delta.
_IDENTITY_RATIO = 8.0


def sampled_otf(shape, pixel_size_um: float, wavelength_nm: float, f_number: float) -> np.ndarray:
    """OTF of the diffraction PSF sampled on the pixel grid (rfft2 layout).

    Point sampling folds the continuous OTF replicas spaced by the sampling
    frequency onto the grid; summing them keeps the spatial kernel a
    non-negative Airy sample even when the cutoff exceeds Nyquist.
    """
    h, w = shape
    pitch_mm = pixel_size_um * 1e-3
    fs = 1.0 / pitch_mm
    fc = float(diffraction_cutoff(wavelength_nm, f_number))
    if fc > _IDENTITY_RATIO * fs:
        return np.ones((h, w // 2 + 1))
    fy = np.fft.fftfreq(h, d=pitch_mm)[:, None]
    fx = np.fft.rfftfreq(w, d=pitch_mm)[None, :]
    k = int(np.ceil(fc / fs)) + 1
    otf = np.zeros((h, w // 2 + 1))
    dc = 0.0
    for ky in range(-k, k + 1):
        for kx in range(-k, k + 1):
            otf += diffraction_otf(np.hypot(fy + ky * fs, fx + kx * fs) / fc)
            dc += float(diffraction_otf(np.hypot(ky * fs, kx * fs) / fc))
    return otf / dc


def apply_optics(scene: SpectralImage, optics: OpticsSpec, pixel_size_um: float) -> SpectralImage:
    """Blur every wavelength plane by the diffraction-limited lens (periodic boundaries)."""
    data = scene.data
    spectrum = np.fft.rfft2(data, axes=(0, 1))
    for i, wl in enumerate(scene.wavelengths):
        spectrum[:, :, i] *= sampled_otf(data.shape[:2], pixel_size_um, wl, optics.f_number)
    out = np.fft.irfft2(spectrum, s=data.shape[:2], axes=(0, 1))
    np.maximum(out, 0.0, out=out)
    return SpectralImage(out, scene.wavelengths, scene.illuminant)


# --- sensor ----------------------------------------------------------------

def _qe_on_grid(spec: SensorSpec, wavelengths: np.ndarray) -> np.ndarray:
    lo, hi = spec.wavelengths[0], spec.wavelengths[-1]
    if wavelengths[0] > lo + 1e-9 or wavelengths[-1] < hi - 1e-9:
        raise ConfigurationError(
            f"scene covers {wavelengths[0]:g}-{wavelengths[-1]:g} nm but the sensor QE spans {lo:g}-{hi:g} nm"
        )
    return np.stack([np.interp(wavelengths, spec.wavelengths, q, left=0.0, right=0.0) for q in spec.qe])


def mean_electrons(irradiance: SpectralImage, spec: SensorSpec) -> np.ndarray:
    """Expected photoelectrons per pixel (noise free, before clipping)."""
    wl = irradiance.wavelengths
    qe = _qe_on_grid(spec, wl) * colorimetry.band_widths(wl)[None, :]
    per_channel = irradiance.data @ qe.T
    per_channel *= spec.exposure_s * spec.pixel_area_m2
    mosaic = spec.cfa.mosaic(irradiance.height, irradiance.width)
    return np.take_along_axis(per_channel, mosaic[..., None], axis=2)[..., 0]


def _row_rng(seed: int, row: int) -> np.random.Generator:
    # Counter-based stream per row: results do not depend on which worker reads which row.
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1), counter=[0, 0, 0, row]))


def _readout(mean_e: np.ndarray, spec: SensorSpec, noise: bool, seed: int, rows: range):
    values = np.empty((len(rows), mean_e.shape[1]))
    saturated = np.empty_like(values, dtype=bool)
    levels = 2**spec.bits - 1
    for i, y in enumerate(rows):
        e = mean_e[y]
        if noise:
            rng = _row_rng(seed, y)
            e = rng.poisson(e).astype(np.float64)
        clipped = e >= spec.well_capacity
        e = np.minimum(e, spec.well_capacity)
        if noise and spec.read_noise_e > 0:
            e = e + rng.normal(0.0, spec.read_noise_e, size=e.shape)
        v = e * spec.analog_gain / spec.well_capacity
        sat = clipped | (v >= 1.0)
        v = np.round(np.clip(v, 0.0, 1.0) * levels) / levels
        v[sat] = 1.0
        values[i] = v
        saturated[i] = sat
    return values, saturated


def simulate_sensor(irradiance: SpectralImage, spec: SensorSpec, noise: bool = True, seed: int = 0,
                    workers: int = 1) -> SensorImage:
    """Photon capture, shot and read noise, full-well clipping and quantization."""
    mean_e = mean_electrons(irradiance, spec)
    h = mean_e.shape[0]
    if workers <= 1:
        values, saturated = _readout(mean_e, spec, noise, seed, range(h))
    else:
        chunks = [range(a, min(a + 16, h)) for a in range(0, h, 16)]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda r: _readout(mean_e, spec, noise, seed, r), chunks))
        values = np.concatenate([p[0] for p in parts])
        saturated = np.concatenate([p[1] for p in parts])
    return SensorImage(values, saturated, spec)


# --- targets ---------------------------------------------------------------

def target_scale(spec: SensorSpec) -> float:
    """Factor from the tristimulus integral of irradiance to target units.

    Y = 1 when an ideal detector with the luminosity function as its QE
    would collect a full well in this sensor's pixel and exposure.
    """
    return spec.exposure_s * spec.pixel_area_m2 / spec.well_capacity


def _check_visible(wl):
    if wl[0] > 400 + 1e-9 or wl[-1] < 700 - 1e-9:
        raise ConfigurationError("targets need scene wavelengths covering 400-700 nm")


def scene_white(scene: SpectralImage, spec: SensorSpec) -> np.ndarray:
    """Target-space XYZ of a perfect white under the scene light (D65 at Y = 1 if unknown)."""
    if scene.illuminant is None:
        return colorimetry.d65_white()
    _check_visible(scene.wavelengths)
    return colorimetry.spectrum_to_xyz(scene.illuminant, scene.wavelengths) * target_scale(spec)


def reference_white(scene: SpectralImage, spec: SensorSpec) -> np.ndarray:
    """Scene-white chromaticity at Y = 1; the white point used for sRGB and CIELAB targets."""
    w = scene_white(scene, spec)
    return w / w[1]


def compute_target(scene: SpectralImage, space: str, spec: SensorSpec) -> TargetImage:
    """Ideal colour of every pixel of an (already blurred) scene, on the sensor grid."""
    _check_visible(scene.wavelengths)
    xyz = colorimetry.spectrum_to_xyz(scene.data, scene.wavelengths) * target_scale(spec)
    white = reference_white(scene, spec)
    return TargetImage(colorimetry.from_xyz(xyz, space, white), space, white)


def set_light_level(scene: SpectralImage, spec: SensorSpec, level: float) -> SpectralImage:
    """Rescale radiance so a perfect white in the scene has target luminance ``level``."""
    if scene.illuminant is None:
        raise ConfigurationError("scene has no illuminant; cannot set its light level")
    return scene.scaled(level / scene_white(scene, spec)[1])


def simulate_pair(scene: SpectralImage, spec: SensorSpec, space: str = "xyz", noise: bool = True,
                  seed: int = 0, workers: int = 1) -> tuple[SensorImage, TargetImage]:
    """Pixel-aligned sensor capture and target through the sensor's own optics."""
    irradiance = apply_optics(scene, OpticsSpec(spec.f_number), spec.pixel_size_um)
    sensor = simulate_sensor(irradiance, spec, noise=noise, seed=seed, workers=workers)
    return sensor, compute_target(irradiance, space, spec)

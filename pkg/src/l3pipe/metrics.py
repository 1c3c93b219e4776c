"""Colour accuracy and spatial resolution metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import colorimetry
from .core import L3Error, TargetImage

log = logging.getLogger(__name__)


class NoEdgeError(L3Error):
    pass


def xyz_to_lab(xyz, white) -> np.ndarray:
    """CIE 1976 L*a*b*; negative XYZ is clamped to zero (and logged)."""
    lab, negative = colorimetry.xyz_to_lab_array(xyz, white)
    if negative:
        log.debug("clamped %d negative XYZ values before CIELAB conversion", negative)
    return lab


def _as_lab(image, white) -> np.ndarray:
    if isinstance(image, TargetImage):
        if image.space == "lab":
            # re-reference to the evaluation white
            xyz = colorimetry.lab_to_xyz(image.data, image.white)
        else:
            xyz = colorimetry.to_xyz(image.data, image.space, image.white)
        return xyz_to_lab(xyz, white)
    return xyz_to_lab(np.asarray(image, dtype=np.float64), white)


def _as_xyz(image) -> np.ndarray:
    if isinstance(image, TargetImage):
        return colorimetry.to_xyz(image.data, image.space, image.white)
    return np.asarray(image, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class DeltaEResult:
    map: np.ndarray
    mean: float
    median: float
    p95: float

    def csv_row(self, metric: str) -> str:
        return f"{metric},{self.mean:.6f},{self.median:.6f},{self.p95:.6f}"


def _summarize(de: np.ndarray) -> DeltaEResult:
    return DeltaEResult(de, float(de.mean()), float(np.median(de)), float(np.percentile(de, 95)))


def delta_e_map(a, b, white) -> DeltaEResult:
    """Per-pixel CIE 1976 colour difference between two images (TargetImages or XYZ arrays)."""
    sa = a.data.shape if isinstance(a, TargetImage) else np.shape(a)
    sb = b.data.shape if isinstance(b, TargetImage) else np.shape(b)
    if sa != sb:
        raise ValueError(f"image shapes differ: {sa} vs {sb}")
    la, lb = _as_lab(a, white), _as_lab(b, white)
    return _summarize(np.sqrt(np.sum((la - lb) ** 2, axis=-1)))


# --- S-CIELAB ----------------------------------------------------------------

XYZ_TO_OPPONENT = np.array([
    [0.2787336, 0.7218031, -0.1065520],
    [-0.4487736, 0.2898056, -0.0771569],
    [0.0859513, -0.5899859, 0.5011089],
])

# (spread in degrees, weight) per Gaussian, for luminance, red-green, blue-yellow.
SCIELAB_KERNELS = (
    ((0.05, 1.00327), (0.225, 0.114416), (7.0, -0.117686)),
    ((0.0685, 0.616725), (0.826, 0.383275)),
    ((0.0920, 0.567885), (0.6451, 0.432115)),
)


def samples_per_degree(dpi: float, distance_m: float) -> float:
    """Display pixels per degree of visual angle at the given viewing distance."""
    inches_per_degree = 2 * distance_m * math.tan(math.radians(0.5)) / 0.0254
    return dpi * inches_per_degree


def _gauss_1d(spread_px: float, half: int) -> np.ndarray:
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-((x / spread_px) ** 2))
    return g / g.sum()


def _filter_channel(plane: np.ndarray, kernels, spd: float) -> np.ndarray:
    # Support is one degree, clipped to the image; each Gaussian is renormalized.
    half = max(1, int(math.ceil(spd / 2)))
    half = min(half, max(plane.shape) - 1, max(1, min(plane.shape) - 1))
    out = np.zeros_like(plane)
    for spread, weight in kernels:
        g = _gauss_1d(max(spread * spd, 1e-6), half)
        f = ndimage.convolve1d(plane, g, axis=0, mode="reflect")
        f = ndimage.convolve1d(f, g, axis=1, mode="reflect")
        out += weight * f
    return out


def scielab_filter(xyz: np.ndarray, spd: float) -> np.ndarray:
    opp = np.asarray(xyz, dtype=np.float64) @ XYZ_TO_OPPONENT.T
    filtered = np.stack([_filter_channel(opp[..., i], SCIELAB_KERNELS[i], spd) for i in range(3)], axis=-1)
    return filtered @ np.linalg.inv(XYZ_TO_OPPONENT).T


def scielab_map(a, b, samples_per_deg: float, white) -> DeltaEResult:
    """Spatial CIELAB: opponent-channel contrast-sensitivity blur, then CIE 1976 difference."""
    if samples_per_deg <= 0:
        raise ValueError("samples per degree must be positive")
    xa, xb = _as_xyz(a), _as_xyz(b)
    if xa.shape != xb.shape:
        raise ValueError(f"image shapes differ: {xa.shape} vs {xb.shape}")
    return delta_e_map(scielab_filter(xa, samples_per_deg), scielab_filter(xb, samples_per_deg), white)


# --- PSNR ----------------------------------------------------------------------

def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); identical inputs give +inf."""
    a = a.data if isinstance(a, TargetImage) else np.asarray(a, dtype=np.float64)
    b = b.data if isinstance(b, TargetImage) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(peak**2 / mse)


# --- slanted edge --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MtfCurve:
    frequencies: np.ndarray  # cycles/mm
    mtf: np.ndarray
    mtf50: float             # cycles/mm
    angle_deg: float
    pitch_mm: float

    @property
    def mtf50_cycles_per_pixel(self) -> float:
        return self.mtf50 * self.pitch_mm


def _row_centroids(img: np.ndarray) -> np.ndarray:
    deriv = np.abs(np.diff(img, axis=1))
    win = np.hamming(deriv.shape[1])
    w = deriv * win
    x = np.arange(deriv.shape[1]) + 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        return (w * x).sum(axis=1) / w.sum(axis=1)


def _first_crossing(freq: np.ndarray, mtf: np.ndarray, level: float = 0.5) -> float:
    below = np.flatnonzero(mtf < level)
    if below.size == 0:
        return float(freq[-1])
    i = below[0]
    if i == 0:
        return float(freq[0])
    f0, f1, m0, m1 = freq[i - 1], freq[i], mtf[i - 1], mtf[i]
    return float(f0 + (m0 - level) * (f1 - f0) / (m0 - m1))


def mtf_slanted_edge(image, roi=None, pixel_size_um: float = 1.0, oversample: int = 4,
                     min_contrast: float = 0.05) -> MtfCurve:
    """Spatial frequency response of a near-vertical edge (ISO 12233 style).

    ``roi`` is (x0, y0, x1, y1) in pixels. The edge is located by a line fit
    to per-row centroids of the gradient; pixels are projected onto the edge
    normal into 1/oversample pixel bins, and the binned edge profile is
    differentiated, Hamming windowed and Fourier transformed.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("slanted-edge MTF needs a single-channel image")
    if roi is not None:
        x0, y0, x1, y1 = roi
        img = img[y0:y1, x0:x1]
    h, w = img.shape
    lo, hi = np.percentile(img, [2, 98])
    if hi <= 0 or (hi - lo) / max(abs(hi), 1e-300) < min_contrast:
        raise NoEdgeError("region has no edge with sufficient contrast")

    cent = _row_centroids(img)
    rows = np.arange(h)
    ok = np.isfinite(cent)
    if ok.sum() < 3:
        raise NoEdgeError("too few rows cross the edge")
    slope, offset = np.polyfit(rows[ok], cent[ok], 1)
    angle = math.degrees(math.atan(slope))
    cos_t = math.cos(math.atan(slope))

    yy, xx = np.mgrid[0:h, 0:w]
    dist = (xx - (offset + slope * yy)) * cos_t
    bins = np.floor(dist * oversample).astype(np.int64)
    bins -= bins.min()
    nbins = bins.max() + 1
    sums = np.bincount(bins.ravel(), img.ravel(), nbins)
    counts = np.bincount(bins.ravel(), minlength=nbins)
    filled = counts > 0
    centers = np.arange(nbins)
    esf = np.interp(centers, centers[filled], sums[filled] / counts[filled])

    # keep the well-populated central span (the full-width rows on both sides of the edge)
    span = int((w - 2) * cos_t * oversample) // 2 * 2
    mid = int(np.argmax(np.abs(np.gradient(esf))))
    a = max(0, mid - span // 2)
    b = min(nbins, a + span)
    esf = esf[a:b]

    lsf = np.gradient(esf)
    peak = int(np.argmax(np.abs(lsf)))
    n = len(lsf)
    half = max(peak, n - 1 - peak)
    window = 0.54 + 0.46 * np.cos(np.pi * (np.arange(n) - peak) / max(half, 1))
    lsf = lsf * window

    spectrum = np.abs(np.fft.rfft(lsf))
    if spectrum[0] == 0:
        raise NoEdgeError("edge profile has no net step")
    freq_px = np.fft.rfftfreq(n, d=1.0 / oversample)
    # central difference over two bins attenuates by sinc(2 f / oversample)
    correction = np.sinc(2 * freq_px / oversample)
    correction = np.where(np.abs(correction) < 0.1, 0.1, correction)
    mtf = spectrum / spectrum[0] / correction
    keep = freq_px <= 1.0
    pitch_mm = pixel_size_um * 1e-3
    freq_mm = freq_px[keep] / pitch_mm
    return MtfCurve(freq_mm, mtf[keep], _first_crossing(freq_mm, mtf[keep]), angle, pitch_mm)

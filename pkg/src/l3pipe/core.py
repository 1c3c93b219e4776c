"""Shared domain types: spectral scenes, CFA geometry, sensor images and the class space."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

TARGET_SPACES = ("xyz", "srgb", "lab")
LEVEL_SPACINGS = ("linear", "log")


class L3Error(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(L3Error):
    """Inputs are individually valid but inconsistent with each other."""


class MissingClassError(L3Error):
    pass


class MissingDataError(L3Error):
    pass


class InsufficientDataError(L3Error):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    """Read-only view; the caller's array keeps its own flags."""
    v = a.view()
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class SpectralImage:
    """Scene radiance cube of shape (height, width, n_wavelengths).

    ``illuminant`` is the radiance spectrum of a perfect white reflector under
    the scene light, when known; it defines the scene white point.
    """

    data: np.ndarray
    wavelengths: np.ndarray
    illuminant: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError("spectral data must be (height, width, n_wavelengths)")
        if wl.ndim != 1 or len(wl) < 2 or np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing with at least 2 samples")
        if data.shape[2] != len(wl):
            raise ValueError(f"{data.shape[2]} planes but {len(wl)} wavelengths")
        if np.any(data < 0) or not np.all(np.isfinite(data)):
            raise ValueError("radiance must be finite and non-negative")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "wavelengths", _readonly(wl))
        if self.illuminant is not None:
            ill = np.asarray(self.illuminant, dtype=np.float64)
            if ill.shape != wl.shape:
                raise ValueError("illuminant must be sampled on the scene wavelengths")
            object.__setattr__(self, "illuminant", _readonly(ill))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def scaled(self, k: float) -> SpectralImage:
        ill = None if self.illuminant is None else self.illuminant * k
        return SpectralImage(self.data * k, self.wavelengths, ill)


@dataclass(frozen=True, eq=False)
class CfaPattern:
    """Repeating block of channel indices.

    Pixel *types* are block cells (a Bayer block has four types: R, G1, G2, B),
    while *channels* are the distinct spectral filters named in ``channel_names``.
    """

    block: np.ndarray
    channel_names: tuple[str, ...]

    def __post_init__(self):
        block = np.array(self.block, dtype=np.int64)
        if block.ndim != 2 or block.size == 0:
            raise ValueError("CFA block must be a non-empty 2-D array")
        names = tuple(self.channel_names)
        if block.min() < 0 or block.max() >= len(names):
            raise ValueError("CFA block references a channel outside channel_names")
        object.__setattr__(self, "block", _readonly(block))
        object.__setattr__(self, "channel_names", names)

    @property
    def block_height(self) -> int:
        return self.block.shape[0]

    @property
    def block_width(self) -> int:
        return self.block.shape[1]

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_pixel_types(self) -> int:
        return self.block.size

    def channel_index(self, name: str) -> int:
        return self.channel_names.index(name)

    def pixel_type_at(self, x, y):
        return (np.asarray(y) % self.block_height) * self.block_width + np.asarray(x) % self.block_width

    def channel_of_type(self, pixel_type: int) -> int:
        return int(self.block.flat[pixel_type])

    def type_origin(self, pixel_type: int) -> tuple[int, int]:
        """(x, y) of the block cell for ``pixel_type``."""
        y, x = divmod(pixel_type, self.block_width)
        return x, y

    def mosaic(self, height: int, width: int) -> np.ndarray:
        """Channel index for every pixel of a height x width sensor."""
        reps = (-(-height // self.block_height), -(-width // self.block_width))
        return np.tile(self.block, reps)[:height, :width]

    def type_mosaic(self, height: int, width: int) -> np.ndarray:
        cells = np.arange(self.block.size).reshape(self.block.shape)
        reps = (-(-height // self.block_height), -(-width // self.block_width))
        return np.tile(cells, reps)[:height, :width]

    def patch_channels(self, pixel_type: int, patch_size: int) -> np.ndarray:
        """Channel layout (patch_size x patch_size) of a patch centred on ``pixel_type``."""
        x0, y0 = self.type_origin(pixel_type)
        r = patch_size // 2
        ys = (np.arange(-r, r + 1) + y0) % self.block_height
        xs = (np.arange(-r, r + 1) + x0) % self.block_width
        return self.block[np.ix_(ys, xs)]

    def same_layout(self, other: CfaPattern) -> bool:
        return self.channel_names == other.channel_names and np.array_equal(self.block, other.block)


def channel_at(cfa: CfaPattern, x: int, y: int) -> int:
    if x < 0 or y < 0:
        raise ValueError("sensor coordinates must be non-negative")
    return int(cfa.block[y % cfa.block_height, x % cfa.block_width])


@dataclass(frozen=True, eq=False)
class SensorSpec:
    """Optics + pixel + readout parameters of a simulated camera.

    ``qe`` has one row per CFA channel, sampled on ``wavelengths`` (nm).
    ``conversion_gain`` only converts electrons to volts; the normalized
    response is electrons * analog_gain / well_capacity.
    """

    name: str
    cfa: CfaPattern
    wavelengths: np.ndarray
    qe: np.ndarray
    pixel_size_um: float = 1.4
    f_number: float = 4.0
    exposure_s: float = 0.01
    well_capacity: float = 9000.0
    read_noise_e: float = 3.0
    conversion_gain: float = 1.0e-4
    bits: int = 10
    analog_gain: float = 1.0

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        qe = np.atleast_2d(np.asarray(self.qe, dtype=np.float64))
        if wl.ndim != 1 or len(wl) < 2 or np.any(np.diff(wl) <= 0):
            raise ValueError("QE wavelengths must be strictly increasing")
        if qe.shape != (self.cfa.n_channels, len(wl)):
            raise ValueError(f"qe must be {self.cfa.n_channels} x {len(wl)}, got {qe.shape}")
        if np.any(qe < 0) or np.any(qe > 1):
            raise ValueError("quantum efficiency must lie in [0, 1]")
        if self.pixel_size_um <= 0 or self.f_number <= 0 or self.well_capacity <= 0:
            raise ValueError("pixel size, f-number and well capacity must be positive")
        if self.exposure_s <= 0 or self.analog_gain <= 0 or self.read_noise_e < 0:
            raise ValueError("exposure and gain must be positive, read noise non-negative")
        if not 8 <= int(self.bits) <= 16:
            raise ValueError("bit depth must be in [8, 16]")
        object.__setattr__(self, "wavelengths", _readonly(wl))
        object.__setattr__(self, "qe", _readonly(qe))
        object.__setattr__(self, "bits", int(self.bits))

    @property
    def pixel_area_m2(self) -> float:
        return (self.pixel_size_um * 1e-6) ** 2

    @property
    def quantization_step(self) -> float:
        return 1.0 / (2**self.bits - 1)

    def replace(self, **changes) -> SensorSpec:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return SensorSpec(**fields)


@dataclass(frozen=True, eq=False)
class SensorImage:
    values: np.ndarray
    saturated: np.ndarray
    spec: SensorSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        s = np.asarray(self.saturated, dtype=bool)
        if v.ndim != 2 or s.shape != v.shape:
            raise ValueError("values and saturation mask must be matching 2-D arrays")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("normalized responses must lie in [0, 1]")
        if np.any(v[s] != 1.0):
            raise ValueError("saturated pixels must read exactly 1.0")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "saturated", _readonly(s))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def cfa(self) -> CfaPattern:
        return self.spec.cfa


@dataclass(frozen=True, eq=False)
class TargetImage:
    """Three-channel image in ``space``; ``white`` is the XYZ white point it refers to."""

    data: np.ndarray
    space: str
    white: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if self.space not in TARGET_SPACES:
            raise ValueError(f"unknown target space {self.space!r}")
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValueError("target images carry exactly three channels")
        w = np.asarray(self.white, dtype=np.float64).reshape(3)
        object.__setattr__(self, "data", _readonly(d))
        object.__setattr__(self, "white", _readonly(w))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# A saturation case is the set of channel indices treated as saturated, or ANY,
# which matches every patch with at least one saturated pixel.
ANY = "any"


def parse_saturation_case(text: str, channel_names: Sequence[str]):
    text = text.strip()
    if text == "none":
        return frozenset()
    if text == ANY:
        return ANY
    try:
        return frozenset(channel_names.index(n) for n in text.split("+"))
    except ValueError as exc:
        raise ValueError(f"unknown channel in saturation case {text!r}") from exc


def format_saturation_case(case, channel_names: Sequence[str]) -> str:
    if case == ANY:
        return ANY
    if not case:
        return "none"
    return "+".join(channel_names[c] for c in sorted(case))


def level_bounds(n_levels: int, spacing: str = "log", floor: float = 1e-3) -> np.ndarray:
    """Upper edges of the response-level bins; the last edge is exactly 1."""
    if n_levels < 1:
        raise ValueError("need at least one level")
    if not 0 < floor < 1:
        raise ValueError("log floor must lie in (0, 1)")
    if n_levels == 1:
        return np.array([1.0])
    if spacing == "linear":
        edges = np.arange(1, n_levels + 1) / n_levels
    elif spacing == "log":
        edges = floor * (1.0 / floor) ** (np.arange(n_levels) / (n_levels - 1))
    else:
        raise ValueError(f"unknown level spacing {spacing!r}")
    edges[-1] = 1.0
    return edges


def level_centers(edges: np.ndarray, spacing: str) -> np.ndarray:
    """Abscissa used for curves across level bins (log response for log spacing)."""
    edges = np.asarray(edges, dtype=np.float64)
    n = len(edges)
    if n == 1:
        return np.array([0.5])
    if spacing == "log":
        le = np.log(edges)
        step = le[1] - le[0]
        return np.concatenate([[le[0] - step / 2], (le[1:] + le[:-1]) / 2])
    lower = np.concatenate([[0.0], edges[:-1]])
    return (lower + edges) / 2


@dataclass(frozen=True, eq=False)
class ClassConfig:
    """Definition of the class space.

    ``level_bounds`` defaults to the edges implied by ``n_levels``, ``spacing``
    and ``level_floor``.
    """

    n_pixel_types: int
    patch_size: int = 5
    n_levels: int = 50
    spacing: str = "log"
    level_floor: float = 1e-3
    contrast_split: bool = False
    contrast_threshold: float = 0.05
    saturation_cases: tuple = (frozenset(),)
    level_bounds: np.ndarray | None = None

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ValueError("patch size must be a positive odd number")
        if self.n_pixel_types < 1:
            raise ValueError("need at least one pixel type")
        if self.spacing not in LEVEL_SPACINGS:
            raise ValueError(f"unknown level spacing {self.spacing!r}")
        edges = self.level_bounds
        if edges is None:
            edges = level_bounds(self.n_levels, self.spacing, self.level_floor)
        edges = np.asarray(edges, dtype=np.float64)
        if len(edges) != self.n_levels or np.any(np.diff(edges) <= 0) or edges[-1] != 1.0:
            raise ValueError("level bounds must be strictly increasing, end at 1.0, one per level")
        cases = tuple(c if c == ANY else frozenset(c) for c in self.saturation_cases)
        if frozenset() not in cases:
            raise ValueError("saturation cases must include the unsaturated case")
        if len(set(cases)) != len(cases):
            raise ValueError("duplicate saturation case")
        object.__setattr__(self, "level_bounds", _readonly(edges))
        object.__setattr__(self, "saturation_cases", cases)

    @property
    def n_contrast(self) -> int:
        return 2 if self.contrast_split else 1

    @property
    def n_saturation(self) -> int:
        return len(self.saturation_cases)

    @property
    def n_classes(self) -> int:
        return self.n_pixel_types * self.n_levels * self.n_contrast * self.n_saturation

    @property
    def patch_len(self) -> int:
        return self.patch_size**2

    @property
    def radices(self) -> tuple[int, int, int, int]:
        return (self.n_pixel_types, self.n_levels, self.n_contrast, self.n_saturation)

    def centers(self) -> np.ndarray:
        return level_centers(self.level_bounds, self.spacing)

    def replace(self, **changes) -> ClassConfig:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if any(k in changes for k in ("n_levels", "spacing", "level_floor")):
            fields["level_bounds"] = None
        fields.update(changes)
        return ClassConfig(**fields)

    def same_as(self, other: ClassConfig) -> bool:
        return all(
            getattr(self, k) == getattr(other, k)
            for k in self.__dataclass_fields__
            if k != "level_bounds"
        ) and np.array_equal(self.level_bounds, other.level_bounds)


@dataclass(frozen=True, order=True)
class ClassId:
    encoded: int
    pixel_type: int = field(compare=False)
    level: int = field(compare=False)
    contrast: int = field(compare=False)
    saturation: int = field(compare=False)


def encode_class(pixel_type: int, level: int, contrast: int, saturation: int, config: ClassConfig) -> ClassId:
    parts = (pixel_type, level, contrast, saturation)
    for name, value, radix in zip(("pixel type", "level", "contrast", "saturation"), parts, config.radices):
        if not 0 <= value < radix:
            raise ValueError(f"{name} index {value} outside [0, {radix})")
    code = 0
    for value, radix in zip(parts, config.radices):
        code = code * radix + int(value)
    return ClassId(code, int(pixel_type), int(level), int(contrast), int(saturation))


def decode_class(encoded: int, config: ClassConfig) -> ClassId:
    if not 0 <= encoded < config.n_classes:
        raise ValueError(f"class {encoded} outside [0, {config.n_classes})")
    rest = int(encoded)
    parts = []
    for radix in reversed(config.radices):
        rest, value = divmod(rest, radix)
        parts.append(value)
    pt, lv, ct, sc = reversed(parts)
    return ClassId(int(encoded), pt, lv, ct, sc)


def all_classes(config: ClassConfig):
    for parts in itertools.product(*(range(r) for r in config.radices)):
        yield encode_class(*parts, config)


@dataclass(frozen=True, eq=False)
class AffineTransform:
    """(patch_len + 1) x n_outputs weights; the last row is the affine offset."""

    weights: np.ndarray
    class_id: ClassId
    sample_count: int = 0
    lam: float | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or not np.all(np.isfinite(w)):
            raise ValueError("transform weights must be a finite 2-D array")
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def spatial(self) -> np.ndarray:
        return self.weights[:-1]

    @property
    def offset(self) -> np.ndarray:
        return self.weights[-1]


@dataclass(frozen=True, eq=False)
class TransformTable:
    config: ClassConfig
    cfa: CfaPattern
    target_space: str
    transforms: Mapping[int, AffineTransform]
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.target_space not in TARGET_SPACES:
            raise ValueError(f"unknown target space {self.target_space!r}")
        if self.cfa.n_pixel_types != self.config.n_pixel_types:
            raise ConfigurationError("class config pixel types do not match the CFA")
        rows = self.config.patch_len + 1
        for code, t in self.transforms.items():
            if t.class_id.encoded != code:
                raise ValueError(f"transform stored under {code} belongs to {t.class_id.encoded}")
            if t.weights.shape[0] != rows:
                raise ValueError(f"class {code}: expected {rows} weight rows, got {t.weights.shape[0]}")
        object.__setattr__(self, "transforms", dict(sorted(self.transforms.items())))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def n_outputs(self) -> int:
        for t in self.transforms.values():
            return t.weights.shape[1]
        return 3

    def is_total(self) -> bool:
        return len(self.transforms) == self.config.n_classes

    def missing(self) -> list[int]:
        return [c for c in range(self.config.n_classes) if c not in self.transforms]

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(weights[n_classes, rows, outputs], present mask, sample counts)."""
        cfg = self.config
        w = np.zeros((cfg.n_classes, cfg.patch_len + 1, self.n_outputs))
        present = np.zeros(cfg.n_classes, dtype=bool)
        counts = np.zeros(cfg.n_classes, dtype=np.int64)
        for code, t in self.transforms.items():
            w[code] = t.weights
            present[code] = True
            counts[code] = t.sample_count
        return w, present, counts

    def with_dense(self, weights: np.ndarray, present: np.ndarray, counts: np.ndarray | None = None,
                   provenance: Mapping | None = None) -> TransformTable:
        """New table from dense arrays; lambdas are carried over for classes that keep a transform."""
        transforms = {}
        for code in np.flatnonzero(present):
            code = int(code)
            old = self.transforms.get(code)
            n = int(counts[code]) if counts is not None else (old.sample_count if old else 0)
            transforms[code] = AffineTransform(
                weights[code], decode_class(code, self.config), n, old.lam if old else None
            )
        prov = self.provenance if provenance is None else provenance
        return TransformTable(self.config, self.cfa, self.target_space, transforms, prov)

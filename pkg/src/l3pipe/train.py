"""Per-class ridge regression from sensor patches to target colours."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .classify import classify_patches, extract_patches
from .core import (
    ANY,
    AffineTransform,
    ClassConfig,
    InsufficientDataError,
    L3Error,
    SensorImage,
    TargetImage,
    TransformTable,
    decode_class,
)

log = logging.getLogger(__name__)

DEFAULT_CAP = 20000


class SingularMatrixError(L3Error):
    pass


class DegenerateFitError(L3Error):
    pass


@dataclass(frozen=True, eq=False)
class ClassDataset:
    code: int
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("design matrix and targets need the same number of rows")

    @property
    def n(self) -> int:
        return self.X.shape[0]


def default_lambda_grid(n: int = 20, lo: float = 1e-8, hi: float = 1e2) -> tuple[float, ...]:
    return tuple(np.logspace(np.log10(lo), np.log10(hi), n))


@dataclass(frozen=True)
class RidgeConfig:
    """``lambda_grid`` is relative: each class multiplies it by tr(X'X)/N.

    ``fixed_lambda`` (absolute) bypasses GCV.
    """

    lambda_grid: tuple = field(default_factory=default_lambda_grid)
    min_samples: int | None = None
    fixed_lambda: float | None = None
    workers: int = 1

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=np.float64)
        if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
            raise ValueError("lambda grid must be non-empty, non-negative and sorted")
        if self.fixed_lambda is not None and self.fixed_lambda < 0:
            raise ValueError("lambda must be non-negative")

    def min_samples_for(self, config: ClassConfig) -> int:
        return self.min_samples if self.min_samples is not None else 4 * (config.patch_len + 1)


# --- solvers ---------------------------------------------------------------

def ridge_solve(X, Y, lam: float) -> np.ndarray:
    """Ridge solution (X'X + lam I)^-1 X'Y.

    Evaluated as the least-squares solution of the stacked system
    [X; sqrt(lam) I] T = [Y; 0] by QR, which avoids squaring the condition
    number of X by forming X'X.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n, p = X.shape
    if lam == 0:
        d = np.linalg.svd(X, compute_uv=False)
        if n < p or d.min() <= d.max() * max(n, p) * np.finfo(float).eps:
            raise SingularMatrixError("X'X is singular; use lambda > 0")
        A, B = X, Y
    else:
        A = np.vstack([X, np.sqrt(lam) * np.eye(p)])
        B = np.vstack([Y, np.zeros((p,) + Y.shape[1:])])
    Q, R = np.linalg.qr(A)
    return solve_triangular(R, Q.T @ B)


class RidgeSVD:
    """Thin SVD of X shared by every lambda."""

    def __init__(self, X):
        X = np.asarray(X, dtype=np.float64)
        self.X = X
        self.U, self.d, self.Vt = np.linalg.svd(X, full_matrices=False)

    def solve(self, Y, lam: float) -> np.ndarray:
        d = self.d
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        if lam == 0 and (d.size == 0 or d.min() <= d.max() * max(self.X.shape) * np.finfo(float).eps):
            raise SingularMatrixError("X is rank deficient; use lambda > 0")
        factor = d / (d**2 + lam)
        return self.Vt.T @ (factor[:, None] * (self.U.T @ np.asarray(Y, dtype=np.float64)))

    def gcv(self, Y, lams) -> np.ndarray:
        """GCV score per lambda (mean over output channels); NaN where undefined."""
        Y = np.asarray(Y, dtype=np.float64)
        n = self.X.shape[0]
        Z = self.U.T @ Y
        d2 = self.d**2
        out = np.full(len(lams), np.nan)
        for i, lam in enumerate(lams):
            shrink = d2 / (d2 + lam) if lam > 0 else (d2 > 0).astype(float)
            dof = shrink.sum()
            denom = (1.0 - dof / n) ** 2
            if dof >= n or denom <= 0:
                continue
            resid = Y - self.U @ (shrink[:, None] * Z)
            rss = np.sum(resid**2, axis=0) / n
            out[i] = np.mean(rss / denom)
        return out


def ridge_solve_svd(X, Y, lam: float) -> np.ndarray:
    """Ridge solution V diag(d / (d^2 + lam)) U'Y."""
    return RidgeSVD(X).solve(Y, lam)


def select_lambda_gcv(X, Y, grid, svd: RidgeSVD | None = None) -> tuple[float, np.ndarray]:
    """Grid lambda minimizing GCV; ties go to the larger lambda."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if np.asarray(X).shape[0] < 2:
        raise ValueError("GCV needs at least two rows")
    svd = svd or RidgeSVD(X)
    curve = svd.gcv(Y, grid)
    if np.all(np.isnan(curve)):
        raise DegenerateFitError("every lambda leaves no residual degrees of freedom")
    best = np.nanmin(curve)
    idx = max(i for i in range(len(grid)) if curve[i] == best)
    return float(grid[idx]), curve


# --- data ------------------------------------------------------------------

def _rows_for_pair(sensor: SensorImage, target: TargetImage, config: ClassConfig):
    if (sensor.height, sensor.width) != (target.height, target.width):
        raise ValueError(
            f"sensor {sensor.width}x{sensor.height} and target {target.width}x{target.height} are not aligned"
        )
    values, saturated = extract_patches(sensor, config.patch_size)
    types = sensor.cfa.type_mosaic(sensor.height, sensor.width).ravel()
    codes = classify_patches(values, saturated, types, sensor.cfa, config)
    X = np.hstack([values, np.ones((len(values), 1))])
    return codes, X, target.data.reshape(-1, target.data.shape[2])


def accumulate(pairs: Sequence[tuple[SensorImage, TargetImage]], config: ClassConfig, cap: int | None = DEFAULT_CAP,
               seed: int = 0) -> dict[int, ClassDataset]:
    """Group every training pixel into its class dataset.

    Classes with more than ``cap`` rows keep a seeded random subset, so the
    result depends only on the inputs and ``seed``.
    """
    if not pairs:
        raise ValueError("no training pairs")
    parts = [_rows_for_pair(s, t, config) for s, t in pairs]
    codes = np.concatenate([p[0] for p in parts])
    X = np.concatenate([p[1] for p in parts])
    Y = np.concatenate([p[2] for p in parts])
    order = np.argsort(codes, kind="stable")
    codes, X, Y = codes[order], X[order], Y[order]
    uniq, starts = np.unique(codes, return_index=True)
    stops = np.append(starts[1:], len(codes))
    out = {}
    for code, a, b in zip(uniq, starts, stops):
        idx = np.arange(a, b)
        if cap is not None and b - a > cap:
            rng = np.random.default_rng([int(seed), int(code)])
            idx = a + np.sort(rng.choice(b - a, size=cap, replace=False))
        out[int(code)] = ClassDataset(int(code), X[idx], Y[idx])
    return out


def excluded_columns(code: int, config: ClassConfig, cfa) -> np.ndarray:
    """Patch positions whose channel is saturated by definition of the class."""
    cid = decode_class(code, config)
    case = config.saturation_cases[cid.saturation]
    if case == ANY or not case:
        return np.zeros(config.patch_len, dtype=bool)
    channels = cfa.patch_channels(cid.pixel_type, config.patch_size).ravel()
    return np.isin(channels, sorted(case))


def fit_class(data: ClassDataset, ridge: RidgeConfig, drop: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Ridge transform for one class; dropped patch positions get zero weight."""
    keep = np.ones(data.X.shape[1], dtype=bool)
    if drop is not None:
        keep[:-1] = ~drop
    X = data.X[:, keep]
    svd = RidgeSVD(X)
    if ridge.fixed_lambda is not None:
        lam = ridge.fixed_lambda
    else:
        scale = np.sum(svd.d**2) / X.shape[0]
        lam, _ = select_lambda_gcv(X, data.Y, np.asarray(ridge.lambda_grid) * scale, svd=svd)
    T = np.zeros((data.X.shape[1], data.Y.shape[1]))
    T[keep] = svd.solve(data.Y, lam)
    return T, lam


def train_from_datasets(datasets: dict[int, ClassDataset], config: ClassConfig, cfa, ridge: RidgeConfig,
                        target_space: str, provenance: dict | None = None) -> TransformTable:
    threshold = ridge.min_samples_for(config)
    codes = sorted(c for c, d in datasets.items() if d.n >= threshold)
    if not codes:
        raise InsufficientDataError(f"no class has the {threshold} samples needed to fit a transform")

    def solve(code):
        return fit_class(datasets[code], ridge, excluded_columns(code, config, cfa))

    if ridge.workers > 1:
        with ThreadPoolExecutor(ridge.workers) as pool:
            results = list(pool.map(solve, codes))
    else:
        results = [solve(c) for c in codes]
    transforms = {
        code: AffineTransform(T, decode_class(code, config), datasets[code].n, lam)
        for code, (T, lam) in zip(codes, results)
    }
    log.info("fitted %d of %d classes (%d below %d samples)", len(codes), config.n_classes,
             len(datasets) - len(codes), threshold)
    return TransformTable(config, cfa, target_space, transforms, provenance or {})


def train_table(pairs: Sequence[tuple[SensorImage, TargetImage]], config: ClassConfig, ridge: RidgeConfig | None = None,
                target_space: str | None = None, seed: int = 0, cap: int | None = DEFAULT_CAP,
                provenance: dict | None = None) -> TransformTable:
    """Fit one affine transform per sufficiently populated class.

    Classes below ``ridge.min_samples`` stay empty; ``priors.interpolate_missing``
    fills them.
    """
    ridge = ridge or RidgeConfig()
    if not pairs:
        raise InsufficientDataError("need at least one training pair")
    cfa = pairs[0][0].cfa
    for s, _ in pairs:
        if not s.cfa.same_layout(cfa):
            raise ValueError("all training sensors must share one CFA")
    space = target_space or pairs[0][1].space
    if any(t.space != space for _, t in pairs):
        raise ValueError("all training targets must be in the same colour space")
    datasets = accumulate(pairs, config, cap=cap, seed=seed)
    prov = {"seed": seed, "pairs": len(pairs), "white": [float(v) for v in pairs[0][1].white]}
    prov.update(provenance or {})
    return train_from_datasets(datasets, config, cfa, ridge, space, prov)

"""Prior knowledge imposed on a learned transform table.

Every operation takes a table and returns a new one. Smoothing,
interpolation and uniformity treat all center pixel types of a
(contrast, saturation) group alike: smoothing and interpolation are one
linear operator along the level axis, uniformity one linear operator across
pixel types at each level. The operators therefore commute with each other
and with symmetry averaging, and the fixed pipeline in :func:`apply_priors`
is idempotent after a single pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .core import MissingDataError, TransformTable

log = logging.getLogger(__name__)

MIN_SMOOTH_BINS = 6
SPLINE_INTERIOR_KNOTS = (1, 3, 7, 15)
NEGLIGIBLE = 1e-20
GAIN_EXPONENTS = (0.0, 1 / 3, 2 / 3, 1.0)
TRUST_FACTOR = 10


def trusted_samples(config) -> int:
    """Sample count above which a class is kept as trained by smoothing."""
    return TRUST_FACTOR * 4 * (config.patch_len + 1)


def _grid(table: TransformTable):
    """Dense weights reshaped to (type, level, contrast, saturation, rows, outputs)."""
    w, present, counts = table.dense()
    shape = table.config.radices
    return (
        w.reshape(shape + w.shape[1:]),
        present.reshape(shape),
        counts.reshape(shape),
    )


def _from_grid(table: TransformTable, w, present, counts) -> TransformTable:
    n = table.config.n_classes
    return table.with_dense(w.reshape((n,) + w.shape[-2:]), present.reshape(n), counts.reshape(n))


# --- symmetry ---------------------------------------------------------------

def _generators(k: int) -> dict[str, np.ndarray]:
    idx = np.arange(k * k).reshape(k, k)
    return {"lr": idx[:, ::-1].ravel(), "ud": idx[::-1, :].ravel(), "transpose": idx.T.ravel()}


def _closure(perms: list[np.ndarray], n: int) -> list[np.ndarray]:
    group = {tuple(range(n))}
    frontier = list(group)
    while frontier:
        new = []
        for g in frontier:
            for p in perms:
                h = tuple(np.asarray(g)[p])
                if h not in group:
                    group.add(h)
                    new.append(h)
        frontier = new
    return [np.asarray(g) for g in sorted(group)]


def _orbits(group: list[np.ndarray]) -> list[np.ndarray]:
    images = np.stack(group)                      # (group element, cell)
    orbits = {tuple(np.unique(images[:, i])) for i in range(images.shape[1])}
    return [np.array(o) for o in sorted(orbits)]


def symmetry_group(cfa, pixel_type: int, patch_size: int) -> tuple[list[str], list[np.ndarray]]:
    """Reflections that leave the patch's channel layout unchanged, and the group they generate."""
    layout = cfa.patch_channels(pixel_type, patch_size).ravel()
    gens = _generators(patch_size)
    names = [name for name, p in gens.items() if np.array_equal(layout[p], layout)]
    return names, _closure([gens[n] for n in names], patch_size * patch_size)


def enforce_symmetry(table: TransformTable, cfa=None) -> TransformTable:
    """Average spatial weights over every reflection the local CFA layout allows."""
    cfa = cfa or table.cfa
    k = table.config.patch_size
    w, present, counts = _grid(table)
    out = w.copy()
    for t in range(table.config.n_pixel_types):
        _, group = symmetry_group(cfa, t, k)
        if len(group) == 1:
            continue
        spatial = w[t, ..., :-1, :]
        # the group average of a cell is the mean over its orbit; computing it once per
        # orbit makes mirrored cells bit-identical
        target = out[t]
        for orbit in _orbits(group):
            target[..., orbit, :] = spatial[..., orbit, :].mean(axis=-2, keepdims=True)
    out[~present] = 0.0
    return _from_grid(table, out, present, counts)


# --- level sources ----------------------------------------------------------

def group_sources(present: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Source level bins (type, level, contrast, saturation) and a per-group "shared" flag.

    A group is shared when some level bin has a transform trained on data
    for every center pixel type; its sources are exactly those bins, the
    same for all types. Otherwise each type keeps its own trained bins.
    Tables without sample counts (hand-built ones) use presence instead.
    """
    trained = present & (counts > 0)
    untrained_group = ~trained.any(axis=(0, 1))
    trained = np.where(untrained_group[None, None], present, trained)
    common = trained.all(axis=0)
    shared = common.any(axis=0)
    src = np.where(shared[None, None], common[None], trained)
    return src, shared


# --- smoothing across levels ------------------------------------------------

def _basis_family(x: np.ndarray) -> list[np.ndarray]:
    """Nested design matrices on x, simplest first."""
    lo, hi = x.min(), x.max()
    u = (x - lo) / (hi - lo) * 2 - 1
    family = [np.vander(u, d + 1, increasing=True) for d in (1, 2, 3)]
    for n_int in SPLINE_INTERIOR_KNOTS:
        inner = np.linspace(-1, 1, n_int + 2)
        knots = np.concatenate([[-1.0] * 3, inner, [1.0] * 3])
        family.append(BSpline.design_matrix(np.clip(u, -1, 1), knots, 3).toarray())
    return [B for B in family if B.shape[1] <= len(x) - 1]


def _candidate_fits(x: np.ndarray, wn: np.ndarray, fit_rows: np.ndarray):
    """(prediction matrix, leverages) of each well-posed weighted fit in the family.

    The prediction matrix maps the values at ``fit_rows`` to fitted values
    at every x; leverages belong to the fit rows.
    """
    sw = np.sqrt(wn[fit_rows])
    n_fit = int(fit_rows.sum())
    out = []
    for B in _basis_family(x):
        if B.shape[1] > n_fit - 1:
            continue
        Q, R = np.linalg.qr(B[fit_rows] * sw[:, None])
        if np.linalg.matrix_rank(R) < B.shape[1]:
            continue
        lev = np.sum(Q**2, axis=1)
        if np.any(lev > 1 - 1e-8):
            continue
        P = B @ np.linalg.solve(R, Q.T) * sw[None, :]      # fitted = P @ y[fit_rows]
        out.append((P, lev))
    return out


def smooth_curves(x, weights, Y, gain=None, exponents=(0.0,), trusted=None, score_on=None) -> np.ndarray:
    """Smooth each column of Y (levels x columns) with the fit of least leave-one-out error.

    Without ``trusted`` every row is replaced by the fit. With a boolean
    ``trusted`` mask the fit uses the trusted rows only and replaces the
    others, so well-trained rows are kept as they are; rows beyond the
    first or last trusted row take that row's values.

    A candidate fits the curves Y * gain**p with one model of the nested
    family for every column; its leave-one-out residuals are scored in
    the units of Y * gain, with columns scaled to unit weighted mean square
    so each coefficient counts equally. Ties within round-off go to the
    earlier candidate. ``score_on`` (levels x k, sharing the gain of Y's
    first column) replaces Y in the scoring when the choice must not depend
    on everything in Y. The result depends on the fitted rows only and
    reproduces them when they already lie in the chosen model, so applying
    it twice changes nothing.
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    gain = np.ones_like(Y) if gain is None else np.broadcast_to(np.asarray(gain, dtype=np.float64), Y.shape)
    fit_rows = np.ones(len(x), dtype=bool) if trusted is None else np.asarray(trusted, dtype=bool)
    replace = np.ones(len(x), dtype=bool) if trusted is None else ~fit_rows
    if fit_rows.sum() < MIN_SMOOTH_BINS or not replace.any():
        return Y.copy()
    wn = weights / weights[fit_rows].sum()
    Yf, gf, wf = Y[fit_rows], gain[fit_rows], wn[fit_rows]
    if score_on is None:
        Sf, sg = Yf, gf
    else:
        Sf = np.asarray(score_on, dtype=np.float64)[fit_rows]
        sg = np.broadcast_to(gf[:, :1], Sf.shape)
    col_scale = np.sum(wf[:, None] * (Sf * sg) ** 2, axis=0)
    live = col_scale > NEGLIGIBLE * col_scale.max(initial=0.0)   # round-off columns carry no shape
    norm = np.zeros_like(col_scale)
    norm[live] = 1 / np.sqrt(col_scale[live])
    fits, scores = [], []
    for P, lev in _candidate_fits(x, wn, fit_rows):
        for p in exponents:
            fits.append(P @ (Yf * gf**p) / gain**p)
            Sp = Sf * sg**p
            loo = (Sp - P[fit_rows] @ Sp) / (1 - lev)[:, None] * sg ** (1 - p) * norm
            scores.append(np.sum(wf[:, None] * loo**2))
    if not fits:
        return Y.copy()
    scores = np.array(scores)
    ok = scores <= scores.min() * (1 + 1e-6) + 1e-20 * max(Sf.shape[1], 1)
    out = Y.copy()
    out[replace] = fits[int(np.argmax(ok))][replace]
    if trusted is not None:
        # beyond the trusted span copy the nearest trusted row rather than extrapolate a curve
        idx = np.flatnonzero(fit_rows)
        below, above = np.arange(len(x)) < idx[0], np.arange(len(x)) > idx[-1]
        out[below] = Y[idx[0]]
        out[above] = Y[idx[-1]]
    return out


def _channel_split(cfa, patch_size: int, n_types: int) -> tuple[np.ndarray, np.ndarray]:
    """(type, channel, k*k) membership masks and per-position channel counts (type, k*k)."""
    layouts = np.stack([cfa.patch_channels(t, patch_size).ravel() for t in range(n_types)])
    member = (layouts[:, None, :] == np.arange(cfa.n_channels)[None, :, None]).astype(np.float64)
    per_pos = np.take_along_axis(member.sum(axis=2), layouts, axis=1)
    return member, per_pos


def smooth_across_levels(table: TransformTable) -> TransformTable:
    """Rebuild sparsely trained level bins from a smooth fit over the well-trained ones.

    A source bin is well trained when every center type of the group has
    at least :func:`trusted_samples` samples there; those bins are kept and
    the remaining source bins are replaced by the fitted curves. Weights are
    split into per-channel sums and deviations from the channel
    mean, and each family of curves gets its own fit: channel sums (one fit
    per input channel and output, shared by the center types), offsets
    (one per output, shared by the center types) and deviations (one per
    center type and output). Fits are weighted by the summed sample
    counts. Groups whose types share no level use per-type sources, and
    groups with fewer than MIN_SMOOTH_BINS well-trained bins pass through.

    Weight curves may be fitted after multiplying by a power of the bin's
    center response, the power being chosen with the model; errors are
    always scored as output contributions (weight times response).
    """
    cfg = table.config
    x_all = cfg.centers()  # log response for log spacing
    response = np.exp(x_all) if cfg.spacing == "log" else x_all
    w, present, counts = _grid(table)
    src, shared = group_sources(present, counts)
    member, per_pos = _channel_split(table.cfa, cfg.patch_size, cfg.n_pixel_types)
    trust = trusted_samples(cfg)
    out = w.copy()
    n_types, _, n_con, n_sat = cfg.radices
    for c in range(n_con):
        for s in range(n_sat):
            members = [list(range(n_types))] if shared[c, s] else [[t] for t in range(n_types)]
            for types in members:
                levels = np.flatnonzero(src[types[0], :, c, s])
                if len(levels) < MIN_SMOOTH_BINS:
                    continue
                weights = counts[types][:, levels, c, s].sum(axis=0).astype(np.float64)
                if np.any(weights <= 0):
                    weights = np.ones(len(levels))
                trusted = counts[types][:, levels, c, s].min(axis=0) >= trust
                x = x_all[levels]
                gain = response[levels, None]
                block = w[types][:, levels, c, s]                       # (type, level, rows, outputs)
                spatial, offset = block[:, :, :-1], block[:, :, -1]
                m = member[types]                                       # (type, channel, k*k)
                sums = np.einsum("tck,tlkr->tlcr", m, spatial)
                dev = spatial - np.einsum("tck,tlcr->tlkr", m, sums) / per_pos[types][:, None, :, None]

                def fit(Y, g, across_types=False):
                    # shared curves are scored on their type mean, which uniformity leaves alone
                    score_on = Y.mean(axis=1, keepdims=True) if across_types else None
                    return smooth_curves(x, weights, Y, np.broadcast_to(g, Y.shape), GAIN_EXPONENTS, trusted,
                                         score_on)

                for ch in range(m.shape[1]):
                    for r in range(block.shape[-1]):
                        sums[:, :, ch, r] = fit(sums[:, :, ch, r].T, gain, True).T
                for r in range(block.shape[-1]):
                    offset[:, :, r] = fit(offset[:, :, r].T, 1.0, True).T
                    for i in range(len(types)):
                        dev[i, :, :, r] = fit(dev[i, :, :, r], gain)
                spatial = dev + np.einsum("tck,tlcr->tlkr", m, sums) / per_pos[types][:, None, :, None]
                fitted = np.concatenate([spatial, offset[:, :, None, :]], axis=2)
                out[np.ix_(types, levels, [c], [s])] = fitted[:, :, None, None]
    return _from_grid(table, out, present, counts)


# --- interpolation of empty bins --------------------------------------------

def interpolation_matrix(x: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """(n, n) matrix mapping level values to values with non-sources linearly interpolated.

    Beyond the outermost sources the nearest source is copied.
    """
    n = len(x)
    M = np.eye(n)
    levels = np.flatnonzero(sources)
    for lvl in np.flatnonzero(~sources):
        M[lvl] = 0.0
        pos = np.searchsorted(levels, lvl)
        if pos == 0:
            M[lvl, levels[0]] = 1.0
        elif pos == len(levels):
            M[lvl, levels[-1]] = 1.0
        else:
            left, right = levels[pos - 1], levels[pos]
            a = (x[lvl] - x[left]) / (x[right] - x[left])
            M[lvl, left] = 1 - a
            M[lvl, right] = a
    return M


def interpolate_missing(table: TransformTable) -> TransformTable:
    """Fill every non-source level bin by interpolating between source bins along the level axis.

    Afterwards the table is total. Classes that had no transform get sample
    count 0; a slice with no source bin is an error.
    """
    cfg = table.config
    x = cfg.centers()
    w, present, counts = _grid(table)
    src, _ = group_sources(present, counts)
    out = w.copy()
    new_counts = np.where(present, counts, 0)
    n_types, _, n_con, n_sat = cfg.radices
    for t in range(n_types):
        for c in range(n_con):
            for s in range(n_sat):
                if not src[t, :, c, s].any():
                    raise MissingDataError(
                        f"no transform for pixel type {t}, contrast bin {c}, saturation case {s} at any level"
                        + ("; train on brighter scenes or without saturation classes" if s else "")
                    )
                M = interpolation_matrix(x, src[t, :, c, s])
                out[t, :, c, s] = np.einsum("ml,l...->m...", M, w[t, :, c, s])
    return _from_grid(table, out, np.ones_like(present), new_counts)


# --- uniformity -------------------------------------------------------------

def enforce_uniformity(table: TransformTable) -> TransformTable:
    """Equalize per-channel weight sums and offsets across center pixel types.

    For every (level, contrast, saturation) group and output, the weights a
    class puts on each input channel are shifted, equally at every position
    of that channel, so their sum equals the mean over center types; offsets
    are set to their mean. A spatially constant input then renders to the
    same value whatever the center pixel. Groups missing a center type, and
    (contrast, saturation) groups without a level trained for every type,
    are left alone.
    """
    cfg = table.config
    cfa = table.cfa
    w, present, counts = _grid(table)
    out = w.copy()
    _, shared = group_sources(present, counts)
    complete = (present.all(axis=0) & shared[None])[..., None, None]   # (level, contrast, sat, 1, 1)
    layouts = np.stack([cfa.patch_channels(t, cfg.patch_size).ravel() for t in range(cfg.n_pixel_types)])
    for ch in range(cfa.n_channels):
        mask = layouts == ch                        # (type, k*k)
        n_pos = mask.sum(axis=1)
        sums = np.einsum("tk,tlcskr->tlcsr", mask.astype(np.float64), w[..., :-1, :])
        has = n_pos > 0
        target = sums[has].mean(axis=0)
        for t in np.flatnonzero(has):
            delta = (target - sums[t]) / n_pos[t]       # (level, contrast, sat, outputs)
            spatial = out[t, ..., :-1, :]
            shifted = spatial[..., mask[t], :] + delta[..., None, :]
            spatial[..., mask[t], :] = np.where(complete, shifted, spatial[..., mask[t], :])
    offsets = w[..., -1, :].mean(axis=0)
    out[..., -1, :] = np.where(complete[None, ..., 0], offsets[None], w[..., -1, :])
    out[~present] = 0.0
    return _from_grid(table, out, present, counts)


# --- pipeline ---------------------------------------------------------------

@dataclass(frozen=True)
class PriorConfig:
    symmetry: bool = True
    smooth: bool = True
    interpolate: bool = True
    uniformity: bool = True

    def enabled(self) -> list[str]:
        return [name for name in ("symmetry", "smooth", "interpolate", "uniformity") if getattr(self, name)]


PIPELINE = (
    ("symmetry", enforce_symmetry),
    ("smooth", smooth_across_levels),
    ("interpolate", interpolate_missing),
    ("uniformity", enforce_uniformity),
)


def apply_priors(table: TransformTable, config: PriorConfig | None = None) -> TransformTable:
    """Symmetry, smoothing, interpolation and uniformity, in that order."""
    config = config or PriorConfig()
    for name, step in PIPELINE:
        if getattr(config, name):
            table = step(table)
            log.debug("applied %s prior", name)
    prov = dict(table.provenance)
    prov["priors"] = ",".join(config.enabled())
    return TransformTable(table.config, table.cfa, table.target_space, table.transforms, prov)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import table_from
from l3pipe import sensors
from l3pipe.core import CfaPattern, ClassConfig, MissingDataError, SensorImage, encode_class
from l3pipe.priors import (
    MIN_SMOOTH_BINS,
    apply_priors,
    enforce_symmetry,
    enforce_uniformity,
    interpolate_missing,
    smooth_across_levels,
    smooth_curves,
    symmetry_group,
)
from l3pipe.render import render

BAYER = sensors.builtin_spec("bayer")


def random_table(seed, n_levels=3, patch_size=3, present=None):
    cfg = ClassConfig(4, patch_size=patch_size, n_levels=n_levels)
    rng = np.random.default_rng(seed)
    codes = range(cfg.n_classes) if present is None else present
    return table_from(cfg, BAYER.cfa, {c: rng.normal(size=(cfg.patch_len + 1, 3)) for c in codes})


def equal_tables(a, b, tol=0.0):
    wa, pa, _ = a.dense()
    wb, pb, _ = b.dense()
    return np.array_equal(pa, pb) and np.max(np.abs(wa - wb)) <= tol


# --- symmetry ---------------------------------------------------------------

def test_bayer_red_has_full_reflection_group():
    names, group = symmetry_group(BAYER.cfa, 0, 5)
    assert set(names) == {"lr", "ud", "transpose"} and len(group) == 8


def test_symmetry_idempotent_and_mirrors_exact():
    once = enforce_symmetry(random_table(0, patch_size=5))
    assert equal_tables(enforce_symmetry(once), once, tol=1e-15)
    w = once.transforms[encode_class(0, 1, 0, 0, once.config).encoded].weights[:-1].reshape(5, 5, 3)
    assert np.array_equal(w, w[:, ::-1]) and np.array_equal(w, w[::-1]) and np.array_equal(w, w.transpose(1, 0, 2))


def test_lr_pair_averaged():
    # a green centre on a red row allows lr and ud but not the transpose
    cfg = ClassConfig(4, patch_size=3, n_levels=1)
    code = encode_class(1, 0, 0, 0, cfg).encoded
    w = np.zeros((10, 3))
    w[3, 0], w[5, 0], w[1, 0] = 1.0, 3.0, 4.0     # left, right, top
    out = enforce_symmetry(table_from(cfg, BAYER.cfa, {code: w})).transforms[code].weights
    assert out[3, 0] == out[5, 0] == 2.0
    assert out[1, 0] == out[7, 0] == 2.0


def test_symmetric_table_is_fixed_point():
    cfg = ClassConfig(4, patch_size=3, n_levels=1)
    w = np.zeros((10, 3))
    w[4] = 1.0
    w[[1, 3, 5, 7]] = 0.25
    table = table_from(cfg, BAYER.cfa, {0: w})
    assert equal_tables(enforce_symmetry(table), table)


# --- smoothing --------------------------------------------------------------

def test_linear_curves_unchanged():
    x = np.linspace(0, 1, 10)
    Y = np.stack([2 * x + 1, -x], axis=1)
    assert np.allclose(smooth_curves(x, np.ones(10), Y), Y, atol=1e-12)


def test_too_few_bins_pass_through():
    x = np.linspace(0, 1, MIN_SMOOTH_BINS - 1)
    Y = np.random.default_rng(0).normal(size=(len(x), 2))
    assert np.array_equal(smooth_curves(x, np.ones(len(x)), Y), Y)


def test_sparse_outlier_pulled_to_trend():
    x = np.linspace(0, 1, 12)
    Y = (3 * x - 1)[:, None].copy()
    Y[6] += 5.0
    trusted = np.ones(12, dtype=bool)
    trusted[6] = False
    out = smooth_curves(x, np.ones(12), Y, trusted=trusted)
    assert abs(out[6, 0] - (3 * x[6] - 1)) < 1e-9
    assert np.array_equal(out[trusted], Y[trusted])


def test_untrusted_edges_copy_nearest_trusted():
    x = np.linspace(0, 1, 12)
    Y = np.sin(3 * x)[:, None]
    trusted = np.ones(12, dtype=bool)
    trusted[[0, 11]] = False
    out = smooth_curves(x, np.ones(12), Y, trusted=trusted)
    assert out[0, 0] == Y[1, 0] and out[11, 0] == Y[10, 0]


@given(st.integers(0, 1000))
def test_smooth_curves_idempotent(seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(-3, 0, 10)
    Y = rng.normal(size=(10, 3))
    w = rng.uniform(1, 5, 10)
    once = smooth_curves(x, w, Y)
    assert np.allclose(smooth_curves(x, w, once), once, atol=1e-12)


def test_smoothing_idempotent_on_trained_table(raw_table):
    once = smooth_across_levels(raw_table)
    assert equal_tables(smooth_across_levels(once), once, tol=1e-12)


# --- interpolation ----------------------------------------------------------

def linear_bin_table(weights_by_level, n_levels):
    cfg = ClassConfig(4, patch_size=1, n_levels=n_levels, spacing="linear")
    codes = {}
    for lvl, v in weights_by_level.items():
        for t in range(4):
            codes[encode_class(t, lvl, 0, 0, cfg).encoded] = np.full((2, 3), v)
    return table_from(cfg, BAYER.cfa, codes)


def test_midpoint_interpolation():
    table = interpolate_missing(linear_bin_table({0: 1.0, 2: 3.0}, 3))
    assert table.is_total()
    assert np.allclose(table.transforms[encode_class(1, 1, 0, 0, table.config).encoded].weights, 2.0)


def test_constant_extrapolation():
    table = interpolate_missing(linear_bin_table({1: 1.0, 2: 3.0}, 4))
    cfg = table.config
    assert np.allclose(table.transforms[encode_class(0, 0, 0, 0, cfg).encoded].weights, 1.0)
    assert np.allclose(table.transforms[encode_class(0, 3, 0, 0, cfg).encoded].weights, 3.0)


def test_total_table_unchanged():
    table = random_table(1)
    assert equal_tables(interpolate_missing(table), table)


def test_empty_slice_is_an_error():
    cfg = ClassConfig(4, patch_size=3, n_levels=3)
    present = [encode_class(t, 0, 0, 0, cfg).encoded for t in range(3)]
    with pytest.raises(MissingDataError):
        interpolate_missing(random_table(2, present=present))


# --- uniformity -------------------------------------------------------------

def test_two_type_example():
    cfa = CfaPattern(np.zeros((1, 2), dtype=int), ("Y",))
    cfg = ClassConfig(2, patch_size=1, n_levels=1)
    table = table_from(cfg, cfa, {0: [[0.4], [0.0]], 1: [[0.6], [0.0]]})
    out = enforce_uniformity(table)
    assert out.transforms[0].weights[0, 0] == pytest.approx(0.5)
    assert out.transforms[1].weights[0, 0] == pytest.approx(0.5)


def flat_render(table, channel_values):
    values = np.asarray(channel_values)[BAYER.cfa.mosaic(12, 12)]
    return render(SensorImage(values, np.zeros(values.shape, dtype=bool), BAYER), table).data[4:-4, 4:-4]


def test_uniform_input_renders_uniform():
    table = enforce_uniformity(random_table(3, n_levels=1))
    out = flat_render(table, [0.2, 0.5, 0.3])
    std = out.reshape(-1, 3).std(axis=0)
    mean = np.abs(out.reshape(-1, 3).mean(axis=0))
    assert np.all(std / mean < 1e-9)


def test_uniform_response_is_type_mean():
    table = random_table(4, n_levels=1)
    before = flat_render(table, [0.2, 0.5, 0.3]).reshape(-1, 3)
    after = flat_render(enforce_uniformity(table), [0.2, 0.5, 0.3]).reshape(-1, 3)
    assert np.allclose(after.mean(axis=0), before.mean(axis=0), atol=1e-12)


def test_uniformity_fixed_point():
    once = enforce_uniformity(random_table(5))
    assert equal_tables(enforce_uniformity(once), once, tol=1e-15)


# --- pipeline ---------------------------------------------------------------

def test_pipeline_idempotent(raw_table):
    once = apply_priors(raw_table)
    assert once.is_total()
    assert equal_tables(apply_priors(once), once, tol=1e-12)
    assert once.provenance["priors"] == "symmetry,smooth,interpolate,uniformity"

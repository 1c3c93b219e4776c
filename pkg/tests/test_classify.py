import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from l3pipe import sensors
from l3pipe.classify import class_map, classify_patch, extract_patch
from l3pipe.core import ClassConfig, SensorImage, level_bounds


def sensor_of(values, spec=None, saturated=None):
    spec = spec or sensors.builtin_spec("bayer")
    values = np.asarray(values, dtype=np.float64)
    sat = np.zeros(values.shape, dtype=bool) if saturated is None else saturated
    return SensorImage(values, sat, spec)


def test_single_bin():
    assert np.array_equal(level_bounds(1, "linear"), [1.0])


def test_linear_quarters():
    assert np.allclose(level_bounds(4, "linear"), [0.25, 0.5, 0.75, 1.0])


def test_log_edges_geometric():
    e = level_bounds(10, "log", 1e-3)
    ratio = e[1:] / e[:-1]
    assert np.allclose(ratio, 1000 ** (1 / 9), rtol=1e-12)
    assert e[0] == pytest.approx(1e-3) and e[-1] == 1.0


def test_zero_levels_rejected():
    with pytest.raises(ValueError):
        level_bounds(0, "linear")


@given(st.integers(1, 60), st.sampled_from(["linear", "log"]), st.floats(1e-5, 0.5))
def test_bounds_strictly_increasing(n, spacing, floor):
    e = level_bounds(n, spacing, floor)
    assert len(e) == n and e[-1] == 1.0
    assert np.all(np.diff(e) > 0)


def test_constant_patch():
    s = sensor_of(np.full((9, 9), 0.3))
    p = extract_patch(s, 4, 4, 5)
    assert np.all(p.values[:-1] == 0.3) and p.values[-1] == 1.0
    assert len(p.values) == 26


def test_corner_mirror_padding():
    rng = np.random.default_rng(1)
    s = sensor_of(rng.uniform(0, 1, (6, 6)))
    p = extract_patch(s, 0, 0, 3).values[:-1].reshape(3, 3)
    assert p[0, 0] == p[2, 2] == s.values[1, 1]
    assert p[1, 1] == s.values[0, 0]


def test_even_patch_rejected():
    with pytest.raises(ValueError):
        extract_patch(sensor_of(np.zeros((6, 6))), 1, 1, 4)


def test_all_zero_patch_class():
    s = sensor_of(np.zeros((8, 8)))
    cfg = sensors.default_class_config(s.spec, n_levels=10, contrast_split=True)
    cid = classify_patch(extract_patch(s, 3, 3, 5), s, cfg)
    assert (cid.level, cid.contrast, cid.saturation) == (0, 0, 0)


def test_high_constant_goes_to_top_bin():
    s = sensor_of(np.full((8, 8), 0.99))
    cfg = sensors.default_class_config(s.spec, n_levels=50)
    assert classify_patch(extract_patch(s, 3, 3, 5), s, cfg).level == 49


def test_rgbw_white_saturation_case():
    spec = sensors.builtin_spec("rgbw")
    values = np.full((10, 10), 0.4)
    w_pixels = spec.cfa.mosaic(10, 10) == spec.cfa.channel_index("W")
    values[w_pixels] = 1.0
    s = SensorImage(values, w_pixels, spec)
    cfg = sensors.default_class_config(spec, n_levels=10)
    cid = classify_patch(extract_patch(s, 5, 5, 5), s, cfg)
    assert cfg.saturation_cases[cid.saturation] == frozenset({spec.cfa.channel_index("W")})
    # saturated pixels are left out of the level mean
    assert cid.level == int(np.searchsorted(cfg.level_bounds, 0.4, side="right"))


def test_fallback_saturation_case():
    # R saturated alone is not configured for RGBW: it falls back to "none"
    spec = sensors.builtin_spec("rgbw")
    values = np.full((10, 10), 0.2)
    r_pixels = spec.cfa.mosaic(10, 10) == spec.cfa.channel_index("R")
    values[r_pixels] = 1.0
    s = SensorImage(values, r_pixels, spec)
    cfg = sensors.default_class_config(spec, n_levels=10)
    assert classify_patch(extract_patch(s, 5, 5, 5), s, cfg).saturation == 0


def test_contrast_split():
    values = np.zeros((9, 9))
    values[:, ::2] = 0.5
    s = sensor_of(values)
    cfg = ClassConfig(4, n_levels=4, contrast_split=True)
    assert classify_patch(extract_patch(s, 4, 4, 5), s, cfg).contrast == 1


@given(st.lists(st.floats(0, 1), min_size=81, max_size=81), st.integers(0, 8), st.integers(0, 8))
def test_batch_and_single_paths_agree(vals, x, y):
    s = sensor_of(np.array(vals).reshape(9, 9))
    cfg = ClassConfig(4, n_levels=12, contrast_split=True)
    cmap = class_map(s, cfg)
    cid = classify_patch(extract_patch(s, x, y, 5), s, cfg)
    assert cmap[y, x] == cid.encoded
    assert 0 <= cid.encoded < cfg.n_classes
    assert classify_patch(extract_patch(s, x, y, 5), s, cfg) == cid


@given(st.floats(0, 0.999), st.floats(0, 0.999), st.sampled_from(["linear", "log"]))
def test_level_monotone(a, b, spacing):
    lo, hi = sorted((a, b))
    cfg = ClassConfig(4, n_levels=20, spacing=spacing)
    levels = []
    for v in (lo, hi):
        s = sensor_of(np.full((7, 7), v))
        levels.append(classify_patch(extract_patch(s, 3, 3, 5), s, cfg).level)
    assert levels[0] <= levels[1]

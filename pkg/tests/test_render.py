import numpy as np
import pytest

from conftest import table_from
from l3pipe import colorimetry, sensors
from l3pipe.classify import class_map
from l3pipe.core import ClassConfig, ConfigurationError, MissingClassError, SensorImage, TargetImage
from l3pipe.render import encode_display, render, render_pixel

BAYER = sensors.builtin_spec("bayer")


def sensor(values, spec=BAYER):
    values = np.asarray(values, dtype=np.float64)
    return SensorImage(values, np.zeros(values.shape, dtype=bool), spec)


def total_table(seed, n_levels=3, patch_size=3, cfa=BAYER.cfa):
    cfg = ClassConfig(cfa.n_pixel_types, patch_size=patch_size, n_levels=n_levels)
    rng = np.random.default_rng(seed)
    return table_from(cfg, cfa, {c: rng.normal(size=(cfg.patch_len + 1, 3)) for c in range(cfg.n_classes)})


def test_centre_selector():
    cfg = ClassConfig(4, patch_size=3, n_levels=1)
    w = np.zeros((10, 3))
    w[4, 0] = 1.0
    s = sensor(np.random.default_rng(0).uniform(size=(6, 6)))
    out = render(s, table_from(cfg, BAYER.cfa, {c: w for c in range(4)}))
    assert np.array_equal(out.data[..., 0], s.values)
    assert np.all(out.data[..., 1:] == 0)


def test_offset_only():
    cfg = ClassConfig(4, patch_size=3, n_levels=1)
    w = np.zeros((10, 3))
    w[-1] = [0.1, 0.2, 0.3]
    out = render(sensor(np.random.default_rng(1).uniform(size=(5, 7))), table_from(cfg, BAYER.cfa, {c: w for c in range(4)}))
    assert np.all(out.data == [0.1, 0.2, 0.3])


def test_brute_force_oracle():
    # independent path: numpy reflect padding, explicit loops, plain dot products
    rng = np.random.default_rng(2)
    s = sensor(rng.uniform(size=(4, 4)))
    table = total_table(3)
    cmap = class_map(s, table.config)
    padded = np.pad(s.values, 1, mode="reflect")
    out = render(s, table).data
    for y in range(4):
        for x in range(4):
            patch = padded[y:y + 3, x:x + 3].ravel()
            w = table.transforms[int(cmap[y, x])].weights
            assert np.allclose(out[y, x], patch @ w[:-1] + w[-1], rtol=1e-12, atol=1e-12)
            assert np.array_equal(out[y, x], render_pixel(s, table, x, y))


def test_display_white_and_black():
    white = colorimetry.d65_white()
    img = TargetImage(np.stack([white, np.zeros(3), 0.5 * white]).reshape(1, 3, 3), "xyz", white)
    rgb = encode_display(img)
    assert rgb[0, 0].tolist() == [255, 255, 255]
    assert rgb[0, 1].tolist() == [0, 0, 0]
    # 1.055 * 0.5 ** (1 / 2.4) - 0.055 = 0.7354 -> 187.5 -> 188
    assert rgb[0, 2].tolist() == [188, 188, 188]


def test_display_rejects_lab():
    with pytest.raises(ValueError):
        encode_display(TargetImage(np.zeros((1, 1, 3)), "lab", np.ones(3)))


def test_cfa_mismatch():
    rgbw = sensors.builtin_spec("rgbw")
    with pytest.raises(ConfigurationError):
        render(sensor(np.zeros((4, 4)), rgbw), total_table(0))


def test_missing_class():
    cfg = ClassConfig(4, patch_size=3, n_levels=2)
    table = table_from(cfg, BAYER.cfa, {0: np.zeros((10, 3))})
    with pytest.raises(MissingClassError):
        render(sensor(np.full((4, 4), 0.5)), table)


def test_workers_bit_identical():
    s = sensor(np.random.default_rng(4).uniform(size=(100, 37)))
    table = total_table(5)
    assert np.array_equal(render(s, table).data, render(s, table, workers=4).data)


def test_locality():
    rng = np.random.default_rng(6)
    values = rng.uniform(size=(20, 20))
    table = total_table(7, patch_size=5)
    a = render(sensor(values), table).data
    values[10, 10] = 1.0 - values[10, 10]
    b = render(sensor(values), table).data
    changed = np.argwhere(np.any(a != b, axis=-1))
    assert np.all(np.abs(changed - 10) <= 2)


def test_affine_for_fixed_class_map():
    rng = np.random.default_rng(8)
    s1, s2 = sensor(rng.uniform(size=(10, 10))), sensor(rng.uniform(size=(10, 10)))
    table = total_table(9)
    cmap = class_map(s1, table.config)
    a = 0.3
    mix = sensor(a * s1.values + (1 - a) * s2.values)
    lhs = render(mix, table, class_map=cmap).data
    rhs = a * render(s1, table, class_map=cmap).data + (1 - a) * render(s2, table, class_map=cmap).data
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_class_map_matches_classification():
    s = sensor(np.random.default_rng(10).uniform(size=(12, 12)))
    table = total_table(11)
    assert np.array_equal(render(s, table).data, render(s, table, class_map=class_map(s, table.config)).data)

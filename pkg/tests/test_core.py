import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from l3pipe import sensors
from l3pipe.core import (
    AffineTransform,
    CfaPattern,
    ClassConfig,
    SensorImage,
    SpectralImage,
    TargetImage,
    all_classes,
    channel_at,
    decode_class,
    encode_class,
)


def test_zero_fields_encode_to_zero():
    cfg = ClassConfig(4, n_levels=10)
    assert encode_class(0, 0, 0, 0, cfg).encoded == 0


def test_forty_and_eighty_classes():
    cfg = ClassConfig(4, n_levels=10)
    assert cfg.n_classes == 40
    assert max(c.encoded for c in all_classes(cfg)) == 39
    assert cfg.replace(contrast_split=True).n_classes == 80


def test_encode_decode_exhaustive():
    cfg = ClassConfig(3, n_levels=4, contrast_split=True, saturation_cases=(frozenset(), frozenset({0}), "any"))
    seen = set()
    for parts in itertools.product(*(range(r) for r in cfg.radices)):
        cid = encode_class(*parts, cfg)
        back = decode_class(cid.encoded, cfg)
        assert (back.pixel_type, back.level, back.contrast, back.saturation) == parts
        seen.add(cid.encoded)
    assert seen == set(range(cfg.n_classes))


@given(st.integers(1, 6), st.integers(1, 12), st.booleans(), st.data())
def test_encoding_is_mixed_radix(n_types, n_levels, split, data):
    cfg = ClassConfig(n_types, n_levels=n_levels, contrast_split=split)
    code = data.draw(st.integers(0, cfg.n_classes - 1))
    cid = decode_class(code, cfg)
    assert encode_class(cid.pixel_type, cid.level, cid.contrast, cid.saturation, cfg).encoded == code


@pytest.mark.parametrize("field", range(4))
def test_out_of_range_field_rejected(field):
    cfg = ClassConfig(4, n_levels=10)
    parts = [0, 0, 0, 0]
    parts[field] = cfg.radices[field]
    with pytest.raises(ValueError):
        encode_class(*parts, cfg)


def test_bayer_channel_at():
    cfa = sensors.builtin_spec("bayer").cfa
    assert cfa.channel_names[channel_at(cfa, 0, 0)] == "R"
    assert cfa.channel_names[channel_at(cfa, 2, 2)] == "R"


def test_rgbw_white_position():
    cfa = sensors.builtin_spec("rgbw").cfa
    assert cfa.channel_names[channel_at(cfa, 1, 1)] == "W"


@given(st.integers(0, 50), st.integers(0, 50), st.sampled_from(["bayer", "rgbw", "rgbnir"]))
def test_channel_at_periodic(x, y, name):
    cfa = sensors.builtin_spec(name).cfa
    assert channel_at(cfa, x, y) == channel_at(cfa, x + cfa.block_width, y + cfa.block_height)
    assert channel_at(cfa, x, y) == cfa.block[y % cfa.block_height, x % cfa.block_width]


def test_channel_at_rejects_negative():
    with pytest.raises(ValueError):
        channel_at(sensors.builtin_spec("bayer").cfa, -1, 0)


def test_cfa_rejects_unknown_channel():
    with pytest.raises(ValueError):
        CfaPattern(np.array([[0, 3]]), ("R", "G"))


def test_spectral_image_validation():
    with pytest.raises(ValueError):
        SpectralImage(np.zeros((2, 2, 3)), [400, 500])
    with pytest.raises(ValueError):
        SpectralImage(np.zeros((2, 2, 2)), [500, 400])
    with pytest.raises(ValueError):
        SpectralImage(-np.ones((2, 2, 2)), [400, 500])


def test_sensor_image_saturation_reads_one():
    spec = sensors.builtin_spec("bayer")
    with pytest.raises(ValueError):
        SensorImage(np.full((2, 2), 0.5), np.ones((2, 2), dtype=bool), spec)
    img = SensorImage(np.ones((2, 2)), np.ones((2, 2), dtype=bool), spec)
    assert img.saturated.all()


def test_sensor_spec_bounds():
    spec = sensors.builtin_spec("bayer")
    with pytest.raises(ValueError):
        spec.replace(bits=7)
    with pytest.raises(ValueError):
        spec.replace(qe=spec.qe * 2)
    with pytest.raises(ValueError):
        spec.replace(f_number=0.0)


def test_target_image_channels():
    with pytest.raises(ValueError):
        TargetImage(np.zeros((2, 2, 4)), "xyz", np.ones(3))
    with pytest.raises(ValueError):
        TargetImage(np.zeros((2, 2, 3)), "hsv", np.ones(3))


def test_class_config_level_bounds_checked():
    with pytest.raises(ValueError):
        ClassConfig(4, n_levels=3, level_bounds=np.array([0.2, 0.1, 1.0]))
    with pytest.raises(ValueError):
        ClassConfig(4, patch_size=4)


def test_affine_transform_finite():
    cfg = ClassConfig(1, n_levels=1)
    with pytest.raises(ValueError):
        AffineTransform(np.array([[np.nan]]), decode_class(0, cfg))

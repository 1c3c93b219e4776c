import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from l3pipe import camsim, io, sensors
from l3pipe.core import ClassConfig, SpectralImage

from test_render import total_table


@given(st.integers(1, 9), st.integers(1, 9), st.sampled_from([1, 3]), st.integers(0, 1000))
def test_pfm_round_trip(h, w, c, seed):
    import tempfile
    from pathlib import Path
    img = np.random.default_rng(seed).normal(size=(h, w, c)).astype(np.float32).astype(np.float64)
    img = img[..., 0] if c == 1 else img
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "x.pfm"
        io.write_pfm(path, img)
        assert np.array_equal(io.read_pfm(path), img)


def test_pfm_bottom_to_top(tmp_path):
    img = np.array([[1.0, 2.0], [3.0, 4.0]])
    io.write_pfm(tmp_path / "a.pfm", img)
    body = (tmp_path / "a.pfm").read_bytes().split(b"\n", 3)[3]
    assert np.frombuffer(body, "<f4").tolist() == [3, 4, 1, 2]


def test_ppm_round_trip(tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    io.write_ppm(tmp_path / "a.ppm", rgb)
    assert np.array_equal(io.read_ppm(tmp_path / "a.ppm"), rgb)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n7 5\n255\n")


def test_bad_pfm(tmp_path):
    (tmp_path / "bad.pfm").write_bytes(b"P5\n1 1\n255\n\0")
    with pytest.raises(io.FormatError):
        io.read_pfm(tmp_path / "bad.pfm")


def test_spectral_round_trip_byte_identical():
    scene = camsim.generate_scene(camsim.SceneRecipe("faces", size=16, seed=3))
    scene = SpectralImage(scene.data.astype(np.float32).astype(np.float64), scene.wavelengths)
    data = io.encode_spectral(scene)
    back = io.decode_spectral(data)
    assert np.array_equal(back.data, scene.data) and np.array_equal(back.wavelengths, scene.wavelengths)
    assert io.encode_spectral(back) == data


def test_spectral_size_mismatch():
    data = io.encode_spectral(SpectralImage(np.ones((2, 2, 3)), [400, 500, 600]))
    with pytest.raises(io.FormatError):
        io.decode_spectral(data[:-1])
    with pytest.raises(io.FormatError):
        io.decode_spectral(b"XXXX" + data[4:])


@pytest.mark.parametrize("seed", range(10))
def test_table_text_round_trip(seed):
    table = total_table(seed, n_levels=1 + seed % 3, patch_size=(3, 5)[seed % 2])
    text = io.dump_table(table)
    back = io.parse_table(text)
    assert io.dump_table(back) == text
    for code, t in table.transforms.items():
        assert np.array_equal(back.transforms[code].weights, t.weights)


def test_table_round_trip_keeps_config_and_counts(raw_table):
    back = io.parse_table(io.dump_table(raw_table))
    assert back.config.same_as(raw_table.config)
    assert back.transforms.keys() == raw_table.transforms.keys()
    assert all(back.transforms[c].sample_count == t.sample_count and back.transforms[c].lam == t.lam
               for c, t in raw_table.transforms.items())


def test_table_parse_error_reports_line():
    text = io.dump_table(total_table(0, n_levels=1))
    lines = text.splitlines()
    lines[3] = lines[3].replace(":", "", 1)
    with pytest.raises(io.FormatError) as err:
        io.parse_table("\n".join(lines), "t.json")
    assert err.value.line == 4 and "t.json:4" in str(err.value)


@pytest.mark.parametrize("name", sorted(sensors.BUILTIN))
def test_sensor_spec_round_trip(name):
    spec = sensors.builtin_spec(name)
    text = io.dump_sensor_spec(spec)
    back = io.parse_sensor_spec(text)
    assert io.dump_sensor_spec(back) == text
    assert np.array_equal(back.qe, spec.qe) and back.cfa.same_layout(spec.cfa)


def test_sensor_spec_error_names_line():
    text = io.dump_sensor_spec(sensors.builtin_spec("bayer")).replace("bits = ", "bits = -")
    with pytest.raises(io.FormatError) as err:
        io.parse_sensor_spec(text, "s.toml")
    expected = next(i for i, line in enumerate(text.splitlines(), 1) if line.startswith("bits"))
    assert err.value.line == expected


def test_class_config_overrides():
    cfa = sensors.builtin_spec("rgbw").cfa
    cfg = io.parse_class_config('n_levels = 7\nsaturation_cases = ["none", "W"]\n', cfa)
    assert cfg.n_levels == 7 and cfg.saturation_cases == (frozenset(), frozenset({3}))
    with pytest.raises(io.FormatError) as err:
        io.parse_class_config("n_levels = 7\ncolour = 2\n", cfa)
    assert err.value.line == 2


def test_manifest_relative_paths(tmp_path):
    (tmp_path / "m.txt").write_text("# pairs\na.pfm b.pfm c.pfm\n\n")
    rows = io.read_manifest(tmp_path / "m.txt")
    assert rows == [(tmp_path / "a.pfm", tmp_path / "b.pfm", tmp_path / "c.pfm")]
    (tmp_path / "bad.txt").write_text("a.pfm b.pfm\n")
    with pytest.raises(io.FormatError):
        io.read_manifest(tmp_path / "bad.txt")


def test_sensor_image_round_trip(tmp_path):
    spec = sensors.builtin_spec("bayer")
    scene = camsim.set_light_level(camsim.generate_scene(camsim.SceneRecipe("macbeth", size=24)), spec, 1.5)
    s = camsim.simulate_sensor(scene, spec, noise=False)
    io.write_sensor_image(tmp_path / "v.pfm", tmp_path / "m.pfm", s)
    back = io.read_sensor_image(tmp_path / "v.pfm", tmp_path / "m.pfm", spec)
    assert np.array_equal(back.values, s.values.astype(np.float32)) and np.array_equal(back.saturated, s.saturated)

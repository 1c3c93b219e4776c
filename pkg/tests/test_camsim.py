import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from l3pipe import camsim, colorimetry, sensors
from l3pipe.core import CfaPattern, ConfigurationError, SensorSpec, SpectralImage

WL = sensors.VISIBLE


def flat_spec(**kw):
    """One-channel sensor with QE 0.5 everywhere, for hand-computed electron counts."""
    cfa = CfaPattern(np.zeros((1, 1), dtype=int), ("Y",))
    return SensorSpec("flat", cfa, WL, np.full((1, len(WL)), 0.5), **kw)


def test_scene_determinism():
    r = camsim.SceneRecipe("gradients", size=32, seed=7)
    a, b = camsim.generate_scene(r), camsim.generate_scene(r)
    assert np.array_equal(a.data, b.data)
    c = camsim.generate_scene(camsim.SceneRecipe("gradients", size=32, seed=8))
    assert not np.array_equal(a.data, c.data)


def test_macbeth_has_24_constant_regions():
    n = 48
    scene = camsim.generate_scene(camsim.SceneRecipe("macbeth", size=n))
    spectra = scene.data.reshape(-1, len(WL))
    assert len(np.unique(spectra, axis=0)) == 24
    rows = np.arange(n) * 4 // n
    cols = np.arange(n) * 6 // n
    for r in range(4):
        for c in range(6):
            block = scene.data[rows == r][:, cols == c]
            assert np.all(block == block[0, 0])


def test_slanted_edge_angle():
    # independent oracle: per-row 50% crossing of the ideal image, then a least-squares line
    scene = camsim.generate_scene(camsim.SceneRecipe("slanted-edge", size=128))
    img = scene.data[..., 10]
    lo, hi = img.min(), img.max()
    xs = []
    for row in img:
        frac = (row - lo) / (hi - lo)
        i = np.flatnonzero(frac >= 0.5)[0]
        xs.append(i - 1 + (0.5 - frac[i - 1]) / (frac[i] - frac[i - 1]))
    slope = np.polyfit(np.arange(len(xs)), xs, 1)[0]
    assert abs(math.degrees(math.atan(abs(slope))) - 5.0) < 0.2


def test_unknown_scene_kind():
    with pytest.raises(ValueError):
        camsim.SceneRecipe("teapot")
    with pytest.raises(ValueError):
        camsim.SceneRecipe("noise", size=8)


def test_cutoff_frequency():
    assert camsim.diffraction_cutoff(550, 4) == pytest.approx(454.545, abs=1e-3)


def test_otf_endpoints():
    assert camsim.diffraction_otf(0.0) == pytest.approx(1.0)
    assert camsim.diffraction_otf(1.0) == pytest.approx(0.0, abs=1e-12)
    assert camsim.diffraction_otf(2.0) == 0.0


def test_optics_no_blur_limit():
    scene = camsim.generate_scene(camsim.SceneRecipe("noise", size=32))
    out = camsim.apply_optics(scene, camsim.OpticsSpec(1e-4), 1.4)
    assert np.max(np.abs(out.data - scene.data)) <= 1e-6 * np.max(scene.data)


def test_optics_preserve_uniform_plane_and_energy():
    uniform = SpectralImage(np.full((24, 24, len(WL)), 3.0), WL)
    out = camsim.apply_optics(uniform, camsim.OpticsSpec(8), 1.4)
    assert np.allclose(out.data, 3.0, rtol=1e-12)
    scene = camsim.generate_scene(camsim.SceneRecipe("slanted-edge", size=40))
    blurred = camsim.apply_optics(scene, camsim.OpticsSpec(16), 1.4)
    e0 = scene.data.sum(axis=(0, 1))
    e1 = blurred.data.sum(axis=(0, 1))
    assert np.max(np.abs(e1 / e0 - 1)) < 1e-9
    assert blurred.data.min() >= 0


def test_dark_scene_reads_zero():
    dark = SpectralImage(np.zeros((8, 8, len(WL))), WL)
    s = camsim.simulate_sensor(dark, flat_spec(), noise=False)
    assert np.all(s.values == 0) and not s.saturated.any()


def _flat_scene_for_electrons(spec, electrons, size=8):
    # electrons = exposure * area * sum(L * qe * dlambda) with L constant
    per_unit = spec.exposure_s * spec.pixel_area_m2 * np.sum(0.5 * colorimetry.band_widths(WL))
    return SpectralImage(np.full((size, size, len(WL)), electrons / per_unit), WL)


def test_clipping_at_twice_full_well():
    spec = flat_spec()
    s = camsim.simulate_sensor(_flat_scene_for_electrons(spec, 2 * spec.well_capacity), spec, noise=False)
    assert np.all(s.values == 1.0) and s.saturated.all()


def test_half_well_reads_half():
    spec = flat_spec()
    s = camsim.simulate_sensor(_flat_scene_for_electrons(spec, spec.well_capacity / 2), spec, noise=False)
    assert np.all(np.abs(s.values - 0.5) <= spec.quantization_step)


@given(st.floats(0.05, 0.9))
def test_noise_free_linearity(k):
    spec = sensors.builtin_spec("bayer")
    scene = camsim.set_light_level(camsim.generate_scene(camsim.SceneRecipe("gradients", size=16, seed=3)), spec, 0.8)
    a = camsim.simulate_sensor(scene, spec, noise=False)
    b = camsim.simulate_sensor(scene.scaled(k), spec, noise=False)
    ok = ~a.saturated
    assert np.all(np.abs(b.values[ok] - k * a.values[ok]) <= spec.quantization_step * (1 + 1e-9))


def test_noise_is_seeded_and_schedule_free():
    spec = sensors.builtin_spec("bayer")
    scene = camsim.set_light_level(camsim.generate_scene(camsim.SceneRecipe("noise", size=40)), spec, 0.3)
    a = camsim.simulate_sensor(scene, spec, noise=True, seed=5)
    b = camsim.simulate_sensor(scene, spec, noise=True, seed=5, workers=4)
    c = camsim.simulate_sensor(scene, spec, noise=True, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_qe_grid_mismatch():
    spec = sensors.builtin_spec("rgbnir")      # QE to 1000 nm
    scene = camsim.generate_scene(camsim.SceneRecipe("noise", size=16))    # visible only
    with pytest.raises(ConfigurationError):
        camsim.simulate_sensor(scene, spec)


def test_equal_energy_chromaticity():
    xyz = colorimetry.spectrum_to_xyz(np.ones(len(WL)), WL)
    x, y = xyz[:2] / xyz.sum()
    assert x == pytest.approx(1 / 3, abs=0.01) and y == pytest.approx(1 / 3, abs=0.01)


def test_white_maps_to_lab_white():
    spec = sensors.builtin_spec("bayer")
    scene = camsim.generate_scene(camsim.SceneRecipe("macbeth", size=24))
    white = SpectralImage(np.broadcast_to(scene.illuminant, (2, 2, len(WL))).copy(), WL, scene.illuminant)
    white = camsim.set_light_level(white, spec, 1.0)
    target = camsim.compute_target(white, "lab", spec)
    assert np.allclose(target.data, [100, 0, 0], atol=1e-6)


def test_monochromatic_550():
    spectrum = np.zeros(len(WL))
    spectrum[WL == 550] = 1.0
    xyz = colorimetry.spectrum_to_xyz(spectrum, WL)
    table = np.loadtxt(colorimetry.data_dir() / "cie1931_2deg_10nm.csv", delimiter=",", skiprows=2)
    row = table[table[:, 0] == 550][0, 1:]
    assert np.allclose(xyz / xyz[1], row / row[1], rtol=1e-12)


def test_target_needs_visible_range():
    spec = sensors.builtin_spec("bayer")
    narrow = SpectralImage(np.ones((2, 2, 3)), [450, 500, 550])
    with pytest.raises(ConfigurationError):
        camsim.compute_target(narrow, "xyz", spec)


def test_pair_alignment():
    spec = sensors.builtin_spec("rgbw")
    scene = camsim.generate_scene(camsim.SceneRecipe("faces", size=33))
    sensor, target = camsim.simulate_pair(scene, spec)
    assert (sensor.height, sensor.width) == (target.height, target.width) == (33, 33)


def test_light_level_sets_white_luminance():
    spec = sensors.builtin_spec("bayer")
    scene = camsim.set_light_level(camsim.generate_scene(camsim.SceneRecipe("macbeth", size=24)), spec, 0.4)
    assert camsim.scene_white(scene, spec)[1] == pytest.approx(0.4)

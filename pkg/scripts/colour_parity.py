"""RGBW against Bayer chart colour error over benchmark seeds, with a global colour-matrix baseline.

For each seed both sensors are trained on the same scene recipes and the
chart error is recorded, along with the per-patch errors. The baseline
fits one 3x(channels) matrix from noise-free sensor responses of the
training reflectances to XYZ, which shows how much of a gap the channel
spectra alone imply. Writes colour_parity.csv and colour_parity_patches.csv.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from _common import Stopwatch, config_from_args, write_csv
from l3pipe import bench, camsim, colorimetry, metrics, sensors


@dataclass(frozen=True)
class Parity:
    seeds: tuple = (0, 1, 2, 3)
    scenes_per_kind: int = 5
    out: str = "results/colour_parity.csv"


def matrix_baseline(spec, n_train=2000, seed=0):
    """Chart mean dE of the least-squares global colour matrix (noise-free, no spatial processing)."""
    wl = np.asarray(sensors.VISIBLE, dtype=np.float64)
    ill = colorimetry.illuminant_spd("D65", wl)
    cmf = colorimetry.cmf(wl)
    train = camsim.random_reflectances(np.random.default_rng(seed), wl, n_train)
    chart = camsim.chart_reflectances(wl)
    white = (ill @ cmf) / (ill @ cmf)[1]
    M = np.linalg.lstsq((train * ill) @ spec.qe.T, (train * ill) @ cmf, rcond=None)[0]
    pred = ((chart * ill) @ spec.qe.T) @ M
    ref = (chart * ill) @ cmf
    scale = (ill @ cmf)[1]
    return metrics.delta_e_map(pred[None] / scale, ref[None] / scale, white).mean


def main(argv=None):
    cfg = config_from_args(Parity, __doc__, argv)
    clock = Stopwatch()
    specs = {name: sensors.builtin_spec(name) for name in ("bayer", "rgbw")}
    rows, patch_rows = [], []
    for seed in cfg.seeds:
        bcfg = bench.BenchConfig(seed=seed, scenes_per_kind=cfg.scenes_per_kind)
        result = {}
        for name, spec in specs.items():
            res = bench.evaluate_chart(bench.train_pipeline(spec, bcfg), spec, bcfg)
            result[name] = res.interior.mean
            patch_rows += [[seed, name, i, f"{v:.4f}"] for i, v in enumerate(res.patch_means)]
        gap = result["rgbw"] - result["bayer"]
        rows.append([seed, f"{result['bayer']:.4f}", f"{result['rgbw']:.4f}", f"{gap:.4f}"])
        print(f"seed {seed}: Bayer {result['bayer']:.2f}  RGBW {result['rgbw']:.2f}  gap {gap:+.2f}  ({clock})",
              flush=True)
    for name, spec in specs.items():
        print(f"global colour matrix baseline {name}: chart mean dE {matrix_baseline(spec):.2f}")
    write_csv(cfg.out, ["seed", "dE_bayer", "dE_rgbw", "gap"], rows)
    write_csv(str(cfg.out).replace(".csv", "_patches.csv"), ["seed", "sensor", "patch", "dE_mean"], patch_rows)


if __name__ == "__main__":
    main()

"""Chart error of an RGB-NIR pipeline with and without its infrared pixels. Writes nir_blackout.csv."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from _common import config_from_args, write_csv
from l3pipe import bench, sensors
from l3pipe.core import SensorImage


@dataclass(frozen=True)
class NirBlackout:
    chart_seeds: tuple = (12345, 1, 2, 3, 4)
    chart_levels: tuple = (0.3, 1.0)
    seed: int = 0
    out: str = "results/nir_blackout.csv"


def blackout(channel):
    def hook(sensor: SensorImage) -> SensorImage:
        mask = sensor.cfa.mosaic(sensor.height, sensor.width) == channel
        return SensorImage(np.where(mask, 0.0, sensor.values), sensor.saturated & ~mask, sensor.spec)
    return hook


def main(argv=None):
    cfg = config_from_args(NirBlackout, __doc__, argv)
    spec = sensors.builtin_spec("rgbnir")
    bcfg = bench.BenchConfig(seed=cfg.seed)
    table = bench.train_pipeline(spec, bcfg)
    hook = blackout(spec.cfa.channel_index("NIR"))
    rows = []
    for level in cfg.chart_levels:
        for seed in cfg.chart_seeds:
            a = bench.evaluate_chart(table, spec, bcfg, level=level, seed=seed).interior
            b = bench.evaluate_chart(table, spec, bcfg, level=level, seed=seed, sensor_hook=hook).interior
            rows.append([level, seed, f"{a.median:.4f}", f"{b.median:.4f}", f"{a.mean:.4f}", f"{b.mean:.4f}"])
            print(f"level {level} chart seed {seed}: median dE {a.median:.2f} -> {b.median:.2f}")
    write_csv(cfg.out, ["light_level", "chart_seed", "median_with_nir", "median_blacked_out",
                        "mean_with_nir", "mean_blacked_out"], rows)


if __name__ == "__main__":
    main()

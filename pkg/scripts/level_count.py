"""Chart colour error against the number of response-level classes, for both level spacings.

Trains a Bayer pipeline per (target space, spacing, level count) on the
default benchmark scenes and scores the held-out chart at several light
levels. Writes level_count.csv.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from _common import Stopwatch, config_from_args, write_csv
from l3pipe import bench, sensors


@dataclass(frozen=True)
class LevelSweep:
    levels: tuple = (2, 4, 7, 10, 16, 25, 50)
    spacings: tuple = ("log", "linear")
    spaces: tuple = ("lab", "xyz")
    chart_levels: tuple = (0.1, 0.3, 1.0)
    sensor: str = "bayer"
    seed: int = 0
    out: str = "results/level_count.csv"


def main(argv=None):
    cfg = config_from_args(LevelSweep, __doc__, argv)
    spec = sensors.builtin_spec(cfg.sensor)
    clock = Stopwatch()
    rows = []
    for space in cfg.spaces:
        bcfg = bench.BenchConfig(seed=cfg.seed, space=space)
        pairs = bench.training_pairs(spec, bcfg)
        for spacing in cfg.spacings:
            for n in cfg.levels:
                cc = sensors.default_class_config(spec, n_levels=n, spacing=spacing)
                table = bench.train_pipeline(spec, bcfg, class_config=cc, pairs=pairs)
                per_level = [bench.evaluate_chart(table, spec, bcfg, level=lv).interior.mean for lv in cfg.chart_levels]
                rows.append([space, spacing, n, *(f"{v:.4f}" for v in per_level), f"{np.mean(per_level):.4f}"])
                print(f"{space:4s} {spacing:6s} {n:3d} levels  mean dE {np.mean(per_level):6.2f}  ({clock})", flush=True)
    header = ["target_space", "spacing", "n_levels", *(f"dE_at_{lv}" for lv in cfg.chart_levels), "dE_mean"]
    write_csv(cfg.out, header, rows)


if __name__ == "__main__":
    main()

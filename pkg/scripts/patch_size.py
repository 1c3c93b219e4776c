"""Chart colour error against patch size on the closed-loop Bayer benchmark. Writes patch_size.csv."""

from __future__ import annotations

from dataclasses import dataclass

from _common import Stopwatch, config_from_args, write_csv
from l3pipe import bench, sensors


@dataclass(frozen=True)
class PatchSweep:
    patches: tuple = (3, 5, 7, 9)
    n_levels: int = 20
    sensor: str = "bayer"
    seeds: tuple = (0, 1, 2)
    out: str = "results/patch_size.csv"


def main(argv=None):
    cfg = config_from_args(PatchSweep, __doc__, argv)
    spec = sensors.builtin_spec(cfg.sensor)
    clock = Stopwatch()
    rows = []
    for seed in cfg.seeds:
        bcfg = bench.BenchConfig(seed=seed)
        pairs = bench.training_pairs(spec, bcfg)
        for k in cfg.patches:
            cc = sensors.default_class_config(spec, n_levels=cfg.n_levels, patch_size=k)
            table = bench.train_pipeline(spec, bcfg, class_config=cc, pairs=pairs)
            res = bench.evaluate_chart(table, spec, bcfg).interior
            rows.append([seed, k, f"{res.mean:.4f}", f"{res.median:.4f}", f"{res.p95:.4f}"])
            print(f"seed {seed} patch {k}x{k}  mean dE {res.mean:.2f}  ({clock})", flush=True)
    write_csv(cfg.out, ["seed", "patch_size", "dE_mean", "dE_median", "dE_p95"], rows)


if __name__ == "__main__":
    main()

"""Weight put on one input channel as a function of response level, per saturation case.

Trains the named sensor on the default benchmark and writes, for every
level bin and saturation case, the signed and absolute weight sums on the
channel's pixels (averaged over center pixel types), the sum toward
linear sRGB outputs, and whether the bin had training data. Useful for
the RGBW white pixel and the RGB-NIR infrared pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from _common import config_from_args, write_csv
from l3pipe import bench, colorimetry, sensors
from l3pipe.core import format_saturation_case


@dataclass(frozen=True)
class ChannelWeights:
    sensor: str = "rgbw"
    channel: str = "W"
    n_levels: int = 20
    seed: int = 0
    out: str = "results/channel_weights.csv"


def main(argv=None):
    cfg = config_from_args(ChannelWeights, __doc__, argv)
    spec = sensors.builtin_spec(cfg.sensor)
    ch = spec.cfa.channel_index(cfg.channel)
    bcfg = bench.BenchConfig(seed=cfg.seed)
    cc = sensors.default_class_config(spec, n_levels=cfg.n_levels)
    table = bench.train_pipeline(spec, bcfg, class_config=cc)
    w, _, counts = table.dense()
    w = w.reshape(cc.radices + w.shape[1:])[:, :, 0]
    counts = counts.reshape(cc.radices)[:, :, 0]
    layouts = [spec.cfa.patch_channels(t, cc.patch_size).ravel() for t in range(cc.n_pixel_types)]
    rows = []
    for s, case in enumerate(cc.saturation_cases):
        name = format_saturation_case(case, spec.cfa.channel_names)
        for lvl in range(cc.n_levels):
            sel = [w[t, lvl, s, :-1][layouts[t] == ch] for t in range(cc.n_pixel_types)]   # (k, xyz out) each
            signed = np.mean([x.sum(axis=0) for x in sel], axis=0)
            absolute = np.mean([np.abs(x).sum() for x in sel])
            rgb = signed @ colorimetry.XYZ_TO_SRGB.T
            trained = bool(counts[:, lvl, s].min() > 0)
            rows.append([name, lvl, f"{cc.centers()[lvl]:.5g}", int(trained), f"{absolute:.5f}",
                         *(f"{v:.5f}" for v in signed), f"{rgb.sum():.5f}"])
    header = ["saturation", "level", "level_center", "trained", "abs_sum", "sum_X", "sum_Y", "sum_Z", "sum_to_rgb"]
    write_csv(cfg.out, header, rows)
    for r in rows:
        if r[0] == "none":
            print(f"level {r[1]:2d} trained={r[3]}  abs {r[4]}  to-rgb {r[-1]}")


if __name__ == "__main__":
    main()

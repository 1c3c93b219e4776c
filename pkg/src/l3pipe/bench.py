"""Closed-loop simulation benchmark: train on synthetic scenes, score a held-out chart."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import camsim
from .core import ClassConfig, SensorSpec, TargetImage, TransformTable
from .metrics import DeltaEResult, _summarize, delta_e_map
from .priors import PriorConfig, apply_priors
from .render import render
from .sensors import default_class_config
from .train import RidgeConfig, train_table


@dataclass(frozen=True)
class BenchConfig:
    """Training scenes, light levels (target Y of a perfect white) and the test condition."""

    scene_size: int = 96
    train_kinds: tuple = ("gradients", "noise")
    scenes_per_kind: int = 5
    light_levels: tuple = (0.02, 0.06, 0.2, 0.6, 2.0, 6.0, 20.0)
    test_level: float = 1.0
    chart_size: int = 96
    seed: int = 0
    space: str = "xyz"
    priors: PriorConfig | None = field(default_factory=PriorConfig)
    workers: int = 1

    def replace(self, **changes) -> BenchConfig:
        return replace(self, **changes)


def training_scenes(cfg: BenchConfig, wavelengths=None):
    wl = tuple(camsim.VISIBLE if wavelengths is None else wavelengths)
    scenes = []
    for k, kind in enumerate(cfg.train_kinds):
        for i in range(cfg.scenes_per_kind):
            seed = cfg.seed * 1000 + k * 100 + i
            recipe = camsim.SceneRecipe(kind, size=cfg.scene_size, seed=seed, wavelengths=wl)
            scenes.append((recipe, camsim.generate_scene(recipe)))
    return scenes


def training_pairs(spec: SensorSpec, cfg: BenchConfig):
    """Noisy sensor/target pairs for every training scene at every light level."""
    pairs = []
    for i, (_, scene) in enumerate(training_scenes(cfg, spec.wavelengths)):
        for j, level in enumerate(cfg.light_levels):
            lit = camsim.set_light_level(scene, spec, level)
            seed = cfg.seed * 1_000_003 + i * 101 + j
            pairs.append(camsim.simulate_pair(lit, spec, cfg.space, noise=True, seed=seed, workers=cfg.workers))
    return pairs


def train_pipeline(spec: SensorSpec, cfg: BenchConfig, class_config: ClassConfig | None = None,
                   ridge: RidgeConfig | None = None, pairs=None) -> TransformTable:
    class_config = class_config or default_class_config(spec, n_levels=20)
    pairs = pairs if pairs is not None else training_pairs(spec, cfg)
    recipes = [r.kind + f":{r.seed}" for r, _ in training_scenes(cfg, spec.wavelengths)]
    table = train_table(pairs, class_config, ridge or RidgeConfig(workers=cfg.workers), seed=cfg.seed,
                        provenance={"scenes": recipes, "light_levels": list(cfg.light_levels)})
    if cfg.priors is not None:
        table = apply_priors(table, cfg.priors)
    return table


@dataclass(frozen=True, eq=False)
class ChartResult:
    delta_e: DeltaEResult        # every pixel
    interior: DeltaEResult       # pixels away from patch borders
    rendered: TargetImage
    target: TargetImage
    patch_means: np.ndarray      # mean delta E per chart patch


def chart_masks(size: int, margin: int):
    """Boolean interior mask for each of the 24 chart patches."""
    rows = np.arange(size) * 4 // size
    cols = np.arange(size) * 6 // size
    masks = []
    for r in range(4):
        for c in range(6):
            ys = np.flatnonzero(rows == r)
            xs = np.flatnonzero(cols == c)
            m = np.zeros((size, size), dtype=bool)
            m[ys[0] + margin:ys[-1] + 1 - margin, xs[0] + margin:xs[-1] + 1 - margin] = True
            masks.append(m)
    return masks


def evaluate_chart(table: TransformTable, spec: SensorSpec, cfg: BenchConfig, level: float | None = None,
                   seed: int = 12345, sensor_hook=None) -> ChartResult:
    """Render a noisy capture of the chart and compare it with the ideal XYZ under the scene white.

    ``sensor_hook`` may alter the capture before rendering (for example to
    black out a channel).
    """
    level = cfg.test_level if level is None else level
    recipe = camsim.SceneRecipe("macbeth", size=cfg.chart_size, seed=seed, wavelengths=tuple(spec.wavelengths))
    scene = camsim.set_light_level(camsim.generate_scene(recipe), spec, level)
    sensor, target = camsim.simulate_pair(scene, spec, "xyz", noise=True, seed=seed, workers=cfg.workers)
    if sensor_hook is not None:
        sensor = sensor_hook(sensor)
    rendered = render(sensor, table, workers=cfg.workers)
    white = camsim.scene_white(scene, spec)
    full = delta_e_map(rendered, target, white)
    masks = chart_masks(cfg.chart_size, table.config.patch_size // 2 + 1)
    inside = np.any(masks, axis=0)
    per_patch = np.array([full.map[m].mean() for m in masks])
    return ChartResult(full, _summarize(full.map[inside]), rendered, target, per_patch)

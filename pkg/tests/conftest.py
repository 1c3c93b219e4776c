import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from l3pipe import bench, sensors
from l3pipe.core import AffineTransform, CfaPattern, ClassConfig, TransformTable, decode_class

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def bayer():
    return sensors.builtin_spec("bayer")


@pytest.fixture(scope="session")
def small_bench():
    """A quick benchmark configuration for unit tests (not for accuracy claims)."""
    return bench.BenchConfig(scene_size=48, scenes_per_kind=2, light_levels=(0.06, 0.6, 6.0), chart_size=48,
                             priors=None)


@pytest.fixture(scope="session")
def small_pairs(bayer, small_bench):
    return bench.training_pairs(bayer, small_bench)


@pytest.fixture(scope="session")
def small_config(bayer):
    return sensors.default_class_config(bayer, n_levels=8)


@pytest.fixture(scope="session")
def raw_table(bayer, small_bench, small_config, small_pairs):
    """Trained Bayer table without priors; some classes are empty."""
    return bench.train_pipeline(bayer, small_bench, class_config=small_config, pairs=small_pairs)


def table_from(config: ClassConfig, cfa: CfaPattern, weights: dict, counts=None, space="xyz"):
    """Hand-built table; ``weights`` maps class codes to weight arrays."""
    transforms = {
        code: AffineTransform(np.asarray(w, dtype=np.float64), decode_class(code, config),
                              0 if counts is None else counts[code])
        for code, w in weights.items()
    }
    return TransformTable(config, cfa, space, transforms)


# acceptance criteria report: (number, line) pairs filled in by test_acceptance.py
ACCEPTANCE: list[tuple[int, str]] = []


def record_criterion(number: int, title: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}: {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

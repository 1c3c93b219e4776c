"""Helpers shared by the experiment scripts: dataclass configs from the command line, CSV output."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import time
from pathlib import Path


def _tuple_of(kind):
    def parse(text: str):
        return tuple(kind(v) for v in text.split(",") if v)
    return parse


def config_from_args(cls, description: str, argv=None):
    """Build ``cls`` (a dataclass) from ``--field value`` flags; tuples take comma-separated values."""
    p = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif isinstance(default, tuple):
            kind = type(default[0]) if default else str
            p.add_argument(flag, type=_tuple_of(kind), default=default,
                           help=f"comma-separated (default {','.join(map(str, default))})")
        else:
            p.add_argument(flag, type=type(default), default=default, help=f"default {default}")
    return cls(**vars(p.parse_args(argv)))


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


class Stopwatch:
    def __init__(self):
        self.t0 = time.perf_counter()

    def __str__(self):
        return f"{time.perf_counter() - self.t0:.0f} s"

"""Plain-text file formats: generator CSV and path dumps.

Generator files hold ``d`` rows of ``d`` comma-separated numbers with no
header. Path dumps have the header ``time,state``, a first row ``0,<initial>``
and one row per jump. States in path dumps are written 1-based.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .chain_algebra import GeneratorMatrix, as_generator, validate_generator
from .path_sim import CtmcPath


def fmt(x: float) -> str:
    """Shortest text that carries 17 significant digits."""
    return format(float(x), ".17g")


def read_generator_csv(path, tol: float | None = None) -> GeneratorMatrix:
    raw = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    return validate_generator(raw, tol)


def write_generator_csv(path, Q) -> None:
    q = as_generator(Q).matrix
    with open(path, "w", newline="") as fh:
        for row in q:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_path_csv(path, ctmc_path: CtmcPath) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "state"])
        writer.writerow(["0", ctmc_path.initial_state + 1])
        for t, s in zip(ctmc_path.jump_times, ctmc_path.post_jump_states):
            writer.writerow([fmt(t), int(s) + 1])


def read_path_csv(path, d: int, horizon: float) -> CtmcPath:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["time", "state"]:
            raise ValueError(f"unexpected path header {header}")
        rows = [(float(t), int(s) - 1) for t, s in reader]
    if not rows or rows[0][0] != 0.0:
        raise ValueError("path dump must start with a row at time 0")
    times = [t for t, _ in rows[1:]]
    states = [s for _, s in rows[1:]]
    return CtmcPath(rows[0][1], times, states, float(horizon), d)

"""Convergence reports and their CSV / text rendering.

Every row is judged by the same rule, ``|value - target| <= tolerance``, so
a verdict can be recomputed from its CSV row alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IoFailure
from ..formats import fmt

CSV_HEADER = "n,statistic,value,target,stderr,pass,tolerance"

POLICY = ("verdict rule: pass iff |value - target| <= tolerance; statistical rows use "
          "tolerance = max(4*stderr, 0.05*|target|) unless stated otherwise. Limits carry "
          "no finite-n error bars, so every tolerance is a harness policy.")


@dataclass(frozen=True)
class ReportRow:
    n: int
    statistic: str
    value: float
    target: float
    stderr: float
    tolerance: float

    @property
    def passed(self) -> bool:
        gap = abs(self.value - self.target)
        return bool(gap <= self.tolerance) if not math.isnan(gap) else False

    def csv(self) -> str:
        return ",".join([str(self.n), self.statistic, fmt(self.value), fmt(self.target),
                         fmt(self.stderr), "true" if self.passed else "false", fmt(self.tolerance)])


def stat_row(n, statistic, value, target, stderr, rel_tol=0.05, k=4.0) -> ReportRow:
    tol = max(k * stderr, rel_tol * abs(target))
    return ReportRow(n, statistic, float(value), float(target), float(stderr), float(tol))


@dataclass
class ConvergenceReport:
    experiment: str
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, row: ReportRow) -> None:
        self.rows.append(row)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r.n, r.statistic))

    def row(self, statistic: str, n: int | None = None) -> ReportRow:
        for r in self.rows:
            if r.statistic == statistic and (n is None or r.n == n):
                return r
        raise KeyError((statistic, n))

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv() for r in self.sorted_rows()]) + "\n"

    def summary(self) -> str:
        lines = [f"== {self.experiment}: {'PASS' if self.passed else 'FAIL'} "
                 f"({sum(r.passed for r in self.rows)}/{len(self.rows)} rows)", POLICY]
        lines += [f"note: {s}" for s in self.notes]
        for key in sorted(self.metadata):
            lines.append(f"{key}: {self.metadata[key]}")
        lines.append(f"config: {self.config}")
        for r in self.sorted_rows():
            lines.append(f"  [{'pass' if r.passed else 'FAIL'}] n={r.n:<6d} {r.statistic:<28s} "
                         f"value={r.value:.6g} target={r.target:.6g} "
                         f"stderr={r.stderr:.3g} tol={r.tolerance:.3g}")
        return "\n".join(lines)


def emit_report(report: ConvergenceReport, destination) -> dict:
    """Write ``<experiment>.csv`` and ``<experiment>_summary.txt`` under ``destination``."""
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        csv_path = dest / f"{report.experiment}.csv"
        txt_path = dest / f"{report.experiment}_summary.txt"
        csv_path.write_text(report.to_csv())
        txt_path.write_text(report.summary() + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report to {dest}: {exc}") from exc
    return {"csv": csv_path, "summary": txt_path}

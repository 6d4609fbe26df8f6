"""Per-iteration run traces and their CSV serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CSV_COLUMNS = ("k", "obj_err", "feas", "bound_obj", "bound_feas",
               "ineq_slack", "phi", "wall_time_s")


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


@dataclass
class RunOptions:
    """Knobs shared by all solver drivers."""

    subtol: float = 1e-10
    max_inner: int = 200000
    restart_every: Optional[int] = None
    checks: bool = True          # per-iteration certificate checks (needs a reference)
    bounds: bool = True          # theoretical bound columns (needs a reference)
    track_extras: bool = True    # last-iterate / auxiliary series


@dataclass
class RunRecord:
    """Trace of one solver run.

    The eight CSV columns are the external interface; ``extras`` holds
    additional per-iteration series (last-iterate errors, inner-solve
    residuals, ...) and ``final`` the terminal iterates. ``obj_err`` and
    ``feas`` refer to the iterate the schedule's rate certificate is
    stated for; ``ineq_slack`` is the one-iteration inequality slack
    normalized by max(1, magnitude scale).
    """

    solver: str
    schedule: str
    meta: dict = field(default_factory=dict)
    k: list = field(default_factory=list)
    obj_err: list = field(default_factory=list)
    feas: list = field(default_factory=list)
    bound_obj: list = field(default_factory=list)
    bound_feas: list = field(default_factory=list)
    ineq_slack: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    wall_time_s: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)

    def append(self, k, obj_err=None, feas=None, bound_obj=None, bound_feas=None,
               ineq_slack=None, phi=None, wall_time_s=0.0, **extras):
        self.k.append(int(k))
        self.obj_err.append(obj_err)
        self.feas.append(feas)
        self.bound_obj.append(bound_obj)
        self.bound_feas.append(bound_feas)
        self.ineq_slack.append(ineq_slack)
        self.phi.append(phi)
        self.wall_time_s.append(float(wall_time_s))
        for name, value in extras.items():
            self.extras.setdefault(name, []).append(value)

    def __len__(self):
        return len(self.k)

    def column(self, name: str) -> list:
        if name in CSV_COLUMNS:
            return getattr(self, name)
        return self.extras[name]

    def column_array(self, name: str) -> np.ndarray:
        return np.array([np.nan if v is None else v for v in self.column(name)], dtype=float)

    @property
    def total_time(self) -> float:
        return self.wall_time_s[-1] if self.wall_time_s else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# alpd-trace " + json.dumps(
                {"solver": self.solver, "schedule": self.schedule, "meta": self.meta},
                sort_keys=True) + "\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for i in range(len(self.k)):
                writer.writerow([str(self.k[i])] + [
                    _fmt(getattr(self, col)[i]) for col in CSV_COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path) -> "RunRecord":
        with open(path, newline="") as fh:
            first = fh.readline()
            if first.startswith("# alpd-trace "):
                head = json.loads(first[len("# alpd-trace "):])
                rec = cls(head.get("solver", ""), head.get("schedule", ""),
                          head.get("meta", {}))
                rows = list(csv.reader(fh))
            else:
                rec = cls("", "", {})
                rows = list(csv.reader([first] + fh.readlines()))
        header, rows = rows[0], rows[1:]
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected trace columns: {header}")
        for row in rows:
            rec.k.append(int(row[0]))
            for col, cell in zip(CSV_COLUMNS[1:], row[1:]):
                getattr(rec, col).append(None if cell == "" else float(cell))
        return rec


class SolverError(RuntimeError):
    """Solver failure carrying the partial trace accumulated so far."""

    def __init__(self, message: str, record: Optional[RunRecord] = None):
        super().__init__(message)
        self.record = record

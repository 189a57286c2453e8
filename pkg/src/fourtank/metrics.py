"""IAE evaluation, trace files and fixed-vs-reconfigurable comparison reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ComparisonError, DomainError
from .scenario import IaeWindow
from .simulation import TRACE_COLUMNS, SimulationTrace

_INT_COLUMNS = {"gain_epoch", "sat1", "sat2", "overflow1", "overflow2", "overflow3", "overflow4"}


def _window_slice(t, start, end):
    # sample-aligned boundaries; the slack absorbs k * period rounding
    lo = int(np.searchsorted(t, start - 1e-9, side="left"))
    hi = int(np.searchsorted(t, end + 1e-9, side="right"))
    return lo, hi


def trapezoid_abs(t, e):
    """Trapezoidal integral of |e| over the sample times ``t``."""
    a = np.abs(np.asarray(e, dtype=float))
    dt = np.diff(np.asarray(t, dtype=float))
    return math.fsum(dt * (a[:-1] + a[1:]) * 0.5)


def iae(trace, window):
    """Integral of |r_i - y_i| (V*s) over ``window`` for output ``window.output``."""
    if not window.start < window.end:
        raise DomainError(f"empty IAE window {window.label!r}")
    t = trace.t
    if window.start < t[0] - 1e-9 or window.end > t[-1] + 1e-9:
        raise DomainError(
            f"IAE window {window.label!r} [{window.start}, {window.end}) exceeds trace span [{t[0]}, {t[-1]}]"
        )
    lo, hi = _window_slice(t, window.start, window.end)
    if hi - lo < 2:
        raise DomainError(f"IAE window {window.label!r} contains fewer than two samples")
    i = window.output - 1
    return trapezoid_abs(t[lo:hi], trace.r[lo:hi, i] - trace.y[lo:hi, i])


# ---------------------------------------------------------------- trace files


def _fmt(name, value):
    if name in _INT_COLUMNS:
        return str(int(value))
    return repr(float(value))


def write_trace(trace, path):
    table = trace.table()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in table:
            writer.writerow([_fmt(name, v) for name, v in zip(TRACE_COLUMNS, row)])


def read_trace(path, mode="", scenario_digest=""):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header")
        rows = [[float(x) for x in row] for row in reader]
    return SimulationTrace.from_table(np.array(rows).reshape(-1, len(TRACE_COLUMNS)), mode, scenario_digest)


# ---------------------------------------------------------------- reports


def _ratio(reconf, fixed):
    if fixed == 0.0:
        return 1.0 if reconf == 0.0 else math.inf
    return reconf / fixed


@dataclass
class ComparisonReport:
    rows: list
    scenario_digest: str = ""

    def cell(self, label, output):
        for row in self.rows:
            if row["label"] == label and row["output"] == output:
                return row
        raise KeyError((label, output))

    def to_dict(self):
        return {"scenario_digest": self.scenario_digest, "units": "IAE in V*s of measured output", "rows": self.rows}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def render(self):
        head = f"{'window':<18}{'[start, end) s':>16}{'out':>5}{'fixed':>12}{'reconf':>12}{'ratio':>9}"
        lines = ["IAE (V*s, measured output), reconfigurable vs fixed gain", head, "-" * len(head)]
        for row in self.rows:
            span = f"[{row['start']:g}, {row['end']:g})"
            lines.append(
                f"{row['label']:<18}{span:>16}{row['output']:>5}"
                f"{row['fixed']:>12.4f}{row['reconfigurable']:>12.4f}{row['ratio']:>9.4f}"
            )
        return "\n".join(lines) + "\n"


def compare_report(fixed_trace, reconf_trace, windows):
    if fixed_trace.scenario_digest != reconf_trace.scenario_digest:
        raise ComparisonError(
            f"traces come from different scenarios ({fixed_trace.scenario_digest} vs {reconf_trace.scenario_digest})"
        )
    if len(fixed_trace) != len(reconf_trace) or not np.array_equal(fixed_trace.t, reconf_trace.t):
        raise ComparisonError("traces have different time grids")
    rows = []
    for w in windows:
        if not isinstance(w, IaeWindow):
            w = IaeWindow(**w)
        a, b = iae(fixed_trace, w), iae(reconf_trace, w)
        rows.append(
            {"label": w.label, "start": w.start, "end": w.end, "output": w.output,
             "fixed": a, "reconfigurable": b, "ratio": _ratio(b, a)}
        )
    return ComparisonReport(rows, fixed_trace.scenario_digest)


def write_report(report, json_path, text_path=None):
    Path(json_path).write_text(report.to_json())
    if text_path is not None:
        Path(text_path).write_text(report.render())

"""Output files: monitor time series, snapshots, verdict summaries, plot data.

All files are UTF-8 with LF line endings; floats are written with 17
significant digits so that identical runs give byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .monitors import MONITOR_FIELDS, MonitorReport

TIMESERIES_HEADER = ",".join(MONITOR_FIELDS) + ",source"
SNAPSHOT_COLUMNS = ("chart", "x0", "x1", "target_chart")


def fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def timeseries_text(samples, source="full") -> str:
    lines = [TIMESERIES_HEADER]
    for s in samples:
        lines.append(",".join(fmt(v) for v in s.row()) + f",{source}")
    return "\n".join(lines) + "\n"


def write_timeseries(path, samples, source="full"):
    _write(path, timeseries_text(samples, source))


def read_timeseries(path):
    """Column dict of a time-series file (the source column is dropped)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return {k: np.array([float(r[i]) for r in rows]) for i, k in enumerate(header) if k != "source"}


def snapshot_text(f, t, step_index) -> str:
    """One row per owned node: domain chart and coordinates, target chart and coordinates."""
    g = f.grid
    c, i, j = g.nodes(g.owned)
    n = f.n
    cols = list(SNAPSHOT_COLUMNS) + [f"y{k}" for k in range(n)]
    lines = [f"# t={fmt(t)} step={step_index} domain={g.manifold!r} target={f.target!r}",
             "# chart: domain chart id; x0,x1: domain chart coordinates; "
             "target_chart, y*: target chart id and coordinates",
             ",".join(cols)]
    x = g.coords[c, i, j]
    tc = f.charts[c, i, j]
    y = f.values[c, i, j]
    for k in range(len(c)):
        row = [str(int(c[k])), fmt(x[k, 0]), fmt(x[k, 1]), str(int(tc[k]))] + [fmt(v) for v in y[k]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_snapshot(directory, f, t, step_index):
    path = os.path.join(directory, f"snapshot_{step_index:08d}.csv")
    _write(path, snapshot_text(f, t, step_index))
    return path


def verdict_text(verdicts) -> str:
    """One line per assertion: ``name,pass|fail|disabled,first_violation_time``."""
    lines = ["name,status,first_violation"]
    for v in verdicts.values():
        status = "disabled" if not v.enabled else ("pass" if v.passed else "fail")
        tv = "" if v.first_violation is None else fmt(v.first_violation)
        lines.append(f"{v.name},{status},{tv}")
    return "\n".join(lines) + "\n"


def write_verdicts(path, verdicts):
    _write(path, verdict_text(verdicts))


def write_json(path, data):
    _write(path, json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return repr(x)


def emit_plotdata(report: MonitorReport, directory, prefix=""):
    """Write ``<prefix><monitor>.dat`` two-column (t, value) files; returns their paths."""
    paths = []
    for name in MONITOR_FIELDS[1:]:
        lines = [f"t,{name}"]
        for s in report.samples:
            lines.append(f"{fmt(s.t)},{fmt(getattr(s, name))}")
        path = os.path.join(directory, f"{prefix}{name}.dat")
        _write(path, "\n".join(lines) + "\n")
        paths.append(path)
    return paths

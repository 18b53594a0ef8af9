"""CSV and JSON output formats.

Conventions (stable across runs so outputs are byte-identical):

* floats print with repr-faithful '%.17g';
* complex matrices serialize to JSON as nested arrays of [re, im] pairs;
* files are written atomically (temp file + rename);
* trajectory CSV header is ``t`` followed by flattened state labels,
  row-major over matrix entries with ``_re``/``_im`` suffixes for quantum
  states and ``p_<i>`` for classical ones.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .information import InfoSeries
from .phase_diagram import SweepResult
from .states import Trajectory


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def write_text_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, payload: dict):
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def complex_matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def json_to_complex_matrix(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def trajectory_csv(traj: Trajectory) -> str:
    lines = []
    if traj.kind == "quantum":
        d = traj.dim
        labels = []
        for i in range(d):
            for j in range(d):
                labels.append(f"rho_{i}{j}_re")
                labels.append(f"rho_{i}{j}_im")
        lines.append("t," + ",".join(labels))
        for k, t in enumerate(traj.grid.points):
            cells = [fmt(t)]
            for i in range(d):
                for j in range(d):
                    v = traj.states[k, i, j]
                    cells.append(fmt(v.real))
                    cells.append(fmt(v.imag))
            lines.append(",".join(cells))
    else:
        n = traj.dim
        lines.append("t," + ",".join(f"p_{i}" for i in range(n)))
        for k, t in enumerate(traj.grid.points):
            lines.append(",".join([fmt(t)] + [fmt(v) for v in traj.states[k]]))
    return "\n".join(lines) + "\n"


def info_series_csv(series: InfoSeries) -> str:
    mask = series.skipped()
    lines = ["t,value,skipped"]
    for t, v, s in zip(series.grid.points, series.values, mask):
        lines.append(f"{fmt(t)},{fmt(v)},{fmt(bool(s))}")
    return "\n".join(lines) + "\n"


def sampled_generator_csv(gen) -> str:
    """Flattened generator samples; gap rows carry an in_gap marker."""
    dd = gen.matrix_dim
    labels = []
    quantum = gen.kind == "quantum"
    for i in range(dd):
        for j in range(dd):
            if quantum:
                labels.append(f"g_{i}_{j}_re")
                labels.append(f"g_{i}_{j}_im")
            else:
                labels.append(f"w_{i}_{j}")
    lines = ["t," + ",".join(labels) + ",in_gap"]
    mask = gen.gap_mask()
    for k, t in enumerate(gen.grid.points):
        cells = [fmt(t)]
        for i in range(dd):
            for j in range(dd):
                v = gen.samples[k, i, j]
                if quantum:
                    cells.append(fmt(complex(v).real))
                    cells.append(fmt(complex(v).imag))
                else:
                    cells.append(fmt(float(np.real(v))))
        cells.append(fmt(bool(mask[k])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def rate_traces_csv(report) -> str:
    k = report.rate_traces.shape[1] if report.rate_traces.ndim == 2 else 0
    lines = ["t," + ",".join(f"rate_{i}" for i in range(k))]
    for t, rates in zip(report.grid.points, report.rate_traces):
        cells = [fmt(t)] + [("" if np.isnan(r) else fmt(r)) for r in rates]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def sweep_csv(result: SweepResult) -> str:
    cols = result.columns()
    lines = [",".join(cols)]
    for row in result.rows:
        lines.append(",".join(fmt(row.get(c)) for c in cols))
    return "\n".join(lines) + "\n"

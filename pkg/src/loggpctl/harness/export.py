"""File outputs: per-run CSV, study summary JSON, config echo.

CSV layout (one row per GP tick, ``d`` = plant degrees of freedom, vector
quantities expand to ``name_1 .. name_d``)::

    t, q, qdot, qddot, q_ref, p, p_ref, u, u_ctc, u_pd, u_ff, y, f,
    lat_update, lat_predict

Times in seconds, positions in metres (or radians for arm joints), forces in
newtons (or N m).  Floats are written with ``repr`` so they round-trip
exactly; missing values are ``nan``.  The same column order is documented in
``docs/csv_format.md``.

Both writers are byte-stable: identical inputs give identical files.  Wall
clock latencies are non-deterministic, so they live in the CSV and in a
separate latency report, never in the summary JSON.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .trial import RunLog

__all__ = [
    "SUMMARY_SCHEMA",
    "CSV_VECTOR_COLUMNS",
    "csv_header",
    "write_run_csv",
    "read_run_csv",
    "dumps_json",
    "write_json",
]

SUMMARY_SCHEMA = "loggpctl.summary/1"
CSV_VECTOR_COLUMNS = ("q", "qdot", "qddot", "q_ref", "p", "p_ref", "u", "u_ctc", "u_pd", "u_ff", "y", "f")


def csv_header(d: int) -> list[str]:
    cols = ["t"]
    for name in CSV_VECTOR_COLUMNS:
        cols.extend(f"{name}_{i + 1}" for i in range(d))
    cols += ["lat_update", "lat_predict"]
    return cols


def _fmt(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def write_run_csv(log: RunLog, path) -> Path:
    path = Path(path)
    d = log.q.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(d))
    blocks = [log.t[:, None]] + [getattr(log, name) for name in CSV_VECTOR_COLUMNS] \
        + [log.lat_update[:, None], log.lat_predict[:, None]]
    table = np.hstack(blocks) if len(log) else np.zeros((0, len(csv_header(d))))
    for row in table:
        w.writerow([_fmt(v) for v in row])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_run_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))


def _clean(obj):
    # NaN/inf are not JSON; numpy scalars are not serialisable
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(payload) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(payload, path) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps_json(payload))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path

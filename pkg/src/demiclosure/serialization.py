"""JSON and CSV output.

Floats are written with ``repr``: the shortest string that round-trips to
the same double, which never needs more than 17 significant digits.
Non-finite floats become ``null`` in JSON so every report stays valid JSON.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_trace_csv(path, trace, probes: Sequence[int] | None = None) -> Path:
    """Columns ``iter, residual, inner_diag, shadow_<k>`` for each probe ``k``."""
    probes = list(trace.probes if probes is None else probes)
    header = ["iter", "residual", "inner_diag"] + [f"shadow_{k}" for k in probes]
    rows = (
        [int(n), float(r), float(ip)] + [float(s[k]) for k in probes]
        for n, r, ip, s in zip(trace.iters, trace.residual, trace.inner_diag, trace.shadow)
    )
    return write_csv(path, header, rows)

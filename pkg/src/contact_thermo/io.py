"""CSV and manifest serialization shared by every module and the CLI.

Floats are written with ``repr`` which yields the shortest decimal string
that round-trips to the same IEEE-754 double. Files use LF line endings.
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_manifest",
    "MANIFEST_NAME",
]

MANIFEST_NAME = "manifest.json"


def fmt(x) -> str:
    """Shortest round-trip decimal for numbers, '' for None/NaN placeholders."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    v = float(x)
    if math.isnan(v):
        return ""
    return repr(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Iterable[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        for line in comments:
            fh.write(line.rstrip("\n") + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray, list[str]]:
    """Return (header, float array with NaN for empty fields, comment lines)."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    reader = csv.reader(ln for ln in lines if ln and not ln.startswith("#"))
    header = next(reader)
    rows = [[float(v) if v != "" else math.nan for v in r] for r in reader]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header)), comments


def trajectory_header(n: int) -> list[str]:
    return ["t", *[f"p_{i + 1}" for i in range(n)], *[f"q_{i + 1}" for i in range(n)], "z"]


def write_trajectory_csv(path, traj) -> Path:
    """Trajectory export: header ``t,p_1..p_n,q_1..q_n,z`` plus ``#event,`` lines."""
    comments = [
        "#event," + ",".join([fmt(e.time), e.kind, json.dumps(e.payload, separators=(",", ":"), default=_jsonable)])
        for e in traj.events
    ]
    rows = (np.concatenate([[t], x]) for t, x in zip(traj.times, traj.points))
    return write_csv(path, trajectory_header(traj.n), rows, comments)


def read_trajectory_csv(path):
    from .flow import Event, Trajectory

    header, data, comments = read_csv(path)
    n = (len(header) - 2) // 2
    events = []
    for line in comments:
        if line.startswith("#event,"):
            _, t, kind, payload = line.split(",", 3)
            events.append(Event(float(t), kind, json.loads(payload)))
    return Trajectory(data[:, 0], data[:, 1:], events, n)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    return repr(o)


def write_manifest(outdir, command: str, params: dict, outputs: Sequence[str], seed=None,
                   tolerances: dict | None = None, started: float | None = None, extra: dict | None = None) -> Path:
    """Write the single ``manifest.json`` of an output directory."""
    from . import __version__

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    now = time.time()
    doc = {
        "command": command,
        "parameters": params,
        "seed": seed,
        "tolerances": tolerances or {},
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_clock_s": None if started is None else now - started,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(now)),
        "outputs": sorted(os.path.basename(o) for o in outputs),
    }
    if extra:
        doc.update(extra)
    path = outdir / MANIFEST_NAME
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path

"""On-disk formats: ensemble snapshots and CSV reports.

Ensemble binary layout: a fixed little-endian header (magic, version,
n_paths, n_steps, dim, t_start, t_end) followed by the raw float64 values
in C (row-major) order. CSV export is for small ensembles only.

Every CSV report starts with '#'-prefixed metadata lines (config hash,
master seed, artifact version); bodies are rendered with repr() so reruns
with identical headers are byte-identical.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import PathEnsemble, TimeGrid

__all__ = [
    "save_ensemble",
    "load_ensemble",
    "ensemble_to_csv",
    "write_report",
    "format_cell",
]

_MAGIC = b"CHEN"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQQdd")
_CSV_CELL_LIMIT = 2_000_000


def save_ensemble(ensemble: PathEnsemble, path) -> None:
    g = ensemble.grid
    header = _HEADER.pack(
        _MAGIC, _VERSION, ensemble.n_paths, g.n_steps, ensemble.dim,
        g.t_start, g.t_end,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ensemble.values, dtype="<f8").tobytes())


def load_ensemble(path) -> PathEnsemble:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, version, n_paths, n_steps, dim, t_start, t_end = _HEADER.unpack(raw)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError(f"{path}: not a recognized ensemble file")
        body = np.frombuffer(fh.read(), dtype="<f8")
    values = body.reshape(n_paths, n_steps + 1, dim).astype(np.float64)
    return PathEnsemble(TimeGrid(t_start, t_end, int(n_steps)), values)


def ensemble_to_csv(ensemble: PathEnsemble, path) -> None:
    """Human-readable dump (path, step, time, coordinates); small N only."""
    n_cells = ensemble.n_paths * (ensemble.grid.n_steps + 1) * ensemble.dim
    if n_cells > _CSV_CELL_LIMIT:
        raise ValueError(
            f"ensemble too large for CSV export ({n_cells} cells); "
            "use the binary format"
        )
    times = ensemble.grid.times()
    cols = ",".join(f"x{j}" for j in range(ensemble.dim))
    with open(path, "w") as fh:
        fh.write(f"path,step,time,{cols}\n")
        for i in range(ensemble.n_paths):
            for k in range(ensemble.grid.n_steps + 1):
                vals = ",".join(repr(v) for v in ensemble.values[i, k])
                fh.write(f"{i},{k},{repr(times[k])},{vals}\n")


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_report(path, columns, rows, meta: dict) -> None:
    """CSV with deterministic '#' metadata header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(row[c]) for c in columns) + "\n")

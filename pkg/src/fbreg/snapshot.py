"""Solution snapshots: a CSV with header ``x,y,u,active`` plus a JSON sidecar.

Rows are node-per-line in row-major order of the ``[i, j]`` array (x1 outer,
x2 inner). Floats are printed with 17 significant digits, which round-trips
doubles exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import Grid2, GridMismatch, ScalarField

HEADER = ["x", "y", "u", "active"]


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_snapshot(csv_path, sol, operator, tol: float, extra: dict | None = None) -> Path:
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    grid = sol.grid
    x, y = grid.mesh()
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(HEADER) + "\n")
        for xi, yi, ui, ai in zip(x.ravel(), y.ravel(), sol.u.values.ravel(), sol.active_mask.ravel()):
            fh.write(f"{fmt(xi)},{fmt(yi)},{fmt(ui)},{int(ai)}\n")
    meta = {
        "grid": grid.to_dict(),
        "operator": operator.to_dict(),
        "tol": tol,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "threshold": sol.threshold,
        "converged": sol.converged,
    }
    if extra:
        meta.update(extra)
    side = sidecar_path(csv_path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def read_snapshot(csv_path):
    """Returns (u, active mask, sidecar dict). The grid comes from the sidecar
    if present, else it is inferred from the node coordinates."""
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != HEADER[:3]:
            raise ValueError(f"{csv_path}: expected header {','.join(HEADER)}, got {header}")
        rows = [r for r in reader if r]
    data = np.array([[float(v) for v in r[:3]] for r in rows])
    active = np.array([bool(int(r[3])) for r in rows]) if len(header) > 3 else None
    side = sidecar_path(csv_path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    if "grid" in meta:
        grid = Grid2.from_dict(meta["grid"])
    else:
        n_nodes = int(round(np.sqrt(len(rows))))
        grid = Grid2(float(np.max(np.abs(data[:, 0]))), n_nodes - 1)
    if len(rows) != grid.n_nodes**2:
        raise GridMismatch(f"{csv_path}: {len(rows)} rows for a grid of {grid.n_nodes}^2 nodes")
    x, y = grid.mesh()
    if not (np.allclose(data[:, 0], x.ravel(), atol=1e-12) and np.allclose(data[:, 1], y.ravel(), atol=1e-12)):
        raise GridMismatch(f"{csv_path}: node coordinates do not match {grid}")
    u = ScalarField(grid, data[:, 2].reshape(grid.shape))
    if active is not None:
        active = active.reshape(grid.shape)
    return u, active, meta

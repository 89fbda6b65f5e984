"""Snapshot serialization: a flat binary layout and CSV for small grids.

Binary layout (little endian)::

    magic      4s   b"MLF1"
    geometry   u32  0 = torus, 1 = channel
    nx, ny     u32
    ncomp      u32
    parity     ncomp x u32   0 = none, 1 = even, 2 = odd
    time       f64
    epsilon    f64  (NaN when not applicable)
    payload    ncomp blocks of row-major f64 physical values,
               shape (nx, ny) on the torus and (nx, ny + 1) on the channel
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .spectral import EVEN, ODD, Geometry, ScalarField, VectorField, make_grid

MAGIC = b"MLF1"
CSV_MAX_POINTS = 128 * 129

_GEOM = {Geometry.TORUS: 0, Geometry.CHANNEL: 1}
_PAR = {None: 0, EVEN: 1, ODD: 2}


def _flatten(fields: Sequence[Union[ScalarField, VectorField]]) -> list[ScalarField]:
    out: list[ScalarField] = []
    for f in fields:
        if isinstance(f, VectorField):
            out.extend([f.u, f.w])
        else:
            out.append(f)
    if not out:
        raise ValueError("nothing to write")
    grid = out[0].grid
    if any(s.grid != grid for s in out):
        raise ValueError("all fields must share one grid")
    return out


def write_snapshot(path, fields, time: float = 0.0, epsilon: float = math.nan) -> Path:
    comps = _flatten(fields)
    grid = comps[0].grid
    head = struct.pack("<4sIIII", MAGIC, _GEOM[grid.geometry], grid.nx, grid.ny, len(comps))
    head += struct.pack(f"<{len(comps)}I", *[_PAR[c.parity] for c in comps])
    head += struct.pack("<dd", time, epsilon)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(head)
        for c in comps:
            fh.write(np.ascontiguousarray(c.values, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> dict:
    """Return ``{"grid", "fields", "time", "epsilon"}`` from a binary snapshot."""
    data = Path(path).read_bytes()
    magic, geom, nx, ny, ncomp = struct.unpack_from("<4sIIII", data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    off = struct.calcsize("<4sIIII")
    parities = struct.unpack_from(f"<{ncomp}I", data, off)
    off += 4 * ncomp
    time, epsilon = struct.unpack_from("<dd", data, off)
    off += 16
    geometry = Geometry.TORUS if geom == 0 else Geometry.CHANNEL
    grid = make_grid(geometry, nx, ny)
    rows = ny + 1 if grid.is_channel else ny
    inv_par = {v: k for k, v in _PAR.items()}
    fields = []
    for p in parities:
        block = np.frombuffer(data, dtype="<f8", count=nx * rows, offset=off).reshape(nx, rows)
        off += 8 * nx * rows
        fields.append(ScalarField.from_values(grid, block, inv_par[p]))
    return {"grid": grid, "fields": fields, "time": time, "epsilon": epsilon}


def write_csv(path, fields, names: Sequence[str] | None = None) -> Path:
    comps = _flatten(fields)
    grid = comps[0].grid
    if grid.nx * len(grid.y) > CSV_MAX_POINTS:
        raise ValueError("grid too large for CSV output; use the binary format")
    names = list(names) if names else [f"f{i}" for i in range(len(comps))]
    if len(names) != len(comps):
        raise ValueError("one column name per component required")
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", *names])
        cols = [X.ravel(), Y.ravel()] + [c.values.ravel() for c in comps]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
    return path

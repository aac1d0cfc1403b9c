"""CSV and little-endian binary formats shared by all modules.

Binary layout
-------------
Every file starts with ``int64 dim, int64 n, float64 L`` describing the
underlying grid.  The payload is interleaved ``re, im`` float64 pairs in C
order.  Two header extensions exist:

* ensembles append ``int64 N`` (number of rows) before the payload;
* two-axis arrays (symbols, time-frequency arrays, operator matrices)
  append ``int64 n0, int64 n1``.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .grid import Grid, GridFunction

__all__ = [
    "write_grid_function",
    "read_grid_function",
    "write_ensemble_binary",
    "read_ensemble_binary",
    "write_array2",
    "read_array2",
    "grid_function_to_csv",
    "grid_function_from_csv",
    "array2_to_csv",
    "fmt",
]

_HEAD = struct.Struct("<qqd")


def fmt(v: float) -> str:
    """Fixed float formatting used in every CSV table (byte-stable)."""
    return f"{float(v):.12e}"


def _payload(values) -> bytes:
    a = np.ascontiguousarray(np.asarray(values, dtype="<c16"))
    return a.view("<f8").tobytes()


def _read_payload(buf: bytes, offset: int, count: int) -> np.ndarray:
    raw = np.frombuffer(buf, dtype="<f8", count=2 * count, offset=offset)
    return raw.view("<c16").astype(complex)


def _read_head(buf: bytes) -> Grid:
    dim, n, L = _HEAD.unpack_from(buf, 0)
    return Grid(n, L, dim)


def write_grid_function(path, f: GridFunction) -> None:
    g = f.grid
    Path(path).write_bytes(_HEAD.pack(g.dim, g.n, g.L) + _payload(f.values))


def read_grid_function(path, domain: str = "x") -> GridFunction:
    buf = Path(path).read_bytes()
    g = _read_head(buf)
    return GridFunction(_read_payload(buf, _HEAD.size, g.size), g, domain)


def write_ensemble_binary(path, samples: np.ndarray, grid: Grid) -> None:
    s = np.asarray(samples)
    head = _HEAD.pack(grid.dim, grid.n, grid.L) + struct.pack("<q", s.shape[0])
    Path(path).write_bytes(head + _payload(s))


def read_ensemble_binary(path):
    """Return ``(samples, grid)``."""
    buf = Path(path).read_bytes()
    g = _read_head(buf)
    (N,) = struct.unpack_from("<q", buf, _HEAD.size)
    vals = _read_payload(buf, _HEAD.size + 8, N * g.size)
    return vals.reshape((N,) + (g.size,)), g


def write_array2(path, values: np.ndarray, grid: Grid) -> None:
    a = np.asarray(values)
    if a.ndim != 2:
        raise ValueError("expected a two-axis array")
    head = _HEAD.pack(grid.dim, grid.n, grid.L) + struct.pack("<qq", *a.shape)
    Path(path).write_bytes(head + _payload(a))


def read_array2(path):
    """Return ``(array, grid)`` from a two-axis binary file."""
    buf = Path(path).read_bytes()
    g = _read_head(buf)
    n0, n1 = struct.unpack_from("<qq", buf, _HEAD.size)
    vals = _read_payload(buf, _HEAD.size + 16, n0 * n1)
    return vals.reshape(n0, n1), g


def grid_function_to_csv(path, f: GridFunction) -> None:
    coords = [c.ravel() for c in f.grid.nodes(f.domain)]
    names = ["x"] if f.grid.dim == 1 else ["x1", "x2"]
    if f.domain == "xi":
        names = [s.replace("x", "xi") for s in names]
    v = f.values.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["re", "im"])
        for i in range(v.size):
            w.writerow([fmt(c[i]) for c in coords] + [fmt(v[i].real), fmt(v[i].imag)])


def grid_function_from_csv(path, grid: Grid, domain: str = "x") -> GridFunction:
    """Read a grid-function CSV; rows must follow the node order of ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    ire, iim = header.index("re"), header.index("im")
    vals = np.array([float(r[ire]) + 1j * float(r[iim]) for r in body])
    ncoord = ire
    coords = np.array([[float(r[c]) for c in range(ncoord)] for r in body])
    expect = np.stack([c.ravel() for c in grid.nodes(domain)], axis=1)
    if coords.shape != expect.shape or not np.allclose(coords, expect, atol=1e-9 * grid.L):
        raise ValueError("CSV coordinates do not match the grid")
    return GridFunction(vals, grid, domain)


def array2_to_csv(path, values: np.ndarray, axis0: np.ndarray, axis1: np.ndarray, names=("x", "xi")) -> None:
    a = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["re", "im"])
        for i, u in enumerate(axis0):
            for j, v in enumerate(axis1):
                w.writerow([fmt(u), fmt(v), fmt(a[i, j].real), fmt(a[i, j].imag)])

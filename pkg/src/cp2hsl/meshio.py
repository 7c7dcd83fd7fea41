"""Mesh CSV and report JSON interchange.

Mesh rows: u, v, w_re, w_im, z1_re, z1_im, z2_re, z2_im, z3_re, z3_im with
(u, v) the integer grid indices.  Floats are written with repr so a
read-back is bit-exact, and the reader reconstructs the affine grid frame
from the w column.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .geomverify import ImmersionSample

__all__ = ["mesh_to_csv", "mesh_from_csv", "write_report", "read_report"]

_COLUMNS = ["u", "v", "w_re", "w_im",
            "z1_re", "z1_im", "z2_re", "z2_im", "z3_re", "z3_im"]


def mesh_to_csv(sample: ImmersionSample) -> str:
    n, m = sample.shape
    W = sample.w_grid()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_COLUMNS)
    for i in range(n):
        for j in range(m):
            z = sample.lifts[i, j]
            row = [i, j, repr(W[i, j].real), repr(W[i, j].imag)]
            for k in range(3):
                row += [repr(z[k].real), repr(z[k].imag)]
            writer.writerow(row)
    return buf.getvalue()


def mesh_from_csv(text: str) -> ImmersionSample:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != _COLUMNS:
        raise ValueError(f"unexpected mesh header: {header}")
    rows = [r for r in reader if r]
    us = sorted({int(r[0]) for r in rows})
    vs = sorted({int(r[1]) for r in rows})
    n, m = len(us), len(vs)
    if n * m != len(rows):
        raise ValueError("mesh grid is not complete")
    lifts = np.zeros((n, m, 3), dtype=complex)
    W = np.zeros((n, m), dtype=complex)
    for r in rows:
        i, j = int(r[0]), int(r[1])
        W[i, j] = complex(float(r[2]), float(r[3]))
        lifts[i, j] = [complex(float(r[4 + 2 * k]), float(r[5 + 2 * k]))
                       for k in range(3)]
    if n < 2 or m < 2:
        raise ValueError("mesh must be at least 2x2")
    d1 = W[1, 0] - W[0, 0]
    d2 = W[0, 1] - W[0, 0]
    h1, h2 = abs(d1), abs(d2)
    if h1 < 1e-300 or h2 < 1e-300:
        raise ValueError("degenerate mesh spacing")
    # verify the grid really is affine in (u, v)
    I, J = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    Wfit = W[0, 0] + I * d1 + J * d2
    if np.abs(W - Wfit).max() > 1e-9 * max(1.0, np.abs(W).max()):
        raise ValueError("mesh w-coordinates are not an affine grid")
    return ImmersionSample(lifts, d1 / h1, d2 / h2, h1, h2, origin=complex(W[0, 0]))


def write_report(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_report(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)

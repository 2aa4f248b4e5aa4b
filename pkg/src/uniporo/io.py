"""CSV tables and legacy ASCII VTK snapshots."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError

VTK_TRIANGLE = 5


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        for r in self.rows:
            self._check(r)

    def _check(self, row):
        if len(row) != len(self.columns):
            raise InvalidArgumentError(f"row has {len(row)} entries, table has {len(self.columns)} columns")

    def append(self, row):
        row = list(row)
        self._check(row)
        self.rows.append(row)

    def column(self, name):
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def __len__(self):
        return len(self.rows)


def format_value(v):
    """Integers as-is, reals in scientific notation with 6 significant digits, missing as empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v + 0.0:.5e}"  # no negative zero


def write_csv(table: ResultTable, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([format_value(v) for v in r])
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`; empty cells come back as ``nan``."""
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path} is empty")
    body = [[float(c) if c else float("nan") for c in r] for r in rows[1:]]
    return ResultTable(rows[0], body)


def write_vtk(mesh, fields: dict, path, title="uniporo"):
    """Write vertex fields as a legacy ASCII unstructured grid.

    ``fields`` maps names to arrays of shape ``(n_vertices,)`` (scalars) or
    ``(n_vertices, 2)`` (vectors, padded with a zero z component).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nv = len(mesh.vertices)
    nt = len(mesh.triangles)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    if fields:
        lines.append(f"POINT_DATA {nv}")
    for name, values in fields.items():
        v = np.asarray(values, dtype=float)
        if v.shape == (nv,):
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{a:.16g}" for a in v]
        elif v.shape == (nv, 2):
            lines.append(f"VECTORS {name} double")
            lines += [f"{a:.16g} {b:.16g} 0" for a, b in v]
        else:
            raise InvalidArgumentError(f"field {name!r} has shape {v.shape}, expected ({nv},) or ({nv}, 2)")
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def state_vertex_fields(state, spaces):
    from .fem import vertex_values

    return {
        "u": vertex_values(spaces.V, state.u),
        "xi": vertex_values(spaces.W, state.xi),
        "phi": vertex_values(spaces.Q, state.phi),
        "psi": vertex_values(spaces.Q, state.psi),
    }

"""Structured triangulations of the unit square.

Each lattice square ``(i, j)`` is split along its lower-left to upper-right
diagonal into two triangles numbered ``2*(j*n + i)`` (below the diagonal)
and ``2*(j*n + i) + 1`` (above it).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InconsistentMeshError, InvalidArgumentError, OutOfDomainError

SIDES = ("right", "bottom", "left", "top")

_SCHEME_TAGS = {
    "all_dirichlet": {"right": "dirichlet", "bottom": "dirichlet", "left": "dirichlet", "top": "dirichlet"},
    "right_neumann": {"right": "neumann", "bottom": "dirichlet", "left": "dirichlet", "top": "dirichlet"},
    "barry_mercer": {"right": "gamma1", "bottom": "gamma2", "left": "gamma3", "top": "gamma4"},
}


@dataclass(frozen=True)
class BoundaryScheme:
    """Assignment of a tag to each side of the unit square."""

    kind: str
    tags: dict

    @classmethod
    def named(cls, kind: str) -> "BoundaryScheme":
        if kind not in _SCHEME_TAGS:
            raise InvalidArgumentError(f"unknown boundary scheme {kind!r}")
        return cls(kind, dict(_SCHEME_TAGS[kind]))

    def tag_for(self, side: str) -> str:
        return self.tags[side]


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    n: int
    vertices: np.ndarray  # (n_vertices, 2)
    triangles: np.ndarray  # (n_triangles, 3), counter-clockwise
    boundary_edges: np.ndarray  # (n_edges, 2) vertex pairs
    boundary_sides: tuple  # side name per boundary edge
    boundary_tags: tuple  # tag per boundary edge
    scheme: BoundaryScheme
    h: float

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges_with_tag(self, tag):
        idx = [k for k, t in enumerate(self.boundary_tags) if t == tag]
        return self.boundary_edges[idx]


def build_unit_square_mesh(n: int) -> Mesh:
    """Uniform ``n x n`` lattice triangulation, boundary tagged all-Dirichlet."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"mesh resolution must be a positive integer, got {n!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s)  # vertex (i, j) -> index j*(n+1) + i
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    k = np.arange(n)
    edges, sides = [], []
    for side, a, b in (
        ("right", k * (n + 1) + n, (k + 1) * (n + 1) + n),
        ("bottom", k, k + 1),
        ("left", k * (n + 1), (k + 1) * (n + 1)),
        ("top", n * (n + 1) + k, n * (n + 1) + k + 1),
    ):
        edges.append(np.column_stack([a, b]))
        sides += [side] * n
    scheme = BoundaryScheme.named("all_dirichlet")
    return Mesh(
        n=n,
        vertices=_frozen(vertices),
        triangles=_frozen(triangles),
        boundary_edges=_frozen(np.vstack(edges)),
        boundary_sides=tuple(sides),
        boundary_tags=tuple(scheme.tag_for(sd) for sd in sides),
        scheme=scheme,
        h=np.sqrt(2.0) / n,
    )


def _side_of_edge(p, q, tol=1e-12):
    for side, axis, value in (("right", 0, 1.0), ("bottom", 1, 0.0), ("left", 0, 0.0), ("top", 1, 1.0)):
        if abs(p[axis] - value) <= tol and abs(q[axis] - value) <= tol:
            return side
    return None


def tag_boundaries(mesh: Mesh, scheme) -> Mesh:
    """Return a copy of ``mesh`` whose boundary edges carry ``scheme``'s tags."""
    if isinstance(scheme, str):
        scheme = BoundaryScheme.named(scheme)
    sides = []
    for a, b in mesh.boundary_edges:
        side = _side_of_edge(mesh.vertices[a], mesh.vertices[b])
        if side is None:
            raise InconsistentMeshError(f"boundary edge ({a}, {b}) does not lie on a side of the unit square")
        sides.append(side)
    return replace(
        mesh,
        boundary_sides=tuple(sides),
        boundary_tags=tuple(scheme.tag_for(s) for s in sides),
        scheme=scheme,
    )


def barycentric(mesh: Mesh, tri: int, p) -> np.ndarray:
    a, b, c = mesh.vertices[mesh.triangles[tri]]
    T = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
    l1, l2 = np.linalg.solve(T, np.asarray(p, dtype=float) - a)
    return np.array([1.0 - l1 - l2, l1, l2])


def locate_point(mesh: Mesh, p, tol=1e-12):
    """Find the lowest-numbered triangle containing ``p``.

    Returns ``(triangle_index, barycentric_coordinates)``; the coordinates
    are ordered like the triangle's vertices.
    """
    x, y = float(p[0]), float(p[1])
    if not (-tol <= x <= 1 + tol and -tol <= y <= 1 + tol):
        raise OutOfDomainError(f"point ({x}, {y}) lies outside the unit square")
    n = mesh.n
    ci = min(max(int(np.floor(x * n)), 0), n - 1)
    cj = min(max(int(np.floor(y * n)), 0), n - 1)
    candidates = []
    for jj in (cj - 1, cj, cj + 1):
        for ii in (ci - 1, ci, ci + 1):
            if 0 <= ii < n and 0 <= jj < n:
                c = jj * n + ii
                candidates += [2 * c, 2 * c + 1]
    for tri in sorted(candidates):
        lam = barycentric(mesh, tri, (x, y))
        if lam.min() >= -tol:
            lam = np.clip(lam, 0.0, None)
            return tri, lam / lam.sum()
    raise OutOfDomainError(f"no triangle contains ({x}, {y})")


def locate_points(mesh: Mesh, pts):
    """:func:`locate_point` applied to each row of an ``(m, 2)`` array."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tris = np.empty(len(pts), dtype=np.int64)
    lams = np.empty((len(pts), 3))
    for k, p in enumerate(pts):
        tris[k], lams[k] = locate_point(mesh, p)
    return tris, lams

"""Continuous Lagrange spaces (degrees 1-3) and form assembly on triangles.

Global DOFs live on the refined lattice of spacing ``1/(degree*n)``: the
scalar DOF of lattice point ``(I, J)`` is ``J*(degree*n + 1) + I``.  Vector
spaces interleave components, so component ``c`` of node ``k`` is DOF
``2*k + c``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, OutOfDomainError
from .mesh import Mesh, locate_point
from .quadrature import triangle_rule


# -- reference element -------------------------------------------------------

@lru_cache(maxsize=None)
def reference_nodes(degree):
    """Equispaced nodes ``(i/d, j/d)`` with ``i + j <= d``, j-major."""
    return np.array([(i / degree, j / degree)
                     for j in range(degree + 1) for i in range(degree + 1 - j)])


def _monomials(degree):
    return [(a, b) for total in range(degree + 1) for b in range(total + 1) for a in (total - b,)]


@lru_cache(maxsize=None)
def _basis_coefficients(degree):
    nodes = reference_nodes(degree)
    mons = _monomials(degree)
    V = np.array([[x ** a * y ** b for a, b in mons] for x, y in nodes])
    return np.linalg.inv(V)  # column k holds the monomial coefficients of basis k


def reference_basis(degree, pts):
    """Values ``(m, nloc)`` and gradients ``(m, nloc, 2)`` at reference points."""
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    C = _basis_coefficients(degree)
    mons = _monomials(degree)
    P = np.empty((len(pts), len(mons)))
    Px = np.zeros_like(P)
    Py = np.zeros_like(P)
    for m, (a, b) in enumerate(mons):
        P[:, m] = x ** a * y ** b
        if a > 0:
            Px[:, m] = a * x ** (a - 1) * y ** b
        if b > 0:
            Py[:, m] = b * x ** a * y ** (b - 1)
    return P @ C, np.stack([Px @ C, Py @ C], axis=-1)


# -- spaces --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh
    degree: int
    components: int
    node_coords: np.ndarray  # (n_nodes, 2)
    node_map: np.ndarray  # (n_triangles, nloc) element -> scalar node index

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def n_dofs(self):
        return self.components * self.n_nodes

    @property
    def n_local(self):
        return self.node_map.shape[1] * self.components

    @cached_property
    def dof_map(self):
        if self.components == 1:
            return self.node_map
        c = self.components
        out = np.empty((self.node_map.shape[0], self.node_map.shape[1] * c), dtype=np.int64)
        for k in range(c):
            out[:, k::c] = c * self.node_map + k
        return out

    @property
    def dof_coords(self):
        return np.repeat(self.node_coords, self.components, axis=0)

    def nodes_on_side(self, side, tol=1e-12):
        x, y = self.node_coords[:, 0], self.node_coords[:, 1]
        sel = {"left": np.abs(x) <= tol, "right": np.abs(x - 1) <= tol,
               "bottom": np.abs(y) <= tol, "top": np.abs(y - 1) <= tol}[side]
        return np.flatnonzero(sel)

    def boundary_nodes(self):
        return np.unique(np.concatenate([self.nodes_on_side(s) for s in ("left", "right", "bottom", "top")]))

    @cached_property
    def geometry(self):
        return _Geometry.of(self.mesh)


@dataclass(frozen=True, eq=False)
class _Geometry:
    origin: np.ndarray  # (ne, 2)
    jac: np.ndarray  # (ne, 2, 2): columns v1 - v0, v2 - v0
    det: np.ndarray  # (ne,)
    inv_t: np.ndarray  # (ne, 2, 2): inverse transpose of jac

    @classmethod
    def of(cls, mesh):
        p = mesh.vertices[mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv_t = np.empty_like(jac)
        inv_t[:, 0, 0] = jac[:, 1, 1] / det
        inv_t[:, 0, 1] = -jac[:, 1, 0] / det
        inv_t[:, 1, 0] = -jac[:, 0, 1] / det
        inv_t[:, 1, 1] = jac[:, 0, 0] / det
        return cls(p[:, 0], jac, det, inv_t)

    def map(self, ref_pts):
        """Physical coordinates ``(ne, m, 2)`` of reference points."""
        return self.origin[:, None, :] + np.einsum("eij,mj->emi", self.jac, ref_pts)


def build_space(mesh: Mesh, degree: int, components: int = 1) -> FeSpace:
    if degree not in (1, 2, 3):
        raise InvalidArgumentError(f"unsupported polynomial degree {degree!r}")
    if components not in (1, 2):
        raise InvalidArgumentError(f"components must be 1 or 2, got {components!r}")
    n = mesh.n
    m = degree * n
    s = np.linspace(0.0, 1.0, m + 1)
    X, Y = np.meshgrid(s, s)
    node_coords = np.column_stack([X.ravel(), Y.ravel()])

    geo = _Geometry.of(mesh)
    phys = geo.map(reference_nodes(degree))
    I = np.rint(phys[..., 0] * m).astype(np.int64)
    J = np.rint(phys[..., 1] * m).astype(np.int64)
    node_map = J * (m + 1) + I
    node_coords.setflags(write=False)
    node_map.setflags(write=False)
    return FeSpace(mesh, degree, components, node_coords, node_map)


def taylor_hood_spaces(mesh: Mesh, k: int, l: int):
    """Vector degree ``k``, scalar ``k - 1`` and scalar ``l`` spaces (``Q_h = S_h``)."""
    if k not in (2, 3):
        raise InvalidArgumentError(f"Taylor-Hood displacement degree must be 2 or 3, got {k!r}")
    if l not in (1, 2, 3):
        raise InvalidArgumentError(f"transport degree must be in 1..3, got {l!r}")
    return Spaces(build_space(mesh, k, 2), build_space(mesh, k - 1, 1), build_space(mesh, l, 1))


# -- element tabulation ----------------------------------------------------------

def _tabulate(space, rule):
    phi, dphi_ref = reference_basis(space.degree, rule.points)
    geo = space.geometry
    dphi = np.einsum("eij,mkj->emki", geo.inv_t, dphi_ref)  # (ne, nq, nloc, 2)
    wdet = geo.det[:, None] * rule.weights[None, :]  # (ne, nq)
    return phi, dphi, wdet


def _scatter(local, rows, cols, shape):
    ne, nr, nc = local.shape
    I = np.broadcast_to(rows[:, :, None], (ne, nr, nc)).ravel()
    J = np.broadcast_to(cols[:, None, :], (ne, nr, nc)).ravel()
    A = sp.coo_matrix((local.ravel(), (I, J)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _check_same_mesh(a, b):
    if a.mesh is not b.mesh:
        raise InvalidArgumentError("spaces are defined on different meshes")


def _require_scalar(space, what):
    if space.components != 1:
        raise InvalidArgumentError(f"{what} requires a scalar space")


def assemble_mass(space_row: FeSpace, space_col: FeSpace, coeff=1.0):
    """``coeff * (chi_j, chi_i)`` with rows from ``space_row``."""
    _check_same_mesh(space_row, space_col)
    _require_scalar(space_row, "mass matrix")
    _require_scalar(space_col, "mass matrix")
    rule = triangle_rule(2 * max(space_row.degree, space_col.degree) + 2)
    pr, _, wdet = _tabulate(space_row, rule)
    pc, _, _ = _tabulate(space_col, rule)
    local = coeff * np.einsum("eq,qi,qj->eij", wdet, pr, pc)
    return _scatter(local, space_row.dof_map, space_col.dof_map, (space_row.n_dofs, space_col.n_dofs))


def assemble_stiffness(space: FeSpace, coeff=1.0):
    _require_scalar(space, "stiffness matrix")
    rule = triangle_rule(2 * space.degree + 2)
    _, d, wdet = _tabulate(space, rule)
    local = coeff * np.einsum("eq,eqid,eqjd->eij", wdet, d, d)
    return _scatter(local, space.dof_map, space.dof_map, (space.n_dofs, space.n_dofs))


def assemble_elasticity(space: FeSpace, mu):
    """``2 mu (eps(chi_j), eps(chi_i))`` on a vector space."""
    if space.components != 2:
        raise InvalidArgumentError("elasticity form requires a vector space")
    rule = triangle_rule(2 * space.degree + 2)
    _, d, wdet = _tabulate(space, rule)
    # eps(phi_a e_c) : eps(phi_b e_e) = (delta_ce grad_a.grad_b + d_e phi_a d_c phi_b) / 2
    gg = np.einsum("eq,eqad,eqbd->eab", wdet, d, d)
    cross = np.einsum("eq,eqai,eqbj->eabij", wdet, d, d)  # [a, b, i, j] = d_i phi_a d_j phi_b
    ne, nl = gg.shape[:2]
    local = np.zeros((ne, nl, 2, nl, 2))
    for c in range(2):
        for e in range(2):
            block = cross[:, :, :, e, c].copy()
            if c == e:
                block += gg
            local[:, :, c, :, e] = block
    local = mu * local.reshape(ne, 2 * nl, 2 * nl)
    return _scatter(local, space.dof_map, space.dof_map, (space.n_dofs, space.n_dofs))


def assemble_divergence(space_v: FeSpace, space_w: FeSpace):
    """``(div chi_j^vec, chi_i^sc)``; rows are scalar DOFs."""
    _check_same_mesh(space_v, space_w)
    if space_v.components != 2:
        raise InvalidArgumentError("divergence needs a vector trial space")
    _require_scalar(space_w, "divergence test space")
    rule = triangle_rule(2 * max(space_v.degree, space_w.degree) + 2)
    _, dv, wdet = _tabulate(space_v, rule)
    pw, _, _ = _tabulate(space_w, rule)
    ne = dv.shape[0]
    nl = dv.shape[2]
    # local column ordering matches dof_map: (node a, component c) -> 2a + c
    div = dv.reshape(ne, dv.shape[1], 2 * nl)
    local = np.einsum("eq,qi,eqj->eij", wdet, pw, div)
    return _scatter(local, space_w.dof_map, space_v.dof_map, (space_w.n_dofs, space_v.n_dofs))


# -- loads ---------------------------------------------------------------------

@dataclass(frozen=True)
class PointSource:
    """Dirac load ``amplitude(t) * delta(x - x0)``."""

    location: tuple
    amplitude: object  # callable t -> float

    def __post_init__(self):
        x, y = self.location
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise OutOfDomainError(f"point source location {self.location} outside the unit square")


def assemble_load(space: FeSpace, f, t=0.0):
    """Load vector ``(f(., t), chi_i)``.

    ``f`` is either a :class:`PointSource` or a vectorised callable
    ``f(x, y, t)`` returning an array shaped like ``x`` (scalar space) or a
    pair of such arrays (vector space).
    """
    b = np.zeros(space.n_dofs)
    if f is None:
        return b
    if isinstance(f, PointSource):
        tri, lam = locate_point(space.mesh, f.location)
        vals, _ = reference_basis(space.degree, lam[1:][None, :])
        amp = float(f.amplitude(t))
        dofs = space.node_map[tri]
        if space.components == 1:
            np.add.at(b, dofs, amp * vals[0])
        else:
            raise InvalidArgumentError("point sources are scalar loads")
        return b
    rule = triangle_rule(2 * space.degree + 2)
    phi, _, wdet = _tabulate(space, rule)
    xq = space.geometry.map(rule.points)
    val = f(xq[..., 0], xq[..., 1], t)
    if space.components == 1:
        val = np.broadcast_to(val, wdet.shape)
        local = np.einsum("eq,eq,qi->ei", wdet, val, phi)
    else:
        fx = np.broadcast_to(val[0], wdet.shape)
        fy = np.broadcast_to(val[1], wdet.shape)
        ne, nl = wdet.shape[0], phi.shape[1]
        local = np.empty((ne, nl, 2))
        local[:, :, 0] = np.einsum("eq,eq,qi->ei", wdet, fx, phi)
        local[:, :, 1] = np.einsum("eq,eq,qi->ei", wdet, fy, phi)
        local = local.reshape(ne, 2 * nl)
    np.add.at(b, space.dof_map.ravel(), local.ravel())
    return b


# -- constraints ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DofConstraintSet:
    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, indices, values=0.0):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(values, dtype=float), idx.shape).copy()
        order = np.argsort(idx, kind="stable")
        idx, vals = idx[order], vals[order]
        if len(idx):
            same = idx[1:] == idx[:-1]
            if np.any(same & (vals[1:] != vals[:-1])):
                raise InvalidArgumentError("conflicting values prescribed for the same DOF")
            keep = np.concatenate([[True], ~same])
            idx, vals = idx[keep], vals[keep]
        return cls(idx, vals)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    def __len__(self):
        return len(self.indices)

    def shifted(self, offset):
        return DofConstraintSet(self.indices + offset, self.values)

    @staticmethod
    def union(*sets):
        return DofConstraintSet.build(np.concatenate([s.indices for s in sets]),
                                      np.concatenate([s.values for s in sets]))


def constrain_matrix(matrix, constraints: DofConstraintSet):
    """Zero constrained rows/columns and put 1 on their diagonal."""
    n = matrix.shape[0]
    free = np.ones(n)
    free[constraints.indices] = 0.0
    P = sp.diags(free)
    A = (P @ matrix @ P + sp.diags(1.0 - free)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def constrain_rhs(matrix, rhs, constraints: DofConstraintSet):
    """Right-hand side matching :func:`constrain_matrix` (uses the original matrix)."""
    b = np.array(rhs, dtype=float, copy=True)
    if len(constraints) == 0:
        return b
    g = np.zeros(matrix.shape[1])
    g[constraints.indices] = constraints.values
    if np.any(constraints.values):
        b -= matrix @ g
    b[constraints.indices] = constraints.values
    return b


def apply_dirichlet(matrix, rhs, constraints: DofConstraintSet):
    if len(constraints) and constraints.indices.max() >= matrix.shape[0]:
        raise InvalidArgumentError("constraint index exceeds matrix dimension")
    if len(constraints) == 0:
        return matrix, np.asarray(rhs, dtype=float).copy()
    return constrain_matrix(matrix, constraints), constrain_rhs(matrix, rhs, constraints)


# -- evaluation ----------------------------------------------------------------

def interpolate(space: FeSpace, func, t=None):
    """Nodal interpolant of ``func(x, y[, t])``."""
    x, y = space.node_coords[:, 0], space.node_coords[:, 1]
    val = func(x, y) if t is None else func(x, y, t)
    if space.components == 1:
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape).copy()
    out = np.empty(space.n_dofs)
    out[0::2] = np.broadcast_to(val[0], x.shape)
    out[1::2] = np.broadcast_to(val[1], x.shape)
    return out


def evaluate_field(space: FeSpace, coeffs, p):
    """Value of the discrete field at ``p`` (float, or length-2 array for vectors)."""
    tri, lam = locate_point(space.mesh, p)
    vals, _ = reference_basis(space.degree, lam[1:][None, :])
    local = np.asarray(coeffs)[space.dof_map[tri]]
    if space.components == 1:
        return float(vals[0] @ local)
    return vals[0] @ local.reshape(-1, 2)


def evaluate_at_points(space: FeSpace, coeffs, pts):
    pts = np.atleast_2d(pts)
    return np.array([evaluate_field(space, coeffs, p) for p in pts])


def vertex_values(space: FeSpace, coeffs):
    """Coefficients at the mesh vertices, shape ``(n_vertices,)`` or ``(n_vertices, 2)``."""
    n, d = space.mesh.n, space.degree
    I, J = np.meshgrid(np.arange(n + 1) * d, np.arange(n + 1) * d)
    nodes = (J * (d * n + 1) + I).ravel()
    coeffs = np.asarray(coeffs)
    if space.components == 1:
        return coeffs[nodes]
    return coeffs.reshape(-1, 2)[nodes]


@dataclass(frozen=True, eq=False)
class Spaces:
    """Taylor-Hood pair ``(V, W)`` plus the transport space ``Q = S``."""

    V: FeSpace
    W: FeSpace
    Q: FeSpace

    @property
    def S(self):
        return self.Q

    @property
    def mesh(self):
        return self.V.mesh

    @property
    def h(self):
        return self.V.mesh.h

    @property
    def sizes(self):
        return (self.V.n_dofs, self.W.n_dofs, self.Q.n_dofs, self.Q.n_dofs)

"""Global-in-time decoupling: transport sweeps alternated with mechanics solves.

One iteration solves the two pressure equations for every time level in
order, with the total pressure frozen at the previous iterate, then solves
the n-independent Stokes-like mechanics problem at every level.  The
mechanics solves share one factorization and may run concurrently.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import InvalidArgumentError
from .fem import Spaces
from .linalg import block_compose, factorize
from .model import ProblemData
from .monolithic import FieldState, TimeGrid, Trajectory, block_matrices, initial_state, transport_history
from .operators import Operators, dirichlet_constraints

log = logging.getLogger(__name__)

FIELDS = ("u", "xi", "phi", "psi")


@dataclass
class ContractionReport:
    """Per-iteration diagnostics of :func:`iterate`.

    ``metrics[i-1]`` is ``m_i``; ``ratios[i-2]`` is ``r_i = m_i / m_{i-1}``
    (defined from the second iteration on).  ``increments`` holds per-field
    relative increments at t_N, ``max_increments`` the maximum over all
    levels.  ``reference_errors`` is filled when a reference trajectory is
    given.
    """

    metrics: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    max_increments: list = field(default_factory=list)
    reference_errors: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stopping: str = "increment"
    tol: float = 0.0

    def ratio(self, i):
        """``r_i`` for ``i >= 2``."""
        if i < 2 or i > len(self.metrics):
            raise InvalidArgumentError(f"ratio r_{i} is not available")
        return self.ratios[i - 2]


def contraction_metric(xi_i, xi_im1, grid: TimeGrid, mass):
    """``sqrt(dt * sum_n d^T M d)`` with ``d`` the backward difference of ``xi_i - xi_im1``."""
    if len(xi_i) != len(xi_im1):
        raise InvalidArgumentError(f"trajectory lengths differ: {len(xi_i)} vs {len(xi_im1)}")
    if len(xi_i) < 2:
        return 0.0
    dt = grid.dt
    e = [np.asarray(a, dtype=float) - np.asarray(b, dtype=float) for a, b in zip(xi_i, xi_im1)]
    total = 0.0
    for n in range(1, len(e)):
        d = (e[n] - e[n - 1]) / dt
        total += float(d @ (mass @ d))
    return math.sqrt(max(dt * total, 0.0))


class DecoupledSolver:
    """Factorized transport and mechanics blocks plus cached loads."""

    def __init__(self, problem: ProblemData, spaces: Spaces, grid: TimeGrid, ops: Operators = None):
        if spaces.V.degree < 2 or spaces.W.degree != spaces.V.degree - 1:
            raise InvalidArgumentError("decoupled solver needs a Taylor-Hood pair (k, k-1) with k >= 2")
        self.problem = problem
        self.spaces = spaces
        self.grid = grid
        self.ops = Operators(spaces) if ops is None else ops
        B = block_matrices(problem.params, self.ops, grid.dt, spaces.h)
        self.mech = block_compose([[B[0][0], B[0][1]], [B[1][0], B[1][1]]])
        self.trans = block_compose([[B[2][2], B[2][3]], [B[3][2], B[3][3]]])
        self._mech_lu = factorize(fem.constrain_matrix(self.mech.matrix, self._mech_constraints(0.0)))
        self._trans_lu = factorize(fem.constrain_matrix(self.trans.matrix, self._trans_constraints(0.0)))
        self._f, self._g, self._h = {}, {}, {}

    def _mech_constraints(self, t):
        cu, _, _ = dirichlet_constraints(self.problem, self.spaces, t)
        return cu

    def _trans_constraints(self, t):
        _, cphi, cpsi = dirichlet_constraints(self.problem, self.spaces, t)
        return fem.DofConstraintSet.union(cphi, cpsi.shifted(self.spaces.Q.n_dofs))

    def _load(self, cache, space, src, t):
        if t not in cache:
            cache[t] = fem.assemble_load(space, src, t)
        return cache[t]

    def transport_step(self, prev: FieldState, xi_prev_level, xi_level, t):
        """Pressures at ``t`` given the previous pressures and the frozen total pressures."""
        p = self.problem.params
        dt = self.grid.dt
        frozen = FieldState(prev.t, prev.u, xi_prev_level, prev.phi, prev.psi)
        r_phi, r_psi = transport_history(p, self.ops, dt, self.spaces.h, frozen)
        coupling = self.ops.mass_wq.T @ xi_level / (p.lmbda * dt)
        rhs = np.concatenate([
            self._load(self._g, self.spaces.Q, self.problem.g, t) + r_phi + p.alpha * coupling,
            self._load(self._h, self.spaces.Q, self.problem.h, t) + r_psi + p.beta * coupling,
        ])
        b = fem.constrain_rhs(self.trans.matrix, rhs, self._trans_constraints(t))
        return self.trans.split(self._trans_lu.solve(b))

    def mechanics_step(self, phi, psi, t):
        p = self.problem.params
        rhs = np.concatenate([
            self._load(self._f, self.spaces.V, self.problem.f, t),
            self.ops.mass_wq @ ((p.alpha / p.lmbda) * phi + (p.beta / p.lmbda) * psi),
        ])
        b = fem.constrain_rhs(self.mech.matrix, rhs, self._mech_constraints(t))
        return self.mech.split(self._mech_lu.solve(b))


def _check_length(traj, grid, what):
    if len(traj) != grid.N + 1:
        raise InvalidArgumentError(f"{what} has {len(traj)} entries, expected N+1={grid.N + 1}")


def transport_sweep(xi_prev, problem: ProblemData, spaces: Spaces, grid: TimeGrid,
                    solver: DecoupledSolver = None, initial: FieldState = None):
    """March the pressure equations over n = 1..N with ``xi_prev`` frozen.

    Returns the ``phi`` and ``psi`` trajectories (entry 0 is the initial data).
    """
    _check_length(xi_prev, grid, "xi_prev")
    solver = DecoupledSolver(problem, spaces, grid) if solver is None else solver
    state = initial_state(problem, spaces, solver.ops) if initial is None else initial
    phis, psis = [state.phi.copy()], [state.psi.copy()]
    prev = state
    for n in range(1, grid.N + 1):
        t = grid.t(n)
        phi, psi = solver.transport_step(prev, xi_prev[n - 1], xi_prev[n], t)
        phis.append(phi.copy())
        psis.append(psi.copy())
        prev = FieldState(t, prev.u, xi_prev[n], phis[-1], psis[-1])
    return phis, psis


def mechanics_solve_all(phi, psi, problem: ProblemData, spaces: Spaces, grid: TimeGrid,
                        solver: DecoupledSolver = None, concurrent=False, workers=None, initial=None):
    """Solve the mechanics problem at every level n = 1..N independently.

    Entry 0 of the returned ``(u, xi)`` trajectories is copied from ``initial``
    when given, otherwise solved like the other levels.
    """
    _check_length(phi, grid, "phi")
    _check_length(psi, grid, "psi")
    solver = DecoupledSolver(problem, spaces, grid) if solver is None else solver
    us = [None] * (grid.N + 1)
    xis = [None] * (grid.N + 1)

    def one(n):
        u, xi = solver.mechanics_step(phi[n], psi[n], grid.t(n))
        us[n], xis[n] = u.copy(), xi.copy()

    start = 1 if initial is not None else 0
    if initial is not None:
        us[0], xis[0] = initial.u.copy(), initial.xi.copy()
    levels = range(start, grid.N + 1)
    if concurrent:
        # loads are cached lazily; fill the cache first so workers only read it
        for n in levels:
            solver._load(solver._f, spaces.V, problem.f, grid.t(n))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, levels))
    else:
        for n in levels:
            one(n)
    return us, xis


def _relative(ops, name, a, b):
    norm = ops.l2_w if name == "xi" else (ops.h1_v if name == "u" else ops.h1_q)
    diff = norm(a - b)
    size = norm(a)
    if size == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / size


def relative_differences(traj: Trajectory, other: Trajectory, ops: Operators, levels=None):
    """Per-field ``max_n ||x_n - y_n|| / ||x_n||`` (H1 for u, phi, psi; L2 for xi)."""
    levels = range(len(traj)) if levels is None else levels
    out = {}
    for name in FIELDS:
        out[name] = max(_relative(ops, name, getattr(traj[n], name), getattr(other[n], name)) for n in levels)
    return out


def iterate(problem: ProblemData, spaces: Spaces, grid: TimeGrid, tol=1e-8, max_iter=50,
            stopping="increment", reference: Trajectory = None, ops: Operators = None,
            initial: FieldState = None, xi0="project", concurrent=False, workers=None):
    """Run the decoupled iteration until the selected test drops below ``tol``.

    ``stopping`` is ``"increment"`` (max over levels and fields of the
    relative increment) or ``"metric"`` (``m_i / m_1``).  ``tol=0`` runs
    exactly ``max_iter`` iterations.  Returns ``(Trajectory, ContractionReport)``;
    failing to converge is reported, not raised.
    """
    if stopping not in ("increment", "metric"):
        raise InvalidArgumentError(f"stopping must be 'increment' or 'metric', got {stopping!r}")
    if not tol >= 0 or max_iter < 1:
        raise InvalidArgumentError(f"need tol >= 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}")
    solver = DecoupledSolver(problem, spaces, grid, ops)
    ops = solver.ops
    state0 = initial_state(problem, spaces, ops, xi0) if initial is None else initial
    # flat-in-time initial guess for the total pressure
    xi_prev = [state0.xi.copy() for _ in range(grid.N + 1)]
    prev_traj = None
    report = ContractionReport(stopping=stopping, tol=tol)
    traj = None
    for i in range(1, max_iter + 1):
        phis, psis = transport_sweep(xi_prev, problem, spaces, grid, solver, state0)
        us, xis = mechanics_solve_all(phis, psis, problem, spaces, grid, solver,
                                      concurrent=concurrent, workers=workers, initial=state0)
        traj = Trajectory([FieldState(grid.t(n), us[n], xis[n], phis[n], psis[n])
                           for n in range(grid.N + 1)], iteration=i)
        m = contraction_metric(xis, xi_prev, grid, ops.mass_w)
        report.metrics.append(m)
        if i >= 2:
            report.ratios.append(m / report.metrics[-2] if report.metrics[-2] > 0 else float("nan"))
        if prev_traj is not None:
            report.increments.append({k: _relative(ops, k, getattr(traj.final, k), getattr(prev_traj.final, k))
                                      for k in FIELDS})
            report.max_increments.append(relative_differences(traj, prev_traj, ops, range(1, grid.N + 1)))
        if reference is not None:
            report.reference_errors.append({k: _relative(ops, k, getattr(reference.final, k), getattr(traj.final, k))
                                            for k in FIELDS})
        report.iterations = i
        log.debug("iteration %d: metric %.3e", i, m)
        if tol > 0:
            if stopping == "metric":
                done = report.metrics[0] == 0.0 or m <= tol * report.metrics[0]
            else:
                done = bool(report.max_increments) and max(report.max_increments[-1].values()) <= tol
            if done:
                report.converged = True
                break
        prev_traj = traj
        xi_prev = xis
    return traj, report

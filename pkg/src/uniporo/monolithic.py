"""Backward-Euler time stepping of the fully coupled four-field system."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import Spaces
from .errors import InvalidArgumentError
from .linalg import BlockSystem, Factorization, block_compose, factorize
from .model import ModelParams, ProblemData, total_pressure_initial
from .operators import Operators, dirichlet_constraints

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    T_f: float
    N: int

    def __post_init__(self):
        if self.N < 1 or not self.T_f > 0:
            raise ValueError(f"need T_f > 0 and N >= 1, got T_f={self.T_f}, N={self.N}")

    @property
    def dt(self):
        return self.T_f / self.N

    @property
    def times(self):
        return np.arange(self.N + 1) * self.dt

    def t(self, n):
        return n * self.dt


@dataclass
class FieldState:
    t: float
    u: np.ndarray
    xi: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    def fields(self):
        return {"u": self.u, "xi": self.xi, "phi": self.phi, "psi": self.psi}

    def vector(self):
        return np.concatenate([self.u, self.xi, self.phi, self.psi])

    def copy(self):
        return FieldState(self.t, self.u.copy(), self.xi.copy(), self.phi.copy(), self.psi.copy())

    @classmethod
    def zeros(cls, spaces: Spaces, t=0.0):
        V, W, Q = spaces.V, spaces.W, spaces.Q
        return cls(t, np.zeros(V.n_dofs), np.zeros(W.n_dofs), np.zeros(Q.n_dofs), np.zeros(Q.n_dofs))


@dataclass
class Trajectory:
    states: list
    iteration: int = 0

    def __len__(self):
        return len(self.states)

    def __getitem__(self, n):
        return self.states[n]

    def field(self, name):
        return [getattr(s, name) for s in self.states]

    @property
    def final(self):
        return self.states[-1]


def stabilization_h2(params: ModelParams, h):
    return params.eta_phi * h * h, params.eta_psi * h * h


def block_matrices(params: ModelParams, ops: Operators, dt: float, h: float):
    """4x4 block grid of the left-hand side, ordering (u, xi, phi, psi)."""
    p = params
    lam = p.lmbda
    s_phi, s_psi = stabilization_h2(p, h)
    Mq, Aq, Mwq = ops.mass_q, ops.stiff_q, ops.mass_wq
    cross = ((p.alpha * p.beta / lam - p.b0) / dt - p.gamma) * Mq
    return [
        [2.0 * p.mu * ops.elasticity, -ops.div.T, None, None],
        [ops.div, ops.mass_w / lam, -(p.alpha / lam) * Mwq, -(p.beta / lam) * Mwq],
        [None, -(p.alpha / (lam * dt)) * Mwq.T,
         ((p.c1 + p.alpha ** 2 / lam) / dt + p.gamma) * Mq + (p.K + s_phi / dt) * Aq, cross],
        [None, -(p.beta / (lam * dt)) * Mwq.T, cross,
         ((p.c2 + p.beta ** 2 / lam) / dt + p.gamma) * Mq + (p.D + s_psi / dt) * Aq],
    ]


def transport_history(params: ModelParams, ops: Operators, dt, h, prev: FieldState):
    """Terms of the pressure equations that involve the previous time level."""
    p = params
    lam = p.lmbda
    s_phi, s_psi = stabilization_h2(p, h)
    Mq, Aq, Mqw = ops.mass_q, ops.stiff_q, ops.mass_wq.T
    cross = p.alpha * p.beta / lam - p.b0
    r_phi = (Mq @ ((p.c1 + p.alpha ** 2 / lam) * prev.phi + cross * prev.psi)
             - (p.alpha / lam) * (Mqw @ prev.xi) + s_phi * (Aq @ prev.phi)) / dt
    r_psi = (Mq @ ((p.c2 + p.beta ** 2 / lam) * prev.psi + cross * prev.phi)
             - (p.beta / lam) * (Mqw @ prev.xi) + s_psi * (Aq @ prev.psi)) / dt
    return r_phi, r_psi


class Loads:
    """Load vectors ``f^n, g^n, h^n`` at a given time."""

    def __init__(self, problem: ProblemData, spaces: Spaces):
        self.problem = problem
        self.spaces = spaces

    def f(self, t):
        return fem.assemble_load(self.spaces.V, self.problem.f, t)

    def g(self, t):
        return fem.assemble_load(self.spaces.Q, self.problem.g, t)

    def h(self, t):
        return fem.assemble_load(self.spaces.Q, self.problem.h, t)


@dataclass(eq=False)
class AssembledSystem:
    problem: ProblemData
    spaces: Spaces
    grid: TimeGrid
    ops: Operators
    blocks: BlockSystem  # before boundary conditions
    matrix: object  # after boundary conditions
    factorization: Factorization
    constrained: np.ndarray  # global indices held by Dirichlet data
    loads: Loads = field(repr=False, default=None)

    @property
    def params(self):
        return self.problem.params

    def constraints(self, t):
        cu, cphi, cpsi = dirichlet_constraints(self.problem, self.spaces, t)
        off = self.blocks.offsets
        return fem.DofConstraintSet.union(cu, cphi.shifted(off[2]), cpsi.shifted(off[3]))

    def rhs(self, prev: FieldState, t):
        r_phi, r_psi = transport_history(self.params, self.ops, self.grid.dt, self.spaces.h, prev)
        return np.concatenate([
            self.loads.f(t),
            np.zeros(self.spaces.W.n_dofs),
            self.loads.g(t) + r_phi,
            self.loads.h(t) + r_psi,
        ])


def assemble_system(problem: ProblemData, spaces: Spaces, grid: TimeGrid, ops: Operators = None) -> AssembledSystem:
    if spaces.V.degree < 2 or spaces.W.degree != spaces.V.degree - 1:
        raise InvalidArgumentError("monolithic solver needs a Taylor-Hood pair (k, k-1) with k >= 2")
    ops = Operators(spaces) if ops is None else ops
    blocks = block_compose(block_matrices(problem.params, ops, grid.dt, spaces.h))
    cu, cphi, cpsi = dirichlet_constraints(problem, spaces, 0.0)
    off = blocks.offsets
    cons = fem.DofConstraintSet.union(cu, cphi.shifted(off[2]), cpsi.shifted(off[3]))
    A = fem.constrain_matrix(blocks.matrix, cons)
    log.debug("factorizing monolithic system of size %d (nnz=%d)", A.shape[0], A.nnz)
    F = factorize(A)
    return AssembledSystem(problem, spaces, grid, ops, blocks, A, F, cons.indices, Loads(problem, spaces))


def _unpack(sys, x, t):
    u, xi, phi, psi = sys.blocks.split(x)
    return FieldState(t, u.copy(), xi.copy(), phi.copy(), psi.copy())


def advance(sys: AssembledSystem, prev: FieldState, t_n: float) -> FieldState:
    """One backward-Euler step from ``prev`` to time ``t_n``."""
    if abs(prev.t - (t_n - sys.grid.dt)) > 1e-9 * max(1.0, abs(t_n)):
        raise ValueError(f"previous state at t={prev.t} does not precede t={t_n}")
    b = fem.constrain_rhs(sys.blocks.matrix, sys.rhs(prev, t_n), sys.constraints(t_n))
    return _unpack(sys, sys.factorization.solve(b), t_n)


def initial_state(problem: ProblemData, spaces: Spaces, ops: Operators = None, xi0: str = "project") -> FieldState:
    """Interpolated ``u0, phi0, psi0`` and a discrete total pressure.

    ``xi0="project"`` L2-projects ``-lambda div u0 + alpha phi0 + beta psi0``
    onto W_h, which satisfies the discrete constraint at t=0 exactly.
    ``"interpolate"`` interpolates the exact total pressure (needs
    ``problem.exact``); ``"auto"`` picks interpolation when an exact solution
    is available and projection otherwise.
    """
    if xi0 not in ("project", "interpolate", "auto"):
        raise InvalidArgumentError(f"xi0 must be project, interpolate or auto, got {xi0!r}")
    if xi0 == "auto":
        xi0 = "interpolate" if problem.exact is not None else "project"
    ops = Operators(spaces) if ops is None else ops
    u0 = fem.interpolate(spaces.V, problem.u0)
    phi0 = fem.interpolate(spaces.Q, problem.phi0)
    psi0 = fem.interpolate(spaces.Q, problem.psi0)
    if xi0 == "interpolate":
        if problem.exact is None:
            raise InvalidArgumentError("xi0='interpolate' needs an exact solution")
        xi = fem.interpolate(spaces.W, problem.exact.xi, 0.0)
    else:
        xi = total_pressure_initial(u0, phi0, psi0, problem.params, spaces,
                                    mass_w=ops.mass_w, div=ops.div, mass_wq=ops.mass_wq)
    return FieldState(0.0, u0, xi, phi0, psi0)


def run(problem: ProblemData, spaces: Spaces, grid: TimeGrid, ops: Operators = None,
        initial: FieldState = None, xi0: str = "project") -> Trajectory:
    ops = Operators(spaces) if ops is None else ops
    sys = assemble_system(problem, spaces, grid, ops)
    state = initial_state(problem, spaces, ops, xi0) if initial is None else initial
    states = [state]
    for n in range(1, grid.N + 1):
        state = advance(sys, state, grid.t(n))
        states.append(state)
    return Trajectory(states)


# -- residual diagnostics -------------------------------------------------------

def constraint_residual(params: ModelParams, ops: Operators, state: FieldState):
    """Residual vector of the total-pressure equation."""
    p = params
    return (ops.div @ state.u + (ops.mass_w @ state.xi) / p.lmbda
            - ops.mass_wq @ ((p.alpha / p.lmbda) * state.phi + (p.beta / p.lmbda) * state.psi))


def step_residual(sys: AssembledSystem, prev: FieldState, state: FieldState):
    """Relative residual of the constrained step equations."""
    b = fem.constrain_rhs(sys.blocks.matrix, sys.rhs(prev, state.t), sys.constraints(state.t))
    r = sys.matrix @ state.vector() - b
    return float(np.linalg.norm(r) / max(np.linalg.norm(b), 1e-300))

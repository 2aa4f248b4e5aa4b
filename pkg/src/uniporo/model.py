"""Physical parameters, model specializations and problem definitions."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sym

from .errors import InvalidArgumentError
from .fem import PointSource, assemble_divergence, assemble_mass
from .linalg import factorize
from .mesh import BoundaryScheme


@dataclass(frozen=True)
class ModelParams:
    mu: float = 1.0
    lmbda: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    b0: float = 0.1
    gamma: float = 0.1
    K: float = 1.0
    D: float = 1.0
    eta_phi: float = 0.0
    eta_psi: float = 0.0

    def __post_init__(self):
        for name in ("mu", "lmbda", "alpha", "beta", "K", "D"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidArgumentError(f"{name} must be strictly positive, got {v}")
        for name in ("c1", "c2", "b0", "gamma", "eta_phi", "eta_psi"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidArgumentError(f"{name} must be non-negative, got {v}")
        if self.c1 - self.b0 < 0 or self.c2 - self.b0 < 0:
            raise InvalidArgumentError(
                f"storage coefficients must dominate dilation: c1={self.c1}, c2={self.c2}, b0={self.b0}")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_stabilization(self, eta_phi, eta_psi=None):
        return replace(self, eta_phi=eta_phi, eta_psi=eta_phi if eta_psi is None else eta_psi)


def lame_from_young_poisson(E, nu):
    """Return ``(lambda, mu)`` for Young's modulus ``E`` and Poisson ratio ``nu``."""
    if E <= 0:
        raise InvalidArgumentError(f"Young's modulus must be positive, got {E}")
    if not 0.0 <= nu < 0.5:
        raise InvalidArgumentError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def specialize(kind: str, params: ModelParams) -> ModelParams:
    if kind == "thermo_poroelastic":
        return replace(params, gamma=0.0)
    if kind == "barenblatt_biot":
        return replace(params, b0=0.0)
    if kind == "general":
        return params
    raise InvalidArgumentError(f"unknown model kind {kind!r}")


def scaled_stabilization(params: ModelParams, h: float) -> float:
    """Weight ``1 / (32 (mu + 2 lambda) h^2)`` used for the point-source runs."""
    return 1.0 / (32.0 * (params.mu + 2.0 * params.lmbda) * h * h)


# which displacement components are held on a side, per boundary tag; the
# Barry-Mercer sides hold the tangential component and leave the normal
# traction natural
_HELD_COMPONENTS = {
    "dirichlet": (0, 1),
    "neumann": (),
    "gamma1": (1,),
    "gamma3": (1,),
    "gamma2": (0,),
    "gamma4": (0,),
}


def held_components(tag):
    return _HELD_COMPONENTS[tag]


def _zero_vec(x, y, t):
    z = np.zeros_like(np.asarray(x, dtype=float))
    return z, z


def _zero(x, y, t=0.0):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ExactSolution:
    """Vectorised callbacks ``(x, y, t)``; vector fields return tuples."""

    u: Callable
    grad_u: Callable  # ((du1/dx, du1/dy), (du2/dx, du2/dy))
    xi: Callable
    phi: Callable
    grad_phi: Callable
    psi: Callable
    grad_psi: Callable


@dataclass(frozen=True)
class ProblemData:
    params: ModelParams
    scheme: BoundaryScheme
    f: object = None  # callable (x, y, t) -> (fx, fy)
    g: object = None  # callable or PointSource
    h: object = None
    u0: Callable = None  # (x, y) -> (ux, uy)
    phi0: Callable = None
    psi0: Callable = None
    exact: Optional[ExactSolution] = None
    u_bc: Callable = _zero_vec  # Dirichlet data for u, (x, y, t)
    phi_bc: Callable = _zero
    psi_bc: Callable = _zero
    name: str = ""
    meta: dict = field(default_factory=dict)

    def with_params(self, params):
        return replace(self, params=params)


# -- manufactured solution -------------------------------------------------------

_x, _y, _t = sym.symbols("x y t", real=True)


def _manufactured_fields():
    bump = _x * _y * (1 - _x) ** 2 * (1 - _y)
    u = (sym.sin(sym.pi * _x * _t) * sym.cos(sym.pi * _y * _t) * bump,
         sym.cos(sym.pi * _x * _t) * sym.sin(sym.pi * _y * _t) * bump)
    phi = sym.cos(_t + _x - _y) * bump
    psi = sym.sin(_t + _x - _y) * bump
    return u, phi, psi


def _lambdify(expr):
    fn = sym.lambdify((_x, _y, _t), expr, modules="numpy")

    def wrapped(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x, np.asarray(y, dtype=float), t), dtype=float), x.shape).copy()
    return wrapped


def _vector(*comps):
    def wrapped(x, y, t=0.0):
        return tuple(c(x, y, t) for c in comps)
    return wrapped


def _matrix(rows):
    def wrapped(x, y, t=0.0):
        return tuple(tuple(c(x, y, t) for c in row) for row in rows)
    return wrapped


@lru_cache(maxsize=32)
def _manufactured_callbacks(p: ModelParams):
    mu, lam, a, b = (sym.Float(v) for v in (p.mu, p.lmbda, p.alpha, p.beta))
    c1, c2, b0, gam, K, D = (sym.Float(v) for v in (p.c1, p.c2, p.b0, p.gamma, p.K, p.D))
    (u1, u2), phi, psi = _manufactured_fields()
    X = (_x, _y)
    U = (u1, u2)
    div_u = sym.diff(u1, _x) + sym.diff(u2, _y)
    eps = [[(sym.diff(U[i], X[j]) + sym.diff(U[j], X[i])) / 2 for j in range(2)] for i in range(2)]
    sigma = [[2 * mu * eps[i][j] + (lam * div_u if i == j else 0) for j in range(2)] for i in range(2)]
    f = [-(sym.diff(sigma[i][0], _x) + sym.diff(sigma[i][1], _y))
         + a * sym.diff(phi, X[i]) + b * sym.diff(psi, X[i]) for i in range(2)]
    lap = lambda e: sym.diff(e, _x, 2) + sym.diff(e, _y, 2)
    div_ut = sym.diff(div_u, _t)
    g = (c1 * sym.diff(phi, _t) - b0 * sym.diff(psi, _t) + a * div_ut
         - K * lap(phi) + gam * (phi - psi))
    h = (c2 * sym.diff(psi, _t) - b0 * sym.diff(phi, _t) + b * div_ut
         - D * lap(psi) + gam * (psi - phi))
    xi = -lam * div_u + a * phi + b * psi

    L = _lambdify
    exact = ExactSolution(
        u=_vector(L(u1), L(u2)),
        grad_u=_matrix([[L(sym.diff(u1, _x)), L(sym.diff(u1, _y))],
                        [L(sym.diff(u2, _x)), L(sym.diff(u2, _y))]]),
        xi=L(xi),
        phi=L(phi),
        grad_phi=_vector(L(sym.diff(phi, _x)), L(sym.diff(phi, _y))),
        psi=L(psi),
        grad_psi=_vector(L(sym.diff(psi, _x)), L(sym.diff(psi, _y))),
    )
    return _vector(L(f[0]), L(f[1])), L(g), L(h), exact


def manufactured_problem(params: ModelParams) -> ProblemData:
    """Smooth trigonometric-polynomial solution on the right-Neumann square.

    Sources come from the three-field equations applied symbolically to the
    exact fields, so they also drive the total-pressure formulation.
    """
    f, g, h, exact = _manufactured_callbacks(params)
    return ProblemData(
        params=params,
        scheme=BoundaryScheme.named("right_neumann"),
        f=f, g=g, h=h,
        u0=lambda x, y: exact.u(x, y, 0.0),
        phi0=lambda x, y: exact.phi(x, y, 0.0),
        psi0=lambda x, y: exact.psi(x, y, 0.0),
        exact=exact,
        u_bc=exact.u,
        phi_bc=exact.phi,
        psi_bc=exact.psi,
        name="manufactured",
    )


# -- Barry-Mercer ---------------------------------------------------------------

BARRY_MERCER_SOURCE = (0.25, 0.25)


def barry_mercer_params(variant: str) -> ModelParams:
    if variant == "stab_single_step":
        lam, mu = lame_from_young_poisson(1e5, 0.1)
        K = D = 1e-6
    elif variant == "smooth_run":
        lam, mu = 0.2, 0.4
        K = D = 1.0
    else:
        raise InvalidArgumentError(f"unknown Barry-Mercer variant {variant!r}")
    return ModelParams(mu=mu, lmbda=lam, alpha=0.5, beta=0.5, c1=0.0, c2=0.0,
                       b0=0.0, gamma=0.0, K=K, D=D)


def barry_mercer_time(variant: str):
    """Default ``(T_f, N)`` for each variant."""
    if variant == "stab_single_step":
        return np.pi / 2 * 1e-9, 1
    if variant == "smooth_run":
        return np.pi / 2, 20
    raise InvalidArgumentError(f"unknown Barry-Mercer variant {variant!r}")


def barry_mercer_omega(params: ModelParams) -> float:
    return (params.lmbda + 2.0 * params.mu) * params.K


def barry_mercer_problem(params: Optional[ModelParams] = None, variant: str = "smooth_run",
                         omega: Optional[float] = None) -> ProblemData:
    """Oscillating point source at (0.25, 0.25), zero data, frictionless sides."""
    if params is None:
        params = barry_mercer_params(variant)
    if omega is None:
        omega = barry_mercer_omega(params)

    def amplitude(t):
        return 2.0 * np.sin(omega * t)

    src = PointSource(BARRY_MERCER_SOURCE, amplitude)
    zero_u = lambda x, y: _zero_vec(x, y, 0.0)
    return ProblemData(
        params=params,
        scheme=BoundaryScheme.named("barry_mercer"),
        f=None, g=src, h=src,
        u0=zero_u, phi0=_zero, psi0=_zero,
        name=f"barry_mercer:{variant}",
        meta={"omega": omega, "variant": variant},
    )


def zero_problem(params: ModelParams, scheme="right_neumann") -> ProblemData:
    zero_u = lambda x, y: _zero_vec(x, y, 0.0)
    return ProblemData(params=params, scheme=BoundaryScheme.named(scheme),
                       u0=zero_u, phi0=_zero, psi0=_zero, name="zero")


# -- initial total pressure --------------------------------------------------------

def total_pressure_initial(u0, phi0, psi0, params: ModelParams, spaces, mass_w=None, div=None, mass_wq=None):
    """L2 projection of ``-lambda div u0 + alpha phi0 + beta psi0`` onto W_h.

    Arguments are coefficient vectors; precomputed matrices may be passed to
    avoid reassembly.
    """
    W = spaces.W
    M = assemble_mass(W, W) if mass_w is None else mass_w
    B = assemble_divergence(spaces.V, W) if div is None else div
    MQ = assemble_mass(W, spaces.Q) if mass_wq is None else mass_wq
    rhs = -params.lmbda * (B @ u0) + MQ @ (params.alpha * np.asarray(phi0) + params.beta * np.asarray(psi0))
    if not np.any(rhs):
        return np.zeros(W.n_dofs)
    return factorize(M).solve(rhs)

"""Error norms, convergence rates, energies and cross-section diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import InvalidArgumentError, OutOfDomainError, UnsupportedOperationError
from .quadrature import triangle_rule


@dataclass(frozen=True)
class ErrorReport:
    eu_H1: float
    exi_L2: float
    ephi_H1: float
    epsi_H1: float
    t: float

    def as_dict(self):
        return {"eu_H1": self.eu_H1, "exi_L2": self.exi_L2,
                "ephi_H1": self.ephi_H1, "epsi_H1": self.epsi_H1}


def _field_at_quadrature(space, coeffs, rule):
    """Values ``(ne, nq[, 2])`` and gradients ``(ne, nq, [2,] 2)`` of a discrete field."""
    phi, dphi, wdet = fem._tabulate(space, rule)
    local = np.asarray(coeffs)[space.dof_map]
    if space.components == 1:
        val = np.einsum("qi,ei->eq", phi, local)
        grad = np.einsum("eqid,ei->eqd", dphi, local)
    else:
        local = local.reshape(local.shape[0], -1, 2)  # (ne, nodes, comp)
        val = np.einsum("qi,eic->eqc", phi, local)
        grad = np.einsum("eqid,eic->eqcd", dphi, local)
    return val, grad, wdet


def scalar_errors(space, coeffs, exact, exact_grad=None, t=0.0, order=None):
    """``(L2 error, H1-seminorm error)`` of a scalar field."""
    rule = triangle_rule(order or 2 * space.degree + 3)
    val, grad, wdet = _field_at_quadrature(space, coeffs, rule)
    xq = space.geometry.map(rule.points)
    x, y = xq[..., 0], xq[..., 1]
    e = val - exact(x, y, t)
    l2 = float(np.sqrt(np.sum(wdet * e * e)))
    if exact_grad is None:
        return l2, float("nan")
    gx, gy = exact_grad(x, y, t)
    semi = float(np.sqrt(np.sum(wdet * ((grad[..., 0] - gx) ** 2 + (grad[..., 1] - gy) ** 2))))
    return l2, semi


def vector_errors(space, coeffs, exact, exact_grad, t=0.0, order=None):
    rule = triangle_rule(order or 2 * space.degree + 3)
    val, grad, wdet = _field_at_quadrature(space, coeffs, rule)
    xq = space.geometry.map(rule.points)
    x, y = xq[..., 0], xq[..., 1]
    ux, uy = exact(x, y, t)
    l2sq = np.sum(wdet * ((val[..., 0] - ux) ** 2 + (val[..., 1] - uy) ** 2))
    G = exact_grad(x, y, t)
    semisq = 0.0
    for c in range(2):
        for d in range(2):
            semisq += np.sum(wdet * (grad[..., c, d] - G[c][d]) ** 2)
    return float(np.sqrt(l2sq)), float(np.sqrt(semisq))


def error_norms(state, exact, spaces) -> ErrorReport:
    """H1 errors of u, phi, psi and the L2 error of xi at ``state.t``."""
    if exact is None:
        raise UnsupportedOperationError("error norms need an exact solution")
    t = state.t
    ul2, usemi = vector_errors(spaces.V, state.u, exact.u, exact.grad_u, t)
    xil2, _ = scalar_errors(spaces.W, state.xi, exact.xi, None, t)
    pl2, psemi = scalar_errors(spaces.Q, state.phi, exact.phi, exact.grad_phi, t)
    sl2, ssemi = scalar_errors(spaces.Q, state.psi, exact.psi, exact.grad_psi, t)
    return ErrorReport(math.hypot(ul2, usemi), xil2, math.hypot(pl2, psemi), math.hypot(sl2, ssemi), t)


def convergence_rates(errors):
    """``log2(e_{k-1} / e_k)`` for a ladder whose parameter halves each step.

    Non-positive errors give ``nan`` (undefined rate).
    """
    errors = list(errors)
    if len(errors) < 2:
        raise InvalidArgumentError("need at least two errors to compute a rate")
    rates = []
    for a, b in zip(errors[:-1], errors[1:]):
        rates.append(math.log2(a / b) if a > 0 and b > 0 else float("nan"))
    return rates


# -- energies ---------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    E: float
    V: float
    terms: dict


def energy_functionals(state, params, spaces, ops=None) -> EnergyReport:
    from .operators import Operators

    ops = Operators(spaces) if ops is None else ops
    p = params
    v, w, q, s = state.u, state.xi, state.phi, state.psi
    Mw, Mwq, Mq, Aq = ops.mass_w, ops.mass_wq, ops.mass_q, ops.stiff_q
    # ||w - a q - b s||^2 with w in W_h and q, s in Q_h
    r = p.alpha * q + p.beta * s
    mix = w @ (Mw @ w) - 2.0 * (w @ (Mwq @ r)) + r @ (Mq @ r)
    d = q - s
    terms = {
        "elastic": 2.0 * p.mu * float(v @ (ops.elasticity @ v)),
        "total_pressure": float(mix) / p.lmbda,
        "storage_phi": (p.c1 - p.b0) * float(q @ (Mq @ q)),
        "storage_psi": (p.c2 - p.b0) * float(s @ (Mq @ s)),
        "dilation": p.b0 * float(d @ (Mq @ d)),
        "diffusion_phi": p.K * float(q @ (Aq @ q)),
        "diffusion_psi": p.D * float(s @ (Aq @ s)),
        "transfer": p.gamma * float(d @ (Mq @ d)),
    }
    E = sum(terms[k] for k in ("elastic", "total_pressure", "storage_phi", "storage_psi", "dilation"))
    V = sum(terms[k] for k in ("diffusion_phi", "diffusion_psi", "transfer"))
    return EnergyReport(E, V, terms)


# -- cross sections -----------------------------------------------------------------

@dataclass(frozen=True)
class SectionSamples:
    line: str  # "x=0.25" or "y=0.5"
    params: np.ndarray  # coordinate along the line
    points: np.ndarray  # (m, 2)
    values: np.ndarray
    field: str


def _parse_line(line):
    if isinstance(line, str):
        axis, _, value = line.replace(" ", "").partition("=")
        return axis, float(value)
    return line


def cross_section(state, spaces, field, line, n_samples=129) -> SectionSamples:
    """Sample ``field`` (u1, u2, xi, phi, psi) on ``x=c`` or ``y=c``."""
    axis, c = _parse_line(line)
    if axis not in ("x", "y"):
        raise InvalidArgumentError(f"line must be x=c or y=c, got {line!r}")
    if not 0.0 <= c <= 1.0:
        raise OutOfDomainError(f"line {axis}={c} misses the unit square")
    if n_samples < 2:
        raise InvalidArgumentError("need at least two samples")
    s = np.linspace(0.0, 1.0, n_samples)
    pts = np.column_stack([np.full_like(s, c), s]) if axis == "x" else np.column_stack([s, np.full_like(s, c)])
    if field in ("u1", "u2"):
        vals = fem.evaluate_at_points(spaces.V, state.u, pts)[:, 0 if field == "u1" else 1]
    elif field == "xi":
        vals = fem.evaluate_at_points(spaces.W, state.xi, pts)
    elif field in ("phi", "psi"):
        vals = fem.evaluate_at_points(spaces.Q, getattr(state, field), pts)
    else:
        raise InvalidArgumentError(f"unknown field {field!r}")
    return SectionSamples(f"{axis}={c:g}", s, pts, np.asarray(vals, dtype=float), field)


def oscillation_metric(samples):
    """Return ``(undershoot, sign_flip_count)`` of sampled values.

    ``undershoot`` is the most negative value relative to the largest
    magnitude; ``sign_flip_count`` counts sign changes of the discrete
    second difference, ignoring differences below ``1e-3 * max|v|``.
    """
    v = np.asarray(getattr(samples, "values", samples), dtype=float)
    if len(v) < 3:
        raise InvalidArgumentError("oscillation metric needs at least 3 samples")
    vmax = float(np.max(np.abs(v)))
    if vmax < 1e-14:
        return 0.0, 0
    undershoot = max(0.0, -float(v.min())) / vmax
    d2 = v[:-2] - 2.0 * v[1:-1] + v[2:]
    sig = np.sign(d2[np.abs(d2) > 1e-3 * vmax])
    flips = int(np.count_nonzero(sig[1:] != sig[:-1]))
    return undershoot, flips

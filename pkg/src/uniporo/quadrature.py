"""Collapsed Gauss rules on the reference triangle (0,0), (1,0), (0,1)."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,), sum = 1/2
    order: int

    @property
    def barycentric(self):
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - x - y, x, y])


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree ``order``.

    Conical product of Gauss-Legendre and Gauss-Jacobi(1, 0) points, which
    absorbs the Duffy Jacobian ``1 - b`` of ``(a, b) -> (a (1 - b), b)``.
    """
    m = max(order, 0) // 2 + 1
    za, wa = roots_legendre(m)
    zb, wb = roots_jacobi(m, 1.0, 0.0)
    a = 0.5 * (1.0 + za)
    b = 0.5 * (1.0 + zb)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(0.5 * wa, 0.25 * wb, indexing="ij")
    pts = np.column_stack([(A * (1.0 - B)).ravel(), B.ravel()])
    return QuadratureRule(pts, (WA * WB).ravel(), order)

"""Parameter-free matrices shared by the solvers and diagnostics."""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import fem
from .fem import DofConstraintSet, Spaces
from .model import ProblemData, held_components


class Operators:
    """Lazily assembled unit-coefficient matrices on a :class:`Spaces` triple.

    ``elasticity`` is ``(eps(u), eps(v))`` without the ``2 mu`` factor.
    """

    def __init__(self, spaces: Spaces):
        self.spaces = spaces

    @cached_property
    def elasticity(self):
        return fem.assemble_elasticity(self.spaces.V, 0.5)

    @cached_property
    def div(self):
        return fem.assemble_divergence(self.spaces.V, self.spaces.W)

    @cached_property
    def mass_w(self):
        return fem.assemble_mass(self.spaces.W, self.spaces.W)

    @cached_property
    def mass_wq(self):
        return fem.assemble_mass(self.spaces.W, self.spaces.Q)

    @cached_property
    def mass_q(self):
        return fem.assemble_mass(self.spaces.Q, self.spaces.Q)

    @cached_property
    def stiff_q(self):
        return fem.assemble_stiffness(self.spaces.Q)

    @cached_property
    def mass_v(self):
        Ms = fem.assemble_mass(_scalar(self.spaces.V), _scalar(self.spaces.V))
        return sp.kron(Ms, sp.identity(2), format="csr")

    @cached_property
    def stiff_v(self):
        As = fem.assemble_stiffness(_scalar(self.spaces.V))
        return sp.kron(As, sp.identity(2), format="csr")

    # discrete norms of coefficient vectors
    def l2_w(self, x):
        return float(np.sqrt(max(x @ (self.mass_w @ x), 0.0)))

    def h1_q(self, x):
        return float(np.sqrt(max(x @ (self.mass_q @ x) + x @ (self.stiff_q @ x), 0.0)))

    def h1_v(self, x):
        return float(np.sqrt(max(x @ (self.mass_v @ x) + x @ (self.stiff_v @ x), 0.0)))


def _scalar(space):
    return fem.FeSpace(space.mesh, space.degree, 1, space.node_coords, space.node_map)


def dirichlet_constraints(problem: ProblemData, spaces: Spaces, t: float):
    """Constraint sets ``(u, phi, psi)`` with boundary data evaluated at ``t``.

    Displacement components follow the boundary tags of the problem's scheme;
    both pressures are held on the whole boundary.
    """
    V, Q = spaces.V, spaces.Q
    idx, vals = [], []
    for side in ("right", "bottom", "left", "top"):
        comps = held_components(problem.scheme.tag_for(side))
        if not comps:
            continue
        nodes = V.nodes_on_side(side)
        xy = V.node_coords[nodes]
        data = problem.u_bc(xy[:, 0], xy[:, 1], t)
        for c in comps:
            idx.append(2 * nodes + c)
            vals.append(np.broadcast_to(data[c], nodes.shape))
    cu = (DofConstraintSet.build(np.concatenate(idx), np.concatenate(vals))
          if idx else DofConstraintSet.empty())
    bq = Q.boundary_nodes()
    xy = Q.node_coords[bq]
    cphi = DofConstraintSet.build(bq, problem.phi_bc(xy[:, 0], xy[:, 1], t))
    cpsi = DofConstraintSet.build(bq, problem.psi_bc(xy[:, 0], xy[:, 1], t))
    return cu, cphi, cpsi

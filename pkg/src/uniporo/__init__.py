"""Four-field total-pressure poroelasticity with Taylor-Hood elements.

Monolithic backward-Euler stepping and a global-in-time decoupled
iteration share the same discrete operators.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, FactorizationError, InconsistentMeshError, InvalidArgumentError,
                     OutOfDomainError, UniporoError, UnsupportedOperationError)
from .mesh import BoundaryScheme, Mesh, build_unit_square_mesh, locate_point, tag_boundaries
from .fem import Spaces, taylor_hood_spaces
from .model import ModelParams, barry_mercer_problem, manufactured_problem, zero_problem
from .monolithic import FieldState, TimeGrid, Trajectory, run
from .decoupled import ContractionReport, iterate
from .analysis import convergence_rates, cross_section, energy_functionals, error_norms, oscillation_metric

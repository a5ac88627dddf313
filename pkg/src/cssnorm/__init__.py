"""Normalized ground states of the planar Chern-Simons-Schrodinger system.

Modules: ``grid`` (discretization), ``gauge`` (Chern-Simons fields),
``nonlin`` (nonlinearity families and hypothesis checks), ``functional``
(energy, Pohozaev manifold), ``solver`` (constrained minimization),
``moser`` (Moser sequence), ``radial`` (radial ansatz) and ``cli``.
"""

from . import functional, gauge, grid, moser, nonlin, radial, solver
from .errors import *  # noqa: F401,F403
from .functional import EnergyBreakdown, breakdown, energy, project_to_manifold
from .gauge import gauge_fields
from .grid import Field2D, Grid, make_grid, sample
from .nonlin import NonlinearitySpec, pure_power, truncate
from .solver import SolverConfig, minimize_on_sphere, solve_supercritical

__version__ = "0.1.0"

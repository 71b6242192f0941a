"""Conservative spectral solver for the space-homogeneous Boltzmann equation."""

from .collision import CollisionWorkspace, q_hat, q_u
from .conserve import ConstraintSystem, build_constraints, conserve_continuous, conserve_discrete
from .diagnostics import maxwellian, moments
from .grid import State, VelocityGrid, choose_domain, forward_transform, project, sobolev_norm
from .integrate import IntegratorConfig, auto_dt, rhs, run, step
from .kernel import KernelSpec, TableQuadrature, WeightTable, build_weight_table, isotropic_angular, normalize_angular

__version__ = "0.1.0"

__all__ = [
    "CollisionWorkspace",
    "ConstraintSystem",
    "IntegratorConfig",
    "KernelSpec",
    "State",
    "TableQuadrature",
    "VelocityGrid",
    "WeightTable",
    "auto_dt",
    "build_constraints",
    "build_weight_table",
    "choose_domain",
    "conserve_continuous",
    "conserve_discrete",
    "forward_transform",
    "isotropic_angular",
    "maxwellian",
    "moments",
    "normalize_angular",
    "project",
    "q_hat",
    "q_u",
    "rhs",
    "run",
    "sobolev_norm",
    "step",
]

"""Numerical engine for mechanical systems with linear velocity
constraints: constrained phase-space geometry, the admissible dynamics
and its flow, Hamilton-Jacobi style residual checks, quotient-chart
symmetry reduction and momentum diagnostics."""

from .autodiff import DualScalar, SmoothMap, jacobian, lie_bracket, \
    d_oneform, bracket_generating
from .constraint_geometry import ConstrainedChartPoint, KFrame, embed, \
    m_residual, k_frame, conditions_check, symplectic_orthogonal
from .dynamics import Trajectory, nonholonomic_field, projection_field, \
    integrate, diagnostics
from .hamilton_jacobi import OneFormSection, PhaseMap
from .mechanics import MechanicalSystem, PhasePoint, legendre, \
    inverse_legendre, hamiltonian, hamiltonian_vector_field, d_basis, \
    d_regularity
from .reduction import QuotientChart, CotangentLiftedAction, reduce, \
    momentum_map, momentum_drift
from .systems import SystemBundle, particle_system, disk_system
from .config import load_system

__all__ = [
    "DualScalar", "SmoothMap", "jacobian", "lie_bracket", "d_oneform",
    "bracket_generating", "ConstrainedChartPoint", "KFrame", "embed",
    "m_residual", "k_frame", "conditions_check", "symplectic_orthogonal",
    "Trajectory", "nonholonomic_field", "projection_field", "integrate",
    "diagnostics", "OneFormSection", "PhaseMap", "MechanicalSystem",
    "PhasePoint", "legendre", "inverse_legendre", "hamiltonian",
    "hamiltonian_vector_field", "d_basis", "d_regularity", "QuotientChart",
    "CotangentLiftedAction", "reduce", "momentum_map", "momentum_drift",
    "SystemBundle", "particle_system", "disk_system", "load_system",
]

__version__ = "0.1.0"

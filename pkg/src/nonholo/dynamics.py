"""Constrained dynamics: the admissible vector field and its flow.

The field is obtained by solving the restricted linear system
``omega^T c = dh`` on the admissible frame; a second, independent
construction projects the unconstrained Hamiltonian field onto the
submanifold tangent along the symplectic orthogonal of the admissible
phase directions.  The two must agree wherever both are defined, which
the test suite exercises heavily.

Integration happens in the (q, u) chart, so membership in the constraint
image is exact by construction and requires no stabilisation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import constraint_geometry as geo
from . import mechanics as mech
from .autodiff import value_of
from .errors import NumericalError
from .constraint_geometry import ConstrainedChartPoint, KFrame
from .mechanics import MechanicalSystem

MAX_STEPS = int(1e8)
SOLVE_COND_LIMIT = 1e12


@dataclass(frozen=True)
class FieldValue:
    """The admissible field at one chart point, in chart and ambient
    coordinates, together with the frame it was solved in."""

    chart: np.ndarray      # (n+m,) chart tangent (dq, du)
    ambient: np.ndarray    # (2n,) phase tangent (dq, dp)
    frame: KFrame


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple
    energy: np.ndarray
    constraint_residual_max: float
    constraint_series: np.ndarray
    momenta: np.ndarray                      # (steps, n) embedded momenta
    momentum_series: Optional[np.ndarray]    # (dim g, steps) or None
    failure: Optional[str] = None

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise ValueError("states and times lengths differ")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


def nonholonomic_field(sys: MechanicalSystem,
                       point: ConstrainedChartPoint) -> FieldValue:
    """Solve the restricted equation for the admissible field at a point."""
    frame = geo.k_frame(sys, point)
    coeff = _solve_frame(frame)
    chart = frame.k_basis @ coeff
    return FieldValue(chart, frame.ambient_push @ chart, frame)


def _solve_frame(frame: KFrame) -> np.ndarray:
    omega, dh = frame.omega, frame.dh
    try:
        coeff = np.linalg.solve(omega.T, dh)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("restricted two-form is singular") from exc
    if not np.all(np.isfinite(coeff)):
        raise NumericalError("field solve produced non-finite coefficients")
    return coeff


def projection_field(sys: MechanicalSystem,
                     point: ConstrainedChartPoint) -> np.ndarray:
    """Project the unconstrained Hamiltonian field onto the submanifold
    tangent along the symplectic orthogonal of the admissible directions.

    Independent construction of the same dynamics; returns the ambient
    phase tangent.
    """
    n, m = sys.n, sys.m
    phase = geo.embed(sys, point)
    qdot, pdot = mech.hamiltonian_vector_field(sys, phase)
    xh = np.concatenate([qdot, pdot])
    if sys.k == 0:
        return xh
    frame = geo.k_frame(sys, point)
    basis = mech.d_basis(sys, point.q)
    f_basis = np.zeros((2 * n, 2 * n - sys.k))
    f_basis[:n, :m] = basis
    f_basis[n:, m:] = np.eye(n)
    f_perp = geo.symplectic_orthogonal(f_basis)
    stacked = np.hstack([frame.ambient_push, f_perp])
    if np.linalg.cond(stacked) > SOLVE_COND_LIMIT:
        raise NumericalError("tangent/orthogonal decomposition is singular "
                             "(compatibility failure)")
    coeff = np.linalg.solve(stacked, xh)
    return frame.ambient_push @ coeff[:n + m]


def _chart_rhs(sys, x):
    """Chart tangent of the admissible field without frame assembly;
    algebraically identical to nonholonomic_field(...).chart."""
    n = sys.n
    p0, momentum_jac, grad_hq, basis0, metric0 = geo._frame_core(
        sys, x[:n], x[n:])
    s_block, w_block, dh1, dh2, _ = geo._block_data(
        p0, momentum_jac, grad_hq, basis0, metric0)
    geo._require_w_regular(w_block, f"q={x[:n].tolist()}")
    c1, c2 = geo._solve_block_transpose(s_block, w_block, dh1, dh2)
    return np.concatenate([basis0 @ c1, c2])


def integrate(sys: MechanicalSystem, start: ConstrainedChartPoint,
              t_final: float, dt: float, method: str = "rk4",
              action=None) -> Trajectory:
    """Flow the admissible field from ``start`` over [0, t_final].

    Steps the chart equation with classical RK4 or implicit midpoint and
    records energy, the embedded constraint residual, and optionally the
    momentum components of ``action`` along the way.  A field solve
    failure mid-trajectory truncates the result and sets ``failure``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    if method not in ("rk4", "midpoint"):
        raise ValueError(f"unknown method {method!r}")
    n_steps = int(round(t_final / dt)) if t_final > 0 else 0
    if n_steps > MAX_STEPS:
        raise ValueError(f"step count {n_steps} exceeds the {MAX_STEPS} guard")

    n, m = sys.n, sys.m
    x = np.concatenate([start.q, start.u])
    times = [0.0]
    states = [ConstrainedChartPoint(x[:n], x[n:])]
    failure = None

    def observables(xv):
        q, u = xv[:n], xv[n:]
        qs = list(q)
        basis = np.array([[value_of(t) for t in row]
                          for row in mech.d_basis_generic(sys, qs)])
        g = np.array([[value_of(t) for t in row] for row in sys.metric(qs)])
        v = basis @ u
        p = g @ v
        energy = 0.5 * v @ p + value_of(sys.potential(qs))
        if sys.k:
            a = np.array([[value_of(t) for t in row]
                          for row in sys.constraints(qs)])
            residual = float(np.max(np.abs(a @ v)))
        else:
            residual = 0.0
        return energy, residual, p

    energy0, residual0, p0 = observables(x)
    energies = [energy0]
    residuals = [residual0]
    momenta = [p0]

    for step in range(n_steps):
        try:
            if method == "rk4":
                k1 = _chart_rhs(sys, x)
                k2 = _chart_rhs(sys, x + 0.5 * dt * k1)
                k3 = _chart_rhs(sys, x + 0.5 * dt * k2)
                k4 = _chart_rhs(sys, x + dt * k3)
                x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                x = _midpoint_step(sys, x, dt)
        except NumericalError as exc:
            failure = f"field solve failed at t={times[-1] + dt:.6g}: {exc}"
            break
        times.append((step + 1) * dt)
        states.append(ConstrainedChartPoint(x[:n], x[n:]))
        energy, residual, p = observables(x)
        energies.append(energy)
        residuals.append(residual)
        momenta.append(p)

    momenta = np.array(momenta)
    momentum_series = None
    if action is not None:
        from .reduction import momentum_map
        series = [momentum_map(action,
                               mech.PhasePoint(s.q, momenta[i]))
                  for i, s in enumerate(states)]
        momentum_series = np.array(series).T

    residual_arr = np.array(residuals)
    return Trajectory(np.array(times), tuple(states), np.array(energies),
                      float(np.max(residual_arr)), residual_arr,
                      momenta, momentum_series, failure)


def _midpoint_step(sys, x, dt, tol=1e-13, max_iter=100):
    """Implicit midpoint via fixed-point iteration."""
    f0 = _chart_rhs(sys, x)
    y = x + dt * f0
    for _ in range(max_iter):
        y_new = x + dt * _chart_rhs(sys, 0.5 * (x + y))
        if np.max(np.abs(y_new - y)) <= tol * (1.0 + np.max(np.abs(y))):
            return y_new
        y = y_new
    raise NumericalError("implicit midpoint iteration did not converge")


@dataclass(frozen=True)
class DiagnosticsReport:
    energy_drift: float
    constraint_max: float
    momentum_drift: Optional[np.ndarray]


def diagnostics(traj: Trajectory) -> DiagnosticsReport:
    """Max energy deviation, recorded constraint residual, and per
    component momentum deviation when a momentum series was recorded."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    drift = float(np.max(np.abs(traj.energy - traj.energy[0])))
    momentum_drift = None
    if traj.momentum_series is not None:
        series = traj.momentum_series
        momentum_drift = np.max(np.abs(series - series[:, :1]), axis=1)
    return DiagnosticsReport(drift, traj.constraint_residual_max,
                             momentum_drift)

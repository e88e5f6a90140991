"""Mechanical systems on a coordinate chart.

A system is a kinetic-minus-potential Lagrangian
``L(q, v) = v.G(q).v / 2 - V(q)`` with a symmetric positive definite
kinetic metric ``G``, optionally subject to linear velocity constraints
``A(q) v = 0`` (``k`` independent rows).  The admissible velocity space at
``q`` is the null space of ``A(q)``; ``d_basis`` produces a smooth frame
for it.  The Legendre transform ``p = G(q) v`` carries everything to the
momentum side, where ``hamiltonian`` is ``p.G(q)^-1.p / 2 + V(q)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ChartError, ConfigError, NumericalError

RANK_TOL = 1e-10


@dataclass(frozen=True)
class PhasePoint:
    """A point (q, p) of the momentum phase space over the chart."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must have the same length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase point entries must be finite")


@dataclass(frozen=True)
class MechanicalSystem:
    """Chart dimension, kinetic metric, potential and constraint rows.

    ``metric`` and ``constraints`` are callables returning nested lists so
    they stay evaluable on dual scalars; ``constraints`` is None when the
    system is unconstrained (k = 0).
    """

    n: int
    metric: Callable[[Sequence], list]
    potential: Callable[[Sequence], object]
    constraints: Optional[Callable[[Sequence], list]]
    k: int
    q_ref: tuple = ()
    name: str = ""
    coordinates: tuple = ()

    def __post_init__(self):
        if not 0 <= self.k < self.n:
            raise ConfigError(f"need 0 <= k < n, got k={self.k}, n={self.n}")
        if self.k > 0 and self.constraints is None:
            raise ConfigError("k > 0 requires a constraint matrix")
        if not self.q_ref:
            object.__setattr__(self, "q_ref", (0.0,) * self.n)
        if not self.coordinates:
            object.__setattr__(self, "coordinates",
                               tuple(f"q{i + 1}" for i in range(self.n)))

    @property
    def m(self) -> int:
        """Dimension of the admissible velocity space."""
        return self.n - self.k

    @cached_property
    def _pivots(self) -> tuple:
        """Constraint pivot columns, frozen at the reference point.

        The pattern is chosen once so the null-space frame produced by
        d_basis is a smooth function of q wherever the pattern stays valid.
        """
        if self.k == 0:
            return ()
        a = np.asarray(self.constraints(list(self.q_ref)), dtype=float)
        if a.shape != (self.k, self.n):
            raise ConfigError(f"constraint matrix must be {self.k}x{self.n}")
        scale = np.max(np.abs(a))
        if scale == 0.0:
            raise ConfigError("constraint matrix vanishes at the reference "
                              "point")
        work = a.copy()
        used: list[int] = []
        for row in range(self.k):
            candidates = [c for c in range(self.n) if c not in used]
            col = max(candidates, key=lambda c: abs(work[row, c]))
            if abs(work[row, col]) <= RANK_TOL * scale:
                raise ConfigError("constraint rows are rank deficient at the "
                                  "reference point")
            for other in range(row + 1, self.k):
                work[other] -= work[other, col] / work[row, col] * work[row]
            used.append(col)
        return tuple(used)


def legendre(sys: MechanicalSystem, q, v) -> np.ndarray:
    """Momentum of the velocity v at q: p = G(q) v."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != (sys.n,) or v.shape != (sys.n,):
        raise ValueError("legendre: dimension mismatch")
    g = np.asarray(sys.metric(list(q)), dtype=float)
    return g @ v


def inverse_legendre(sys: MechanicalSystem, q, p) -> np.ndarray:
    """Velocity with G(q) v = p, via a Cholesky solve."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != (sys.n,) or p.shape != (sys.n,):
        raise ValueError("inverse_legendre: dimension mismatch")
    g = np.asarray(sys.metric(list(q)), dtype=float)
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ConfigError(f"kinetic metric is not positive definite at "
                          f"q={q.tolist()}") from exc
    y = np.linalg.solve(chol, p)
    return np.linalg.solve(chol.T, y)


def lagrangian(sys: MechanicalSystem, q, v) -> float:
    g = np.asarray(sys.metric(list(np.asarray(q, float))), dtype=float)
    v = np.asarray(v, dtype=float)
    return float(0.5 * v @ g @ v - ad.value_of(sys.potential(list(q))))


def hamiltonian(sys: MechanicalSystem, point: PhasePoint) -> float:
    """Total energy p.G(q)^-1.p / 2 + V(q)."""
    v = inverse_legendre(sys, point.q, point.p)
    return float(0.5 * point.p @ v + ad.value_of(sys.potential(list(point.q))))


def hamiltonian_generic(sys: MechanicalSystem, qs, ps):
    """Energy evaluable on dual scalars (generic metric solve)."""
    g = sys.metric(qs)
    v = ad.solve_generic(g, list(ps))
    return 0.5 * ad.gdot(list(ps), v) + sys.potential(qs)


def hamiltonian_vector_field(sys: MechanicalSystem, point: PhasePoint):
    """(dq/dt, dp/dt) = (dH/dp, -dH/dq) of the unconstrained flow."""
    n = sys.n
    zs = [float(x) for x in point.q] + [float(x) for x in point.p]
    _, grad = ad.gradient_generic(
        lambda ws: hamiltonian_generic(sys, ws[:n], ws[n:]), zs)
    grad = [ad.value_of(g) for g in grad]
    return np.array(grad[n:]), -np.array(grad[:n])


def d_basis(sys: MechanicalSystem, q) -> np.ndarray:
    """Columns spanning the admissible velocities null A(q).

    Uses the pivot pattern frozen at the reference point; raises
    ChartError if that pattern has become singular at q.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (sys.n,):
        raise ValueError("d_basis: point dimension mismatch")
    if sys.k == 0:
        return np.eye(sys.n)
    a = np.asarray(sys.constraints(list(q)), dtype=float)
    pivots = sys._pivots
    free = [c for c in range(sys.n) if c not in pivots]
    a_piv = a[:, pivots]
    svals = np.linalg.svd(a_piv, compute_uv=False)
    if svals[-1] <= RANK_TOL * max(1.0, np.max(np.abs(a))):
        raise ChartError(f"frozen pivot pattern {pivots} is singular at "
                         f"q={q.tolist()}")
    sol = np.linalg.solve(a_piv, -a[:, free])
    basis = np.zeros((sys.n, sys.m))
    for j, c in enumerate(free):
        basis[c, j] = 1.0
        for i, piv in enumerate(pivots):
            basis[piv, j] = sol[i, j]
    return basis


def d_basis_generic(sys: MechanicalSystem, qs) -> list:
    """Same frame as d_basis but on generic scalars (nested lists)."""
    if sys.k == 0:
        return [[1.0 if i == j else 0.0 for j in range(sys.n)]
                for i in range(sys.n)]
    a = [list(row) for row in sys.constraints(qs)]
    pivots = sys._pivots
    free = [c for c in range(sys.n) if c not in pivots]
    a_piv = [[row[c] for c in pivots] for row in a]
    rhs = [[-row[c] for c in free] for row in a]
    scale = max(abs(ad.value_of(x)) for row in a for x in row)
    try:
        sol = ad.solve_generic(a_piv, rhs, min_pivot=RANK_TOL * scale)
    except NumericalError as exc:
        raise ChartError(f"frozen pivot pattern {pivots} is singular") from exc
    basis = [[0.0] * sys.m for _ in range(sys.n)]
    for j, c in enumerate(free):
        basis[c][j] = 1.0
        for i, piv in enumerate(pivots):
            basis[piv][j] = sol[i][j]
    return basis


def d_regularity(sys: MechanicalSystem, q) -> bool:
    """Whether the metric restricted to the admissible space is
    nondegenerate (scale-free determinant test)."""
    try:
        basis = d_basis(sys, q)
    except ChartError:
        return False
    g = np.asarray(sys.metric(list(np.asarray(q, float))), dtype=float)
    w = basis.T @ g @ basis
    det = abs(np.linalg.det(w))
    scale = np.linalg.norm(w) / np.sqrt(sys.m)
    if scale == 0.0:
        return False
    # det/scale^m is the product of eigenvalue ratios, so one collapsed
    # direction is enough to fail the test
    return det > RANK_TOL * scale ** sys.m

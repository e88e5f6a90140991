"""Symmetry reduction through explicit quotient charts, and momentum
diagnostics for cotangent-lifted group actions.

A quotient chart supplies a projection from the constrained (q, u) chart
onto reduced coordinates, a section back, and a fiber motion generated by
the group parameters.  ``reduce`` first audits, on sampled fibers, that
the energy and the admissible field actually push down (well-definedness),
then populates the chart with the reduced field and reduced energy.

Momentum components of a cotangent-lifted action pair the momentum with
the action's infinitesimal generators; constrained flows conserve them
only in special circumstances, so their drift along a trajectory is a
diagnostic, not an error.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import constraint_geometry as geo
from . import dynamics as dyn
from . import hamilton_jacobi as hj
from . import mechanics as mech
from .autodiff import SmoothMap
from .constraint_geometry import ConstrainedChartPoint
from .errors import InvarianceError, PreconditionError
from .hamilton_jacobi import OneFormSection, PhaseMap
from .mechanics import MechanicalSystem, PhasePoint

AUDIT_TOL = 1e-10
ENERGY_AUDIT_TOL = 1e-12


@dataclass(frozen=True)
class QuotientChart:
    """A reduced chart for a symmetry of the constrained system.

    ``project`` maps (q, u) chart coordinates to reduced coordinates,
    ``section`` picks a preimage, and ``fiber_motion(x, params)`` moves a
    chart point along the group orbit.  ``reduced_field`` and
    ``reduced_hamiltonian`` are populated by ``reduce``.
    ``reference_field`` optionally carries closed-form reduced equations
    to compare against; where they disagree with the pushed-down field,
    the pushed-down field is authoritative and the disagreement is
    reported as a conflict.
    """

    name: str
    reduced_dim: int
    project: SmoothMap
    section: SmoothMap
    fiber_motion: Callable[[np.ndarray, np.ndarray], np.ndarray]
    group_dim: int
    reduced_names: tuple = ()
    reference_field: Optional[SmoothMap] = None
    reduced_field: Optional[SmoothMap] = None
    reduced_hamiltonian: Optional[SmoothMap] = None

    def __post_init__(self):
        if self.project.output_dim != self.reduced_dim:
            raise ValueError("projection must produce reduced coordinates")
        if self.section.input_dim != self.reduced_dim:
            raise ValueError("section must consume reduced coordinates")
        if not self.reduced_names:
            object.__setattr__(self, "reduced_names",
                               tuple(f"r{i + 1}"
                                     for i in range(self.reduced_dim)))

    def project_values(self, x) -> np.ndarray:
        return np.array([ad.value_of(t) for t in self.project(list(x))])


@dataclass(frozen=True)
class CotangentLiftedAction:
    """Infinitesimal generators of a group action on the base chart."""

    generators: tuple
    names: tuple = ()

    def __post_init__(self):
        if not self.generators:
            raise ValueError("an action needs at least one generator")
        if not self.names:
            object.__setattr__(self, "names",
                               tuple(f"J{i + 1}"
                                     for i in range(len(self.generators))))

    @property
    def dim(self):
        return len(self.generators)


def momentum_map(action: CotangentLiftedAction,
                 point: PhasePoint) -> np.ndarray:
    """Component i is the pairing of p with the i-th generator at q."""
    out = []
    for gen in action.generators:
        xi = np.array([ad.value_of(t) for t in gen(list(point.q))])
        out.append(float(point.p @ xi))
    return np.array(out)


def momentum_drift(traj: dyn.Trajectory,
                   action: CotangentLiftedAction) -> np.ndarray:
    """Per-component max |J_i(t) - J_i(0)| along a trajectory."""
    values = np.array([momentum_map(action, PhasePoint(s.q, traj.momenta[i]))
                       for i, s in enumerate(traj.states)])
    return np.max(np.abs(values - values[0]), axis=0)


def _chart_field(sys, x) -> np.ndarray:
    point = ConstrainedChartPoint(x[:sys.n], x[sys.n:])
    return dyn.nonholonomic_field(sys, point).chart


def _sample_chart_points(sys, rng, count, box=2.0):
    for _ in range(count):
        q = rng.uniform(-box, box, sys.n)
        u = rng.uniform(-box, box, sys.m)
        yield np.concatenate([q, u])


def reduce(sys: MechanicalSystem, chart: QuotientChart, samples: int = 12,
           group_scale: float = 0.7, rng=None) -> QuotientChart:
    """Audit fiber invariance, then populate the reduced field and energy.

    The audit draws chart points, moves each along sampled fibers, and
    requires that (a) the projection is fiber-constant, (b) the section is
    a right inverse of the projection, (c) the projected admissible field
    and the chart energy agree across each fiber.
    """
    rng = np.random.default_rng(7) if rng is None else rng
    dim = sys.n + sys.m
    if chart.project.input_dim != dim or chart.section.output_dim != dim:
        raise ValueError("chart does not match the system's chart dimension")

    for x in _sample_chart_points(sys, rng, samples):
        reduced = chart.project_values(x)
        jac = ad.jacobian(chart.project, x)
        if np.linalg.matrix_rank(jac, tol=1e-8) != chart.reduced_dim:
            raise InvarianceError(f"chart {chart.name}: projection is not a "
                                  f"submersion at {x.tolist()}")
        back = np.array([ad.value_of(t)
                         for t in chart.section(list(reduced))])
        round_trip = chart.project_values(back) - reduced
        if np.max(np.abs(round_trip)) > AUDIT_TOL * (1 + np.max(np.abs(reduced))):
            raise InvarianceError(f"chart {chart.name}: section is not a "
                                  f"right inverse of the projection")
        pushed_ref = None
        energy_ref = None
        for _ in range(4):
            params = rng.uniform(-group_scale, group_scale, chart.group_dim)
            moved = np.asarray(chart.fiber_motion(x, params), dtype=float)
            gap = np.max(np.abs(chart.project_values(moved) - reduced))
            if gap > AUDIT_TOL * (1 + np.max(np.abs(reduced))):
                raise InvarianceError(f"chart {chart.name}: projection is "
                                      f"not constant on fibers (gap {gap:.3e})")
            pushed = ad.jacobian(chart.project, moved) @ _chart_field(sys,
                                                                      moved)
            energy = ad.value_of(geo.chart_hamiltonian(sys, list(moved)))
            if pushed_ref is None:
                pushed_ref, energy_ref = pushed, energy
                continue
            spread = np.max(np.abs(pushed - pushed_ref))
            if spread > AUDIT_TOL * (1 + np.max(np.abs(pushed_ref))):
                raise InvarianceError(f"chart {chart.name}: admissible field "
                                      f"does not push down (spread {spread:.3e})")
            if abs(energy - energy_ref) > ENERGY_AUDIT_TOL * (1 + abs(energy_ref)):
                raise InvarianceError(f"chart {chart.name}: energy is not "
                                      f"fiber-constant")

    def reduced_field_ev(xbar):
        if any(isinstance(t, ad.DualScalar) for t in xbar):
            raise NotImplementedError(
                "the reduced field is populated point-wise and cannot be "
                "differentiated through dual inputs")
        x = [ad.value_of(t) for t in chart.section(list(xbar))]
        jac = ad.jacobian(chart.project, x)
        return list(jac @ _chart_field(sys, np.asarray(x)))

    def reduced_energy_ev(xbar):
        return [geo.chart_hamiltonian(sys, chart.section(list(xbar)))]

    r = chart.reduced_dim
    return dataclasses.replace(
        chart,
        reduced_field=SmoothMap(r, r, reduced_field_ev,
                                name=f"{chart.name}-field"),
        reduced_hamiltonian=SmoothMap(r, 1, reduced_energy_ev,
                                      name=f"{chart.name}-energy"))


def pi_relatedness_residual(sys: MechanicalSystem, chart: QuotientChart,
                            point: ConstrainedChartPoint) -> float:
    """|Dproject . X(point) - reduced_field(project(point))|."""
    if chart.reduced_field is None:
        raise ValueError("chart is not populated; call reduce first")
    x = np.concatenate([point.q, point.u])
    pushed = ad.jacobian(chart.project, x) @ _chart_field(sys, x)
    reduced = np.array([ad.value_of(t)
                        for t in chart.reduced_field(
                            list(chart.project_values(x)))])
    return float(np.linalg.norm(pushed - reduced))


def _section_chart_map(sys, section: OneFormSection) -> SmoothMap:
    """q -> chart coordinates of (q, gamma(q)), differentiable."""
    n = sys.n

    def ev(qs):
        zs = list(qs) + list(section.gamma(qs))
        return geo.chart_point_values(sys, zs)

    return SmoothMap(n, n + sys.m, ev, name="section-chart")


def _audit_section_invariance(sys, chart, section, q, rng, trials=4,
                              scale=0.7):
    """The section must commute with the fiber motion: moving the chart
    point of (q, gamma(q)) along the fiber lands on (q', gamma(q'))."""
    x = np.array([ad.value_of(t)
                  for t in _section_chart_map(sys, section)(list(q))])
    for _ in range(trials):
        params = rng.uniform(-scale, scale, chart.group_dim)
        moved = np.asarray(chart.fiber_motion(x, params), dtype=float)
        q_moved = moved[:sys.n]
        expected = np.array(
            [ad.value_of(t)
             for t in _section_chart_map(sys, section)(list(q_moved))])
        gap = np.max(np.abs(moved - expected))
        if gap > AUDIT_TOL * (1 + np.max(np.abs(moved))):
            raise PreconditionError(
                f"section is not invariant along chart {chart.name} fibers "
                f"(gap {gap:.3e})")


def reduced_type1_residual(sys: MechanicalSystem, chart: QuotientChart,
                           section: OneFormSection, q,
                           closedness_tol: float = 1e-8, rng=None) -> float:
    """|D(reduced section) . (base of X_H at gamma(q)) -
    reduced_field(reduced section(q))|."""
    if chart.reduced_field is None:
        raise ValueError("chart is not populated; call reduce first")
    rng = np.random.default_rng(11) if rng is None else rng
    q = np.asarray(q, dtype=float)
    hj._require_membership(sys, section, q)
    closed = hj.closedness_on_d(sys, section, q)
    if closed > closedness_tol:
        raise PreconditionError(
            f"section differential does not vanish on admissible pairs "
            f"(residual {closed:.3e})")
    _audit_section_invariance(sys, chart, section, q, rng)

    reduced_section = SmoothMap(
        sys.n, chart.reduced_dim,
        lambda qs: chart.project(_section_chart_map(sys, section)(qs)),
        name="reduced-section")
    phase = PhasePoint(q, section.momenta(q))
    qdot, _ = mech.hamiltonian_vector_field(sys, phase)
    left = ad.jacobian(reduced_section, q) @ qdot
    xbar = [ad.value_of(s) for s in reduced_section(list(q))]
    right = np.array([ad.value_of(t) for t in chart.reduced_field(xbar)])
    return float(np.linalg.norm(left - right))


def reduced_type2_residual(sys: MechanicalSystem, chart: QuotientChart,
                           section: OneFormSection, phase_map: PhaseMap,
                           point: PhasePoint,
                           enforce_symplectic: bool = True, rng=None):
    """Reduced second-type residual plus the unreduced one; the
    equivalence statement is that they vanish together."""
    if chart.reduced_field is None:
        raise ValueError("chart is not populated; call reduce first")
    rng = np.random.default_rng(13) if rng is None else rng
    hj._require_symplectic(phase_map, point, enforce_symplectic)
    mapped = hj._mapped_chart_point(sys, phase_map, point)
    hj._require_membership(sys, section, mapped.q)
    _audit_section_invariance(sys, chart, section, mapped.q, rng)
    _audit_map_invariance(sys, chart, phase_map, point, rng)

    reduced_section = SmoothMap(
        sys.n, chart.reduced_dim,
        lambda qs: chart.project(_section_chart_map(sys, section)(qs)),
        name="reduced-section")
    qdot, _ = mech.hamiltonian_vector_field(sys, mapped)
    left = ad.jacobian(reduced_section, mapped.q) @ qdot

    mapped_chart = geo.chart_point(sys, mapped, tol=hj.MEMBERSHIP_TOL)
    xbar = chart.project_values(np.concatenate([mapped_chart.q,
                                                mapped_chart.u]))
    right = np.array([ad.value_of(t)
                      for t in chart.reduced_field(list(xbar))])
    reduced_gap = float(np.linalg.norm(left - right))
    unreduced_gap = hj.type2_residual(sys, section, phase_map, point,
                                      enforce_symplectic=False)
    return reduced_gap, unreduced_gap


def _audit_map_invariance(sys, chart, phase_map, point, rng, trials=4,
                          scale=0.7):
    """The reduced image of the phase map must be fiber-constant."""
    mapped = hj._mapped_chart_point(sys, phase_map, point)
    start = geo.chart_point(sys, mapped, tol=hj.MEMBERSHIP_TOL)
    x = np.concatenate([start.q, start.u])
    ref = chart.project_values(x)
    try:
        base = geo.chart_point(sys, point, tol=hj.MEMBERSHIP_TOL)
    except PreconditionError as exc:
        raise PreconditionError(
            "the fiber audit of a phase map needs a base point on the "
            "constrained image") from exc
    x0 = np.concatenate([base.q, base.u])
    for _ in range(trials):
        params = rng.uniform(-scale, scale, chart.group_dim)
        moved = np.asarray(chart.fiber_motion(x0, params), dtype=float)
        phase_moved = geo.embed(sys,
                                ConstrainedChartPoint(moved[:sys.n],
                                                      moved[sys.n:]))
        z = phase_map.apply(phase_moved)
        mapped_moved = PhasePoint(z[:sys.n], z[sys.n:])
        try:
            cp = geo.chart_point(sys, mapped_moved, tol=hj.MEMBERSHIP_TOL)
        except PreconditionError as exc:
            raise PreconditionError(
                f"phase map leaves the constrained image along chart "
                f"{chart.name} fibers") from exc
        gap = np.max(np.abs(chart.project_values(
            np.concatenate([cp.q, cp.u])) - ref))
        if gap > AUDIT_TOL * (1 + np.max(np.abs(ref))):
            raise PreconditionError(
                f"phase map is not invariant along chart {chart.name} "
                f"fibers (gap {gap:.3e})")


@dataclass(frozen=True)
class ReferenceComparison:
    """Pushed-down field against closed-form reference equations."""

    max_gap: float
    component_gaps: np.ndarray
    conflicts: tuple
    note: str


def reference_comparison(sys: MechanicalSystem, chart: QuotientChart,
                         points: Sequence[ConstrainedChartPoint],
                         tol: float = 1e-9) -> ReferenceComparison:
    """Compare the populated reduced field with the chart's reference
    equations at the projections of the given points.

    The pushed-down field is authoritative: components where the
    reference disagrees are returned as named conflicts rather than
    errors.
    """
    if chart.reduced_field is None:
        raise ValueError("chart is not populated; call reduce first")
    if chart.reference_field is None:
        raise ValueError(f"chart {chart.name} carries no reference equations")
    gaps = np.zeros(chart.reduced_dim)
    for point in points:
        x = np.concatenate([point.q, point.u])
        xbar = chart.project_values(x)
        got = np.array([ad.value_of(t)
                        for t in chart.reduced_field(list(xbar))])
        want = np.array([ad.value_of(t)
                         for t in chart.reference_field(list(xbar))])
        gaps = np.maximum(gaps, np.abs(got - want))
    conflicts = tuple(f"d{name}/dt" for name, gap
                      in zip(chart.reduced_names, gaps) if gap > tol)
    return ReferenceComparison(
        float(np.max(gaps)) if len(gaps) else 0.0, gaps, conflicts,
        "pushed-down field is authoritative where the reference disagrees")

"""Residual checks for the two Hamilton-Jacobi style identities of the
constrained dynamics.

A one-form section ``gamma`` maps base points into phase space.  The
first identity states that for a section with image inside the
constrained momentum image, whose differential vanishes on pairs of
admissible directions, pushing the base component of the unconstrained
Hamiltonian field through the section reproduces the admissible field
along the section.  The second identity is an equivalence for a
symplectic phase map ``eps``: the projected push of the field of the
composed energy equals the section-lift of the field if and only if the
first-type relation holds at the mapped point.

Every operation returns a residual norm: zero (to round-off) exactly
when the corresponding identity holds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import constraint_geometry as geo
from . import dynamics as dyn
from . import mechanics as mech
from .autodiff import SmoothMap
from .errors import PreconditionError
from .mechanics import MechanicalSystem, PhasePoint

MEMBERSHIP_TOL = 1e-8
SYMPLECTIC_TOL = 1e-8


@dataclass(frozen=True)
class OneFormSection:
    """q -> (q, gamma(q)): a section of phase space over the base chart."""

    gamma: SmoothMap

    def __post_init__(self):
        if self.gamma.input_dim != self.gamma.output_dim:
            raise ValueError("section coefficients must match the chart "
                             "dimension")

    @property
    def n(self):
        return self.gamma.input_dim

    def __call__(self, q):
        return self.gamma(q)

    def momenta(self, q) -> np.ndarray:
        return np.array([ad.value_of(x) for x in self.gamma(list(q))])

    def phase_map(self) -> SmoothMap:
        """The composition with the base projection, as a phase map."""
        n = self.n
        return SmoothMap(2 * n, 2 * n,
                         lambda zs: list(zs[:n]) + list(self.gamma(zs[:n])),
                         name=f"lift({self.gamma.name or 'gamma'})")


@dataclass(frozen=True)
class PhaseMap:
    """A map of phase space to itself, e.g. a candidate symplectic map."""

    eps: SmoothMap

    def __post_init__(self):
        if self.eps.input_dim != self.eps.output_dim:
            raise ValueError("phase maps must preserve the chart dimension")

    def __call__(self, zs):
        return self.eps(zs)

    def apply(self, point: PhasePoint) -> np.ndarray:
        vals = self.eps(list(point.q) + list(point.p))
        return np.array([ad.value_of(x) for x in vals])


def identity_phase_map(n: int) -> PhaseMap:
    return PhaseMap(SmoothMap(2 * n, 2 * n, lambda zs: list(zs),
                              name="identity"))


def d_frame_fields(sys: MechanicalSystem):
    """The admissible-direction frame columns as differentiable fields."""
    def column(i):
        def ev(qs):
            basis = mech.d_basis_generic(sys, qs)
            return [row[i] for row in basis]
        return SmoothMap(sys.n, sys.n, ev, name=f"frame{i}")
    return [column(i) for i in range(sys.m)]


def closedness_on_d(sys: MechanicalSystem, section: OneFormSection,
                    q) -> float:
    """Max |d(gamma)| over pairs of admissible frame directions at q."""
    fields = d_frame_fields(sys)
    worst = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            worst = max(worst, abs(ad.d_oneform(section.gamma, q,
                                                fields[i], fields[j])))
    return worst


def gamma_into_m(sys: MechanicalSystem, section: OneFormSection,
                 q) -> np.ndarray:
    """Membership residual of the section's image at q."""
    q = np.asarray(q, dtype=float)
    return geo.m_residual(sys, PhasePoint(q, section.momenta(q)))


def _require_membership(sys, section, q, tol=MEMBERSHIP_TOL):
    res = gamma_into_m(sys, section, q)
    gap = float(np.max(np.abs(res))) if res.size else 0.0
    if gap > tol:
        raise PreconditionError(
            f"section image is off the constrained image by {gap:.3e} at "
            f"q={np.asarray(q, float).tolist()}")


def _field_along_section(sys, section, q):
    """Ambient admissible field at the section point over q."""
    q = np.asarray(q, dtype=float)
    phase = PhasePoint(q, section.momenta(q))
    point = geo.chart_point(sys, phase, tol=MEMBERSHIP_TOL)
    return dyn.nonholonomic_field(sys, point).ambient


def type1_residual(sys: MechanicalSystem, section: OneFormSection,
                   q) -> float:
    """| Tgamma . (base of X_H at gamma(q)) - X at gamma(q) |."""
    q = np.asarray(q, dtype=float)
    _require_membership(sys, section, q)
    phase = PhasePoint(q, section.momenta(q))
    qdot, _ = mech.hamiltonian_vector_field(sys, phase)
    dgamma = ad.jacobian(section.gamma, q)
    lifted = np.concatenate([qdot, dgamma @ qdot])
    return float(np.linalg.norm(lifted - _field_along_section(sys, section,
                                                              q)))


def classical_hj_residual(sys: MechanicalSystem, section: OneFormSection,
                          q) -> float:
    """Norm of the admissible field along the section; zero exactly when
    the section is a rest solution."""
    _require_membership(sys, section, q)
    return float(np.linalg.norm(_field_along_section(sys, section, q)))


def symplecticity_residual(phase_map: PhaseMap, point: PhasePoint,
                           trials: int = 20, rng=None) -> float:
    """Max |omega(De.v, De.w) - omega(v, w)| over random tangent pairs."""
    rng = np.random.default_rng(0) if rng is None else rng
    z = np.concatenate([point.q, point.p])
    de = ad.jacobian(phase_map.eps, z)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(z.shape[0])
        w = rng.standard_normal(z.shape[0])
        gap = abs(geo.omega_pair(de @ v, de @ w) - geo.omega_pair(v, w))
        worst = max(worst, gap)
    return float(worst)


def _require_symplectic(phase_map, point, enforce=True):
    res = symplecticity_residual(phase_map, point)
    if enforce and res > SYMPLECTIC_TOL:
        raise PreconditionError(
            f"phase map fails the symplecticity audit (residual {res:.3e})")
    return res


def _mapped_chart_point(sys, phase_map, point):
    z = phase_map.apply(point)
    mapped = PhasePoint(z[:sys.n], z[sys.n:])
    residual = geo.m_residual(sys, mapped)
    gap = float(np.max(np.abs(residual))) if residual.size else 0.0
    if gap > MEMBERSHIP_TOL:
        raise PreconditionError(
            f"mapped point is off the constrained image by {gap:.3e}")
    return mapped


def type2_residual(sys: MechanicalSystem, section: OneFormSection,
                   phase_map: PhaseMap, point: PhasePoint,
                   enforce_symplectic: bool = True) -> float:
    """| Tgamma . (base of X_H at eps(point)) - X at eps(point) |."""
    _require_symplectic(phase_map, point, enforce_symplectic)
    mapped = _mapped_chart_point(sys, phase_map, point)
    _require_membership(sys, section, mapped.q)
    qdot, _ = mech.hamiltonian_vector_field(sys, mapped)
    dgamma = ad.jacobian(section.gamma, mapped.q)
    lifted = np.concatenate([qdot, dgamma @ qdot])
    chart_pt = geo.chart_point(sys, mapped, tol=MEMBERSHIP_TOL)
    field = dyn.nonholonomic_field(sys, chart_pt).ambient
    return float(np.linalg.norm(lifted - field))


def type2_equivalence_residual(sys: MechanicalSystem,
                               section: OneFormSection,
                               phase_map: PhaseMap, point: PhasePoint,
                               enforce_symplectic: bool = True):
    """Both sides of the equivalence: the projected push of the composed
    energy field versus the section-lift of the field, and the second-type
    residual itself.  The two gaps vanish together."""
    n = sys.n
    _require_symplectic(phase_map, point, enforce_symplectic)
    mapped = _mapped_chart_point(sys, phase_map, point)
    chart_pt = geo.chart_point(sys, mapped, tol=MEMBERSHIP_TOL)
    frame = geo.k_frame(sys, chart_pt)

    z0 = np.concatenate([point.q, point.p])

    def composed_energy(zs):
        ws = phase_map.eps(zs)
        return mech.hamiltonian_generic(sys, ws[:n], ws[n:])

    _, grad = ad.gradient_generic(composed_energy, [float(x) for x in z0])
    grad = np.array([ad.value_of(g) for g in grad])
    x_composed = np.concatenate([grad[n:], -grad[:n]])
    de = ad.jacobian(phase_map.eps, z0)
    pushed = geo.tau_k(frame, de @ x_composed)

    qdot, _ = mech.hamiltonian_vector_field(sys, mapped)
    dgamma = ad.jacobian(section.gamma, mapped.q)
    lifted = np.concatenate([qdot, dgamma @ qdot])

    lhs_rhs_gap = float(np.linalg.norm(pushed - lifted))
    hj_gap = type2_residual(sys, section, phase_map, point,
                            enforce_symplectic=False)
    return lhs_rhs_gap, hj_gap


def lemma_residuals(sys: MechanicalSystem, section: OneFormSection,
                    point: PhasePoint, v, w):
    """Three pullback identities of the section lift.

    r_i:   pullback of the canonical two-form through the lift equals
           minus d(gamma) on the projected vectors.
    r_ii:  omega(Tlift.v, w) = omega(v, w - Tlift.w) - d(gamma)(...).
    r_iii: the base component of the Hamiltonian field along the lift is
           an admissible velocity (requires the section image on the
           constrained image near the base point).
    """
    n = sys.n
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    z = np.concatenate([point.q, point.p])
    lift = section.phase_map()
    dlift = ad.jacobian(lift, z)
    dg_pair = ad.d_oneform_at(section.gamma, point.q, v[:n], w[:n])

    pullback = geo.omega_pair(dlift @ v, dlift @ w)
    r_i = abs(pullback + dg_pair)

    lhs = geo.omega_pair(dlift @ v, w)
    rhs = geo.omega_pair(v, w - dlift @ w) - dg_pair
    r_ii = abs(lhs - rhs)

    along = PhasePoint(point.q, section.momenta(point.q))
    qdot, _ = mech.hamiltonian_vector_field(sys, along)
    if sys.k:
        a = np.asarray(sys.constraints(list(point.q)), dtype=float)
        r_iii = float(np.max(np.abs(a @ qdot)))
    else:
        r_iii = 0.0
    return float(r_i), float(r_ii), r_iii


def section_through_constraints(sys: MechanicalSystem,
                                u_map: SmoothMap) -> OneFormSection:
    """Section with image inside the constrained momentum image by
    construction: gamma(q) = G(q) B(q) u(q) for free coefficients u."""
    if u_map.input_dim != sys.n or u_map.output_dim != sys.m:
        raise ValueError("coefficient map must send the base chart to "
                         "admissible coefficients")

    def ev(qs):
        basis = mech.d_basis_generic(sys, qs)
        vel = ad.gmatvec(basis, u_map(qs))
        return ad.gmatvec(sys.metric(qs), vel)

    return OneFormSection(SmoothMap(sys.n, sys.n, ev,
                                    name="constrained-section"))

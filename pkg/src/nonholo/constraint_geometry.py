"""Geometry of the constrained momentum image.

The Legendre image of the admissible velocities is a submanifold of phase
space, charted intrinsically by (q, u) where u are the velocity
coefficients in the d_basis frame.  Integrating in this chart keeps the
trajectory on the submanifold exactly; the embedding back into phase
space is (q, G(q) B(q) u).

``k_frame`` assembles, at one chart point, the linear-algebra core of the
constrained dynamics: a basis of the admissible phase directions tangent
to the submanifold, the restriction of the canonical two-form to that
basis, and the restricted energy differential.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import mechanics as mech
from .errors import NumericalError, PreconditionError
from .mechanics import MechanicalSystem, PhasePoint

NONDEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class ConstrainedChartPoint:
    """Intrinsic coordinates (q, u) on the constrained momentum image."""

    q: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.u))):
            raise ValueError("chart point entries must be finite")


@dataclass(frozen=True)
class KFrame:
    """Pointwise data of the admissible-direction frame.

    k_basis      chart tangents spanning the admissible directions,
                 (n+m) x 2m
    omega        restriction of the canonical two-form to those columns,
                 2m x 2m, antisymmetric
    dh           restricted energy differential, length 2m
    ambient_push differential of the embedding, 2n x (n+m)
    ambient_k    ambient images of the k_basis columns, 2n x 2m
    """

    base: ConstrainedChartPoint
    k_basis: np.ndarray
    omega: np.ndarray
    dh: np.ndarray
    ambient_push: np.ndarray
    ambient_k: np.ndarray


def canonical_omega_matrix(n: int) -> np.ndarray:
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def omega_pair(a, b) -> float:
    """Canonical pairing omega((a_q, a_p), (b_q, b_p)) = a_q.b_p - b_q.a_p."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0] // 2
    return float(a[:n] @ b[n:] - b[:n] @ a[n:])


def embed_values(sys: MechanicalSystem, xs):
    """Embedding (q, u) -> (q, G(q) B(q) u) on generic scalars."""
    n = sys.n
    qs, us = list(xs[:n]), list(xs[n:])
    basis = mech.d_basis_generic(sys, qs)
    v = ad.gmatvec(basis, us)
    p = ad.gmatvec(sys.metric(qs), v)
    return qs + p


def embed(sys: MechanicalSystem, point: ConstrainedChartPoint) -> PhasePoint:
    vals = embed_values(sys, list(point.q) + list(point.u))
    return PhasePoint(np.array(vals[:sys.n], dtype=float),
                      np.array([ad.value_of(x) for x in vals[sys.n:]]))


def chart_hamiltonian(sys: MechanicalSystem, xs):
    """Energy in chart coordinates: u.(B'GB).u / 2 + V(q), generic."""
    n = sys.n
    qs, us = list(xs[:n]), list(xs[n:])
    basis = mech.d_basis_generic(sys, qs)
    v = ad.gmatvec(basis, us)
    g = sys.metric(qs)
    return 0.5 * ad.gdot(v, ad.gmatvec(g, v)) + sys.potential(qs)


def m_residual(sys: MechanicalSystem, point: PhasePoint) -> np.ndarray:
    """A(q) G(q)^-1 p; zero exactly when the point lies on the image."""
    if sys.k == 0:
        return np.zeros(0)
    v = mech.inverse_legendre(sys, point.q, point.p)
    a = np.asarray(sys.constraints(list(point.q)), dtype=float)
    return a @ v


def chart_point(sys: MechanicalSystem, point: PhasePoint,
                tol: float = 1e-8) -> ConstrainedChartPoint:
    """Chart coordinates of an on-image phase point (inverse of embed)."""
    v = mech.inverse_legendre(sys, point.q, point.p)
    basis = mech.d_basis(sys, point.q)
    u, *_ = np.linalg.lstsq(basis, v, rcond=None)
    gap = np.linalg.norm(basis @ u - v)
    if gap > tol * (1.0 + np.linalg.norm(v)):
        raise PreconditionError(
            f"phase point is off the constrained image by {gap:.3e}")
    return ConstrainedChartPoint(point.q.copy(), u)


def chart_point_values(sys: MechanicalSystem, zs):
    """Generic chart coordinates of a phase tuple (q..., p...)."""
    n = sys.n
    qs, ps = list(zs[:n]), list(zs[n:])
    g = sys.metric(qs)
    v = ad.solve_generic(g, ps)
    basis = mech.d_basis_generic(sys, qs)
    bt = [list(col) for col in zip(*basis)]
    gram = ad.gmatmul(bt, basis)
    u = ad.solve_generic(gram, ad.gmatvec(bt, v))
    return qs + u


def _frame_core(sys: MechanicalSystem, q, u):
    """One dual pass seeded over q only: the embedded momentum, its base
    jacobian, the metric, the frame and the base energy gradient.  The
    u-derivatives are closed forms (G B and B' p) and need no seeding."""
    n, m = sys.n, sys.m
    us = [float(x) for x in u]
    level, zs = ad.seeded([float(x) for x in q])

    basis = mech.d_basis_generic(sys, zs)
    v = ad.gmatvec(basis, us)
    g = sys.metric(zs)
    p = ad.gmatvec(g, v)
    energy = 0.5 * ad.gdot(v, p) + sys.potential(zs)

    dual = ad.DualScalar
    zero_row = (0.0,) * n

    def split(y):
        # outputs here are level-1 duals or plain floats, never nested
        if type(y) is dual:
            return y.value, y.derivatives
        return y, zero_row

    p0 = np.empty(n)
    momentum_jac = np.empty((n, n))
    for i, y in enumerate(p):
        p0[i], momentum_jac[i] = split(y)
    _, grad_row = split(energy)
    grad_hq = np.asarray(grad_row, dtype=float)
    basis0 = np.array([[x.value if type(x) is dual else x for x in row]
                       for row in basis])
    metric0 = np.array([[x.value if type(x) is dual else x for x in row]
                        for row in g])
    return p0, momentum_jac, grad_hq, basis0, metric0


def _block_data(p0, momentum_jac, grad_hq, basis0, metric0):
    """Blocks of the restricted two-form and energy differential.

    With frame columns (B e_i, 0) pushed to (B e_i, J_w B e_i) and
    (0, e_j) pushed to (0, G B e_j):
        omega = [[S, W], [-W^T, 0]],  S = B^T J_w B - (B^T J_w B)^T,
        W = B^T G B;  dh = (B^T grad_hq, B^T p0).
    The degeneracy of omega is exactly the degeneracy of W, since
    |det omega| = det(W)^2.
    """
    gb = metric0 @ basis0
    bt = basis0.T
    cross = bt @ momentum_jac @ basis0
    s_block = cross - cross.T
    w_block = bt @ gb
    return s_block, w_block, bt @ grad_hq, bt @ p0, gb


def _require_w_regular(w_block, where):
    m = w_block.shape[0]
    if m == 2:
        a, b = w_block[0, 0], w_block[0, 1]
        c, d = w_block[1, 0], w_block[1, 1]
        det = abs(a * d - b * c)
        scale = max(abs(a), abs(b), abs(c), abs(d))
    else:
        det = abs(float(np.linalg.det(w_block)))
        scale = float(np.max(np.abs(w_block)))
    if scale == 0.0 or det ** (1.0 / m) <= NONDEGENERACY_TOL * scale:
        raise NumericalError(
            f"restricted two-form is degenerate at {where}")


def _solve_block_transpose(s_block, w_block, dh1, dh2):
    """Coefficients of omega^T c = dh using the block structure:
    c1 = W^-T dh2,  c2 = -W^-1 (dh1 + S c1)."""
    m = w_block.shape[0]
    if m == 2:
        a, b = w_block[0, 0], w_block[0, 1]
        c, d = w_block[1, 0], w_block[1, 1]
        det = a * d - b * c
        c1 = np.array([(d * dh2[0] - c * dh2[1]) / det,
                       (a * dh2[1] - b * dh2[0]) / det])
        rhs = dh1 + s_block @ c1
        c2 = np.array([(d * rhs[0] - b * rhs[1]) / det,
                       (a * rhs[1] - c * rhs[0]) / det])
        return c1, -c2
    c1 = np.linalg.solve(w_block.T, dh2)
    c2 = -np.linalg.solve(w_block, dh1 + s_block @ c1)
    return c1, c2


def _assemble_omega(s_block, w_block):
    m = w_block.shape[0]
    omega = np.empty((2 * m, 2 * m))
    omega[:m, :m] = s_block
    omega[:m, m:] = w_block
    omega[m:, :m] = -w_block.T
    omega[m:, m:] = 0.0
    return omega


def _check_omega_nondegenerate(omega, where):
    m2 = omega.shape[0]
    det = abs(np.linalg.det(omega))
    scale = np.linalg.norm(omega) / np.sqrt(m2)
    if scale == 0.0 or det ** (1.0 / m2) <= NONDEGENERACY_TOL * scale:
        cond = float(np.linalg.cond(omega)) if scale else np.inf
        raise NumericalError(
            f"restricted two-form is degenerate at {where} "
            f"(condition number {cond:.3e})")


def k_frame(sys: MechanicalSystem, point: ConstrainedChartPoint) -> KFrame:
    """Assemble the admissible frame, restricted two-form and restricted
    energy differential at a chart point.

    Raises NumericalError when the restricted two-form is degenerate
    (compatibility failure), reporting its condition number.
    """
    n, m = sys.n, sys.m
    if point.q.shape != (n,) or point.u.shape != (m,):
        raise ValueError("k_frame: chart point dimension mismatch")
    p0, momentum_jac, grad_hq, basis0, metric0 = _frame_core(sys, point.q,
                                                             point.u)
    s_block, w_block, dh1, dh2, gb = _block_data(p0, momentum_jac, grad_hq,
                                                 basis0, metric0)
    omega = _assemble_omega(s_block, w_block)
    dh = np.concatenate([dh1, dh2])
    _check_omega_nondegenerate(omega, f"q={point.q.tolist()}")

    k_basis = np.zeros((n + m, 2 * m))
    k_basis[:n, :m] = basis0
    k_basis[n:, m:] = np.eye(m)

    push = np.zeros((2 * n, n + m))
    push[:n, :n] = np.eye(n)
    push[n:, :n] = momentum_jac
    push[n:, n:] = gb

    ambient_k = push @ k_basis
    return KFrame(point, k_basis, omega, dh, push, ambient_k)


@dataclass(frozen=True)
class ConditionsReport:
    admissible: bool
    compatible: bool
    omega_condition: float
    constraint_rank: int


def conditions_check(sys: MechanicalSystem,
                     point: ConstrainedChartPoint) -> ConditionsReport:
    """Rank audit of the constraint rows plus nondegeneracy of the
    restricted two-form, with its condition number as a diagnostic."""
    if sys.k == 0:
        rank = 0
    else:
        a = np.asarray(sys.constraints(list(point.q)), dtype=float)
        svals = np.linalg.svd(a, compute_uv=False)
        rank = int(np.sum(svals > mech.RANK_TOL * max(1.0, svals[0])))
    admissible = rank == sys.k
    try:
        frame = k_frame(sys, point)
        cond = float(np.linalg.cond(frame.omega))
        compatible = True
    except NumericalError:
        cond = np.inf
        compatible = False
    return ConditionsReport(admissible, compatible, cond, rank)


def symplectic_orthogonal(basis: np.ndarray) -> np.ndarray:
    """Columns spanning {w : omega(w, v) = 0 for all v in span(basis)}."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    two_n, r = basis.shape
    if two_n % 2 != 0:
        raise ValueError("basis columns must live in a phase space")
    if r > 0:
        svals = np.linalg.svd(basis, compute_uv=False)
        if r > two_n or svals[-1] <= 1e-12 * max(1.0, svals[0]):
            raise ValueError("symplectic_orthogonal: basis is rank deficient")
    jmat = canonical_omega_matrix(two_n // 2)
    target = (jmat @ basis).T
    _, svals, vt = np.linalg.svd(target, full_matrices=True)
    rank = int(np.sum(svals > 1e-12 * max(1.0, svals[0] if len(svals) else 0)))
    return vt[rank:].T


def tau_k(frame: KFrame, ambient_vec) -> np.ndarray:
    """Project an ambient phase tangent onto the admissible frame along
    its symplectic orthogonal complement."""
    vec = np.asarray(ambient_vec, dtype=float)
    comp = symplectic_orthogonal(frame.ambient_k)
    stacked = np.hstack([frame.ambient_k, comp])
    try:
        coeff = np.linalg.solve(stacked, vec)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("admissible projection is singular") from exc
    return frame.ambient_k @ coeff[:frame.ambient_k.shape[1]]

"""Forward-mode automatic differentiation on dual scalars, plus the small
vector-calculus toolkit built on it: Lie brackets of vector fields, the
differential of a one-form, and the bracket-generation rank test.

Derivatives are exact (no truncation) for the supported operation set:
``+ - * /``, powers with constant integer exponent, ``sin``, ``cos``,
``exp``, ``sqrt``.  Nested differentiation works: every seeding gets a
fresh level tag, and scalars from an enclosing level pass through an inner
differentiation as constants.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError

_LEVELS = itertools.count(1)


class DualScalar:
    """Scalar with a value and its derivatives along the active seeds.

    ``value`` and each entry of ``derivatives`` may themselves be dual
    scalars from an earlier (outer) seeding; arithmetic recurses through
    them, which is what makes second and higher derivatives work.
    """

    __slots__ = ("value", "derivatives", "level")

    def __init__(self, value, derivatives, level):
        self.value = value
        self.derivatives = tuple(derivatives)
        self.level = level

    def _check(self, other):
        if len(other.derivatives) != len(self.derivatives):
            raise ValueError("dual scalars from the same seeding must carry "
                             "equally many derivatives")

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, DualScalar):
            if other.level == self.level:
                self._check(other)
                return DualScalar(self.value + other.value,
                                  [a + b for a, b in zip(self.derivatives,
                                                         other.derivatives)],
                                  self.level)
            if other.level > self.level:
                return NotImplemented
        return DualScalar(self.value + other, self.derivatives, self.level)

    def __radd__(self, other):
        return DualScalar(other + self.value, self.derivatives, self.level)

    def __sub__(self, other):
        if isinstance(other, DualScalar):
            if other.level == self.level:
                self._check(other)
                return DualScalar(self.value - other.value,
                                  [a - b for a, b in zip(self.derivatives,
                                                         other.derivatives)],
                                  self.level)
            if other.level > self.level:
                return NotImplemented
        return DualScalar(self.value - other, self.derivatives, self.level)

    def __rsub__(self, other):
        return DualScalar(other - self.value,
                          [-d for d in self.derivatives], self.level)

    def __mul__(self, other):
        if isinstance(other, DualScalar):
            if other.level == self.level:
                self._check(other)
                return DualScalar(self.value * other.value,
                                  [self.value * db + other.value * da
                                   for da, db in zip(self.derivatives,
                                                     other.derivatives)],
                                  self.level)
            if other.level > self.level:
                return NotImplemented
        return DualScalar(self.value * other,
                          [d * other for d in self.derivatives], self.level)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, DualScalar):
            if other.level == self.level:
                self._check(other)
                den = other.value * other.value
                return DualScalar(self.value / other.value,
                                  [(da * other.value - self.value * db) / den
                                   for da, db in zip(self.derivatives,
                                                     other.derivatives)],
                                  self.level)
            if other.level > self.level:
                return NotImplemented
        return DualScalar(self.value / other,
                          [d / other for d in self.derivatives], self.level)

    def __rtruediv__(self, other):
        den = self.value * self.value
        return DualScalar(other / self.value,
                          [-other * d / den for d in self.derivatives],
                          self.level)

    def __neg__(self):
        return DualScalar(-self.value, [-d for d in self.derivatives],
                          self.level)

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or isinstance(exponent, bool):
            raise ValueError("only constant integer exponents are supported")
        if exponent == 0:
            return 1.0
        if exponent == 1:
            return self
        factor = exponent * _ipow(self.value, exponent - 1)
        return DualScalar(_ipow(self.value, exponent),
                          [factor * d for d in self.derivatives], self.level)

    def __repr__(self):
        return f"DualScalar({self.value!r}, {self.derivatives!r})"


def _ipow(x, k):
    if k < 0:
        return 1.0 / _ipow(x, -k)
    out = 1.0
    for _ in range(k):
        out = out * x
    return out


# -- elementary functions, generic over floats and duals ---------------

def sin(x):
    if isinstance(x, DualScalar):
        c = cos(x.value)
        return DualScalar(sin(x.value), [c * d for d in x.derivatives],
                          x.level)
    return math.sin(x)


def cos(x):
    if isinstance(x, DualScalar):
        s = sin(x.value)
        return DualScalar(cos(x.value), [-s * d for d in x.derivatives],
                          x.level)
    return math.cos(x)


def exp(x):
    if isinstance(x, DualScalar):
        e = exp(x.value)
        return DualScalar(e, [e * d for d in x.derivatives], x.level)
    return math.exp(x)


def sqrt(x):
    if isinstance(x, DualScalar):
        r = sqrt(x.value)
        return DualScalar(r, [d / (2.0 * r) for d in x.derivatives], x.level)
    return math.sqrt(x)


def value_of(x):
    """Strip all dual layers and return the underlying float."""
    while isinstance(x, DualScalar):
        x = x.value
    return float(x)


# -- generic dense linear algebra (lists of scalars) --------------------

def gdot(a, b):
    # skipping float zeros keeps sparse metrics cheap under dual arithmetic
    out = 0.0
    for x, y in zip(a, b):
        if (type(x) is float and x == 0.0) or (type(y) is float and y == 0.0):
            continue
        out = out + x * y
    return out


def gmatvec(m, v):
    return [gdot(row, v) for row in m]


def gmatmul(a, b):
    cols = list(zip(*b))
    return [[gdot(row, col) for col in cols] for row in a]


def solve_generic(a, b, min_pivot=0.0):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    Entries may be dual scalars; pivots are chosen on float magnitude, so
    derivative propagation stays exact.  ``b`` may be a vector or a matrix
    given as a list of rows.  Raises NumericalError on a vanishing pivot;
    ``min_pivot`` lets callers enforce a tolerance against an external
    scale in addition to the matrix's own.
    """
    r = len(a)
    vector = not isinstance(b[0], (list, tuple))
    m = [list(row) for row in a]
    rhs = [[x] for x in b] if vector else [list(row) for row in b]
    scale = max((abs(value_of(x)) for row in m for x in row), default=0.0)
    if scale == 0.0:
        raise NumericalError("singular linear system (zero matrix)")
    threshold = max(1e-14 * scale, min_pivot)
    for col in range(r):
        piv = max(range(col, r), key=lambda i: abs(value_of(m[i][col])))
        if abs(value_of(m[piv][col])) <= threshold:
            raise NumericalError("singular linear system")
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1.0 / m[col][col]
        for i in range(col + 1, r):
            f = m[i][col] * inv
            m[i][col] = 0.0
            if type(f) is float and f == 0.0:
                continue
            for j in range(col + 1, r):
                m[i][j] = m[i][j] - f * m[col][j]
            rhs[i] = [x - f * y for x, y in zip(rhs[i], rhs[col])]
    for col in range(r - 1, -1, -1):
        inv = 1.0 / m[col][col]
        rhs[col] = [x * inv for x in rhs[col]]
        for i in range(col):
            f = m[i][col]
            if type(f) is float and f == 0.0:
                continue
            rhs[i] = [x - f * y for x, y in zip(rhs[i], rhs[col])]
    return [row[0] for row in rhs] if vector else rhs


# -- maps and differentials ---------------------------------------------

@dataclass(frozen=True)
class SmoothMap:
    """A map between coordinate charts whose evaluator accepts dual
    scalars, so jacobians come out of it without finite differences."""

    input_dim: int
    output_dim: int
    evaluator: Callable[[Sequence], Sequence]
    name: str = ""

    def __call__(self, xs):
        xs = list(xs)
        if len(xs) != self.input_dim:
            raise ValueError(f"{self.name or 'map'}: expected "
                             f"{self.input_dim} inputs, got {len(xs)}")
        ys = list(self.evaluator(xs))
        if len(ys) != self.output_dim:
            raise ValueError(f"{self.name or 'map'}: evaluator returned "
                             f"{len(ys)} outputs, expected {self.output_dim}")
        return ys


def seeded(xs):
    """Fresh seeding of ``xs``; returns (level, seed scalars)."""
    level = next(_LEVELS)
    n = len(xs)
    seeds = [DualScalar(x, [1.0 if j == i else 0.0 for j in range(n)], level)
             for i, x in enumerate(xs)]
    return level, seeds


def jacobian_rows(fn, xs):
    """Values and derivative rows of ``fn`` at ``xs``.

    Generic core used everywhere: ``xs`` entries may already be dual
    scalars from an outer seeding, in which case the returned values and
    row entries are dual scalars of that outer level.
    """
    level, seeds = seeded(xs)
    n = len(xs)
    values, rows = [], []
    for y in fn(seeds):
        if isinstance(y, DualScalar) and y.level == level:
            values.append(y.value)
            rows.append(list(y.derivatives))
        else:
            values.append(y)
            rows.append([0.0] * n)
    return values, rows


def gradient_generic(fn, xs):
    """Value and gradient of a scalar function (generic scalars)."""
    values, rows = jacobian_rows(lambda zs: [fn(zs)], xs)
    return values[0], rows[0]


def jacobian(f: SmoothMap, x) -> np.ndarray:
    """Jacobian matrix of ``f`` at ``x``: entry (i, j) is df_i/dx_j."""
    xs = [float(v) for v in x]
    if len(xs) != f.input_dim:
        raise ValueError(f"jacobian: point has length {len(xs)}, map expects "
                         f"{f.input_dim}")
    _, rows = jacobian_rows(f, xs)
    out = np.array(rows, dtype=float)
    if not np.all(np.isfinite(out)):
        raise NumericalError("jacobian: evaluator produced non-finite values")
    return out


def gradient(f: SmoothMap, x) -> np.ndarray:
    if f.output_dim != 1:
        raise ValueError("gradient is defined for scalar maps")
    return jacobian(f, x)[0]


# -- Lie brackets --------------------------------------------------------

def lie_bracket_values(field_x, field_y, qs):
    """[X, Y] = DY.X - DX.Y at ``qs``; generic, so brackets can nest."""
    xv = field_x(qs)
    yv = field_y(qs)
    _, dx = jacobian_rows(field_x, qs)
    _, dy = jacobian_rows(field_y, qs)
    return [gdot(dy[i], xv) - gdot(dx[i], yv) for i in range(len(qs))]


def lie_bracket(field_x: SmoothMap, field_y: SmoothMap, q) -> np.ndarray:
    if field_x.input_dim != field_y.input_dim:
        raise ValueError("lie_bracket: fields live on different charts")
    qs = [float(v) for v in q]
    if len(qs) != field_x.input_dim:
        raise ValueError("lie_bracket: point dimension mismatch")
    return np.array([value_of(v)
                     for v in lie_bracket_values(field_x, field_y, qs)])


def lie_bracket_field(field_x: SmoothMap, field_y: SmoothMap) -> SmoothMap:
    """The bracket as a field, differentiable again (nested duals)."""
    n = field_x.input_dim
    return SmoothMap(n, n,
                     lambda qs: lie_bracket_values(field_x, field_y, qs),
                     name=f"[{field_x.name or 'X'},{field_y.name or 'Y'}]")


# -- one-form differential ----------------------------------------------

def d_oneform(gamma: SmoothMap, q, field_x: SmoothMap,
              field_y: SmoothMap) -> float:
    """d(gamma)(X, Y) at q via X(gamma(Y)) - Y(gamma(X)) - gamma([X, Y])."""
    n = gamma.input_dim
    if not (field_x.input_dim == field_y.input_dim == n
            and gamma.output_dim == n):
        raise ValueError("d_oneform: dimension mismatch")
    qs = [float(v) for v in q]
    if len(qs) != n:
        raise ValueError("d_oneform: point dimension mismatch")

    def pairing(field):
        return lambda zs: gdot(gamma(zs), field(zs))

    _, grad_gy = gradient_generic(pairing(field_y), qs)
    _, grad_gx = gradient_generic(pairing(field_x), qs)
    term_x = gdot(grad_gy, field_x(qs))
    term_y = gdot(grad_gx, field_y(qs))
    term_br = gdot(gamma(qs), lie_bracket_values(field_x, field_y, qs))
    return float(value_of(term_x - term_y - term_br))


def d_oneform_at(gamma: SmoothMap, q, xvec, yvec) -> float:
    """d(gamma) evaluated on tangent vectors: y.Dg.x - x.Dg.y."""
    dg = jacobian(gamma, q)
    x = np.asarray(xvec, dtype=float)
    y = np.asarray(yvec, dtype=float)
    return float(y @ dg @ x - x @ dg @ y)


# -- bracket generation ---------------------------------------------------

def bracket_generating(fields, q, max_depth: int, tol: float = 1e-8):
    """Whether iterated brackets of ``fields`` span the chart at ``q``.

    ``max_depth`` counts bracketing rounds: round i appends the brackets
    of the original fields with everything produced in round i - 1
    (the flag D, D + [D, D], D + [D, D] + [D, [D, D]], ...).  The span
    rank is measured through singular values; returns (generating, rank).
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    qs = [float(v) for v in q]
    n = len(qs)
    accumulated = list(fields)

    def current_rank():
        rows = np.array([[value_of(v) for v in f(qs)] for f in accumulated],
                        dtype=float)
        svals = np.linalg.svd(rows, compute_uv=False)
        top = svals[0] if len(svals) else 0.0
        return int(np.sum(svals > tol * max(1.0, top)))

    rank = current_rank()
    generation = list(fields)
    for _ in range(max_depth):
        if rank == n:
            break
        fresh = [lie_bracket_field(f, g)
                 for f in fields for g in generation if g is not f]
        if not fresh:
            break
        accumulated.extend(fresh)
        generation = fresh
        rank = current_rank()
    return rank == n, rank

"""Truncated multivariate Taylor expansions (jets).

A :class:`Jet` stores the Taylor coefficients of a scalar function at a base
point, through a fixed maximal total degree, in graded-lexicographic monomial
order.  Coefficients are factorial-normalized (true Taylor coefficients), so
that multiplication is plain convolution; :meth:`Jet.extract_partial`
multiplies by the factorial on the way out.

Two storage strategies back the same interface:

* ``f64`` jets hold a dense numpy vector over all monomials of total degree
  at most ``degree`` (graded-lex order makes lower-degree coefficient blocks
  prefixes of higher-degree ones, so jets of different degrees share index
  tables).
* ``rational`` jets hold a sparse dict from multi-index tuples to exact
  rationals.

Degree accounting is strict: arithmetic never claims degree above the
minimum of its operands, each partial derivative costs one degree, and
reading past the tracked degree raises :class:`DegreeExhaustedError` instead
of silently returning truncated garbage.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .backend import (
    F64,
    RATIONAL,
    ExactnessError,
    check_backend,
    rational,
    scalar,
    scalar_sqrt,
)

MultiIndex = Tuple[int, ...]


class DegreeExhaustedError(ArithmeticError):
    """An operation required more Taylor degree than a jet carries."""


# --------------------------------------------------------------------------
# Monomial tables (graded lexicographic order; lower degrees are prefixes)
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def monomials(dim: int, degree: int) -> Tuple[MultiIndex, ...]:
    """All exponent tuples with |alpha| <= degree, graded-lex ordered."""
    out: List[MultiIndex] = []
    for total in range(degree + 1):
        out.extend(_monomials_of_degree(dim, total))
    return tuple(out)


@lru_cache(maxsize=None)
def _monomials_of_degree(dim: int, total: int) -> Tuple[MultiIndex, ...]:
    if dim == 1:
        return ((total,),)
    out = []
    for head in range(total, -1, -1):
        for tail in _monomials_of_degree(dim - 1, total - head):
            out.append((head,) + tail)
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_positions(dim: int, degree: int) -> Dict[MultiIndex, int]:
    return {m: i for i, m in enumerate(monomials(dim, degree))}


def n_monomials(dim: int, degree: int) -> int:
    return math.comb(degree + dim, dim)


@lru_cache(maxsize=None)
def _product_table(dim: int, degree: int):
    """Index triples (i, j, k) for the dense truncated convolution.

    For every monomial pair with |m_i| + |m_j| <= degree, k is the position
    of m_i + m_j.  Positions refer to the shared graded-lex ordering, so the
    same table serves operands of any degree >= the entries they index.
    """
    mons = monomials(dim, degree)
    pos = monomial_positions(dim, degree)
    grades = [sum(m) for m in mons]
    ii: List[int] = []
    jj: List[int] = []
    kk: List[int] = []
    for i, mi in enumerate(mons):
        gi = grades[i]
        for j, mj in enumerate(mons):
            if grades[j] + gi > degree:
                break  # graded order: all later j are at least this grade
            ii.append(i)
            jj.append(j)
            kk.append(pos[tuple(a + b for a, b in zip(mi, mj))])
    return (
        np.asarray(ii, dtype=np.int64),
        np.asarray(jj, dtype=np.int64),
        np.asarray(kk, dtype=np.int64),
    )


@lru_cache(maxsize=None)
def _derivative_table(dim: int, out_degree: int, axis: int):
    """(source positions, factors) so that (d/dx_axis f)[p] = f[src[p]] * fac[p]."""
    mons_out = monomials(dim, out_degree)
    pos_in = monomial_positions(dim, out_degree + 1)
    src = np.empty(len(mons_out), dtype=np.int64)
    fac = np.empty(len(mons_out), dtype=np.float64)
    for p, m in enumerate(mons_out):
        bumped = list(m)
        bumped[axis] += 1
        src[p] = pos_in[tuple(bumped)]
        fac[p] = m[axis] + 1
    return src, fac


def _multi_factorial(alpha: MultiIndex) -> int:
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


# --------------------------------------------------------------------------
# The Jet
# --------------------------------------------------------------------------


class Jet:
    """Degree-truncated Taylor expansion of a scalar at a base point.

    The base point itself is not stored: a jet is always an expansion in
    displacement coordinates around wherever it was built.  Calling code
    (expression evaluation, composition) is responsible for the shift.
    """

    __slots__ = ("dim", "degree", "backend", "data")

    def __init__(self, dim: int, degree: int, backend: str, data):
        if degree < 0:
            raise DegreeExhaustedError("jet degree would be negative")
        self.dim = dim
        self.degree = degree
        self.backend = check_backend(backend)
        self.data = data

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value, dim: int, degree: int, backend: str) -> "Jet":
        value = scalar(value, backend)
        if backend == F64:
            data = np.zeros(n_monomials(dim, degree))
            data[0] = value
            return cls(dim, degree, backend, data)
        data = {}
        if value != 0:
            data[(0,) * dim] = value
        return cls(dim, degree, backend, data)

    @classmethod
    def variable(cls, axis: int, dim: int, degree: int, backend: str, base=0) -> "Jet":
        """The jet of the coordinate function x_axis: base + displacement."""
        if not 0 <= axis < dim:
            raise ValueError(f"axis {axis} out of range for dim {dim}")
        out = cls.constant(base, dim, degree, backend)
        unit = tuple(1 if i == axis else 0 for i in range(dim))
        if degree >= 1:
            out = out._with_coeff(unit, scalar(1, backend))
        return out

    @classmethod
    def from_coeffs(cls, coeffs: Dict[MultiIndex, object], dim: int, degree: int, backend: str) -> "Jet":
        out = cls.constant(0, dim, degree, backend)
        for alpha, value in coeffs.items():
            if sum(alpha) <= degree:
                out = out._with_coeff(alpha, scalar(value, backend))
        return out

    def _with_coeff(self, alpha: MultiIndex, value) -> "Jet":
        if self.backend == F64:
            data = self.data.copy()
            data[monomial_positions(self.dim, self.degree)[alpha]] = value
            return Jet(self.dim, self.degree, self.backend, data)
        data = dict(self.data)
        if value == 0:
            data.pop(alpha, None)
        else:
            data[alpha] = value
        return Jet(self.dim, self.degree, self.backend, data)

    # -- accessors ---------------------------------------------------------

    def coeff(self, alpha: Sequence[int]):
        """Taylor coefficient of the monomial x^alpha."""
        alpha = tuple(alpha)
        if sum(alpha) > self.degree:
            raise DegreeExhaustedError(
                f"coefficient {alpha} beyond tracked degree {self.degree}"
            )
        if self.backend == F64:
            return float(self.data[monomial_positions(self.dim, self.degree)[alpha]])
        return self.data.get(alpha, rational(0))

    def extract_partial(self, alpha: Sequence[int]):
        """Mixed partial derivative at the base point (factorial-normalized exit)."""
        return self.coeff(alpha) * _multi_factorial(tuple(alpha))

    @property
    def value(self):
        """Value at the base point (the constant term)."""
        return self.coeff((0,) * self.dim)

    def items(self):
        """Iterate (multi-index, coefficient) over stored monomials."""
        if self.backend == F64:
            mons = monomials(self.dim, self.degree)
            for p, c in enumerate(self.data):
                if c != 0.0:
                    yield mons[p], float(c)
        else:
            yield from self.data.items()

    def truncate(self, degree: int) -> "Jet":
        if degree >= self.degree:
            return self
        if self.backend == F64:
            return Jet(self.dim, degree, self.backend, self.data[: n_monomials(self.dim, degree)].copy())
        data = {a: c for a, c in self.data.items() if sum(a) <= degree}
        return Jet(self.dim, degree, self.backend, data)

    def to_f64(self) -> "Jet":
        if self.backend == F64:
            return self
        data = np.zeros(n_monomials(self.dim, self.degree))
        pos = monomial_positions(self.dim, self.degree)
        for a, c in self.data.items():
            data[pos[a]] = float(c)
        return Jet(self.dim, self.degree, F64, data)

    def max_abs(self) -> float:
        if self.backend == F64:
            return float(np.max(np.abs(self.data))) if len(self.data) else 0.0
        return max((abs(float(c)) for c in self.data.values()), default=0.0)

    def is_zero(self) -> bool:
        if self.backend == F64:
            return not np.any(self.data)
        return not self.data

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim or other.backend != self.backend:
                raise ValueError("jet dim/backend mismatch")
            return other
        return None

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        j = self._coerce(other)
        if j is None:
            return self._add_scalar(scalar(other, self.backend))
        degree = min(self.degree, j.degree)
        a, b = self.truncate(degree), j.truncate(degree)
        if self.backend == F64:
            return Jet(self.dim, degree, F64, a.data + b.data)
        data = dict(a.data)
        for alpha, c in b.data.items():
            s = data.get(alpha, 0) + c
            if s == 0:
                data.pop(alpha, None)
            else:
                data[alpha] = s
        return Jet(self.dim, degree, RATIONAL, data)

    def _add_scalar(self, value):
        zero = (0,) * self.dim
        return self._with_coeff(zero, self.coeff(zero) + value)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        if self.backend == F64:
            return Jet(self.dim, self.degree, F64, -self.data)
        return Jet(self.dim, self.degree, RATIONAL, {a: -c for a, c in self.data.items()})

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return self.__add__(other.__neg__())
        return self._add_scalar(-scalar(other, self.backend))

    def __rsub__(self, other):
        return self.__neg__()._add_scalar(scalar(other, self.backend))

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        j = self._coerce(other)
        if j is None:
            c = scalar(other, self.backend)
            if self.backend == F64:
                return Jet(self.dim, self.degree, F64, self.data * c)
            if c == 0:
                return Jet(self.dim, self.degree, RATIONAL, {})
            return Jet(self.dim, self.degree, RATIONAL, {a: v * c for a, v in self.data.items()})
        degree = min(self.degree, j.degree)
        if self.backend == F64:
            # constant factors skip the convolution entirely
            if not self.data[1:].any():
                return Jet(self.dim, degree, F64,
                           j.data[: n_monomials(self.dim, degree)] * self.data[0])
            if not j.data[1:].any():
                return Jet(self.dim, degree, F64,
                           self.data[: n_monomials(self.dim, degree)] * j.data[0])
            ii, jj, kk = _product_table(self.dim, degree)
            prod = self.data[ii] * j.data[jj]
            out = np.bincount(kk, weights=prod, minlength=n_monomials(self.dim, degree))
            return Jet(self.dim, degree, F64, out)
        data: Dict[MultiIndex, object] = {}
        for a, ca in self.data.items():
            ga = sum(a)
            if ga > degree:
                continue
            for b, cb in j.data.items():
                if ga + sum(b) > degree:
                    continue
                key = tuple(x + y for x, y in zip(a, b))
                s = data.get(key, 0) + ca * cb
                if s == 0:
                    data.pop(key, None)
                else:
                    data[key] = s
        return Jet(self.dim, degree, RATIONAL, data)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return self.__mul__(other.reciprocal())
        c = scalar(other, self.backend)
        if self.backend == F64:
            return self.__mul__(1.0 / c)
        return self.__mul__(rational(1) / c)

    def __rtruediv__(self, other):
        return self.reciprocal().__mul__(other)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("jet powers must be integers")
        if n < 0:
            return self.reciprocal().__pow__(-n)
        result = Jet.constant(1, self.dim, self.degree, self.backend)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- calculus ----------------------------------------------------------

    def derivative(self, axis: int) -> "Jet":
        """Partial derivative; consumes one degree of the budget.

        Differentiating along a chart direction the jet does not depend on
        (``axis >= dim``) is exact and returns a zero jet of the same degree;
        this is what lets fields constant along trailing coordinates be
        carried in a reduced chart while tensors keep full index ranges.
        """
        if axis >= self.dim:
            return Jet.constant(0, self.dim, self.degree, self.backend)
        if self.degree == 0:
            raise DegreeExhaustedError("cannot differentiate a degree-0 jet")
        out_degree = self.degree - 1
        if self.backend == F64:
            src, fac = _derivative_table(self.dim, out_degree, axis)
            return Jet(self.dim, out_degree, F64, self.data[src] * fac)
        data: Dict[MultiIndex, object] = {}
        for a, c in self.data.items():
            if a[axis] == 0:
                continue
            shifted = list(a)
            shifted[axis] -= 1
            if sum(shifted) <= out_degree:
                data[tuple(shifted)] = c * a[axis]
        return Jet(self.dim, out_degree, RATIONAL, data)

    def gradient(self) -> List["Jet"]:
        return [self.derivative(i) for i in range(self.dim)]

    # -- series functions --------------------------------------------------

    def _split(self):
        """(constant term, jet minus constant term)."""
        zero = (0,) * self.dim
        c0 = self.coeff(zero)
        return c0, self._with_coeff(zero, scalar(0, self.backend))

    def _apply_series(self, series) -> "Jet":
        """Horner evaluation of sum_k series[k] * (self - const)^k."""
        _, tail = self._split()
        result = Jet.constant(series[-1], self.dim, self.degree, self.backend)
        for k in range(len(series) - 2, -1, -1):
            result = result * tail + series[k]
        return result

    def reciprocal(self) -> "Jet":
        c0, _ = self._split()
        if c0 == 0:
            raise ZeroDivisionError("series inversion requires nonzero constant term")
        if self.backend == F64:
            series = [(-1.0) ** k / c0 ** (k + 1) for k in range(self.degree + 1)]
        else:
            inv = rational(1) / c0
            series = [(-1) ** k * inv ** (k + 1) for k in range(self.degree + 1)]
        return self._apply_series(series)

    def sqrt(self) -> "Jet":
        c0, _ = self._split()
        if (self.backend == F64 and c0 <= 0) or (self.backend == RATIONAL and c0 <= 0):
            raise ValueError("sqrt requires positive constant term")
        r0 = scalar_sqrt(c0, self.backend)
        # Binomial series: sqrt(c0 + t) = r0 * sum_k C(1/2, k) (t/c0)^k
        series = [r0]
        coeff = r0
        half = 0.5 if self.backend == F64 else rational(1, 2)
        for k in range(1, self.degree + 1):
            coeff = coeff * (half - (k - 1)) / k / c0
            series.append(coeff)
        return self._apply_series(series)

    def exp(self) -> "Jet":
        c0, _ = self._split()
        if self.backend == RATIONAL:
            if c0 != 0:
                raise ExactnessError("exp", c0)
            e0 = rational(1)
        else:
            e0 = math.exp(c0)
        series = [e0]
        for k in range(1, self.degree + 1):
            series.append(series[-1] / k)
        return self._apply_series(series)

    def log(self) -> "Jet":
        c0, _ = self._split()
        if (self.backend == F64 and c0 <= 0) or (self.backend == RATIONAL and c0 <= 0):
            raise ValueError("log requires positive constant term")
        if self.backend == RATIONAL:
            if c0 != 1:
                raise ExactnessError("log", c0)
            series = [rational(0)]
            for k in range(1, self.degree + 1):
                series.append(rational((-1) ** (k + 1), k) * rational(1))
        else:
            series = [math.log(c0)]
            for k in range(1, self.degree + 1):
                series.append((-1.0) ** (k + 1) / (k * c0 ** k))
        return self._apply_series(series)

    def _sincos(self, which: str) -> "Jet":
        c0, _ = self._split()
        if self.backend == RATIONAL:
            if c0 != 0:
                raise ExactnessError(which, c0)
            s0, c0v = rational(0), rational(1)
        else:
            s0, c0v = math.sin(c0), math.cos(c0)
        # Derivative cycle sin -> cos -> -sin -> -cos, factorial-normalized.
        cycle = [s0, c0v, -s0, -c0v] if which == "sin" else [c0v, -s0, -c0v, s0]
        series = []
        fact = scalar(1, self.backend)
        for k in range(self.degree + 1):
            if k:
                fact = fact / k
            series.append(cycle[k % 4] * fact)
        return self._apply_series(series)

    def sin(self) -> "Jet":
        return self._sincos("sin")

    def cos(self) -> "Jet":
        return self._sincos("cos")

    # -- composition -------------------------------------------------------

    def compose(self, inners: Sequence["Jet"]) -> "Jet":
        """Substitute displacement jets into this expansion.

        Each ``inners[i]`` is the jet of (x_i - base_i) as a function of the
        new chart variables; all must share dim/degree/backend and have zero
        constant term (the inner chart's origin maps to this jet's base).
        """
        if len(inners) != self.dim:
            raise ValueError("need one inner jet per variable")
        idim = inners[0].dim
        ideg = min(inner.degree for inner in inners)
        backend = inners[0].backend
        for inner in inners:
            if inner.dim != idim or inner.backend != backend:
                raise ValueError("inner jets must share chart and backend")
            if inner.coeff((0,) * idim) != 0:
                raise ValueError("inner jets must have zero constant term")
        out_degree = min(self.degree, ideg)
        inners = [inner.truncate(out_degree) for inner in inners]
        result = Jet.constant(0, idim, out_degree, backend)
        cache: Dict[MultiIndex, Jet] = {(0,) * self.dim: Jet.constant(1, idim, out_degree, backend)}

        def monomial_jet(alpha: MultiIndex) -> Jet:
            got = cache.get(alpha)
            if got is not None:
                return got
            axis = next(i for i, a in enumerate(alpha) if a > 0)
            prev = list(alpha)
            prev[axis] -= 1
            value = monomial_jet(tuple(prev)) * inners[axis]
            cache[alpha] = value
            return value

        for alpha, c in self.items():
            if c == 0 or sum(alpha) > out_degree:
                continue
            result = result + monomial_jet(alpha) * c
        return result


class JetComposer:
    """Batch composition against a fixed tuple of inner displacement jets.

    Substituting many outer jets into the same coordinate map is the hot path
    of pullbacks and adapted-coordinate re-expansions.  The composer caches
    the jets of all outer monomials once; on the f64 backend it additionally
    flattens them into a dense matrix so each composition is a single
    vector-matrix product.
    """

    def __init__(self, inners: Sequence[Jet]):
        if not inners:
            raise ValueError("need at least one inner jet")
        self.outer_dim = len(inners)
        self.inner_dim = inners[0].dim
        self.backend = inners[0].backend
        self.inner_degree = min(j.degree for j in inners)
        for j in inners:
            if j.dim != self.inner_dim or j.backend != self.backend:
                raise ValueError("inner jets must share chart and backend")
            if j.coeff((0,) * self.inner_dim) != 0:
                raise ValueError("inner jets must have zero constant term")
        self.inners = [j.truncate(self.inner_degree) for j in inners]
        self._cache: Dict[MultiIndex, Jet] = {
            (0,) * self.outer_dim: Jet.constant(1, self.inner_dim, self.inner_degree, self.backend)
        }
        self._matrix = None  # f64 fast path, built lazily

    def _monomial_jet(self, alpha: MultiIndex) -> Jet:
        got = self._cache.get(alpha)
        if got is not None:
            return got
        axis = next(i for i, a in enumerate(alpha) if a > 0)
        prev = list(alpha)
        prev[axis] -= 1
        value = self._monomial_jet(tuple(prev)) * self.inners[axis]
        self._cache[alpha] = value
        return value

    def _build_matrix(self, outer_degree: int):
        mons = monomials(self.outer_dim, outer_degree)
        mat = np.zeros((len(mons), n_monomials(self.inner_dim, self.inner_degree)))
        for r, alpha in enumerate(mons):
            mat[r, :] = self._monomial_jet(alpha).data
        return mat

    def compose(self, outer: Jet) -> Jet:
        if outer.dim != self.outer_dim or outer.backend != self.backend:
            raise ValueError("outer jet does not match composer chart/backend")
        out_degree = min(outer.degree, self.inner_degree)
        if self.backend == F64:
            if self._matrix is None or self._matrix.shape[0] < n_monomials(self.outer_dim, outer.degree):
                self._matrix = self._build_matrix(max(outer.degree, self.inner_degree))
            rows = n_monomials(self.outer_dim, outer.degree)
            data = outer.data @ self._matrix[:rows]
            return Jet(self.inner_dim, self.inner_degree, F64, data).truncate(out_degree)
        result = Jet.constant(0, self.inner_dim, out_degree, self.backend)
        for alpha, c in outer.items():
            if c == 0 or sum(alpha) > out_degree:
                continue
            result = result + self._monomial_jet(alpha).truncate(out_degree) * c
        return result


# --------------------------------------------------------------------------
# Convenience aliases mirroring the operation names of the public surface
# --------------------------------------------------------------------------


def invert_series(j: Jet) -> Jet:
    return j.reciprocal()


def sqrt_series(j: Jet) -> Jet:
    return j.sqrt()

"""Scalar coefficient backends for jet arithmetic.

Two interchangeable backends:

* ``"f64"`` — IEEE double precision (numpy float64 in bulk storage).
* ``"rational"`` — arbitrary-precision rationals (gmpy2.mpq, falling back to
  ``fractions.Fraction`` if gmpy2 is unavailable).

The rational backend is bit-exact for polynomial data.  Operations whose
result cannot be represented as a rational (square roots of non-squares,
logs/exps/trig away from their special rational points) raise
:class:`ExactnessError`, a structured signal that lets callers fall back to
the float backend explicitly rather than silently degrading.
"""

from __future__ import annotations

import math
from fractions import Fraction

try:  # pragma: no cover - exercised implicitly by which branch imports
    from gmpy2 import mpq as _mpq, mpz as _mpz, isqrt as _isqrt

    HAVE_GMPY2 = True
except ImportError:  # pragma: no cover
    HAVE_GMPY2 = False

F64 = "f64"
RATIONAL = "rational"
BACKENDS = (F64, RATIONAL)


class ExactnessError(ValueError):
    """The rational backend cannot represent a requested value exactly.

    Attributes
    ----------
    operation:
        Name of the offending operation (e.g. ``"sqrt"``).
    operand:
        The rational operand that lacks an exact result.
    """

    def __init__(self, operation: str, operand) -> None:
        self.operation = operation
        self.operand = operand
        super().__init__(
            f"rational backend cannot evaluate {operation}({operand}) exactly; "
            "re-run on the f64 backend if approximate results are acceptable"
        )


def check_backend(backend: str) -> str:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    return backend


if HAVE_GMPY2:

    def rational(num, den=1):
        """Build an exact rational from ints, Fractions, or decimal strings."""
        if isinstance(num, Fraction):
            return _mpq(num.numerator, num.denominator) / _mpq(den)
        return _mpq(num, den)

    def is_rational(x) -> bool:
        return isinstance(x, type(_mpq(0))) or isinstance(x, (int, Fraction))

    def _sqrt_exact(q):
        num, den = q.numerator, q.denominator
        rn, rd = _isqrt(num), _isqrt(den)
        if rn * rn != num or rd * rd != den:
            raise ExactnessError("sqrt", q)
        return _mpq(rn, rd)

else:  # pragma: no cover - gmpy2 is available in the supported environment

    def rational(num, den=1):
        return Fraction(num) / Fraction(den)

    def is_rational(x) -> bool:
        return isinstance(x, (Fraction, int))

    def _sqrt_exact(q):
        q = Fraction(q)
        rn = math.isqrt(q.numerator)
        rd = math.isqrt(q.denominator)
        if rn * rn != q.numerator or rd * rd != q.denominator:
            raise ExactnessError("sqrt", q)
        return Fraction(rn, rd)


def scalar(value, backend: str):
    """Coerce ``value`` into the backend's scalar type."""
    if backend == F64:
        return float(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ExactnessError("coerce", value)
        return rational(int(value))
    return rational(value)


def scalar_sqrt(value, backend: str):
    if backend == F64:
        if value < 0:
            raise ValueError(f"sqrt of negative constant term {value}")
        return math.sqrt(value)
    if value < 0:
        raise ValueError(f"sqrt of negative constant term {value}")
    return _sqrt_exact(value)


def as_fraction(x) -> Fraction:
    """Exact conversion of a backend rational (or int) to Fraction."""
    if isinstance(x, Fraction):
        return x
    return Fraction(int(x.numerator), int(x.denominator)) if hasattr(x, "numerator") else Fraction(x)

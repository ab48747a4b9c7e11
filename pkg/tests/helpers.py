"""Shared builders for the test suite."""

import numpy as np

from hyperjet import jet_eval, parse_expr
from hyperjet.jets import Jet
from hyperjet.riemann import MetricJet
from hyperjet.tensors import Tensor


def ev(expr: str, dim: int, degree: int, backend: str = "f64") -> Jet:
    zero = 0.0 if backend == "f64" else 0
    return jet_eval(parse_expr(expr, dim=dim), [zero] * dim, degree, backend)


def metric_from_exprs(exprs, dim: int, degree: int, backend: str = "f64") -> MetricJet:
    """Build a metric from a row-major list of dim*dim expression strings."""
    comps = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            comps[a, b] = ev(exprs[a * dim + b], dim, degree, backend)
    return MetricJet(Tensor(comps, "ll"))


def flat_metric(dim: int, degree: int, backend: str = "f64") -> MetricJet:
    one = "1" if backend == "rational" else "1"
    exprs = [one if a == b else "0" for a in range(dim) for b in range(dim)]
    return metric_from_exprs(exprs, dim, degree, backend)


def perturbed_metric(dim: int, degree: int, rng, magnitude: float = 0.05,
                     backend: str = "f64") -> MetricJet:
    """delta + magnitude * (random symmetric polynomial perturbation)."""
    comps = np.empty((dim, dim), dtype=object)
    names = [f"x{i}" for i in range(dim)]
    for a in range(dim):
        for b in range(a, dim):
            terms = []
            for _ in range(3):
                i, j = rng.integers(0, dim, size=2)
                c = rng.integers(-3, 4)
                if c:
                    terms.append(f"({c})*{names[i]}*{names[j]}")
            body = " + ".join(terms) if terms else "0"
            base = "1" if a == b else "0"
            expr = f"{base} + {magnitude}*({body})"
            jet = ev(expr, dim, degree, backend)
            comps[a, b] = jet
            comps[b, a] = jet
    return MetricJet(Tensor(comps, "ll"))


def stereographic_sphere_metric(dim: int, degree: int, backend: str = "f64") -> MetricJet:
    """Round unit-sphere metric in stereographic chart: 4 delta / (1+|x|^2)^2."""
    r2 = " + ".join(f"x{i}^2" for i in range(dim))
    comps = np.empty((dim, dim), dtype=object)
    conf = ev(f"4/(1 + {r2})^2", dim, degree, backend)
    zero = conf * 0
    for a in range(dim):
        for b in range(dim):
            comps[a, b] = conf if a == b else zero
    return MetricJet(Tensor(comps, "ll"))


def _frac_str(x: float) -> str:
    from fractions import Fraction
    f = Fraction(x).limit_denominator(10000)
    return f"{f.numerator}/{f.denominator}"


def cylinder_scenario(d: int, m: int, degree: int, rng, magnitude: float = 0.05,
                      backend: str = "f64", linear: bool = False):
    """Perturbed-flat ambient with the coordinate hyperplane {x_{m-1} = 0}.

    All fields depend only on the first m coordinates, so jets live in a
    reduced chart while tensors keep the full d-dimensional index range.
    The perturbation mixes quadratic and cubic terms (rational coefficients,
    so the construction is exact on the rational backend).  With ``linear``
    the perturbation also carries degree-1 terms, which makes base-point
    curvatures (second fundamental form, Schouten trace) generically nonzero.
    """
    from hyperjet.hypersurface import EmbeddedSurface

    names = [f"x{i}" for i in range(m)]
    comps = np.empty((d, d), dtype=object)
    one = ev("1", m, degree, backend)
    zero = one * 0
    for a in range(d):
        for b in range(d):
            comps[a, b] = one if a == b else zero
    mag = _frac_str(magnitude)
    for a in range(m):
        for b in range(a + 1):
            terms = []
            if linear:
                i = int(rng.integers(0, m))
                c = int(rng.integers(-9, 10))
                if c:
                    terms.append(f"({c}/10)*{names[i]}")
            for _ in range(2):
                i, j = rng.integers(0, m, size=2)
                c = int(rng.integers(-9, 10))
                if c:
                    terms.append(f"({c}/10)*{names[i]}*{names[j]}")
            i, j, k = rng.integers(0, m, size=3)
            terms.append(f"{names[i]}*{names[j]}*{names[k]}")
            p = ev(f"({mag})*(" + " + ".join(terms) + ")", m, degree, backend)
            comps[a, b] = comps[a, b] + p
            if b != a:
                comps[b, a] = comps[b, a] + p
    g = MetricJet(Tensor(comps, "ll"))
    s = ev(f"x{m-1}", m, degree, backend)
    phi = [ev(f"x{i}", m - 1, degree, backend) for i in range(m - 1)] + \
          [ev("0", m - 1, degree, backend)]
    return EmbeddedSurface(g, s, phi)

"""Declarative scenario files and seeded scenario generation.

File format (one ``key: value`` pair per line, ``[section]`` headers,
``#`` comments)::

    name: my-scenario
    dimension: 5          # ambient dimension d
    chart_dim: 4          # jets depend on the first chart_dim coordinates
    backend: f64          # or: rational
    degree: 13            # jet truncation degree
    seed: 21
    checks: structural paneitz_scalar q4

    [metric]
    g 0 0: 1 + x1^2/10    # omitted entries default to the identity
    g 0 1: x0*x1/20

    [surface]
    s: x3                 # defining function (chart_dim variables)
    phi: x0; x1; x2; 0    # chart map into the jet chart, one entry per
                          # chart coordinate (chart_dim - 1 variables each)

    [density]             # optional scalar operand for operator checks
    f: x0^2*x1 - x2^3

    [conformal]           # optional rescaling exponent for covariance checks
    omega: 1/5 + x0/10

    [quadrature]          # optional closed-surface grid for integral checks
    kind: sphere          # or: ellipsoid
    axis: 1.3             # first-axis stretch (ellipsoid)
    points: 12

Every expression must parse in its declared chart; errors carry byte
offsets into the offending expression.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


class ScenarioError(ValueError):
    """Scenario file is malformed or inconsistent."""


@dataclass
class Scenario:
    name: str = "unnamed"
    dimension: int = 5
    chart_dim: int = 0  # 0 means: equal to dimension
    backend: str = "f64"
    degree: int = 9
    seed: int = 0
    checks: List[str] = field(default_factory=list)
    metric: Dict[str, str] = field(default_factory=dict)  # "a b" -> expr
    s_expr: str = ""
    phi_exprs: List[str] = field(default_factory=list)
    density: Optional[str] = None
    omega: Optional[str] = None
    quadrature_kind: Optional[str] = None
    quadrature_axis: float = 1.0
    quadrature_points: int = 12

    @property
    def m(self) -> int:
        return self.chart_dim or self.dimension

    def to_text(self) -> str:
        lines = [
            f"name: {self.name}",
            f"dimension: {self.dimension}",
            f"chart_dim: {self.m}",
            f"backend: {self.backend}",
            f"degree: {self.degree}",
            f"seed: {self.seed}",
            f"checks: {' '.join(self.checks)}",
            "",
            "[metric]",
        ]
        for key in sorted(self.metric):
            lines.append(f"g {key}: {self.metric[key]}")
        lines += ["", "[surface]", f"s: {self.s_expr}",
                  "phi: " + "; ".join(self.phi_exprs)]
        if self.density is not None:
            lines += ["", "[density]", f"f: {self.density}"]
        if self.omega is not None:
            lines += ["", "[conformal]", f"omega: {self.omega}"]
        if self.quadrature_kind is not None:
            lines += ["", "[quadrature]", f"kind: {self.quadrature_kind}",
                      f"axis: {self.quadrature_axis}",
                      f"points: {self.quadrature_points}"]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("metric", "surface", "density", "conformal",
                               "quadrature"):
                raise ScenarioError(f"line {lineno}: unknown section "
                                    f"[{section}]")
            continue
        if ":" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key: value'")
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        try:
            _assign(sc, section, key, value)
        except ScenarioError:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raise with location
            raise ScenarioError(f"line {lineno}: {exc}") from exc
    _validate(sc)
    return sc


def _assign(sc: Scenario, section: str, key: str, value: str) -> None:
    if section == "":
        if key == "name":
            sc.name = value
        elif key == "dimension":
            sc.dimension = int(value)
        elif key == "chart_dim":
            sc.chart_dim = int(value)
        elif key == "backend":
            if value not in ("f64", "rational"):
                raise ScenarioError(f"unknown backend {value!r}")
            sc.backend = value
        elif key == "degree":
            sc.degree = int(value)
        elif key == "seed":
            sc.seed = int(value)
        elif key == "checks":
            sc.checks = value.split()
        else:
            raise ScenarioError(f"unknown key {key!r}")
    elif section == "metric":
        parts = key.split()
        if len(parts) != 3 or parts[0] != "g":
            raise ScenarioError(f"metric keys look like 'g a b', got {key!r}")
        a, b = int(parts[1]), int(parts[2])
        sc.metric[f"{a} {b}"] = value
    elif section == "surface":
        if key == "s":
            sc.s_expr = value
        elif key == "phi":
            sc.phi_exprs = [p.strip() for p in value.split(";")]
        else:
            raise ScenarioError(f"unknown surface key {key!r}")
    elif section == "density":
        if key != "f":
            raise ScenarioError(f"unknown density key {key!r}")
        sc.density = value
    elif section == "conformal":
        if key != "omega":
            raise ScenarioError(f"unknown conformal key {key!r}")
        sc.omega = value
    elif section == "quadrature":
        if key == "kind":
            if value not in ("sphere", "ellipsoid"):
                raise ScenarioError(f"unknown quadrature kind {value!r}")
            sc.quadrature_kind = value
        elif key == "axis":
            sc.quadrature_axis = float(value)
        elif key == "points":
            sc.quadrature_points = int(value)
        else:
            raise ScenarioError(f"unknown quadrature key {key!r}")


def _validate(sc: Scenario) -> None:
    from .expr import ParseError, parse_expr

    d, m = sc.dimension, sc.m
    if not (2 <= m <= d):
        raise ScenarioError(f"chart_dim {m} incompatible with dimension {d}")
    if not sc.s_expr:
        raise ScenarioError("missing [surface] s: entry")
    if len(sc.phi_exprs) != m:
        raise ScenarioError(f"phi needs {m} entries (one per jet-chart "
                            f"coordinate), got {len(sc.phi_exprs)}")
    for key, expr in sc.metric.items():
        a, b = (int(x) for x in key.split())
        if not (0 <= a < d and 0 <= b < d):
            raise ScenarioError(f"metric index ({a},{b}) out of range")
        _check_expr(expr, m, f"metric g {key}")
    _check_expr(sc.s_expr, m, "surface s")
    for i, p in enumerate(sc.phi_exprs):
        _check_expr(p, m - 1, f"phi[{i}]")
    if sc.density is not None:
        _check_expr(sc.density, m - 1, "density f")
    if sc.omega is not None:
        _check_expr(sc.omega, m, "conformal omega")
    if sc.degree < 6:
        raise ScenarioError("degree must be at least 6 for the check suites")


def _check_expr(expr: str, dim: int, what: str) -> None:
    from .expr import ParseError, parse_expr

    try:
        parse_expr(expr, dim=dim)
    except ParseError as exc:
        raise ScenarioError(f"{what}: {exc}") from exc


# ---------------------------------------------------------------------------
# seeded generation
# ---------------------------------------------------------------------------

FAMILIES = ("flat-perturbation", "graph-hypersurface", "pe-halfspace")


def _poly_terms(rng, names, magnitude: str, n_quad: int = 2,
                linear: bool = True) -> str:
    m = len(names)
    terms = []
    if linear:
        i = int(rng.integers(0, m))
        c = int(rng.integers(-9, 10))
        if c:
            terms.append(f"({c}/10)*{names[i]}")
    for _ in range(n_quad):
        i, j = (int(x) for x in rng.integers(0, m, size=2))
        c = int(rng.integers(-9, 10))
        if c:
            terms.append(f"({c}/10)*{names[i]}*{names[j]}")
    i, j, k = (int(x) for x in rng.integers(0, m, size=3))
    terms.append(f"{names[i]}*{names[j]}*{names[k]}")
    return f"({magnitude})*(" + " + ".join(terms) + ")"


def _frac_str(x: float) -> str:
    from fractions import Fraction

    f = Fraction(x).limit_denominator(10000)
    return f"{f.numerator}/{f.denominator}"


def generate(seed: int, family: str, magnitude: float, dimension: int = 5,
             chart_dim: int = 4, degree: int = 13,
             backend: str = "f64") -> Scenario:
    """Deterministic scenario from (seed, family, magnitude).

    Magnitude 0 produces the exact flat model of the family."""
    if family not in FAMILIES:
        raise ScenarioError(f"unknown family {family!r}; pick from "
                            f"{', '.join(FAMILIES)}")
    if not (0 <= magnitude <= 0.2):
        raise ScenarioError("magnitude must lie in [0, 0.2]")
    rng = np.random.default_rng(seed)
    d, m = dimension, chart_dim
    names = [f"x{i}" for i in range(m)]
    mag = _frac_str(magnitude)
    sc = Scenario(name=f"{family}-s{seed}-m{mag.replace('/', 'over')}",
                  dimension=d, chart_dim=m, backend=backend, degree=degree,
                  seed=seed)
    sc.s_expr = f"x{m-1}"
    sc.phi_exprs = [f"x{i}" for i in range(m - 1)] + ["0"]
    if family == "flat-perturbation":
        for a in range(m):
            for b in range(a + 1):
                body = _poly_terms(rng, names, mag)
                if magnitude != 0:
                    base = "1 + " if a == b else ""
                    sc.metric[f"{a} {b}"] = base + body
                    if a != b:
                        sc.metric[f"{b} {a}"] = sc.metric[f"{a} {b}"]
        sc.checks = ["structural", "paneitz_scalar"]
        if d == 5:
            sc.checks += ["q4", "obstruction", "kdots"]
    elif family == "graph-hypersurface":
        body = _poly_terms(rng, names[:m - 1], mag, n_quad=3)
        if magnitude != 0:
            sc.s_expr = f"x{m-1} - ({body})"
            sc.phi_exprs = [f"x{i}" for i in range(m - 1)] + [body]
        sc.checks = ["structural", "paneitz_scalar"]
        if d == 5:
            sc.checks += ["q4", "obstruction", "kdots", "conformally_flat"]
    else:  # pe-halfspace: conformally rescaled flat half-space
        om = ("0" if magnitude == 0 else
              _poly_terms(rng, names, mag, n_quad=2))
        sc.omega = om
        sc.checks = ["structural", "p6"]
    return sc

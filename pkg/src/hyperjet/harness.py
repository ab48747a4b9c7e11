"""Check suites, closed-surface quadrature integrands, and JSON reports.

A scenario file declares an embedded-hypersurface configuration and a list
of named check suites.  Each suite computes one or more (value, oracle)
pairs — typically an explicit curvature formula against the holographic
route built on the solved asymptotic defining density — and the harness
collects them into a versioned, deterministic JSON report.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from .expr import jet_eval, parse_expr
from .jets import Jet
from .quadrature import Axis, default_jobs, integrate
from .scenarios import Scenario, ScenarioError

REPORT_VERSION = "1"

# residual tolerances by derivative order of the compared quantity
TOL_FOURTH_ORDER = 1e-6
TOL_HIGH_ORDER = 1e-5


@dataclass
class Check:
    id: str
    anchor: str          # stable audit id into the project concordance notes
    values: Dict[str, str]
    residual: float
    passed: bool
    ms: float


@dataclass
class Report:
    scenario: Scenario
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        payload = {
            "version": REPORT_VERSION,
            "scenario_digest": self.scenario.digest(),
            "checks": [{
                "id": c.id,
                "anchor": c.anchor,
                "values": c.values,
                "residual": c.residual,
                "pass": c.passed,
                "ms": round(c.ms, 3),
            } for c in self.checks],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _fmt(x) -> str:
    """Serialize a number: rationals as "p/q", floats as decimal."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return f"{x.numerator}/{x.denominator}"
    return repr(float(x))


# ---------------------------------------------------------------------------
# scenario realization
# ---------------------------------------------------------------------------


class BuiltScenario:
    """A scenario realized as jets: the embedded surface plus optional
    density / conformal-factor operands."""

    def __init__(self, sc: Scenario):
        from .riemann import MetricJet
        from .tensors import Tensor
        from .hypersurface import EmbeddedSurface

        self.sc = sc
        d, m, deg, backend = sc.dimension, sc.m, sc.degree, sc.backend

        def ev(expr: str, dim: int) -> Jet:
            zero = 0.0 if backend == "f64" else 0
            return jet_eval(parse_expr(expr, dim=dim), [zero] * dim, deg,
                            backend)

        comps = np.empty((d, d), dtype=object)
        one, zero = ev("1", m), ev("0", m)
        for a in range(d):
            for b in range(d):
                key = f"{a} {b}"
                if key in sc.metric:
                    comps[a, b] = ev(sc.metric[key], m)
                else:
                    comps[a, b] = one if a == b else zero
        self.metric = MetricJet(Tensor(comps, "ll"))
        self.s_jet = ev(sc.s_expr, m)
        self.phi = [ev(p, m - 1) for p in sc.phi_exprs]
        self.surf = EmbeddedSurface(self.metric, self.s_jet, self.phi)
        self.density = ev(sc.density, m - 1) if sc.density else None
        self.omega = ev(sc.omega, m) if sc.omega else None
        self._ev = ev
        self._impr = None

    def improved(self):
        """Defining density improved to the order the dimension allows
        (cached -- the asymptotic solve dominates suite cost)."""
        if self._impr is None:
            from .yamabe import improve_defining_density

            order = 5 if self.sc.dimension == 5 else 4
            try:
                self._impr = improve_defining_density(self.surf, order)
            except ValueError as exc:
                raise ScenarioError(
                    f"jet degree {self.sc.degree} too low for the "
                    f"order-{order} asymptotic solve; increase degree"
                ) from exc
        return self._impr

    def default_density(self) -> Jet:
        if self.density is not None:
            return self.density
        m = self.sc.m
        names = [f"x{i}" for i in range(m - 1)]
        expr = " + ".join(f"{n}^2" for n in names)
        cross = "*".join(names[: min(3, len(names))])
        return self._ev(f"{expr} + {cross} + {names[0]}^4", m - 1)


# ---------------------------------------------------------------------------
# check suites
# ---------------------------------------------------------------------------


def _record(checks: List[Check], cid: str, anchor: str, values: Dict,
            residual, tol: float, t0: float) -> None:
    res = float(residual)
    checks.append(Check(
        id=cid, anchor=anchor,
        values={k: _fmt(v) for k, v in values.items()},
        residual=res, passed=res <= tol,
        ms=(time.perf_counter() - t0) * 1000.0,
    ))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def suite_structural(bs: BuiltScenario) -> List[Check]:
    """Exact structural identities of the embedding frames."""
    checks: List[Check] = []
    surf = bs.surf
    t0 = time.perf_counter()
    pulled = surf.pull_scalar(bs.s_jet)
    _record(checks, "structural.defining-function-vanishes",
            "ledger:structural-identities",
            {"max_abs": pulled.max_abs()}, pulled.max_abs(), 1e-12, t0)
    t0 = time.perf_counter()
    tr = surf.surface_trace(surf.trace_free_second_form, 0, 1).item()
    _record(checks, "structural.trace-free-second-form",
            "ledger:structural-identities",
            {"trace_max_abs": tr.max_abs()}, tr.max_abs(), 1e-12, t0)
    t0 = time.perf_counter()
    egr = surf.theorema_egregium_residual().max_abs()
    _record(checks, "structural.gauss-curvature-exchange",
            "ledger:structural-identities",
            {"residual": egr}, egr, 1e-9, t0)
    return checks


def suite_paneitz_scalar(bs: BuiltScenario) -> List[Check]:
    """Fourth-order scalar operator: holographic vs explicit route."""
    from .operators import extrinsic_paneitz_scalar
    from .yamabe import holographic_pk

    checks: List[Check] = []
    t0 = time.perf_counter()
    impr = bs.improved()
    f = bs.default_density()
    a = holographic_pk(impr, f, 4)
    b = extrinsic_paneitz_scalar(bs.surf, f)
    _record(checks, "paneitz_scalar.holographic-vs-explicit",
            "ledger:fourth-order-scalar",
            {"holographic": a.value, "explicit": b.value},
            _rel(float(a.value), float(b.value)), TOL_FOURTH_ORDER, t0)
    return checks


def suite_q4(bs: BuiltScenario) -> List[Check]:
    """Fourth-order curvature scalar: decomposition vs log-density route,
    plus sphere-integral checks when a quadrature grid is declared."""
    from .operators import extrinsic_q4
    from .yamabe import holographic_q4

    if bs.sc.dimension != 5:
        raise ScenarioError("q4 suite requires dimension 5")
    checks: List[Check] = []
    t0 = time.perf_counter()
    impr = bs.improved()
    qh = holographic_q4(impr, bs._ev("1", bs.sc.m))
    qd = extrinsic_q4(bs.surf)
    _record(checks, "q4.holographic-vs-explicit", "ledger:q4-decomposition",
            {"holographic": qh.value, "explicit": qd.total.value},
            _rel(float(qh.value), float(qd.total.value)),
            TOL_FOURTH_ORDER, t0)
    if bs.sc.quadrature_kind == "sphere":
        t0 = time.perf_counter()
        val = float(qd.total.value)
        _record(checks, "q4.sphere-pointwise", "ledger:q4-sphere",
                {"value": val, "expected": 6.0}, abs(val - 6.0), 1e-8, t0)
        t0 = time.perf_counter()
        integral = integrate_sphere_q4(bs.sc.quadrature_points,
                                       degree=7)
        target = 16 * math.pi ** 2
        _record(checks, "q4.sphere-integral", "ledger:q4-sphere",
                {"integral": integral.value, "expected": target,
                 "grid_error": integral.error_estimate},
                abs(integral.value - target) / target, 1e-6, t0)
    return checks


def suite_obstruction(bs: BuiltScenario) -> List[Check]:
    from .operators import obstruction_explicit

    if bs.sc.dimension != 5:
        raise ScenarioError("obstruction suite requires dimension 5")
    checks: List[Check] = []
    t0 = time.perf_counter()
    impr = bs.improved()
    a = float(impr.obstruction.value)
    b = float(obstruction_explicit(bs.surf).value)
    _record(checks, "obstruction.solver-vs-explicit",
            "ledger:obstruction-density",
            {"solver": a, "explicit": b}, _rel(a, b), TOL_HIGH_ORDER, t0)
    return checks


def suite_kdots(bs: BuiltScenario) -> List[Check]:
    from .operators import kdots_explicit, kdots_holographic

    if bs.sc.dimension != 5:
        raise ScenarioError("kdots suite requires dimension 5")
    if bs.sc.degree < 15:
        raise ScenarioError("kdots suite needs jet degree >= 15")
    checks: List[Check] = []
    t0 = time.perf_counter()
    impr = bs.improved()
    a = float(kdots_holographic(impr).value)
    b = float(kdots_explicit(bs.surf).value)
    _record(checks, "kdots.holographic-vs-explicit",
            "ledger:rigidity-derivative",
            {"holographic": a, "explicit": b}, _rel(a, b),
            TOL_HIGH_ORDER, t0)
    return checks


def suite_p4n(bs: BuiltScenario) -> List[Check]:
    from .operators import (paneitz_on_normal_explicit,
                            paneitz_on_normal_holographic)

    if bs.sc.dimension != 5:
        raise ScenarioError("p4n suite requires dimension 5")
    if bs.sc.degree < 15:
        raise ScenarioError("p4n suite needs jet degree >= 15")
    checks: List[Check] = []
    t0 = time.perf_counter()
    impr = bs.improved()
    ex = paneitz_on_normal_explicit(bs.surf)
    ho = paneitz_on_normal_holographic(impr)
    res = max(
        _rel(float(ex.normal.value), float(ho.normal.value)),
        _rel(float(ex.top.value), float(ho.top.value)),
        max(_rel(float(a.value), float(b.value)) for a, b in
            zip(ex.tangent.comps.flat, ho.tangent.comps.flat)),
    )
    _record(checks, "p4n.components", "ledger:normal-tractor-operator",
            {"normal_explicit": ex.normal.value,
             "normal_holographic": ho.normal.value,
             "top_explicit": ex.top.value,
             "top_holographic": ho.top.value},
            res, TOL_HIGH_ORDER, t0)
    return checks


def suite_conformally_flat(bs: BuiltScenario) -> List[Check]:
    from .operators import conformally_flat_identities

    checks: List[Check] = []
    t0 = time.perf_counter()
    ids = conformally_flat_identities(bs.surf)
    res = max(float(c.max_abs()) for c in
              ids["schouten_residual"].comps.flat)
    _record(checks, "conformally_flat.schouten-identity",
            "ledger:conformally-flat-identities",
            {"residual": res}, res, 1e-10, t0)
    return checks


def suite_p6(bs: BuiltScenario) -> List[Check]:
    """Sixth-order operator: flat reduction and two-scale covariance."""
    from .hypersurface import EmbeddedSurface
    from .operators import p6_pe, pe_certificate
    from .riemann import conformal_rescale

    if bs.sc.dimension != 5:
        raise ScenarioError("p6 suite requires dimension 5")
    checks: List[Check] = []
    m = bs.sc.m
    f = bs.default_density()
    deep = " + ".join(f"x{i}^2" for i in range(m - 1))
    f = f + bs._ev(f"({deep})^3", m - 1)

    t0 = time.perf_counter()
    out = p6_pe(bs.surf, f)
    lap = lambda h: sum(h.derivative(i).derivative(i) for i in range(m - 1))
    l3 = lap(lap(lap(f)))
    res = float((out - l3.truncate(out.degree)).max_abs())
    _record(checks, "p6.flat-reduction", "ledger:sixth-order-pe",
            {"residual": res}, res, 1e-10, t0)

    if bs.omega is not None:
        t0 = time.perf_counter()
        g2 = conformal_rescale(bs.metric, bs.omega)
        surf2 = EmbeddedSurface(g2, bs.s_jet, bs.phi)
        cert = pe_certificate(surf2)
        ombar = bs.surf.pull_scalar(bs.omega.exp())
        fhat = ombar.truncate(f.degree) * f
        b2 = p6_pe(surf2, fhat)
        lhs = float(ombar.value) ** 5 * float(b2.value)
        rhs = float(out.value)
        _record(checks, "p6.two-scale-covariance", "ledger:sixth-order-pe",
                {"rescaled": lhs, "reference": rhs, "pe_certificate": cert},
                _rel(lhs, rhs), TOL_HIGH_ORDER, t0)
    return checks


SUITES: Dict[str, Callable[[BuiltScenario], List[Check]]] = {
    "structural": suite_structural,
    "paneitz_scalar": suite_paneitz_scalar,
    "q4": suite_q4,
    "obstruction": suite_obstruction,
    "kdots": suite_kdots,
    "p4n": suite_p4n,
    "conformally_flat": suite_conformally_flat,
    "p6": suite_p6,
}


def run_scenario(sc: Scenario, progress: Optional[Callable[[str], None]] = None
                 ) -> Report:
    for name in sc.checks:
        if name not in SUITES:
            raise ScenarioError(f"unknown check suite {name!r}; known: "
                                f"{', '.join(sorted(SUITES))}")
    bs = BuiltScenario(sc)
    report = Report(scenario=sc)
    for name in sc.checks:
        if progress:
            progress(f"running suite {name}")
        report.checks.extend(SUITES[name](bs))
    return report


# ---------------------------------------------------------------------------
# closed-surface quadrature: axisymmetric ellipsoids in flat ambient
# ---------------------------------------------------------------------------
#
# The ellipsoid {x0^2/a^2 + x1^2 + ... + x4^2 = 1} is invariant under
# rotations of (x1..x4), so every scalar invariant of the embedding depends
# only on the colatitude psi of the point (a cos psi, sin psi * omega).
# Integrals therefore reduce to one dimension:
#   integral = Vol(S^3) * \int_0^pi f(psi) sqrt(a^2 sin^2 psi + cos^2 psi)
#                                   sin^3 psi  d psi .
# The per-point surface frames are rebuilt at each node from a local graph
# chart over the dominant gradient direction.


def ellipsoid_surface(axis: float, psi: float, degree: int):
    """Surface frames of the axisymmetric ellipsoid at colatitude psi."""
    from .hypersurface import EmbeddedSurface
    from .riemann import MetricJet
    from .tensors import Tensor

    d = 5
    a = float(axis)
    p = [a * math.cos(psi), math.sin(psi), 0.0, 0.0, 0.0]
    scale = [a, 1.0, 1.0, 1.0, 1.0]

    def ev(expr, dim):
        return jet_eval(parse_expr(expr, dim=dim), [0.0] * dim, degree, "f64")

    comps = np.empty((d, d), dtype=object)
    one, zero = ev("1", d), ev("0", d)
    for i in range(d):
        for j in range(d):
            comps[i, j] = one if i == j else zero
    g = MetricJet(Tensor(comps, "ll"))
    terms = " + ".join(f"(({p[i]!r}) + x{i})^2/({scale[i]**2!r})"
                       for i in range(d))
    s = ev(f"({terms} - 1)/2", d)
    grad = [p[i] / scale[i] ** 2 for i in range(d)]
    jstar = max(range(d), key=lambda i: abs(grad[i]))
    rest = [i for i in range(d) if i != jstar]
    # chart coordinate k is the ambient offset along axis rest[k]
    r2 = " + ".join(f"(({p[i]!r}) + x{k})^2/({scale[i]**2!r})"
                    for k, i in enumerate(rest))
    sign = 1.0 if p[jstar] >= 0 else -1.0
    solved = f"({sign * scale[jstar]!r})*sqrt(1 - ({r2})) - ({p[jstar]!r})"
    phi = [None] * d
    for k, i in enumerate(rest):
        phi[i] = ev(f"x{k}", d - 1)
    graph = ev(solved, d - 1)
    phi[jstar] = graph - graph.value  # strip float roundoff in the offset
    return EmbeddedSurface(g, s, phi)


class EllipsoidIntegrand:
    """Picklable 1-D integrand: named invariant times the reduced measure."""

    def __init__(self, axis: float, name: str, degree: int):
        self.axis = axis
        self.name = name
        self.degree = degree

    def _value(self, surf) -> float:
        from .operators import (SurfaceInvariants, extrinsic_q4,
                                willmore_density)

        if self.name == "one":
            return 1.0
        if self.name == "q4":
            return float(extrinsic_q4(surf).total.value)
        if self.name in ("Gu", "GR", "Wm", "GW", "Vy", "NN"):
            return float(willmore_density(surf, self.name).value)
        inv = SurfaceInvariants(surf)
        if self.name == "grad_h_sq":
            gh = inv.grad_scalar(inv.H)
            return float(inv.dot2(gh, gh).value)
        if self.name == "div_ii_sq":
            v = inv.div_ii()
            return float(inv.dot2(v, v).value)
        if self.name == "ii_graddiv_ii":
            t = inv.fr.covariant_derivative(inv.div_ii())
            return float(inv.dot2(inv.ii, t.symmetrize([0, 1])).value)
        raise ValueError(f"unknown integrand {self.name!r}")

    def __call__(self, point) -> float:
        psi = float(point[0])
        a = self.axis
        surf = ellipsoid_surface(a, psi, self.degree)
        measure = (2 * math.pi ** 2
                   * math.sqrt(a * a * math.sin(psi) ** 2
                               + math.cos(psi) ** 2)
                   * math.sin(psi) ** 3)
        return self._value(surf) * measure


def integrate_ellipsoid(axis: float, name: str, points: int,
                        degree: int = 7, jobs: int | None = None):
    """Integral of the named invariant over the axisymmetric ellipsoid."""
    fn = EllipsoidIntegrand(axis, name, degree)
    return integrate(fn, [Axis("legendre", points, 0.0, math.pi)], jobs=jobs)


def integrate_sphere_q4(points: int, degree: int = 7,
                        jobs: int | None = None):
    return integrate_ellipsoid(1.0, "q4", points, degree=degree, jobs=jobs)


# ---------------------------------------------------------------------------
# baseline comparison
# ---------------------------------------------------------------------------


def compare_with_baseline(report_json: str, baseline_json: str) -> List[str]:
    """Regressions of the current report against a stored baseline."""
    cur = json.loads(report_json)
    base = json.loads(baseline_json)
    problems: List[str] = []
    if cur.get("version") != base.get("version"):
        problems.append("report schema version changed")
    base_checks = {c["id"]: c for c in base.get("checks", [])}
    for c in cur.get("checks", []):
        ref = base_checks.pop(c["id"], None)
        if ref is None:
            continue  # new checks are not regressions
        if ref["pass"] and not c["pass"]:
            problems.append(f"{c['id']}: was passing, now failing")
        if c["residual"] > 10 * max(ref["residual"], 1e-15):
            problems.append(f"{c['id']}: residual grew "
                            f"{ref['residual']:.3e} -> {c['residual']:.3e}")
    for cid in base_checks:
        problems.append(f"{cid}: present in baseline, missing from report")
    return problems

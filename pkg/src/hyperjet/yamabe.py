"""Asymptotic unit-density solver and holographic operator oracles.

Given a hypersurface with defining jet ``s0``, this module improves ``s0``
multiplicatively, order by order, until the squared scale tractor satisfies
``I^2 = 1 + O(sigma^k)``; the solve is blocked at transverse order ``d`` and
the residual coefficient there is the obstruction density (weight ``-d``).

The improved density then powers "holographic" evaluations: iterated
degenerate first-order (Laplace-Robin type) operators reproduce conformal
Laplacian powers and the fourth-order Q-curvature purely from ambient data.

Coordinates: an adapted chart ``(y, t)`` is built from the surface chart by
flowing off the surface along the metric gradient ray of ``s0``; transverse
Taylor coefficients and transverse-constant extensions of surface data are
all phrased through this chart and its jet-inverse.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from .backend import F64, rational
from .jets import Jet, JetComposer
from .riemann import _exact_inverse
from .tractor import LogDensity, ScaleTractor, TracTensor, TractorBundle, robin_power


def invert_jet_map(F: Sequence[Jet]) -> List[Jet]:
    """Jet inverse of a map with zero constant term and invertible Jacobian.

    ``F[i]`` are displacement jets of the forward map in the source chart;
    the result ``G`` satisfies ``F(G(x)) = x`` through the common degree.
    """
    d = len(F)
    if any(f.dim != d for f in F):
        raise ValueError("need a square jet map")
    deg = min(f.degree for f in F)
    backend = F[0].backend
    unit = [tuple(1 if i == j else 0 for i in range(d)) for j in range(d)]
    A = [[F[i].coeff(unit[j]) for j in range(d)] for i in range(d)]
    if backend == F64:
        Ainv = np.linalg.inv(np.array(A, dtype=float)).tolist()
    else:
        frac = [[Fraction(int(x.numerator), int(x.denominator)) for x in row] for row in A]
        Ainv = [[rational(x.numerator, x.denominator) for x in row]
                for row in _exact_inverse(frac)]
    xs = [Jet.variable(j, d, deg, backend) for j in range(d)]

    def lin_combo(M, vec):
        return [sum((vec[j] * M[i][j] for j in range(1, d)), vec[0] * M[i][0])
                for i in range(d)]

    lin = lin_combo(A, xs)
    Fnl = [F[i].truncate(deg) - lin[i] for i in range(d)]
    G = lin_combo(Ainv, xs)
    for _ in range(deg - 1):
        comp = JetComposer(G)
        H = [comp.compose(f) for f in Fnl]
        G = lin_combo(Ainv, [xs[j] - H[j] for j in range(d)])
    return G


class AdaptedChart:
    """Chart (y, t) with the surface at t = 0 and t flowing along grad s0.

    The forward map is the straight ray ``x = phi(y) + t * grad s0(phi(y))``
    (the 1-jet of the gradient flow); its jet-inverse supplies the adapted
    coordinates of an ambient point, which drive both transverse Taylor
    extraction and transverse-constant extension of surface data.
    """

    def __init__(self, surf):
        self.surf = surf
        self.backend = surf.backend
        # active chart: the defining jet's variables (last one transverse
        # once adapted); trailing ambient directions the fields do not
        # depend on never enter the chart change.
        m = surf.m
        self.m = m
        self.n_act = m - 1
        active_phi = [surf.phi_disp[a] for a in range(m)]

        def _is_var(jet, i):
            probe = Jet.variable(i, jet.dim, jet.degree, jet.backend)
            return (jet - probe).max_abs() == 0

        self.identity = (
            active_phi[m - 1].max_abs() == 0
            and all(_is_var(active_phi[a], a) for a in range(m - 1))
        )
        if self.identity:
            # the surface is the coordinate graph {x_{m-1} = 0}: the chart
            # is already adapted and every map below is exact
            return
        deg_phi = min(p.degree for p in active_phi)
        e = [surf.pull_scalar(surf.grad_s.raise_index(0, surf.ambient.ginv)[a])
             for a in range(m)]
        deg = min(deg_phi, min(j.degree for j in e))
        t = Jet.variable(m - 1, m, deg, self.backend)
        self.forward = [
            _lift(active_phi[a].truncate(deg), m) + t * _lift(e[a].truncate(deg), m)
            for a in range(m)
        ]
        self.inverse = invert_jet_map(self.forward)
        self._forward_composer = JetComposer(self.forward)
        self._extend_composer = JetComposer(self.inverse[:self.n_act])

    def to_adapted(self, ambient: Jet) -> Jet:
        """Re-expand an ambient jet in the (y, t) chart."""
        if self.identity:
            return ambient
        return self._forward_composer.compose(ambient)

    def extend(self, fbar: Jet) -> Jet:
        """Transverse-constant ambient extension of a surface-chart jet."""
        if fbar.dim != self.n_act:
            raise ValueError("extend() takes a surface-chart jet")
        if self.identity:
            return _lift(fbar, self.m)
        return self._extend_composer.compose(fbar)

    def transverse_coeffs(self, ambient: Jet, upto: int) -> List[Jet]:
        """Surface-chart jets r_j with ambient = sum_j r_j(y) t^j + O(t^{upto+1})."""
        ad = self.to_adapted(ambient)
        n = self.n_act
        if upto > ad.degree:
            raise ValueError("transverse order exceeds jet degree")
        buckets: List[dict] = [{} for _ in range(upto + 1)]
        for alpha, c in ad.items():
            j = alpha[n]
            if j <= upto:
                buckets[j][alpha[:n]] = c
        return [Jet.from_coeffs(b, n, ad.degree - j, self.backend)
                for j, b in enumerate(buckets)]


class ObstructionBlocked(RuntimeError):
    """Raised when asked to solve past the order where the obstruction sits."""


class ImprovedDensity:
    """Result of the order-by-order unit-normalization of a defining density.

    Attributes
    ----------
    sigma:
        The improved ambient defining jet (same zero locus as the input).
    order:
        Achieved transverse order k: I^2 = 1 + O(sigma^k).
    obstruction:
        Surface-chart jet of the order-d residual density B (I^2 = 1 +
        sigma^d B), present only when the solve was run to order d; it is
        reported in the ambient input scale and carries weight -d.
    slopes:
        The probe-measured affine slope of each order's coefficient
        equation (diagnostic; the order-d slope degenerates to ~0).
    """

    def __init__(self, surf, chart, sigma, order, corrections, obstruction, slopes):
        self.surf = surf
        self.chart = chart
        self.sigma = sigma
        self.order = order
        self.corrections = corrections
        self.obstruction = obstruction
        self.slopes = slopes

    @cached_property
    def bundle(self) -> TractorBundle:
        return TractorBundle(self.surf.ambient)

    @cached_property
    def scale(self) -> ScaleTractor:
        return ScaleTractor(self.bundle, self.sigma)

    def residual_coeffs(self, upto: int) -> List[Jet]:
        """Transverse coefficients of I^2 - 1 for the improved density."""
        return self.chart.transverse_coeffs(self.scale.i_squared - 1, upto)


def improve_defining_density(surf, target_order: int) -> ImprovedDensity:
    """Normalize the defining jet so the scale tractor is unit to high order.

    Multiplicative corrections constant in the transverse direction are
    chosen so each transverse Taylor coefficient of I^2 - 1 vanishes in
    turn.  Each order is a pointwise affine solve whose slope is measured
    numerically with a constant probe; the slope degenerates at order d,
    where the leftover coefficient is the obstruction density.
    """
    d = surf.d
    if target_order > d:
        raise ObstructionBlocked(
            f"cannot solve past transverse order {d}: the order-{d} "
            "coefficient is an invariant of the embedding"
        )
    chart = AdaptedChart(surf)
    bundle = TractorBundle(surf.ambient)
    backend = surf.backend

    # order 0: scale so |grad s| = 1 on the surface
    s = surf.s_jet
    i2 = ScaleTractor(bundle, s).i_squared
    r0 = chart.transverse_coeffs(i2, 0)[0]
    u0 = r0.sqrt().reciprocal()
    if (u0 - Jet.constant(1, u0.dim, u0.degree, backend)).max_abs() != 0:
        # s = O(|x|), so the product is valid one degree past the factor
        s = _mul_vanishing(s, 1, chart.extend(u0))

    corrections: List[Jet] = []
    slopes: List[float] = []
    obstruction: Optional[Jet] = None
    achieved = 1
    for k in range(1, target_order + 1):
        i2 = ScaleTractor(bundle, s).i_squared
        coeffs = chart.transverse_coeffs(i2 - 1, k)
        r_k = coeffs[k]
        # constant probe measures the pointwise slope of the affine relation
        s_probe = s + _jet_power(s, k + 1)
        i2p = ScaleTractor(bundle, s_probe).i_squared
        r_probe = chart.transverse_coeffs(i2p - 1, k)[k]
        mu = r_probe - r_k.truncate(r_probe.degree)
        slopes.append(float(mu.value))
        if k == d:
            if abs(float(mu.value)) > 1e-8:
                raise RuntimeError(
                    f"order-{d} coefficient equation unexpectedly solvable "
                    f"(slope {float(mu.value)})"
                )
            c_lin = chart.transverse_coeffs(s, 1)[1]
            obstruction = r_k / _jet_power(c_lin, d).truncate(r_k.degree)
            break
        if abs(float(mu.value)) < 1e-10:
            raise RuntimeError(f"degenerate coefficient equation at order {k}")
        a_k = -(r_k.truncate(mu.degree)) / mu
        corrections.append(a_k)
        achieved = k + 1
        if a_k.max_abs() == 0:
            continue
        # the correction is O(|x|^{k+1}) times the extension of a_k, so its
        # coefficients are trustworthy k+1 degrees beyond a_k's validity
        corr = _mul_vanishing(_jet_power(s, k + 1), k + 1, chart.extend(a_k))
        s = s.truncate(corr.degree) + corr
    return ImprovedDensity(surf, chart, s, achieved, corrections, obstruction, slopes)


def holographic_pk(impr: ImprovedDensity, fbar: Jet, k: int) -> Jet:
    """k-fold degenerate first-order operator on a boundary density.

    ``fbar`` is a surface-chart jet of weight (k - d + 1)/2; it is extended
    transverse-constantly off the surface, hit k times, and restricted.
    The result does not depend on the chosen extension (tangentiality).
    """
    surf, d = impr.surf, impr.surf.d
    if k % 2 or k > d - 1:
        raise ValueError("order must be even and at most d - 1")
    w0 = Fraction(k - d + 1, 2)
    f_amb = impr.chart.extend(fbar) if fbar.dim == impr.chart.n_act else fbar
    T = impr.bundle.scalar_field(f_amb, w0)
    out = robin_power(impr.scale, T, k)
    return surf.pull_scalar(out.item())


def holographic_q4(impr: ImprovedDensity, tau: Jet) -> Jet:
    """Fourth-order Q-curvature of the surface in the scale of ``tau`` (d=5).

    Computes the 4-fold operator chain applied to log(1/tau): the first
    application acts on the log density, the remaining three on ordinary
    densities of weights -1, -2, -3.  The restriction is converted to a
    representative in the tau-scale.
    """
    surf, d = impr.surf, impr.surf.d
    if d != 5:
        raise ValueError("fourth-order Q-curvature path requires ambient dimension 5")
    if float(tau.value) <= 0:
        raise ValueError("scale density must be positive at the base point")
    ell = LogDensity(-tau.log(), -1)
    v = impr.scale.robin_log(ell)
    v = robin_power(impr.scale, v, 3)  # weights -1 -> -2 -> -3 -> -4
    restricted = surf.pull_scalar(v.item())
    tau_bar = surf.pull_scalar(tau).truncate(restricted.degree)
    return restricted * _jet_power(tau_bar, 4)


def _jet_power(j: Jet, k: int) -> Jet:
    out = j
    for _ in range(k - 1):
        out = out * j
    return out


def _pad(jet: Jet, degree: int) -> Jet:
    """Re-declare a jet at a higher degree, zero-filling unknown coefficients.

    Only sound when the caller can bound the influence of the missing
    coefficients (see :func:`_mul_vanishing`)."""
    if degree <= jet.degree:
        return jet.truncate(degree)
    return Jet.from_coeffs(dict(jet.items()), jet.dim, degree, jet.backend)


def _mul_vanishing(a: Jet, order: int, b: Jet) -> Jet:
    """Product a*b exploiting that a = O(|x|^order).

    Coefficients of the product at total degree r only involve b's
    coefficients at degree <= r - order, so the result is valid through
    min(a.degree, b.degree + order) rather than the naive min of degrees.
    """
    valid = min(a.degree, b.degree + order)
    return a.truncate(valid) * _pad(b, valid)


def _lift(jet: Jet, dim: int) -> Jet:
    """Re-embed a jet in a chart with extra trailing variables."""
    if jet.dim > dim:
        raise ValueError("can only lift to more variables")
    pad = dim - jet.dim
    coeffs = {alpha + (0,) * pad: c for alpha, c in jet.items()}
    return Jet.from_coeffs(coeffs, dim, jet.degree, jet.backend)

"""Numerical tractor calculus in a chosen scale.

A rank-(d+2) "extended" index bundles the three scale-dependent pieces of a
conformal tractor: slot 0 is the weight-(w+1) top density, slots 1..d the
weight-(w-1) tangent-vector part (upper index), slot d+1 the weight-(w-1)
bottom density.  All fields are stored as component jets in a declared
scale; the change-of-scale map is explicit, so scale independence is a
testable property rather than an assumption.

Conventions:

* connection on components: ``grad_a (t+, t^b, t-) =
  (d_a t+ - t_a,  d_a t^b + delta^b_a t- + P^b_a t+,  d_a t- - P_ab t^b)``
  with LC derivatives on the tensor parts;
* pairing ``h(T,U) = t+ u- + g(t,u) + t- u+``;
* second-order invariant operator on weight-w fields:
  ``full_d T = (w(d+2w-2)T, (d+2w-2) grad T, -(tractor Laplacian)T - wJT)``,
  with ``hat_d = full_d / (d+2w-2)`` away from the excluded weight 1-d/2;
* first-order degenerate operator of a defining density ``s``:
  ``robin(T) = grad_n T + w rho T - (s/(d+2w-2))(Lap T + wJT)`` where
  ``n = grad s`` and ``rho = -(Lap s + J s)/d``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .backend import F64, rational
from .jets import Jet
from .riemann import CurvatureFrame, partial
from .tensors import Tensor


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class Density:
    """Representative jet of a conformal density in a declared scale."""

    __slots__ = ("jet", "weight")

    def __init__(self, jet: Jet, weight):
        self.jet = jet
        self.weight = _frac(weight)

    def rescaled(self, omega: Jet) -> "Density":
        """Representative after the scale change g -> e^{2 omega} g."""
        return Density(self.jet * (omega * self._wnum()).exp(), self.weight)

    def _wnum(self):
        w = self.weight
        if w.denominator == 1:
            return int(w)
        return float(w) if self.jet.backend == F64 else rational(w.numerator, w.denominator)


class LogDensity:
    """Log-density: rescaling adds w*omega instead of multiplying."""

    __slots__ = ("jet", "weight")

    def __init__(self, jet: Jet, weight):
        self.jet = jet
        self.weight = _frac(weight)

    def rescaled(self, omega: Jet) -> "LogDensity":
        w = self.weight
        factor = float(w) if self.jet.backend == F64 else rational(w.numerator, w.denominator)
        return LogDensity(self.jet + omega * factor, self.weight)


class TracTensor:
    """Component array with leading extended (tractor) slots, then tensor slots.

    ``comps`` is an object ndarray of Jets with shape
    ``(d+2,)*n_trac + (d,)*len(variance)``; tractor slots are always "upper"
    (lower with the pairing explicitly), tensor slots carry variance letters.
    """

    __slots__ = ("bundle", "comps", "n_trac", "variance", "weight")

    def __init__(self, bundle: "TractorBundle", comps: np.ndarray, n_trac: int,
                 variance: str, weight):
        self.bundle = bundle
        self.comps = np.asarray(comps, dtype=object)
        self.n_trac = n_trac
        self.variance = variance
        self.weight = _frac(weight)
        expect = (bundle.ext,) * n_trac + (bundle.dim,) * len(variance)
        if self.comps.shape != expect:
            raise ValueError(f"shape {self.comps.shape} != expected {expect}")

    def copy_with(self, comps) -> "TracTensor":
        return TracTensor(self.bundle, comps, self.n_trac, self.variance, self.weight)

    def __add__(self, other: "TracTensor") -> "TracTensor":
        self._like(other)
        return self.copy_with(self.comps + other.comps)

    def __sub__(self, other: "TracTensor") -> "TracTensor":
        self._like(other)
        return self.copy_with(self.comps - other.comps)

    def __neg__(self) -> "TracTensor":
        return self.copy_with(-self.comps)

    def _like(self, other: "TracTensor"):
        if (self.n_trac, self.variance) != (other.n_trac, other.variance) \
                or self.weight != other.weight:
            raise ValueError("tractor field mismatch")

    def scale(self, factor) -> "TracTensor":
        # fresh C-order array: reshape(-1) must be a view for the fill below
        out = np.empty(self.comps.shape, dtype=object)
        src, dst = self.comps.reshape(-1), out.reshape(-1)
        for i, c in enumerate(src):
            dst[i] = c * factor
        return self.copy_with(out)

    def scale_weight(self, factor, dweight) -> "TracTensor":
        out = self.scale(factor)
        return TracTensor(self.bundle, out.comps, self.n_trac, self.variance,
                          self.weight + _frac(dweight))

    def max_abs(self) -> float:
        return max(c.max_abs() for c in self.comps.reshape(-1))

    @property
    def degree(self) -> int:
        return min(c.degree for c in self.comps.reshape(-1))

    def item(self) -> Jet:
        if self.n_trac or self.variance:
            raise ValueError("item() needs a scalar field")
        return self.comps[()]

    def top(self) -> "TracTensor":
        """Slot-0 component of the first tractor slot (weight w+1 piece)."""
        return TracTensor(self.bundle, self.comps[0], self.n_trac - 1,
                          self.variance, self.weight + 1)

    def bottom(self) -> "TracTensor":
        return TracTensor(self.bundle, self.comps[self.bundle.ext - 1],
                          self.n_trac - 1, self.variance, self.weight - 1)

    def middle(self) -> Tensor:
        """Tangent part of the first tractor slot as a Tensor (upper index)."""
        if self.n_trac != 1 or self.variance:
            raise ValueError("middle() needs a single-slot tractor field")
        return Tensor(self.comps[1:self.bundle.ext - 1], "u")


class TractorBundle:
    """Connection, pairing and invariant operators over one curvature frame."""

    def __init__(self, frame: CurvatureFrame):
        self.frame = frame
        self.dim = frame.dim
        self.ext = frame.dim + 2
        self.backend = frame.backend

    # -- constructors ------------------------------------------------------

    def scalar_field(self, jet: Jet, weight) -> TracTensor:
        comps = np.empty((), dtype=object)
        comps[()] = jet
        return TracTensor(self, comps, 0, "", weight)

    def from_density(self, dens: Density) -> TracTensor:
        return self.scalar_field(dens.jet, dens.weight)

    def vector_field(self, top: Jet, mid_upper: Sequence[Jet], bot: Jet,
                     weight) -> TracTensor:
        comps = np.empty((self.ext,), dtype=object)
        comps[0] = top
        for a in range(self.dim):
            comps[1 + a] = mid_upper[a]
        comps[self.ext - 1] = bot
        return TracTensor(self, comps, 1, "", weight)

    def canonical_x(self, template: Jet) -> TracTensor:
        """The weight-1 section with only the bottom slot set (to 1)."""
        zero = template * 0
        one = zero + 1
        return self.vector_field(zero, [zero] * self.dim, one, 1)

    # -- pairing -----------------------------------------------------------

    @cached_property
    def _pair_terms(self):
        """(i, j, jet) triples with h[i, j] = jet, skipping zeros."""
        terms = [(0, self.ext - 1, None), (self.ext - 1, 0, None)]
        g = self.frame.g
        for a in range(self.dim):
            for b in range(self.dim):
                terms.append((1 + a, 1 + b, g[a, b]))
        return terms

    def pair(self, T: TracTensor, U: TracTensor) -> Jet:
        """h-pairing of two single-slot tractor fields."""
        if (T.n_trac, T.variance) != (1, "") or (U.n_trac, U.variance) != (1, ""):
            raise ValueError("pair() takes two single-slot tractor fields")
        acc = None
        for i, j, gij in self._pair_terms:
            term = T.comps[i] * U.comps[j]
            if gij is not None:
                term = term * gij
            acc = term if acc is None else acc + term
        return acc

    def lower_first(self, T: TracTensor) -> np.ndarray:
        """Components of h_AB T^B... along the first tractor slot."""
        out = np.empty(T.comps.shape, dtype=object)
        out[0] = T.comps[self.ext - 1]
        out[self.ext - 1] = T.comps[0]
        g = self.frame.g
        for a in range(self.dim):
            acc = None
            for b in range(self.dim):
                term = _mul_block(T.comps[1 + b], g[a, b])
                acc = term if acc is None else acc + term
            out[1 + a] = acc
        return out

    # -- connection --------------------------------------------------------

    @cached_property
    def _conn_terms(self):
        """Sparse entries (c, i, j, jet) of the slot-connection matrices."""
        g, P = self.frame.g, self.frame.schouten
        Pud = P.raise_index(0, self.frame.ginv)  # P^b_c = ginv^{be} P_{ec}
        terms = []
        last = self.ext - 1
        for c in range(self.dim):
            for b in range(self.dim):
                terms.append((c, 0, 1 + b, -g[c, b]))
                terms.append((c, 1 + b, 0, Pud[b, c]))
                terms.append((c, last, 1 + b, -P[c, b]))
            terms.append((c, 1 + c, last, None))  # delta^b_c * bottom
        return terms

    def grad(self, T: TracTensor) -> TracTensor:
        """Coupled covariant derivative; new lower tensor slot goes first
        among the tensor slots (position n_trac)."""
        fr = self.frame
        d, ext, nt = self.dim, self.ext, T.n_trac
        # LC part: derivative + Christoffel terms on tensor slots
        base = _lc_derivative(fr, T)
        # connection corrections for each tractor slot
        for t in range(nt):
            moved = np.moveaxis(T.comps, t, 0) if t else T.comps
            corr = np.empty((d, ext) + moved.shape[1:], dtype=object)
            zero_like = _zero_block(moved[0], fr)
            for c in range(d):
                for i in range(ext):
                    corr[c, i] = zero_like
            for c, i, j, jet in self._conn_terms:
                if jet is None:
                    corr[c, i] = corr[c, i] + moved[j]
                else:
                    corr[c, i] = corr[c, i] + _mul_block(moved[j], jet)
            # the slot's middle components form an upper vector: LC correction
            gamma = fr.gamma
            for c in range(d):
                for b in range(d):
                    for e in range(d):
                        corr[c, 1 + b] = corr[c, 1 + b] + _mul_block(
                            moved[1 + e], gamma[b, c, e])
            # corr axes: [c, tractor_i, other slots...]; put tractor_i back
            # at t, and c at position nt (first tensor slot of the result)
            corr = np.moveaxis(corr, 1, 1 + t)      # [c, .. i at t+1 ..]
            corr = np.moveaxis(corr, 0, nt)         # c to tensor-slot front
            base = base + corr
        return TracTensor(self, base, nt, "l" + T.variance, T.weight)

    def laplacian(self, T: TracTensor) -> TracTensor:
        DD = self.grad(self.grad(T))
        nt = T.n_trac
        ginv = self.frame.ginv
        comps = DD.comps
        acc = None
        for a in range(self.dim):
            for b in range(self.dim):
                gab = ginv[a, b]
                block = comps[(slice(None),) * nt + (a, b)] if nt else comps[a, b]
                term = _mul_block(block, gab)
                acc = term if acc is None else acc + term
        return TracTensor(self, np.asarray(acc, dtype=object), nt, T.variance, T.weight)

    # -- invariant operators ----------------------------------------------

    def _wfactor(self, value: Fraction):
        if self.backend == F64:
            return float(value)
        return rational(value.numerator, value.denominator)

    def full_d(self, T: TracTensor) -> TracTensor:
        """Second-order invariant operator; prepends a tractor slot."""
        d, w = self.dim, T.weight
        hprime = d + 2 * w - 2
        grad = self.grad(T)
        lap = self.laplacian(T)
        jay = self.frame.jay
        out = np.empty((self.ext,) + T.comps.shape, dtype=object)
        out[0] = self.scale_comps(T.comps, self._wfactor(w * hprime))
        # middle: hprime * ginv^{ab} grad_b T
        ginv = self.frame.ginv
        nt = T.n_trac
        for a in range(self.dim):
            acc = None
            for b in range(self.dim):
                block = grad.comps[(slice(None),) * nt + (b,)] if nt else grad.comps[b]
                term = _mul_block(block, ginv[a, b] * self._wfactor(hprime))
                acc = term if acc is None else acc + term
            out[1 + a] = acc
        bot = -(lap.comps + self.scale_comps(T.comps, jay * self._wfactor(w)))
        out[self.ext - 1] = bot
        return TracTensor(self, out, T.n_trac + 1, T.variance, w - 1)

    def hat_d(self, T: TracTensor) -> TracTensor:
        d, w = self.dim, T.weight
        hprime = d + 2 * w - 2
        if hprime == 0:
            raise ExcludedWeightError(d, w)
        return self.full_d(T).scale(self._wfactor(Fraction(1, 1) / hprime))

    def d_dot(self, T: TracTensor) -> TracTensor:
        """Full trace: the invariant operator's new slot contracted against
        the first tractor slot of its argument (a divergence-like scalar)."""
        if T.n_trac < 1:
            raise ValueError("needs a tractor slot")
        d, w = self.dim, T.weight
        hprime = d + 2 * w - 2
        grad = self.grad(T)
        lap = self.laplacian(T)
        jay = self.frame.jay
        nt = T.n_trac
        # top slot of operator pairs with bottom of T; middle traces grad's
        # derivative index (raised) against T's middle slot; bottom pairs top.
        term1 = self.scale_comps(T.comps[self.ext - 1], self._wfactor(w * hprime))
        # middle trace: the raised derivative index meets the lowered middle
        # slot, so the metric factors cancel to a plain diagonal sum
        acc = None
        for c in range(self.dim):
            block = grad.comps[(1 + c,) + (slice(None),) * (nt - 1) + (c,)]
            acc = block if acc is None else acc + block
        term2 = self.scale_comps(np.asarray(acc, dtype=object), self._wfactor(hprime))
        term3 = -(lap.comps[0] + self.scale_comps(T.comps[0], jay * self._wfactor(w)))
        comps = term1 + term2 + term3
        return TracTensor(self, np.asarray(comps, dtype=object), nt - 1,
                          T.variance, w - 1)

    def scale_comps(self, comps, factor):
        arr = np.asarray(comps, dtype=object)
        out = np.empty(arr.shape, dtype=object)
        src, dst = arr.reshape(-1), out.reshape(-1)
        for i, c in enumerate(src):
            dst[i] = c * factor
        return out


def change_scale(T: TracTensor, omega: Jet, new_bundle: TractorBundle) -> TracTensor:
    """Component representatives of a single-slot field after g -> e^{2w}g.

    top stays (as a density), the tangent part picks up grad(omega) * top,
    the bottom drops the pairing and half-norm terms; every slot then applies
    its own density factor.  Index raising uses the original scale.
    """
    if (T.n_trac, T.variance) != (1, ""):
        raise ValueError("change_scale handles single-slot tractor fields")
    bundle = T.bundle
    d, w = bundle.dim, T.weight
    fr = bundle.frame
    ups = fr.gradient_scalar(omega)  # lower
    ups_up = ups.raise_index(0, fr.ginv)
    ups2 = fr.ginv.dot(ups.tensor_product(ups), [(0, 0), (1, 1)]).item()
    top, bot = T.comps[0], T.comps[bundle.ext - 1]
    mid = [T.comps[1 + a] for a in range(d)]
    new_mid = [mid[a] + ups_up[a] * top for a in range(d)]
    pairing = top * 0
    for a in range(d):
        pairing = pairing + mid[a] * ups[a]
    half = 0.5 if bundle.backend == F64 else rational(1, 2)
    new_bot = bot - pairing - ups2 * top * half
    wf_top = bundle._wfactor(w + 1)
    wf_low = bundle._wfactor(w - 1)
    e_top = (omega * wf_top).exp()
    e_low = (omega * wf_low).exp()
    return new_bundle.vector_field(
        top * e_top, [m * e_low for m in new_mid], new_bot * e_low, w)


class ExcludedWeightError(ValueError):
    def __init__(self, dim, weight):
        super().__init__(f"excluded weight {weight} in dimension {dim}")
        self.dim = dim
        self.weight = weight


# --------------------------------------------------------------------------
# Scale data of a defining density and the degenerate first-order operator
# --------------------------------------------------------------------------


class ScaleTractor:
    """Data of sigma = [g; s]: the defining jet, its gradient, and rho."""

    def __init__(self, bundle: TractorBundle, s_jet: Jet):
        self.bundle = bundle
        self.frame = bundle.frame
        self.s_jet = s_jet

    @cached_property
    def grad_lower(self) -> Tensor:
        comps = [self.s_jet.derivative(a) for a in range(self.frame.dim)]
        return Tensor(np.asarray(comps, dtype=object), "l")

    @cached_property
    def grad_upper(self) -> Tensor:
        return self.grad_lower.raise_index(0, self.frame.ginv)

    @cached_property
    def lap_s(self) -> Jet:
        return self.frame.laplacian(Tensor.scalar(self.s_jet)).item()

    @cached_property
    def rho(self) -> Jet:
        d = self.frame.dim
        inv = 1.0 / d if self.bundle.backend == F64 else rational(1, d)
        return -(self.lap_s + self.frame.jay * self.s_jet.truncate(self.lap_s.degree)) * inv

    @cached_property
    def tractor(self) -> TracTensor:
        """Components (s, grad^a s, rho) at weight 0 (a hat_d of sigma)."""
        deg = self.rho.degree
        return self.bundle.vector_field(
            self.s_jet.truncate(deg),
            [self.grad_upper[a].truncate(deg) for a in range(self.frame.dim)],
            self.rho, 0)

    @cached_property
    def i_squared(self) -> Jet:
        """|grad s|^2 - (2s/d)(Lap s + J s) in the active scale."""
        d = self.frame.dim
        inv = 2.0 / d if self.bundle.backend == F64 else rational(2, d)
        norm2 = self.frame.ginv.dot(
            self.grad_lower.tensor_product(self.grad_lower), [(0, 0), (1, 1)]).item()
        return norm2 - (self.lap_s + self.frame.jay * self.s_jet.truncate(self.lap_s.degree)) \
            * self.s_jet.truncate(self.lap_s.degree) * inv

    def robin(self, T: TracTensor) -> TracTensor:
        """grad_n + w rho - (s/(d+2w-2))(Lap + wJ), weight drops by one."""
        d, w = self.frame.dim, T.weight
        hprime = d + 2 * w - 2
        if hprime == 0:
            raise ExcludedWeightError(d, w)
        bundle = self.bundle
        grad = bundle.grad(T)
        lap = bundle.laplacian(T)
        nt = T.n_trac
        acc = None
        for a in range(d):
            block = grad.comps[(slice(None),) * nt + (a,)]
            term = _mul_block(block, self.grad_upper[a])
            acc = term if acc is None else acc + term
        wf = bundle._wfactor(w)
        hf = bundle._wfactor(Fraction(1, 1) / hprime)
        rho_term = bundle.scale_comps(T.comps, self.rho * wf)
        jayw = self.frame.jay * wf
        inner = lap.comps + bundle.scale_comps(T.comps, jayw)
        deg = min(_min_degree(inner), _min_degree(acc))
        s_scaled = self.s_jet.truncate(deg) * hf
        sigma_term = bundle.scale_comps(inner, s_scaled)
        comps = np.asarray(acc, dtype=object) + rho_term - sigma_term
        return TracTensor(bundle, comps, nt, T.variance, w - 1)

    def robin_log(self, ell: LogDensity) -> TracTensor:
        """First-order operator on a log density.

        A log density is the limit of (2/e) * (density of weight e*w/2) as
        e -> 0, so its weight label only enters the coefficient structure;
        the output is an ordinary density of weight -1.
        """
        d, w = self.frame.dim, ell.weight
        bundle = self.bundle
        fr = self.frame
        grad_ell = fr.gradient_scalar(ell.jet)
        lap_ell = fr.laplacian(Tensor.scalar(ell.jet)).item()
        wf = bundle._wfactor(w)
        dn = self.grad_upper.dot(grad_ell, [(0, 0)]).item()
        inv = bundle._wfactor(Fraction(1, d - 2))
        inner = lap_ell + fr.jay * wf
        out = dn + self.rho * wf - self.s_jet.truncate(inner.degree) * inner * inv
        return bundle.scalar_field(out, -1)


def robin_power(scale: ScaleTractor, T: TracTensor, k: int) -> TracTensor:
    out = T
    for _ in range(k):
        out = scale.robin(out)
    return out


# --------------------------------------------------------------------------
# Hypersurface tractors
# --------------------------------------------------------------------------


class SurfaceTractors:
    """Tractor structures attached to an embedded hypersurface.

    Bridges the ambient bundle (fields of ambient-chart jets) and the
    intrinsic bundle over the surface chart: restriction of ambient fields,
    the normal tractor, the splitting of a restricted ambient tractor into
    normal and surface parts, and the trace-free-tensor insertion map used
    for the tractor second fundamental form.
    """

    def __init__(self, surf):
        self.surf = surf
        self.intrinsic_bundle = TractorBundle(surf.intrinsic)
        self.backend = surf.backend

    # -- restriction -------------------------------------------------------

    def pull_parts(self, T: TracTensor):
        """Surface-chart jets (top, mid ambient components, bot) of a
        single-slot ambient tractor field."""
        if (T.n_trac, T.variance) != (1, ""):
            raise ValueError("needs a single-slot ambient tractor field")
        surf = self.surf
        d = surf.d
        top = surf.pull_scalar(T.comps[0])
        mid = [surf.pull_scalar(T.comps[1 + a]) for a in range(d)]
        bot = surf.pull_scalar(T.comps[d + 1])
        return top, mid, bot

    def decompose(self, T: TracTensor):
        """Split a restricted ambient tractor against the normal tractor.

        Returns ``(a_n, top, tangent, bottom)``: the normal-tractor
        coefficient, and the top / tangential / bottom parts of the
        remainder as surface data (tangent part carries a lower chart index).
        """
        surf = self.surf
        top, mid, bot = self.pull_parts(T)
        H = surf.mean_curvature
        deg = min([top.degree, bot.degree, H.degree] + [m.degree for m in mid])
        # lowered ambient mid components, restricted to the chart
        mid_amb = Tensor(np.asarray(mid, dtype=object), "u")
        glow = _pulled_metric(surf)
        mid_low = glow.dot(mid_amb, [(1, 0)])  # lower index via pulled g
        nu = [surf.pull_scalar(surf.nu_upper[a]) for a in range(surf.d)]
        a_n = None
        for a in range(surf.d):
            term = mid_low[a] * nu[a].truncate(deg)
            a_n = term if a_n is None else a_n + term
        a_n = a_n - H * top
        # tangential chart components of the mid slot
        tang_comps = np.empty((surf.n,), dtype=object)
        for i in range(surf.n):
            acc = None
            for a in range(surf.d):
                term = mid_low[a] * surf.dphi[i][a]
                acc = term if acc is None else acc + term
            tang_comps[i] = acc
        tangent = Tensor(tang_comps, "l")
        half = 0.5 if self.backend == F64 else rational(1, 2)
        bottom = bot + a_n * H + H * H * top * half
        return a_n, top, tangent, bottom

    # -- canonical surface tractors ---------------------------------------

    @cached_property
    def normal_tractor_parts(self):
        """(0, unit conormal, -H) as surface-chart data."""
        surf = self.surf
        nu = [surf.pull_scalar(surf.nu_upper[a]) for a in range(surf.d)]
        zero = surf.mean_curvature * 0
        return zero, nu, -surf.mean_curvature

    def q_insert(self, t: Tensor, weight) -> TracTensor:
        """Insertion of a trace-free symmetric chart 2-tensor (both lower)
        into a rank-2 surface tractor of the given weight."""
        surf = self.surf
        bundle = self.intrinsic_bundle
        n, ext = surf.n, bundle.ext
        d = surf.d
        w = _frac(weight)
        den1 = d + w - 1
        den2 = (d + w - 1) * (d + w - 2)
        gbar_inv = surf.gbar_inv
        t_up = t.raise_index(0, gbar_inv).raise_index(1, gbar_inv)
        div_up = surf.div1(t_up.lower_index(0, surf.gbar))  # nabla^b t_b^a -> [a]
        divdiv = surf.div1(surf.div1(t)).item()
        pbar_t = surf.intrinsic.schouten.raise_index(0, gbar_inv) \
            .raise_index(1, gbar_inv).dot(t, [(0, 0), (1, 1)]).item()
        inv1 = bundle._wfactor(Fraction(-1, 1) / den1)
        inv2 = bundle._wfactor(Fraction(1, 1) / den2)
        dfac = bundle._wfactor(Fraction(den1))
        zero = surf.mean_curvature * 0
        comps = np.empty((ext, ext), dtype=object)
        comps.fill(zero)
        for a in range(n):
            for b in range(n):
                comps[1 + a, 1 + b] = t_up[a, b]
        for a in range(n):
            edge = div_up[a] * inv1
            comps[1 + a, ext - 1] = edge
            comps[ext - 1, 1 + a] = edge
        comps[ext - 1, ext - 1] = (divdiv + pbar_t * dfac) * inv2
        return TracTensor(bundle, comps, 2, "", w)

    @cached_property
    def second_form_tractor(self) -> TracTensor:
        """Rank-2 weight -1 surface tractor built from the trace-free
        second fundamental form."""
        return self.q_insert(self.surf.trace_free_second_form, -1)

    def box_y(self, T: TracTensor) -> TracTensor:
        """Fourth... second-order Yamabe-type operator on weight -1 surface
        fields: coupled Laplacian minus the intrinsic J."""
        if T.weight != -1:
            raise ValueError("box_y acts on weight -1 fields")
        bundle = self.intrinsic_bundle
        lap = bundle.laplacian(T)
        jterm = bundle.scale_comps(T.comps, self.surf.intrinsic.jay)
        return TracTensor(bundle, lap.comps - jterm, T.n_trac, T.variance, T.weight)

    def pair_rank2(self, A: TracTensor, B: TracTensor) -> Jet:
        """Full pairing h_AC h_BD A^{AB} B^{CD}."""
        bundle = self.intrinsic_bundle
        alow = bundle.lower_first(A)
        alow = np.swapaxes(alow, 0, 1)
        alow = bundle.lower_first(TracTensor(bundle, alow, 2, "", A.weight))
        alow = np.swapaxes(alow, 0, 1)
        acc = None
        ext = bundle.ext
        for i in range(ext):
            for j in range(ext):
                term = alow[i, j] * B.comps[i, j]
                acc = term if acc is None else acc + term
        return acc


def _pulled_metric(surf) -> Tensor:
    comps = np.empty((surf.d, surf.d), dtype=object)
    for a in range(surf.d):
        for b in range(surf.d):
            comps[a, b] = surf.pull_scalar(surf.metric.g[a, b])
    return Tensor(comps, "ll")


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _mul_block(block, jet):
    if jet is None:
        return block
    if isinstance(block, np.ndarray):
        out = np.empty(block.shape, dtype=object)
        src, dst = block.reshape(-1), out.reshape(-1)
        for i, c in enumerate(src):
            dst[i] = c * jet
        return out
    return block * jet


def _zero_block(block, frame):
    zero_jet = frame.g[0, 0] * 0
    if isinstance(block, np.ndarray):
        out = np.empty(block.shape, dtype=object)
        out.fill(zero_jet)
        return out
    return zero_jet


def _min_degree(comps):
    arr = np.asarray(comps, dtype=object)
    return min(c.degree for c in arr.reshape(-1))


def _lc_derivative(frame: CurvatureFrame, T: TracTensor) -> np.ndarray:
    """LC covariant derivative of the tensor slots, tractor slots untouched;
    derivative axis inserted at position n_trac."""
    d = frame.dim
    nt, var = T.n_trac, T.variance
    comps = T.comps
    # raw partials along a new leading axis
    out = np.empty((d,) + comps.shape, dtype=object)
    flat_src = comps.reshape(-1)
    for c in range(d):
        dst = out[c:c + 1].reshape(-1)
        for i, jet in enumerate(flat_src):
            dst[i] = jet.derivative(c)
    gamma = frame.gamma
    for k, v in enumerate(var):
        slot = 1 + nt + k  # position in `out`
        corr = np.zeros((d,) + comps.shape, dtype=object)
        moved = np.moveaxis(comps, nt + k, 0)
        for c in range(d):
            for i in range(d):
                acc = None
                for e in range(d):
                    jet = gamma[i, c, e] if v == "u" else gamma[e, c, i]
                    term = _mul_block(moved[e], jet)
                    acc = term if acc is None else acc + term
                target = np.moveaxis(corr[c], nt + k, 0)
                target[i] = acc if v == "u" else acc
                corr[c] = np.moveaxis(target, 0, nt + k)
        if v == "u":
            out = out + corr
        else:
            out = out - corr
    # move derivative axis from 0 to position nt
    return np.moveaxis(out, 0, nt)

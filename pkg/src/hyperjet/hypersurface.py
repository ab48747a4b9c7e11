"""Extrinsic and intrinsic geometry of an embedded hypersurface at a point.

A hypersurface is described twice over — implicitly by a defining function
``s`` (zero on the surface, gradient nonzero) and explicitly by a local
parametrization ``phi`` of the surface chart — and the two descriptions are
cross-checked (``s(phi(u)) = 0`` as a jet).  The defining function feeds the
ambient normal data; the parametrization feeds the induced metric and the
intrinsic curvature.

The orientation convention is that the unit conormal points toward the
region where ``s > 0``; scenario files flip orientation by negating ``s``.

All surface quantities are carried as jets on the surface chart (variables
``u``), so repeated tangential derivatives are just intrinsic covariant
derivatives in that chart.
"""

from __future__ import annotations

from functools import cached_property
from typing import List, Sequence

import numpy as np

from .jets import Jet, JetComposer
from .riemann import CurvatureFrame, MetricJet, partial
from .tensors import Tensor


class EmbeddedSurface:
    """Geometry of Σ = {s = 0} at the point phi(0), over jets.

    Parameters
    ----------
    metric:
        Ambient metric jets at the base point p = phi(0).
    s_jet:
        Jet of the defining function at p (orientation already applied).
    phi_disp:
        Displacement jets of the parametrization: phi^a(u) - p^a as jets in
        the (d-1) surface-chart variables, each with zero constant term.
    """

    def __init__(self, metric: MetricJet, s_jet: Jet, phi_disp: Sequence[Jet], check: bool = True):
        self.metric = metric
        self.ambient = CurvatureFrame(metric)
        self.d = metric.dim
        self.n = self.d - 1
        self.backend = metric.backend
        self.s_jet = s_jet
        self.phi_disp = list(phi_disp)
        # Fields constant along trailing ambient coordinates may live in a
        # reduced chart of the first m coordinates; the parametrization then
        # has m displacement components and the remaining ambient directions
        # are identity-mapped to the trailing surface coordinates.
        self.m = s_jet.dim
        if self.m > self.d:
            raise ValueError("defining jet has more variables than the chart")
        if len(self.phi_disp) not in (self.d, self.m):
            raise ValueError("parametrization needs one component per ambient variable")
        self.composer = JetComposer(self.phi_disp[:self.m])
        if check:
            residual = self.composer.compose(s_jet).max_abs()
            tol = 0.0 if self.backend == "rational" else 1e-9
            if residual > tol:
                raise ValueError(
                    f"defining function and parametrization disagree: |s∘phi| = {residual}"
                )

    # -- ambient normal data ----------------------------------------------

    @cached_property
    def grad_s(self) -> Tensor:
        comps = [self.s_jet.derivative(a) for a in range(self.d)]
        return Tensor(np.asarray(comps, dtype=object), "l")

    @cached_property
    def grad_s_norm2(self) -> Jet:
        return self.ambient.ginv.dot(self.grad_s.tensor_product(self.grad_s),
                                     [(0, 0), (1, 1)]).item()

    @cached_property
    def nu_lower(self) -> Tensor:
        """Unit conormal (ambient jets, lower index), pointing toward s > 0."""
        inv_norm = self.grad_s_norm2.sqrt().reciprocal()
        return self.grad_s.scale(inv_norm)

    @cached_property
    def nu_upper(self) -> Tensor:
        return self.nu_lower.raise_index(0, self.ambient.ginv)

    @cached_property
    def dnu(self) -> Tensor:
        """Ambient covariant derivative of the unit conormal: (∇ν)[a, b] = ∇_a ν_b."""
        return self.ambient.covariant_derivative(self.nu_lower)

    # -- pullback machinery -----------------------------------------------

    @cached_property
    def dphi(self) -> List[List[Jet]]:
        """Jacobian ∂phi^a/∂u^i as surface-chart jets; dphi[i][a]."""
        template = self.phi_disp[0]
        one = Jet.constant(1, template.dim, max(template.degree - 1, 0), template.backend)
        zero = one * 0

        def entry(i, a):
            if a < len(self.phi_disp):
                return self.phi_disp[a].derivative(i)
            # trailing identity block of a reduced-chart parametrization
            return one if i == a - 1 else zero

        return [[entry(i, a) for a in range(self.d)] for i in range(self.n)]

    def pull_scalar(self, ambient_jet: Jet) -> Jet:
        """Restrict an ambient scalar jet (at p) to the surface chart."""
        return self.composer.compose(ambient_jet)

    def project(self, T: Tensor, pattern: str) -> Tensor:
        """Project an all-lower ambient tensor to the surface chart.

        ``pattern`` has one letter per slot: ``'t'`` pulls the slot back
        tangentially (contract with dphi), ``'n'`` contracts it with the unit
        conormal.  Normal contractions happen in ambient jets before the
        restriction; tangential slots are contracted after.
        """
        if len(pattern) != T.rank or T.variance != "l" * T.rank:
            raise ValueError("project expects an all-lower tensor and a matching pattern")
        # contract normal slots first (ambient arithmetic)
        for slot in range(T.rank - 1, -1, -1):
            if pattern[slot] == "n":
                T = self.nu_upper.dot(T, [(0, slot)])
        # restrict remaining components to the chart
        if T.rank == 0:
            return Tensor.scalar(self.pull_scalar(T.item()))
        comps = np.empty(T.comps.shape, dtype=object)
        flat_src = T.comps.reshape(-1)
        flat_dst = comps.reshape(-1)
        for i, jet in enumerate(flat_src):
            flat_dst[i] = self.pull_scalar(jet)
        # contract each ambient slot with the Jacobian
        current = comps
        for _ in range(T.rank):
            # contract the first remaining ambient axis
            new_shape = (self.n,) + current.shape[1:]
            nxt = np.empty(new_shape, dtype=object)
            for i in range(self.n):
                acc = None
                for a in range(self.d):
                    term_src = current[a]
                    if isinstance(term_src, np.ndarray):
                        term = np.empty(term_src.shape, dtype=object)
                        tflat_src = term_src.reshape(-1)
                        tflat = term.reshape(-1)
                        for k, jet in enumerate(tflat_src):
                            tflat[k] = jet * self.dphi[i][a]
                    else:
                        term = term_src * self.dphi[i][a]
                    acc = term if acc is None else acc + term
                nxt[i] = acc
            # rotate so the freshly contracted surface axis goes last
            current = np.moveaxis(nxt, 0, len(new_shape) - 1) if len(new_shape) > 1 else nxt
        # axes came out reversed-rotated; restore original slot order
        out = np.asarray(current, dtype=object)
        return Tensor(out, "l" * T.rank)

    # -- intrinsic frame ---------------------------------------------------

    @cached_property
    def induced_metric(self) -> MetricJet:
        return MetricJet(self.project(self.metric.g, "tt"))

    @cached_property
    def intrinsic(self) -> CurvatureFrame:
        return CurvatureFrame(self.induced_metric)

    @property
    def gbar(self) -> Tensor:
        return self.induced_metric.g

    @property
    def gbar_inv(self) -> Tensor:
        return self.induced_metric.ginv

    # -- extrinsic curvature ----------------------------------------------

    @cached_property
    def second_form(self) -> Tensor:
        """II_ij on the surface chart (both slots tangential)."""
        return self.project(self.dnu, "tt").symmetrize([0, 1])

    @cached_property
    def mean_curvature(self) -> Jet:
        tr = self.gbar_inv.dot(self.second_form, [(0, 0), (1, 1)]).item()
        return tr * _inv(self.n, self.backend)

    @cached_property
    def trace_free_second_form(self) -> Tensor:
        return self.second_form - self.gbar.scale(self.mean_curvature)

    @cached_property
    def rigidity(self) -> Jet:
        """K, the squared norm of the trace-free second fundamental form."""
        ii = self.trace_free_second_form
        return self.full_contract(ii, ii)

    @cached_property
    def schouten_tt(self) -> Tensor:
        return self.project(self.ambient.schouten, "tt")

    @cached_property
    def schouten_nn(self) -> Jet:
        return self.project(self.ambient.schouten, "nn").item()

    @cached_property
    def fialkow(self) -> Tensor:
        """F = P^T - Pbar + H II0 + (1/2) gbar H^2 (needs d >= 4)."""
        if self.d < 4:
            raise ValueError("Fialkow tensor requires ambient dimension >= 4")
        H = self.mean_curvature
        return (self.schouten_tt - self.intrinsic.schouten
                + self.trace_free_second_form.scale(H)
                + self.gbar.scale(H * H * _inv(2, self.backend)))

    @cached_property
    def fialkow_tf(self) -> Tensor:
        return self.trace_free(self.fialkow)

    @cached_property
    def third_form(self) -> Tensor:
        """Trace-free third fundamental form, proportional to the Fialkow tensor."""
        return self.fialkow_tf.scale_rational(-(self.d - 3), 1)

    @cached_property
    def fourth_form(self) -> Tensor:
        """Trace-free fourth fundamental form (needs d >= 6)."""
        if self.d < 6:
            raise ValueError("fourth fundamental form requires ambient dimension >= 6")
        d = self.d
        ii = self.trace_free_second_form
        H = self.mean_curvature
        iii = self.third_form
        cn = self.cotton_n.symmetrize([0, 1])
        wnn = self.weyl_nttn
        divw = self.div_weyl_ttn  # ∇̄^c W^T_{c(ab)n̂}, symmetrized
        # W_{c n̂ n̂ (a} II^c_{b)o}
        wcnn = self.project(self.ambient.weyl, "tnnt")  # [c, a] = W_{c n̂ n̂ a}
        ii_up = ii.raise_index(0, self.gbar_inv)  # II^c_b
        mix = wcnn.dot(ii_up, [(0, 0)])  # [a, b] = W_{c n̂ n̂ a} II^c_b
        mix = self.trace_free(mix.symmetrize([0, 1]))
        # W̄^c_{ab}^d II_cd
        wbar = self.intrinsic.weyl  # all lower
        wbar_ud = wbar.raise_index(0, self.gbar_inv).raise_index(3, self.gbar_inv)
        wii = wbar_ud.dot(ii, [(0, 0), (3, 1)])  # [a, b]
        # III_(a · II_b)o : III_a^c II_cb symmetrized trace-free
        iii_up = iii.raise_index(1, self.gbar_inv)
        iiii = iii_up.dot(ii, [(1, 0)])
        iiii = self.trace_free(iiii.symmetrize([0, 1]))
        K = self.rigidity
        out = (cn.scale_rational(-(d - 4) * (d - 5), 1)
               + wnn.scale(H).scale_rational(-(d - 4) * (d - 5), 1)
               + divw.scale_rational(-(d - 4), 1)
               + mix.scale_rational(2, 1)
               + wii.scale_rational(d - 6, 1)
               + iiii.scale_rational(-(d * d - 7 * d + 18), d - 3)
               + ii.scale(K).scale_rational(d ** 3 - 10 * d * d + 25 * d - 10,
                                            (d - 1) * (d - 2)))
        return self.trace_free(out)

    # -- projected ambient tensors ----------------------------------------

    @cached_property
    def weyl_tttt(self) -> Tensor:
        return self.project(self.ambient.weyl, "tttt")

    @cached_property
    def weyl_tttn(self) -> Tensor:
        """W^T_{abc n̂} (last slot normal)."""
        return self.project(self.ambient.weyl, "tttn")

    @cached_property
    def weyl_nttn(self) -> Tensor:
        """W_{n̂ a b n̂} (first and last slots normal)."""
        return self.project(self.ambient.weyl, "nttn")

    @cached_property
    def cotton_n(self) -> Tensor:
        """C_{n̂ a b} (first slot normal, no symmetrization)."""
        return self.project(self.ambient.cotton, "ntt")

    @cached_property
    def bach_tt(self) -> Tensor:
        return self.project(self.ambient.bach, "tt")

    @cached_property
    def bach_nt(self) -> Tensor:
        """B_{n̂ a}."""
        return self.project(self.ambient.bach, "nt")

    @cached_property
    def div_weyl_ttn(self) -> Tensor:
        """∇̄^c W^T_{c(ab)n̂}: intrinsic divergence of the projected W_{·abn̂}."""
        w = self.weyl_tttn  # [c, a, b]
        dw = self.intrinsic.covariant_derivative(w)  # [e, c, a, b]
        div = self.gbar_inv.dot(dw, [(0, 0), (1, 1)])  # [a, b]
        return div.symmetrize([0, 1])

    # -- helpers -----------------------------------------------------------

    def trace_free(self, T: Tensor) -> Tensor:
        """Remove the gbar-trace of a symmetric 2-tensor on the chart."""
        tr = self.gbar_inv.dot(T, [(0, 0), (1, 1)]).item()
        return T - self.gbar.scale(tr * _inv(self.n, self.backend))

    def full_contract(self, A: Tensor, B: Tensor) -> Jet:
        """Complete gbar-contraction of two all-lower chart tensors of equal rank."""
        if A.rank != B.rank:
            raise ValueError("rank mismatch")
        up = A
        for slot in range(A.rank):
            up = up.raise_index(slot, self.gbar_inv)
        return up.dot(B, [(k, k) for k in range(A.rank)]).item()

    def surface_trace(self, T: Tensor, i: int, j: int) -> Tensor:
        return self.gbar_inv.dot(T, [(0, i), (1, j)])

    def nabla_bar(self, T: Tensor) -> Tensor:
        return self.intrinsic.covariant_derivative(T)

    def lap_bar(self, T: Tensor) -> Tensor:
        return self.intrinsic.laplacian(T)

    def div1(self, T: Tensor) -> Tensor:
        """Divergence on the first slot: (∇̄·T)_{...} = ∇̄^a T_{a...}."""
        dT = self.nabla_bar(T)
        return self.gbar_inv.dot(dT, [(0, 0), (1, 1)])

    def theorema_egregium_residual(self) -> Jet:
        """K/(2(d-2)) - (J - P_nn - Jbar + (d-1)H^2/2), as a chart jet."""
        half = _inv(2, self.backend)
        lhs = self.rigidity * _inv(2 * (self.d - 2), self.backend)
        jbar = self.intrinsic.jay
        jamb = self.pull_scalar(self.ambient.jay)
        pnn = self.schouten_nn
        H = self.mean_curvature
        rhs = jamb - pnn - jbar + H * H * half * (self.d - 1)
        return lhs - rhs


def _inv(k: int, backend: str):
    if backend == "f64":
        return 1.0 / k
    from .backend import rational

    return rational(1, k)

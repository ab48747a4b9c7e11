"""Ambient Riemannian curvature from metric component jets.

Conventions (used consistently across the package):

* curvature operator ``[nabla_a, nabla_b] v^c = R_ab^c_d v^d``;
  the all-lower Riemann tensor lowers the third slot.
* ``Ric_bd = R_ab^a_d``; ``J = Sc / (2(d-1))``;
  Schouten ``P = (Ric - J g) / (d-2)``.
* Weyl via ``R_abcd = W_abcd + g_ca P_bd - g_cb P_ad - g_da P_bc + g_db P_ac``.
* Cotton ``C_abc = nabla_a P_bc - nabla_b P_ac``.
* Bach ``B_ab = Lap P_ab - nabla^c nabla_b P_ca + P^cd W_adbc`` — exactly this
  expression, with no extra symmetrization.

Covariant derivatives prepend the derivative index (lowest slot first), so
``(nabla T)[c, ...] = nabla_c T[...]``.  Every derivative consumes one jet
degree; running out raises ``DegreeExhaustedError``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from .backend import F64, rational
from .jets import Jet
from .tensors import Tensor


class MetricJet:
    """Symmetric metric component jets with derived inverse-metric jets."""

    def __init__(self, g: Tensor):
        if g.variance != "ll":
            raise ValueError("metric must have two lower indices")
        self.dim = g.dim
        self.g = g
        self.backend = g[0, 0].backend
        self.degree = g.degree
        self._check_symmetric()
        self._check_positive_definite()
        self.ginv = self._invert()

    def _check_symmetric(self):
        # exact on the rational backend; float tolerance absorbs projection roundoff
        tol = 0.0 if self.backend != F64 else 1e-9
        fix = False
        for a in range(self.dim):
            for b in range(a):
                diff = (self.g[a, b] - self.g[b, a]).max_abs()
                if diff > tol:
                    raise ValueError(f"metric not symmetric: g[{a},{b}] != g[{b},{a}]")
                if diff > 0:
                    fix = True
        if fix:
            self.g = self.g.symmetrize([0, 1])

    def _g0(self) -> np.ndarray:
        return self.g.value_array()

    def _check_positive_definite(self):
        g0 = self._g0()
        for k in range(1, self.dim + 1):
            if np.linalg.det(g0[:k, :k]) <= 0:
                raise ValueError("metric constant term is not positive-definite")

    def _invert(self) -> Tensor:
        """Neumann-series inverse about the constant term."""
        d, deg, backend = self.dim, self.degree, self.backend
        if backend == F64:
            g0inv = np.linalg.inv(self._g0())
            g0inv_s = [[float(g0inv[a, b]) for b in range(d)] for a in range(d)]
        else:
            g0 = [[Fraction(int((self.g[a, b].value).numerator), int((self.g[a, b].value).denominator))
                   for b in range(d)] for a in range(d)]
            g0inv_f = _exact_inverse(g0)
            g0inv_s = [[rational(x.numerator, x.denominator) for x in row] for row in g0inv_f]

        def matmul(A, B):
            return [[sum((A[a][e] * B[e][b] for e in range(1, d)), A[a][0] * B[0][b])
                     for b in range(d)] for a in range(d)]

        # E = g0inv * g - I has zero constant term, so the series terminates.
        E = [[sum((self.g[e, b] * g0inv_s[a][e] for e in range(1, d)),
                  self.g[0, b] * g0inv_s[a][0]) for b in range(d)] for a in range(d)]
        one = Jet.constant(1, self.g[0, 0].dim, deg, backend)
        for a in range(d):
            E[a][a] = E[a][a] - one
        X = [[one * (1 if a == b else 0) for b in range(d)] for a in range(d)]
        term = X
        for _ in range(deg):
            term = matmul(term, E)
            term = [[-t for t in row] for row in term]
            X = [[X[a][b] + term[a][b] for b in range(d)] for a in range(d)]
            if max(t.max_abs() for row in term for t in row) == 0:
                break
        comps = np.empty((d, d), dtype=object)
        for a in range(d):
            for b in range(d):
                comps[a, b] = sum((X[a][e] * g0inv_s[e][b] for e in range(1, d)),
                                  X[a][0] * g0inv_s[0][b])
        return Tensor(comps, "uu")

    def template(self) -> Jet:
        return self.g[0, 0] * 0


def _exact_inverse(matrix):
    """Exact inverse of a Fraction matrix by Gauss-Jordan elimination."""
    n = len(matrix)
    aug = [[Fraction(matrix[i][j]) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def partial(T: Tensor, dim: Optional[int] = None) -> Tensor:
    """Coordinate partials, prepended as a new lower index.

    ``dim`` is the number of chart directions to differentiate along; it
    defaults to the chart dimension of the component jets, but callers with
    fields constant along trailing coordinates (jets in a reduced chart)
    must pass the full tensor dimension so the zero partials are included.
    """
    dim_chart = T.comps.reshape(-1)[0].dim if dim is None else dim
    comps = np.empty((dim_chart,) + T.comps.shape, dtype=object)
    flat_src = T.comps.reshape(-1)
    for c in range(dim_chart):
        flat_dst = comps[c:c + 1].reshape(-1)
        for i, jet in enumerate(flat_src):
            flat_dst[i] = jet.derivative(c)
    return Tensor(comps, "l" + T.variance)


class CurvatureFrame:
    """All ambient curvature tensors of a metric, computed lazily as jets."""

    def __init__(self, metric: MetricJet):
        self.metric = metric
        self.dim = metric.dim
        self.backend = metric.backend

    @property
    def g(self) -> Tensor:
        return self.metric.g

    @property
    def ginv(self) -> Tensor:
        return self.metric.ginv

    @cached_property
    def gamma(self) -> Tensor:
        """Christoffel symbols Γ^a_bc."""
        dg = partial(self.g, self.dim)  # dg[c, a, b] = ∂_c g_ab
        # ∂_b g_dc + ∂_c g_bd − ∂_d g_bc, then contract with ½ g^{ad}
        sym = Tensor(
            np.asarray(
                dg.transpose([1, 0, 2]).comps + dg.transpose([2, 1, 0]).comps
                - dg.transpose([0, 1, 2]).comps,
                dtype=object,
            ),
            "lll",
        )  # sym[d, b, c]
        out = self.ginv.dot(sym, [(1, 0)])  # -> [a, b, c]
        return out.scale_rational(1, 2)

    def covariant_derivative(self, T: Tensor) -> Tensor:
        """∇_c T, derivative index prepended (lower)."""
        out = partial(T, self.dim)
        gamma = self.gamma
        for slot, v in enumerate(T.variance):
            if v == "u":
                # + Γ^{i}_{c e} T[... e ...]
                corr = gamma.dot(T, [(2, slot)])  # [i, c, rest...]
                corr = _move_slot(corr, 0, slot + 1)  # -> [c, ..., i at slot+1, ...]
                out = out + corr
            else:
                # − Γ^{e}_{c i} T[... e ...]
                corr = gamma.dot(T, [(0, slot)])  # [c, i, rest...]
                corr = _move_slot(corr, 1, slot + 1)
                out = out - corr
        return out

    def laplacian(self, T: Tensor) -> Tensor:
        DD = self.covariant_derivative(self.covariant_derivative(T))
        return self.ginv.dot(DD, [(0, 0), (1, 1)])

    def gradient_scalar(self, f: Jet) -> Tensor:
        comps = [f.derivative(a) for a in range(self.dim)]
        return Tensor(np.asarray(comps, dtype=object), "l")

    @cached_property
    def riemann_updown(self) -> Tensor:
        """R_ab^c_d with index order (a, b, c, d)."""
        gamma = self.gamma
        dgamma = partial(gamma, self.dim)  # [e, c, b, d] = ∂_e Γ^c_bd
        t1 = dgamma.transpose([0, 2, 1, 3])  # [a, b, c, d] = ∂_a Γ^c_bd
        t2 = t1.transpose([1, 0, 2, 3])  # ∂_b Γ^c_ad
        gg = gamma.dot(gamma, [(2, 0)])  # [c, a, b, d] = Γ^c_ae Γ^e_bd
        t3 = gg.transpose([1, 2, 0, 3])  # [a, b, c, d]
        t4 = t3.transpose([1, 0, 2, 3])
        return t1 - t2 + t3 - t4

    @cached_property
    def riemann(self) -> Tensor:
        """All-lower R_abcd (third slot lowered)."""
        return self.riemann_updown.lower_index(2, self.g)

    @cached_property
    def ricci(self) -> Tensor:
        # direct trace of the curvature operator; avoids materializing the
        # full Riemann tensor when only Ricci and its descendants are needed
        gamma = self.gamma
        dgamma = partial(gamma, self.dim)  # [e, c, b, d] = ∂_e Γ^c_bd
        t1 = dgamma.contract(0, 1)  # ∂_a Γ^a_bd
        tr = gamma.contract(0, 1)  # Γ^a_ae
        t2 = partial(Tensor(tr.comps, "l"), self.dim)  # ∂_b Γ^a_ad
        t3 = tr.dot(gamma, [(0, 0)])  # Γ^a_ae Γ^e_bd
        t4 = gamma.dot(gamma, [(0, 1), (2, 0)])  # Γ^a_be Γ^e_ad
        return t1 - t2 + t3 - t4

    @cached_property
    def scalar_curvature(self) -> Jet:
        return self.ginv.dot(self.ricci, [(0, 0), (1, 1)]).item()

    @cached_property
    def jay(self) -> Jet:
        """J, the metric trace of the Schouten tensor."""
        den = 2 * (self.dim - 1)
        if self.backend == F64:
            return self.scalar_curvature * (1.0 / den)
        return self.scalar_curvature * rational(1, den)

    @cached_property
    def schouten(self) -> Tensor:
        term = self.ricci - self.g.scale(self.jay)
        return term.scale_rational(1, self.dim - 2)

    @cached_property
    def weyl(self) -> Tensor:
        g, P = self.g, self.schouten
        gP = g.tensor_product(P)  # [x, y, u, v] = g_xy P_uv
        # R_abcd − g_ca P_bd + g_cb P_ad + g_da P_bc − g_db P_ac
        t_ca_bd = gP.transpose([1, 2, 0, 3])  # [a,b,c,d] = g_ca P_bd
        t_cb_ad = gP.transpose([2, 1, 0, 3])  # g_cb P_ad
        t_da_bc = gP.transpose([1, 2, 3, 0])  # g_da P_bc
        t_db_ac = gP.transpose([2, 1, 3, 0])  # g_db P_ac
        return self.riemann - t_ca_bd + t_cb_ad + t_da_bc - t_db_ac

    @cached_property
    def cotton(self) -> Tensor:
        dP = self.covariant_derivative(self.schouten)  # [a, b, c] = ∇_a P_bc
        return dP - dP.transpose([1, 0, 2])

    @cached_property
    def bach(self) -> Tensor:
        P, W, ginv = self.schouten, self.weyl, self.ginv
        DDP = self.covariant_derivative(self.covariant_derivative(P))  # [c,d,a,b] = ∇_c∇_d P_ab
        lap = ginv.dot(DDP, [(0, 0), (1, 1)])  # ΔP_ab
        # ∇^c ∇_b P_ca = g^{cp} (∇∇P)[c, b, p, a], free (b, a) -> transpose
        mixed = ginv.dot(DDP, [(0, 0), (1, 2)])  # [b, a]
        mixed = mixed.transpose([1, 0])
        Pu = P.raise_index(0, ginv).raise_index(1, ginv)  # P^{cd}
        pw = W.dot(Pu, [(1, 1), (3, 0)])  # W_adbc P^{cd} -> [a, b]
        return lap - mixed + pw


def _move_slot(T: Tensor, src: int, dst: int) -> Tensor:
    order = list(range(T.rank))
    order.pop(src)
    order.insert(dst, src)
    return T.transpose(order)


def curvature_frame(metric: MetricJet) -> CurvatureFrame:
    return CurvatureFrame(metric)


def conformal_rescale(metric: MetricJet, omega: Jet) -> MetricJet:
    """Rescale by e^{2ω}: returns the metric jets of e^{2ω} g."""
    factor = (omega * 2).exp()
    return MetricJet(metric.g.scale(factor))

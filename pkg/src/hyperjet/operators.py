"""Closed-form curvature operators of conformal hypersurface embeddings.

Every operator here is an explicit Riemannian formula evaluated in the scale
supplied by the scenario; the independent holographic route (iterated
Laplace--Robin operators built on a solved unit defining density, see
:mod:`hyperjet.yamabe`) provides the cross-check in the test suite.  The
formulas are transcribed term by term, so a mismatch localizes to a single
named term.

Conventions: all chart tensors are all-lower-index; ``·`` contractions are
full ``gbar``-contractions in matching slot order; ``(ab)∘`` means the
trace-free symmetric part of a 2-tensor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional

from .jets import Jet
from .riemann import CurvatureFrame
from .tensors import Tensor


def _frac(backend: str, num: int, den: int = 1):
    """Backend-matched scalar num/den."""
    if backend == "f64":
        return num / den
    from .backend import rational

    return rational(num, den)


def _scalar_lap(frame: CurvatureFrame, f: Jet) -> Jet:
    return frame.laplacian(Tensor.scalar(f)).item()


def _div_vec(frame: CurvatureFrame, V: Tensor) -> Jet:
    """∇^a V_a for a rank-1 lower tensor."""
    dV = frame.covariant_derivative(V)
    return frame.ginv.dot(dV, [(0, 0), (1, 1)]).item()


def _second_order_term(frame: CurvatureFrame, M: Tensor, f: Jet) -> Jet:
    """∇^a (M_ab ∇^b f) for a symmetric all-lower 2-tensor M."""
    df_up = frame.gradient_scalar(f).raise_index(0, frame.ginv)
    V = M.dot(df_up, [(1, 0)])
    return _div_vec(frame, V)


def intrinsic_paneitz(frame: CurvatureFrame, f: Jet) -> Jet:
    """Fourth-order conformally covariant squared-Laplacian operator.

    Acts on densities of weight (4-n)/2 over an n-dimensional frame:
    ``Δ²f + ∇_a(4P^{ab} - (n-2)J g^{ab})∇_b f + ((n-4)/2) Q_n f``.
    """
    n = frame.dim
    c = lambda num, den=1: _frac(frame.backend, num, den)
    lap2 = _scalar_lap(frame, _scalar_lap(frame, f))
    M = frame.schouten * c(4) - frame.g.scale(frame.jay * c(n - 2))
    mid = _second_order_term(frame, M, f)
    q = q_curvature_scalar(frame)
    return lap2 + mid + (q * f.truncate(q.degree)) * c(n - 4, 2)


def q_curvature_scalar(frame: CurvatureFrame) -> Jet:
    """Q_n = -ΔJ - 2P² + (n/2)J² for an n-dimensional frame."""
    n = frame.dim
    c = lambda num, den=1: _frac(frame.backend, num, den)
    lap_j = _scalar_lap(frame, frame.jay)
    p_up = frame.schouten.raise_index(0, frame.ginv).raise_index(1, frame.ginv)
    p2 = p_up.dot(frame.schouten, [(0, 0), (1, 1)]).item()
    jj = frame.jay * frame.jay.truncate(frame.jay.degree)
    return -lap_j - p2 * 2 + jj * c(n, 2)


# ---------------------------------------------------------------------------
# shared extrinsic building blocks
# ---------------------------------------------------------------------------


class SurfaceInvariants:
    """Caches the tensor invariants entering the extrinsic formulas."""

    def __init__(self, surf):
        self.surf = surf
        self.d = surf.d
        self.fr = surf.intrinsic
        self.ii = surf.trace_free_second_form
        self.ff = surf.fialkow_tf if surf.d >= 4 else None
        self.K = surf.rigidity
        self.H = surf.mean_curvature

    @property
    def pbar(self) -> Tensor:
        return self.fr.schouten

    @property
    def jbar(self) -> Jet:
        return self.fr.jay

    def c(self, num: int, den: int = 1):
        return _frac(self.surf.backend, num, den)

    # -- index helpers -----------------------------------------------------

    def up1(self, T: Tensor) -> Tensor:
        return T.raise_index(0, self.fr.ginv)

    def upall(self, T: Tensor) -> Tensor:
        out = T
        for k in range(T.rank):
            out = out.raise_index(k, self.fr.ginv)
        return out

    def dot2(self, A: Tensor, B: Tensor) -> Jet:
        """Full contraction A·B of equal-rank all-lower tensors."""
        return self.surf.full_contract(A, B)

    def mat(self, A: Tensor, B: Tensor) -> Tensor:
        """(A·B)_ab = A_a{}^c B_cb."""
        return A.dot(self.up1(B), [(1, 0)])

    def sandwich(self, A: Tensor, M: Tensor, B: Tensor) -> Jet:
        """A^{ab} M_b{}^c B_ca."""
        return self.dot2(A, self.mat(M, B))

    def tf_sym(self, T: Tensor) -> Tensor:
        return self.surf.trace_free(T.symmetrize([0, 1]))

    # -- derivative composites ---------------------------------------------

    def lap(self, T: Tensor) -> Tensor:
        return self.surf.lap_bar(T)

    def scalar_lap(self, f: Jet) -> Jet:
        return _scalar_lap(self.fr, f)

    def grad_scalar(self, f: Jet) -> Tensor:
        return self.fr.gradient_scalar(f)

    def hessian(self, f: Jet) -> Tensor:
        return self.fr.covariant_derivative(self.grad_scalar(f))

    def div(self, T: Tensor) -> Tensor:
        return self.surf.div1(T)

    def div_div(self, T: Tensor) -> Jet:
        """∇̄·∇̄·T for a symmetric 2-tensor."""
        return self.div(self.div(T)).item()

    def grad_vec_div(self, T: Tensor, v: Tensor) -> Jet:
        """∇̄^a (T_a{}^b v_b) for symmetric T and lower vector v."""
        V = T.dot(self.up1(v), [(1, 0)])
        return _div_vec(self.fr, V)

    # -- named invariants --------------------------------------------------

    def ii_lap_ii(self) -> Jet:
        """II̊ · Δ̄II̊."""
        return self.dot2(self.ii, self.lap(self.ii))

    def div_ii(self) -> Tensor:
        """(∇̄·II̊)_b."""
        return self.div(self.ii)

    def div_ii_sq(self) -> Jet:
        """|∇̄·II̊|²."""
        v = self.div_ii()
        return self.dot2(v, v)

    def div_ii_dot_div_ii_term(self) -> Jet:
        """∇̄^a (II̊_a · ∇̄·II̊)."""
        return self.grad_vec_div(self.ii, self.div_ii())

    def cotton_n_sym(self) -> Tensor:
        return self.surf.cotton_n.symmetrize([0, 1])

    def ii_cn(self) -> Jet:
        """II̊ · C_{n̂}^⊤."""
        return self.dot2(self.ii, self.cotton_n_sym())

    def ii_divw(self) -> Jet:
        """II̊^{ab} ∇̄^c W^⊤_{cabn̂}."""
        return self.dot2(self.ii, self.surf.div_weyl_ttn)

    def tr_ii3(self) -> Jet:
        """tr(II̊³)."""
        a = self.up1(self.ii)
        a3 = a.dot(a, [(1, 0)]).dot(a, [(1, 0)])
        return a3.contract(0, 1).item()

    def tr_ii4(self) -> Jet:
        """tr(II̊⁴)."""
        a = self.up1(self.ii)
        a4 = a.dot(a, [(1, 0)]).dot(a, [(1, 0)]).dot(a, [(1, 0)])
        return a4.contract(0, 1).item()

    def ii3_tensor(self) -> Tensor:
        """(II̊³)_ab."""
        return self.mat(self.mat(self.ii, self.ii), self.ii)

    def x_w_ii(self, X: Tensor) -> Jet:
        """X^{ad} II̊^{bc} W̄_{abcd} for a symmetric 2-tensor X."""
        bc = self.fr.weyl.dot(self.upall(X), [(0, 0), (3, 1)])
        return bc.dot(self.upall(self.ii), [(0, 0), (1, 1)]).item()

    def ii_w_ii(self) -> Jet:
        """II̊^{ad} II̊^{bc} W̄_{abcd}."""
        return self.x_w_ii(self.ii)

    def ii_ww(self) -> Jet:
        """II̊^{ab} W^⊤_{acdn̂} W_b{}^{cd⊤}{}_{n̂}."""
        w = self.surf.weyl_tttn  # [a, c, d]
        w_up = w.raise_index(1, self.fr.ginv).raise_index(2, self.fr.ginv)
        ab = w.dot(w_up, [(1, 1), (2, 2)])
        return self.dot2(self.ii, ab)

    def w_grad_ff(self) -> Jet:
        """W^⊤_{abcn̂} ∇̄^a F̊^{bc}."""
        dff = self.surf.nabla_bar(self.ff)  # [a, b, c]
        return self.dot2(self.surf.weyl_tttn, dff)

    def grad_dot_grad(self, A: Tensor, B: Tensor) -> Jet:
        """(∇̄A)·(∇̄B), full contraction."""
        return self.dot2(self.surf.nabla_bar(A), self.surf.nabla_bar(B))

    def w_insertion_term(self) -> Jet:
        """-F̊·C^⊤_{n̂} + W^⊤_{abcn̂}∇̄^a F̊^{bc} - H II̊²·F̊ + 2H F̊²."""
        ii2 = self.mat(self.ii, self.ii)
        return (-self.dot2(self.ff, self.cotton_n_sym())
                + self.w_grad_ff()
                - self.H * self.dot2(ii2, self.ff)
                + (self.H * self.dot2(self.ff, self.ff)) * 2)

    def l_map(self, X: Tensor) -> Jet:
        """L(X) = ∇̄·∇̄·X + P̄·X on trace-free symmetric 2-tensors."""
        return self.div_div(X) + self.dot2(self.pbar, X)


# ---------------------------------------------------------------------------
# extrinsic fourth-order operator on scalars
# ---------------------------------------------------------------------------


def q_ext_multiplier(surf) -> Jet:
    """Curvature multiplier of the extrinsic fourth-order scalar operator.

    Defined for ambient dimension d ≥ 5 (simple pole at d = 4)."""
    d = surf.d
    if d == 4:
        raise ValueError("the curvature multiplier has a pole at ambient dimension 4")
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii, ff, K, H = inv.ii, inv.ff, inv.K, inv.H
    jbar, pbar = inv.jbar, inv.pbar

    base = (-inv.scalar_lap(jbar)
            - inv.dot2(pbar, pbar) * 2
            + (jbar * jbar.truncate(jbar.degree)) * c(d - 1, 2)
            + inv.ii_lap_ii() * c(2, d - 1))

    brace = (
        inv.div_div(ff) * c(2 * (d - 2))
        + inv.scalar_lap(K) * c(3 * d * d - 9 * d + 4, 2 * (d - 1) * (d - 2))
        + inv.div_ii_dot_div_ii_term() * c(4)
        - inv.ii_cn() * c(2 * (d - 2))
        - inv.ii_divw() * c(6 * (d - 2), d - 1)
        - inv.dot2(ff, pbar) * c(2 * (d - 2) * (d - 5))
        - inv.sandwich(ii, pbar, ii) * c(4 * (d - 6))
        - (jbar * K.truncate(jbar.degree)) * c(d ** 3 + 2 * d * d - 27 * d + 44,
                                               2 * (d - 1) * (d - 2))
        + (H * inv.dot2(ii, ff)) * c(2 * (d - 2) * (d - 3))
        - (H * inv.tr_ii3()) * c(2 * (d - 2))
        + inv.ii_w_ii() * c(2 * (d + 2), d - 1)
        + inv.dot2(ff, ff) * c(2 * (d - 2) * (d - 2))
        + inv.sandwich(ii, ff, ii) * c(2 * (d - 2))
        + (K * K.truncate(K.degree)) * c(17 * d ** 3 - 86 * d * d + 133 * d - 52,
                                         8 * (d - 1) * (d - 2) * (d - 2))
    )
    return base + brace * c(1, d - 4)


def extrinsic_gradient_tensor(surf) -> Tensor:
    """Symmetric 2-tensor sandwiched between ∇̄^a and ∇̄^b in the extrinsic
    fourth-order scalar operator."""
    d = surf.d
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii2 = inv.mat(inv.ii, inv.ii)
    return (inv.pbar.scale(c(4))
            - surf.gbar.scale(inv.jbar * c(d - 3))
            + ii2.scale(c(8))
            + surf.gbar.scale(inv.K * c(d * d - 4 * d - 1, 2 * (d - 1) * (d - 2)))
            + inv.ff.scale(c(4 * (d - 2))))


def extrinsic_paneitz_scalar(surf, fbar: Jet) -> Jet:
    """Fourth-order extrinsic operator on surface scalars of weight (5-d)/2.

    ``Δ̄²f + ∇̄^a(M_ab ∇̄^b f) - ((5-d)/2) Q_ext f``.  Requires d ≥ 5.
    """
    d = surf.d
    if d < 5:
        raise ValueError("extrinsic fourth-order scalar operator needs ambient dimension >= 5")
    fr = surf.intrinsic
    c = lambda num, den=1: _frac(surf.backend, num, den)
    lap2 = _scalar_lap(fr, _scalar_lap(fr, fbar))
    mid = _second_order_term(fr, extrinsic_gradient_tensor(surf), fbar)
    q = q_ext_multiplier(surf)
    return lap2 + mid - (q * fbar.truncate(q.degree)) * c(5 - d, 2)


# ---------------------------------------------------------------------------
# fourth-order Q-curvature decomposition (d = 5)
# ---------------------------------------------------------------------------


@dataclass
class QDecomposition:
    """Extrinsically-coupled fourth-order Q-curvature split into its four
    named pieces (all weight -4 scalars on the surface chart)."""

    intrinsic_q: Jet
    willmore: Jet
    invariant: Jet
    exact: Jet

    @property
    def total(self) -> Jet:
        return self.intrinsic_q + self.willmore + self.invariant + self.exact


def willmore_piece(surf) -> Jet:
    """The conformally invariant weight -4 integrand whose integral has
    functional gradient with leading term a squared-Laplacian of the mean
    curvature (d = 5)."""
    if surf.d != 5:
        raise ValueError("willmore piece requires ambient dimension 5")
    inv = SurfaceInvariants(surf)
    c = inv.c
    return (inv.ii_lap_ii() * c(1, 2)
            + inv.div_ii_dot_div_ii_term() * c(4, 3)
            + inv.scalar_lap(inv.K) * c(3, 2)
            - inv.ii_cn() * c(6)
            + inv.sandwich(inv.ii, inv.pbar, inv.ii) * c(4)
            - (inv.jbar * inv.K) * c(7, 2)
            - (inv.H * inv.tr_ii3()) * c(6)
            + (inv.H * inv.dot2(inv.ii, inv.ff)) * c(12))


def invariant_piece(surf) -> Jet:
    """The second conformally invariant weight -4 piece of the Q-curvature
    decomposition (d = 5)."""
    if surf.d != 5:
        raise ValueError("invariant piece requires ambient dimension 5")
    inv = SurfaceInvariants(surf)
    c = inv.c
    return (inv.dot2(inv.ff, inv.ff) * c(18)
            + inv.sandwich(inv.ii, inv.ff, inv.ii) * c(6)
            + (inv.K * inv.K) * c(49, 24)
            - inv.ii_divw() * c(9, 2)
            + inv.ii_w_ii() * c(7, 2))


def exact_piece(surf) -> Jet:
    """The divergence-structure piece of the Q-curvature decomposition."""
    if surf.d != 5:
        raise ValueError("exact piece requires ambient dimension 5")
    inv = SurfaceInvariants(surf)
    c = inv.c
    return (inv.div_ii_dot_div_ii_term() * c(8, 3)
            + inv.div_div(inv.ff) * c(6)
            - inv.scalar_lap(inv.K) * c(1, 12))


def intrinsic_q4_surface(surf) -> Jet:
    """-Δ̄J̄ - 2P̄² + 2J̄² on the 4-dimensional surface frame."""
    inv = SurfaceInvariants(surf)
    return (-inv.scalar_lap(inv.jbar)
            - inv.dot2(inv.pbar, inv.pbar) * 2
            + (inv.jbar * inv.jbar) * 2)


def extrinsic_q4(surf) -> QDecomposition:
    """Fourth-order extrinsically-coupled Q-curvature, d = 5 only."""
    if surf.d != 5:
        raise ValueError("fourth-order Q-curvature decomposition requires d = 5")
    return QDecomposition(
        intrinsic_q=intrinsic_q4_surface(surf),
        willmore=willmore_piece(surf),
        invariant=invariant_piece(surf),
        exact=exact_piece(surf),
    )


# ---------------------------------------------------------------------------
# fourth-order operator on the normal tractor (d = 5)
# ---------------------------------------------------------------------------


@dataclass
class NormalOperatorParts:
    """Named components of the fourth-order operator applied to the normal
    tractor, resolved along the surface tractor splitting."""

    normal: Jet      # coefficient of the normal tractor
    top: Jet         # canonical-injector component (leading-derivative slot)
    tangent: Tensor  # tangential vector component
    bottom: Jet      # bottom-slot component


def paneitz_on_normal_explicit(surf) -> NormalOperatorParts:
    """Closed-form components of the fourth-order operator on the normal
    tractor (d = 5).

    The bottom slot has no closed form here; only its leading (highest
    derivative-count) term is pinned down, see
    :func:`normal_operator_bottom_leading`.  It is returned as zero."""
    if surf.d != 5:
        raise ValueError("normal-tractor fourth-order operator requires d = 5")
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii, ff, K = inv.ii, inv.ff, inv.K
    ii2 = inv.mat(ii, ii)
    wm = willmore_piece(surf)
    a_comp = (-wm * c(2, 3)
              - (K * K) * c(23, 6)
              - inv.ii_w_ii() * c(11, 3)
              + inv.ii_divw() * c(13, 3)
              - inv.dot2(ii2, ff) * c(4)
              - inv.dot2(ff, ff) * c(16))
    # tangential component: 8∇̄_a(II̊·F̊) + (10/3)II̊_a·∇̄K + (20/9)K(∇̄·II̊)_a
    iiff = inv.dot2(ii, ff)
    t1 = inv.grad_scalar(iiff).scale(c(8))
    gk_up = inv.up1(inv.grad_scalar(K))
    t2 = ii.dot(gk_up, [(1, 0)]).scale(c(10, 3))
    t3 = inv.div_ii().scale(K * c(20, 9))
    c_comp = t1 + t2 + t3
    d_comp = -iiff * c(24)
    return NormalOperatorParts(normal=a_comp, top=d_comp, tangent=c_comp,
                               bottom=a_comp * 0)


def normal_operator_bottom_leading(surf) -> Jet:
    """Leading term of the bottom-slot component of the fourth-order
    operator on the normal tractor: -(1/3) Δ̄ ∇̄·∇̄·II̊."""
    inv = SurfaceInvariants(surf)
    return inv.scalar_lap(inv.div_div(inv.ii)) * inv.c(-1, 3)


def paneitz_on_normal_holographic(impr):
    """Apply the 4-fold degenerate operator chain to the solved scale
    tractor (an extension of the normal tractor) and decompose the
    restriction along the surface splitting (d = 5)."""
    from .tractor import SurfaceTractors, robin_power

    surf = impr.surf
    if surf.d != 5:
        raise ValueError("normal-tractor fourth-order operator requires d = 5")
    T = robin_power(impr.scale, impr.scale.tractor, 4)
    st = SurfaceTractors(surf)
    a_n, top, tangent, bottom = st.decompose(T)
    return NormalOperatorParts(normal=a_n, top=top, tangent=tangent, bottom=bottom)


# ---------------------------------------------------------------------------
# canonical rigidity extension and its third iterated derivative (d = 5)
# ---------------------------------------------------------------------------


def _ambient_pair_rank2(bundle, A, B) -> Jet:
    """Full tractor-metric pairing of two rank-2 ambient tractor fields."""
    import numpy as np

    from .tractor import TracTensor

    alow = bundle.lower_first(A)
    alow = np.swapaxes(alow, 0, 1)
    alow = bundle.lower_first(TracTensor(bundle, alow, 2, "", A.weight))
    alow = np.swapaxes(alow, 0, 1)
    acc = None
    for i in range(bundle.ext):
        for j in range(bundle.ext):
            term = alow[i, j] * B.comps[i, j]
            acc = term if acc is None else acc + term
    return acc


def rigidity_extension(impr) -> Jet:
    """Canonical ambient weight -2 extension of the rigidity density: the
    squared second-order invariant derivative of the solved scale tractor."""
    bundle = impr.bundle
    di = bundle.hat_d(impr.scale.tractor)
    return _ambient_pair_rank2(bundle, di, di)


def kdots_holographic(impr) -> Jet:
    """Three applications of the degenerate first-order operator to the
    canonical rigidity extension, restricted to the surface (weight -5)."""
    from .tractor import robin_power

    surf = impr.surf
    if surf.d != 5:
        raise ValueError("rigidity-derivative density requires d = 5")
    ke = rigidity_extension(impr)
    T = impr.bundle.scalar_field(ke, -2)
    out = robin_power(impr.scale, T, 3)
    return surf.pull_scalar(out.item())


def kdots_explicit(surf) -> Jet:
    """Closed-form surface expression for the thrice-differentiated
    canonical rigidity extension (d = 5)."""
    if surf.d != 5:
        raise ValueError("rigidity-derivative density requires d = 5")
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii, ff, K = inv.ii, inv.ff, inv.K
    wnn = surf.weyl_nttn
    x = (inv.tf_sym(inv.ii3_tensor()).scale(c(16))
         + inv.tf_sym(inv.mat(ii, ff)).scale(c(24))
         + ii.scale(-K * c(5)))
    ff2 = inv.mat(ff, ff)
    return (inv.l_map(x) * c(-2)
            - inv.w_insertion_term() * c(48)
            - (K * inv.dot2(ii, ff)) * c(42)
            - inv.dot2(ii, ff2) * c(48)
            - inv.x_w_ii(ff.scale(c(5)) + wnn) * c(24)
            - inv.ii_ww() * c(48)
            + inv.dot2(ii, surf.intrinsic.bach) * c(8)
            - inv.dot2(ff + wnn, surf.div_weyl_ttn) * c(24))


# ---------------------------------------------------------------------------
# explicit obstruction density (d = 5)
# ---------------------------------------------------------------------------


def obstruction_explicit(surf) -> Jet:
    """Closed-form weight -5 obstruction density of the asymptotic
    unit-density problem, d = 5."""
    if surf.d != 5:
        raise ValueError("explicit obstruction formula requires d = 5")
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii, ff, K, H = inv.ii, inv.ff, inv.K, inv.H
    pbar, jbar = inv.pbar, inv.jbar
    fr = inv.fr
    wnn = surf.weyl_nttn
    div_ii = inv.div_ii()
    div_ff = inv.div(ff)
    lap_ii = inv.lap(ii)
    grad_h = inv.grad_scalar(H)

    ob = (
        inv.scalar_lap(inv.div_div(ii))
        + _div_vec(fr, surf.bach_nt) * 6
        + inv.dot2(ii, surf.bach_tt) * 6
        - inv.dot2(pbar, inv.cotton_n_sym()) * 6
        - inv.dot2(pbar, surf.div_weyl_ttn) * 6
        + inv.dot2(pbar, lap_ii) * 9
        - jbar * inv.div_div(ii)
        + inv.grad_dot_grad(ii, pbar) * 6
        + inv.dot2(div_ii, inv.grad_scalar(jbar)) * 4
        + inv.dot2(ii, inv.hessian(jbar)) * 3
        + inv.dot2(ii, surf.nabla_bar(div_ff)) * 12
        + inv.dot2(ff, lap_ii) * 15
        + inv.dot2(div_ii, div_ff) * 14
        + inv.grad_dot_grad(ii, ff) * 12
        - inv.w_grad_ff() * 18
        - inv.dot2(ii, inv.hessian(K)) * c(5, 6)
        - inv.dot2(div_ii, ii.dot(inv.up1(div_ii), [(1, 0)])) * c(2, 3)
        - inv.dot2(div_ii, inv.grad_scalar(K)) * c(7, 4)
        + inv.sandwich(ii, pbar, ff) * 24
        - (jbar * inv.dot2(ii, pbar)) * 9
        - (jbar * inv.dot2(ii, ff)) * 15
        + (K * inv.dot2(ii, pbar)) * c(5, 3)
        - inv.dot2(grad_h, inv.grad_scalar(K).scale(c(1, 8))
                   + ii.dot(inv.up1(div_ii), [(1, 0)]).scale(c(1, 3))
                   - div_ff) * 6
        + (H * inv.div_div(ff)) * 6
        - (H * inv.dot2(ii, lap_ii)) * c(3, 2)
        - (H * inv.dot2(div_ii, div_ii)) * 2
        - (H * inv.scalar_lap(K)) * c(3, 4)
        + (H * inv.dot2(ff, pbar)) * 12
        + (H * K * jbar) * 3
        + (H * inv.ii_divw()) * c(3, 2)
        + (H * inv.ii_w_ii()) * c(3, 2)
        - (H * (inv.ii_cn()
                + (H * inv.tr_ii3()) * c(1, 2)
                - H * inv.dot2(ii, ff))) * 12
    )

    x = (inv.tf_sym(inv.ii3_tensor())
         + inv.tf_sym(inv.mat(ii, ff)).scale(c(9, 4))
         + ii.scale(K * c(1, 96)))
    extra = (
        inv.l_map(x) * 16
        + inv.w_insertion_term() * 54
        + inv.dot2(wnn.scale(c(4)) + ff.scale(c(3)), surf.div_weyl_ttn) * 3
        - inv.dot2(ii, surf.intrinsic.bach) * 13
        + inv.x_w_ii(wnn.scale(c(12)) + ff.scale(c(69)))
        + inv.ii_ww() * 24
        + inv.dot2(ii, inv.mat(ff, ff)) * 60
        + (K * inv.dot2(ii, ff)) * c(89, 2)
    )
    return (ob + extra) * c(-1, 120)


# ---------------------------------------------------------------------------
# bending-energy integrand family (d = 5)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WillmoreCoefficients:
    """Normalized-form coefficients of an energy: the integrand equals
    -(willmore piece) + alpha K^2 + beta tr(II̊^4) plus 8 pi^2 gamma times
    the Euler characteristic, valid for conformally flat ambients."""

    family: str
    alpha: Fraction
    beta: Fraction
    gamma: Fraction


WILLMORE_TABLE = {
    "Gu": WillmoreCoefficients("Gu", Fraction(-11, 6), Fraction(5, 2), Fraction(3)),
    "Wm": WillmoreCoefficients("Wm", Fraction(0), Fraction(0), Fraction(0)),
    "GR": WillmoreCoefficients("GR", Fraction(-11, 6), Fraction(5, 2), Fraction(3)),
    "GW": WillmoreCoefficients("GW", Fraction(9, 2), Fraction(-31, 2), Fraction(-1)),
    "Vy": WillmoreCoefficients("Vy", Fraction(-7, 12), Fraction(1), Fraction(0)),
    "NN": WillmoreCoefficients("NN", Fraction(35, 12), Fraction(-20), Fraction(0)),
}

_FLAT_ONLY_FAMILIES = {"Gu", "Vy"}


def _require_conformally_flat(surf, tol=1e-10):
    m = max(float(c.max_abs()) for c in surf.ambient.weyl.comps.flat)
    if m > tol:
        raise ValueError("family defined only for conformally flat ambients "
                         f"(|ambient Weyl| = {m:.3e})")


def willmore_density(surf, family: str) -> Jet:
    """Energy integrand of the named fourth-order bending-energy family.

    Families ``Gu`` and ``Vy`` are defined only over conformally flat
    ambients; the returned jet is the density integrated against the
    induced volume (topological Euler terms are NOT included -- see
    ``WILLMORE_TABLE`` for the gamma bookkeeping).
    """
    if surf.d != 5:
        raise ValueError("bending-energy families require d = 5")
    if family not in WILLMORE_TABLE:
        raise KeyError(f"unknown family {family!r}")
    if family in _FLAT_ONLY_FAMILIES:
        _require_conformally_flat(surf)
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii, ff, K, H = inv.ii, inv.ff, inv.K, inv.H
    if family in ("Gu", "Vy"):
        gh = inv.grad_scalar(H)
        base = (inv.dot2(gh, gh) - (H * H) * K + (H * H) * (H * H) * 3) * c(1, 2)
        if family == "Gu":
            return base
        return base + ((K * K) * c(5, 24) - inv.tr_ii4() * c(1, 4)) * c(1, 2)
    if family == "Wm":
        dii = inv.surf.nabla_bar(ii)
        grad_ii_sq = inv.dot2(dii, dii)
        return (grad_ii_sq
                + inv.ii_cn() * c(12)
                - inv.sandwich(ii, inv.pbar, ii) * c(8)
                + (inv.jbar * K) * c(7)
                + (H * inv.tr_ii3()) * c(12)
                - (H * inv.dot2(ii, ff)) * c(24)) * c(1, 2)
    if family == "GR":
        q4s = intrinsic_q4_surface(surf)
        wm = willmore_piece(surf)
        return (q4s - wm * c(1, 3)
                + inv.ii_divw() * c(1, 6)
                + inv.ii_w_ii() * c(1, 6)
                + (K * K) * c(1, 24)
                - inv.dot2(inv.mat(ii, ii), ff) * 2
                + inv.dot2(ff, ff) * 2) * c(1, 16)
    if family == "GW":
        q = extrinsic_q4(surf)
        return q.intrinsic_q + q.willmore + q.invariant
    # NN: the normal-normal component of the fourth-order normal operator
    return paneitz_on_normal_explicit(surf).normal


# ---------------------------------------------------------------------------
# fourth-order operator on an embedded 2-manifold (d = 3)
# ---------------------------------------------------------------------------


def moebius_schouten(surf) -> Tensor:
    """The embedding-induced substitute for the (undefined) intrinsic
    Schouten tensor of a 2-manifold: P^⊤ + H II̊ + ½H²ḡ − ½Kḡ."""
    if surf.d != 3:
        raise ValueError("requires ambient dimension 3")
    inv = SurfaceInvariants(surf)
    c = inv.c
    gbar = inv.fr.g
    return (surf.schouten_tt
            + inv.ii.scale(inv.H)
            + gbar.scale(inv.H * inv.H * c(1, 2))
            - gbar.scale(inv.K * c(1, 2)))


def p4_surface_d3(surf, fbar: Jet) -> Jet:
    """Fourth-order conformally covariant operator on weight-1 densities of
    an embedded 2-manifold, built from the Moebius-structure tensor."""
    if surf.d != 3:
        raise ValueError("requires ambient dimension 3")
    inv = SurfaceInvariants(surf)
    c = inv.c
    fr = inv.fr
    pp = moebius_schouten(surf)
    jj = fr.ginv.dot(pp, [(0, 0), (1, 1)]).item()
    lap2 = inv.scalar_lap(inv.scalar_lap(fbar))
    mid = _second_order_term(fr, pp, fbar) * 4
    pp2 = inv.dot2(pp, pp)
    div_ii = inv.div_ii()
    zero_th = (inv.div_div(pp) * 2
               - inv.scalar_lap(jj)
               + pp2 * 2
               - jj * jj.truncate(jj.degree)
               + inv.grad_vec_div(inv.ii, div_ii) * 2
               + inv.dot2(div_ii, div_ii) * 2
               + (inv.K * inv.K) * c(1, 4))
    return lap2 + mid + zero_th * fbar.truncate(zero_th.degree)


# ---------------------------------------------------------------------------
# sixth-order operator over a Poincare--Einstein infinity (d = 5)
# ---------------------------------------------------------------------------


def pe_certificate(surf):
    """Max base-point magnitude of (II̊, F̊, symmetrized normal Cotton) --
    all three vanish when the ambient admits the required asymptotically
    Einstein structure."""
    inv = SurfaceInvariants(surf)
    vals = [max(float(x.max_abs()) for x in inv.ii.comps.flat),
            max(float(x.max_abs()) for x in inv.ff.comps.flat),
            max(float(x.max_abs()) for x in inv.cotton_n_sym().comps.flat)]
    return max(vals)


def p6_pe(surf, fbar: Jet, certify: bool = True, tol: float = 1e-10) -> Jet:
    """Sixth-order conformally covariant operator on weight-1 densities of a
    4-manifold embedded as the infinity of a Poincare--Einstein structure."""
    if surf.d != 5:
        raise ValueError("requires ambient dimension 5")
    if certify:
        m = pe_certificate(surf)
        if m > tol:
            raise ValueError(f"embedding fails the Einstein-structure "
                             f"certificate (residual {m:.3e})")
    inv = SurfaceInvariants(surf)
    c = inv.c
    fr = inv.fr
    pbar, jbar = inv.pbar, inv.jbar
    gbar = fr.g
    btop = surf.bach_tt
    bbar = fr.bach
    cbar = fr.cotton

    lap = inv.scalar_lap
    lapf = lap(fbar)
    lap2f = lap(lapf)
    lap3f = lap(lap2f)

    hess_lapf = inv.hessian(lapf)
    grad_lapf = inv.grad_scalar(lapf)
    hess_f = inv.hessian(fbar)
    grad_f = inv.grad_scalar(fbar)
    d3f = fr.covariant_derivative(hess_f)          # [a, b, c] = ∇a∇b∇c f
    dpbar = fr.covariant_derivative(pbar)          # [a, b, c] = ∇a P_bc

    grad_j = inv.grad_scalar(jbar)
    hess_j = inv.hessian(jbar)
    lap_j = lap(jbar)
    p2 = inv.dot2(pbar, pbar)
    p_mat2 = inv.mat(pbar, pbar)
    p3 = inv.dot2(p_mat2, pbar)
    wpw = fr.weyl.dot(inv.upall(pbar), [(1, 0), (3, 1)])   # W(.,P,.)_ac

    out = (lap3f
           - jbar * lap2f.truncate(jbar.degree) * 3
           + inv.dot2(pbar, hess_lapf) * 16
           + inv.dot2(grad_j, grad_lapf) * 10
           + inv.dot2(dpbar, d3f) * 16)

    hess_coeff = (gbar.scale(lap_j)
                  + hess_j.scale(c(20))
                  - gbar.scale(jbar * jbar) 
                  - pbar.scale(jbar * c(16))
                  - gbar.scale(p2 * c(24))
                  + wpw.scale(c(32))
                  + p_mat2.scale(c(144))
                  + btop.scale(c(16)))
    out = out + inv.dot2(hess_coeff, hess_f)

    grad_j2 = inv.grad_scalar(jbar * jbar.truncate(jbar.degree))
    grad_p2 = inv.grad_scalar(p2)
    cp = cbar.dot(inv.upall(pbar), [(1, 0), (2, 1)])       # C(.,P)_a
    grad_coeff = (inv.grad_scalar(lap_j).scale(c(8))
                  - grad_j2.scale(c(7))
                  + pbar.dot(inv.up1(grad_j), [(1, 0)]).scale(c(72))
                  + grad_p2.scale(c(32))
                  - cp.scale(c(80))
                  + inv.div(btop).scale(c(16)))
    out = out + inv.dot2(grad_coeff, grad_f)

    dp2 = inv.dot2(dpbar, dpbar)
    c2 = surf.full_contract(cbar, cbar)
    zero_th = (lap(lap_j)
               + jbar * jbar.truncate(jbar.degree) * jbar.truncate(jbar.degree) * 3
               - (jbar * p2) * 24
               - (jbar * lap_j) * 5
               + inv.dot2(pbar, wpw) * 8
               + p3 * 48
               + inv.dot2(pbar, hess_j) * 16
               + dp2 * 8
               - c2 * 4
               + inv.dot2(grad_j, grad_j) * 2
               - inv.dot2(pbar, bbar - btop) * 16
               + inv.div_div(btop) * 8)
    return out + zero_th * fbar.truncate(zero_th.degree)


# ---------------------------------------------------------------------------
# conformally flat pointwise / integrand identities (d = 5)
# ---------------------------------------------------------------------------


def conformally_flat_identities(surf) -> Dict[str, object]:
    """Pointwise intrinsic-Schouten identity and the integrands of the
    flat-background integral identities, for conformally flat d = 5
    ambients."""
    if surf.d != 5:
        raise ValueError("requires ambient dimension 5")
    _require_conformally_flat(surf)
    inv = SurfaceInvariants(surf)
    c = inv.c
    ii, K, H = inv.ii, inv.K, inv.H
    gbar = inv.fr.g
    # the H^2 trace term carries +1/2 in this orientation convention: on the
    # round 4-sphere (trace-free second form = 0, rigidity = 0) the intrinsic
    # Schouten is +1/2 gbar, which forces the sign recorded here
    predicted = (ii.scale(H)
                 + gbar.scale(H * H * c(1, 2))
                 + gbar.scale(K * c(1, 12))
                 - inv.mat(ii, ii).scale(c(1, 2)))
    residual = inv.pbar + predicted.scale(c(-1))
    gh = inv.grad_scalar(H)
    div_ii = inv.div_ii()
    return {
        "schouten_residual": residual,
        "grad_h_sq": inv.dot2(gh, gh),
        "div_ii_sq": inv.dot2(div_ii, div_ii),
        "ii_graddiv_ii": inv.dot2(ii, inv.tf_sym(
            inv.fr.covariant_derivative(div_ii))) ,
    }

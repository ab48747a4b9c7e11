"""Embedded-hypersurface geometry: model surfaces and structural identities."""

import numpy as np
import pytest

from hyperjet import F64, Jet
from hyperjet.hypersurface import EmbeddedSurface
from hyperjet.riemann import conformal_rescale
from hyperjet.tensors import Tensor

from .helpers import ev, flat_metric, perturbed_metric


DEG = 6


def hyperplane(d=5, degree=DEG, backend="f64"):
    g = flat_metric(d, degree, backend)
    s = ev(f"x{d-1}", d, degree, backend)
    phi = [ev(f"x{i}", d - 1, degree, backend) for i in range(d - 1)] + \
          [ev("0", d - 1, degree, backend)]
    return EmbeddedSurface(g, s, phi)


def unit_sphere(d=5, degree=DEG):
    g = flat_metric(d, degree)
    sq = " + ".join(["(x0+1)^2"] + [f"x{i}^2" for i in range(1, d)])
    s = ev(f"({sq} - 1)/2", d, degree)
    inner = " + ".join(f"x{i}^2" for i in range(d - 1))
    phi = [ev(f"sqrt(1 - ({inner})) - 1", d - 1, degree)] + \
          [ev(f"x{i}", d - 1, degree) for i in range(d - 1)]
    return EmbeddedSurface(g, s, phi)


def graph_surface(d=5, degree=DEG, seed=2, magnitude=0.05, curved_ambient=True):
    rng = np.random.default_rng(seed)
    g = perturbed_metric(d, degree, rng, 0.04) if curved_ambient else flat_metric(d, degree)
    names = [f"x{i}" for i in range(d - 1)]
    terms = []
    for _ in range(4):
        i, j = rng.integers(0, d - 1, size=2)
        c = rng.integers(1, 4)
        terms.append(f"{c}*{names[i]}*{names[j]}")
    for _ in range(2):
        i, j, k = rng.integers(0, d - 1, size=3)
        terms.append(f"{names[i]}*{names[j]}*{names[k]}")
    h = f"{magnitude}*(" + " + ".join(terms) + ")"
    s = ev(f"x{d-1} - ({h})", d, degree)
    phi = [ev(f"x{i}", d - 1, degree) for i in range(d - 1)] + [ev(h, d - 1, degree)]
    return EmbeddedSurface(g, s, phi)


class TestModels:
    def test_hyperplane_totally_geodesic(self):
        surf = hyperplane()
        assert surf.second_form.max_abs() == 0
        assert surf.mean_curvature.max_abs() == 0
        assert surf.rigidity.max_abs() == 0
        assert surf.fialkow.max_abs() == 0
        assert surf.intrinsic.riemann.max_abs() == 0

    def test_sphere_umbilic(self):
        surf = unit_sphere()
        H = surf.mean_curvature
        assert (H - Jet.constant(1.0, 4, H.degree, F64)).max_abs() < 1e-10
        assert surf.trace_free_second_form.max_abs() < 1e-10
        assert surf.rigidity.max_abs() < 1e-10
        assert surf.fialkow_tf.max_abs() < 1e-10
        assert (surf.second_form - surf.gbar).max_abs() < 1e-10

    def test_sphere_intrinsic_round(self):
        surf = unit_sphere()
        intr = surf.intrinsic
        assert (intr.jay - Jet.constant(2.0, 4, intr.jay.degree, F64)).max_abs() < 1e-9
        assert (intr.schouten - surf.gbar.scale_rational(1, 2)).max_abs() < 1e-9
        assert intr.weyl.max_abs() < 1e-9

    def test_cylinder_curvatures(self):
        d, r = 5, 2.0
        g = flat_metric(d, DEG)
        # S^1_r x R^3: principal curvatures (1/r, 0, 0, 0)
        s = ev(f"((x0+{r})^2 + x1^2 - {r}^2)/(2*{r})", d, DEG)
        phi = [ev(f"sqrt({r}^2 - x0^2) - {r}", d - 1, DEG),
               ev("x0", d - 1, DEG),
               ev("x1", d - 1, DEG),
               ev("x2", d - 1, DEG),
               ev("x3", d - 1, DEG)]
        surf = EmbeddedSurface(g, s, phi)
        H = surf.mean_curvature
        K = surf.rigidity
        assert (H - Jet.constant(1 / (4 * r), 4, H.degree, F64)).max_abs() < 1e-10
        assert (K - Jet.constant(3 / (4 * r * r), 4, K.degree, F64)).max_abs() < 1e-10

    def test_inconsistent_parametrization_rejected(self):
        d = 4
        g = flat_metric(d, 4)
        s = ev("x3 - x0^2", d, 4)
        phi = [ev(f"x{i}", d - 1, 4) for i in range(d - 1)] + [ev("0", d - 1, 4)]
        with pytest.raises(ValueError):
            EmbeddedSurface(g, s, phi)


class TestStructuralIdentities:
    def test_theorema_egregium_random(self):
        surf = graph_surface()
        assert surf.theorema_egregium_residual().max_abs() < 1e-8

    def test_theorema_egregium_exact_rational(self):
        d = 5
        g = flat_metric(d, DEG, "rational")
        h = "(x0*x1 + x2^2 - x1*x3)/10"
        s = ev(f"x4 - ({h})", d, DEG, "rational")
        phi = [ev(f"x{i}", d - 1, DEG, "rational") for i in range(d - 1)] + \
              [ev(h, d - 1, DEG, "rational")]
        surf = EmbeddedSurface(g, s, phi)
        assert surf.theorema_egregium_residual().max_abs() == 0

    def test_fialkow_trace_identity(self):
        """gbar-trace of the Fialkow tensor equals K/(2(d-2))."""
        surf = graph_surface(seed=5)
        tr = surf.gbar_inv.dot(surf.fialkow, [(0, 0), (1, 1)]).item()
        target = surf.rigidity * (1.0 / (2 * (surf.d - 2)))
        assert (tr - target).max_abs() < 1e-8

    def test_second_form_trace_decomposition(self):
        surf = graph_surface(seed=7)
        recon = surf.trace_free_second_form + surf.gbar.scale(surf.mean_curvature)
        assert (recon - surf.second_form).max_abs() < 1e-10
        tr = surf.gbar_inv.dot(surf.trace_free_second_form, [(0, 0), (1, 1)]).item()
        assert tr.max_abs() < 1e-9

    def test_third_form_tracefree(self):
        surf = graph_surface(seed=8)
        tr = surf.gbar_inv.dot(surf.third_form, [(0, 0), (1, 1)]).item()
        assert tr.max_abs() < 1e-8

    def test_orientation_flip(self):
        """Negating s flips the conormal, II and H but preserves K."""
        surf = graph_surface(seed=3, curved_ambient=False)
        d = surf.d
        flipped = EmbeddedSurface(surf.metric, -surf.s_jet, surf.phi_disp)
        assert (surf.mean_curvature + flipped.mean_curvature).max_abs() < 1e-10
        assert (surf.second_form + flipped.second_form).max_abs() < 1e-10
        assert (surf.rigidity - flipped.rigidity).max_abs() < 1e-9


class TestTangentialDerivatives:
    def test_intrinsic_metricity(self):
        surf = graph_surface(seed=4)
        assert surf.nabla_bar(surf.gbar).max_abs() < 1e-10

    def test_constant_annihilated(self):
        surf = graph_surface(seed=4)
        c = Tensor.scalar(Jet.constant(3.0, surf.n, DEG, F64))
        assert surf.nabla_bar(c).max_abs() == 0

    def test_flat_laplacian(self):
        surf = hyperplane()
        f = ev("x0^2", surf.n, DEG)
        lap = surf.lap_bar(Tensor.scalar(f)).item()
        assert (lap - Jet.constant(2.0, surf.n, lap.degree, F64)).max_abs() < 1e-12


@pytest.fixture(scope="module")
def pair():
    surf = graph_surface(seed=12)
    omega_amb = ev("0.03*x0 - 0.02*x1*x4 + 0.01*x2^2", surf.d, DEG)
    g2 = conformal_rescale(surf.metric, omega_amb)
    surf2 = EmbeddedSurface(g2, surf.s_jet, surf.phi_disp)
    omega_bar = surf.pull_scalar(omega_amb)
    return surf, surf2, omega_bar


class TestConformalWeights:
    """All-lower components under g -> e^{2w} g at the same surface point."""

    def test_induced_metric_weight(self, pair):
        surf, surf2, w = pair
        factor = (w * 2.0).exp()
        assert (surf2.gbar - surf.gbar.scale(factor)).max_abs() < 1e-9

    def test_tracefree_second_form_weight(self, pair):
        surf, surf2, w = pair
        factor = w.exp()
        assert (surf2.trace_free_second_form
                - surf.trace_free_second_form.scale(factor)).max_abs() < 1e-8

    def test_rigidity_weight(self, pair):
        surf, surf2, w = pair
        factor = (w * -2.0).exp()
        assert (surf2.rigidity - surf.rigidity * factor).max_abs() < 1e-8

    def test_fialkow_tracefree_invariant(self, pair):
        surf, surf2, _ = pair
        assert (surf2.fialkow_tf - surf.fialkow_tf).max_abs() < 1e-8

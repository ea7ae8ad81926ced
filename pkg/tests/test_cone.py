import numpy as np
import pytest

from pseudohyp.ads3 import boundary_from_circle_diffeo
from pseudohyp.charts import PolarChart, polar_boundary
from pseudohyp.cone import (
    ConeModel,
    WeightedNormSpec,
    barrier_verify,
    cone_from_boundary,
    cone_geometry,
    cone_point,
    graph_over_cone,
    indicial_polynomial,
    jacobi_polar_assemble,
    link_curve,
    link_metric,
    pullback_metric,
    quadratic_form,
    radial_ode_solution,
    surface_mean_curvature,
    weighted_invertibility_probe,
    weighted_norm,
)
from pseudohyp.core import QuadricPoint, Signature, bilinear_form
from pseudohyp.errors import (
    HypothesisViolated,
    InvalidParameter,
    LinkNotSpacelike,
    OutsidePolarDomain,
    ProjectionFailed,
)
from pseudohyp.spheres import LipschitzSphereMap, circle_mesh, constant_map, icosphere_mesh

S21 = Signature(2, 1)
X0 = QuadricPoint(np.array([0, 0, 1.0, 0]), S21)
CH = PolarChart(X0)


def round_cone(nl=32, m=64, **kw):
    return cone_from_boundary(constant_map(circle_mesh(nl), [1.0, 0]), CH, m=m, **kw)


@pytest.fixture(scope="module")
def sine_cone(sine_f):
    return cone_from_boundary(boundary_from_circle_diffeo(sine_f, 128), CH)


def test_equatorial_link_is_round():
    C = round_cone()
    V = C.link
    assert np.allclose(V[:, 2:], 0, atol=1e-14)
    assert np.allclose(np.linalg.norm(V[:, :2], axis=1), 1)


def test_link_constraints_and_round_trip(sine_cone, sine_phi):
    V = sine_cone.link
    assert np.abs(bilinear_form(V, V, S21) - 1).max() < 1e-10
    assert np.abs(bilinear_form(V, X0.coords, S21)).max() < 1e-10
    rays = sine_phi.boundary_coords()
    rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    for v in V[:5]:
        y = polar_boundary(CH, v).coords
        assert np.min(np.linalg.norm(rays - y, axis=1)) < 1e-12


def test_outside_polar_domain():
    far = PolarChart(QuadricPoint(np.array([0, 0, 0, 1.0]), S21))
    with pytest.raises(OutsidePolarDomain):
        cone_from_boundary(constant_map(circle_mesh(16), [1.0, 0]), far)


def test_cone_model_validation():
    C = round_cone()
    with pytest.raises(InvalidParameter):
        ConeModel(C.chart, C.mesh, C.link, np.linspace(0.0, 2.0, 10))
    with pytest.raises(InvalidParameter):
        ConeModel(C.chart, C.mesh, C.link * 1.1, C.r)


def test_round_cone_is_totally_geodesic():
    geo = cone_geometry(round_cone())
    assert np.abs(geo.H_link).max() < 1e-12
    assert np.abs(geo.H_cone(2.0)).max() < 1e-12


def test_cone_metric_pullback(sine_cone):
    rng = np.random.default_rng(0)
    psi, r = rng.uniform(0, 2 * np.pi, 200), rng.uniform(0.5, 5, 200)

    def fn(ps, rr):
        return cone_point(sine_cone, link_curve(sine_cone, ps), rr)

    G = pullback_metric(fn, psi, r, S21, h=1e-4)
    want = np.zeros_like(G)
    want[:, 0, 0] = np.sinh(r) ** 2 * link_metric(sine_cone, psi)
    want[:, 1, 1] = 1.0
    rel = np.abs(G - want).max(axis=(1, 2)) / np.abs(want).max(axis=(1, 2))
    assert rel.max() < 1e-5


def test_cone_mean_curvature_scaling(sine_cone):
    geo = cone_geometry(sine_cone)

    def fn(ps, rr):
        return cone_point(sine_cone, link_curve(sine_cone, ps), rr)

    for r in (1.0, 3.0):
        errs = []
        for h in (2e-3, 1e-3):
            H = surface_mean_curvature(fn, geo.psi, np.full(len(geo.psi), r), S21, h=h)
            errs.append(np.abs(H - geo.H_cone(r)).max() / np.abs(geo.H_cone(r)).max())
        assert errs[1] < 1e-4 and errs[1] <= errs[0]
    # identification by radial projection turns 1/sinh into 1/sinh^2
    assert np.allclose(geo.H_identified(2.0) * np.sinh(2.0) ** 2, geo.H_link)


def test_second_fundamental_form_decay(sine_cone):
    geo = cone_geometry(sine_cone)
    base = geo.norm_II_link()
    for r in (1.0, 2.5, 6.0):
        assert np.allclose(geo.norm_II_cone(r) * np.sinh(r), base)
        II = geo.II_cone(r)
        assert np.allclose(II / np.sinh(r), geo.II_link)


def test_cone_geometry_rejects():
    with pytest.raises(LinkNotSpacelike):
        mesh = circle_mesh(64)
        th = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
        steep = LipschitzSphereMap(mesh, np.column_stack([np.cos(0.5 * np.sin(4 * th)), np.sin(0.5 * np.sin(4 * th))]))
        cone_geometry(cone_from_boundary(steep, CH))
    sig = Signature(3, 1)
    x0 = QuadricPoint(np.array([0, 0, 0, 1.0, 0]), sig)
    with pytest.raises(InvalidParameter):
        cone_geometry(cone_from_boundary(constant_map(icosphere_mesh(1), [1.0, 0]), PolarChart(x0)))


def test_indicial_polynomial():
    d = indicial_polynomial(2)
    assert set(d.roots) == {1, -2}
    for r in (0.3, 1.0, 5.0):
        assert d.P(r, 0.0) == -2
    for root in d.roots:
        assert d.P_inf(root) == 0
    assert d.sobolev_window_ok and d.holder_window_ok
    d = indicial_polynomial(2, 1.5)
    assert not d.sobolev_window_ok and not d.holder_window_ok
    with pytest.raises(InvalidParameter):
        indicial_polynomial(1)


@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_indicial_windows_exact(p):
    s = np.sqrt(p)
    assert not indicial_polynomial(p, -s).sobolev_window_ok
    assert not indicial_polynomial(p, s).sobolev_window_ok
    assert indicial_polynomial(p, np.nextafter(s, 0)).sobolev_window_ok
    assert not indicial_polynomial(p, -p).holder_window_ok
    assert not indicial_polynomial(p, 1).holder_window_ok
    assert indicial_polynomial(p, -p + 1e-9).holder_window_ok
    assert indicial_polynomial(p, 1 - 1e-9).holder_window_ok
    for w in np.linspace(-p - 1, 2, 41):
        d = indicial_polynomial(p, w)
        assert d.holder_window_ok == (d.P_inf(w) < 0) == (-p < w < 1)
        assert d.sobolev_window_ok == (abs(w) < s)


def test_polar_operator_round_constant():
    C = round_cone()
    op = jacobi_polar_assemble(C, 0.0)
    res = (op @ np.ones(op.shape[0])).reshape(-1, 32)
    # rows away from the Dirichlet row and the closure row
    assert np.abs(res[2:-2] + 2).max() < 1e-10


def test_polar_operator_growing_root():
    C = round_cone()
    op = jacobi_polar_assemble(C, 0.0)
    rr = op.meta["radii"]
    res = np.abs((op @ np.repeat(np.exp(rr), 32)).reshape(-1, 32)[:, 0]) / np.exp(rr)
    inner = res[1:-1]
    assert inner[-1] < inner[0] / 20
    assert inner[-1] < 5 * C.dr**2


@pytest.mark.parametrize("omega", [-2.0, -0.5, 0.7, 1.5])
def test_conjugation_identity(omega):
    C = round_cone()
    geo = cone_geometry(C)
    A0 = jacobi_polar_assemble(C, 0.0, geo)
    Aw = jacobi_polar_assemble(C, omega, geo)
    rr = A0.meta["radii"]
    E = np.repeat(np.exp(omega * rr), 32)
    x = np.random.default_rng(1).standard_normal(A0.shape[0])
    lhs, rhs = Aw @ x, (A0 @ (E * x)) / E
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(lhs).max()


def test_generic_link_operator(sine_cone):
    op = jacobi_polar_assemble(sine_cone, 0.0)
    assert op.shape[0] == (len(sine_cone.r) - 1) * sine_cone.link.shape[0]
    assert np.isfinite(op.matrix.data).all()


def test_probe_stable_under_refinement():
    coarse = weighted_invertibility_probe(round_cone(32, 64), [0.0])[0.0]
    fine = weighted_invertibility_probe(round_cone(64, 127), [0.0])[0.0]
    assert fine / coarse >= 0.5 and coarse / fine >= 0.5


def test_probe_threads_agree():
    C = round_cone(16, 32)
    assert weighted_invertibility_probe(C, [-1.0, 0.0, 0.5]) == weighted_invertibility_probe(C, [-1.0, 0.0, 0.5], threads=3)


def test_quadratic_form_negative():
    op = jacobi_polar_assemble(round_cone(), 0.0)
    rr = op.meta["radii"]
    for s in (np.ones(op.shape[0]), np.repeat(((rr > 2) & (rr < 6)).astype(float), 32)):
        num, den = quadratic_form(op, s)
        assert num <= -(2 - 0.05) * den


def test_barrier_examples():
    x = np.linspace(0, 10, 2001)
    zero = lambda t: 0 * t  # noqa: E731
    minus_one = lambda t: -1 + 0 * t  # noqa: E731
    res = barrier_verify(zero, minus_one, 0.0, x, np.exp(-x), delta=1.0)
    assert res.bound_holds and np.isclose(res.tail_sup, np.exp(-res.C_used))
    res = barrier_verify(zero, minus_one, 2.0, x, np.full_like(x, 2.0), delta=1.0)
    assert res.bound_holds and res.tail_sup < res.bound
    sol = radial_ode_solution(2, 1.0, 0.5, 12.0, 0.0)
    xs = np.linspace(0.5, 12, 3000)
    res = barrier_verify(lambda t: 1 / np.tanh(t), lambda t: -2 + 0 * t, 1.0, xs, sol.sol(xs)[0])
    assert res.bound_holds


def test_barrier_hypothesis_violation():
    x = np.linspace(0, 10, 2001)
    with pytest.raises(HypothesisViolated) as err:
        barrier_verify(lambda t: 0 * t, lambda t: -1 + 0 * t, 0.0, x, np.sin(3 * x))
    assert err.value.sample is not None


def test_graph_over_own_cone_is_zero(flat_G, flat_phi):
    S = graph_over_cone(flat_G, cone_from_boundary(flat_phi, CH, r0=0.2))
    assert np.abs(S.coeffs).max() < 1e-10


def test_graph_over_cone_capture_failure(sine_G, sine_phi):
    off = PolarChart(QuadricPoint(np.array([0, 0, np.cos(0.3), np.sin(0.3)]), S21))
    with pytest.raises(ProjectionFailed):
        graph_over_cone(sine_G, cone_from_boundary(sine_phi, off, r0=0.05, R=8, m=141))


def test_graph_over_cone_decay(sine_G, sine_phi):
    S = graph_over_cone(sine_G, cone_from_boundary(sine_phi, CH, r0=1.0, R=8, m=141))
    assert np.all(np.isfinite(S.sup_norm))
    assert abs(S.decay_slope + 1) <= 0.15


def test_weighted_norm_examples():
    C = cone_from_boundary(constant_map(circle_mesh(32), [1.0, 0]), CH, r0=1, R=3, m=201)
    om = 0.7
    s = np.exp(om * C.r)[:, None] * np.ones((1, 32))
    assert np.isclose(weighted_norm(s, WeightedNormSpec(om, 0, "holder_sup"), C), 1.0)
    n2 = weighted_norm(np.ones((201, 32)), WeightedNormSpec(0, 0, "sobolev_l2"), C) ** 2
    assert abs(n2 / (2 * np.pi * (np.cosh(3) - np.cosh(1))) - 1) < 1e-4
    dec = np.exp(-C.r)[:, None] * np.ones((1, 32))
    vals = [weighted_norm(dec, WeightedNormSpec(w, 1, "sobolev_l2"), C) for w in (-1, -0.5, 0, 0.5)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(InvalidParameter):
        weighted_norm(dec, WeightedNormSpec(0, 3, "sobolev_l2"), C)

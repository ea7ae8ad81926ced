import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudohyp.charts import FermiChart, fermi_forward
from pseudohyp.core import Signature
from pseudohyp.errors import DegenerateEdge, EmptyInput, InvalidParameter, NotAdmissible
from pseudohyp.spheres import (
    LipschitzSphereMap,
    circle_mesh,
    classify_sphere,
    constant_map,
    convex_hull_separation,
    hemisphere_center,
    icosphere_mesh,
    lipschitz_estimate,
    mesh_from_edges,
    pairwise_boundary_products,
    shrink_family,
    smooth_strictly_lipschitz_approx,
    sphere_dist,
)

S21 = Signature(2, 1)


def angle_map(n, g):
    mesh = circle_mesh(n)
    th = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
    a = g(th)
    return LipschitzSphereMap(mesh, np.column_stack([np.cos(a), np.sin(a)]))


def identity_map(n=64):
    mesh = circle_mesh(n)
    return LipschitzSphereMap(mesh, mesh.vertices)


def clipped_tent(n=64, cap=1.2):
    # slope +-1 pieces clipped to [-cap, cap]: estimate exactly 1, image in an open half circle
    return angle_map(n, lambda t: np.clip(np.abs(t) - np.pi / 2, -cap, cap))


def test_mesh_invariants():
    for mesh in (circle_mesh(32), icosphere_mesh(2)):
        V = mesh.vertices
        assert np.allclose(V[mesh.antipode], -V)
        d = sphere_dist(V[mesh.edges[:, 0]], V[mesh.edges[:, 1]])
        assert np.abs(d - mesh.lengths).max() < 1e-12
    with pytest.raises(InvalidParameter):
        circle_mesh(7)


def test_lipschitz_examples():
    assert lipschitz_estimate(constant_map(circle_mesh(16), [0.0, 1.0])) == 0.0
    assert abs(lipschitz_estimate(identity_map()) - 1) < 1e-12
    phi = angle_map(128, lambda t: 0.5 * np.sin(t))
    for t in (0.1, 0.5, 0.9):
        assert lipschitz_estimate(shrink_family(phi, t)) <= (1 - t) * lipschitz_estimate(phi) + 1e-9


def test_degenerate_edge():
    V = np.array([[1.0, 0], [1.0, 1e-14], [-1.0, 0], [-1.0, -1e-14]])
    mesh = mesh_from_edges(V, [[0, 1], [1, 2], [2, 3], [3, 0]])
    with pytest.raises(DegenerateEdge):
        lipschitz_estimate(LipschitzSphereMap(mesh, np.ones((4, 2))))


def test_lipschitz_converges_under_refinement():
    est = [lipschitz_estimate(angle_map(n, lambda t: 0.7 * np.sin(t))) for n in (16, 64, 256)]
    assert est[0] <= est[1] <= est[2] <= 0.7 + 1e-12
    assert 0.7 - est[2] < 0.7 - est[0]


def test_classification_examples():
    assert classify_sphere(constant_map(circle_mesh(32), [1.0, 0])).tag == "Positive"
    ident = classify_sphere(identity_map())
    assert ident.tag == "NonNegativeNonAdmissible"
    i, j = ident.worst_pair
    assert np.allclose(circle_mesh(64).vertices[i], -circle_mesh(64).vertices[j])
    assert classify_sphere(clipped_tent()).tag == "NonNegativeAdmissible"
    assert classify_sphere(angle_map(64, lambda t: 2 * np.sin(t))).tag == "NotNonNegative"
    assert classify_sphere(shrink_family(clipped_tent(), 0.1)).tag == "Positive"


def test_identity_has_no_shrink_family():
    # the identity of the circle is not admissible, so it has no hemisphere center to shrink toward
    assert hemisphere_center(identity_map()) is None
    with pytest.raises(NotAdmissible):
        shrink_family(identity_map(), 0.1)


def test_positive_triple_flag():
    assert classify_sphere(angle_map(64, lambda t: 0.3 * np.sin(t))).has_positive_triple
    # p = 3 maps are not searched
    assert classify_sphere(constant_map(icosphere_mesh(1), [1.0, 0])).has_positive_triple is None


def test_shrink_family_endpoints():
    phi = angle_map(64, lambda t: 0.8 * np.sin(2 * t) / 2)
    assert np.array_equal(shrink_family(phi, 0.0).values, phi.values)
    c = hemisphere_center(phi)
    end = shrink_family(phi, 1.0)
    assert np.allclose(end.values, c)
    with pytest.raises(InvalidParameter):
        shrink_family(phi, 1.5)


def test_hemisphere_center():
    y = hemisphere_center(constant_map(circle_mesh(8), [0.6, 0.8]))
    assert np.allclose(y, [0.6, 0.8])
    rng = np.random.default_rng(0)
    for _ in range(20):
        W = rng.standard_normal((40, 3))
        W[:, 0] = np.abs(W[:, 0]) + 0.05
        y = hemisphere_center(W / np.linalg.norm(W, axis=1, keepdims=True))
        assert y is not None and (W @ y).min() > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 3), st.floats(0.01, 0.99))
def test_shrink_contracts(amp, k, t):
    phi = angle_map(96, lambda th: amp * np.sin(k * th) / k)
    est = lipschitz_estimate(phi)
    psi = shrink_family(phi, t)
    assert lipschitz_estimate(psi) <= (1 - t) * est + 1e-9
    assert classify_sphere(psi).tag == "Positive"


def test_smoothing_examples():
    phi = angle_map(128, lambda t: 0.4 * np.sin(t))
    psi = smooth_strictly_lipschitz_approx(phi, 0.1)
    assert classify_sphere(psi).tag == "Positive"
    assert sphere_dist(psi.values, phi.values).max() < 0.1
    tent = clipped_tent(128)
    assert lipschitz_estimate(tent) == pytest.approx(1.0, abs=1e-12)
    out = smooth_strictly_lipschitz_approx(tent, 0.2)
    assert lipschitz_estimate(out) < 1
    assert sphere_dist(out.values, tent.values).max() < 0.2
    with pytest.raises(InvalidParameter):
        smooth_strictly_lipschitz_approx(phi, 0.0)
    with pytest.raises(NotAdmissible):
        smooth_strictly_lipschitz_approx(identity_map(), 0.1)


def test_convex_hull_examples():
    ch = FermiChart.standard(S21)
    mesh = circle_mesh(16)
    ring = np.hstack([mesh.vertices, np.tile([1.0, 0.0], (16, 1))])
    x = fermi_forward(ch, np.array([0.3, -0.2]), np.array([1.0, 0])).coords
    assert convex_hull_separation(ring, x, S21).inside
    out = convex_hull_separation(ring, -x, S21)
    assert not out.inside
    assert (ring @ out.functional).min() >= -1e-9 and (-x) @ out.functional < 0
    assert not convex_hull_separation(ring[:1], x, S21).inside
    with pytest.raises(EmptyInput):
        convex_hull_separation(np.zeros((0, 4)), x, S21)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_classification_equivariance(seed):
    rng = np.random.default_rng(seed)
    amp = rng.choice([rng.uniform(0.1, 0.8), rng.uniform(1.3, 2.0)])
    k = int(rng.integers(1, 4))
    phi = angle_map(64, lambda t: amp * np.sin(k * t + 0.3) / k)
    shift = int(rng.integers(0, 64))
    a = rng.uniform(0, 2 * np.pi)
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    moved = LipschitzSphereMap(phi.mesh, np.roll(phi.values, shift, axis=0) @ R.T)
    assert classify_sphere(moved).tag == classify_sphere(phi).tag


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_pairwise_product_characterization(seed):
    rng = np.random.default_rng(seed)
    amp = rng.choice([rng.uniform(0.1, 0.8), rng.uniform(1.3, 2.0)])
    k = int(rng.integers(1, 4))
    phi = angle_map(64, lambda t: amp * np.sin(k * t) / k)
    P = pairwise_boundary_products(phi)
    nonneg = classify_sphere(phi).tag != "NotNonNegative"
    assert nonneg == bool(P.max() <= 1e-9)

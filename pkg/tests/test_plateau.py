import numpy as np
import pytest

from pseudohyp.ads3 import ads_chart, boundary_from_circle_diffeo, mat_to_vec, mobius_diffeo
from pseudohyp.charts import FermiChart
from pseudohyp.core import Signature
from pseudohyp.curvature import (
    acausality_excess,
    beta_diagnostic,
    curvature_report,
    hull_containment,
    norm_II_squared,
)
from pseudohyp.errors import NewtonDivergence, NotAdmissible, SpacelikeViolation
from pseudohyp.grid import (
    GridSpec,
    geometry,
    induced_metric,
    mean_curvature,
    spacelike_margin,
    vector_norm,
)
from pseudohyp.plateau import SolverParams, graph_from_function, plane_graph, solve_maximal
from pseudohyp.spheres import LipschitzSphereMap, circle_mesh, constant_map, icosphere_mesh

S21 = Signature(2, 1)
MOBIUS = np.array([[1.3, 0.4], [0.2, (1 + 0.08) / 1.3]])


def wavy(amp):
    def fn(U):
        a = amp * U[:, 0] * U[:, 1]
        return np.column_stack([np.cos(a), np.sin(a)])

    return fn


def flat_graph(n, margin=0.05):
    return graph_from_function(FermiChart.standard(S21), GridSpec(2, n, margin), lambda U: np.tile([1.0, 0], (len(U), 1)))


def test_constant_graph_metric_is_hyperbolic():
    errs = []
    for n in (33, 65):
        G = flat_graph(n, 0.2)
        g = induced_metric(G)
        u2 = (G.spec.U[G.spec.interior] ** 2).sum(1)
        want = 4 / (1 - u2) ** 2
        errs.append(np.abs(g - want[:, None, None] * np.eye(2)).max() / want.max())
        assert np.array_equal(g, np.swapaxes(g, 1, 2))
    assert errs[1] < errs[0] / 3


def test_steep_graph_violates_spacelike():
    G = graph_from_function(FermiChart.standard(S21), GridSpec(2, 33, 0.2), wavy(30.0))
    with pytest.raises(SpacelikeViolation):
        induced_metric(G)
    with pytest.raises(SpacelikeViolation):
        mean_curvature(G)


def test_margin_shrinks_with_slope():
    spec = GridSpec(2, 33, 0.2)
    m = [spacelike_margin(spec, geometry(graph_from_function(FermiChart.standard(S21), spec, wavy(a)), False)).min()
         for a in (0.0, 1.0, 2.0)]
    assert m[0] > m[1] > m[2]


def test_flat_mean_curvature_and_cross_check():
    H = [vector_norm(mean_curvature(flat_graph(n, 0.2)), S21).max() for n in (33, 65)]
    assert H[1] <= max(H[0] / 3, 1e-12)
    diffs = []
    for n in (33, 65):
        G = graph_from_function(FermiChart.standard(S21), GridSpec(2, n, 0.2), wavy(1.0))
        d = mean_curvature(G, "laplacian") - mean_curvature(G, "hessian")
        diffs.append(vector_norm(d, S21).max())
    assert diffs[1] < diffs[0] / 3


def test_mean_curvature_normal_to_order_h2():
    out = []
    for n in (33, 65):
        G = graph_from_function(FermiChart.standard(S21), GridSpec(2, n, 0.2), wavy(1.0))
        geo = geometry(G)
        H = mean_curvature(G, "laplacian")
        tang = np.abs(np.einsum("nd,nid,d->ni", H, geo.dF, geo.diag)).max() / np.sqrt(geo.g.max())
        out.append(tang)
    assert out[1] < out[0] / 3


def test_constant_boundary_solves_immediately(flat_G):
    assert flat_G.info["newton_iterations"] <= 2
    assert flat_G.info["sup_H"] <= 1e-10
    rep = curvature_report(flat_G)
    assert rep.sup_norm_II <= 10 * flat_G.spec.h**2
    assert rep.sup_check_ishihara


def test_mobius_boundary_gives_isometric_plane():
    phi = boundary_from_circle_diffeo(mobius_diffeo(MOBIUS, 512), 256)
    ch = ads_chart()
    G = solve_maximal(phi, 65, chart=ch)
    nvec = ch.to_chart(mat_to_vec(np.linalg.inv(MOBIUS)))
    U, W = G.spec.U[G.spec.interior], G.values[G.spec.interior]
    assert np.abs(W - plane_graph(nvec[None], U, W)).max() <= 10 * G.spec.h**2
    assert curvature_report(G).sup_norm_II <= 5 * G.spec.h**2 * 10


def test_mobius_residual_of_exact_plane_is_second_order():
    ch = ads_chart()
    nvec = ch.to_chart(mat_to_vec(np.linalg.inv(MOBIUS)))
    res = []
    for n in (65, 129):
        spec = GridSpec(2, n)
        W0 = np.tile([1.0, 0.0], (len(spec.U), 1))
        G = graph_from_function(ch, spec, lambda U: plane_graph(nvec[None], U, W0[: len(U)]))
        res.append(vector_norm(mean_curvature(G), S21).max())
    assert res[1] < res[0] / 3


def test_sine_solution_properties(sine_G, sine_phi):
    G = sine_G
    assert G.info["sup_H"] < 1e-8
    assert spacelike_margin(G.spec, geometry(G, False)).min() > 0
    rep = curvature_report(G)
    assert rep.sup_norm_II_sq <= G.p * G.q + 1e-6
    assert all(v >= 0 for v in rep.L_s_integrals.values())
    assert acausality_excess(G) <= 1e-8
    frac, bad = hull_containment(G, sine_phi, n_nodes=60)
    assert frac == 1.0


def test_linear_functionals_are_eigenfunctions(sine_G):
    # on a maximal graph every coordinate function satisfies Delta_g x = p x
    geo = geometry(sine_G)
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(4)
    F_full = sine_G.embedding()
    lhs = geo.laplace_beltrami(F_full) @ psi - 2 * geo.F @ psi
    # away from the rim, where chart coordinates stay of order one
    r = np.linalg.norm(sine_G.spec.U[sine_G.spec.interior], axis=1)
    assert np.abs(lhs[r < 0.5]).max() < 10 * sine_G.spec.h**2


def test_non_admissible_rejected():
    mesh = circle_mesh(64)
    with pytest.raises(NotAdmissible) as err:
        solve_maximal(LipschitzSphereMap(mesh, mesh.vertices), 65)
    assert err.value.worst_pair is not None


def test_newton_divergence_reported(sine_phi):
    with pytest.raises(NewtonDivergence) as err:
        solve_maximal(sine_phi, 65, chart=ads_chart(), params=SolverParams(max_newton=1, t_step=1.0, t_floor=0.9))
    assert err.value.residual is not None


def test_curvature_report_flat_is_zero(flat_G):
    rep = curvature_report(flat_G)
    assert rep.sup_norm_II < 1e-8 and rep.renormalized_area < 1e-12
    assert all(v < 1e-10 for v in rep.L_s_integrals.values())


def test_beta_diagnostic(sine_G):
    res = beta_diagnostic(sine_G, sine_G)
    assert abs(res.sup_beta + 1) < 1e-9
    assert res.pair[0] == res.pair[1]
    assert res.sup_off_diagonal <= -1 + 1e-8
    # bump the interior off the maximal surface, keeping the boundary ring
    W = sine_G.values.copy()
    inner = sine_G.spec.interior
    r = np.linalg.norm(sine_G.spec.U[inner], axis=1)
    ang = 0.2 * np.exp(-8 * r**2)
    w = W[inner]
    W[inner] = np.column_stack([np.cos(ang) * w[:, 0] - np.sin(ang) * w[:, 1], np.sin(ang) * w[:, 0] + np.cos(ang) * w[:, 1]])
    bumped = sine_G.with_values(W)
    assert beta_diagnostic(sine_G, bumped).sup_beta > -1


def test_p3_constant_solution():
    phi = constant_map(icosphere_mesh(2), [1.0, 0.0])
    G = solve_maximal(phi, 33, margin=0.15)
    assert G.info["newton_iterations"] <= 2
    geo = geometry(G, False)
    assert np.sqrt(np.maximum(norm_II_squared(geo), 0)).max() <= 10 * G.spec.h**2

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import sine_diffeo
from pseudohyp.ads3 import ads_chart, boundary_from_circle_diffeo
from pseudohyp.charts import FermiChart
from pseudohyp.core import Signature
from pseudohyp.errors import NotNormal
from pseudohyp.grid import GridSpec, geometry, vector_norm
from pseudohyp.jacobi import (
    frame_to_section,
    jacobi_apply,
    jacobi_operator,
    mean_curvature_derivative,
    normal_frame,
    section_to_frame,
)
from pseudohyp.plateau import graph_from_function, solve_maximal

S21 = Signature(2, 1)


def bump_coeffs(G, seed=0, width=6.0):
    rng = np.random.default_rng(seed)
    U = G.spec.U[G.spec.interior]
    c = rng.normal(size=3)
    r2 = (U**2).sum(1)
    return (np.exp(-width * r2) * (c[0] + c[1] * U[:, 0] + c[2] * U[:, 1]))[:, None]


def deep_nodes(spec):
    # interior nodes whose whole stencil stays interior
    return np.all(spec.to_interior[spec.nbr] >= 0, axis=1)


def test_flat_parallel_section():
    G = graph_from_function(FermiChart.standard(S21), GridSpec(2, 33, 0.2), lambda U: np.tile([1.0, 0], (len(U), 1)))
    nu = normal_frame(G)
    assert np.allclose(nu[:, 0], [0, 0, 0, 1], atol=1e-12)
    sigma = nu[:, 0]
    J = jacobi_apply(G, sigma)
    deep = deep_nodes(G.spec)
    assert np.abs(J[deep] + 2 * sigma[deep]).max() < 1e-10


def test_linearity_and_normality_guard(sine_G):
    geo = geometry(sine_G)
    nu = normal_frame(sine_G, geo)
    s1 = frame_to_section(nu, bump_coeffs(sine_G, 1))
    s2 = frame_to_section(nu, bump_coeffs(sine_G, 2))
    lhs = jacobi_apply(sine_G, 2.0 * s1 - 3.0 * s2, geo=geo)
    rhs = 2.0 * jacobi_apply(sine_G, s1, geo=geo) - 3.0 * jacobi_apply(sine_G, s2, geo=geo)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()
    with pytest.raises(NotNormal):
        jacobi_apply(sine_G, geo.dF[:, 0], geo=geo)
    with pytest.raises(NotNormal):
        jacobi_apply(sine_G, np.zeros((3, 4)), geo=geo)


def test_frame_is_orthonormal(sine_G):
    geo = geometry(sine_G, False)
    nu = normal_frame(sine_G, geo)
    gram = -np.einsum("nkd,nld,d->nkl", nu, nu, geo.diag)
    assert np.abs(gram - 1).max() < 1e-12
    c = bump_coeffs(sine_G)
    assert np.allclose(section_to_frame(nu, frame_to_section(nu, c), geo.diag), c, atol=1e-12)


def test_matches_mean_curvature_derivative(sine_G):
    geo = geometry(sine_G)
    sigma = frame_to_section(normal_frame(sine_G, geo), bump_coeffs(sine_G))
    J = jacobi_apply(sine_G, sigma, geo=geo)
    D = mean_curvature_derivative(sine_G, sigma, 1e-6)
    assert vector_norm(D - J, S21).max() <= 0.25 * sine_G.spec.h**2 * vector_norm(J, S21).max()


def test_operator_matches_apply(sine_G):
    op = jacobi_operator(sine_G)
    geo = geometry(sine_G)
    nu = op.meta["frame"]
    c = bump_coeffs(sine_G, 3)
    direct = section_to_frame(nu, jacobi_apply(sine_G, frame_to_section(nu, c), geo=geo), geo.diag)
    assert np.abs(op @ c.ravel() - direct.ravel()).max() < 1e-10 * np.abs(direct).max()


def test_self_adjoint_on_compact_sections():
    rel = []
    for n, m in ((33, 0.15), (65, 0.05)):
        G = solve_maximal(boundary_from_circle_diffeo(sine_diffeo(), 256), n, margin=m, chart=ads_chart())
        op = jacobi_operator(G)
        w = op.meta["weights"]
        s, t = bump_coeffs(G, 4).ravel(), bump_coeffs(G, 5).ravel()
        a, b = (w * (op @ s)) @ t, (w * (op @ t)) @ s
        rel.append(abs(a - b) / max(abs(a), abs(b)))
    assert rel[1] < rel[0] and rel[1] < 1e-3


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_random_sections_fd(seed):
    G = _coarse()
    geo = geometry(G)
    sigma = frame_to_section(normal_frame(G, geo), bump_coeffs(G, seed))
    J = jacobi_apply(G, sigma, geo=geo)
    D = mean_curvature_derivative(G, sigma, 1e-6)
    assert vector_norm(D - J, S21).max() <= G.spec.h**2 * vector_norm(J, S21).max()


_CACHE = {}


def _coarse():
    if "G" not in _CACHE:
        _CACHE["G"] = solve_maximal(boundary_from_circle_diffeo(sine_diffeo(), 256), 33, margin=0.15, chart=ads_chart())
    return _CACHE["G"]

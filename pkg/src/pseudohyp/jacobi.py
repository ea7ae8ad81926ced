"""Linearized mean curvature of a discrete graph under normal perturbations."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import NotNormal
from .grid import Geometry, SpacelikeGraphGrid, bdot, geometry
from .operators import DiscreteOperator
from .plateau import tangent_basis


def _coupling(geo: Geometry, II, sigma):
    # 2 g^{ik} g^{jl} b(II_ij, sigma) II_kl
    bs = np.einsum("nijd,nd,d->nij", II, sigma, geo.diag)
    return 2 * np.einsum("nik,njl,nij,nkld->nd", geo.ginv, geo.ginv, bs, II)


def normality_defect(geo: Geometry, sigma):
    """Largest |b(sigma, F)|, |b(sigma, d_i F)| relative to the size of sigma."""
    d = geo.diag
    a = np.abs(bdot(sigma, geo.F, d))
    t = np.abs(np.einsum("nd,nid,d->ni", sigma, geo.dF, d)).max(1)
    scale = np.sqrt(np.abs(bdot(sigma, sigma, d))).max()
    return float(max(a.max(), t.max()) / scale) if scale > 0 else 0.0


def _apply(G: SpacelikeGraphGrid, geo: Geometry, II, sigma):
    S = np.zeros((G.spec.n**G.p, G.sig.dim), dtype=sigma.dtype)
    S[G.spec.interior] = sigma
    lap = geo.laplace_beltrami(S)
    return geo.normal_project(lap) - G.p * sigma + _coupling(geo, II, sigma)


def jacobi_apply(G: SpacelikeGraphGrid, sigma, tol: float = 1e-8, geo: Geometry | None = None):
    """J sigma = (Delta_g sigma)^N - p sigma + 2 <II, sigma> II at interior nodes.

    ``sigma`` holds chart-coordinate normal vectors per interior node and is
    taken to vanish on the pinned ring.
    """
    geo = geo or geometry(G)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != geo.F.shape:
        raise NotNormal(f"section has shape {sigma.shape}, expected {geo.F.shape}")
    defect = normality_defect(geo, sigma)
    if defect > tol:
        raise NotNormal(f"section is not normal (relative defect {defect:.2e})")
    return _apply(G, geo, geo.second_fundamental_form(), sigma)


def normal_frame(G: SpacelikeGraphGrid, geo: Geometry | None = None):
    """(N_int, q, dim) normal frame with -b(nu_k, nu_l) = delta_kl.

    Built from the vertical directions of the chart, projected and then
    symmetrically orthonormalized, so it varies smoothly between nodes.
    """
    geo = geo or geometry(G, need_laplacian=False)
    p, q = G.p, G.q
    W = G.values[G.spec.interior]
    T = tangent_basis(W)  # (N, q, q+1)
    u2 = (G.spec.U[G.spec.interior] ** 2).sum(1)
    f = (1 + u2) / (1 - u2)
    lift = np.zeros((len(W), q, G.sig.dim))
    lift[:, :, p:] = f[:, None, None] * T
    P = geo.normal_project(lift)
    M = -np.einsum("nkd,nld,d->nkl", P, P, geo.diag)
    ev, vec = np.linalg.eigh(M)
    inv_sqrt = np.einsum("nij,nj,nkj->nik", vec, 1 / np.sqrt(ev), vec)
    return np.einsum("nkl,nld->nkd", inv_sqrt, P)


def frame_to_section(frame, coeffs):
    return np.einsum("nk,nkd->nd", np.asarray(coeffs).reshape(frame.shape[0], -1), frame)


def section_to_frame(frame, sigma, diag):
    return -np.einsum("nd,nkd,d->nk", sigma, frame, diag)


def jacobi_operator(G: SpacelikeGraphGrid) -> DiscreteOperator:
    """Sparse matrix of J in normal-frame coordinates, unknowns ordered (node, k).

    Assembled by probing: one application per (stencil color, frame index).
    The volume weights in ``meta`` give the inner product in which J is
    self-adjoint up to discretization error.
    """
    geo = geometry(G)
    II = geo.second_fundamental_form()
    nu = normal_frame(G, geo)
    spec, q = G.spec, G.q
    N = spec.n_interior
    color = spec.color_of
    rows, cols, vals = [], [], []
    for c in range(len(spec.colors)):
        col_node = spec.color_columns[c]
        on = color == c
        for k in range(q):
            coeff = np.zeros((N, q))
            coeff[on, k] = 1.0
            Js = _apply(G, geo, II, frame_to_section(nu, coeff))
            out = section_to_frame(nu, Js, geo.diag)  # (N, q)
            valid = col_node >= 0
            for l in range(q):
                rows.append(np.flatnonzero(valid) * q + l)
                cols.append(col_node[valid] * q + k)
                vals.append(out[valid, l])
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * q, N * q)
    )
    A.eliminate_zeros()
    dvol = np.sqrt(np.linalg.det(geo.g)) * spec.h**spec.p
    return DiscreteOperator(A, {"frame": nu, "weights": np.repeat(dvol, q), "q": q})


def normal_variation(F, sigma, t, diag):
    """Move F along the normal geodesic cos(t|s|) F + sin(t|s|) s/|s|."""
    s = np.sqrt(np.maximum(-bdot(sigma, sigma, diag), 0.0))
    safe = np.where(s > 0, s, 1.0)
    return np.cos(t * s)[:, None] * F + (np.sin(t * s) / safe)[:, None] * sigma


def mean_curvature_derivative(G: SpacelikeGraphGrid, sigma, t: float = 1e-6):
    """Central difference of the mean curvature along the normal variation, projected normally."""
    from .grid import mean_curvature

    geo = geometry(G)
    F_full = G.embedding()
    S = np.zeros_like(F_full)
    S[G.spec.interior] = sigma
    act = G.spec.active
    Fp, Fm = F_full.copy(), F_full.copy()
    Fp[act] = normal_variation(F_full[act], S[act], t, geo.diag)
    Fm[act] = normal_variation(F_full[act], S[act], -t, geo.diag)
    Hp = mean_curvature(G, "laplacian", Fp)
    Hm = mean_curvature(G, "laplacian", Fm)
    return geo.normal_project((Hp - Hm) / (2 * t))

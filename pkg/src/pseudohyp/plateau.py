"""Newton continuation for maximal graphs with prescribed asymptotic boundary."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve
from scipy.spatial import ConvexHull

from .charts import FermiChart, fermi_coords
from .core import Signature
from .errors import (
    InvalidParameter,
    NewtonDivergence,
    NotAdmissible,
    SpacelikeLost,
)
from .grid import Geometry, GridSpec, SpacelikeGraphGrid, bdot, spacelike_margin
from .spheres import LipschitzSphereMap, classify_sphere, hemisphere_center, shrink_family

log = logging.getLogger(__name__)

CSTEP = 1e-30


@dataclass(frozen=True)
class SolverParams:
    tol_H: float = 1e-8
    max_newton: int = 30
    t_step: float = 0.1
    t_floor: float = 1e-3
    armijo: float = 1e-4
    max_halvings: int = 12
    extension: str = "auto"


# -- boundary interpolation and Dirichlet data ------------------------------


class BoundaryInterpolant:
    """Evaluate a sampled boundary map off its mesh vertices."""

    def __init__(self, phi: LipschitzSphereMap):
        self.phi = phi
        V, W = phi.mesh.vertices, phi.values
        if phi.p == 2:
            ang = np.arctan2(V[:, 1], V[:, 0])
            order = np.argsort(ang)
            a = ang[order]
            vals = W[order]
            self.spline = CubicSpline(
                np.append(a, a[0] + 2 * np.pi), np.vstack([vals, vals[:1]]), bc_type="periodic"
            )
        else:
            hull = ConvexHull(V)
            self.faces = hull.simplices
            self.face_inv = np.linalg.inv(V[self.faces].transpose(0, 2, 1))

    def raw(self, theta, nu=0):
        """Unnormalized interpolant (and derivatives for p = 2) at directions theta."""
        theta = np.atleast_2d(theta)
        if self.phi.p == 2:
            ang = np.arctan2(theta[:, 1], theta[:, 0])
            return self.spline(ang, nu)
        if nu:
            raise InvalidParameter("derivatives are only available for p = 2")
        lam = np.einsum("fij,qj->qfi", self.face_inv, theta)
        face = np.argmax(lam.min(axis=2), axis=1)
        coef = lam[np.arange(len(theta)), face]
        coef = coef / coef.sum(1, keepdims=True)
        return np.einsum("qi,qid->qd", coef, self.phi.values[self.faces[face]])

    def __call__(self, theta):
        w = self.raw(theta)
        return w / np.linalg.norm(w, axis=1, keepdims=True)


def _radial_extension(interp, U):
    theta = U / np.linalg.norm(U, axis=1, keepdims=True)
    return interp(theta)


def plane_graph(normals, U, reference):
    """Graph values over ball points U of the totally geodesic plane normals^perp.

    ``normals`` (k, p+q+1) are chart-coordinate vectors spanning the b-orthogonal
    complement of the plane. Each w solves w . n_W = 2 u . n_U / (1 + |u|^2)
    on the unit sphere; of the two solutions the one nearer ``reference`` wins.
    Rows where the plane misses the fiber keep the reference value.
    """
    U = np.atleast_2d(U)
    p = U.shape[1]
    reference = np.atleast_2d(reference)
    out = np.array(reference, dtype=float)
    nU, nW = normals[:, :p], normals[:, p:]
    m = np.linalg.svd(nW)[2][-1]
    for k in range(len(U)):
        cj = 2 * (nU @ U[k]) / (1 + U[k] @ U[k])
        wp, *_ = np.linalg.lstsq(nW, cj, rcond=None)
        rem = 1 - wp @ wp
        if rem < 0:
            continue
        cand = [wp + sgn * np.sqrt(rem) * m for sgn in (1, -1)]
        out[k] = max(cand, key=lambda w: w @ reference[k])
    return out


def _osculating_extension(interp: BoundaryInterpolant, U):
    """Fill pinned nodes from the totally geodesic plane osculating the boundary curve.

    At each pinned node the plane is spanned by the boundary ray and its first
    two angular derivatives at the node's direction. Exact when the boundary
    itself bounds a totally geodesic plane.
    """
    ang = np.arctan2(U[:, 1], U[:, 0])
    c, s = np.cos(ang), np.sin(ang)
    w0, w1, w2 = interp.raw(U, 0), interp.raw(U, 1), interp.raw(U, 2)
    y0 = np.column_stack([c, s, w0])
    y1 = np.column_stack([-s, c, w1])
    y2 = np.column_stack([-c, -s, w2])
    out = _radial_extension(interp, U)
    d = np.concatenate([np.ones(2), -np.ones(w0.shape[1])])
    for k in range(len(U)):
        V = np.stack([y0[k], y1[k], y2[k]])
        # b-orthogonal complement of V: null space of V diag(d)
        _, sv, vt = np.linalg.svd(V * d)
        if sv[-1] < 1e-10 * sv[0]:
            continue
        out[k] = plane_graph(vt[3:], U[k], out[k])[0]
    return out


def dirichlet_data(phi: LipschitzSphereMap, U, method: str = "auto"):
    """Boundary-ring values of the graph for the pinned ball points U."""
    interp = BoundaryInterpolant(phi)
    if method == "auto":
        method = "osculating" if phi.p == 2 else "radial"
    if method == "radial":
        return _radial_extension(interp, U)
    if method == "osculating":
        if phi.p != 2:
            raise InvalidParameter("osculating extension needs p = 2")
        return _osculating_extension(interp, U)
    raise InvalidParameter(f"unknown extension {method!r}")


# -- Newton kernel ------------------------------------------------------------


def tangent_basis(W):
    """Orthonormal basis of w^perp per row, from a Householder reflection."""
    n, d = W.shape
    sgn = np.where(W[:, 0] >= 0, 1.0, -1.0)
    v = W.copy()
    v[:, 0] += sgn
    H = np.eye(d)[None] - 2 * v[:, :, None] * v[:, None, :] / (v * v).sum(1)[:, None, None]
    return H[:, 1:, :]  # rows 1..q are orthogonal to w


class _Problem:
    def __init__(self, spec: GridSpec, sig: Signature, W_full):
        self.spec, self.sig = spec, sig
        self.W = np.array(W_full, dtype=float)
        self.Wi = self.W[spec.interior]
        self.T = tangent_basis(self.Wi)

    def retract(self, a):
        Wi = self.Wi + np.einsum("nk,nkd->nd", a, self.T)
        Wi = Wi / np.sqrt((Wi * Wi).sum(1))[:, None]
        W = self.W.astype(Wi.dtype)
        W[self.spec.interior] = Wi
        return W

    def geometry(self, W_full, need_laplacian=False):
        return Geometry(self.spec, fermi_coords(self.spec.U, W_full), self.sig, need_laplacian)

    def residual(self, a):
        geo = self.geometry(self.retract(a))
        H = geo.mean_curvature_hessian()
        return np.einsum("nd,nkd->nk", H[:, self.sig.p :], self.T), geo, H

    def jacobian(self):
        spec, q = self.spec, self.sig.q
        N = spec.n_interior
        rows, cols, vals = [], [], []
        rows_base = np.arange(N)
        for c in range(len(spec.colors)):
            members = spec.color_of == c
            colnode = spec.color_columns[c]
            ok = colnode >= 0
            for l in range(q):
                a = np.zeros((N, q), dtype=complex)
                a[members, l] = 1j * CSTEP
                R = self.residual(a)[0].imag / CSTEP
                for k in range(q):
                    rows.append(rows_base[ok] * q + k)
                    cols.append(colnode[ok] * q + l)
                    vals.append(R[ok, k])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * q, N * q)
        )


def sup_mean_curvature(spec, sig, W_full):
    geo = Geometry(spec, fermi_coords(spec.U, W_full), sig, need_laplacian=False)
    H = geo.mean_curvature_hessian()
    return float(np.sqrt(np.abs(bdot(H, H, sig.diag))).max()), geo


def newton_solve(spec, sig, W_full, params: SolverParams):
    """Damped Newton on the pinned-ring Dirichlet problem; returns (W, iterations)."""
    W = np.array(W_full, dtype=float)
    hist = []
    for it in range(params.max_newton + 1):
        hsup, geo = sup_mean_curvature(spec, sig, W)
        hist.append(hsup)
        if hsup < params.tol_H:
            return W, it, hist
        if it == params.max_newton:
            break
        prob = _Problem(spec, sig, W)
        floor = min(spec.h**2, 0.5 * spacelike_margin(spec, geo).min())
        R0 = prob.residual(np.zeros((spec.n_interior, sig.q)))[0]
        J = prob.jacobian()
        step = spsolve(J.tocsc(), -R0.ravel()).reshape(R0.shape)
        if not np.all(np.isfinite(step)):
            raise NewtonDivergence("singular Newton system", residual=hsup)
        f0 = 0.5 * (R0**2).sum()
        s, lost = 1.0, False
        for _ in range(params.max_halvings):
            Wn = prob.retract(s * step)
            Rn, geo_n, _ = prob.residual(s * step)
            if spacelike_margin(spec, geo_n).min() <= floor:
                lost = True
            elif 0.5 * (Rn**2).sum() <= (1 - 2 * params.armijo * s) * f0:
                break
            s *= 0.5
        else:
            if lost:
                raise SpacelikeLost("every damped step left the spacelike region")
            raise NewtonDivergence("line search failed", residual=hsup)
        W = Wn
        log.debug("newton it=%d |H|=%.3e step=%.3g", it, hsup, s)
    raise NewtonDivergence(f"no convergence in {params.max_newton} iterations", residual=hist[-1])


def _initial_values(spec, q1, fill):
    W = np.full((spec.n**spec.p, q1), np.nan)
    W[spec.active] = fill
    return W


def solve_maximal(
    phi: LipschitzSphereMap,
    n: int = 65,
    margin: float = 0.05,
    params: SolverParams | None = None,
    chart: FermiChart | None = None,
    schedule=None,
    **overrides,
) -> SpacelikeGraphGrid:
    """Maximal graph with asymptotic boundary phi, by continuation t: 1 -> 0.

    ``schedule`` may supply an explicit increasing list of continuation
    targets (values of 1 - t); otherwise uniform steps of ``t_step`` are used
    with bisection on failure.
    """
    params = params or SolverParams()
    if overrides:
        params = SolverParams(**{**params.__dict__, **overrides})
    cls = classify_sphere(phi)
    if not cls.admissible:
        raise NotAdmissible(f"boundary classified {cls.tag}", worst_pair=cls.worst_pair)
    sig = phi.sig
    chart = chart or FermiChart.standard(sig)
    spec = GridSpec(phi.p, n, margin)
    center = hemisphere_center(phi)
    Upin = spec.U[spec.pinned]

    def data(t):
        return dirichlet_data(shrink_family(phi, t, center), Upin, params.extension)

    W = _initial_values(spec, sig.q + 1, center)
    W[spec.pinned] = data(1.0)
    Uact = spec.U[spec.interior]
    rad = np.linalg.norm(Uact, axis=1)
    theta = Uact / np.where(rad > 0, rad, 1.0)[:, None]
    theta[rad == 0] = np.eye(phi.p)[0]
    ramp = (rad / spec.rho)[:, None] ** 2

    def interior_guess(Wprev, t_old, t_new):
        # carry the change of boundary data inward so the first Newton iterate stays spacelike
        old = BoundaryInterpolant(shrink_family(phi, t_old, center))(theta)
        new = BoundaryInterpolant(shrink_family(phi, t_new, center))(theta)
        Wi = Wprev[spec.interior] + ramp * (new - old)
        return Wi / np.linalg.norm(Wi, axis=1, keepdims=True)
    total_it, steps = 0, []
    done = 0.0  # progress 1 - t
    targets = list(schedule) if schedule is not None else None
    dt = params.t_step
    while done < 1.0:
        if targets is not None:
            nxt = targets.pop(0) if targets else 1.0
        else:
            nxt = min(1.0, done + dt)
            if 1.0 - nxt < 1e-9:
                nxt = 1.0
        trial = W.copy()
        trial[spec.pinned] = data(1.0 - nxt)
        trial[spec.interior] = interior_guess(W, 1.0 - done, 1.0 - nxt)
        try:
            Wn, its, _ = newton_solve(spec, sig, trial, params)
        except (NewtonDivergence, SpacelikeLost, np.linalg.LinAlgError) as err:
            if targets is not None:
                raise
            dt = 0.5 * (nxt - done)
            if dt < params.t_floor:
                if isinstance(err, np.linalg.LinAlgError):
                    raise NewtonDivergence(str(err)) from err
                raise
            log.info("continuation step to %.4f failed (%s); bisecting", nxt, err)
            continue
        W, done = Wn, nxt
        total_it += its
        steps.append((1.0 - nxt, its))
        if targets is None:
            dt = min(params.t_step, 2 * dt)
    hsup, geo = sup_mean_curvature(spec, sig, W)
    if spacelike_margin(spec, geo).min() <= spec.h**2:
        raise SpacelikeLost("converged iterate is not spacelike")
    info = dict(newton_iterations=total_it, continuation=steps, sup_H=hsup, tol_H=params.tol_H)
    return SpacelikeGraphGrid(chart, spec, W, phi, info)


def graph_from_function(chart, spec, fn, boundary=None):
    """Grid map from a callable u -> w (rows), evaluated on the active nodes."""
    W = _initial_values(spec, chart.sig.q + 1, 0.0)
    vals = np.asarray(fn(spec.U[spec.active]), dtype=float)
    W[spec.active] = vals / np.linalg.norm(vals, axis=1, keepdims=True)
    return SpacelikeGraphGrid(chart, spec, W, boundary)

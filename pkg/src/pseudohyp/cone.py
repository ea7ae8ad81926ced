"""Cones over links in the pseudosphere, their Jacobi operator in polar form and decay tools.

A cone with vertex x0 over a link X in {b(v, v) = 1, b(v, x0) = 0} is the
image of (v, r) -> cosh(r) x0 + sinh(r) v.  Everything here is expressed in
the coordinates the boundary map was given in (usually a Fermi chart, which
is b-orthonormal, so the formulas are unchanged).

Link geometry, the polar Jacobi operator and graphs over cones are
implemented for circle links (p = 2); the algebraic tools work for any p.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_bvp
from scipy.interpolate import RectBivariateSpline

from .charts import PolarChart, fermi_inverse_coords
from .core import Signature
from .errors import (
    HypothesisViolated,
    InvalidParameter,
    LinkNotSpacelike,
    OutsidePolarDomain,
    ProjectionFailed,
)
from .grid import SpacelikeGraphGrid, bdot
from .operators import DiscreteOperator
from .plateau import dirichlet_data, tangent_basis
from .spheres import LipschitzSphereMap, SphereMesh

DENSE_LIMIT = 5000


@dataclass(frozen=True)
class ConeModel:
    chart: PolarChart
    mesh: SphereMesh
    link: np.ndarray = field(repr=False)  # (n_link, dim)
    r: np.ndarray = field(repr=False)

    def __post_init__(self):
        V = np.asarray(self.link, dtype=float)
        x0 = self.chart.x0.coords
        d = self.sig.diag
        if np.abs(bdot(V, V, d) - 1).max() > 1e-10 or np.abs(bdot(V, x0, d)).max() > 1e-10:
            raise InvalidParameter("link vertices must satisfy b(v, v) = 1 and b(v, x0) = 0")
        r = np.asarray(self.r, dtype=float)
        if r[0] <= 0 or r[-1] <= r[0] or np.any(np.diff(r) <= 0):
            raise InvalidParameter("radial grid must be increasing with r0 > 0")
        V.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "link", V)
        object.__setattr__(self, "r", r)

    @property
    def sig(self) -> Signature:
        return self.chart.sig

    @property
    def p(self) -> int:
        return self.sig.p

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    def with_radii(self, r0=None, R=None, m=None):
        r0 = self.r[0] if r0 is None else r0
        R = self.r[-1] if R is None else R
        m = len(self.r) if m is None else m
        return ConeModel(self.chart, self.mesh, self.link, np.linspace(r0, R, m))


def _circle_order(mesh: SphereMesh):
    ang = np.mod(np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0]), 2 * np.pi)
    order = np.argsort(ang)
    a = ang[order]
    n = len(a)
    if np.abs(np.diff(a) - 2 * np.pi / n).max() > 1e-9:
        raise InvalidParameter("circle links need a uniform circle mesh")
    return order, a


def cone_from_boundary(phi: LipschitzSphereMap, chart: PolarChart, r0=1.0, R=8.0, m=128) -> ConeModel:
    """Cone with vertex chart.x0 over the boundary rays of phi."""
    Y = phi.boundary_coords()
    x0 = chart.x0.coords
    if len(x0) != Y.shape[1]:
        raise InvalidParameter("chart and boundary map live in different dimensions")
    c = -bdot(Y, x0, chart.sig.diag)
    if np.any(c <= 0):
        bad = int(np.argmin(c))
        raise OutsidePolarDomain(f"boundary ray {bad} has b(y, x0) = {-c[bad]:.3g} >= 0")
    V = Y / c[:, None] - x0
    mesh = phi.mesh
    if phi.p == 2:
        order, _ = _circle_order(mesh)
        mesh = SphereMesh(mesh.vertices[order], mesh.edges, mesh.antipode, mesh.lengths)
        if not np.array_equal(order, np.arange(len(order))):
            # rebuild connectivity for the sorted vertex order
            from .spheres import circle_mesh

            mesh = circle_mesh(len(order))
        V = V[order]
    return ConeModel(chart, mesh, V, np.linspace(r0, R, m))


def cone_point(C: ConeModel, v, r):
    x0 = C.chart.x0.coords
    return np.cosh(r)[..., None] * x0 + np.sinh(r)[..., None] * v


# ---------------------------------------------------------------------------
# circle links


def _spectral_derivatives(V):
    n = len(V)
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        k1 = k.copy()
        k1[n // 2] = 0.0
    else:
        k1 = k
    Vh = np.fft.fft(V, axis=0)
    d1 = np.fft.ifft(1j * k1[:, None] * Vh, axis=0).real
    d2 = np.fft.ifft(-(k**2)[:, None] * Vh, axis=0).real
    return d1, d2


def link_curve(C: ConeModel, psi):
    """Trigonometric interpolant of the link, pushed back onto the pseudosphere.

    Complex ``psi`` is allowed (for complex-step derivatives).
    """
    V = C.link
    n = len(V)
    k = np.fft.fftfreq(n, 1.0 / n)
    Vh = np.fft.fft(V, axis=0) / n
    if n % 2 == 0:
        # split the Nyquist mode symmetrically so the interpolant is real
        Vh = Vh.copy()
        nyq = Vh[n // 2].copy()
        Vh[n // 2] = nyq / 2
        Vh = np.vstack([Vh, nyq[None] / 2])
        k = np.append(k, n // 2)
        k[n // 2] = -n // 2
    # real cos/sin form, analytic in psi so complex steps work
    psi = np.asarray(psi)
    ang = psi[..., None] * k
    v = np.cos(ang) @ Vh.real - np.sin(ang) @ Vh.imag
    x0 = C.chart.x0.coords
    d = C.sig.diag
    v = v + bdot(v, x0, d)[..., None] * x0
    return v / np.sqrt(bdot(v, v, d))[..., None]


@dataclass
class ConeGeometry:
    """Link data on the uniform angle grid together with the radial scalings.

    Vectors are ambient. The cone's second fundamental form at radius r is
    sinh(r) times the link's (as ambient vectors); under the identification
    of normal spaces by radial projection this is the link's form itself.
    """

    psi: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    ddv: np.ndarray
    g_link: np.ndarray
    II_link: np.ndarray
    H_link: np.ndarray
    frame: np.ndarray
    diag: np.ndarray = field(repr=False)

    def metric(self, r):
        """(n_link, 2, 2) cone metric in (psi, r) coordinates."""
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape + self.g_link.shape + (2, 2))
        out[..., 0, 0] = np.sinh(r)[..., None] ** 2 * self.g_link
        out[..., 1, 1] = 1.0
        return out

    def II_cone(self, r):
        return np.sinh(r) * self.II_link

    def H_cone(self, r):
        """Mean curvature as an ambient vector: H_link / sinh(r)."""
        return self.H_link / np.sinh(r)

    def H_identified(self, r):
        """Mean curvature after radial projection onto the link normals: H_link / sinh(r)^2."""
        return self.H_cone(r) / np.sinh(r)

    def norm_II_link(self):
        return np.sqrt(np.maximum(-bdot(self.II_link, self.II_link, self.diag), 0.0)) / self.g_link

    def norm_II_cone(self, r):
        """||II|| of the cone in its own metric: ||II_link|| / sinh(r)."""
        return self.norm_II_link() / np.sinh(r)


def _normal_project(vecs, frame_vecs, diag):
    gram = np.einsum("nad,nbd,d->nab", frame_vecs, frame_vecs, diag)
    bv = np.einsum("n...d,nad,d->n...a", vecs, frame_vecs, diag)
    coeff = np.einsum("nab,n...b->n...a", np.linalg.inv(gram), bv)
    return vecs - np.einsum("n...a,nad->n...d", coeff, frame_vecs)


def _parallel_normal_frame(cand, tangent_frame, diag, q):
    """Smooth orthonormal frame of the normal spaces along a closed curve.

    ``cand`` holds projected coordinate axes per node, ``tangent_frame`` the
    vectors spanning each normal space's complement. The first frame comes
    from an eigen-decomposition, later ones by projected transport, and the
    closing holonomy is spread evenly along the curve.
    """
    n, dim = cand.shape[0], cand.shape[-1]

    def lowdin(X):
        M = -np.einsum("kd,ld,d->kl", X, X, diag)
        ev, U = np.linalg.eigh(M)
        if ev.min() <= 1e-14:
            raise LinkNotSpacelike("normal space degenerates along the link")
        return (U / np.sqrt(ev)) @ U.T @ X

    M = -np.einsum("kd,ld,d->kl", cand[0], cand[0], diag)
    ev, U = np.linalg.eigh(M)
    X = (U[:, -q:].T @ cand[0]) / np.sqrt(ev[-q:])[:, None]
    frames = np.empty((n, q, dim))
    frames[0] = X
    for j in range(1, n + 1):
        Y = _normal_project(frames[j - 1][None], tangent_frame[j % n][None], diag)[0]
        Y = lowdin(Y)
        if j < n:
            frames[j] = Y
    hol = -np.einsum("kd,ld,d->kl", Y, frames[0], diag)  # Y = hol @ frames[0]
    if np.linalg.det(hol) < 0:
        raise LinkNotSpacelike("normal bundle of the link is not orientable")
    logR = np.real(sla.logm(hol))
    for j in range(n):
        frames[j] = sla.expm(-logR * j / n) @ frames[j]
    return frames


def cone_geometry(C: ConeModel) -> ConeGeometry:
    if C.p != 2:
        raise InvalidParameter("cone geometry is implemented for circle links (p = 2)")
    d = C.sig.diag
    n = len(C.link)
    psi = 2 * np.pi * np.arange(n) / n
    v = C.link
    dv, ddv = _spectral_derivatives(v)
    g = bdot(dv, dv, d)
    if np.any(g <= 0):
        raise LinkNotSpacelike(f"link is not spacelike at {int(np.sum(g <= 0))} vertex(es)")
    x0 = np.broadcast_to(C.chart.x0.coords, v.shape)
    tangent_frame = np.stack([x0, v, dv], axis=1)
    II = _normal_project(ddv, tangent_frame, d)
    q = C.sig.q
    cand = _normal_project(np.broadcast_to(np.eye(len(d)), (n, len(d), len(d))), tangent_frame, d)
    frame = _parallel_normal_frame(cand, tangent_frame, d, q)
    return ConeGeometry(psi, v, dv, ddv, g, II, II / g[:, None], frame, d)


def surface_mean_curvature(points_fn, psi, r, sig: Signature, h=1e-3):
    """Mean curvature of a parametrized surface (psi, r) -> points, by central differences."""
    d = sig.diag
    F = points_fn(psi, r)
    Fp, Fm = points_fn(psi + h, r), points_fn(psi - h, r)
    Fq, Fn_ = points_fn(psi, r + h), points_fn(psi, r - h)
    Fpq, Fpm = points_fn(psi + h, r + h), points_fn(psi + h, r - h)
    Fmq, Fmm = points_fn(psi - h, r + h), points_fn(psi - h, r - h)
    d1 = np.stack([(Fp - Fm) / (2 * h), (Fq - Fn_) / (2 * h)], axis=-2)
    d2 = np.empty(F.shape[:-1] + (2, 2, F.shape[-1]))
    d2[..., 0, 0, :] = (Fp - 2 * F + Fm) / h**2
    d2[..., 1, 1, :] = (Fq - 2 * F + Fn_) / h**2
    d2[..., 0, 1, :] = d2[..., 1, 0, :] = (Fpq - Fpm - Fmq + Fmm) / (4 * h * h)
    g = np.einsum("...id,...jd,d->...ij", d1, d1, d)
    tr = np.einsum("...ij,...ijd->...d", np.linalg.inv(g), d2)
    E = np.concatenate([F[..., None, :], d1], axis=-2)
    flat = E.reshape(-1, 3, F.shape[-1])
    return _normal_project(tr.reshape(-1, F.shape[-1]), flat, d).reshape(tr.shape)


def pullback_metric(points_fn, psi, r, sig: Signature, h=1e-4):
    """Central-difference pull-back of b in (psi, r) coordinates."""
    d = sig.diag
    dpsi = (points_fn(psi + h, r) - points_fn(psi - h, r)) / (2 * h)
    drr = (points_fn(psi, r + h) - points_fn(psi, r - h)) / (2 * h)
    D = np.stack([dpsi, drr], axis=-2)
    return np.einsum("...id,...jd,d->...ij", D, D, d)


def link_metric(C: ConeModel, psi):
    """b(v', v') of the link interpolant, by complex-step differentiation."""
    eps = 1e-30
    dv = link_curve(C, np.asarray(psi) + 1j * eps).imag / eps
    return bdot(dv, dv, C.sig.diag)


# ---------------------------------------------------------------------------
# indicial analysis


@dataclass(frozen=True)
class IndicialData:
    p: int
    omega: float
    P_inf_coeffs: tuple
    roots: tuple
    sobolev_window_ok: bool
    holder_window_ok: bool

    def P(self, r, xi):
        """Radial symbol xi^2 + (p-1) coth(r) xi - p."""
        return xi**2 + (self.p - 1) * xi / np.tanh(r) - self.p

    def P_inf(self, xi):
        return xi**2 + (self.p - 1) * xi - self.p


def indicial_polynomial(p: int, omega: float = 0.0) -> IndicialData:
    if p < 2:
        raise InvalidParameter("p must be at least 2")
    # xi^2 + (p-1) xi - p = (xi - 1)(xi + p)
    P_omega = omega**2 + (p - 1) * omega - p
    return IndicialData(
        p=p,
        omega=float(omega),
        P_inf_coeffs=(1, p - 1, -p),
        roots=(1, -p),
        sobolev_window_ok=bool(abs(omega) < np.sqrt(p)),  # squaring rounds at the endpoint
        holder_window_ok=bool(P_omega < 0),
    )


# ---------------------------------------------------------------------------
# polar Jacobi operator


def _angular_blocks(geo: ConeGeometry, q: int):
    """(Laplacian-in-frame, coupling) sparse blocks on the link, unknowns (j, k)."""
    n = len(geo.v)
    dpsi = 2 * np.pi / n
    d = geo.diag
    v = geo.v
    nxt = np.roll(np.arange(n), -1)
    prv = np.roll(np.arange(n), 1)
    dh = (v[nxt] - v) / dpsi
    gh = bdot(dh, dh, d)  # metric at j + 1/2
    sq = np.sqrt(geo.g_link)
    wp = 1 / (np.sqrt(gh) * sq * dpsi**2)
    wm = wp[prv]
    rows, cols, vals = [], [], []
    nu = geo.frame
    for nb, w in ((nxt, wp), (prv, wm), (np.arange(n), -(wp + wm))):
        # entry (j,k),(nb,l) = w * -b(nu_l(nb), nu_k(j))
        C = -np.einsum("jld,jkd,d->jkl", nu[nb], nu, d) * w[:, None, None]
        for k in range(q):
            for l in range(q):
                rows.append(np.arange(n) * q + k)
                cols.append(nb * q + l)
                vals.append(C[:, k, l])
    lap = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * q, n * q))
    c = np.einsum("jd,jkd,d->jk", geo.II_link, nu, d)
    K = -2 * np.einsum("j,jk,jl->jkl", 1 / geo.g_link**2, c, c)
    coup = sp.block_diag(list(K), format="csr")
    return lap, coup


def jacobi_polar_assemble(C: ConeModel, omega: float = 0.0, geo: ConeGeometry | None = None) -> DiscreteOperator:
    """Polar Jacobi operator of the cone on normal-frame coefficients.

    Unknowns sit at r_1..r_{m-1} (zero Dirichlet data at r_0), ordered
    (radius, link vertex, frame index). Rows at interior radii discretize
    sinh^-2(r) (Lap^N + coupling) + d_r^2 + (p-1) coth(r) d_r - p; the last row is
    the outflow closure d_r s + s = 0. For omega != 0 the operator is
    conjugated entrywise to e^{-omega r} L e^{omega r}.
    """
    geo = geo or cone_geometry(C)
    p, q = C.p, C.sig.q
    nl = len(C.link)
    blk = nl * q
    r = C.r
    dr = C.dr
    m = len(r) - 1  # unknown radii r[1:]
    lap, coup = _angular_blocks(geo, q)
    ang = (lap + coup).tocsr()
    I = sp.identity(blk, format="csr")
    rr = r[1:]
    diag_blocks, lo, up = [], [], []
    for i in range(m):
        ri = rr[i]
        if i == m - 1:
            diag_blocks.append((1 / dr + 1) * I)
            lo.append(-(1 / dr) * I)
            continue
        a = 1 / dr**2
        b = (p - 1) / np.tanh(ri) / (2 * dr)
        diag_blocks.append(ang / np.sinh(ri) ** 2 + (-2 * a - p) * I)
        lo.append((a - b) * I)
        up.append((a + b) * I)
    rows = []
    for i in range(m):
        row = [None] * m
        row[i] = diag_blocks[i]
        if i == m - 1:
            row[i - 1] = lo[-1]
        else:
            if i > 0:
                row[i - 1] = lo[i]
            if i < m - 1:
                row[i + 1] = up[i]
        rows.append(row)
    A = sp.bmat(rows, format="csr")
    if omega != 0.0:
        rnode = np.repeat(rr, blk)
        A = A.tocoo()
        A = sp.csr_matrix(
            (A.data * np.exp(omega * (rnode[A.col] - rnode[A.row])), (A.row, A.col)), shape=A.shape
        )
    A.eliminate_zeros()
    w = np.repeat(np.sinh(rr) ** (p - 1) * dr, blk) * np.tile(np.repeat(np.sqrt(geo.g_link) * 2 * np.pi / nl, q), m)
    return DiscreteOperator(A, {"omega": omega, "radii": rr, "block": blk, "q": q, "weights": w})


def smallest_singular_value(A, dense_limit: int = DENSE_LIMIT, tol=1e-8, maxiter=200, seed=0) -> float:
    A = sp.csc_matrix(A)
    if A.shape[0] <= dense_limit:
        return float(np.linalg.svd(A.toarray(), compute_uv=False)[-1])
    # inverse iteration on (A^T A)^{-1} through one sparse LU of A
    lu = spla.splu(A)
    x = np.random.default_rng(seed).standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        y = lu.solve(lu.solve(x, trans="T"))
        nrm = np.linalg.norm(y)
        x = y / nrm
        new = 1 / np.sqrt(nrm)
        if abs(new - est) <= tol * new:
            return float(new)
        est = new
    return float(est)


def weighted_invertibility_probe(C: ConeModel, omegas, geo: ConeGeometry | None = None, threads: int = 1) -> dict:
    """omega -> smallest singular value of the conjugated operator."""
    geo = geo or cone_geometry(C)
    omegas = [float(w) for w in omegas]

    def one(w):
        return smallest_singular_value(jacobi_polar_assemble(C, w, geo).matrix)

    if threads > 1 and len(omegas) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, omegas))
    else:
        vals = [one(w) for w in omegas]
    return dict(zip(omegas, vals))


def quadratic_form(op: DiscreteOperator, s) -> tuple:
    """(<L s, s>, <s, s>) in the cone volume inner product, closure row excluded."""
    w = op.meta["weights"].copy()
    w[-op.meta["block"] :] = 0.0
    Ls = op @ s
    return float((w * Ls * s).sum()), float((w * s * s).sum())


# ---------------------------------------------------------------------------
# ODE barrier bound


@dataclass(frozen=True)
class BarrierResult:
    bound_holds: bool
    C_used: float
    delta: float
    alpha: float
    tail_sup: float
    bound: float


def barrier_verify(a, b, A: float, x, u, delta: float | None = None, tol: float = 1e-6) -> BarrierResult:
    """Check sup_{x >= C} |u| <= A/delta + |u(C)| for P u = u'' + a u' + b u >= -A.

    ``a`` and ``b`` are callables. ``delta`` defaults to half of -b at the
    right end; C is the first sample from which P(x, xi) < -delta for all
    |xi| <= alpha, with alpha chosen from the limiting coefficients. The
    differential inequality may fail by ``tol * (1 + A)`` plus an estimate of
    the finite-difference truncation error.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if len(x) < 5 or np.any(np.diff(x) <= 0):
        raise InvalidParameter("need at least 5 increasing samples")
    ax, bx = np.asarray(a(x), float) * np.ones_like(x), np.asarray(b(x), float) * np.ones_like(x)
    b_inf, a_inf = bx[-1], abs(ax[-1])
    if delta is None:
        delta = -0.5 * b_inf
    if not (delta > 0 and b_inf < -delta + 1e-15 * abs(b_inf)):
        raise HypothesisViolated(f"P_inf(0) = {b_inf:.4g} is not below -delta = {-delta:.4g}", sample=len(x) - 1)
    # largest alpha with alpha^2 + |a_inf| alpha + b_inf <= -delta, halved for slack
    gap = -delta - b_inf
    alpha = 0.5 * (-a_inf + np.sqrt(a_inf**2 + 4 * gap)) / 2 if gap > 0 else 0.0
    Pmax = alpha**2 + alpha * np.abs(ax) + bx
    ok = Pmax <= -delta
    bad = np.flatnonzero(~ok)
    start = 0 if len(bad) == 0 else bad[-1] + 1
    if start >= len(x) - 2:
        raise HypothesisViolated("the symbol never settles below -delta on the samples", sample=int(start))
    # differential inequality at interior samples, with the finite-difference truncation allowed for
    h = np.diff(x)
    hl, hr = h[:-1], h[1:]
    upp = 2 * ((u[2:] - u[1:-1]) / hr - (u[1:-1] - u[:-2]) / hl) / (hl + hr)
    up = (u[2:] - u[:-2]) / (hl + hr)
    Pu = upp + ax[1:-1] * up + bx[1:-1] * u[1:-1]
    # truncation estimates h^2 |u4| / 12 (second difference) and h^2 |u3| / 6 (first difference)
    trunc = np.zeros_like(Pu)
    hm = hr[1:-1]
    d4 = np.abs(u[4:] - 4 * u[3:-1] + 6 * u[2:-2] - 4 * u[1:-3] + u[:-4]) / (12 * hm**2)
    d3 = np.abs(u[4:] - 2 * u[3:-1] + 2 * u[1:-3] - u[:-4]) / (12 * hm)
    trunc[1:-1] = d4 + np.abs(ax[2:-2]) * d3
    trunc[0], trunc[-1] = trunc[1], trunc[-2]
    slack = 2 * trunc + tol * (1 + A)
    idx = np.arange(1, len(x) - 1)
    viol = np.flatnonzero((idx >= start) & (Pu < -A - slack))
    if len(viol):
        k = int(idx[viol[0]])
        raise HypothesisViolated(f"P u = {Pu[viol[0]]:.4g} < -A at x = {x[k]:.4g}", sample=k)
    tail = float(np.abs(u[start:]).max())
    bound = A / delta + abs(u[start])
    return BarrierResult(bool(tail <= bound * (1 + 1e-12) + 1e-14), float(x[start]), float(delta), float(alpha), tail, float(bound))


def radial_ode_solution(p: int = 2, A: float = 1.0, x0: float = 0.5, X: float = 12.0, u0: float = 0.0, n: int = 400):
    """Bounded solution of u'' + (p-1) coth(x) u' - p u = -A with u(x0) = u0.

    Solved as a boundary value problem with u'(X) = 0 standing in for boundedness.
    """

    def rhs(x, y):
        return np.vstack([y[1], -A - (p - 1) / np.tanh(x) * y[1] + p * y[0]])

    def bc(ya, yb):
        return np.array([ya[0] - u0, yb[1]])

    xs = np.linspace(x0, X, n)
    guess = np.vstack([np.full_like(xs, A / p), np.zeros_like(xs)])
    sol = solve_bvp(rhs, bc, xs, guess, tol=1e-10, max_nodes=200000)
    if not sol.success:
        raise HypothesisViolated(f"radial ODE did not converge: {sol.message}", sample=None)
    return sol


# ---------------------------------------------------------------------------
# graphs over cones and weighted norms


@dataclass
class ConeSection:
    r: np.ndarray
    coeffs: np.ndarray  # (n_r, n_link, q) normal-frame coefficients
    sup_norm: np.ndarray
    decay_slope: float
    points: np.ndarray = field(repr=False, default=None)


def _graph_interpolant(G: SpacelikeGraphGrid):
    spec = G.spec
    if G.p != 2:
        raise InvalidParameter("graph interpolation over cones is implemented for p = 2")
    W = np.array(G.values)
    off = np.setdiff1d(np.arange(len(W)), spec.active)
    if G.boundary is None:
        raise InvalidParameter("graph has no boundary data to fill the outer grid")
    if len(off):
        W[off] = dirichlet_data(G.boundary, spec.U[off])
    axis = np.linspace(-spec.rho, spec.rho, spec.n)
    splines = [RectBivariateSpline(axis, axis, W[:, c].reshape(spec.n, spec.n)) for c in range(W.shape[1])]

    def evaluate(u):
        out = np.stack([s.ev(u[:, 0], u[:, 1]) for s in splines], axis=1)
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    return evaluate


def _exp_normal(base, frame, a, diag):
    s = np.sqrt((a**2).sum(-1))
    n = np.einsum("...k,...kd->...d", a, frame)
    safe = np.where(s > 0, s, 1.0)
    return np.cos(s)[..., None] * base + (np.sin(s) / safe)[..., None] * n


def graph_over_cone(G: SpacelikeGraphGrid, C: ConeModel, tol: float = 1e-12, max_iter: int = 40,
                    geo: ConeGeometry | None = None, fit_start: float = 0.5) -> ConeSection:
    """Normal offsets sigma(r, v) with Exp_{cone}(sigma) on G, for radii the grid reaches.

    The offsets are found by Newton's method along each normal fibre; the
    result must be a spacelike graph over the cone, otherwise the cone does
    not capture G there and ProjectionFailed is raised.
    """
    geo = geo or cone_geometry(C)
    d = C.sig.diag
    p, q = C.p, C.sig.q
    W_of = _graph_interpolant(G)
    rho = G.spec.rho - G.spec.h
    nl = len(C.link)
    nu = geo.frame
    coeffs, pts, radii = [], [], []
    a = np.zeros((nl, q))
    for r in C.r:
        base = cone_point(C, geo.v, np.full(nl, r))

        def resid(a):
            X = _exp_normal(base, nu, a, d)
            u, w = fermi_inverse_coords(X, p)
            Wu = W_of(u)
            T = tangent_basis(Wu)
            return np.einsum("nkd,nd->nk", T, w), u

        ok = False
        for _ in range(max_iter):
            R, u = resid(a)
            if np.abs(R).max() < tol:
                ok = True
                break
            eps = 1e-7
            J = np.empty((nl, q, q))
            for l in range(q):
                da = np.zeros_like(a)
                da[:, l] = eps
                J[:, :, l] = (resid(a + da)[0] - R) / eps
            try:
                step = np.linalg.solve(J, R[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
            a = a - step
            if not np.all(np.isfinite(a)):
                break
        if not ok:
            raise ProjectionFailed(f"normal fibres at r = {r:.4g} do not meet the graph")
        if np.linalg.norm(u, axis=1).max() >= rho:
            break  # beyond the computed grid
        if np.sqrt((a**2).sum(1)).max() >= np.pi / 2:
            raise ProjectionFailed(f"offsets at r = {r:.4g} leave the normal exponential chart")
        coeffs.append(a.copy())
        pts.append(_exp_normal(base, nu, a, d))
        radii.append(r)
    if len(radii) < 3:
        raise ProjectionFailed("grid does not reach three cone radii")
    coeffs = np.array(coeffs)
    pts = np.array(pts)
    radii = np.array(radii)
    _check_capture(pts, radii, d, p)
    sup = np.sqrt((coeffs**2).sum(-1)).max(1)
    sel = radii >= fit_start * radii[-1]
    good = sel & (sup > 0)
    slope = float(np.polyfit(radii[good], np.log(sup[good]), 1)[0]) if good.sum() >= 2 else float("nan")
    return ConeSection(radii, coeffs, sup, slope, pts)


def _check_capture(pts, radii, d, p):
    """The fibre intersections must form a spacelike graph that covers G without folding."""
    n = pts.shape[1]
    dpsi = 2 * np.pi / n
    Xp = (np.roll(pts, -1, axis=1) - np.roll(pts, 1, axis=1)) / (2 * dpsi)
    Xr = np.gradient(pts, radii, axis=0)
    g11 = bdot(Xp, Xp, d)
    g22 = bdot(Xr, Xr, d)
    g12 = bdot(Xp, Xr, d)
    det = g11 * g22 - g12**2
    bad = (g11 <= 0) | (det <= 0)
    if bad.any():
        i = int(np.flatnonzero(bad.any(1))[0])
        raise ProjectionFailed(f"graph over the cone is not spacelike at r = {radii[i]:.4g}; raise r0")
    u, _ = fermi_inverse_coords(pts, p)
    up = np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)
    ur = np.gradient(u, radii, axis=0)
    jac = up[..., 0] * ur[..., 1] - up[..., 1] * ur[..., 0]
    sgn = np.sign(jac)
    if sgn.min() != sgn.max():
        i = int(np.flatnonzero((sgn != np.sign(jac[-1, 0])).any(1))[0])
        raise ProjectionFailed(f"normal fibres fold over the graph near r = {radii[i]:.4g}; raise r0")


@dataclass(frozen=True)
class WeightedNormSpec:
    omega: float = 0.0
    order: int = 0
    flavor: str = "holder_sup"  # or "sobolev_l2"

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise InvalidParameter("weighted norms are implemented up to order 2")
        if self.flavor not in ("holder_sup", "sobolev_l2"):
            raise InvalidParameter(f"unknown flavor {self.flavor!r}")


def weighted_norm(coeffs, spec: WeightedNormSpec, C: ConeModel, r=None, geo: ConeGeometry | None = None) -> float:
    """Norm of e^{-omega r} sigma on the cone, sigma given by frame coefficients (n_r, n_link, q).

    Derivatives are coefficient derivatives (the frame is radially parallel),
    angular ones measured in the cone metric. The Hoelder flavor is the sup
    of the derivatives up to ``order``; the seminorm is not included.
    """
    s = np.asarray(coeffs, dtype=float)
    if s.ndim == 2:
        s = s[..., None]
    r = C.r if r is None else np.asarray(r, dtype=float)
    nl = s.shape[1]
    g_link = cone_geometry(C).g_link if geo is None else geo.g_link
    mu = np.exp(-spec.omega * r)[:, None, None] * s
    dpsi = 2 * np.pi / nl
    scale = (np.sinh(r)[:, None] * np.sqrt(g_link)[None, :])[..., None]
    terms = [mu**2]
    if spec.order >= 1:
        dpsi_mu = (np.roll(mu, -1, axis=1) - np.roll(mu, 1, axis=1)) / (2 * dpsi) / scale
        dr_mu = np.gradient(mu, r, axis=0)
        terms.append(dpsi_mu**2 + dr_mu**2)
        if spec.order == 2:
            drr = np.gradient(dr_mu, r, axis=0)
            dpp = (np.roll(mu, -1, axis=1) - 2 * mu + np.roll(mu, 1, axis=1)) / dpsi**2 / scale**2
            dpr = np.gradient(dpsi_mu, r, axis=0)
            terms.append(drr**2 + dpp**2 + 2 * dpr**2)
    dens = [t.sum(-1) for t in terms]
    if spec.flavor == "holder_sup":
        return float(max(np.sqrt(t).max() for t in dens))
    vol = (np.sinh(r) ** (C.p - 1))[:, None] * (np.sqrt(g_link) * dpsi)[None, :]
    total = sum(np.trapezoid(t * vol, r, axis=0).sum() for t in dens)
    return float(np.sqrt(total))

"""The (p, q) = (2, 1) case: 2x2 matrices, circle diffeomorphisms and Gauss maps.

Matrices are identified with R^{2,2} through
``[[t + x, y + s], [y - s, t - x]] <-> (x, y, t, s)`` so that
``-det = x^2 + y^2 - t^2 - s^2`` matches the package's sign ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, LinearNDInterpolator

from .charts import FermiChart
from .core import Signature
from .errors import InvalidParameter, NotElliptic, NotIncreasing, NotRankOne
from .curvature import curvature_report, polar_radius, _ring_radius
from .grid import Geometry, SpacelikeGraphGrid, geometry
from .jacobi import normal_frame
from .plateau import SolverParams, solve_maximal
from .spheres import LipschitzSphereMap, circle_mesh

ADS = Signature(2, 1)
J_MAT = np.array([[0.0, -1.0], [1.0, 0.0]])


def mat_to_vec(A):
    A = np.asarray(A, dtype=float)
    a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    return np.stack([(a - d) / 2, (b + c) / 2, (a + d) / 2, (b - c) / 2], axis=-1)


def vec_to_mat(v):
    v = np.asarray(v)
    x, y, t, s = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    return np.stack([np.stack([t + x, y + s], -1), np.stack([y - s, t - x], -1)], -2)


def adj(A):
    A = np.asarray(A)
    out = np.empty_like(A)
    out[..., 0, 0], out[..., 1, 1] = A[..., 1, 1], A[..., 0, 0]
    out[..., 0, 1], out[..., 1, 0] = -A[..., 0, 1], -A[..., 1, 0]
    return out


def ads_form(A1, A2):
    """-1/2 tr(A1 adj(A2)); equals -det(A) on the diagonal."""
    return -0.5 * np.trace(np.asarray(A1) @ adj(A2), axis1=-2, axis2=-1)


def ads_chart() -> FermiChart:
    """Fermi chart based at J whose horizontal plane is the traceless matrices.

    U frame: diag(1, -1) and [[0, 1], [1, 0]]; the vertical timelike direction
    is the identity. The identity diffeomorphism bounds the plane w = w0.
    """
    E = np.column_stack([
        mat_to_vec(np.diag([1.0, -1.0])),
        mat_to_vec(np.array([[0.0, 1.0], [1.0, 0.0]])),
        mat_to_vec(J_MAT),
        mat_to_vec(np.eye(2)),
    ])
    return FermiChart(ADS, E)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def xi(A, tol: float = 1e-10):
    """(image line, kernel line) of a rank-one matrix, as unit vectors."""
    A = np.asarray(A, dtype=float)
    scale = np.abs(A).max()
    if scale == 0 or abs(np.linalg.det(A)) > tol * scale**2:
        raise NotRankOne("matrix is not of rank one")
    U, s, Vt = np.linalg.svd(A)
    return U[:, 0], Vt[1]


def xi_inverse(x1, x2):
    """Rank-one matrix with image x1 and kernel x2, unit Frobenius norm."""
    v = _unit(x1)
    x2 = _unit(x2)
    k = np.array([-x2[1], x2[0]])
    return np.outer(v, k)


def same_line(a, b, tol=1e-10) -> bool:
    a, b = _unit(a), _unit(b)
    return abs(a[0] * b[1] - a[1] * b[0]) < tol


def line(theta):
    """Projective line with circle coordinate theta (lines double-cover angles)."""
    return np.stack([np.cos(np.asarray(theta) / 2), np.sin(np.asarray(theta) / 2)], axis=-1)


@dataclass(frozen=True)
class CircleDiffeo:
    """Samples of an increasing degree-one lift f of a circle map, on a uniform grid."""

    values: np.ndarray
    d1: np.ndarray = field(default=None, repr=False)
    d2: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        f = np.asarray(self.values, dtype=float)
        n = len(f)
        if n < 8:
            raise InvalidParameter("need at least 8 samples")
        steps = np.diff(np.append(f, f[0] + 2 * np.pi))
        if np.any(steps <= 0):
            raise NotIncreasing("samples are not strictly increasing mod 2 pi")
        if abs(steps.sum() - 2 * np.pi) > 1e-9:
            raise NotIncreasing("map does not have degree one")
        f.setflags(write=False)
        object.__setattr__(self, "values", f)

    @property
    def theta(self):
        return 2 * np.pi * np.arange(len(self.values)) / len(self.values)

    @classmethod
    def from_function(cls, fn, n: int = 1024, d1=None, d2=None):
        th = 2 * np.pi * np.arange(n) / n
        return cls(fn(th), None if d1 is None else d1(th), None if d2 is None else d2(th))

    def spline(self):
        th = np.append(self.theta, 2 * np.pi)
        lift = np.append(self.values - self.theta, self.values[0])
        return CubicSpline(th, lift, bc_type="periodic")

    def __call__(self, theta):
        return np.asarray(theta) + self.spline()(np.mod(theta, 2 * np.pi))


def identity_diffeo(n: int = 1024) -> CircleDiffeo:
    return CircleDiffeo.from_function(lambda t: t, n, lambda t: np.ones_like(t), np.zeros_like)


def mobius_diffeo(g, n: int = 1024) -> CircleDiffeo:
    """Circle map induced by g in SL(2, R) on lines, as a lift of theta."""
    g = np.asarray(g, dtype=float)
    if np.linalg.det(g) <= 0:
        raise InvalidParameter("g must have positive determinant")
    th = 2 * np.pi * np.arange(n) / n
    v = line(th) @ g.T
    ang = 2 * np.arctan2(v[:, 1], v[:, 0])
    lift = np.unwrap(ang)
    lift -= 2 * np.pi * np.floor(lift[0] / (2 * np.pi))
    return CircleDiffeo(lift)


def _oriented_reps(f: CircleDiffeo):
    th = f.theta
    A = np.einsum("ni,nj->nij", line(th), np.stack([-np.sin(f.values / 2), np.cos(f.values / 2)], -1))
    return A


def boundary_rays(f: CircleDiffeo, chart: FermiChart | None = None):
    """Chart coordinates of the boundary lift of graph(f).

    The representatives v(theta/2) k(f/2)^T form a closed continuous curve, so
    one global sign picks the lift; it is chosen with b(y, basepoint) < 0.
    """
    chart = chart or ads_chart()
    c = chart.to_chart(mat_to_vec(_oriented_reps(f)))
    return c if c[:, ADS.p].mean() > 0 else -c


def boundary_from_circle_diffeo(f: CircleDiffeo, n_mesh: int = 1024, chart: FermiChart | None = None):
    """Boundary sphere Xi^{-1}(graph f) as a map S^1 -> S^1 in the working chart."""
    c = boundary_rays(f, chart)
    w = c[:, 2:] / np.linalg.norm(c[:, 2:], axis=1, keepdims=True)
    psi = np.unwrap(np.arctan2(c[:, 1], c[:, 0]))
    if psi[-1] < psi[0]:
        psi, w = psi[::-1], w[::-1]
    if np.any(np.diff(psi) <= 0) or psi[-1] - psi[0] >= 2 * np.pi:
        raise NotIncreasing("boundary curve is not a graph over the chart circle")
    spl = CubicSpline(np.append(psi, psi[0] + 2 * np.pi), np.vstack([w, w[:1]]), bc_type="periodic")
    mesh = circle_mesh(n_mesh)
    ang = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
    return LipschitzSphereMap(mesh, spl(psi[0] + np.mod(ang - psi[0], 2 * np.pi)))


def fixed_point(g):
    """Fixed point in the upper half-plane of elliptic elements g (..., 2, 2)."""
    g = np.asarray(g, dtype=float)
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    disc = (d - a) ** 2 + 4 * b * c
    if np.any(disc >= 0):
        k = int(np.argmax(disc >= 0)) if np.ndim(disc) else 0
        raise NotElliptic(f"element {k} is not elliptic (discriminant {np.ravel(disc)[k]:.3g})")
    # root of c z^2 + (d - a) z - b with positive imaginary part
    return ((a - d) + 1j * np.sign(c) * np.sqrt(-disc)) / (2 * c)


def gauss_maps(A, N):
    """(Fix(N A^-1), Fix(A^-1 N)) in the upper half-plane."""
    A, N = np.asarray(A, dtype=float), np.asarray(N, dtype=float)
    Ainv = adj(A)  # det A = 1
    return fixed_point(N @ Ainv), fixed_point(Ainv @ N)


def to_disk(z):
    return (z - 1j) / (z + 1j)


def from_disk(w):
    return 1j * (1 + w) / (1 - w)


def line_to_upper(x):
    """Boundary point x/y of the upper half-plane for a line spanned by x."""
    x = np.asarray(x, dtype=float)
    return x[..., 0] / x[..., 1]


@dataclass
class SurfaceData:
    """Per-node Gauss-map data of a converged graph in the (2, 1) chart.

    ``J`` is rotation by +90 degrees for the coordinate orientation, so that
    pi_1 pulls the hyperbolic metric back to I((id - JB).,(id - JB).) and
    pi_2 to I((id + JB).,(id + JB).).
    """

    G: SpacelikeGraphGrid
    geo: Geometry = field(repr=False)
    A: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    z1: np.ndarray = field(repr=False)
    z2: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    dvol: np.ndarray = field(repr=False)

    @property
    def JB(self):
        return self.J @ self.B


def _rotation(g):
    sq = np.sqrt(np.linalg.det(g))
    return np.stack([np.stack([-g[:, 0, 1], -g[:, 1, 1]], -1), np.stack([g[:, 0, 0], g[:, 0, 1]], -1)], -2) / sq[:, None, None]


def surface_data(G: SpacelikeGraphGrid) -> SurfaceData:
    if (G.p, G.q) != (2, 1):
        raise InvalidParameter("Gauss maps need signature (2, 1)")
    geo = geometry(G, need_laplacian=False)
    nu = normal_frame(G, geo)[:, 0]
    A = vec_to_mat(G.chart.to_ambient(geo.F))
    N = vec_to_mat(G.chart.to_ambient(nu))
    z1, z2 = gauss_maps(A, N)
    II = geo.second_fundamental_form()
    h = -np.einsum("nijd,nd,d->nij", II, nu, geo.diag)
    h = 0.5 * (h + np.swapaxes(h, 1, 2))
    B = np.linalg.solve(geo.g, h)
    lam = np.sqrt(np.maximum(-np.linalg.det(B), 0.0))
    dvol = np.sqrt(np.linalg.det(geo.g)) * G.spec.h**2
    return SurfaceData(G, geo, A, N, z1, z2, B, _rotation(geo.g), lam, dvol)


def dilatation(lam):
    lam = np.asarray(lam, dtype=float)
    return ((1 + lam) / (1 - lam)) ** 2


def beltrami_abs(lam):
    lam = np.asarray(lam, dtype=float)
    return 2 * lam / (1 + lam**2)


@dataclass
class ExtensionReport:
    """Minimal Lagrangian extension F = pi_2 o pi_1^-1 and its distortion.

    Grid points are in the disk model; F values are in the upper half-plane.
    """

    grid: np.ndarray  # (M,) complex, disk model
    F: np.ndarray  # (M,) complex, upper half-plane
    lam: np.ndarray
    K: np.ndarray
    mu_abs: np.ndarray
    l2_mu: float
    a_ren: float
    nodes: dict = field(default_factory=dict, repr=False)

    @property
    def ratio(self) -> float:
        return self.l2_mu / self.a_ren if self.a_ren > 0 else 0.0

    def rows(self):
        return np.column_stack([self.grid.real, self.grid.imag, self.F.real, self.F.imag, self.lam, self.K, self.mu_abs])

    def summary(self):
        return {"l2_mu": self.l2_mu, "a_ren": self.a_ren, "l2_mu_over_a_ren": self.ratio,
                "sup_lambda": float(self.nodes["lam"].max()), "sup_mu_abs": float(self.nodes["mu_abs"].max())}


def minimal_lagrangian_extension(
    f: CircleDiffeo,
    n: int = 65,
    margin: float = 0.05,
    params: SolverParams | None = None,
    n_mesh: int = 1024,
    disk_n: int = 41,
    G: SpacelikeGraphGrid | None = None,
) -> ExtensionReport:
    """Solve the maximal surface bounded by graph(f) and resample F on a disk grid.

    pi_1^-1 is evaluated by barycentric interpolation on the triangulated
    image of pi_1; grid points outside that image are dropped.
    """
    if G is None:
        phi = boundary_from_circle_diffeo(f, n_mesh)
        G = solve_maximal(phi, n, margin=margin, params=params, chart=ads_chart())
    S = surface_data(G)
    lam = S.lam
    K = dilatation(lam)
    mu = beltrami_abs(lam)
    r = polar_radius(G)
    inside = r <= _ring_radius(G, None)
    l2_mu = float((mu**2 * (1 - lam**2) * S.dvol)[inside].sum())
    a_ren = curvature_report(G).renormalized_area
    w1 = to_disk(S.z1)
    ring = np.abs(w1).max()
    axis = np.linspace(-ring, ring, disk_n)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    pts = (X + 1j * Y).ravel()
    pts = pts[np.abs(pts) < ring]
    interp = LinearNDInterpolator(np.column_stack([w1.real, w1.imag]),
                                  np.column_stack([S.z2.real, S.z2.imag, lam]))
    vals = interp(np.column_stack([pts.real, pts.imag]))
    keep = np.all(np.isfinite(vals), axis=1)
    pts, vals = pts[keep], vals[keep]
    lg = vals[:, 2]
    nodes = dict(z1=S.z1, z2=S.z2, lam=lam, K=K, mu_abs=mu, dvol=S.dvol, G=G)
    return ExtensionReport(pts, vals[:, 0] + 1j * vals[:, 1], lg, dilatation(lg), beltrami_abs(lg), l2_mu, a_ren, nodes)


@dataclass(frozen=True)
class AreaCheck:
    defect: float  # max |det(id - JB) - det(id + JB)|
    det_defect: float  # max |det(id +- JB) - (1 - lambda^2)|
    fd_ratio_defect: float  # max |pi_2^* dA / pi_1^* dA - 1| from finite differences
    inner: float


def _node_derivative(G, z):
    spec = G.spec
    Z = np.full(spec.n**G.p, np.nan, dtype=complex)
    Z[spec.interior] = z
    return np.einsum("ik,nk->ni", spec.D1, Z[spec.nbr])


def _inner_mask(G, inner):
    spec = G.spec
    r = np.linalg.norm(spec.U[spec.interior], axis=1)
    return r <= inner * spec.rho


def area_preserving_check(G: SpacelikeGraphGrid, inner: float = 0.8, data: SurfaceData | None = None) -> AreaCheck:
    S = data or surface_data(G)
    I2 = np.eye(2)
    dm = np.linalg.det(I2 - S.JB)
    dp = np.linalg.det(I2 + S.JB)
    sel = _inner_mask(G, inner)

    def area(z):
        D = _node_derivative(G, z)
        jac = D[:, 0].real * D[:, 1].imag - D[:, 0].imag * D[:, 1].real
        return jac / z.imag**2

    ratio = area(S.z2)[sel] / area(S.z1)[sel]
    return AreaCheck(
        float(np.abs(dm - dp).max()),
        float(max(np.abs(dm - (1 - S.lam**2)).max(), np.abs(dp - (1 - S.lam**2)).max())),
        float(np.abs(ratio - 1).max()),
        inner,
    )


def pullback_check(G: SpacelikeGraphGrid, inner: float = 0.8, data: SurfaceData | None = None):
    """Relative sup errors of the finite-difference pull-backs of the hyperbolic metric."""
    S = data or surface_data(G)
    sel = _inner_mask(G, inner)
    out = []
    for z, sgn in ((S.z1, -1), (S.z2, 1)):
        D = _node_derivative(G, z)
        P = np.stack([D.real, D.imag], -2)
        pull = np.einsum("nai,naj->nij", P, P) / (z.imag**2)[:, None, None]
        M = np.eye(2) + sgn * S.JB
        pred = np.einsum("nki,nkl,nlj->nij", M, S.geo.g, M)
        out.append(float(np.abs(pull - pred)[sel].max() / np.abs(pred[sel]).max()))
    return tuple(out)


@dataclass(frozen=True)
class HopfCheck:
    antisymmetry: float  # algebraic Hopf(pi_1) + Hopf(pi_2)
    fd_antisymmetry: float  # same from traceless parts of finite-difference pull-backs
    cr_residual: float  # sup |div T|_g / sup |T|_g on the inner disk
    sup_hopf: float
    inner: float


def _traceless(T, g):
    tr = np.einsum("nij,nij->n", np.linalg.inv(g), T)
    return T - 0.5 * tr[:, None, None] * g


def hopf_check(G: SpacelikeGraphGrid, inner: float = 0.8, data: SurfaceData | None = None) -> HopfCheck:
    """Real parts -/+ I(2JB.,.) of the Hopf differentials and their holomorphicity.

    A traceless symmetric tensor is the real part of a holomorphic quadratic
    differential exactly when its divergence vanishes; the residual is that
    divergence, discretized by central differences.
    """
    S = data or surface_data(G)
    g = S.geo.g
    gJB = np.einsum("nij,njk->nik", g, S.JB)
    gJB = 0.5 * (gJB + np.swapaxes(gJB, 1, 2))
    T1, T2 = -2 * gJB, 2 * gJB
    anti = float(np.abs(T1 + T2).max())
    # pull-back traceless parts
    fd = []
    for z in (S.z1, S.z2):
        D = _node_derivative(G, z)
        P = np.stack([D.real, D.imag], -2)
        fd.append(_traceless(np.einsum("nai,naj->nij", P, P) / (z.imag**2)[:, None, None], g))
    sel = _inner_mask(G, inner)
    scale = np.abs(T1[sel]).max()
    fd_anti = float(np.abs(fd[0] + fd[1])[sel].max() / scale) if scale > 0 else float(np.abs(fd[0] + fd[1])[sel].max())
    cr, supT = _divergence_residual(G, T1, g, sel)
    return HopfCheck(anti, fd_anti, cr, supT, inner)


def _divergence_residual(G, T, g, sel):
    spec = G.spec
    ginv = np.linalg.inv(g)
    sq = np.sqrt(np.linalg.det(g))
    mixed = np.einsum("nik,nkj->nij", ginv, T)  # T^i_j
    upper = np.einsum("nik,nkl,njl->nij", ginv, T, ginv)  # T^{ij}
    full = np.full((spec.n**2,) + (2, 2), np.nan)

    def grad(field):
        F = full.copy()
        F[spec.interior] = field
        return np.einsum("ak,nkij->naij", spec.D1, F[spec.nbr])

    dS = grad(sq[:, None, None] * mixed)  # d_a (sqrt g T^i_j)
    dg = grad(g)  # d_a g_ij
    div = np.einsum("niij->nj", dS) / sq[:, None] - 0.5 * np.einsum("njik,nik->nj", dg, upper)
    ok = sel & np.all(np.isfinite(div), axis=1)
    nd = np.sqrt(np.einsum("nj,njk,nk->n", div, ginv, div))
    nT = np.sqrt(np.einsum("nij,nik,njl,nkl->n", T, ginv, ginv, T))
    supT = float(nT[ok].max())
    return (float(nd[ok].max() / supT) if supT > 0 else float(nd[ok].max())), supT


def boundary_attainment(G: SpacelikeGraphGrid, f: CircleDiffeo, data: SurfaceData | None = None, rings: int = 2) -> float:
    """Angular error between F and f on the outermost nodes, in the disk model.

    Near the boundary pi_1 approaches the image line and pi_2 the kernel
    line of the boundary ray, so F should carry the disk angle of line(theta)
    to that of line(f(theta)).
    """
    S = data or surface_data(G)
    spec = G.spec
    r = np.linalg.norm(spec.U[spec.interior], axis=1)
    outer = r >= spec.rho - rings * spec.h
    w1, w2 = to_disk(S.z1[outer]), to_disk(S.z2[outer])
    # line(theta) sits at disk angle -theta under z = x / y
    theta = np.mod(-np.angle(w1), 2 * np.pi)
    target = -f(theta)
    err = np.angle(np.exp(1j * (np.angle(w2) - target)))
    return float(np.abs(err).max())

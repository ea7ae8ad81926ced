"""Discrete boundary spheres: graphs of maps S^{p-1} -> S^q sampled on a mesh."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .core import BoundaryPoint, Signature, TripleType, bilinear_form, classify_triple
from .errors import DegenerateEdge, EmptyInput, InvalidParameter, NotAdmissible

TOL_STRICT = 1e-6
TOL_NONNEG = 1e-9


def sphere_dist(a, b):
    """Great-circle distance, accurate for nearby points."""
    chord = np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)
    return 2 * np.arcsin(np.clip(chord / 2, 0.0, 1.0))


@dataclass(frozen=True)
class SphereMesh:
    vertices: np.ndarray
    edges: np.ndarray
    antipode: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return len(self.vertices)


def _find_antipodes(V):
    idx = np.empty(len(V), dtype=int)
    for i, v in enumerate(V):
        d = np.linalg.norm(V + v, axis=1)
        j = int(np.argmin(d))
        if d[j] > 1e-9:
            raise ValueError("mesh is not closed under the antipodal map")
        idx[i] = j
    return idx


def mesh_from_edges(vertices, edges) -> SphereMesh:
    V = np.asarray(vertices, dtype=float)
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    E = np.asarray(edges, dtype=int).reshape(-1, 2)
    E = np.unique(np.sort(E, axis=1), axis=0)
    lengths = sphere_dist(V[E[:, 0]], V[E[:, 1]])
    for arr in (V, E, lengths):
        arr.setflags(write=False)
    anti = _find_antipodes(V)
    anti.setflags(write=False)
    return SphereMesh(V, E, anti, lengths)


def circle_mesh(n: int) -> SphereMesh:
    """Uniform n-gon on S^1 (n even so the antipodal map preserves it)."""
    if n < 4 or n % 2:
        raise InvalidParameter("circle mesh needs an even number of vertices >= 4")
    ang = 2 * np.pi * np.arange(n) / n
    V = np.column_stack([np.cos(ang), np.sin(ang)])
    E = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return mesh_from_edges(V, E)


def _icosahedron():
    g = (1 + 5**0.5) / 2
    V = []
    for a, b in itertools.product((-1, 1), repeat=2):
        V += [(0, a, b * g), (a, b * g, 0), (b * g, 0, a)]
    V = np.array(V, dtype=float)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return V, ConvexHull(V).simplices


def icosphere_mesh(level: int = 2) -> SphereMesh:
    """Subdivided icosahedron; midpoint subdivision keeps it antipodally closed."""
    V, F = _icosahedron()
    V = list(map(tuple, V))
    for _ in range(level):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(V[i], V[j])
                V.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(V) - 1
            return cache[key]

        newF = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            newF += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        F = np.array(newF)
    V = np.array(V)
    E = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    return mesh_from_edges(V, E)


def mesh_from_vertices(vertices) -> SphereMesh:
    """Rebuild connectivity for a bare vertex list (angular order / convex hull)."""
    V = np.asarray(vertices, dtype=float)
    if V.shape[1] == 2:
        order = np.argsort(np.arctan2(V[:, 1], V[:, 0]))
        E = np.column_stack([order, np.roll(order, -1)])
    else:
        F = ConvexHull(V).simplices
        E = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    return mesh_from_edges(V, E)


@dataclass(frozen=True)
class LipschitzSphereMap:
    mesh: SphereMesh
    values: np.ndarray

    def __post_init__(self):
        W = np.array(self.values, dtype=float)
        if W.ndim != 2 or len(W) != len(self.mesh):
            raise ValueError("need one value per mesh vertex")
        nrm = np.linalg.norm(W, axis=1)
        if np.any(nrm == 0):
            raise ValueError("values must be nonzero")
        # leave rows that are already unit alone so file round trips are exact
        W = np.where(np.abs(nrm - 1)[:, None] <= 4e-16, W, W / nrm[:, None])
        W.setflags(write=False)
        object.__setattr__(self, "values", W)

    @property
    def p(self) -> int:
        return self.mesh.p

    @property
    def q(self) -> int:
        return self.values.shape[1] - 1

    @property
    def sig(self) -> Signature:
        return Signature(self.p, self.q)

    def boundary_coords(self) -> np.ndarray:
        """Chart coordinates (theta, phi(theta)) of the boundary rays."""
        return np.hstack([self.mesh.vertices, self.values])


def constant_map(mesh: SphereMesh, w) -> LipschitzSphereMap:
    return LipschitzSphereMap(mesh, np.tile(np.asarray(w, float), (len(mesh), 1)))


def _edge_ratios(phi: LipschitzSphereMap):
    m = phi.mesh
    if len(m.edges) == 0:
        raise EmptyInput("mesh has no edges")
    if m.lengths.min() < 1e-12:
        raise DegenerateEdge("mesh edge shorter than 1e-12")
    W = phi.values
    return sphere_dist(W[m.edges[:, 0]], W[m.edges[:, 1]]) / m.lengths


def lipschitz_estimate(phi: LipschitzSphereMap) -> float:
    return float(_edge_ratios(phi).max())


TAGS = ("Positive", "NonNegativeAdmissible", "NonNegativeNonAdmissible", "NotNonNegative")


@dataclass(frozen=True)
class SphereClassification:
    tag: str
    lipschitz_estimate: float
    worst_pair: tuple
    has_positive_triple: bool | None = None

    @property
    def admissible(self) -> bool:
        return self.tag in ("Positive", "NonNegativeAdmissible")


def _antipodal_images(phi, tol):
    W = phi.values
    dots = (W * W[phi.mesh.antipode]).sum(1)
    i = int(np.argmin(dots))
    return dots[i] <= -1 + tol, (i, int(phi.mesh.antipode[i]))


def positive_triple_search(phi: LipschitzSphereMap, samples: int = 200, exhaustive=False, seed=0):
    """Look for a vertex triple whose boundary rays span a (2,1) subspace."""
    X = phi.boundary_coords()
    sig = phi.sig
    n = len(X)
    if n < 3:
        return False
    if exhaustive:
        triples = itertools.combinations(range(n), 3)
    else:
        rng = np.random.default_rng(seed)
        # evenly spread triple first: the likeliest witness for a circle graph
        triples = [(0, n // 3, (2 * n) // 3)]
        triples += [tuple(rng.choice(n, 3, replace=False)) for _ in range(samples)]
    for i, j, k in triples:
        try:
            if classify_triple(X[i], X[j], X[k], sig) is TripleType.POSITIVE:
                return True
        except ValueError:
            continue
    return False


def classify_sphere(
    phi: LipschitzSphereMap,
    tol_strict: float = TOL_STRICT,
    tol: float = TOL_NONNEG,
    exhaustive_triples: bool = False,
) -> SphereClassification:
    ratios = _edge_ratios(phi)
    k = int(np.argmax(ratios))
    est = float(ratios[k])
    edge = tuple(int(i) for i in phi.mesh.edges[k])
    triple = None
    if est < 1 - tol_strict:
        tag, pair = "Positive", edge
    elif est <= 1 + tol:
        hit, anti = _antipodal_images(phi, tol)
        tag, pair = ("NonNegativeNonAdmissible", anti) if hit else ("NonNegativeAdmissible", edge)
    else:
        tag, pair = "NotNonNegative", edge
    if phi.p == 2 and tag != "NotNonNegative":
        triple = positive_triple_search(phi, exhaustive=exhaustive_triples)
    return SphereClassification(tag, est, pair, triple)


def hemisphere_center(phi_or_points, tol: float = 1e-9):
    """Unit y with <y, w> > 0 for every image value, or None if none exists.

    The normalized mean is tried first; otherwise solves max tau subject to
    <y, w_i> >= tau, |y|_inf <= 1.
    """
    W = np.asarray(getattr(phi_or_points, "values", phi_or_points), dtype=float)
    n, d = W.shape
    mean = W.sum(0)
    if np.linalg.norm(mean) > 0:
        y = mean / np.linalg.norm(mean)
        if (W @ y).min() > tol:
            return y
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A = np.hstack([-W, np.ones((n, 1))])
    res = linprog(
        c, A_ub=A, b_ub=np.zeros(n), bounds=[(-1, 1)] * d + [(None, 1)], method="highs"
    )
    if res.status != 0 or -res.fun <= tol:
        return None
    y = res.x[:d] / np.linalg.norm(res.x[:d])
    if (W @ y).min() <= 0:
        return None
    return y


def _log_map(W, y):
    cosr = np.clip(W @ y, -1.0, 1.0)
    perp = W - cosr[:, None] * y
    sinr = np.linalg.norm(perp, axis=1)
    rho = np.arctan2(sinr, cosr)
    d = np.zeros_like(W)
    nz = sinr > 0
    d[nz] = perp[nz] / sinr[nz, None]
    return rho, d


def shrink_family(phi: LipschitzSphereMap, t: float, center=None) -> LipschitzSphereMap:
    """Contract the image toward its hemisphere center; phi_t is (1-t)-Lipschitz."""
    if not 0 <= t <= 1:
        raise InvalidParameter("t must lie in [0, 1]")
    y = hemisphere_center(phi) if center is None else np.asarray(center, float)
    if y is None:
        hit, pair = _antipodal_images(phi, TOL_NONNEG)
        raise NotAdmissible("image is not contained in an open hemisphere", pair)
    if t == 0:
        return phi
    rho, d = _log_map(phi.values, y)
    r = rho.max()
    if t == 1 or r == 0:
        return constant_map(phi.mesh, y)
    s = np.arcsin((1 - t) * np.sin(r)) / r
    W = np.cos(s * rho)[:, None] * y + np.sin(s * rho)[:, None] * d
    return LipschitzSphereMap(phi.mesh, W)


def _cap_mollify(phi: LipschitzSphereMap, radius: float):
    V = phi.mesh.vertices
    D = sphere_dist(V[:, None, :], V[None, :, :])
    K = np.clip(1 - (D / radius) ** 2, 0, None)
    X = K @ phi.values / K.sum(1, keepdims=True)
    return X


def smooth_strictly_lipschitz_approx(phi: LipschitzSphereMap, delta: float, max_rounds: int = 40):
    """Strictly contracting map within ``delta`` of ``phi`` in sup distance.

    Shrink by eps, mollify with a spherical-cap kernel, project radially, and
    tighten the parameters until the result is Positive and delta-close.
    """
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    center = hemisphere_center(phi)
    if center is None:
        raise NotAdmissible("image is not contained in an open hemisphere")
    spacing = float(phi.mesh.lengths.max())
    eps = min(0.25 * delta, 0.1)
    radius = max(2.0 * spacing, 0.5 * delta)
    for _ in range(max_rounds):
        shrunk = shrink_family(phi, eps, center)
        X = _cap_mollify(shrunk, radius)
        psi = LipschitzSphereMap(phi.mesh, X)
        dist = float(sphere_dist(psi.values, phi.values).max())
        cls = classify_sphere(psi)
        if cls.tag == "Positive" and dist < delta:
            return psi
        if dist >= delta:
            eps *= 0.5
            radius *= 0.5
        else:
            # too little contraction relative to the projection stretch
            eps = min(2 * eps, 0.5 * delta)
            radius *= 0.5
    raise InvalidParameter("could not meet delta with the given mesh resolution")


@dataclass(frozen=True)
class HullResult:
    inside: bool
    functional: np.ndarray | None = None

    @property
    def tag(self) -> str:
        return "Inside" if self.inside else "Separated"


def convex_hull_separation(points, x, sig: Signature, x_ref=None, tol: float = 1e-8) -> HullResult:
    """Decide whether x lies in the convex cone spanned by boundary rays.

    Looks for a functional l with l(y_i) >= 0 on the rays and l(x) < 0; the
    separation margin -l(x) is maximized over |l|_inf <= 1 so that rays lying
    in a lower-dimensional subspace do not produce spurious separations.
    """
    Y = np.array([getattr(y, "coords", y) for y in points], dtype=float)
    if Y.size == 0:
        raise EmptyInput("no boundary points")
    x = np.asarray(getattr(x, "coords", x), dtype=float)
    ref = x if x_ref is None else np.asarray(getattr(x_ref, "coords", x_ref), float)
    s = np.abs(bilinear_form(Y, ref, sig))
    s = np.where(s > 1e-14, s, np.linalg.norm(Y, axis=1))
    Y = Y / s[:, None]
    d = Y.shape[1]
    res = linprog(
        x, A_ub=-Y, b_ub=np.zeros(len(Y)), bounds=[(-1, 1)] * d, method="highs"
    )
    margin = -res.fun if res.status == 0 else 0.0
    if margin > tol * max(1.0, np.abs(x).max()):
        ell = res.x / margin
        return HullResult(False, ell)
    return HullResult(True, None)


def pairwise_boundary_products(phi: LipschitzSphereMap) -> np.ndarray:
    """b between all pairs of lifted boundary rays: <theta_i, theta_j> - <w_i, w_j>."""
    V, W = phi.mesh.vertices, phi.values
    return V @ V.T - W @ W.T


def boundary_points(phi: LipschitzSphereMap, chart=None):
    X = phi.boundary_coords()
    if chart is not None:
        X = chart.to_ambient(X)
    return [BoundaryPoint(x, phi.sig) for x in X]

"""Tensor grids over the Fermi ball and the finite-difference geometry of graphs.

All kernels act on the 3^p neighbourhood of each interior node, gathered once
into an index table, so the same code serves p = 2 and p = 3.  They avoid
``abs`` and complex conjugation so that complex-step differentiation of the
residual is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .charts import FermiChart, fermi_coords
from .core import Signature
from .errors import InvalidParameter, SpacelikeViolation


class GridSpec:
    """Nodes of an n^p tensor grid on [-rho, rho]^p with rho = 1 - margin.

    Unknown ("interior") nodes are those with |u| < rho; the pinned ring is
    every other node touched by an interior node's 3^p stencil.
    """

    def __init__(self, p: int, n: int, margin: float = 0.05):
        if n < 5:
            raise InvalidParameter("need at least 5 nodes per axis")
        if not 0 < margin < 1:
            raise InvalidParameter("margin must lie in (0, 1)")
        self.p, self.n, self.margin = p, n, margin
        self.rho = 1.0 - margin
        self.h = 2 * self.rho / (n - 1)
        axis = np.linspace(-self.rho, self.rho, n)
        mesh = np.meshgrid(*([axis] * p), indexing="ij")
        self.U = np.stack([m.ravel() for m in mesh], axis=1)
        self.index = np.stack(
            [m.ravel() for m in np.meshgrid(*([np.arange(n)] * p), indexing="ij")], axis=1
        )
        radius = np.linalg.norm(self.U, axis=1)
        self.offsets = list(itertools.product((-1, 0, 1), repeat=p))
        self.K = len(self.offsets)
        self.center = self.offsets.index((0,) * p)
        strides = np.array([n ** (p - 1 - a) for a in range(p)])
        interior = radius < self.rho - 1e-12
        self.interior = np.flatnonzero(interior)
        off = np.array(self.offsets) @ strides
        self.nbr = self.interior[:, None] + off[None, :]
        touched = np.unique(self.nbr)
        self.pinned = np.setdiff1d(touched, self.interior)
        self.active = np.union1d(self.interior, self.pinned)
        rmax = radius[self.pinned].max()
        if rmax >= 1:
            raise InvalidParameter(
                f"pinned ring reaches |u| = {rmax:.4f}; increase n or the margin"
            )
        self.to_interior = -np.ones(n**p, dtype=int)
        self.to_interior[self.interior] = np.arange(len(self.interior))
        self._build_weights()
        self._build_colors()

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def _w(self, entries):
        w = np.zeros(self.K)
        for off, c in entries:
            w[self.offsets.index(tuple(off))] += c
        return w

    def _e(self, *pairs):
        v = [0] * self.p
        for a, s in pairs:
            v[a] += s
        return tuple(v)

    def _build_weights(self):
        p, h = self.p, self.h
        self.D1 = np.array([self._w([(self._e((i, 1)), 0.5 / h), (self._e((i, -1)), -0.5 / h)])
                            for i in range(p)])
        D2 = np.zeros((p, p, self.K))
        for i in range(p):
            for j in range(p):
                if i == j:
                    D2[i, i] = self._w([(self._e((i, 1)), 1), ((0,) * p, -2), (self._e((i, -1)), 1)])
                else:
                    D2[i, j] = 0.25 * self._w([
                        (self._e((i, 1), (j, 1)), 1), (self._e((i, 1), (j, -1)), -1),
                        (self._e((i, -1), (j, 1)), -1), (self._e((i, -1), (j, -1)), 1)])
        self.D2 = D2 / h**2
        # derivatives at the half nodes u +- h e_i / 2, shape (p, 2, p, K)
        half = np.zeros((p, 2, p, self.K))
        for i in range(p):
            for s_idx, s in enumerate((1, -1)):
                for j in range(p):
                    if j == i:
                        e = [(self._e((i, s)), s / h), ((0,) * p, -s / h)]
                    else:
                        e = [(self._e((i, s), (j, 1)), 0.25 / h), (self._e((j, 1)), 0.25 / h),
                             (self._e((i, s), (j, -1)), -0.25 / h), (self._e((j, -1)), -0.25 / h)]
                    half[i, s_idx, j] = self._w(e)
        self.Dhalf = half
        # midpoint averaging weights for values at half nodes
        self.Ahalf = np.array([[self._w([(self._e((i, s)), 0.5), ((0,) * p, 0.5)])
                                for s in (1, -1)] for i in range(p)])

    def _build_colors(self):
        """Column node for each of the 3^p colors: the unique stencil node with that color."""
        idx = self.index[self.interior]
        self.colors = list(itertools.product(range(3), repeat=self.p))
        self.color_of = np.zeros(len(self.interior), dtype=int)
        base = np.array([3 ** (self.p - 1 - a) for a in range(self.p)])
        self.color_of = (idx % 3) @ base
        col = np.empty((len(self.colors), len(self.interior)), dtype=int)
        offs = np.array(self.offsets)
        for c, color in enumerate(self.colors):
            # offset o with (idx + o) % 3 == color, o in {-1, 0, 1}
            o = (np.array(color)[None, :] - idx + 1) % 3 - 1
            k = ((o + 1) @ np.array([3 ** (self.p - 1 - a) for a in range(self.p)]))
            assert np.all(offs[k] == o)
            col[c] = self.to_interior[self.nbr[np.arange(len(self.interior)), k]]
        self.color_columns = col

    def gather(self, field_full):
        """(N_int, K, ...) neighbourhood values of a full-grid field."""
        return field_full[self.nbr]


@dataclass(frozen=True)
class SpacelikeGraphGrid:
    """Discrete graph u -> w(u) in S^q over the truncated Fermi ball."""

    chart: FermiChart
    spec: GridSpec = field(repr=False)
    values: np.ndarray = field(repr=False)  # (n^p, q+1), NaN off the active set
    boundary: object = field(default=None, repr=False)
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        W = np.array(self.values, dtype=float)
        act = self.spec.active
        nrm = np.linalg.norm(W[act], axis=1)
        if np.abs(nrm - 1).max() > 1e-12:
            W[act] /= nrm[:, None]
        W.setflags(write=False)
        object.__setattr__(self, "values", W)

    @property
    def sig(self) -> Signature:
        return self.chart.sig

    @property
    def p(self):
        return self.sig.p

    @property
    def q(self):
        return self.sig.q

    def embedding(self):
        """Chart coordinates of every grid node (NaN off the active set)."""
        return fermi_coords(self.spec.U, self.values)

    def interior_points(self):
        return self.embedding()[self.spec.interior]

    def ambient_points(self, which="interior"):
        idx = self.spec.interior if which == "interior" else self.spec.active
        return self.chart.to_ambient(self.embedding()[idx])

    def with_values(self, values, **info):
        return SpacelikeGraphGrid(self.chart, self.spec, values, self.boundary, {**self.info, **info})


def bdot(a, b, diag):
    # complex-safe bilinear form in chart coordinates
    return (a * b * diag).sum(-1)


class Geometry:
    """Finite-difference geometry of an embedded grid map at interior nodes.

    ``F_full`` holds chart coordinates for every grid node; it may be complex.
    """

    def __init__(self, spec: GridSpec, F_full, sig: Signature, need_laplacian=True):
        self.spec, self.sig = spec, sig
        self.diag = sig.diag
        Fn = spec.gather(F_full)
        self.Fn = Fn
        self.F = Fn[:, spec.center]
        self.dF = np.einsum("ik,nkd->nid", spec.D1, Fn)
        self.ddF = np.einsum("ijk,nkd->nijd", spec.D2, Fn)
        self.g = np.einsum("nid,njd,d->nij", self.dF, self.dF, self.diag)
        self.ginv = np.linalg.inv(self.g)
        self.detg = np.linalg.det(self.g)
        if need_laplacian:
            self._laplacian_stencil()

    def _laplacian_stencil(self):
        spec = self.spec
        Dh = np.einsum("isjk,nkd->nisjd", spec.Dhalf, self.Fn)  # (N, p, 2, p, dim)
        gh = np.einsum("nisjd,nisld,d->nisjl", Dh, Dh, self.diag)
        ghinv = np.linalg.inv(gh)
        sq = np.sqrt(np.linalg.det(gh))
        coef = sq[..., None] * np.einsum("nisij->nisj", ghinv)
        # coef[n, i, s, j] = sqrt(g) g^{ij} at the half node (i, s)
        L = np.einsum("nij,ijk->nk", coef[:, :, 0, :], spec.Dhalf[:, 0]) - np.einsum(
            "nij,ijk->nk", coef[:, :, 1, :], spec.Dhalf[:, 1]
        )
        self.lap = L / (spec.h * np.sqrt(self.detg)[:, None])

    def normal_project(self, v):
        """Project ambient vectors onto the b-complement of span(F, d_1 F, ..., d_p F).

        Uses the full Gram matrix of the frame, so the projection stays exact
        even though discrete tangents are only approximately orthogonal to F.
        """
        E = np.concatenate([self.F[:, None, :], self.dF], axis=1)
        if not hasattr(self, "_gram_inv"):
            gram = np.einsum("nad,nbd,d->nab", E, E, self.diag)
            self._gram_inv = np.linalg.inv(gram)
        bvE = np.einsum("n...d,nad,d->n...a", v, E, self.diag)
        coeff = np.einsum("nab,n...b->n...a", self._gram_inv, bvE)
        return v - np.einsum("n...a,nad->n...d", coeff, E)

    def laplace_beltrami(self, S_full):
        return np.einsum("nk,nkd->nd", self.lap, self.spec.gather(S_full))

    def mean_curvature_hessian(self):
        trace = np.einsum("nij,nijd->nd", self.ginv, self.ddF)
        return self.normal_project(trace)

    def second_fundamental_form(self):
        return self.normal_project(self.ddF)


def spacelike_margin(spec: GridSpec, geo: Geometry) -> np.ndarray:
    """Smallest eigenvalue of g relative to the hyperbolic ball factor 4/(1-|u|^2)^2."""
    u2 = (spec.U[spec.interior] ** 2).sum(1)
    alpha = 4.0 / (1 - u2) ** 2
    ev = np.linalg.eigvalsh(np.real(geo.g))
    return ev[:, 0] / alpha


def geometry(G: SpacelikeGraphGrid, need_laplacian=True) -> Geometry:
    return Geometry(G.spec, G.embedding(), G.sig, need_laplacian)


def induced_metric(G: SpacelikeGraphGrid, node=None, check=True):
    """b(d_i F, d_j F) at one interior node (flat grid index) or at all of them."""
    geo = geometry(G, need_laplacian=False)
    if check:
        m = spacelike_margin(G.spec, geo)
        bad = np.flatnonzero(m <= G.spec.h**2)
        if len(bad):
            raise SpacelikeViolation(
                f"induced metric degenerates at {len(bad)} node(s), min margin {m.min():.3g}"
            )
    if node is None:
        return geo.g
    k = G.spec.to_interior[node]
    if k < 0:
        raise InvalidParameter("node is not an interior node")
    return geo.g[k]


def mean_curvature(G: SpacelikeGraphGrid, method: str = "laplacian", F_full=None):
    """Mean curvature vector at interior nodes, in chart coordinates.

    ``laplacian``: Delta_g F - p F with a divergence-form Laplace-Beltrami.
    ``hessian``: normal projection of g^{ij} d_ij F.
    """
    F_full = G.embedding() if F_full is None else F_full
    geo = Geometry(G.spec, F_full, G.sig, need_laplacian=False)
    if np.any(spacelike_margin(G.spec, geo) <= 0):
        raise SpacelikeViolation("grid map is not spacelike")
    if method == "laplacian":
        geo._laplacian_stencil()
    if method == "hessian":
        return geo.mean_curvature_hessian()
    if method == "laplacian":
        return geo.laplace_beltrami(F_full) - G.p * geo.F
    raise InvalidParameter(f"unknown mean curvature method {method!r}")


def vector_norm(v, sig: Signature):
    """sqrt|b(v, v)|, the natural size of normal (timelike) vectors."""
    return np.sqrt(np.abs(bdot(v, v, sig.diag)))

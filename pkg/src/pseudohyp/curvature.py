"""Second fundamental form, decay fits, truncated integrals and pairwise diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Geometry, SpacelikeGraphGrid, bdot, geometry
from .spheres import convex_hull_separation

DEFAULT_S = (1.5, 2.0, 3.0)


def second_fundamental_form(G: SpacelikeGraphGrid, geo: Geometry | None = None):
    geo = geo or geometry(G, need_laplacian=False)
    return geo.second_fundamental_form()


def norm_II_squared(geo: Geometry, II=None):
    """||II||^2 = -g^{ik} g^{jl} b(II_ij, II_kl); non-negative since normals are timelike."""
    II = geo.second_fundamental_form() if II is None else II
    gi = geo.ginv
    prod = np.einsum("nijd,nkld,d->nijkl", II, II, geo.diag)
    return -np.einsum("nik,njl,nijkl->n", gi, gi, prod).real


def polar_radius(G: SpacelikeGraphGrid, x0=None):
    """Distance-like radius arccosh(-b(F, x0)) from a surface point (default: the centre node)."""
    F = G.interior_points()
    if x0 is None:
        k = np.argmin(np.linalg.norm(G.spec.U[G.spec.interior], axis=1))
        x0 = F[k]
    c = -bdot(F, x0, G.sig.diag)
    return np.arccosh(np.maximum(c, 1.0))


def volume_element(geo: Geometry):
    return np.sqrt(np.linalg.det(geo.g).real) * geo.spec.h**geo.spec.p


def _ring_radius(G, x0):
    """Largest r such that the whole geodesic sphere of radius r lies in the grid."""
    F = G.embedding()[G.spec.pinned]
    if x0 is None:
        k = np.argmin(np.linalg.norm(G.spec.U[G.spec.interior], axis=1))
        x0 = G.interior_points()[k]
    return float(np.arccosh(np.maximum(-bdot(F, x0, G.sig.diag), 1.0)).min())


def shell_sup(values, r, edges):
    idx = np.digitize(r, edges) - 1
    out = np.full(len(edges) - 1, np.nan)
    for b in range(len(edges) - 1):
        sel = idx == b
        if sel.any():
            out[b] = values[sel].max()
    return out


@dataclass
class CurvatureReport:
    sup_norm_II: float
    sup_norm_II_sq: float
    sup_check_ishihara: bool
    sup_check_ishihara_strict: bool
    renormalized_area: float | None
    decay_slope: float
    volume_exponent: float
    L_s_integrals: dict
    L_s_increments: dict
    fit_range: tuple
    fields: dict = field(default_factory=dict, repr=False)

    def records(self):
        rec = {
            "sup_norm_II": self.sup_norm_II,
            "sup_norm_II_sq": self.sup_norm_II_sq,
            "sup_check_ishihara": self.sup_check_ishihara,
            "sup_check_ishihara_strict": self.sup_check_ishihara_strict,
            "renormalized_area": self.renormalized_area,
            "decay_slope": self.decay_slope,
            "volume_exponent": self.volume_exponent,
            "fit_r_min": self.fit_range[0],
            "fit_r_max": self.fit_range[1],
        }
        for s, v in self.L_s_integrals.items():
            rec[f"L_s_integral[{s:g}]"] = v
            rec[f"L_s_increment[{s:g}]"] = self.L_s_increments[s]
        return rec


def curvature_report(
    G: SpacelikeGraphGrid,
    s_values=DEFAULT_S,
    x0=None,
    shell_width: float = 0.25,
    fit_start: float = 0.5,
    tol: float = 1e-6,
) -> CurvatureReport:
    """Curvature summary of a converged graph.

    Decay and growth are fitted on the shells between ``fit_start`` times the
    complete radius and the complete radius itself, the latter being the
    largest polar radius whose geodesic sphere stays inside the grid.
    """
    geo = geometry(G, need_laplacian=False)
    n2 = np.maximum(norm_II_squared(geo), 0.0)
    nrm = np.sqrt(n2)
    dvol = volume_element(geo)
    r = polar_radius(G, x0)
    r_c = _ring_radius(G, x0)
    pq = G.p * G.q
    lo = fit_start * r_c
    edges = np.arange(lo, r_c + 1e-12, shell_width)
    if len(edges) < 3:
        edges = np.linspace(lo, r_c, 4)
    mids = 0.5 * (edges[1:] + edges[:-1])
    sup = shell_sup(nrm, r, edges)
    ok = np.isfinite(sup) & (sup > 0)
    slope = float(np.polyfit(mids[ok], np.log(sup[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    inside = r <= r_c
    # shell area per unit radius grows like e^{(p-1) r}; cumulative volume is biased at finite r
    idx = np.digitize(r, edges) - 1
    area = np.array([dvol[idx == b].sum() for b in range(len(mids))]) / np.diff(edges)
    good = area > 0
    vexp = float(np.polyfit(mids[good], np.log(area[good]), 1)[0])
    ints, incs = {}, {}
    last = inside & (r > r_c - shell_width)
    for s in s_values:
        dens = n2 ** (s / 2) * dvol
        total = float(dens[inside].sum())
        ints[s] = total
        incs[s] = float(dens[last].sum() / total) if total > 0 else 0.0
    return CurvatureReport(
        sup_norm_II=float(nrm.max()),
        sup_norm_II_sq=float(n2.max()),
        sup_check_ishihara=bool(n2.max() <= pq + tol),
        sup_check_ishihara_strict=bool(nrm.max() <= pq + tol),
        renormalized_area=float((n2 * dvol)[inside].sum()) if G.p == 2 else None,
        decay_slope=slope,
        volume_exponent=vexp,
        L_s_integrals=ints,
        L_s_increments=incs,
        fit_range=(float(lo), float(r_c)),
        fields=dict(norm_II_sq=n2, r=r, dvol=dvol, shell_mids=mids, shell_sup=sup, shell_area=area),
    )


@dataclass(frozen=True)
class BetaResult:
    sup_beta: float
    pair: tuple
    sup_off_diagonal: float | None = None


def _pair_max(X, Y, diag, block=2048, skip_diagonal=False):
    best, arg = -np.inf, (0, 0)
    for i0 in range(0, len(X), block):
        P = (X[i0 : i0 + block] * diag) @ Y.T
        if skip_diagonal:
            k = np.arange(P.shape[0])
            P[k, i0 + k] = -np.inf
        j = np.unravel_index(np.argmax(P), P.shape)
        if P[j] > best:
            best, arg = float(P[j]), (i0 + int(j[0]), int(j[1]))
    return best, arg


def beta_diagnostic(G1: SpacelikeGraphGrid, G2: SpacelikeGraphGrid, which="interior") -> BetaResult:
    """sup of b(x, y) over node pairs x in G1, y in G2 (ambient coordinates)."""
    if G1.sig != G2.sig:
        raise ValueError("graphs live in different signatures")
    X, Y = G1.ambient_points(which), G2.ambient_points(which)
    diag = G1.sig.diag
    best, arg = _pair_max(X, Y, diag)
    off = None
    if G1 is G2:
        off, _ = _pair_max(X, Y, diag, skip_diagonal=True)
    return BetaResult(best, arg, off)


def acausality_excess(G: SpacelikeGraphGrid) -> float:
    """max over distinct node pairs of b(x_i, x_j) + 1; non-positive for an acausal set."""
    X = G.ambient_points("interior")
    best, _ = _pair_max(X, X, G.sig.diag, skip_diagonal=True)
    return best + 1.0


def hull_containment(G: SpacelikeGraphGrid, phi=None, n_nodes: int = 200, seed: int = 0):
    """Fraction of sampled interior nodes inside the convex hull of the boundary rays."""
    phi = phi if phi is not None else G.boundary
    Y = G.chart.to_ambient(phi.boundary_coords())
    X = G.ambient_points("interior")
    rng = np.random.default_rng(seed)
    # always include the outermost nodes, where containment is tightest
    r = np.linalg.norm(G.spec.U[G.spec.interior], axis=1)
    outer = np.argsort(r)[-n_nodes // 2 :]
    pick = np.union1d(outer, rng.choice(len(X), min(len(X), n_nodes - len(outer)), replace=False))
    inside = [convex_hull_separation(Y, X[k], G.sig).inside for k in pick]
    return float(np.mean(inside)), pick[~np.array(inside)]

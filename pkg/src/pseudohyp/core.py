"""Indefinite linear algebra on R^{p,q+1}.

Coordinates are ordered so that the first ``p`` directions are positive and the
last ``q + 1`` are negative; every other module inherits this convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NonNegativeNorm,
    NotIsometry,
    NotOrthogonal,
    PreconditionViolation,
    RepeatedPoint,
)

QUADRIC_TOL = 1e-12
SIGN_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Signature:
    """Dimensions of the pseudo-hyperbolic space H^{p,q}.

    The ambient space is R^{p,q+1}, of dimension ``p + q + 1``.
    """

    p: int
    q: int

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q:
            raise ValueError("p and q must be integers")
        if self.p < 2 or self.q < 1:
            raise ValueError(f"need p >= 2 and q >= 1, got ({self.p}, {self.q})")

    @property
    def dim(self) -> int:
        return self.p + self.q + 1

    @property
    def diag(self) -> np.ndarray:
        return np.concatenate([np.ones(self.p), -np.ones(self.q + 1)])

    @property
    def gram(self) -> np.ndarray:
        return np.diag(self.diag)

    def check(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"expected vectors of length {self.dim}, got shape {x.shape}"
            )
        return x


@dataclass(frozen=True)
class QuadricPoint:
    """A point of the quadric b(x, x) = -1, i.e. of H^{p,q}_+."""

    coords: np.ndarray
    sig: Signature

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.sig.check(self.coords)))
        # rounding in b(x, x) grows like |x|^2 far from the basepoint
        scale = max(1.0, float(self.coords @ self.coords))
        if abs(bilinear_form(self.coords, self.coords, self.sig) + 1.0) > 1e-9 * scale:
            raise NonNegativeNorm("coordinates do not lie on the quadric")


@dataclass(frozen=True)
class BoundaryPoint:
    """An oriented isotropic ray, stored by its Euclidean-unit representative."""

    coords: np.ndarray
    sig: Signature

    def __post_init__(self):
        x = np.asarray(self.sig.check(self.coords), dtype=float)
        nrm = np.linalg.norm(x)
        if nrm == 0:
            raise ValueError("boundary point must be nonzero")
        x = x / nrm
        if abs(bilinear_form(x, x, self.sig)) > 1e-8:
            raise ValueError("boundary point must be isotropic")
        object.__setattr__(self, "coords", _frozen(x))

    def same_ray(self, other: "BoundaryPoint", tol: float = 1e-10) -> bool:
        return bool(np.linalg.norm(self.coords - other.coords) < tol)


def bilinear_form(x, y, sig: Signature):
    """Evaluate b(x, y) = sum_{i<=p} x_i y_i - sum_{i>p} x_i y_i.

    Broadcasts over leading axes; the last axis carries the coordinates.
    """
    x = sig.check(x)
    y = sig.check(y)
    p = sig.p
    return (x[..., :p] * y[..., :p]).sum(-1) - (x[..., p:] * y[..., p:]).sum(-1)


def normalize_to_quadric(x, sig: Signature) -> QuadricPoint:
    x = np.asarray(sig.check(x), dtype=float)
    n2 = bilinear_form(x, x, sig)
    if n2 >= -1e-14:
        raise NonNegativeNorm(f"b(x, x) = {n2:.3g} is not negative")
    return QuadricPoint(x / np.sqrt(-n2), sig)


def geodesic(x0, v, t: float, sig: Signature):
    """Point at parameter ``t`` on the geodesic through ``x0`` with velocity ``v``.

    The curve is the intersection of the quadric with span(x0, v). For
    ``t = +-inf`` along a spacelike or lightlike direction the limiting
    boundary ray is returned instead of a quadric point.
    """
    x0 = np.asarray(x0.coords if isinstance(x0, QuadricPoint) else x0, dtype=float)
    v = np.asarray(sig.check(v), dtype=float)
    sig.check(x0)
    if abs(bilinear_form(x0, v, sig)) > 1e-10:
        raise NotOrthogonal("velocity is not b-orthogonal to the base point")
    n2 = bilinear_form(v, v, sig)
    scale = max(1.0, float(np.abs(v).max()) ** 2)
    if n2 > 1e-14 * scale:
        s = np.sqrt(n2)
        if np.isinf(t):
            return BoundaryPoint(x0 + np.sign(t) * v / s, sig)
        y = np.cosh(t * s) * x0 + np.sinh(t * s) * v / s
    elif n2 < -1e-14 * scale:
        s = np.sqrt(-n2)
        if np.isinf(t):
            raise ValueError("timelike geodesics are closed and have no end point")
        y = np.cos(t * s) * x0 + np.sin(t * s) * v / s
    else:
        if np.isinf(t):
            return BoundaryPoint(np.sign(t) * v, sig)
        y = x0 + t * v
    return QuadricPoint(y, sig)


class TripleType(enum.Enum):
    POSITIVE = "Positive"
    NON_NEGATIVE_DEGENERATE = "NonNegativeDegenerate"
    NOT_NON_NEGATIVE = "NotNonNegative"


def gram_matrix(vectors, sig: Signature) -> np.ndarray:
    X = np.asarray(vectors, dtype=float)
    return (X * sig.diag) @ X.T


def inertia(sym: np.ndarray, tol: float = SIGN_TOL):
    """Return (n_positive, n_negative, n_zero) eigenvalue counts of a symmetric matrix."""
    ev = np.linalg.eigvalsh(sym)
    return int((ev > tol).sum()), int((ev < -tol).sum()), int((np.abs(ev) <= tol).sum())


def classify_triple(x, y, z, sig: Signature) -> TripleType:
    """Classify three boundary rays by the signature of their span."""
    pts = [pt if isinstance(pt, BoundaryPoint) else BoundaryPoint(pt, sig) for pt in (x, y, z)]
    for i in range(3):
        for j in range(i + 1, 3):
            if pts[i].same_ray(pts[j]):
                raise RepeatedPoint(f"points {i} and {j} span the same ray")
    X = np.stack([pt.coords for pt in pts])
    npos, nneg, _ = inertia(gram_matrix(X, sig))
    rank = np.linalg.matrix_rank(X, tol=SIGN_TOL)
    if nneg >= 2:
        return TripleType.NOT_NON_NEGATIVE
    if rank == 3 and npos == 2 and nneg == 1:
        return TripleType.POSITIVE
    return TripleType.NON_NEGATIVE_DEGENERATE


@dataclass(frozen=True)
class CartanFactors:
    """g = k @ expm(a(lam)) @ k_prime with k, k_prime block-orthogonal."""

    k: np.ndarray
    k_prime: np.ndarray
    lam: np.ndarray
    n_pos: int = field(default=0)

    def boost(self) -> np.ndarray:
        return cartan_boost(self.lam, self.n_pos, self.k.shape[0])

    def reconstruct(self) -> np.ndarray:
        return self.k @ self.boost() @ self.k_prime


def cartan_boost(lam, n_pos: int, dim: int) -> np.ndarray:
    """exp(a(lam)): hyperbolic rotation by lam[i] in the plane (e_i, e_{n_pos+i})."""
    a = np.eye(dim)
    for i, li in enumerate(np.asarray(lam, dtype=float)):
        j = n_pos + i
        a[i, i] = a[j, j] = np.cosh(li)
        a[i, j] = a[j, i] = np.sinh(li)
    return a


def _isometry_defect(g, n_pos):
    d = np.ones(g.shape[0])
    d[n_pos:] = -1.0
    return np.abs(g.T @ (d[:, None] * g) - np.diag(d)).max()


def cartan_decompose(g, n_pos: int) -> CartanFactors:
    """Cartan decomposition of an element of O(n_pos, n_neg).

    Uses the polar factorization g = k P with respect to the positive scalar
    product b(theta x, y) (the Euclidean one in adapted coordinates), followed
    by an SVD of the off-diagonal block of log P.
    """
    g = np.asarray(g, dtype=float)
    dim = g.shape[0]
    if g.shape != (dim, dim) or not 0 < n_pos < dim:
        raise DimensionMismatch("g must be square with 0 < n_pos < dim")
    scale = max(1.0, np.abs(g).max() ** 2)
    if _isometry_defect(g, n_pos) > 1e-10 * scale:
        raise NotIsometry("g does not preserve the bilinear form")
    n_neg = dim - n_pos
    m0 = min(n_pos, n_neg)
    evals, evecs = np.linalg.eigh(g.T @ g)
    evals = np.clip(evals, 1e-300, None)
    logp = (evecs * (0.5 * np.log(evals))) @ evecs.T
    Y = 0.5 * (logp[:n_pos, n_pos:] + logp[n_pos:, :n_pos].T)
    U, s, Vt = np.linalg.svd(Y, full_matrices=True)
    k0 = np.zeros((dim, dim))
    k0[:n_pos, :n_pos] = U
    k0[n_pos:, n_pos:] = Vt.T
    lam = s[:m0]
    a = cartan_boost(lam, n_pos, dim)
    # k0 a k0^T = exp(logp); remaining orthogonal factor
    k = g @ k0 @ np.linalg.inv(a)
    # project the numerical k back onto the block-diagonal compact subgroup
    for blk in (slice(0, n_pos), slice(n_pos, dim)):
        u_, _, vt_ = np.linalg.svd(k[blk, blk])
        k[blk, blk] = u_ @ vt_
    k[:n_pos, n_pos:] = 0.0
    k[n_pos:, :n_pos] = 0.0
    return CartanFactors(k=k, k_prime=k0.T, lam=lam, n_pos=n_pos)


@dataclass(frozen=True)
class BlockCheck:
    certified: bool
    witness_eigenvalue: float


def block_positive_eigenvalue_check(mu: float, A, B, M) -> BlockCheck:
    """Certify that [[mu I + A, M^T], [M, mu I + B]] has a positive eigenvalue.

    Preconditions (checked): mu > -1, A and B symmetric traceless, every
    singular value of M at least 1.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    M = np.asarray(M, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n) or M.shape != (n, n):
        raise DimensionMismatch("A, B and M must be n x n")
    if not mu > -1:
        raise PreconditionViolation(f"mu = {mu} must exceed -1")
    for name, X in (("A", A), ("B", B)):
        if np.abs(X - X.T).max() > 1e-12 * max(1.0, np.abs(X).max()):
            raise PreconditionViolation(f"{name} is not symmetric")
        if abs(np.trace(X)) > 1e-10 * max(1.0, np.abs(X).max()) * n:
            raise PreconditionViolation(f"{name} is not traceless")
    smin = np.linalg.svd(M, compute_uv=False).min()
    if smin < 1 - 1e-12:
        raise PreconditionViolation(f"M has singular value {smin:.6g} < 1")
    phi = np.block([[mu * np.eye(n) + A, M.T], [M, mu * np.eye(n) + B]])
    top = float(np.linalg.eigvalsh(0.5 * (phi + phi.T))[-1])
    return BlockCheck(certified=top > 0, witness_eigenvalue=top)


def hessian_beta(x1, x2, u1, u2, II1, II2, sig: Signature) -> float:
    """Second derivative of b(gamma1(t), gamma2(t)) along geodesics of M1 x M2."""
    x1, x2, u1, u2, II1, II2 = (
        np.asarray(sig.check(getattr(v, "coords", v)), dtype=float)
        for v in (x1, x2, u1, u2, II1, II2)
    )
    b = lambda a, c: bilinear_form(a, c, sig)  # noqa: E731
    return float(
        (b(u1, u1) + b(u2, u2)) * b(x1, x2)
        + 2 * b(u1, u2)
        + b(II1, x2)
        + b(x1, II2)
    )

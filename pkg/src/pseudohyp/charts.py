"""Fermi charts and spacelike polar coordinates on the quadric.

A Fermi chart is stored as a b-orthonormal frame ``E`` whose columns are
``(U_1..U_p, l, V_1..V_q)``; chart coordinates ``c`` map to ambient points by
``x = E @ c`` and the form is diagonal in chart coordinates.  The helpers with
a ``*_coords`` suffix work on raw (possibly complex) arrays and are the ones
the solver calls in its inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundaryPoint, QuadricPoint, Signature, bilinear_form
from .errors import BadDirection, NotOrthogonal, OutOfBall, OutsideDomain

FRAME_TOL = 1e-10


def _sqnorm(a):
    # complex-step safe: no conjugation, no abs
    return (a * a).sum(-1)


@dataclass(frozen=True)
class FermiChart:
    sig: Signature
    frame: np.ndarray  # columns U_1..U_p, basepoint, V_1..V_q

    def __post_init__(self):
        E = np.array(self.frame, dtype=float)
        n = self.sig.dim
        if E.shape != (n, n):
            raise ValueError(f"frame must be {n}x{n}")
        G = E.T @ (self.sig.diag[:, None] * E)
        if np.abs(G - np.diag(self.sig.diag)).max() > FRAME_TOL:
            raise NotOrthogonal("frame is not b-orthonormal with the expected signs")
        E.setflags(write=False)
        object.__setattr__(self, "frame", E)

    @classmethod
    def standard(cls, sig: Signature) -> "FermiChart":
        """Chart whose frame is the coordinate basis; basepoint e_{p+1}."""
        return cls(sig, np.eye(sig.dim))

    @classmethod
    def from_basepoint(cls, sig: Signature, basepoint, U_frame, V_frame) -> "FermiChart":
        x = getattr(basepoint, "coords", basepoint)
        E = np.column_stack([np.asarray(U_frame).T, x, np.asarray(V_frame).T])
        return cls(sig, E)

    @property
    def basepoint(self) -> QuadricPoint:
        return QuadricPoint(self.frame[:, self.sig.p], self.sig)

    @property
    def U_frame(self) -> np.ndarray:
        return self.frame[:, : self.sig.p].T

    @property
    def V_frame(self) -> np.ndarray:
        return self.frame[:, self.sig.p + 1 :].T

    def to_ambient(self, c):
        return np.asarray(c) @ self.frame.T

    def to_chart(self, x):
        # E^{-1} x = diag(s) E^T diag(s) x for a b-orthonormal frame
        d = self.sig.diag
        return (np.asarray(x) * d) @ self.frame * d


def fermi_factor(t):
    """f(t) = (1 + t^2) / (1 - t^2)."""
    return (1 + t * t) / (1 - t * t)


def fermi_coords(u, w):
    """Chart coordinates of the Fermi parametrization, vectorized and complex-safe.

    ``u`` has shape (..., p) inside the unit ball and ``w`` shape (..., q+1) is
    unit; returns (..., p+q+1).
    """
    u = np.asarray(u)
    w = np.asarray(w)
    t2 = _sqnorm(u)[..., None]
    return np.concatenate([2 * u / (1 - t2), (1 + t2) / (1 - t2) * w], axis=-1)


def fermi_forward(chart: FermiChart, u, w) -> QuadricPoint:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    sig = chart.sig
    if u.shape != (sig.p,) or w.shape != (sig.q + 1,):
        raise ValueError("u must have length p and w length q+1")
    if np.linalg.norm(u) >= 1:
        raise OutOfBall(f"|u| = {np.linalg.norm(u):.6g} is not inside the unit ball")
    if abs(np.linalg.norm(w) - 1) > 1e-10:
        raise ValueError("w must be a unit vector")
    return QuadricPoint(chart.to_ambient(fermi_coords(u, w)), sig)


def fermi_inverse_coords(c, p: int):
    """Inverse of :func:`fermi_coords` on arrays of chart coordinates."""
    c = np.asarray(c, dtype=float)
    a, wv = c[..., :p], c[..., p:]
    f = np.linalg.norm(wv, axis=-1, keepdims=True)
    return a / (1 + f), wv / f


def fermi_inverse(chart: FermiChart, x):
    x = chart.sig.check(getattr(x, "coords", x))
    return fermi_inverse_coords(chart.to_chart(x), chart.sig.p)


def fermi_metric_factor(u) -> float:
    """Conformal factor f(|u|)^2 of the warped metric f^2 (g_{S^p_+} - g_{S^q})."""
    t = float(np.linalg.norm(u))
    if t >= 1:
        raise OutOfBall(f"|u| = {t:.6g} is not inside the unit ball")
    return fermi_factor(t) ** 2


def fermi_ball_metric(u):
    """Pull-back metric coefficients in ball coordinates.

    Returns ``(alpha, beta)`` with ``b = alpha |du|^2 - beta |dw|^2``; alpha is
    the hyperbolic factor 4/(1-|u|^2)^2 and beta is f(|u|)^2.
    """
    t2 = float(np.dot(u, u))
    if t2 >= 1:
        raise OutOfBall("u is not inside the unit ball")
    return 4.0 / (1 - t2) ** 2, ((1 + t2) / (1 - t2)) ** 2


def fermi_boundary(chart: FermiChart, theta, w) -> BoundaryPoint:
    """Boundary ray of the Fermi chart over the direction ``theta`` in S^{p-1}."""
    c = np.concatenate([np.asarray(theta, float), np.asarray(w, float)])
    return BoundaryPoint(chart.to_ambient(c), chart.sig)


def fermi_boundary_inverse(chart: FermiChart, y):
    """(theta, w) of a boundary ray, both unit."""
    c = chart.to_chart(chart.sig.check(getattr(y, "coords", y)))
    p = chart.sig.p
    a, wv = c[:p], c[p:]
    return a / np.linalg.norm(a), wv / np.linalg.norm(wv)


@dataclass(frozen=True)
class PolarChart:
    x0: QuadricPoint

    @property
    def sig(self) -> Signature:
        return self.x0.sig


def _check_direction(chart: PolarChart, v):
    v = np.asarray(chart.sig.check(v), dtype=float)
    x0 = chart.x0.coords
    if abs(bilinear_form(v, v, chart.sig) - 1) > 1e-10:
        raise BadDirection("direction must satisfy b(v, v) = 1")
    if abs(bilinear_form(v, x0, chart.sig)) > 1e-10:
        raise BadDirection("direction must be b-orthogonal to the basepoint")
    return v


def polar_forward(chart: PolarChart, v, r: float) -> QuadricPoint:
    v = _check_direction(chart, v)
    return QuadricPoint(np.cosh(r) * chart.x0.coords + np.sinh(r) * v, chart.sig)


def polar_contains(chart: PolarChart, y) -> bool:
    y = getattr(y, "coords", y)
    return bool(bilinear_form(y, chart.x0.coords, chart.sig) < -1)


def polar_inverse(chart: PolarChart, y):
    y = np.asarray(chart.sig.check(getattr(y, "coords", y)), dtype=float)
    x0 = chart.x0.coords
    c = -bilinear_form(y, x0, chart.sig)
    if not c > 1:
        raise OutsideDomain(f"b(y, x0) = {-c:.6g} is not below -1")
    r = np.arccosh(c)
    v = y / np.sinh(r) - x0 / np.tanh(r)
    return v, float(r)


def polar_boundary(chart: PolarChart, v) -> BoundaryPoint:
    v = _check_direction(chart, v)
    return BoundaryPoint(chart.x0.coords + v, chart.sig)


def polar_boundary_inverse(chart: PolarChart, y):
    """Direction v of a boundary ray in the polar chart, i.e. y/(-b(y, x0)) - x0."""
    y = np.asarray(chart.sig.check(getattr(y, "coords", y)), dtype=float)
    x0 = chart.x0.coords
    s = -bilinear_form(y, x0, chart.sig)
    if not s > 0:
        raise OutsideDomain("boundary ray does not satisfy b(y, x0) < 0")
    return y / s - x0

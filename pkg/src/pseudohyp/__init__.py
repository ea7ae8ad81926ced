"""Maximal spacelike graphs in pseudo-hyperbolic space H^{p,q}."""

from .core import Signature, QuadricPoint, BoundaryPoint, bilinear_form, classify_triple, TripleType
from .charts import FermiChart, PolarChart, fermi_forward, fermi_inverse, polar_forward, polar_inverse
from .spheres import (
    LipschitzSphereMap,
    SphereClassification,
    circle_mesh,
    classify_sphere,
    constant_map,
    icosphere_mesh,
)
from .grid import GridSpec, SpacelikeGraphGrid, mean_curvature
from .plateau import SolverParams, solve_maximal
from .curvature import CurvatureReport, curvature_report, beta_diagnostic
from .jacobi import jacobi_apply, jacobi_operator
from .cone import (
    ConeModel,
    barrier_verify,
    cone_from_boundary,
    graph_over_cone,
    indicial_polynomial,
    jacobi_polar_assemble,
    weighted_invertibility_probe,
    weighted_norm,
)
from .ads3 import CircleDiffeo, ExtensionReport, minimal_lagrangian_extension, mobius_diffeo, identity_diffeo
from .errors import PseudoHypError

__version__ = "0.1.0"

__all__ = [
    "Signature",
    "QuadricPoint",
    "BoundaryPoint",
    "bilinear_form",
    "classify_triple",
    "TripleType",
    "FermiChart",
    "PolarChart",
    "fermi_forward",
    "fermi_inverse",
    "polar_forward",
    "polar_inverse",
    "LipschitzSphereMap",
    "SphereClassification",
    "circle_mesh",
    "classify_sphere",
    "constant_map",
    "icosphere_mesh",
    "GridSpec",
    "SpacelikeGraphGrid",
    "mean_curvature",
    "SolverParams",
    "solve_maximal",
    "CurvatureReport",
    "curvature_report",
    "beta_diagnostic",
    "jacobi_apply",
    "jacobi_operator",
    "ConeModel",
    "barrier_verify",
    "cone_from_boundary",
    "graph_over_cone",
    "indicial_polynomial",
    "jacobi_polar_assemble",
    "weighted_invertibility_probe",
    "weighted_norm",
    "CircleDiffeo",
    "ExtensionReport",
    "minimal_lagrangian_extension",
    "mobius_diffeo",
    "identity_diffeo",
    "PseudoHypError",
]

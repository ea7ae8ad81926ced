"""Command-line driver: ``pseudohyp <task> <config.ini>``.

The config is an INI file. Relative paths inside it are resolved against the
config's own directory, so a config archived next to its outputs can be
re-run from anywhere. Example::

    [run]
    threads = 2

    [signature]
    p = 2
    q = 1

    [boundary]
    kind = circle_diffeo      ; or: file, constant
    diffeo = sine             ; identity, mobius, sine
    amplitude = 0.3
    mode = 2

    [grid]
    n = 65
    margin = 0.05

    [io]
    output = out

Exit status: 0 success, 1 I/O or validation error, 2 boundary rejected by the
classifier, 3 solver or projection failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .ads3 import (
    CircleDiffeo,
    ads_chart,
    area_preserving_check,
    boundary_attainment,
    boundary_from_circle_diffeo,
    hopf_check,
    identity_diffeo,
    minimal_lagrangian_extension,
    mobius_diffeo,
    surface_data,
)
from .charts import FermiChart, PolarChart
from .cone import cone_from_boundary, cone_geometry, graph_over_cone, indicial_polynomial, weighted_invertibility_probe
from .core import QuadricPoint, Signature
from .curvature import acausality_excess, curvature_report, hull_containment
from .errors import (
    ConfigError,
    HypothesisViolated,
    LinkNotSpacelike,
    NewtonDivergence,
    NotAdmissible,
    NotElliptic,
    ProjectionFailed,
    PseudoHypError,
    SpacelikeLost,
    SpacelikeViolation,
)
from .grid import geometry, spacelike_margin
from .plateau import SolverParams, solve_maximal
from .spheres import circle_mesh, classify_sphere, constant_map, icosphere_mesh

TASKS = ("classify", "solve", "analyze", "cone", "ads3")
THREADS_ENV = "PSEUDOHYP_THREADS"

EXIT_OK, EXIT_IO, EXIT_REJECTED, EXIT_SOLVER = 0, 1, 2, 3
SOLVER_ERRORS = (NewtonDivergence, SpacelikeLost, SpacelikeViolation, ProjectionFailed,
                 LinkNotSpacelike, NotElliptic, HypothesisViolated, np.linalg.LinAlgError)


@dataclass
class RunConfig:
    task: str
    p: int = 2
    q: int = 1
    n: int = 65
    margin: float = 0.05
    tol_H: float = 1e-8
    max_newton: int = 30
    t_step: float = 0.1
    r0: float = 1.0
    R: float = 8.0
    m: int = 64
    omegas: tuple = (0.0,)
    x0: tuple | None = None
    boundary: dict = field(default_factory=dict)
    input: Path | None = None
    output: Path = Path("out")
    threads: int = 1
    seed: int = 0

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.task in TASKS, f"unknown task {self.task!r}; expected one of {', '.join(TASKS)}")
        need(1 <= self.p <= 8 and 1 <= self.q <= 8, "signature entries must lie in 1..8")
        need(5 <= self.n <= 1025, "grid n must lie in 5..1025")
        need(0 < self.margin < 1, "grid margin must lie in (0, 1)")
        need(0 < self.tol_H <= 1e-2, "tol_H must lie in (0, 1e-2]")
        need(1 <= self.max_newton <= 1000, "max_newton must lie in 1..1000")
        need(0 < self.t_step <= 1, "continuation step must lie in (0, 1]")
        need(0 < self.r0 < self.R, "cone radii need 0 < r0 < R")
        need(8 <= self.m <= 4096, "cone m must lie in 8..4096")
        need(all(np.isfinite(self.omegas)), "omegas must be finite")
        need(self.threads >= 1, "threads must be positive")
        if self.x0 is not None:
            need(len(self.x0) == self.p + self.q + 1, "x0 has the wrong length")
        return self

    def solver_params(self):
        return SolverParams(tol_H=self.tol_H, max_newton=self.max_newton, t_step=self.t_step)


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def load_config(path, task: str, env=None) -> RunConfig:
    env = os.environ if env is None else env
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not valid") from None

    declared = get("run", "task", str, task)
    if declared != task:
        raise ConfigError(f"config declares task {declared!r} but {task!r} was requested")
    threads = get("run", "threads", int, None)
    if threads is None:
        try:
            threads = int(env.get(THREADS_ENV, "1"))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    inp = get("io", "input", str, None)
    bnd = dict(cp.items("boundary")) if cp.has_section("boundary") else {}
    if "file" in bnd:
        bnd["file"] = str(base / bnd["file"])
    cfg = RunConfig(
        task=task,
        p=get("signature", "p", int, 2),
        q=get("signature", "q", int, 1),
        n=get("grid", "n", int, 65),
        margin=get("grid", "margin", float, 0.05),
        tol_H=get("solver", "tol_H", float, 1e-8),
        max_newton=get("solver", "max_newton", int, 30),
        t_step=get("solver", "t_step", float, 0.1),
        r0=get("cone", "r0", float, 1.0),
        R=get("cone", "R", float, 8.0),
        m=get("cone", "m", int, 64),
        omegas=get("cone", "omegas", _floats, (0.0,)),
        x0=get("cone", "x0", _floats, None),
        boundary=bnd,
        input=base / inp if inp else None,
        output=base / get("io", "output", str, "out"),
        threads=threads,
        seed=get("run", "seed", int, 0),
    )
    return cfg.validate()


# -- boundary construction ------------------------------------------------------------


def circle_diffeo_from(opts: dict, n: int = 1024) -> CircleDiffeo:
    kind = opts.get("diffeo", "identity")
    if kind == "identity":
        return identity_diffeo(n)
    if kind == "mobius":
        g = _floats(opts.get("mobius", "1,0,0,1"))
        if len(g) != 4:
            raise ConfigError("mobius needs four entries a,b,c,d")
        return mobius_diffeo(np.array(g).reshape(2, 2), n)
    if kind == "sine":
        a, k = float(opts.get("amplitude", 0.3)), int(opts.get("mode", 2))
        if abs(a * k) >= 1:
            raise ConfigError("sine diffeo needs |amplitude * mode| < 1 to stay increasing")
        return CircleDiffeo.from_function(
            lambda t: t + a * np.sin(k * t), n,
            lambda t: 1 + a * k * np.cos(k * t), lambda t: -a * k * k * np.sin(k * t),
        )
    raise ConfigError(f"unknown diffeo {kind!r}")


def build_boundary(cfg: RunConfig):
    """(boundary map, chart) described by the [boundary] section."""
    opts = cfg.boundary
    kind = opts.get("kind", "file" if "file" in opts else None)
    sig = Signature(cfg.p, cfg.q)
    if kind == "file":
        phi = io.read_boundary(opts["file"])
        if (phi.p, phi.q) != (cfg.p, cfg.q):
            raise ConfigError(f"boundary file has signature ({phi.p},{phi.q}), config says ({cfg.p},{cfg.q})")
        return phi, FermiChart.standard(sig)
    if kind == "constant":
        count = int(opts.get("vertices", 64))
        mesh = circle_mesh(count) if cfg.p == 2 else icosphere_mesh(int(opts.get("level", 2)))
        w = _floats(opts.get("w", ",".join(["1"] + ["0"] * cfg.q)))
        if len(w) != cfg.q + 1:
            raise ConfigError("constant value w needs q + 1 entries")
        return constant_map(mesh, w), FermiChart.standard(sig)
    if kind == "circle_diffeo":
        if (cfg.p, cfg.q) != (2, 1):
            raise ConfigError("circle_diffeo boundaries need signature (2, 1)")
        f = circle_diffeo_from(opts, int(opts.get("samples", 1024)))
        return boundary_from_circle_diffeo(f, int(opts.get("vertices", 1024))), ads_chart()
    raise ConfigError("[boundary] needs kind = file, constant or circle_diffeo")


# -- tasks ------------------------------------------------------------------------------


def _classification_record(cls):
    return {
        "tag": cls.tag,
        "admissible": cls.admissible,
        "lipschitz_estimate": cls.lipschitz_estimate,
        "worst_pair": cls.worst_pair,
        "has_positive_triple": cls.has_positive_triple,
    }


def task_classify(cfg: RunConfig):
    phi, _ = build_boundary(cfg)
    cls = classify_sphere(phi)
    io.write_report(cfg.output / "classification.txt", _classification_record(cls))
    print(f"classification: {cls.tag}")
    if not cls.admissible:
        print(f"worst pair: {cls.worst_pair}", file=sys.stderr)
        return EXIT_REJECTED
    return EXIT_OK


def task_solve(cfg: RunConfig):
    phi, chart = build_boundary(cfg)
    G = solve_maximal(phi, cfg.n, cfg.margin, cfg.solver_params(), chart=chart)
    io.write_solution(cfg.output / "solution.txt", G)
    io.write_boundary(cfg.output / "boundary.txt", phi)
    rec = {k: G.info[k] for k in ("newton_iterations", "sup_H", "tol_H")}
    rec["continuation_steps"] = len(G.info["continuation"])
    io.write_report(cfg.output / "solve_report.txt", rec)
    print(f"solved: sup_H = {G.info['sup_H']:.3e} after {G.info['newton_iterations']} Newton iterations")
    return EXIT_OK


def _load_solution(cfg: RunConfig):
    if cfg.input is None:
        raise ConfigError("[io] input must name a solution file")
    phi = None
    if cfg.boundary:
        phi, _ = build_boundary(cfg)
    return io.read_solution(cfg.input, phi)


def task_analyze(cfg: RunConfig):
    G = _load_solution(cfg)
    rep = curvature_report(G)
    rec = rep.records()
    rec["acausality_excess"] = acausality_excess(G)
    rec["min_spacelike_margin"] = float(spacelike_margin(G.spec, geometry(G, need_laplacian=False)).min())
    if G.boundary is not None:
        frac, _ = hull_containment(G, seed=cfg.seed)
        rec["hull_containment"] = frac
    io.write_report(cfg.output / "analysis.txt", rec)
    print(f"analysis: sup |II| = {rep.sup_norm_II:.4g}, decay slope = {rep.decay_slope:.3f}")
    return EXIT_OK


def task_cone(cfg: RunConfig):
    phi, _ = build_boundary(cfg)
    sig = Signature(cfg.p, cfg.q)
    x0 = np.eye(sig.dim)[cfg.p] if cfg.x0 is None else np.array(cfg.x0)
    C = cone_from_boundary(phi, PolarChart(QuadricPoint(x0, sig)), cfg.r0, cfg.R, cfg.m)
    geo = cone_geometry(C)
    probe = weighted_invertibility_probe(C, cfg.omegas, geo, threads=cfg.threads)
    io.write_probe_table(cfg.output / "probe.txt", probe, {"r0": cfg.r0, "R": cfg.R, "m": cfg.m})
    ind = indicial_polynomial(cfg.p)
    rec = {
        "indicial_roots": ind.roots,
        "sup_norm_II_link": float(geo.norm_II_link().max()),
    }
    for w in cfg.omegas:
        d = indicial_polynomial(cfg.p, w)
        rec[f"sobolev_window_ok[{w:g}]"] = d.sobolev_window_ok
        rec[f"holder_window_ok[{w:g}]"] = d.holder_window_ok
    if cfg.input is not None:
        sec = graph_over_cone(io.read_solution(cfg.input, phi), C, geo=geo)
        rec["section_sup_norm"] = sec.sup_norm
        rec["section_decay_slope"] = sec.decay_slope
    io.write_report(cfg.output / "cone_report.txt", rec)
    print("cone probe: " + ", ".join(f"{w:g}: {s:.4g}" for w, s in probe.items()))
    return EXIT_OK


def task_ads3(cfg: RunConfig):
    if (cfg.p, cfg.q) != (2, 1):
        raise ConfigError("ads3 task needs signature (2, 1)")
    opts = cfg.boundary
    n_mesh = int(opts.get("vertices", 1024))
    f = circle_diffeo_from(opts, int(opts.get("samples", 1024)))
    rep = minimal_lagrangian_extension(f, cfg.n, cfg.margin, cfg.solver_params(), n_mesh=n_mesh)
    G = rep.nodes["G"]
    S = surface_data(G)
    area = area_preserving_check(G, data=S)
    hopf = hopf_check(G, data=S)
    io.write_extension_table(cfg.output / "extension.txt", rep)
    rec = dict(rep.summary())
    rec.update(
        area_defect=area.defect,
        area_fd_ratio_defect=area.fd_ratio_defect,
        hopf_antisymmetry=hopf.antisymmetry,
        hopf_cr_residual=hopf.cr_residual,
        boundary_attainment=boundary_attainment(G, f, data=S),
    )
    io.write_report(cfg.output / "ads3_report.txt", rec)
    print(f"ads3: sup |mu| = {rec['sup_mu_abs']:.3e}, l2_mu = {rep.l2_mu:.6g}, A_ren = {rep.a_ren:.6g}")
    return EXIT_OK


RUNNERS = {"classify": task_classify, "solve": task_solve, "analyze": task_analyze,
           "cone": task_cone, "ads3": task_ads3}


def run(cfg: RunConfig) -> int:
    try:
        cfg.output.mkdir(parents=True, exist_ok=True)
        return RUNNERS[cfg.task](cfg)
    except NotAdmissible as exc:
        print(f"rejected: {exc}; worst pair {exc.worst_pair}", file=sys.stderr)
        return EXIT_REJECTED
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PseudoHypError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pseudohyp", description="Maximal spacelike graphs in pseudo-hyperbolic space.")
    sub = ap.add_subparsers(dest="task", required=True)
    for t in TASKS:
        sub.add_parser(t).add_argument("config", type=Path)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.task)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

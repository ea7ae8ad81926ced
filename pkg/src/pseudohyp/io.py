"""Plain-text readers and writers.

Every table starts with ``# key = value`` header lines followed by
whitespace-separated rows. Floats are written with ``repr`` (shortest
round-trip form), so reading a file back reproduces the values exactly.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .charts import FermiChart
from .core import Signature
from .errors import ConfigError, EmptyInput
from .grid import GridSpec, SpacelikeGraphGrid
from .spheres import LipschitzSphereMap, circle_mesh, mesh_from_vertices


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (tuple, list, np.ndarray)):
        return ",".join(fmt(v) for v in x)
    if x is None:
        return "none"
    return str(x)


def parse_value(s: str):
    s = s.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    if "," in s:
        return tuple(parse_value(t) for t in s.split(","))
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _write_table(path, header: dict, rows, columns=None):
    path = Path(path)
    lines = [f"# {k} = {fmt(v)}" for k, v in header.items()]
    if columns:
        lines.append("# columns: " + " ".join(columns))
    for row in np.atleast_2d(rows) if len(rows) else []:
        lines.append(" ".join(fmt(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _read_table(path):
    header, rows = {}, []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                header[k.strip()] = parse_value(v)
            continue
        rows.append([float(t) for t in line.split()])
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"{path}: ragged rows")
    return header, np.array(rows)


# -- key = value reports ----------------------------------------------------


def write_report(path, record: dict):
    path = Path(path)
    path.write_text("".join(f"{k} = {fmt(v)}\n" for k, v in record.items()))
    return path


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: malformed line {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out


# -- boundary maps ------------------------------------------------------------


def write_boundary(path, phi: LipschitzSphereMap):
    header = {"kind": "boundary", "p": phi.p, "q": phi.q, "vertices": len(phi.mesh)}
    cols = [f"theta{i}" for i in range(phi.p)] + [f"w{i}" for i in range(phi.q + 1)]
    return _write_table(path, header, phi.boundary_coords(), cols)


def read_boundary(path) -> LipschitzSphereMap:
    header, rows = _read_table(path)
    try:
        p, q = int(header["p"]), int(header["q"])
    except KeyError as exc:
        raise ConfigError(f"{path}: missing header {exc}") from None
    if rows.shape[1] != p + q + 1:
        raise ConfigError(f"{path}: expected {p + q + 1} columns, found {rows.shape[1]}")
    if "vertices" in header and int(header["vertices"]) != len(rows):
        raise ConfigError(f"{path}: header lists {header['vertices']} vertices, found {len(rows)}")
    V, W = rows[:, :p], rows[:, p:]
    if p == 2:
        mesh = circle_mesh(len(V))
        ang = np.arctan2(V[:, 1], V[:, 0])
        order = np.argsort(np.mod(ang, 2 * np.pi))
        if np.abs(mesh.vertices - V[order]).max() > 1e-9:
            raise ConfigError(f"{path}: p = 2 boundaries must sit on a uniform circle mesh")
        return LipschitzSphereMap(mesh, W[order])
    return LipschitzSphereMap(mesh_from_vertices(V), W)


# -- solutions ------------------------------------------------------------------


def write_solution(path, G: SpacelikeGraphGrid):
    spec = G.spec
    header = {
        "kind": "solution", "p": G.p, "q": G.q, "n": spec.n, "margin": spec.margin,
        "frame": G.chart.frame.ravel(),
    }
    for k in ("newton_iterations", "sup_H", "tol_H"):
        if k in G.info:
            header[k] = G.info[k]
    act = spec.active
    rows = np.column_stack([spec.index[act], G.values[act]])
    cols = [f"i{a}" for a in range(G.p)] + [f"w{i}" for i in range(G.q + 1)]
    return _write_table(path, header, rows, cols)


def read_solution(path, boundary: LipschitzSphereMap | None = None) -> SpacelikeGraphGrid:
    header, rows = _read_table(path)
    p, q, n = int(header["p"]), int(header["q"]), int(header["n"])
    sig = Signature(p, q)
    frame = np.array(header["frame"], dtype=float).reshape(sig.dim, sig.dim)
    spec = GridSpec(p, n, float(header["margin"]))
    W = np.full((n**p, q + 1), np.nan)
    if rows.shape[1] != p + q + 1:
        raise ConfigError(f"{path}: expected {p + q + 1} columns, found {rows.shape[1]}")
    strides = n ** np.arange(p - 1, -1, -1)
    idx = rows[:, :p].astype(int) @ strides
    if not np.array_equal(np.sort(idx), spec.active):
        raise ConfigError(f"{path}: node set does not match the grid")
    W[idx] = rows[:, p:]
    info = {k: header[k] for k in ("newton_iterations", "sup_H", "tol_H") if k in header}
    return SpacelikeGraphGrid(FermiChart(sig, frame), spec, W, boundary, info)


# -- probe and extension tables ------------------------------------------------------


def write_probe_table(path, probe: dict, header: dict | None = None):
    rows = np.array([[w, s] for w, s in sorted(probe.items())])
    return _write_table(path, {"kind": "probe", **(header or {})}, rows, ["omega", "sigma_min"])


def read_probe_table(path) -> dict:
    _, rows = _read_table(path)
    return {float(w): float(s) for w, s in rows}


def write_extension_table(path, report):
    header = {"kind": "extension", **report.summary()}
    cols = ["x", "y", "ReF", "ImF", "lambda", "K", "mu_abs"]
    return _write_table(path, header, report.rows(), cols)


def read_extension_table(path):
    return _read_table(path)

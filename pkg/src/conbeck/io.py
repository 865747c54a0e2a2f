"""File formats: JSON codecs and CSV helpers.

JSON documents use plain ``repr`` floats (Python's shortest round-trip
representation), so a save/load cycle reproduces every array bit for bit.
Schema problems raise :class:`~conbeck.errors.FormatError`; semantic graph
problems surface as :class:`~conbeck.errors.InvalidGraphError` when
``validate=True``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError
from .graph import (
    EXACT_ORTHOGONALITY_TOL,
    ORTHOGONALITY_TOL,
    ConnectionGraph,
    polar_project,
)

__all__ = [
    "graph_from_dict",
    "graph_to_dict",
    "load_graph",
    "save_graph",
    "field_from_dict",
    "field_to_dict",
    "load_field",
    "save_field",
    "flow_from_dict",
    "flow_to_dict",
    "load_flow",
    "save_flow",
    "frames_from_dict",
    "frames_to_dict",
    "load_frames",
    "save_frames",
    "tau_from_dict",
    "tau_to_dict",
    "load_tau",
    "save_tau",
    "trajectory_from_dict",
    "trajectory_to_dict",
    "load_trajectory",
    "save_trajectory",
    "save_report",
    "load_points",
    "save_points",
    "load_matrix",
    "save_matrix",
    "load_labels",
    "save_labels",
    "save_active_edges",
]


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected a JSON object at top level")
    return obj


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _get(obj, key, where):
    if key not in obj:
        raise FormatError(f"{where}: missing required key {key!r}")
    return obj[key]


def _get_int(obj, key, where, minimum=0):
    value = _get(obj, key, where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"{where}: key {key!r} must be an integer, got {value!r}")
    if value < minimum:
        raise FormatError(f"{where}: key {key!r} must be >= {minimum}, got {value}")
    return value


def _as_array(values, shape, where):
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: expected a numeric array ({exc})") from exc
    if arr.shape != shape:
        raise FormatError(f"{where}: expected shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise FormatError(f"{where}: array contains non-finite entries")
    return arr


def _nested(arr):
    return arr.tolist()


def _orthonormal_stack(arr, where, tol=ORTHOGONALITY_TOL):
    """Polar-project a stack of (semi-)orthogonal matrices, or complain."""
    out = np.array(arr)
    d = arr.shape[-1]
    eye = np.eye(d)
    for k in range(arr.shape[0]):
        defect = np.abs(arr[k].T @ arr[k] - eye).max()
        if defect > tol:
            raise FormatError(
                f"{where}: matrix {k} is not orthonormal within {tol:g} "
                f"(max Gram deviation {defect:.3e})"
            )
        if defect > EXACT_ORTHOGONALITY_TOL:
            out[k] = polar_project(arr[k])
    return out


# ---------------------------------------------------------------------------
# connection graphs
# ---------------------------------------------------------------------------


def graph_to_dict(g):
    return g.to_json_dict()


def graph_from_dict(obj, validate=True):
    """Decode a connection graph document.

    Edge order in the file is preserved and defines the edge indexing.
    Reversed pairs (``i > j``) are flipped with the transposed matrix;
    near-orthogonal matrices are snapped to exactly orthogonal ones.
    """
    where = "graph"
    n = _get_int(obj, "n", where, minimum=1)
    d = _get_int(obj, "d", where, minimum=1)
    edges = _get(obj, "edges", where)
    if not isinstance(edges, list):
        raise FormatError(f"{where}: 'edges' must be a list")
    parsed = []
    for k, entry in enumerate(edges):
        loc = f"{where}: edge {k}"
        if not isinstance(entry, dict):
            raise FormatError(f"{loc}: expected an object")
        i = _get_int(entry, "i", loc)
        j = _get_int(entry, "j", loc)
        w = _get(entry, "w", loc)
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise FormatError(f"{loc}: 'w' must be a number, got {w!r}")
        sigma = _get(entry, "sigma", loc)
        if not isinstance(sigma, list) or len(sigma) != d * d:
            raise FormatError(
                f"{loc}: 'sigma' must be a flat row-major list of {d * d} numbers"
            )
        parsed.append((i, j, float(w), _as_array(sigma, (d * d,), loc).reshape(d, d)))
    g = ConnectionGraph.from_edges(n, d, parsed).canonicalized()
    if validate:
        g.require_valid()
    return g


def load_graph(path, validate=True):
    return graph_from_dict(_load_json(path), validate=validate)


def save_graph(path, g):
    _dump_json(path, graph_to_dict(g))


# ---------------------------------------------------------------------------
# vertex fields and edge flows
# ---------------------------------------------------------------------------


def field_to_dict(field):
    field = np.asarray(field, dtype=float)
    n, d = field.shape
    return {"n": n, "d": d, "values": _nested(field)}


def field_from_dict(obj):
    where = "field"
    n = _get_int(obj, "n", where, minimum=1)
    d = _get_int(obj, "d", where, minimum=1)
    return _as_array(_get(obj, "values", where), (n, d), where)


def load_field(path):
    return field_from_dict(_load_json(path))


def save_field(path, field):
    _dump_json(path, field_to_dict(field))


def flow_to_dict(flow):
    flow = np.asarray(flow, dtype=float)
    m, d = flow.shape
    return {"m": m, "d": d, "values": _nested(flow)}


def flow_from_dict(obj):
    where = "flow"
    m = _get_int(obj, "m", where, minimum=0)
    d = _get_int(obj, "d", where, minimum=1)
    return _as_array(_get(obj, "values", where), (m, d), where)


def load_flow(path):
    return flow_from_dict(_load_json(path))


def save_flow(path, flow):
    _dump_json(path, flow_to_dict(flow))


# ---------------------------------------------------------------------------
# tangent frames and switching functions
# ---------------------------------------------------------------------------


def frames_to_dict(frames):
    frames = np.asarray(frames, dtype=float)
    n, p, d = frames.shape
    return {"n": n, "p": p, "d": d, "frames": _nested(frames)}


def frames_from_dict(obj):
    where = "frames"
    n = _get_int(obj, "n", where, minimum=1)
    p = _get_int(obj, "p", where, minimum=1)
    d = _get_int(obj, "d", where, minimum=1)
    if d > p:
        raise FormatError(f"{where}: intrinsic dimension d={d} exceeds ambient p={p}")
    arr = _as_array(_get(obj, "frames", where), (n, p, d), where)
    return _orthonormal_stack(arr, where)


def load_frames(path):
    return frames_from_dict(_load_json(path))


def save_frames(path, frames):
    _dump_json(path, frames_to_dict(frames))


def tau_to_dict(tau):
    tau = np.asarray(tau, dtype=float)
    n, d, _ = tau.shape
    return {"n": n, "d": d, "tau": _nested(tau)}


def tau_from_dict(obj):
    where = "tau"
    n = _get_int(obj, "n", where, minimum=1)
    d = _get_int(obj, "d", where, minimum=1)
    arr = _as_array(_get(obj, "tau", where), (n, d, d), where)
    return _orthonormal_stack(arr, where)


def load_tau(path):
    return tau_from_dict(_load_json(path))


def save_tau(path, tau):
    _dump_json(path, tau_to_dict(tau))


# ---------------------------------------------------------------------------
# trajectories and reports
# ---------------------------------------------------------------------------


def trajectory_to_dict(states, ambient=None):
    states = [np.asarray(s, dtype=float) for s in states]
    n, d = states[0].shape
    obj = {
        "n": n,
        "d": d,
        "steps": len(states) - 1,
        "states": [_nested(s) for s in states],
    }
    if ambient is not None:
        obj["ambient"] = [_nested(np.asarray(a, dtype=float)) for a in ambient]
    return obj


def trajectory_from_dict(obj):
    where = "trajectory"
    n = _get_int(obj, "n", where, minimum=1)
    d = _get_int(obj, "d", where, minimum=1)
    steps = _get_int(obj, "steps", where, minimum=0)
    raw = _get(obj, "states", where)
    if not isinstance(raw, list) or len(raw) != steps + 1:
        raise FormatError(f"{where}: 'states' must list {steps + 1} fields")
    states = [_as_array(s, (n, d), f"{where}: state {k}") for k, s in enumerate(raw)]
    ambient = None
    if "ambient" in obj:
        raw_amb = obj["ambient"]
        if not isinstance(raw_amb, list) or len(raw_amb) != steps + 1:
            raise FormatError(f"{where}: 'ambient' must list {steps + 1} arrays")
        first = np.asarray(raw_amb[0], dtype=float)
        if first.ndim != 2 or first.shape[0] != n:
            raise FormatError(f"{where}: ambient state 0 must have {n} rows")
        p = first.shape[1]
        ambient = [
            _as_array(a, (n, p), f"{where}: ambient state {k}")
            for k, a in enumerate(raw_amb)
        ]
    return states, ambient


def load_trajectory(path):
    return trajectory_from_dict(_load_json(path))


def save_trajectory(path, states, ambient=None):
    _dump_json(path, trajectory_to_dict(states, ambient=ambient))


def save_report(path, report):
    _dump_json(path, report.to_json_dict())


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def load_points(path):
    """Read a point cloud from CSV; separator (comma/whitespace) is sniffed.

    A single non-numeric first row is tolerated as a header.
    """
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    first_data = True
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        tokens = [t for t in text.split(",")] if "," in text else text.split()
        try:
            row = [float(t) for t in tokens]
        except ValueError as exc:
            if first_data:
                first_data = False  # header row
                continue
            raise FormatError(f"{path}: line {lineno}: non-numeric entry") from exc
        first_data = False
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(
                f"{path}: line {lineno}: expected {width} columns, got {len(row)}"
            )
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no data rows found")
    return np.array(rows)


def save_points(path, cloud):
    cloud = np.asarray(cloud, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for row in cloud:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def save_matrix(path, mat):
    """Write a dense matrix as CSV; infinities are spelled ``inf``."""
    save_points(path, mat)


def load_matrix(path):
    return load_points(path)


def save_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for lab in np.asarray(labels, dtype=int):
            fh.write(f"{int(lab)}\n")


def load_labels(path):
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                labels.append(int(text))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: not an integer") from exc
    return np.array(labels, dtype=int)


def save_active_edges(path, g, flow, delta=0.0):
    """Write active edges (per-edge flow norm above ``delta``) as CSV."""
    flow = np.asarray(flow, dtype=float).reshape(g.m, g.d)
    norms = np.linalg.norm(flow, axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("edge_index,i,j,flow_norm\n")
        for e in range(g.m):
            if norms[e] > delta:
                i, j = g.edge_index[e]
                fh.write(f"{e},{int(i)},{int(j)},{repr(float(norms[e]))}\n")

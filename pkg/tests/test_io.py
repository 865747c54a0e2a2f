"""File formats: JSON codecs, CSV helpers, round-trip exactness."""

from __future__ import annotations

import json

import numpy as np
import pytest

from conbeck.errors import FormatError, InvalidGraphError
from conbeck.graph import ConnectionGraph, random_orthogonal
from conbeck.io import (
    graph_from_dict,
    load_field,
    load_flow,
    load_frames,
    load_graph,
    load_labels,
    load_matrix,
    load_points,
    load_tau,
    load_trajectory,
    save_active_edges,
    save_field,
    save_flow,
    save_frames,
    save_graph,
    save_labels,
    save_matrix,
    save_points,
    save_tau,
    save_trajectory,
)
from conbeck.solver import SolveOptions, solve_regularized

from conftest import random_connected_graph


# -------------------------------------------------------------------- graphs


def test_graph_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(70)
    g = random_connected_graph(rng, n=7, d=3, extra_edges=5)
    path = tmp_path / "g.json"
    save_graph(path, g)
    loaded = load_graph(path)
    assert loaded.n == g.n and loaded.d == g.d
    assert np.array_equal(loaded.edge_index, g.edge_index)
    assert np.array_equal(loaded.weights, g.weights)
    assert np.array_equal(loaded.sigmas, g.sigmas)
    # second cycle is also stable
    path2 = tmp_path / "g2.json"
    save_graph(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_graph_load_reprojects_noisy_sigma(tmp_path):
    rng = np.random.default_rng(71)
    sigma = random_orthogonal(2, rng) + rng.standard_normal((2, 2)) * 1e-10
    obj = {
        "n": 2,
        "d": 2,
        "edges": [{"i": 0, "j": 1, "w": 1.0, "sigma": [float(x) for x in sigma.ravel()]}],
    }
    g = graph_from_dict(obj)
    defect = np.abs(g.sigmas[0].T @ g.sigmas[0] - np.eye(2)).max()
    assert defect <= 1e-12


def test_graph_load_rejects_far_from_orthogonal():
    obj = {
        "n": 2,
        "d": 1,
        "edges": [{"i": 0, "j": 1, "w": 1.0, "sigma": [2.0]}],
    }
    with pytest.raises(InvalidGraphError):
        graph_from_dict(obj)
    g = graph_from_dict(obj, validate=False)
    assert any("orthogonal" in v for v in g.violations)


def test_graph_load_flips_reversed_edges():
    sigma = np.array([[0.0, 1.0], [-1.0, 0.0]])
    obj = {
        "n": 2,
        "d": 2,
        "edges": [{"i": 1, "j": 0, "w": 2.0, "sigma": [float(x) for x in sigma.ravel()]}],
    }
    g = graph_from_dict(obj)
    assert g.edge_index.tolist() == [[0, 1]]
    assert np.array_equal(g.sigmas[0], sigma.T)


def test_graph_schema_errors():
    with pytest.raises(FormatError):
        graph_from_dict({"d": 1, "edges": []})  # missing n
    with pytest.raises(FormatError):
        graph_from_dict({"n": 2, "d": 1, "edges": "nope"})
    with pytest.raises(FormatError):
        graph_from_dict(
            {"n": 2, "d": 2, "edges": [{"i": 0, "j": 1, "w": 1.0, "sigma": [1.0]}]}
        )
    with pytest.raises(FormatError):
        graph_from_dict(
            {"n": 2, "d": 1, "edges": [{"i": 0, "j": 1, "w": True, "sigma": [1.0]}]}
        )


def test_graph_file_not_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json at all {")
    with pytest.raises(FormatError):
        load_graph(path)


# ------------------------------------------------------------ fields / flows


def test_field_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(72)
    field = rng.standard_normal((6, 3)) * np.pi
    path = tmp_path / "f.json"
    save_field(path, field)
    assert np.array_equal(load_field(path), field)


def test_flow_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(73)
    flow = rng.standard_normal((9, 2)) / 3.0
    path = tmp_path / "J.json"
    save_flow(path, flow)
    assert np.array_equal(load_flow(path), flow)


def test_field_shape_mismatch_raises():
    with pytest.raises(FormatError):
        load_field_obj = {"n": 3, "d": 2, "values": [[1.0, 2.0], [3.0, 4.0]]}
        from conbeck.io import field_from_dict

        field_from_dict(load_field_obj)


def test_field_non_finite_rejected(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"n": 1, "d": 1, "values": [[float("nan")]]}))
    with pytest.raises(FormatError):
        load_field(path)


# ------------------------------------------------------------- frames / tau


def test_frames_round_trip(tmp_path):
    rng = np.random.default_rng(74)
    frames = np.zeros((4, 3, 2))
    for k in range(4):
        q = np.linalg.qr(rng.standard_normal((3, 2)))[0]
        frames[k] = q
    path = tmp_path / "frames.json"
    save_frames(path, frames)
    loaded = load_frames(path)
    assert np.array_equal(loaded, frames)


def test_frames_reject_non_orthonormal():
    from conbeck.io import frames_from_dict

    bad = np.ones((1, 3, 2)).tolist()
    with pytest.raises(FormatError):
        frames_from_dict({"n": 1, "p": 3, "d": 2, "frames": bad})
    with pytest.raises(FormatError):
        frames_from_dict({"n": 1, "p": 2, "d": 3, "frames": np.zeros((1, 2, 3)).tolist()})


def test_tau_round_trip(tmp_path):
    rng = np.random.default_rng(75)
    tau = np.stack([random_orthogonal(2, rng) for _ in range(5)])
    path = tmp_path / "tau.json"
    save_tau(path, tau)
    assert np.array_equal(load_tau(path), tau)


# ---------------------------------------------------------------- trajectory


def test_trajectory_round_trip(tmp_path):
    rng = np.random.default_rng(76)
    states = [rng.standard_normal((4, 2)) for _ in range(3)]
    path = tmp_path / "traj.json"
    save_trajectory(path, states)
    loaded, ambient = load_trajectory(path)
    assert ambient is None
    assert len(loaded) == 3
    for got, want in zip(loaded, states):
        assert np.array_equal(got, want)


def test_trajectory_with_ambient(tmp_path):
    rng = np.random.default_rng(77)
    states = [rng.standard_normal((4, 2)) for _ in range(2)]
    ambient = [rng.standard_normal((4, 3)) for _ in range(2)]
    path = tmp_path / "traj.json"
    save_trajectory(path, states, ambient=ambient)
    loaded, amb = load_trajectory(path)
    assert len(amb) == 2
    for got, want in zip(amb, ambient):
        assert np.array_equal(got, want)


def test_trajectory_wrong_state_count():
    from conbeck.io import trajectory_from_dict

    with pytest.raises(FormatError):
        trajectory_from_dict(
            {"n": 2, "d": 1, "steps": 3, "states": [[[0.0], [0.0]]]}
        )


# ----------------------------------------------------------------------- CSV


def test_points_comma_and_whitespace(tmp_path):
    pa = tmp_path / "a.csv"
    pa.write_text("1.5,2.5\n-3.0,4.0\n")
    pb = tmp_path / "b.txt"
    pb.write_text("1.5 2.5\n-3.0 4.0\n")
    a = load_points(pa)
    b = load_points(pb)
    assert np.array_equal(a, b)
    assert a.shape == (2, 2)


def test_points_header_skipped(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("x,y,z\n1.0,2.0,3.0\n")
    assert load_points(path).shape == (1, 3)


def test_points_ragged_rejected(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(FormatError):
        load_points(path)


def test_points_empty_rejected(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("\n\n")
    with pytest.raises(FormatError):
        load_points(path)


def test_points_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(78)
    cloud = rng.standard_normal((10, 3)) * 17.3
    path = tmp_path / "cloud.csv"
    save_points(path, cloud)
    assert np.array_equal(load_points(path), cloud)


def test_matrix_with_inf_round_trip(tmp_path):
    mat = np.array([[0.0, np.inf], [np.inf, 0.0]])
    path = tmp_path / "D.csv"
    save_matrix(path, mat)
    assert np.array_equal(load_matrix(path), mat)


def test_labels_round_trip(tmp_path):
    labels = np.array([0, 2, 1, 1, 0])
    path = tmp_path / "labels.csv"
    save_labels(path, labels)
    assert np.array_equal(load_labels(path), labels)


def test_active_edges_csv(tmp_path, diamond_problem):
    g, alpha, beta, _ = diamond_problem
    flow, _, _ = solve_regularized(g, alpha, beta, SolveOptions(lam=1.0))
    path = tmp_path / "active.csv"
    save_active_edges(path, g, flow, delta=0.5)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "edge_index,i,j,flow_norm"
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["0", "2"]
    assert rows[0][1:3] == ["0", "1"]
    norms = [float(r[3]) for r in rows]
    assert max(abs(x - 0.75) for x in norms) <= 1e-5

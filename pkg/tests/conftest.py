"""Shared fixtures: small hand-checked graphs and randomized generators."""

from __future__ import annotations

import numpy as np
import pytest

from conbeck.graph import ConnectionGraph, random_orthogonal


@pytest.fixture
def sign_path():
    """Path 0-1-2, d=1, unit weights, sigma_01 = +1, sigma_12 = -1.

    Hand-checked facts: the cycle space is empty, the connection is
    consistent, and ker(L) is spanned by (1, 1, -1)/sqrt(3) (a kernel
    vector f satisfies f(i) = sigma_ij f(j) across each edge).
    """
    return ConnectionGraph.from_edges(
        3, 1, [(0, 1, 1.0, [[1.0]]), (1, 2, 1.0, [[-1.0]])]
    )


@pytest.fixture
def diamond():
    """Four-cycle 0-1-3-2-0, d=1, unit weights, sigma_02 = -1, others +1.

    The single fundamental cycle has product -1, so the connection is
    inconsistent and ker(L) = {0}: every pair of densities is feasible.
    B is square (4 x 4) and nonsingular, so each right-hand side has a
    unique flow.  For alpha = delta_0 and beta = 0.5 * delta_3 the unique
    flow has magnitudes 0.75 on edges (0,1) and (1,3) and 0.25 on edges
    (0,2) and (2,3), giving sum w|J| = 2 and, with lambda = 1, a
    regularized cost of 2 + 0.5 * (2 * 0.5625 + 2 * 0.0625) = 2.625.
    """
    edges = [
        (0, 1, 1.0, [[1.0]]),
        (0, 2, 1.0, [[-1.0]]),
        (1, 3, 1.0, [[1.0]]),
        (2, 3, 1.0, [[1.0]]),
    ]
    return ConnectionGraph.from_edges(4, 1, edges)


@pytest.fixture
def diamond_problem(diamond):
    alpha = np.array([[1.0], [0.0], [0.0], [0.0]])
    beta = np.array([[0.0], [0.0], [0.0], [0.5]])
    norms = np.array([0.75, 0.25, 0.75, 0.25])
    return diamond, alpha, beta, norms


def make_path_graph(n, d, weights=None):
    """Trivial-connection path 0-1-...-(n-1)."""
    if weights is None:
        weights = [1.0] * (n - 1)
    return ConnectionGraph.trivial(n, d, [(i, i + 1, w) for i, w in enumerate(weights)])


def make_grid_graph(rows, cols, d):
    """Trivial-connection unit-weight grid, vertices numbered row-major."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1, 1.0))
            if r + 1 < rows:
                edges.append((u, u + cols, 1.0))
    return ConnectionGraph.trivial(rows * cols, d, edges)


def random_connected_graph(rng, n, d, extra_edges=2, consistent=None, w_range=(0.5, 2.0)):
    """Random connected connection graph.

    A random spanning tree plus ``extra_edges`` distinct chords.  With
    ``consistent=True`` the sigmas are a switched trivial connection
    (sigma_ij = tau_i^T tau_j), hence every cycle product is the identity.
    With ``consistent=False`` one chord is additionally perturbed by a
    nontrivial orthogonal factor, breaking a cycle.  ``None`` leaves the
    sigmas fully random.
    """
    pairs = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        pairs.add((u, v))
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(all_pairs)
    chords = []
    for p in all_pairs:
        if len(chords) >= extra_edges:
            break
        if p not in pairs:
            pairs.add(p)
            chords.append(p)
    pairs = sorted(pairs)
    w = rng.uniform(*w_range, size=len(pairs))

    if consistent is None:
        sig = np.array([random_orthogonal(d, rng) for _ in pairs])
    else:
        tau = np.array([random_orthogonal(d, rng) for _ in range(n)])
        sig = np.array([tau[i].T @ tau[j] for i, j in pairs])
        if consistent is False:
            if not chords:
                raise ValueError("need at least one chord to break consistency")
            e = pairs.index(chords[0])
            if d == 1:
                sig[e] = -sig[e]
            else:
                theta = rng.uniform(0.5, np.pi - 0.5)
                rot = np.eye(d)
                rot[0, 0] = rot[1, 1] = np.cos(theta)
                rot[0, 1] = -np.sin(theta)
                rot[1, 0] = np.sin(theta)
                sig[e] = sig[e] @ rot
    edges = [(i, j, w[e], sig[e]) for e, (i, j) in enumerate(pairs)]
    return ConnectionGraph.from_edges(n, d, edges)


def random_density(rng, n, d):
    """Random vector density: nonnegative entries, each channel sums to 1."""
    vals = rng.uniform(0.1, 1.0, size=(n, d))
    return vals / vals.sum(axis=0, keepdims=True)

"""Field utilities: pseudo-Diracs, ring interpolation, distances, clustering.

Rings partition the edge set by hop distance from the support of a
source field; truncating an optimal flow to growing disks yields a
discrete interpolation trajectory from the source toward the target.
Pairwise regularized transport costs assemble into distance matrices
that feed a small deterministic spectral clustering.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGraphError, NonConvergenceError
from .feasibility import kernel_numeric
from .graph import ConnectionGraph, apply_B
from .solver import SolveOptions, solve_regularized

__all__ = [
    "pseudo_dirac",
    "nodal_support",
    "RingPartition",
    "edge_rings",
    "interpolate_trajectory",
    "active_edges",
    "distance_matrix",
    "ClusterResult",
    "spectral_cluster",
]


def pseudo_dirac(n, d, node, channel):
    """Density concentrated at one (node, channel), uniform elsewhere.

    The selected channel is the indicator of ``node``; every other channel
    is the uniform density 1/n, so all channel sums equal one.
    """
    if not 0 <= node < n:
        raise InvalidGraphError(f"node {node} out of range for n = {n}")
    if not 0 <= channel < d:
        raise InvalidGraphError(f"channel {channel} out of range for d = {d}")
    field = np.full((n, d), 1.0 / n)
    field[:, channel] = 0.0
    field[node, channel] = 1.0
    return field


def nodal_support(field, threshold=1e-9):
    """Vertices where the field's per-vertex norm exceeds ``threshold``."""
    field = np.asarray(field, dtype=float)
    norms = np.linalg.norm(field, axis=1)
    return np.flatnonzero(norms > threshold)


@dataclass(frozen=True)
class RingPartition:
    """Edge rings by hop distance from a support set.

    ``vertex_distance[i]`` is the unweighted hop distance from vertex ``i``
    to the support; ``edge_ring[e] = min(dist_i, dist_j)``.  The k-th disk
    is the set of edges with ring index strictly below ``k``.
    """

    vertex_distance: np.ndarray
    edge_ring: np.ndarray

    def disk(self, k):
        """Boolean mask over edges of the k-th disk ``{e : r(e) < k}``."""
        return self.edge_ring < k

    @property
    def max_ring(self):
        return int(self.edge_ring.max()) if self.edge_ring.size else 0


def edge_rings(g: ConnectionGraph, support):
    """Multi-source BFS rings of the edge set around ``support`` vertices."""
    g.require_valid()
    support = np.asarray(support, dtype=int).reshape(-1)
    if support.size == 0:
        raise InvalidGraphError("ring partition needs a nonempty support")
    if support.min() < 0 or support.max() >= g.n:
        raise InvalidGraphError("support vertex out of range")
    dist = np.full(g.n, -1, dtype=int)
    queue = list(dict.fromkeys(int(v) for v in support))
    for v in queue:
        dist[v] = 0
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        for v, _ in g.neighbors[u]:
            if dist[v] == -1:
                dist[v] = dist[u] + 1
                queue.append(v)
    ring = np.minimum(dist[g.edge_index[:, 0]], dist[g.edge_index[:, 1]])
    return RingPartition(dist, ring)


def interpolate_trajectory(g: ConnectionGraph, alpha, flow, rings: RingPartition, steps):
    """Truncated-flow trajectory ``alpha_k = alpha - B (J restricted to disk k)``.

    Returns ``steps + 1`` fields; the first is ``alpha`` exactly (the empty
    disk) and, once every active edge is inside the disk, the trajectory
    sits at ``alpha - B J``.
    """
    g.require_valid()
    alpha = np.asarray(alpha, dtype=float).reshape(g.n, g.d)
    flow = np.asarray(flow, dtype=float).reshape(g.m, g.d)
    out = []
    for k in range(steps + 1):
        mask = rings.disk(k)
        if not mask.any():
            out.append(alpha.copy())
            continue
        truncated = np.where(mask[:, None], flow, 0.0)
        out.append(alpha - apply_B(g, truncated))
    return out


def active_edges(flow, delta=0.0):
    """Indices of edges whose flow norm strictly exceeds ``delta``."""
    flow = np.asarray(flow, dtype=float)
    return np.flatnonzero(np.linalg.norm(flow, axis=1) > delta)


def _solve_pair(args):
    g, alpha, beta, opts = args
    _, _, report = solve_regularized(g, alpha, beta, opts)
    return report.primal_cost, report.converged


def distance_matrix(
    g: ConnectionGraph,
    fields,
    opts: SolveOptions | None = None,
    jobs=1,
    feas_tol=1e-8,
    require_convergence=True,
    return_converged=False,
):
    """Symmetric matrix of pairwise regularized transport costs.

    Infeasible pairs get ``inf`` without running the solver; the diagonal
    is exactly zero.  With ``jobs > 1`` the pairwise solves run in a
    process pool (they are independent); results are deterministic either
    way.  A pair that exhausts the epoch budget raises
    :class:`NonConvergenceError` unless ``require_convergence=False``.
    With ``return_converged=True`` a boolean matrix of per-pair convergence
    flags is returned alongside (infeasible pairs and the diagonal count
    as converged).
    """
    if opts is None:
        opts = SolveOptions()
    fields = [np.asarray(f, dtype=float).reshape(g.n, g.d) for f in fields]
    k = len(fields)
    basis = kernel_numeric(g)
    dist = np.zeros((k, k))
    conv = np.ones((k, k), dtype=bool)
    tasks = []
    for a in range(k):
        for b in range(a + 1, k):
            diff = fields[a] - fields[b]
            scale = max(1.0, float(np.linalg.norm(diff)))
            ips = basis.inner_products(diff)
            if ips.size and np.abs(ips).max() > feas_tol * scale:
                dist[a, b] = dist[b, a] = np.inf
            else:
                tasks.append((a, b))

    def finish(a, b, cost, converged):
        if not converged and require_convergence:
            raise NonConvergenceError(
                f"pairwise solve ({a}, {b}) did not converge within "
                f"{opts.max_epochs} epochs"
            )
        dist[a, b] = dist[b, a] = cost
        conv[a, b] = conv[b, a] = converged

    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(
                _solve_pair, [(g, fields[a], fields[b], opts) for a, b in tasks]
            )
            for (a, b), (cost, converged) in zip(tasks, results):
                finish(a, b, cost, converged)
    else:
        for a, b in tasks:
            cost, converged = _solve_pair((g, fields[a], fields[b], opts))
            finish(a, b, cost, converged)
    if return_converged:
        return dist, conv
    return dist


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    converged: bool
    inertia: float


def _lloyd(points, k, rng, max_iter):
    n = points.shape[0]
    centers = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.zeros(n, dtype=int)
    converged = False
    for _ in range(max_iter):
        sq = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = sq.argmin(axis=1)
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:  # reseed an empty cluster at the farthest point
                far = sq.min(axis=1).argmax()
                centers[c] = points[far]
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, converged, inertia


def spectral_cluster(affinity, num_clusters, seed=0, restarts=20, max_iter=300):
    """Normalized-Laplacian spectral embedding plus deterministic k-means.

    The affinity is embedded with the ``num_clusters`` lowest eigenvectors
    of ``I - D^{-1/2} A D^{-1/2}`` (rows normalized to the unit sphere),
    then clustered by Lloyd's algorithm with ``restarts`` seeded restarts,
    keeping the lowest-inertia run.  Returns a :class:`ClusterResult`
    whose ``converged`` flag reports whether the winning restart settled
    before ``max_iter``; labels are still returned on non-convergence.
    """
    a = np.asarray(affinity, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidGraphError("affinity must be a square matrix")
    if not 1 <= num_clusters <= a.shape[0]:
        raise InvalidGraphError(
            f"need 1 <= num_clusters <= {a.shape[0]}, got {num_clusters}"
        )
    deg = a.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lap = np.eye(a.shape[0]) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    lap = (lap + lap.T) / 2.0
    _, vecs = np.linalg.eigh(lap)
    embed = vecs[:, :num_clusters]
    norms = np.linalg.norm(embed, axis=1, keepdims=True)
    embed = np.where(norms > 0, embed / np.where(norms > 0, norms, 1.0), embed)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, converged, inertia = _lloyd(embed, num_clusters, rng, max_iter)
        if best is None or inertia < best[2] - 1e-12:
            best = (labels, converged, inertia)
    return ClusterResult(labels=best[0], converged=best[1], inertia=best[2])

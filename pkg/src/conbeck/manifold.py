"""Point clouds to connection graphs: epsilon graphs, local PCA, Procrustes.

The construction follows the manifold-learning recipe: connect points
closer than ``eps``, estimate a d-dimensional tangent frame at every
point from a kernel-weighted SVD of the neighbor offsets, and align
neighboring frames with an orthogonal Procrustes fit to obtain the
connection matrices.  Sampling helpers for the torus and a spherical
patch provide reproducible inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGraphError
from .graph import ConnectionGraph

__all__ = [
    "GraphSkeleton",
    "epsilon_graph",
    "tangent_frames",
    "procrustes_connection",
    "sample_torus",
    "sample_sphere_patch",
    "sphere_point",
    "project_to_tangent",
    "lift_to_ambient",
]


@dataclass
class GraphSkeleton:
    """Edges and weights of an epsilon graph, before any connection exists."""

    n: int
    edge_index: np.ndarray  # (m, 2), index oriented
    weights: np.ndarray  # (m,)
    distances: np.ndarray  # (m,)
    isolated: list = field(default_factory=list)
    connected: bool = True

    @property
    def m(self):
        return self.edge_index.shape[0]

    def neighbor_lists(self):
        adj = [[] for _ in range(self.n)]
        for e, (i, j) in enumerate(self.edge_index):
            adj[i].append((int(j), e))
            adj[j].append((int(i), e))
        for lst in adj:
            lst.sort()
        return adj


def epsilon_graph(cloud, eps, weights="inverse"):
    """Skeleton with an edge wherever ``0 < |x_i - x_j| < eps`` (strict).

    ``weights`` is ``"inverse"`` (1/distance, the default) or ``"unit"``.
    Coincident points are rejected; isolated vertices and disconnectedness
    are reported on the returned skeleton rather than raised, since only
    transport operations require connectivity.
    """
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim != 2:
        raise InvalidGraphError("cloud must be a 2-d array of shape (n, p)")
    if weights not in ("inverse", "unit"):
        raise InvalidGraphError(f"unknown weight scheme {weights!r}")
    n = cloud.shape[0]
    diff = cloud[:, None, :] - cloud[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    iu, ju = np.triu_indices(n, k=1)
    dup = dist[iu, ju] == 0.0
    if dup.any():
        a, b = int(iu[dup.argmax()]), int(ju[dup.argmax()])
        raise InvalidGraphError(
            f"coincident points {a} and {b}; duplicate positions are not allowed"
        )
    keep = dist[iu, ju] < eps
    edge_index = np.stack([iu[keep], ju[keep]], axis=1)
    d_edge = dist[iu, ju][keep]
    w = 1.0 / d_edge if weights == "inverse" else np.ones_like(d_edge)

    degree = np.zeros(n, dtype=int)
    np.add.at(degree, edge_index[:, 0], 1)
    np.add.at(degree, edge_index[:, 1], 1)
    isolated = [int(v) for v in np.flatnonzero(degree == 0)]

    skeleton = GraphSkeleton(n, edge_index, w, d_edge, isolated, True)
    seen = np.zeros(n, dtype=bool)
    if n:
        stack = [0]
        seen[0] = True
        adj = skeleton.neighbor_lists()
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
    skeleton.connected = bool(seen.all())
    return skeleton


def tangent_frames(cloud, skeleton: GraphSkeleton, d, eps, kernel_scale=None):
    """Kernel-weighted local PCA frames, shape (n, p, d).

    At each point the neighbor offsets are column-weighted by the
    Epanechnikov kernel ``K(u) = 1 - u^2`` on [0, 1] evaluated at
    ``distance / kernel_scale`` and the top-``d`` left singular vectors
    form the frame.  ``kernel_scale`` defaults to ``sqrt(eps)``, reading
    the bandwidth formula with ``eps`` as the graph radius; pass ``eps``
    itself for the squared-radius reading.
    """
    cloud = np.asarray(cloud, dtype=float)
    n, p = cloud.shape
    if kernel_scale is None:
        kernel_scale = float(np.sqrt(eps))
    adj = skeleton.neighbor_lists()
    frames = np.zeros((n, p, d))
    for i in range(n):
        nbrs = [v for v, _ in adj[i]]
        if len(nbrs) < d:
            raise InvalidGraphError(
                f"vertex {i} has {len(nbrs)} neighbors; at least {d} are "
                "required to estimate a rank-d tangent frame"
            )
        offsets = cloud[nbrs] - cloud[i]  # (N_i, p)
        dist = np.linalg.norm(offsets, axis=1)
        u = dist / kernel_scale
        kern = np.where(u < 1.0, 1.0 - u**2, 0.0)
        if not np.any(kern > 0):
            raise InvalidGraphError(
                f"vertex {i}: all neighbors fall outside the kernel support "
                f"(scale {kernel_scale:.3g}); increase kernel_scale"
            )
        weighted = offsets.T * kern  # B_i = X_i D_i, shape (p, N_i)
        left, _, _ = np.linalg.svd(weighted, full_matrices=False)
        frames[i] = left[:, :d]
    return frames


def procrustes_connection(frames, skeleton: GraphSkeleton, degenerate_tol=1e-8):
    """Connection graph with ``sigma_ij`` the orthogonal Procrustes fit.

    For each skeleton edge the alignment ``O_i^T O_j`` is projected to the
    nearest orthogonal matrix through its SVD ``U V^T``.  Edges whose
    alignment is numerically rank deficient (smallest singular value at or
    below ``degenerate_tol``) are flagged with a warning: their Procrustes
    fit is not unique.
    """
    frames = np.asarray(frames, dtype=float)
    n, _, d = frames.shape
    m = skeleton.m
    sigmas = np.zeros((m, d, d))
    flagged = []
    for e, (i, j) in enumerate(skeleton.edge_index):
        m_align = frames[i].T @ frames[j]
        u, s, vt = np.linalg.svd(m_align)
        if s.min() <= degenerate_tol:
            flagged.append(int(e))
        sigmas[e] = u @ vt
    if flagged:
        warnings.warn(
            f"{len(flagged)} edge(s) have rank-deficient frame alignments "
            f"(first few: {flagged[:5]}); their connection matrices are not unique",
            RuntimeWarning,
            stacklevel=2,
        )
    return ConnectionGraph(n, d, skeleton.edge_index, skeleton.weights, sigmas)


def sample_torus(n_theta, n_psi, major_radius=5.0, minor_radius=1.0):
    """Regular grid on the torus, theta-major ordering, shape (n_theta*n_psi, 3).

    Embedding: ``((R + r cos theta) cos psi, (R + r cos theta) sin psi,
    r sin theta)`` with both angles sampled on [0, 2 pi) excluding the
    periodic endpoint.
    """
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    psi = np.linspace(0.0, 2 * np.pi, n_psi, endpoint=False)
    tt, pp = np.meshgrid(theta, psi, indexing="ij")
    ring = major_radius + minor_radius * np.cos(tt)
    pts = np.stack(
        [ring * np.cos(pp), ring * np.sin(pp), minor_radius * np.sin(tt)], axis=-1
    )
    return pts.reshape(-1, 3)


def sphere_point(theta, psi):
    """Unit-sphere embedding ``(sin(pi/2 - theta) cos(-psi), sin(pi/2 - theta) sin(-psi), cos(pi/2 - theta))``.

    ``theta`` is the latitude and ``psi`` the west-positive azimuth, both
    in radians; equivalently ``(cos theta cos lon, cos theta sin lon,
    sin theta)`` for the east-positive longitude ``lon = -psi``.
    """
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    colat = np.pi / 2 - theta
    return np.stack(
        [np.sin(colat) * np.cos(-psi), np.sin(colat) * np.sin(-psi), np.cos(colat)],
        axis=-1,
    )


def sample_sphere_patch(
    n_theta,
    n_psi,
    theta_range=(7 * np.pi / 180, 67 * np.pi / 180),
    psi_range=(-30 * np.pi / 180, 120 * np.pi / 180),
):
    """Inclusive grid over a latitude/azimuth rectangle on the unit sphere.

    Returns ``(cloud, theta_grid, psi_grid)`` with theta-major ordering.
    The default rectangle is the North Atlantic window used by the
    hurricane pipeline.
    """
    theta = np.linspace(theta_range[0], theta_range[1], n_theta)
    psi = np.linspace(psi_range[0], psi_range[1], n_psi)
    tt, pp = np.meshgrid(theta, psi, indexing="ij")
    cloud = sphere_point(tt.reshape(-1), pp.reshape(-1))
    return cloud, theta, psi


def project_to_tangent(frames, ambient):
    """Per-vertex coordinates ``O_i^T y_i`` of ambient vectors, shape (n, d)."""
    frames = np.asarray(frames, dtype=float)
    ambient = np.asarray(ambient, dtype=float)
    return np.einsum("npd,np->nd", frames, ambient)


def lift_to_ambient(frames, field):
    """Per-vertex ambient vectors ``O_i f(i)`` of a tangent field, shape (n, p)."""
    frames = np.asarray(frames, dtype=float)
    field = np.asarray(field, dtype=float)
    return np.einsum("npd,nd->np", frames, field)

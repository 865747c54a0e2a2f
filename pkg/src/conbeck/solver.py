"""Quadratically regularized Beckmann transport on connection graphs.

Primal problem, for a feasible difference ``c = alpha - beta``::

    inf  sum_e w(e) |J(e)|_2  +  (lam/2) sum_e |J(e)|_2^2   s.t.  B J = c

Its dual is smooth and unconstrained::

    sup_phi  <phi, c> - (1/(2 lam)) sum_e [ |(B^T phi)(e)|_2 - w(e) ]_+^2

where ``[.]_+`` keeps only the strictly positive part.  The dual is
solved by plain fixed-step gradient ascent from ``phi = 0``; the primal
flow is recovered in closed form edge by edge from the dual iterate,

    J(e) = ((|g_e| - w(e)) / lam) * g_e / |g_e|   if |g_e| > w(e), else 0,

with ``g = B^T phi``.  The sign is pinned by the requirement
``B J(phi*) = c`` at the dual maximizer; the gradient of the dual equals
exactly the constraint residual ``c - B J(phi)``, so the stopping
gradient norm doubles as a feasibility certificate for the reported flow.

An independent primal-route oracle (:func:`oracle_solve`) minimizes a
smoothed primal on the affine feasible set, and :func:`wasserstein_lp`
gives the exact linear-programming value for d = 1.
"""

from __future__ import annotations

import dataclasses
from dataclasses import asdict, dataclass

import numpy as np
import scipy.optimize

from .errors import FeasibilityError, InvalidGraphError
from .feasibility import require_feasible
from .graph import ConnectionGraph

__all__ = [
    "SolveOptions",
    "SolveReport",
    "dual_objective",
    "dual_gradient",
    "recover_primal",
    "primal_cost",
    "unregularized_cost",
    "solve_regularized",
    "dual_feasible_unregularized",
    "unregularized_dual_value",
    "oracle_solve",
    "wasserstein",
    "wasserstein_lp",
    "stable_learning_rate",
]


@dataclass
class SolveOptions:
    """Knobs for the dual-ascent solver.

    ``lam=None`` resolves to the largest edge weight.  ``grad_tol=None``
    resolves to ``1e-8 * (1 + |c|_2)``.  ``seed`` is carried for
    reproducibility metadata; the ascent itself is deterministic.
    """

    lam: float | None = None
    learning_rate: float = 5e-3
    max_epochs: int = 10000
    grad_tol: float | None = None
    seed: int = 0


@dataclass
class SolveReport:
    """Certificates and bookkeeping for one solve."""

    primal_cost: float
    dual_value: float
    gap: float
    residual: float
    epochs_used: int
    converged: bool
    lam: float
    learning_rate: float

    def to_json_dict(self):
        return asdict(self)


def _resolve_lam(g, lam):
    if lam is None:
        lam = g.w_max
    lam = float(lam)
    if not lam > 0:
        raise InvalidGraphError(f"regularization lambda must be positive, got {lam}")
    return lam


def _difference(g, alpha, beta):
    a = np.asarray(alpha, dtype=float).reshape(g.n, g.d)
    b = np.asarray(beta, dtype=float).reshape(g.n, g.d)
    return a - b


def _edge_norms(flow):
    return np.linalg.norm(flow, axis=1)


def dual_objective(g: ConnectionGraph, phi, c, lam):
    """Value of the regularized dual at ``phi``."""
    lam = _resolve_lam(g, lam)
    phi = np.asarray(phi, dtype=float).reshape(g.n, g.d)
    c = np.asarray(c, dtype=float).reshape(g.n, g.d)
    gvals = (g.incidence_matrix_T @ phi.reshape(-1)).reshape(g.m, g.d)
    excess = _edge_norms(gvals) - g.weights
    penalty = np.where(excess > 0, excess, 0.0)
    return float(np.vdot(phi, c) - (penalty @ penalty) / (2.0 * lam))


def recover_primal(g: ConnectionGraph, phi, lam):
    """Closed-form flow from a dual variable; exactly zero on inactive edges."""
    lam = _resolve_lam(g, lam)
    phi = np.asarray(phi, dtype=float).reshape(g.n, g.d)
    gvals = (g.incidence_matrix_T @ phi.reshape(-1)).reshape(g.m, g.d)
    norms = _edge_norms(gvals)
    active = norms > g.weights
    safe = np.where(active, norms, 1.0)
    coef = np.where(active, (norms - g.weights) / (lam * safe), 0.0)
    return coef[:, None] * gvals


def dual_gradient(g: ConnectionGraph, phi, c, lam):
    """Gradient of the dual: the constraint residual ``c - B J(phi)``."""
    c = np.asarray(c, dtype=float).reshape(g.n, g.d)
    flow = recover_primal(g, phi, lam)
    return c - (g.incidence_matrix @ flow.reshape(-1)).reshape(g.n, g.d)


def primal_cost(g: ConnectionGraph, flow, lam):
    """Regularized primal objective of a flow."""
    lam = _resolve_lam(g, lam)
    flow = np.asarray(flow, dtype=float).reshape(g.m, g.d)
    norms = _edge_norms(flow)
    return float(g.weights @ norms + 0.5 * lam * (norms @ norms))


def unregularized_cost(g: ConnectionGraph, flow):
    """Plain Beckmann objective ``sum_e w(e) |J(e)|`` of a flow."""
    flow = np.asarray(flow, dtype=float).reshape(g.m, g.d)
    return float(g.weights @ _edge_norms(flow))


def stable_learning_rate(g: ConnectionGraph, lam=None, safety=0.9):
    """Step size guaranteeing monotone ascent.

    The dual Hessian is bounded by ``lambda_max(B B^T) / lam`` and
    ``lambda_max(B B^T) <= 2 * max_degree``, so
    ``safety * lam / (2 * max_degree)`` keeps the fixed step inside the
    monotone regime.
    """
    lam = _resolve_lam(g, lam)
    return safety * lam / (2.0 * max(g.max_degree, 1))


def solve_regularized(g: ConnectionGraph, alpha, beta, opts: SolveOptions | None = None):
    """Dual gradient ascent from zero with closed-form primal recovery.

    Returns ``(flow, phi, report)``.  Infeasible pairs raise
    :class:`FeasibilityError` up front, naming the violated kernel
    components.  Non-convergence within ``max_epochs`` is reported via
    ``report.converged`` rather than an exception.
    """
    if opts is None:
        opts = SolveOptions()
    g.require_valid()
    lam = _resolve_lam(g, opts.lam)
    c = _difference(g, alpha, beta)
    require_feasible(g, alpha, beta)

    c_vec = c.reshape(-1)
    grad_tol = opts.grad_tol
    if grad_tol is None:
        grad_tol = 1e-8 * (1.0 + float(np.linalg.norm(c_vec)))

    bmat = g.incidence_matrix
    bmat_t = g.incidence_matrix_T
    w = g.weights
    m, d = g.m, g.d
    lr = float(opts.learning_rate)
    phi = np.zeros(g.n * g.d)

    epochs_used = 0
    converged = False
    while True:
        gvals = (bmat_t @ phi).reshape(m, d)
        norms = _edge_norms(gvals)
        active = norms > w
        safe = np.where(active, norms, 1.0)
        coef = np.where(active, (norms - w) / (lam * safe), 0.0)
        flow = coef[:, None] * gvals
        grad = c_vec - bmat @ flow.reshape(-1)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= grad_tol:
            converged = True
            break
        if epochs_used >= opts.max_epochs:
            break
        phi += lr * grad
        epochs_used += 1

    phi_field = phi.reshape(g.n, g.d)
    cost = primal_cost(g, flow, lam)
    dual = dual_objective(g, phi_field, c, lam)
    report = SolveReport(
        primal_cost=cost,
        dual_value=dual,
        gap=cost - dual,
        residual=grad_norm,
        epochs_used=epochs_used,
        converged=converged,
        lam=lam,
        learning_rate=lr,
    )
    return flow, phi_field, report


def dual_feasible_unregularized(g: ConnectionGraph, phi, tol=1e-12):
    """Whether ``phi`` is feasible for the unregularized dual: ``|B^T phi| <= w``."""
    phi = np.asarray(phi, dtype=float).reshape(g.n, g.d)
    gvals = (g.incidence_matrix_T @ phi.reshape(-1)).reshape(g.m, g.d)
    return bool(np.all(_edge_norms(gvals) <= g.weights * (1.0 + tol) + tol))


def unregularized_dual_value(phi, c):
    """Value ``<phi, c>`` of the unregularized (Kantorovich-type) dual."""
    phi = np.asarray(phi, dtype=float)
    c = np.asarray(c, dtype=float)
    return float(np.vdot(phi.reshape(-1), c.reshape(-1)))


def wasserstein(g: ConnectionGraph, alpha, beta, lam=None, opts: SolveOptions | None = None):
    """Connection Beckmann distance: unregularized cost of the regularized flow.

    Returns ``inf`` for infeasible pairs instead of raising.
    """
    if opts is None:
        opts = SolveOptions()
    if lam is not None:
        opts = dataclasses.replace(opts, lam=lam)
    try:
        flow, _, _ = solve_regularized(g, alpha, beta, opts)
    except FeasibilityError:
        return float("inf")
    return unregularized_cost(g, flow)


# ----------------------------------------------------------------- oracles


def oracle_solve(g: ConnectionGraph, alpha, beta, lam=None, eps=1e-9, max_iter=200):
    """Independent primal-route solve of the regularized problem.

    Minimizes the smoothed objective
    ``sum_e w(e) sqrt(|J(e)|^2 + eps^2) + (lam/2) sum_e |J(e)|^2`` over the
    affine feasible set ``B J = c``: a least-squares particular solution
    plus a damped Newton iteration in an orthonormal null-space
    parameterization of ``B``, run as a continuation over decreasing
    smoothing levels down to ``eps`` (a cold Newton start at tiny ``eps``
    can stall on the near-kink curvature).  Dense linear algebra
    throughout; intended for small instances as a cross-check of
    :func:`solve_regularized`.
    """
    g.require_valid()
    lam = _resolve_lam(g, lam)
    c_vec = _difference(g, alpha, beta).reshape(-1)
    bmat = g.incidence_matrix.toarray()
    m, d = g.m, g.d

    j0, *_ = np.linalg.lstsq(bmat, c_vec, rcond=None)
    resid = float(np.linalg.norm(bmat @ j0 - c_vec))
    if resid > 1e-8 * (1.0 + float(np.linalg.norm(c_vec))):
        raise FeasibilityError(
            f"no feasible flow: least-squares constraint residual {resid:.3g}"
        )

    svals = np.linalg.svd(bmat, compute_uv=False)
    cutoff = svals.max() * max(bmat.shape) * np.finfo(float).eps if svals.size else 0.0
    rank = int(np.count_nonzero(svals > cutoff))
    _, _, vt = np.linalg.svd(bmat, full_matrices=True)
    null = vt[rank:].T  # (m d, k)
    k = null.shape[1]
    if k == 0:
        return j0.reshape(m, d)

    w = g.weights
    null3 = null.reshape(m, d, k)

    def objective(y, smooth):
        flow = (j0 + null @ y).reshape(m, d)
        sq = np.einsum("ed,ed->e", flow, flow)
        s = np.sqrt(sq + smooth * smooth)
        return float(w @ s + 0.5 * lam * sq.sum()), flow, s

    schedule = [1e-3]
    while schedule[-1] > eps:
        schedule.append(max(schedule[-1] * 1e-2, eps))

    y = np.zeros(k)
    flow = None
    for smooth in schedule:
        value, flow, s = objective(y, smooth)
        grad0_norm = None
        for _ in range(max_iter):
            coef = w / s + lam
            grad_flow = coef[:, None] * flow
            grad = np.einsum("edk,ed->k", null3, grad_flow)
            gnorm = float(np.linalg.norm(grad))
            if grad0_norm is None:
                grad0_norm = gnorm
            if gnorm <= 1e-11 * (1.0 + grad0_norm):
                break
            # per-edge Hessian blocks: w (I/s - J J^T / s^3) + lam I
            blocks = (
                (w / s)[:, None, None] * np.eye(d)
                - (w / s**3)[:, None, None] * np.einsum("ea,eb->eab", flow, flow)
                + lam * np.eye(d)
            )
            hn = np.einsum("eab,ebk->eak", blocks, null3)
            hess = np.einsum("eak,eal->kl", null3, hn)
            step = np.linalg.solve(hess, -grad)
            t = 1.0
            for _ in range(60):
                trial, trial_flow, trial_s = objective(y + t * step, smooth)
                if trial <= value + 1e-4 * t * float(grad @ step):
                    break
                t *= 0.5
            y = y + t * step
            value, flow, s = trial, trial_flow, trial_s
    return flow


def wasserstein_lp(g: ConnectionGraph, alpha, beta):
    """Exact unregularized optimum for d = 1 via linear programming.

    Splits the flow into positive and negative parts and solves
    ``min w (J+ + J-)`` subject to ``B (J+ - J-) = c`` with HiGHS.
    Returns ``(value, flow)``.  Small-scale reference implementation.
    """
    g.require_valid()
    if g.d != 1:
        raise InvalidGraphError("the LP reference handles d = 1 only")
    c_vec = _difference(g, alpha, beta).reshape(-1)
    bmat = g.incidence_matrix.toarray()
    cost = np.concatenate([g.weights, g.weights])
    a_eq = np.hstack([bmat, -bmat])
    res = scipy.optimize.linprog(
        cost, A_eq=a_eq, b_eq=c_vec, bounds=(0, None), method="highs"
    )
    if not res.success:
        raise FeasibilityError(f"LP reference did not solve: {res.message}")
    flow = res.x[: g.m] - res.x[g.m :]
    return float(res.fun), flow.reshape(g.m, 1)

"""Optimal position-aware recommendations through an exact LP.

The session cost ``p0' (I - alpha sum_n v_n R^n)^-1 c`` is not convex in the
recommendation matrices.  Two changes of variables make it linear:

* ``z' = p0' (I - alpha sum_n v_n R^n)^-1`` (expected visits per cycle),
  which turns the objective into ``c' z`` under the bilinear constraint
  ``z' - alpha z' sum_n v_n R^n = p0'``;
* ``f^n_ij = z_i r^n_ij`` (expected ``i -> j`` flows through slot ``n``),
  which makes every constraint linear.  Because ``z_j >= p_j > 0`` the map
  is invertible, ``r^n_ij = f^n_ij / z_i``.

Variable layout of the LP: ``z`` at ``[0, K)``, then ``F^1 .. F^N`` each
``K x K`` row-major, i.e. ``f^n_ij`` at ``K + n K^2 + i K + j``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lp import LpProblem, LpSolution, LpStatus, solve_lp
from .model import (QualityBaseline, RecommendationPolicy, Scenario, compute_q_max,
                    ensure_valid)
from .session import session_cost

CLEANUP_TOL = 1e-9


class SolverError(RuntimeError):
    """An LP that must be solvable was not solved to optimality."""

    def __init__(self, msg, status=None):
        super().__init__(msg)
        self.status = status


@dataclass
class FlowSolution:
    z: np.ndarray
    F: np.ndarray  # (N, K, K)


@dataclass
class SolveResult:
    method: str
    policy: RecommendationPolicy
    cost: float
    wall_ms: float = 0.0
    objective: float | None = None  # solver-specific objective value
    K_prime: int | None = None
    info: dict = field(default_factory=dict)


def var_index(K: int, n: int, i, j):
    return K + n * K * K + np.asarray(i) * K + np.asarray(j)


def _quality_weights(s: Scenario, weighted: bool) -> np.ndarray:
    return s.v if weighted else np.ones(s.N)


def build_flow_lp(s: Scenario, qb: QualityBaseline, weighted_quality: bool = True) -> LpProblem:
    """Assemble the flow LP for scenario ``s``.

    Rows, in order.  Inequalities: ``K`` quality rows
    ``-sum_{n,j} w_n u_ij f^n_ij + q q_i^max z_i <= 0`` followed by ``K^2``
    placement rows ``sum_n f^n_ij - z_i <= 0``.  Equalities: ``N K`` slot
    rows ``sum_j f^n_ij - z_i = 0`` followed by ``K`` balance rows
    ``z_j - alpha sum_n v_n sum_i f^n_ij = p_j``.
    """
    K, N = s.K, s.N
    w = _quality_weights(s, weighted_quality)
    n_vars = K + N * K * K
    ii, jj = np.meshgrid(np.arange(K), np.arange(K), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    off = ii != jj
    io, jo = ii[off], jj[off]

    # inequality block
    r, cidx, val = [], [], []
    for n in range(N):
        u = s.U[io, jo]
        nz = u != 0
        r.append(io[nz]); cidx.append(var_index(K, n, io[nz], jo[nz])); val.append(-w[n] * u[nz])
    r.append(np.arange(K)); cidx.append(np.arange(K)); val.append(s.q * qb.q_max)
    for n in range(N):
        r.append(K + io * K + jo); cidx.append(var_index(K, n, io, jo)); val.append(np.ones(io.size))
    r.append(K + ii * K + jj); cidx.append(ii); val.append(-np.ones(ii.size))
    A_ub = sp.csr_array((np.concatenate(val), (np.concatenate(r), np.concatenate(cidx))),
                        shape=(K + K * K, n_vars))
    b_ub = np.zeros(K + K * K)

    # equality block
    r, cidx, val = [], [], []
    for n in range(N):
        r.append(n * K + io); cidx.append(var_index(K, n, io, jo)); val.append(np.ones(io.size))
        r.append(n * K + np.arange(K)); cidx.append(np.arange(K)); val.append(-np.ones(K))
    r.append(N * K + np.arange(K)); cidx.append(np.arange(K)); val.append(np.ones(K))
    for n in range(N):
        r.append(N * K + jo); cidx.append(var_index(K, n, io, jo))
        val.append(np.full(io.size, -s.alpha * s.v[n]))
    A_eq = sp.csr_array((np.concatenate(val), (np.concatenate(r), np.concatenate(cidx))),
                        shape=(N * K + K, n_vars))
    b_eq = np.concatenate([np.zeros(N * K), s.p0])

    c = np.zeros(n_vars)
    c[:K] = s.c
    lo = np.zeros(n_vars)
    hi = np.full(n_vars, np.inf)
    for n in range(N):
        hi[var_index(K, n, np.arange(K), np.arange(K))] = 0.0
    return LpProblem(c=c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, lo=lo, hi=hi,
                     names={"K": K, "N": N})


def split_solution(x: np.ndarray, K: int, N: int) -> FlowSolution:
    x = np.asarray(x, dtype=float)
    return FlowSolution(z=x[:K].copy(), F=x[K:].reshape(N, K, K).copy())


def flows_from_policy(s: Scenario, pol: RecommendationPolicy) -> FlowSolution:
    """Expected visits ``z`` and flows ``f = z r`` induced by a policy."""
    import scipy.linalg
    Q = s.alpha * pol.mixed(s.v)
    z = scipy.linalg.solve((np.eye(s.K) - Q).T, s.p0)
    return FlowSolution(z=z, F=z[None, :, None] * pol.R)


def recover_policy(fs: FlowSolution, tol: float = CLEANUP_TOL) -> RecommendationPolicy:
    """Map flows back to recommendation probabilities ``r = f / z``.

    Negative entries no smaller than ``-tol`` are clipped and each row is
    renormalized once; anything worse is treated as a solver failure.
    """
    z, F = np.asarray(fs.z, dtype=float), np.asarray(fs.F, dtype=float)
    if np.any(z <= tol):
        i = int(np.argmin(z))
        raise SolverError(f"z[{i}] = {z[i]:.3g} is not positive; flows cannot be inverted")
    if F.min(initial=0.0) < -tol:
        raise SolverError(f"flow entry {F.min():.3g} below cleanup tolerance")
    R = np.clip(F, 0.0, None) / z[None, :, None]
    rows = R.sum(axis=2, keepdims=True)
    if np.any(rows <= 0):
        raise SolverError("empty recommendation row")
    R = R / rows
    idx = np.arange(R.shape[1])
    R[:, idx, idx] = 0.0
    return RecommendationPolicy(R)


def solve_flow_lp(s: Scenario, qb: QualityBaseline | None = None, method: str = "highs",
              weighted_quality: bool = True, tol: float = 1e-9):
    """Build and solve the LP; returns ``(policy, lp_objective, solution)``."""
    if qb is None:
        v = _quality_weights(s, weighted_quality)
        qb = compute_q_max(s.U, v, s.N)
    prob = build_flow_lp(s, qb, weighted_quality)
    sol = solve_lp(prob, tol=tol, method=method)
    if sol.status is LpStatus.INFEASIBLE:
        raise SolverError("flow LP reported infeasible; the baseline policy is always "
                          "feasible so this indicates an inconsistent scenario", sol.status)
    if not sol.ok:
        raise SolverError(f"flow LP not solved: {sol.status.value} {sol.message}", sol.status)
    fs = split_solution(sol.x, s.K, s.N)
    return recover_policy(fs), sol.objective_value, sol


def solve_optimal(s: Scenario, method: str = "highs", weighted_quality: bool = True,
                  qb: QualityBaseline | None = None) -> SolveResult:
    """Minimum expected cost per content over all feasible policies.

    ``qb`` overrides the quality baseline; by default it is recomputed from
    ``U``, ``v`` and ``N``.
    """
    s = ensure_valid(s)
    t0 = time.perf_counter()
    pol, obj, sol = solve_flow_lp(s, qb=qb, method=method, weighted_quality=weighted_quality)
    wall = (time.perf_counter() - t0) * 1e3
    cost = session_cost(s, pol)
    return SolveResult("optimal", pol, cost, wall_ms=wall, objective=obj,
                       info={"lp_cost": (1 - s.alpha) * obj, "iterations": sol.iterations})


def solve_cars(s: Scenario, method: str = "highs") -> SolveResult:
    """Position-unaware multi-step policy: solve as if clicks were uniform
    over slots, then tie the slot matrices to their average.

    With tied matrices the session cost no longer depends on ``v``.  Its
    quality guarantee holds with respect to the uniform-click baseline.
    """
    s = ensure_valid(s)
    t0 = time.perf_counter()
    uni = s.replace(v=np.full(s.N, 1.0 / s.N))
    pol, obj, _ = solve_flow_lp(uni, method=method)
    tied = RecommendationPolicy.tied(pol.R.mean(axis=0), s.N)
    wall = (time.perf_counter() - t0) * 1e3
    return SolveResult("cars", tied, session_cost(s, tied), wall_ms=wall, objective=obj)

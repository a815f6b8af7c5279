"""Myopic (single-click) cache-friendly recommendations.

Only the next click is optimized: the objective is
``p0' (sum_n v_n R^n) c``.  No constraint couples rows, so the problem splits
into ``K`` independent LPs of ``N K`` variables each.  When similarities are
binary and clicks are uniform over slots, each row has a closed-form greedy
solution (cheapest related items until the quality target is reached, then
the cheapest items overall).
"""
from __future__ import annotations

import math
import time

import numpy as np
import scipy.sparse as sp

from .lp import LpProblem, solve_lp
from .model import (RecommendationPolicy, Scenario, compute_q_max, ensure_valid,
                    is_binary)
from .optimal import SolveResult, SolverError
from .session import session_cost


def myopic_objective(s: Scenario, pol: RecommendationPolicy) -> float:
    """Expected cost of the next recommended click, ``p0' M c``."""
    return float(s.p0 @ pol.mixed(s.v) @ s.c)


def _row_lp(i: int, s: Scenario, required: float, columns=None) -> LpProblem:
    K, N = s.K, s.N
    cols = np.arange(K) if columns is None else np.asarray(columns)
    cols = cols[cols != i]
    m = cols.size
    n_vars = N * m
    u = s.U[i, cols]
    cost = np.concatenate([s.v[n] * s.c[cols] for n in range(N)])
    # quality row, then one placement row per column
    q_row = -np.concatenate([s.v[n] * u for n in range(N)])
    place_r = np.tile(np.arange(m), N)
    A_ub = sp.vstack([sp.csr_array(q_row[None, :]),
                      sp.csr_array((np.ones(n_vars), (place_r, np.arange(n_vars))),
                                   shape=(m, n_vars))]).tocsr()
    b_ub = np.concatenate([[-required], np.ones(m)])
    A_eq = sp.csr_array((np.ones(n_vars), (np.repeat(np.arange(N), m), np.arange(n_vars))),
                        shape=(N, n_vars))
    return LpProblem(c=cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(N),
                     lo=0.0, hi=1.0, names={"cols": cols})


def myopic_row(i: int, s: Scenario, q_max_i: float, columns=None,
               method: str = "highs") -> np.ndarray:
    """Optimal single-click recommendations for content ``i``.

    Returns an ``(N, K)`` block of slot probabilities.  ``columns`` limits
    the candidate set (content ``i`` itself is always excluded).
    """
    prob = _row_lp(i, s, s.q * q_max_i, columns)
    sol = solve_lp(prob, tol=1e-9, method=method)
    if not sol.ok:
        raise SolverError(f"myopic row {i}: {sol.status.value}; the baseline row is "
                          "always feasible so this indicates an inconsistent scenario",
                          sol.status)
    cols = prob.names["cols"]
    block = np.zeros((s.N, s.K))
    x = np.clip(sol.x.reshape(s.N, cols.size), 0.0, 1.0)
    block[:, cols] = x / x.sum(axis=1, keepdims=True)
    return block


def solve_myopic_lp(s: Scenario, q_max=None, method: str = "highs") -> SolveResult:
    """Solve the myopic problem row by row.

    ``objective`` in the result is the myopic functional; ``cost`` is the
    multi-step session cost of the same policy.
    """
    s = ensure_valid(s)
    t0 = time.perf_counter()
    if q_max is None:
        q_max = compute_q_max(s.U, s.v, s.N).q_max
    R = np.zeros((s.N, s.K, s.K))
    for i in range(s.K):
        R[:, i, :] = myopic_row(i, s, q_max[i], method=method)
    pol = RecommendationPolicy(R)
    wall = (time.perf_counter() - t0) * 1e3
    return SolveResult("greedy", pol, session_cost(s, pol), wall_ms=wall,
                       objective=myopic_objective(s, pol))


def _is_uniform(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.allclose(v, 1.0 / v.size, rtol=0, atol=1e-12))


def required_related(q: float, q_max_i: float, N: int) -> float:
    """Quality target in units of related recommendations.

    Under uniform clicks each related item in the slate contributes
    ``1/N`` of weighted quality, so ``q * q_max_i`` quality needs
    ``q * q_max_i * N`` related items.
    """
    t = q * q_max_i * N
    r = round(t)
    return float(r) if abs(t - r) < 1e-9 else t


def greedy_per_content(i: int, s: Scenario, q_max_i: float | None = None,
                       fractional: bool = True, columns=None) -> list[tuple[int, float]]:
    """Closed-form myopic slate for content ``i`` (binary U, uniform v).

    Returns ``(content, weight)`` pairs in selection order; weights are slot
    occupancies in ``(0, 1]`` summing to ``N``.  With ``fractional=True``
    the related quota is met exactly, so one related item may be partially
    recommended and its remainder goes to the next cheapest candidate.  With
    ``fractional=False`` whole related items are added until the quota is
    reached or exceeded.
    """
    N, K = s.N, s.K
    u = s.U[i]
    if not np.all((u == 0) | (u == 1)):
        raise ValueError("greedy_per_content needs binary similarities; use solve_myopic_lp")
    if q_max_i is None:
        q_max_i = min(int(u.sum()), N) / N
    cand = np.arange(K) if columns is None else np.asarray(columns)
    cand = cand[cand != i]
    order = cand[np.lexsort((cand, s.c[cand]))]
    related = order[u[order] == 1]

    target = required_related(s.q, q_max_i, N)
    if not fractional:
        target = float(min(math.ceil(target - 1e-12), N))
    whole = int(math.floor(target + 1e-12))
    frac = target - whole if target - whole > 1e-12 else 0.0
    if whole + (frac > 0) > related.size:
        raise ValueError(f"row {i}: needs {target:g} related items, only {related.size} exist")

    weight = {}
    picked = []
    for j in related[:whole]:
        weight[int(j)] = 1.0
        picked.append(int(j))
    if frac:
        j = int(related[whole])
        weight[j] = frac
        picked.append(j)

    remaining = N - sum(weight.values())
    for j in order:
        if remaining <= 1e-12:
            break
        j = int(j)
        room = 1.0 - weight.get(j, 0.0)
        if room <= 1e-12:
            continue
        take = min(room, remaining)
        if j not in weight:
            picked.append(j)
        weight[j] = weight.get(j, 0.0) + take
        remaining -= take
    if remaining > 1e-9:
        raise ValueError(f"row {i}: not enough candidates to fill {N} slots")
    return [(j, weight[j]) for j in picked]


def greedy_full(s: Scenario, fractional: bool = True) -> RecommendationPolicy:
    """Greedy slates for every content, as ``N`` identical slot matrices."""
    if not is_binary(s.U):
        raise ValueError("greedy_full needs binary U; use solve_myopic_lp instead")
    if not _is_uniform(s.v):
        raise ValueError("greedy_full is position-unaware and needs uniform v; "
                         "use solve_myopic_lp instead")
    K, N = s.K, s.N
    q_max = np.minimum(s.U.sum(axis=1), N) / N
    M = np.zeros((K, K))
    for i in range(K):
        for j, w in greedy_per_content(i, s, q_max[i], fractional=fractional):
            M[i, j] = w / N
    return RecommendationPolicy.tied(M, N)


def solve_greedy(s: Scenario, method: str = "highs") -> SolveResult:
    """Myopic baseline; uses the closed form when it applies."""
    s = ensure_valid(s)
    if is_binary(s.U) and _is_uniform(s.v):
        t0 = time.perf_counter()
        pol = greedy_full(s)
        wall = (time.perf_counter() - t0) * 1e3
        return SolveResult("greedy", pol, session_cost(s, pol), wall_ms=wall,
                           objective=myopic_objective(s, pol))
    return solve_myopic_lp(s, method=method)

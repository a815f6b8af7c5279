"""Hybrid solver: exact LP on the popular sub-catalog, myopic rows elsewhere.

Contents are dropped from the least popular end while every kept row can
still reach its quality target using kept contents only, and while the
popularity mass of dropped contents stays within ``P_min``.  Kept rows are
optimized jointly with the flow LP restricted to kept columns; dropped rows
get myopic recommendations over the whole catalog.
"""
from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .greedy import _is_uniform, greedy_per_content, myopic_row
from .model import (QualityBaseline, RecommendationPolicy, Scenario, compute_q_max,
                    ensure_valid, is_binary)
from .optimal import SolveResult, solve_optimal
from .session import session_cost

DEFAULT_P_MIN = 0.05


class StopReason(enum.Enum):
    QUALITY_CHECK_FAILED = "QualityCheckFailed"
    POPULARITY_FLOOR = "PopularityFloor"
    MINIMUM_SIZE = "MinimumSize"


@dataclass
class ShrinkPlan:
    K_prime: int
    kept: list[int]
    residual_popularity: float
    stop_reason: StopReason


def popularity_order(p0) -> np.ndarray:
    """Content indices by descending popularity, ties by ascending index."""
    p0 = np.asarray(p0)
    return np.lexsort((np.arange(p0.size), -p0))


def best_quality(U, v, rows, cols) -> np.ndarray:
    """Best v-weighted quality of each row using only ``cols`` (minus itself)."""
    v_sorted = np.sort(np.asarray(v, dtype=float))[::-1]
    N = v_sorted.size
    sub = np.asarray(U, dtype=float)[np.ix_(rows, cols)].copy()
    sub[np.asarray(rows)[:, None] == np.asarray(cols)[None, :]] = -np.inf
    top = -np.sort(-sub, axis=1)[:, :N]
    top[~np.isfinite(top)] = 0.0
    return top @ v_sorted[:top.shape[1]]


def plan_shrink(s: Scenario, qb: QualityBaseline, P_min: float = DEFAULT_P_MIN) -> ShrinkPlan:
    """Decide how many popular contents keep the exact treatment."""
    if not 0 <= P_min < 1:
        raise ValueError("P_min must be in [0, 1)")
    order = popularity_order(s.p0)
    K, N = s.K, s.N
    floor = N + 1
    need = s.q * qb.q_max
    k = K
    dropped = 0.0
    reason = StopReason.POPULARITY_FLOOR
    while True:
        if k <= floor:
            reason = StopReason.MINIMUM_SIZE
            break
        nxt = dropped + s.p0[order[k - 1]]
        if nxt > P_min + 1e-12:
            reason = StopReason.POPULARITY_FLOOR
            break
        kept = order[:k - 1]
        if np.any(best_quality(s.U, s.v, kept, kept) < need[kept] - 1e-12):
            reason = StopReason.QUALITY_CHECK_FAILED
            break
        k -= 1
        dropped = nxt
    kept = [int(j) for j in order[:k]]
    residual = float(1.0 - s.p0[kept].sum())
    return ShrinkPlan(K_prime=k, kept=kept, residual_popularity=max(residual, 0.0),
                      stop_reason=reason)


def sub_scenario(s: Scenario, kept) -> Scenario:
    kept = np.asarray(kept)
    p = s.p0[kept]
    return s.replace(p0=p / p.sum(), U=s.U[np.ix_(kept, kept)], c=s.c[kept])


def solve_hybrid(s: Scenario, P_min: float = DEFAULT_P_MIN, method: str = "highs") -> SolveResult:
    """Hybrid policy and its session cost; ``K_prime`` is the LP size used.

    Kept rows must meet ``q`` times their full-catalog baseline quality
    (reachable inside the kept set by construction of the plan).
    """
    s = ensure_valid(s)
    t0 = time.perf_counter()
    qb = compute_q_max(s.U, s.v, s.N)
    plan = plan_shrink(s, qb, P_min)
    if plan.K_prime == s.K:
        res = solve_optimal(s, method=method, qb=qb)
        res.method, res.K_prime = "hybrid", s.K
        res.wall_ms = (time.perf_counter() - t0) * 1e3
        res.info["plan"] = plan
        return res

    kept = np.asarray(plan.kept)
    sub = sub_scenario(s, kept)
    sub_res = solve_optimal(sub, method=method, qb=QualityBaseline(qb.q_max[kept]))
    R = np.zeros((s.N, s.K, s.K))
    R[:, kept[:, None], kept[None, :]] = sub_res.policy.R

    dropped = np.sort(np.setdiff1d(np.arange(s.K), kept))
    closed_form = is_binary(s.U) and _is_uniform(s.v)
    for i in dropped:
        if closed_form:
            for j, w in greedy_per_content(int(i), s, qb.q_max[i]):
                R[:, i, j] = w / s.N
        else:
            R[:, i, :] = myopic_row(int(i), s, qb.q_max[i], method=method)
    pol = RecommendationPolicy(R)
    wall = (time.perf_counter() - t0) * 1e3
    return SolveResult("hybrid", pol, session_cost(s, pol), wall_ms=wall,
                       objective=sub_res.objective, K_prime=plan.K_prime,
                       info={"plan": plan})


def p_shrink(K: int, K_prime: int, L: int, N: int) -> float:
    """Probability that each of ``K_prime`` independent rows with ``L``
    related items keeps at least ``N`` of them among ``K_prime`` random
    columns, each related item surviving with probability ``K_prime / K``.
    """
    if not (0 <= K_prime <= K and L >= 0 and N >= 0):
        raise ValueError("need 0 <= K_prime <= K, L >= 0, N >= 0")
    if L > K - 1:
        raise ValueError("L cannot exceed K - 1")
    if N > L:
        warnings.warn("N > L: no row can keep N related items; P_shrink = 0", stacklevel=2)
        return 0.0
    if K_prime == 0:
        return 1.0
    frac = K_prime / K
    # per-row tail P(Binomial(L, frac) >= N); near 1 the power is taken in
    # log space through log1p of the lower tail to keep precision
    tail = stats.binom.sf(N - 1, L, frac)
    if tail > 0.5:
        return float(np.exp(K_prime * np.log1p(-stats.binom.cdf(N - 1, L, frac))))
    return float(tail ** K_prime)


def p_shrink_monte_carlo(K: int, K_prime: int, L: int, N: int, trials: int,
                         seed: int = 0, chunk: int = 10_000) -> float:
    """Simulated counterpart of :func:`p_shrink`.

    Each trial looks at ``K_prime`` independent rows; each of a row's ``L``
    related entries falls in the kept columns independently with
    probability ``K_prime / K``.  A trial succeeds when every row keeps at
    least ``N`` related entries.
    """
    if N > L:
        return 0.0
    rng = np.random.default_rng(seed)
    frac = K_prime / K
    hits = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        survived = (rng.random((m, K_prime, L)) < frac).sum(axis=2)
        hits += int(np.all(survived >= N, axis=1).sum())
        done += m
    return hits / trials

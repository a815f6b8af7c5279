"""Session Markov chain, fundamental-matrix costs and a session simulator.

A viewing session is the absorbing chain whose transient part is
``Q = alpha * sum_n v_n R^n``; leaving the recommender is absorption.  The
fundamental matrix ``G = (I - Q)^-1`` counts expected visits, so the cost of
one renewal cycle is ``p0' G c`` and its length is ``p0' G 1 = 1/(1-alpha)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import RecommendationPolicy, Scenario

BLOCK_SIZE = 4096


@dataclass
class SessionChain:
    P: np.ndarray
    Q_sub: np.ndarray
    G: np.ndarray


@dataclass
class SimulationReport:
    sessions: int
    mean_cost_per_content: float
    std_error: float
    mean_cycle_length: float
    cycle_length_std_error: float
    seed: int


def build_chain(s: Scenario, pol: RecommendationPolicy) -> SessionChain:
    """Transition matrix and fundamental matrix of the session chain."""
    if pol.K != s.K or pol.N != s.N:
        raise ValueError(f"policy shape (N={pol.N}, K={pol.K}) does not match "
                         f"scenario (N={s.N}, K={s.K})")
    Q = s.alpha * pol.mixed(s.v)
    P = Q + (1.0 - s.alpha) * np.outer(np.ones(s.K), s.p0)
    A = np.eye(s.K) - Q
    try:
        G = scipy.linalg.solve(A, np.eye(s.K), check_finite=False)
    except np.linalg.LinAlgError as exc:  # cannot happen for alpha < 1
        raise RuntimeError("singular fundamental system") from exc
    return SessionChain(P=P, Q_sub=Q, G=G)


def expected_cycle_cost(chain: SessionChain, s: Scenario) -> float:
    return float(s.p0 @ chain.G @ s.c)


def expected_cycle_length(chain: SessionChain, s: Scenario) -> float:
    return float(s.p0 @ chain.G.sum(axis=1))


def cost_per_content(chain: SessionChain, s: Scenario) -> float:
    """Expected retrieval cost per consumed content (renewal-reward ratio)."""
    return (1.0 - s.alpha) * expected_cycle_cost(chain, s)


def session_cost(s: Scenario, pol: RecommendationPolicy) -> float:
    """Shortcut: cost per content of ``pol`` without keeping ``G``.

    Solves ``z' (I - Q) = p0'`` directly, which is cheaper than forming G.
    """
    Q = s.alpha * pol.mixed(s.v)
    z = scipy.linalg.solve((np.eye(s.K) - Q).T, s.p0, check_finite=False)
    return float((1.0 - s.alpha) * z @ s.c)


def _simulate_block(rng, s, cum_v, cum_R, count):
    """Run ``count`` independent sessions; returns per-session (cost, length)."""
    K = s.K
    current = np.searchsorted(np.cumsum(s.p0), rng.random(count) * s.p0.sum(), side="right")
    current = np.minimum(current, K - 1)
    cost = np.zeros(count)
    length = np.zeros(count, dtype=np.int64)
    alive = np.arange(count)
    while alive.size:
        cost[alive] += s.c[current]
        length[alive] += 1
        follow = rng.random(alive.size) < s.alpha
        alive = alive[follow]
        cur = current[follow]
        if not alive.size:
            break
        slot = np.searchsorted(cum_v, rng.random(alive.size) * cum_v[-1], side="right")
        slot = np.minimum(slot, cum_v.size - 1)
        rows = cum_R[slot, cur]
        u = rng.random(alive.size) * rows[:, -1]
        nxt = (rows <= u[:, None]).sum(axis=1)
        current = np.minimum(nxt, K - 1)
    return cost, length


def simulate_sessions(s: Scenario, pol: RecommendationPolicy, sessions: int,
                      seed: int) -> SimulationReport:
    """Monte-Carlo estimate of the per-content cost and cycle length.

    Each session starts from ``p0`` and ends at its first jump outside the
    recommender.  On every step a slot is drawn from ``v`` and then the next
    content from that slot's row of ``R^n``, so probabilistic policies are
    sampled per click.  Sessions are processed in fixed blocks of
    ``BLOCK_SIZE``; block ``b`` draws from a generator spawned from
    ``(seed, b)``, so the result depends only on ``(seed, sessions)``.

    The standard error is that of the ratio (total cost / total contents),
    treating sessions as the independent units, since contents within a
    session are correlated.
    """
    if sessions < 1:
        raise ValueError("sessions must be >= 1")
    if pol.K != s.K or pol.N != s.N:
        raise ValueError("policy does not match scenario")
    cum_v = np.cumsum(s.v)
    cum_R = np.cumsum(np.clip(pol.R, 0.0, None), axis=2)
    costs, lengths = [], []
    n_blocks = -(-sessions // BLOCK_SIZE)
    for b in range(n_blocks):
        count = min(BLOCK_SIZE, sessions - b * BLOCK_SIZE)
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        cst, ln = _simulate_block(rng, s, cum_v, cum_R, count)
        costs.append(cst)
        lengths.append(ln)
    cost = np.concatenate(costs)
    length = np.concatenate(lengths).astype(float)
    total = length.sum()
    mean = cost.sum() / total
    n = sessions
    if n > 1:
        resid = cost - mean * length
        se = np.sqrt(n / (n - 1) * (resid ** 2).sum()) / total
        se_len = length.std(ddof=1) / np.sqrt(n)
    else:
        se = se_len = float("nan")
    return SimulationReport(sessions=n, mean_cost_per_content=float(mean),
                            std_error=float(se), mean_cycle_length=float(length.mean()),
                            cycle_length_std_error=float(se_len), seed=int(seed))

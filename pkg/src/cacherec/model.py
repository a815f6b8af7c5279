"""Core value types for cache-friendly recommendation sessions.

A :class:`Scenario` holds the catalog-level inputs (popularity, similarity,
retrieval cost, click-position distribution and the behavioural knobs), a
:class:`RecommendationPolicy` holds the ``N`` per-position recommendation
matrices that the optimizers choose.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-9


@dataclass
class Violation:
    """One failed scenario or policy invariant."""

    name: str
    index: tuple | None = None
    magnitude: float = 0.0

    def __str__(self):
        where = "" if self.index is None else f" at {self.index}"
        return f"{self.name}{where} (magnitude {self.magnitude:.3g})"


@dataclass
class Scenario:
    """Catalog inputs and model parameters.

    Attributes
    ----------
    p0 : ndarray (K,)
        Long-term popularity; also the distribution of a fresh request.
    U : ndarray (K, K)
        Similarity scores in [0, 1] with a zero diagonal.
    c : ndarray (K,)
        Retrieval cost per content (binary for the cache-hit model).
    v : ndarray (N,)
        Click probability of each recommendation slot.
    alpha : float
        Probability of following a recommendation.
    q : float
        Fraction of the baseline quality every row must retain.
    """

    p0: np.ndarray
    U: np.ndarray
    c: np.ndarray
    v: np.ndarray
    alpha: float
    q: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.v = np.atleast_1d(np.asarray(self.v, dtype=float))
        self.alpha = float(self.alpha)
        self.q = float(self.q)

    @property
    def K(self) -> int:
        return self.p0.shape[0]

    @property
    def N(self) -> int:
        return self.v.shape[0]

    def replace(self, **changes) -> "Scenario":
        fields = dict(p0=self.p0, U=self.U, c=self.c, v=self.v,
                      alpha=self.alpha, q=self.q, meta=dict(self.meta))
        fields.update(changes)
        return Scenario(**fields)

    def normalized(self) -> "Scenario":
        """Return a copy with p0 and v renormalized to sum to one exactly.

        Only meant for inputs that already pass :func:`validate_scenario`;
        the correction is at most the probability tolerance.
        """
        return self.replace(p0=self.p0 / self.p0.sum(), v=self.v / self.v.sum())


@dataclass
class RecommendationPolicy:
    """Per-position recommendation matrices, stacked as an (N, K, K) array.

    ``R[n, i, j]`` is the probability that content ``j`` is shown in slot
    ``n`` after content ``i`` has been consumed.
    """

    R: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        if self.R.ndim == 2:
            self.R = self.R[None, :, :]
        if self.R.ndim != 3 or self.R.shape[1] != self.R.shape[2]:
            raise ValueError(f"policy must have shape (N, K, K), got {self.R.shape}")

    @property
    def N(self) -> int:
        return self.R.shape[0]

    @property
    def K(self) -> int:
        return self.R.shape[1]

    @classmethod
    def tied(cls, R: np.ndarray, N: int) -> "RecommendationPolicy":
        """N identical copies of a single matrix (position-unaware policy)."""
        R = np.asarray(R, dtype=float)
        return cls(np.repeat(R[None, :, :], N, axis=0))

    def mixed(self, v: np.ndarray) -> np.ndarray:
        """Click-weighted transition matrix ``sum_n v_n R^n``."""
        return np.tensordot(np.asarray(v, dtype=float), self.R, axes=1)

    def violations(self, tol: float = 1e-7) -> list[Violation]:
        out = []
        rows = self.R.sum(axis=2)
        bad = np.abs(rows - 1.0)
        if bad.max(initial=0.0) > tol:
            n, i = np.unravel_index(np.argmax(bad), bad.shape)
            out.append(Violation("row-stochastic per position", (int(n), int(i)), float(bad[n, i])))
        if self.R.min(initial=0.0) < -tol or self.R.max(initial=0.0) > 1 + tol:
            out.append(Violation("entries in [0, 1]", None,
                                 float(max(-self.R.min(), self.R.max() - 1))))
        placed = self.R.sum(axis=0) - 1.0
        if placed.max(initial=-1.0) > tol:
            i, j = np.unravel_index(np.argmax(placed), placed.shape)
            out.append(Violation("no duplicate placement", (int(i), int(j)), float(placed[i, j])))
        diag = np.abs(np.diagonal(self.R, axis1=1, axis2=2))
        if diag.max(initial=0.0) > tol:
            n, i = np.unravel_index(np.argmax(diag), diag.shape)
            out.append(Violation("no self-recommendation", (int(n), int(i)), float(diag[n, i])))
        return out


@dataclass
class QualityBaseline:
    """Best v-weighted quality of the top-N baseline, per content."""

    q_max: np.ndarray
    policy: RecommendationPolicy | None = None


def validate_scenario(s: Scenario) -> list[Violation]:
    """List every violated scenario invariant; empty means valid."""
    out = []
    K = s.p0.shape[0]
    if s.p0.ndim != 1 or K < 1:
        return [Violation("p0 must be a non-empty vector")]
    if s.U.shape != (K, K):
        out.append(Violation("U shape (K, K)", None, float(abs(s.U.size - K * K))))
    if s.c.shape != (K,):
        out.append(Violation("c length K", None, float(abs(s.c.size - K))))
    for name, arr in (("p0", s.p0), ("U", s.U), ("c", s.c), ("v", s.v)):
        if not np.all(np.isfinite(arr)):
            out.append(Violation(f"{name} finite"))
    if out:
        return out

    gap = abs(s.p0.sum() - 1.0)
    if gap > PROB_TOL:
        out.append(Violation("p0 sums to 1", None, float(gap)))
    if np.any(s.p0 <= 0):
        i = int(np.argmin(s.p0))
        out.append(Violation("p0 strictly positive", (i,), float(-s.p0[i])))

    gap = abs(s.v.sum() - 1.0)
    if gap > PROB_TOL:
        out.append(Violation("v sums to 1", None, float(gap)))
    if np.any(s.v < 0):
        n = int(np.argmin(s.v))
        out.append(Violation("v nonnegative", (n,), float(-s.v[n])))

    diag = np.abs(np.diag(s.U))
    if diag.max() > 0:
        i = int(np.argmax(diag))
        out.append(Violation("U zero diagonal", (i, i), float(diag[i])))
    if s.U.min() < 0 or s.U.max() > 1:
        i, j = np.unravel_index(np.argmax(np.maximum(-s.U, s.U - 1)), s.U.shape)
        out.append(Violation("U entries in [0, 1]", (int(i), int(j)),
                             float(max(-s.U[i, j], s.U[i, j] - 1))))

    if not 0 <= s.alpha < 1:
        out.append(Violation("alpha < 1" if s.alpha >= 1 else "alpha >= 0", None,
                             float(s.alpha - 1 if s.alpha >= 1 else -s.alpha)))
    if not s.N <= K - 1:
        out.append(Violation("N <= K - 1", None, float(s.N - (K - 1))))
    if not 0 <= s.q <= 1:
        out.append(Violation("q in [0, 1]", None, float(max(-s.q, s.q - 1))))
    return out


class ScenarioError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(map(str, self.violations)))


def ensure_valid(s: Scenario) -> Scenario:
    """Raise :class:`ScenarioError` on violations, else renormalize once."""
    problems = validate_scenario(s)
    if problems:
        raise ScenarioError(problems)
    return s.normalized()


def position_entropy(v) -> float:
    """Shannon entropy of the click distribution, in nats (0 log 0 = 0)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v < -PROB_TOL) or abs(v.sum() - 1.0) > PROB_TOL:
        raise ValueError("v is not a probability vector")
    nz = v[v > 0]
    return float(-(nz * np.log(nz)).sum())


def baseline_policy(U, v, N: int | None = None) -> RecommendationPolicy:
    """Deterministic top-N baseline: the n-th most similar item goes to the
    n-th most clicked slot.

    Ties on similarity go to the lower content index, ties on click
    probability to the lower slot index.
    """
    U = np.asarray(U, dtype=float)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    K = U.shape[0]
    N = v.shape[0] if N is None else N
    if N != v.shape[0]:
        raise ValueError("N must equal len(v)")
    if N > K - 1:
        raise ValueError(f"N={N} exceeds K-1={K - 1}")
    slots = np.argsort(-v, kind="stable")
    scores = U.copy()
    np.fill_diagonal(scores, -np.inf)
    # stable sort on -u keeps ascending index among equal similarities
    ranked = np.argsort(-scores, axis=1, kind="stable")[:, :N]
    R = np.zeros((N, K, K))
    rows = np.arange(K)
    for rank in range(N):
        R[slots[rank], rows, ranked[:, rank]] = 1.0
    return RecommendationPolicy(R)


def quality(policy: RecommendationPolicy, U, v) -> np.ndarray:
    """Per-row recommendation quality ``sum_j sum_n v_n r^n_ij u_ij``."""
    return (policy.mixed(v) * np.asarray(U, dtype=float)).sum(axis=1)


def compute_q_max(U, v, N: int | None = None) -> QualityBaseline:
    """q_i^max of the top-N baseline for every content ``i``."""
    pol = baseline_policy(U, v, N)
    return QualityBaseline(q_max=quality(pol, U, v), policy=pol)


def quality_slack(policy: RecommendationPolicy, s: Scenario,
                  qb: QualityBaseline | None = None, v=None) -> np.ndarray:
    """Per-row surplus of achieved quality over ``q * q_max`` (>= 0 when met)."""
    v = s.v if v is None else np.asarray(v, dtype=float)
    if qb is None:
        qb = compute_q_max(s.U, v)
    return quality(policy, s.U, v) - s.q * qb.q_max


def is_binary(c) -> bool:
    c = np.asarray(c)
    return bool(np.all((c == 0) | (c == 1)))


def hit_rate_from_cost(cost_per_content: float, c) -> float:
    """Cache hit rate under the 0/1 miss-cost model."""
    if not is_binary(c):
        raise ValueError("hit rate is only defined for binary cost vectors")
    return 1.0 - float(cost_per_content)


def most_popular_hit_rate(s: Scenario) -> float:
    """Hit rate without recommendations: popularity mass of cached items."""
    if not is_binary(s.c):
        raise ValueError("hit rate is only defined for binary cost vectors")
    return float(s.p0 @ (1.0 - s.c))

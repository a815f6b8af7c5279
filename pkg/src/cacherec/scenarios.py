"""Synthetic scenarios, cost models and the plain-text matrix format.

Matrix files are whitespace separated: a header line ``K M`` followed by
``K`` rows of ``M`` numbers.  Vectors are stored as ``K x 1`` matrices.
A scenario bundle is a directory holding ``p0.txt``, ``u.txt``, ``c.txt``
and ``params.json`` (``v``, ``alpha``, ``q`` and the generator settings).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Scenario


class MatrixFormatError(ValueError):
    pass


def zipf_weights(n: int, exponent: float) -> np.ndarray:
    """Normalized ``k ** -exponent`` for ranks ``k = 1..n``."""
    w = np.arange(1, n + 1, dtype=float) ** (-float(exponent))
    return w / w.sum()


def gen_synthetic(K: int, N: int, s_zipf: float, beta_zipf: float, L: int,
                  alpha: float, q: float, C: int, seed: int,
                  permute_ranks: bool = False) -> Scenario:
    """Random binary-similarity scenario with Zipf popularity and clicks.

    Parameters
    ----------
    K, N : int
        Catalog size and number of recommendation slots.
    s_zipf, beta_zipf : float
        Zipf exponents of the popularity ``p0`` and of the click
        distribution ``v`` over slots.
    L : int
        Related items per row, placed uniformly among the other contents.
    alpha, q : float
        Follow probability and quality fraction.
    C : int
        Cache size; the ``C`` most popular contents cost 0, the rest 1.
    seed : int
    permute_ranks : bool
        Assign popularity ranks to contents in random order instead of by
        index.
    """
    if not 1 <= N <= K - 1:
        raise ValueError("need 1 <= N <= K - 1")
    if not N <= L <= K - 1:
        raise ValueError(f"need N <= L <= K - 1, got L={L}")
    if not 0 <= C <= K:
        raise ValueError("need 0 <= C <= K")
    rng = np.random.default_rng(seed)
    ranks = rng.permutation(K) if permute_ranks else np.arange(K)
    p0 = np.empty(K)
    p0[ranks] = zipf_weights(K, s_zipf)
    v = zipf_weights(N, beta_zipf)
    U = np.zeros((K, K))
    for i in range(K):
        picks = rng.choice(K - 1, size=L, replace=False)
        picks[picks >= i] += 1
        U[i, picks] = 1.0
    c = np.ones(K)
    c[ranks[:C]] = 0.0
    meta = dict(K=K, N=N, zipf_s=s_zipf, zipf_beta=beta_zipf, L=L, cache=C,
                seed=seed, permute_ranks=permute_ranks)
    return Scenario(p0=p0, U=U, c=c, v=v, alpha=alpha, q=q, meta=meta)


def hierarchical_costs(K: int, layers, p0=None) -> np.ndarray:
    """Costs for nested cache layers.

    ``layers`` is a list of ``(fraction, cost)`` from nearest to farthest.
    The most popular ``fraction`` of the catalog gets the first cost, and so
    on.  Without ``p0`` the result is in popularity order; with ``p0`` it
    is indexed by content.
    """
    layers = [(float(f), float(cst)) for f, cst in layers]
    if not layers:
        raise ValueError("at least one layer required")
    fracs = np.array([f for f, _ in layers])
    costs = np.array([cst for _, cst in layers])
    if np.any(fracs < 0) or abs(fracs.sum() - 1.0) > 1e-9:
        raise ValueError("layer fractions must be nonnegative and sum to 1")
    if np.any(np.diff(costs) < 0):
        raise ValueError("layer costs must be non-decreasing")
    bounds = np.rint(np.cumsum(fracs) * K).astype(int)
    bounds[-1] = K
    by_rank = np.empty(K)
    start = 0
    for end, cst in zip(bounds, costs):
        by_rank[start:end] = cst
        start = end
    if p0 is None:
        return by_rank
    order = np.lexsort((np.arange(K), -np.asarray(p0)))
    out = np.empty(K)
    out[order] = by_rank
    return out


def _fmt(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def save_matrix(M, path) -> None:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError("only 1-D or 2-D arrays can be saved")
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(map(_fmt, row)) for row in M.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix(path) -> np.ndarray:
    """Read a matrix file; errors name the offending line (1-based)."""
    lines = Path(path).read_text().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixFormatError(f"{path}: empty file")
    head = lines[0].split()
    try:
        rows, cols = (int(t) for t in head)
    except ValueError:
        raise MatrixFormatError(f"{path}: line 1: expected 'K M' header, got {lines[0]!r}")
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"{path}: header says {rows} rows, found {len(body)}")
    for k, line in enumerate(body, start=2):
        if len(line.split()) != cols:
            raise MatrixFormatError(f"{path}: line {k}: expected {cols} values, "
                                    f"found {len(line.split())}")
    try:
        M = np.array(" ".join(body).split(), dtype=float).reshape(rows, cols)
    except ValueError:
        for k, line in enumerate(body, start=2):
            try:
                np.array(line.split(), dtype=float)
            except ValueError:
                raise MatrixFormatError(f"{path}: line {k}: non-numeric value") from None
        raise
    if np.isnan(M).any():
        r = int(np.argwhere(np.isnan(M))[0][0])
        raise MatrixFormatError(f"{path}: line {r + 2}: NaN value")
    return M


def save_scenario(s: Scenario, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_matrix(s.p0, d / "p0.txt")
    save_matrix(s.U, d / "u.txt")
    save_matrix(s.c, d / "c.txt")
    params = {"alpha": s.alpha, "q": s.q, "N": s.N, "v": s.v.tolist(),
              "generator": s.meta}
    (d / "params.json").write_text(json.dumps(params, indent=2, sort_keys=True) + "\n")
    return d


def load_scenario(directory) -> Scenario:
    d = Path(directory)
    params = json.loads((d / "params.json").read_text())
    p0 = load_matrix(d / "p0.txt").ravel()
    U = load_matrix(d / "u.txt")
    c = load_matrix(d / "c.txt").ravel()
    if "v" in params:
        v = np.asarray(params["v"], dtype=float)
    else:
        v = zipf_weights(int(params["N"]), float(params.get("generator", {}).get("zipf_beta", 0.0)))
    return Scenario(p0=p0, U=U, c=c, v=v, alpha=params["alpha"], q=params["q"],
                    meta=dict(params.get("generator", {})))

"""Dense two-phase tableau simplex with Bland's rule.

Small and deterministic: entering and leaving variables are always the
lowest eligible index, which also rules out cycling.  Bounds are folded into
the standard form ``A x = b, x >= 0`` before pivoting.
"""
from __future__ import annotations

import numpy as np

from .lp import LpProblem, LpSolution, LpStatus


def _standard_form(p: LpProblem):
    """Rewrite ``p`` as ``min c'y, A y = b, y >= 0``.

    Returns the pieces plus a recovery map ``x = x0 + T @ y[:n_struct]``.
    """
    n = p.n_vars
    lo, hi = p.lo, p.hi
    x0 = np.zeros(n)
    cols = []   # (original index, sign)
    extra_ub = []  # (col position, bound)
    for j in range(n):
        if lo[j] == hi[j]:
            x0[j] = lo[j]
        elif np.isfinite(lo[j]):
            x0[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                extra_ub.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            x0[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for k, (j, sgn) in enumerate(cols):
        T[j, k] = sgn

    A_eq = p.A_eq.toarray() if p.n_eq else np.zeros((0, n))
    A_ub = p.A_ub.toarray() if p.n_ub else np.zeros((0, n))
    b_eq = p.b_eq - A_eq @ x0
    b_ub = p.b_ub - A_ub @ x0
    E = A_eq @ T
    L = A_ub @ T
    if extra_ub:
        B = np.zeros((len(extra_ub), len(cols)))
        for r, (k, bound) in enumerate(extra_ub):
            B[r, k] = 1.0
        L = np.vstack([L, B])
        b_ub = np.concatenate([b_ub, [b for _, b in extra_ub]])
    m_eq, m_ub = E.shape[0], L.shape[0]
    ns = len(cols)
    A = np.zeros((m_eq + m_ub, ns + m_ub))
    A[:m_eq, :ns] = E
    A[m_eq:, :ns] = L
    A[m_eq:, ns:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    c = np.zeros(ns + m_ub)
    c[:ns] = p.c @ T
    const = float(p.c @ x0)
    return A, b, c, const, x0, T, ns


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    piv = tab[row].copy()
    f = tab[:, col].copy()
    f[row] = 0.0
    tab -= np.outer(f, piv)


def _run(tab, basis, n_cols, tol, budget):
    """Bland-rule iterations on ``tab`` (last row = reduced costs, last
    column = rhs).  Returns ("optimal" | "unbounded" | "limit", iterations)."""
    it = 0
    m = tab.shape[0] - 1
    while True:
        red = tab[-1, :n_cols]
        enter = np.flatnonzero(red < -tol)
        if enter.size == 0:
            return "optimal", it
        if it >= budget:
            return "limit", it
        col = int(enter[0])
        colv = tab[:m, col]
        pos = np.flatnonzero(colv > tol)
        if pos.size == 0:
            return "unbounded", it
        ratios = tab[pos, -1] / colv[pos]
        best = ratios.min()
        cand = pos[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows leave the lowest-indexed basic variable
        row = int(cand[np.argmin(np.asarray(basis)[cand])])
        _pivot(tab, row, col)
        basis[row] = col
        it += 1


def solve_bounded_simplex(p: LpProblem, tol: float = 1e-9,
                          max_iters: int = 10_000) -> LpSolution:
    A, b, c, const, x0, T, ns = _standard_form(p)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    ptol = max(tol, 1e-12)

    # phase 1: one artificial per row
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))

    def recover(tab, basis):
        y = np.zeros(n + m)
        for r, bv in enumerate(basis):
            y[bv] = tab[r, -1]
        x = x0 + T @ y[:ns]
        return x

    status, it1 = _run(tab, basis, n + m, ptol, max_iters)
    if status == "limit":
        x = recover(tab, basis)
        return LpSolution(LpStatus.ITERATION_LIMIT, x, float(p.c @ x), it1)
    infeas = -tab[-1, -1]
    scale = max(1.0, np.abs(b).max(initial=0.0))
    if infeas > 1e3 * ptol * scale:
        x = recover(tab, basis)
        return LpSolution(LpStatus.INFEASIBLE, x, float(p.c @ x), it1,
                          message=f"phase-1 residual {infeas:.3g}")

    # drive artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cand = np.flatnonzero(np.abs(tab[r, :n]) > 1e-9)
            if cand.size:
                _pivot(tab, r, int(cand[0]))
                basis[r] = int(cand[0])
                keep.append(r)
        else:
            keep.append(r)
    tab2 = np.zeros((len(keep) + 1, n + 1))
    tab2[:-1, :n] = tab[keep, :n]
    tab2[:-1, -1] = tab[keep, -1]
    basis2 = [basis[r] for r in keep]
    tab2[-1, :n] = c
    for r, bv in enumerate(basis2):
        tab2[-1] -= c[bv] * tab2[r]

    status, it2 = _run(tab2, basis2, n, ptol, max_iters - it1)
    y = np.zeros(n)
    for r, bv in enumerate(basis2):
        y[bv] = tab2[r, -1]
    x = x0 + T @ y[:ns]
    obj = float(p.c @ x)
    st = {"optimal": LpStatus.OPTIMAL, "unbounded": LpStatus.UNBOUNDED,
          "limit": LpStatus.ITERATION_LIMIT}[status]
    return LpSolution(st, x, obj, it1 + it2)

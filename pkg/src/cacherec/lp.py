"""Sparse linear programs: representation, feasibility checks, solving, MPS.

Problems are stated as::

    minimize    c' x
    subject to  A_eq x  = b_eq
                A_ub x <= b_ub
                lo <= x <= hi

Two backends are available.  ``"highs"`` (the default) hands the problem to
the HiGHS dual simplex shipped with SciPy and is the only one fast enough for
the full reformulation at K ~ 100.  ``"simplex"`` is the in-repo bounded
dense simplex from :mod:`cacherec.simplex`, meant for small problems and for
cross-checking.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp

DEFAULT_TOL = 1e-8


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


def _as_csr(A, n):
    if A is None:
        return sp.csr_array((0, n))
    return sp.csr_array(A)


@dataclass
class LpProblem:
    """Minimization LP with sparse constraint matrices.

    ``lo``/``hi`` default to ``0`` and ``+inf``; a variable with
    ``lo == hi`` is fixed.
    """

    c: np.ndarray
    A_eq: sp.csr_array | None = None
    b_eq: np.ndarray | None = None
    A_ub: sp.csr_array | None = None
    b_ub: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq = _as_csr(self.A_eq, n)
        self.A_ub = _as_csr(self.A_ub, n)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float).ravel()
        self.lo = np.zeros(n) if self.lo is None else np.broadcast_to(
            np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.full(n, np.inf) if self.hi is None else np.broadcast_to(
            np.asarray(self.hi, dtype=float), (n,)).copy()
        self._check()

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def n_ub(self) -> int:
        return self.A_ub.shape[0]

    def _check(self):
        n = self.n_vars
        if self.A_eq.shape[1] != n or self.A_ub.shape[1] != n:
            raise ValueError("constraint matrices must have n_vars columns")
        if self.A_eq.shape[0] != self.b_eq.size or self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError("right-hand side length does not match constraint rows")
        for name, arr in (("c", self.c), ("b_eq", self.b_eq), ("b_ub", self.b_ub),
                          ("A_eq", self.A_eq.data), ("A_ub", self.A_ub.data)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or Inf")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("bounds contain NaN")
        if np.any(self.lo == np.inf) or np.any(self.hi == -np.inf):
            raise ValueError("lower bound +inf or upper bound -inf")


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective_value: float
    iterations: int = 0
    # Lagrange multipliers in the scipy sign convention; None when the
    # backend does not produce them.
    duals: dict | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def check_feasibility(p: LpProblem, x, tol: float = DEFAULT_TOL) -> float:
    """Largest constraint or bound violation of ``x`` (0 when feasible).

    ``tol`` is accepted for interface symmetry with :func:`solve_lp`; the
    raw violation is returned and the caller compares.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n_vars,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.n_vars},)")
    worst = 0.0
    if p.n_eq:
        worst = max(worst, float(np.abs(p.A_eq @ x - p.b_eq).max()))
    if p.n_ub:
        worst = max(worst, float((p.A_ub @ x - p.b_ub).max()))
    if p.n_vars:
        worst = max(worst, float((p.lo - x).max()), float((x - p.hi).max()))
    return max(worst, 0.0)


def _solve_highs(p: LpProblem, tol: float, max_iters: int) -> LpSolution:
    res = scipy.optimize.linprog(
        p.c,
        A_ub=p.A_ub if p.n_ub else None, b_ub=p.b_ub if p.n_ub else None,
        A_eq=p.A_eq if p.n_eq else None, b_eq=p.b_eq if p.n_eq else None,
        bounds=np.column_stack([p.lo, p.hi]),
        method="highs-ds",
        options={"primal_feasibility_tolerance": tol,
                 "dual_feasibility_tolerance": tol,
                 "maxiter": max_iters, "presolve": True},
    )
    status = {0: LpStatus.OPTIMAL, 1: LpStatus.ITERATION_LIMIT,
              2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}.get(res.status)
    if status is None:
        # status 4: numerical trouble; report as not optimal with what we have
        status = LpStatus.ITERATION_LIMIT
    x = np.asarray(res.x, dtype=float) if res.x is not None else np.full(p.n_vars, np.nan)
    duals = None
    if status is LpStatus.OPTIMAL:
        duals = {
            "eq": np.asarray(res.eqlin.marginals) if p.n_eq else np.zeros(0),
            "ub": np.asarray(res.ineqlin.marginals) if p.n_ub else np.zeros(0),
            "lo": np.asarray(res.lower.marginals),
            "hi": np.asarray(res.upper.marginals),
        }
    obj = float(res.fun) if res.fun is not None else float(p.c @ x) if np.all(np.isfinite(x)) else math.nan
    return LpSolution(status=status, x=x, objective_value=obj,
                      iterations=int(getattr(res, "nit", 0) or 0),
                      duals=duals, message=str(res.message))


def solve_lp(p: LpProblem, tol: float = DEFAULT_TOL, max_iters: int | None = None,
             method: str = "highs") -> LpSolution:
    """Solve ``p``; infeasibility, unboundedness and the iteration cap are
    reported through ``status``, never raised.

    Parameters
    ----------
    p : LpProblem
    tol : float
        Primal/dual feasibility tolerance.
    max_iters : int, optional
        Defaults to ``50 * (n_vars + n_constraints)``.
    method : {"highs", "simplex"}
    """
    if max_iters is None:
        max_iters = 50 * (p.n_vars + p.n_eq + p.n_ub)
    if method == "highs":
        return _solve_highs(p, tol, max_iters)
    if method == "simplex":
        from .simplex import solve_bounded_simplex
        return solve_bounded_simplex(p, tol=tol, max_iters=max_iters)
    raise ValueError(f"unknown LP method {method!r}")


def dual_bound(p: LpProblem, duals: dict, tol: float = 1e-7) -> float | None:
    """Objective of a dual-feasible multiplier set, a lower bound on the
    primal optimum; ``None`` if the multipliers are not dual feasible."""
    y_eq, y_ub, lam_lo, lam_hi = duals["eq"], duals["ub"], duals["lo"], duals["hi"]
    reduced = p.c - (p.A_eq.T @ y_eq if p.n_eq else 0) - (p.A_ub.T @ y_ub if p.n_ub else 0) \
        - lam_lo - lam_hi
    if np.abs(reduced).max(initial=0.0) > tol:
        return None
    if np.any(y_ub > tol) or np.any(lam_lo < -tol) or np.any(lam_hi > tol):
        return None
    if np.any((np.abs(lam_lo) > tol) & ~np.isfinite(p.lo)) or \
            np.any((np.abs(lam_hi) > tol) & ~np.isfinite(p.hi)):
        return None
    lo = np.where(np.isfinite(p.lo), p.lo, 0.0)
    hi = np.where(np.isfinite(p.hi), p.hi, 0.0)
    return float(p.b_eq @ y_eq + p.b_ub @ y_ub + lo @ lam_lo + hi @ lam_hi)


# --- MPS (fixed format) -----------------------------------------------------

def _mps_num(x: float) -> str:
    for digits in range(12, 0, -1):
        s = f"{x:.{digits}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot fit {x!r} in an MPS number field")


def _field_line(f1="", f2="", f3="", f4="", f5="", f6=""):
    # fixed columns: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61
    line = " " + f"{f1:<2}" + " " + f"{f2:<8}" + "  " + f"{f3:<8}" + "  " + f"{f4:>12}"
    if f5:
        line += "   " + f"{f5:<8}" + "  " + f"{f6:>12}"
    return line.rstrip()


def write_mps(p: LpProblem, path, name: str = "CACHEREC") -> None:
    """Dump ``p`` in fixed-column MPS for cross-checking with other solvers.

    Rows are named ``E<k>`` / ``L<k>`` and columns ``X<k>`` with base-36
    ordinals so every name fits the 8-character field.
    """
    def tag(prefix, k):
        digits = np.base_repr(k, 36)
        if len(digits) > 7:
            raise ValueError("problem too large for fixed MPS names")
        return prefix + digits

    lines = [f"NAME          {name[:8]}", "ROWS", " N  COST"]
    lines += [f" E  {tag('E', k)}" for k in range(p.n_eq)]
    lines += [f" L  {tag('L', k)}" for k in range(p.n_ub)]
    lines.append("COLUMNS")
    eq_c = p.A_eq.tocsc()
    ub_c = p.A_ub.tocsc()
    for j in range(p.n_vars):
        col = tag("X", j)
        entries = []
        if p.c[j] != 0:
            entries.append(("COST", p.c[j]))
        s, e = eq_c.indptr[j], eq_c.indptr[j + 1]
        entries += [(tag("E", r), v) for r, v in zip(eq_c.indices[s:e], eq_c.data[s:e]) if v != 0]
        s, e = ub_c.indptr[j], ub_c.indptr[j + 1]
        entries += [(tag("L", r), v) for r, v in zip(ub_c.indices[s:e], ub_c.data[s:e]) if v != 0]
        if not entries:
            entries.append(("COST", 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                lines.append(_field_line("", col, pair[0][0], _mps_num(pair[0][1]),
                                         pair[1][0], _mps_num(pair[1][1])))
            else:
                lines.append(_field_line("", col, pair[0][0], _mps_num(pair[0][1])))
    lines.append("RHS")
    rhs = [(tag("E", k), v) for k, v in enumerate(p.b_eq) if v != 0]
    rhs += [(tag("L", k), v) for k, v in enumerate(p.b_ub) if v != 0]
    for k in range(0, len(rhs), 2):
        pair = rhs[k:k + 2]
        if len(pair) == 2:
            lines.append(_field_line("", "RHS", pair[0][0], _mps_num(pair[0][1]),
                                     pair[1][0], _mps_num(pair[1][1])))
        else:
            lines.append(_field_line("", "RHS", pair[0][0], _mps_num(pair[0][1])))
    lines.append("BOUNDS")
    for j in range(p.n_vars):
        col = tag("X", j)
        lo, hi = p.lo[j], p.hi[j]
        if lo == hi:
            lines.append(_field_line("FX", "BND", col, _mps_num(lo)))
            continue
        if lo == -np.inf and hi == np.inf:
            lines.append(_field_line("FR", "BND", col))
            continue
        if lo == -np.inf:
            lines.append(_field_line("MI", "BND", col))
        elif lo != 0:
            lines.append(_field_line("LO", "BND", col, _mps_num(lo)))
        if hi != np.inf:
            lines.append(_field_line("UP", "BND", col, _mps_num(hi)))
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> LpProblem:
    """Parse the subset of fixed MPS written by :func:`write_mps`."""
    rows, kinds, counts = {}, {}, {}
    cols = {}
    entries = []
    rhs = {}
    bounds = []
    section = None
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            f1 = line[1:3].strip()
            f2 = line[4:12].strip()
            f3 = line[14:22].strip()
            f4 = line[24:36].strip()
            f5 = line[39:47].strip()
            f6 = line[49:61].strip()
            if section == "ROWS":
                kinds[f2] = f1
                if f1 != "N":
                    rows[f2] = counts.get(f1, 0)
                    counts[f1] = rows[f2] + 1
            elif section == "COLUMNS":
                cols.setdefault(f2, len(cols))
                entries.append((f2, f3, float(f4)))
                if f5:
                    entries.append((f2, f5, float(f6)))
            elif section == "RHS":
                rhs[f3] = float(f4)
                if f5:
                    rhs[f5] = float(f6)
            elif section == "BOUNDS":
                bounds.append((f1, f3, float(f4) if f4 else 0.0))
    n = len(cols)
    n_eq = sum(1 for k in kinds.values() if k == "E")
    n_ub = sum(1 for k in kinds.values() if k == "L")
    c = np.zeros(n)
    eq, ub = ([], [], []), ([], [], [])
    for col, row, val in entries:
        j = cols[col]
        if kinds[row] == "N":
            c[j] += val
        else:
            tgt = eq if kinds[row] == "E" else ub
            tgt[0].append(rows[row]); tgt[1].append(j); tgt[2].append(val)
    b_eq, b_ub = np.zeros(n_eq), np.zeros(n_ub)
    for row, val in rhs.items():
        (b_eq if kinds[row] == "E" else b_ub)[rows[row]] = val
    lo, hi = np.zeros(n), np.full(n, np.inf)
    for kind, col, val in bounds:
        j = cols[col]
        if kind == "FX":
            lo[j] = hi[j] = val
        elif kind == "FR":
            lo[j], hi[j] = -np.inf, np.inf
        elif kind == "MI":
            lo[j] = -np.inf
        elif kind == "LO":
            lo[j] = val
        elif kind == "UP":
            hi[j] = val
    A_eq = sp.csr_array((eq[2], (eq[0], eq[1])), shape=(n_eq, n))
    A_ub = sp.csr_array((ub[2], (ub[0], ub[1])), shape=(n_ub, n))
    return LpProblem(c=c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, lo=lo, hi=hi)

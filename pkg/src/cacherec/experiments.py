"""Solver registry and parameter sweeps producing CSV rows."""
from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .greedy import solve_greedy
from .hybrid import DEFAULT_P_MIN, solve_hybrid
from .model import (Scenario, baseline_policy, ensure_valid, hit_rate_from_cost, is_binary,
                    position_entropy)
from .optimal import SolveResult, solve_cars, solve_optimal
from .scenarios import gen_synthetic, zipf_weights
from .session import session_cost

METHODS = ("optimal", "greedy", "cars", "hybrid", "baseline")
SWEEP_PARAMS = ("q", "n", "alpha", "entropy")
CSV_HEADER = ["param", "value", "method", "seed", "hit_rate", "cost", "entropy",
              "wall_ms", "status"]
THREADS_ENV = "CACHEREC_THREADS"


def solve_baseline(s: Scenario) -> SolveResult:
    s = ensure_valid(s)
    t0 = time.perf_counter()
    pol = baseline_policy(s.U, s.v)
    return SolveResult("baseline", pol, session_cost(s, pol),
                       wall_ms=(time.perf_counter() - t0) * 1e3)


def run_method(method: str, s: Scenario, p_min: float = DEFAULT_P_MIN) -> SolveResult:
    if method == "optimal":
        return solve_optimal(s)
    if method == "greedy":
        return solve_greedy(s)
    if method == "cars":
        return solve_cars(s)
    if method == "hybrid":
        return solve_hybrid(s, P_min=p_min)
    if method == "baseline":
        return solve_baseline(s)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


@dataclass
class SweepRow:
    param: str
    value: float
    method: str
    seed: int
    hit_rate: float | None
    cost: float | None
    entropy: float
    wall_ms: float | None
    status: str


def regenerate(s: Scenario, seed: int) -> Scenario:
    """Redraw a generated scenario with another seed, keeping its settings."""
    g = s.meta
    needed = ("K", "N", "zipf_s", "zipf_beta", "L", "cache")
    if not all(k in g for k in needed):
        raise ValueError("scenario was not produced by the generator; cannot reseed")
    return gen_synthetic(g["K"], g["N"], g["zipf_s"], g["zipf_beta"], g["L"], s.alpha, s.q,
                         g["cache"], seed, permute_ranks=g.get("permute_ranks", False))


def apply_param(s: Scenario, param: str, value: float) -> Scenario:
    if param == "q":
        return s.replace(q=float(value))
    if param == "alpha":
        return s.replace(alpha=float(value))
    if param == "n":
        n = int(round(value))
        v = zipf_weights(n, float(s.meta.get("zipf_beta", 0.0)))
        return s.replace(v=v, meta={**s.meta, "N": n})
    if param == "entropy":
        v = zipf_weights(s.N, float(value))
        return s.replace(v=v, meta={**s.meta, "zipf_beta": float(value)})
    raise ValueError(f"unknown sweep parameter {param!r}")


def _point(args):
    s, param, value, method, seed, p_min = args
    try:
        sp = apply_param(s, param, value)
        ent = position_entropy(sp.v)
        res = run_method(method, sp, p_min)
        hr = hit_rate_from_cost(res.cost, sp.c) if is_binary(sp.c) else None
        return SweepRow(param, value, method, seed, hr, res.cost, ent, res.wall_ms, "ok")
    except Exception as exc:  # recorded, sweep continues
        return SweepRow(param, value, method, seed, None, None, float("nan"), None,
                        f"error:{type(exc).__name__}")


def run_sweep(s: Scenario, param: str, values, methods, seeds=None,
              p_min: float = DEFAULT_P_MIN, threads: int | None = None) -> list[SweepRow]:
    """Solve every (value, method, seed) point.

    Rows come back ordered by value, then method, then seed, whatever the
    thread count.  Without ``seeds`` the scenario is used as given; with
    seeds it is regenerated per seed from its generator settings.
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}")
    if seeds:
        scen = {seed: regenerate(s, seed) for seed in seeds}
    else:
        seed = int(s.meta.get("seed", 0))
        scen = {seed: s}
    jobs = [(scen[seed], param, value, method, seed, p_min)
            for value in values for method in methods for seed in scen]
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def rows_to_csv(rows, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.param, _num(r.value), r.method, r.seed, _num(r.hit_rate), _num(r.cost),
                     _num(r.entropy), f"{r.wall_ms:.3f}" if timing and r.wall_ms is not None
                     else "", r.status])
    return buf.getvalue()

"""Command-line driver.

Exit codes: 0 success, 2 usage error, 3 invalid scenario, 4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (METHODS, SWEEP_PARAMS, THREADS_ENV, rows_to_csv, run_method,
                          run_sweep)
from .hybrid import DEFAULT_P_MIN, p_shrink, p_shrink_monte_carlo
from .model import (ScenarioError, hit_rate_from_cost, is_binary, most_popular_hit_rate,
                    validate_scenario)
from .optimal import SolverError
from .scenarios import MatrixFormatError, gen_synthetic, load_scenario, save_matrix, save_scenario

EXIT_USAGE, EXIT_SCENARIO, EXIT_SOLVER = 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cacherec",
        description="Cache-friendly recommendation policies for long viewing sessions.",
        epilog=f"Set {THREADS_ENV} to run sweep points in parallel threads.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scenario bundle")
    g.add_argument("--k", type=int, required=True, help="catalog size K")
    g.add_argument("--n", type=int, required=True, help="recommendation slots N")
    g.add_argument("--zipf-s", type=float, default=0.8, help="popularity Zipf exponent")
    g.add_argument("--zipf-beta", type=float, default=1.0, help="click-position Zipf exponent")
    g.add_argument("--l", type=int, required=True, help="related items per content")
    g.add_argument("--alpha", type=float, default=0.8, help="probability of following a recommendation")
    g.add_argument("--q", type=float, default=0.9, help="required quality fraction")
    g.add_argument("--cache", type=int, default=1, help="number of cached (zero-cost) contents")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--permute-ranks", action="store_true",
                   help="assign popularity ranks in random order")
    g.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("solve", help="solve one scenario and print a JSON summary")
    s.add_argument("--scenario", required=True, help="scenario bundle directory")
    s.add_argument("--method", choices=METHODS, default="optimal")
    s.add_argument("--pmin", type=float, default=DEFAULT_P_MIN,
                   help="hybrid: largest dropped popularity mass")
    s.add_argument("--out", help="directory for the policy matrices R1.txt .. RN.txt")

    w = sub.add_parser("sweep", help="sensitivity sweep written as CSV")
    w.add_argument("--scenario", required=True)
    w.add_argument("--param", choices=SWEEP_PARAMS, required=True,
                   help="entropy sweeps the click Zipf exponent and reports H_v")
    w.add_argument("--values", type=float, nargs="+", required=True)
    w.add_argument("--methods", nargs="+", choices=METHODS, default=["optimal"])
    w.add_argument("--seeds", type=int, nargs="*",
                   help="regenerate the scenario for each seed")
    w.add_argument("--pmin", type=float, default=DEFAULT_P_MIN)
    w.add_argument("--csv", help="output file (default stdout)")
    w.add_argument("--no-timing", action="store_true",
                   help="leave wall_ms empty so repeated runs are byte-identical")

    p = sub.add_parser("pshrink", help="probability that a shrunk catalog stays feasible")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--kprime", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mc", type=int, metavar="TRIALS", help="also estimate by simulation")
    p.add_argument("--seed", type=int, default=0)
    return ap


def _load(path):
    sc = load_scenario(path)
    problems = validate_scenario(sc)
    if problems:
        raise ScenarioError(problems)
    return sc.normalized()


def _cmd_gen(a):
    sc = gen_synthetic(a.k, a.n, a.zipf_s, a.zipf_beta, a.l, a.alpha, a.q, a.cache, a.seed,
                       permute_ranks=a.permute_ranks)
    problems = validate_scenario(sc)
    if problems:
        raise ScenarioError(problems)
    save_scenario(sc, a.out)
    return 0


def _cmd_solve(a):
    sc = _load(a.scenario)
    res = run_method(a.method, sc, a.pmin)
    binary = is_binary(sc.c)
    out = {
        "method": res.method,
        "cost_per_content": res.cost,
        "hit_rate": hit_rate_from_cost(res.cost, sc.c) if binary else None,
        "wall_ms": round(res.wall_ms, 3),
    }
    if res.K_prime is not None:
        out["K_prime"] = res.K_prime
    if binary:
        out["mph"] = most_popular_hit_rate(sc)
    if a.out:
        d = Path(a.out)
        d.mkdir(parents=True, exist_ok=True)
        for n in range(res.policy.N):
            save_matrix(res.policy.R[n], d / f"R{n + 1}.txt")
    print(json.dumps(out))
    return 0


def _cmd_sweep(a):
    sc = _load(a.scenario)
    rows = run_sweep(sc, a.param, a.values, a.methods, a.seeds or None, p_min=a.pmin)
    text = rows_to_csv(rows, timing=not a.no_timing)
    if a.csv:
        Path(a.csv).write_text(text)
    else:
        sys.stdout.write(text)
    if is_binary(sc.c):
        print(f"mph {most_popular_hit_rate(sc)!r}", file=sys.stderr)
    failed = [r for r in rows if r.status != "ok"]
    if failed:
        print(f"{len(failed)} of {len(rows)} points failed", file=sys.stderr)
    return 0


def _cmd_pshrink(a):
    if not (0 < a.kprime <= a.k and 0 <= a.n <= a.l <= a.k - 1):
        raise ValueError("need 0 < kprime <= k and 0 <= n <= l <= k - 1")
    out = {"analytic": p_shrink(a.k, a.kprime, a.l, a.n)}
    if a.mc:
        est = p_shrink_monte_carlo(a.k, a.kprime, a.l, a.n, a.mc, seed=a.seed)
        out["monte_carlo"] = est
        out["abs_gap"] = abs(est - out["analytic"])
    print(json.dumps(out))
    return 0


def main(argv=None) -> int:
    ap = _parser()
    a = ap.parse_args(argv)
    handler = {"gen": _cmd_gen, "solve": _cmd_solve, "sweep": _cmd_sweep,
               "pshrink": _cmd_pshrink}[a.command]
    try:
        return handler(a)
    except (ScenarioError, MatrixFormatError, FileNotFoundError) as exc:
        print(f"cacherec: {exc}", file=sys.stderr)
        if isinstance(exc, ScenarioError):
            for v in exc.violations:
                print(f"  - {v}", file=sys.stderr)
        return EXIT_SCENARIO
    except SolverError as exc:
        print(f"cacherec: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"cacherec: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: figure-ready CSV/JSON data for the solvers.

Data files are pure functions of the arguments; the run manifest (with the
timestamp) goes to a sidecar ``<out>.manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from optphase import __version__
from optphase.errors import InfeasibleProbabilityError, InvalidArgumentError, NumericalFailure, UnsupportedStateError
from optphase.filter_design import DEFAULT_N_MAX, FilterProblem, optimal_filter
from optphase.fock_core import DEFAULT_TAIL_TOL, apply_filter, coherent_state, compute_mu
from optphase.optimal_state import optimal_state
from optphase.oracle import DEFAULT_RESTARTS, DEFAULT_SEED, maximize_mu_constrained, maximize_mu_unconstrained
from optphase.phase_sim import RNG_NAME, estimate_mu, sample_canonical

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


@dataclass
class RunManifest:
    command: str
    params: dict
    tool_version: str = __version__
    seed: int | None = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return "" if v is None else str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _json_text(command: str, payload: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, **payload}
    return json.dumps(_json_clean(doc), indent=2, sort_keys=False) + "\n"


def _emit(args, text: str, seed=None) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8", newline="")
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    manifest = RunManifest(command=args.command, params=params, seed=seed)
    Path(str(out) + ".manifest.json").write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")


def _problem(alpha: float, prob: float) -> FilterProblem:
    return FilterProblem(coherent_state(alpha, DEFAULT_TAIL_TOL), prob)


# --- optimal-state ---------------------------------------------------------

def cmd_optimal_state(args) -> int:
    sols = []
    for n in args.dims:
        if n < 1:
            raise InvalidArgumentError(f"dimension parameter must be >= 1, got {n}")
        sols.append((n, optimal_state(n)))
    if args.format == "json":
        results = [{"dim": n, "lambda": s.lam, "mu": s.mu, "coeffs": s.state.coeffs.tolist()} for n, s in sols]
        _emit(args, _json_text("optimal-state", {"results": results}))
    else:
        rows = [(n, k, c, s.lam, s.mu) for n, s in sols for k, c in enumerate(s.state.coeffs)]
        _emit(args, _csv_text(["dim", "n", "c_n", "lambda", "mu"], rows))
    return EXIT_OK


# --- filter ----------------------------------------------------------------

def filter_record(alpha: float, prob: float, n_max: int) -> dict:
    problem = _problem(alpha, prob)
    sol = optimal_filter(problem, n_max)
    return {
        "alpha": alpha,
        "prob": prob,
        "N": sol.threshold,
        "lambda": sol.lam,
        "f": sol.filter.f.tolist(),
        "achieved_prob": sol.achieved_prob,
        "mu_out": sol.mu_out,
        "mu_baseline": compute_mu(problem.state),
    }


def cmd_filter(args) -> int:
    rec = filter_record(args.alpha, args.prob, args.n_max)
    if args.format == "json":
        _emit(args, _json_text("filter", rec))
    else:
        head = [rec[k] for k in ("alpha", "prob", "N", "lambda", "achieved_prob", "mu_out", "mu_baseline")]
        rows = [head + [n, f] for n, f in enumerate(rec["f"])]
        _emit(args, _csv_text(["alpha", "prob", "N", "lambda", "achieved_prob", "mu_out", "mu_baseline", "n", "f_n"], rows))
    return EXIT_OK


# --- tradeoff / region-map ---------------------------------------------------

def _cell(job):
    alpha, prob, n_max = job
    try:
        sol = optimal_filter(_problem(alpha, prob), n_max)
    except InfeasibleProbabilityError:
        return (alpha, prob, None, math.nan, math.nan)
    return (alpha, prob, sol.threshold, sol.mu_out, sol.lam)


def _sweep(jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_cell, jobs, chunksize=8))
    return [_cell(j) for j in jobs]


def tradeoff_grid(alpha: float, points: int, n_max: int, p_min: float) -> np.ndarray:
    """Log-spaced success probabilities from 1 down to the larger of ``p_min`` and the floor."""
    problem = _problem(alpha, 1.0)
    floor = problem.feasibility_floor(min(n_max, problem.dim - 1))
    lo = max(p_min, floor * (1 + 1e-6))
    if points == 1:
        return np.array([1.0])
    return np.geomspace(1.0, lo, points)


def cmd_tradeoff(args) -> int:
    grid = tradeoff_grid(args.alpha, args.grid, args.n_max, args.p_min)
    cells = _sweep([(args.alpha, float(p), args.n_max) for p in grid], args.workers)
    rows = [(p, mu, n, lam) for _, p, n, mu, lam in cells]
    if args.format == "json":
        recs = [{"P": p, "mu_opt": mu, "N_opt": n, "lambda": lam} for p, mu, n, lam in rows]
        _emit(args, _json_text("tradeoff", {"alpha": args.alpha, "rows": recs}))
    else:
        _emit(args, _csv_text(["P", "mu_opt", "N_opt", "lambda"], rows))
    return EXIT_OK


def region_grid(lo: float, hi: float, points: int) -> np.ndarray:
    return np.linspace(lo, hi, points)


def cmd_region_map(args) -> int:
    alphas = region_grid(args.alpha_lo, args.alpha_hi, args.grid)
    probs = region_grid(args.p_lo, args.p_hi, args.grid)
    for p in probs:
        if not 0 < p <= 1:
            raise InvalidArgumentError(f"probabilities must lie in (0, 1], got {p}")
    jobs = [(float(a), float(p), args.n_max) for a in alphas for p in probs]
    cells = _sweep(jobs, args.workers)
    rows = [(a, p, n, mu) for a, p, n, mu, _ in cells]
    if args.format == "json":
        recs = [{"alpha": a, "P": p, "N_opt": n, "mu_opt": mu} for a, p, n, mu in rows]
        _emit(args, _json_text("region-map", {"rows": recs}))
    else:
        _emit(args, _csv_text(["alpha", "P", "N_opt", "mu_opt"], rows))
    return EXIT_OK


# --- simulate ------------------------------------------------------------------

def simulate_record(alpha: float, prob: float | None, samples: int, seed: int, n_max: int = DEFAULT_N_MAX):
    state = coherent_state(alpha, DEFAULT_TAIL_TOL)
    if prob is None:
        target, predicted, threshold = state, compute_mu(state), None
    else:
        sol = optimal_filter(FilterProblem(state, prob), n_max)
        target, _ = apply_filter(state, sol.filter)
        predicted, threshold = sol.mu_out, sol.threshold
    batch = sample_canonical(target, samples, seed)
    mu_hat, se = estimate_mu(batch)
    rec = {
        "alpha": alpha,
        "prob": prob,
        "N": threshold,
        "samples": samples,
        "seed": seed,
        "rng": RNG_NAME,
        "mu_predicted": predicted,
        "mu_hat": mu_hat,
        "std_err": se,
        "z": (mu_hat - predicted) / se if se > 0 else math.nan,
    }
    return rec, batch


def cmd_simulate(args) -> int:
    prob = None if args.prob.lower() == "none" else _checked_prob(args.prob)
    rec, batch = simulate_record(args.alpha, prob, args.samples, args.seed, args.n_max)
    if args.format == "json":
        _emit(args, _json_text("simulate", rec), seed=args.seed)
    else:
        keys = list(rec)
        _emit(args, _csv_text(keys, [[rec[k] for k in keys]]), seed=args.seed)
    if args.export_samples:
        Path(args.export_samples).write_text(_csv_text(["theta"], ([t] for t in batch.thetas)), encoding="utf-8")
    return EXIT_OK


# --- oracle --------------------------------------------------------------------

def cmd_oracle(args) -> int:
    if args.alpha is None:
        recs = []
        for n in args.dims or [1]:
            res = maximize_mu_unconstrained(n)
            recs.append({"dim": n, "value": res.best_value, "iterations": res.iterations,
                         "converged": res.converged, "vector": res.best_vector.tolist(),
                         "solver_mu": optimal_state(n).mu})
    else:
        if args.prob is None:
            raise InvalidArgumentError("--prob is required with --alpha")
        prob = _checked_prob(args.prob)
        state = coherent_state(args.alpha, dim=args.dim)
        res = maximize_mu_constrained(state, prob, args.dim, restarts=args.restarts, seed=args.seed)
        try:
            solver_mu = optimal_filter(FilterProblem(state, prob)).mu_out
        except InfeasibleProbabilityError:
            solver_mu = math.nan
        recs = [{"alpha": args.alpha, "prob": prob, "dim": args.dim, "value": res.best_value,
                 "iterations": res.iterations, "converged": res.converged,
                 "vector": res.best_vector.tolist(), "solver_mu": solver_mu,
                 "seed": args.seed, "restarts": args.restarts}]
    if args.format == "json":
        _emit(args, _json_text("oracle", {"results": recs}), seed=args.seed)
    else:
        keys = [k for k in recs[0] if k != "vector"]
        _emit(args, _csv_text(keys, [[r[k] for k in keys] for r in recs]), seed=args.seed)
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def _prob(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"probability must lie in (0, 1], got {text}")
    return v


def _checked_prob(text: str) -> float:
    try:
        return _prob(text)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        raise InvalidArgumentError(str(exc)) from None


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("optimal-state", help="optimal phase states on levels 0..N")
    p.add_argument("--dims", type=int, nargs="+", required=True)
    common(p)
    p.set_defaults(func=cmd_optimal_state)

    p = sub.add_parser("filter", help="optimal filter for a coherent state")
    p.add_argument("--alpha", type=_nonneg, required=True)
    p.add_argument("--prob", type=_prob, required=True)
    p.add_argument("--n-max", type=_positive_int, default=DEFAULT_N_MAX)
    common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("tradeoff", help="optimal mu against success probability")
    p.add_argument("--alpha", type=_nonneg, required=True)
    p.add_argument("--grid", type=_positive_int, default=50)
    p.add_argument("--n-max", type=_positive_int, default=DEFAULT_N_MAX)
    p.add_argument("--p-min", type=_prob, default=0.01)
    p.add_argument("--workers", type=_positive_int, default=1)
    common(p)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("region-map", help="optimal threshold N over an (alpha, P) grid")
    p.add_argument("--alpha-lo", type=_nonneg, default=0.1)
    p.add_argument("--alpha-hi", type=_nonneg, default=3.0)
    p.add_argument("--p-lo", type=_prob, default=0.05)
    p.add_argument("--p-hi", type=_prob, default=1.0)
    p.add_argument("--grid", type=_positive_int, default=40)
    p.add_argument("--n-max", type=_positive_int, default=DEFAULT_N_MAX)
    p.add_argument("--workers", type=_positive_int, default=1)
    common(p)
    p.set_defaults(func=cmd_region_map)

    p = sub.add_parser("simulate", help="Monte-Carlo canonical phase measurement")
    p.add_argument("--alpha", type=_nonneg, required=True)
    p.add_argument("--prob", default="none", help="success probability, or 'none' for no filter")
    p.add_argument("--samples", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-max", type=_positive_int, default=DEFAULT_N_MAX)
    p.add_argument("--export-samples", default=None, help="also write the sampled phases (column: theta)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="brute-force cross-check of the solvers")
    p.add_argument("--dims", type=int, nargs="+", default=None, help="unconstrained state problem sizes N")
    p.add_argument("--alpha", type=_nonneg, default=None)
    p.add_argument("--prob", default=None)
    p.add_argument("--dim", type=_positive_int, default=8)
    p.add_argument("--restarts", type=_positive_int, default=DEFAULT_RESTARTS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleProbabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidArgumentError, UnsupportedStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

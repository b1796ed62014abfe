"""Command-line interface: ``erc-evo {cov,optimize,baseline,oracle,study,compare}``.

Exit codes: 0 success, 1 optimization infeasible, 2 input/IO error,
3 guard refusal. Every artifact written embeds a run manifest (resolved
parameters, seed, SHA-256 of inputs, tool version); re-running the same
command line reproduces the artifact byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from erc_evo import __version__
from erc_evo.data_io import (
    compute_returns,
    load_covariance,
    load_prices_csv,
    report_to_dict,
    sample_covariance,
    save_covariance,
)
from erc_evo.errors import ConvergenceError, DataError, GuardError, InfeasibleBoundsError
from erc_evo.evolution import GaConfig, run_ga
from erc_evo.local_search import STEP_MODES, LsConfig, run_local_search
from erc_evo.oracle import enumerate_orthants, equal_weight, mvp_solve, parse_signature, solve_orthant
from erc_evo.risk import FITNESS_KINDS, Bounds, risk_report
from erc_evo.study import compare_methods, run_study

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_GUARD = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _sha256(path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except FileNotFoundError:
        raise CliError(f"input file not found: {path}") from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None


def manifest(args, params: dict, inputs: dict) -> dict:
    return {
        "tool": "erc-evo",
        "version": __version__,
        "subcommand": args.command,
        "params": params,
        "seed": params.get("seed"),
        "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items()},
    }


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_cov(path):
    _sha256(path)
    return load_covariance(path)


def _bounds(args, n: int) -> Bounds:
    if args.bounds_file:
        raw = json.loads(Path(args.bounds_file).read_text())
        lo = np.broadcast_to(np.asarray(raw.get("lower", args.lower), dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(raw.get("upper", args.upper), dtype=float), (n,))
        return Bounds(lo, hi)
    return Bounds.uniform(n, args.lower, args.upper)


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _configs(args, n: int) -> tuple[GaConfig, LsConfig]:
    bounds = _bounds(args, n)
    ga = GaConfig(
        population_size=args.ga_pop,
        max_iterations=args.ga_iters,
        n_elite=args.ga_elite,
        n_mutants=args.ga_mutants,
        n_random=args.ga_random,
        n_crossover=args.ga_crossover,
        mutation_fraction_cap=args.ga_mutation_cap,
        bounds=bounds,
        fitness_kind=args.fitness,
        seed=args.seed,
    )
    ls = LsConfig(
        epsilons=args.ls_eps,
        max_steps=args.ls_max_steps,
        bounds=bounds,
        fitness_kind=args.fitness,
        step_mode=args.ls_step,
    )
    return ga, ls


def _inputs(args) -> dict:
    inputs = {"cov": args.cov}
    if getattr(args, "bounds_file", None):
        inputs["bounds_file"] = args.bounds_file
    return inputs


def cmd_cov(args) -> int:
    _sha256(args.prices)
    table = load_prices_csv(args.prices)
    C = sample_covariance(compute_returns(table, args.returns), table.tickers)
    m = manifest(args, {"returns": args.returns, "seed": None}, {"prices": args.prices})
    save_covariance(C, table.tickers, args.out, comment=json.dumps(m, sort_keys=True))
    print(f"n={table.n} retained_rows={len(table.dates)} dropped_rows={table.dropped_rows} -> {args.out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    C, tickers = _load_cov(args.cov)
    ga_cfg, ls_cfg = _configs(args, C.shape[0])
    params = {"ga": ga_cfg.to_dict(), "ls": ls_cfg.to_dict(), "seed": args.seed}
    ga = run_ga(C, ga_cfg, workers=args.threads)
    ls = run_local_search(ga.best, C, ls_cfg)
    report = risk_report(ls.portfolio, C, tickers)
    out = report_to_dict(report, params)
    out["diagnostics"] = {
        "ga_best_fitness": ga.best_fitness,
        "ls_steps": ls.steps,
        "final_fitness": ls.fitness,
    }
    out["manifest"] = manifest(args, params, _inputs(args))
    _dump(out, args.out)
    if args.trace:
        with Path(args.trace).open("w") as fh:
            fh.write(f"# {json.dumps(out['manifest'], sort_keys=True)}\n")
            fh.write("generation,best_fitness,mean_fitness\n")
            for s in ga.history:
                fh.write(f"{s.generation},{s.best_fitness:.17g},{s.mean_fitness:.17g}\n")
    return EXIT_OK


def cmd_baseline(args) -> int:
    C, tickers = _load_cov(args.cov)
    x = mvp_solve(C) if args.kind == "mvp" else equal_weight(C.shape[0])
    params = {"kind": args.kind, "seed": None}
    out = report_to_dict(risk_report(x, C, tickers), params)
    out["manifest"] = manifest(args, params, {"cov": args.cov})
    _dump(out, args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    C, tickers = _load_cov(args.cov)
    if args.enumerate:
        sols = enumerate_orthants(C, args.c, n_limit=args.n_limit)
    else:
        beta = parse_signature(args.orthant)
        if beta.shape[0] != C.shape[0]:
            raise CliError(f"orthant signature has {beta.shape[0]} signs, covariance has {C.shape[0]} assets")
        sols = [solve_orthant(C, beta, args.c)]
    params = {"orthant": args.orthant, "enumerate": args.enumerate, "c": args.c,
              "n_limit": args.n_limit, "seed": None}
    _dump({"tickers": tickers, "solutions": [s.to_dict() for s in sols],
           "manifest": manifest(args, params, {"cov": args.cov})}, args.out)
    return EXIT_OK


def cmd_study(args) -> int:
    C, _ = _load_cov(args.cov)
    ga_cfg, ls_cfg = _configs(args, C.shape[0])
    params = {"ga": ga_cfg.to_dict(), "ls": ls_cfg.to_dict(), "runs": args.runs, "seed": args.seed}
    res = run_study(C, ga_cfg, ls_cfg, args.runs, args.seed, workers=args.threads)
    m = manifest(args, params, _inputs(args))
    res.to_csv(args.out, comment=json.dumps(m, sort_keys=True))
    print(f"runs={res.runs} generations={res.generations} -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    C, _ = _load_cov(args.cov)
    ga_cfg, ls_cfg = _configs(args, C.shape[0])
    params = {"ga": ga_cfg.to_dict(), "ls": ls_cfg.to_dict(), "runs": args.runs, "seed": args.seed}
    res = compare_methods(C, ga_cfg, ls_cfg, args.runs, args.seed, workers=args.threads,
                          allow_short=args.allow_short)
    out = res.to_dict()
    out["manifest"] = manifest(args, params, _inputs(args))
    _dump(out, args.out)
    return EXIT_OK


def _add_search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cov", required=True, help="covariance CSV")
    p.add_argument("--lower", type=float, default=0.0, help="lower weight bound for every asset (default: 0)")
    p.add_argument("--upper", type=float, default=1.0, help="upper weight bound for every asset (default: 1)")
    p.add_argument("--bounds-file", help='JSON {"lower": ..., "upper": ...}; scalars or per-asset lists')
    p.add_argument("--fitness", choices=FITNESS_KINDS, default="marginal",
                   help="marginal: spread of d sigma/d x_i; total: pairwise gaps of x_i (Cx)_i (default: marginal)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    g = p.add_argument_group("genetic algorithm (defaults are the published settings)")
    g.add_argument("--ga-pop", type=int, default=200, help="initial population size (default: 200)")
    g.add_argument("--ga-iters", type=int, default=300, help="generations (default: 300)")
    g.add_argument("--ga-elite", type=int, default=10, help="elites kept per generation (default: 10)")
    g.add_argument("--ga-random", type=int, default=50, help="fresh random chromosomes (default: 50)")
    g.add_argument("--ga-mutants", type=int, default=100, help="mutated chromosomes (default: 100)")
    g.add_argument("--ga-crossover", type=int, default=100, help="crossover children (default: 100)")
    g.add_argument("--ga-mutation-cap", type=float, default=0.15,
                   help="max fraction of genes a mutation redraws (default: 0.15)")
    s = p.add_argument_group("local search")
    s.add_argument("--ls-eps", type=_eps_list, default=(0.01, 0.001),
                   help="comma-separated step sizes, one phase each (default: 0.01,0.001)")
    s.add_argument("--ls-max-steps", type=int, default=500, help="accepted moves per phase (default: 500)")
    s.add_argument("--ls-step", choices=STEP_MODES, default="additive",
                   help="x_i +/- eps or x_i * (1 +/- eps) (default: additive)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erc-evo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"erc-evo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cov", help="sample covariance from a prices CSV")
    p.add_argument("--prices", required=True, help="CSV with header date,TICKER1,...")
    p.add_argument("--out", required=True, help="covariance CSV to write")
    p.add_argument("--returns", choices=("simple", "log"), default="simple", help="return convention (default: simple)")
    p.set_defaults(func=cmd_cov)

    p = sub.add_parser("optimize", help="GA followed by local search")
    _add_search_args(p)
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.add_argument("--trace", help="per-generation best/mean fitness CSV")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("baseline", help="minimum-variance or 1/N portfolio")
    p.add_argument("--cov", required=True)
    p.add_argument("--kind", choices=("mvp", "equal"), required=True)
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("oracle", help="log-barrier solution in one or all sign orthants")
    p.add_argument("--cov", required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--orthant", help="sign pattern such as ++-")
    grp.add_argument("--enumerate", action="store_true", help="solve all 2^n orthants")
    p.add_argument("--c", type=float, default=1.0, help="barrier constant (default: 1)")
    p.add_argument("--n-limit", type=int, default=20, help="refuse enumeration above this n (default: 20)")
    p.add_argument("--out", help="JSON output (default: stdout)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("study", help="convergence bands over repeated runs")
    _add_search_args(p)
    p.add_argument("--runs", type=int, default=100, help="independent runs (default: 100)")
    p.add_argument("--out", required=True, help="band CSV")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("compare", help="GA-seeded vs random-start local search, Welch t-test")
    _add_search_args(p)
    p.add_argument("--runs", type=int, default=100, help="paired runs (default: 100)")
    p.add_argument("--allow-short", action="store_true", help="permit negative lower bounds")
    p.add_argument("--out", help="JSON output (default: stdout)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except GuardError as exc:
        code, msg = EXIT_GUARD, str(exc)
    except (InfeasibleBoundsError, ConvergenceError) as exc:
        code, msg = EXIT_INFEASIBLE, str(exc)
    except FileNotFoundError as exc:
        code, msg = EXIT_INPUT, f"file not found: {exc.filename}"
    except (DataError, ValueError, OSError) as exc:
        code, msg = EXIT_INPUT, str(exc)
    print(f"erc-evo: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``drmlsad {solve,radius,backtest,bench,gen}``.

Exit codes: 0 converged, 1 I/O or parse error, 2 iteration limit,
3 infeasible problem, 4 infeasible backtest window.
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .backtest import BacktestConfig, Strategy, rolling_backtest
from .core import DrMlsadProblem, Status, build_scenario_model
from .data import (SyntheticSpec, bench_defaults, gen_synthetic, load_returns_csv,
                   save_returns_csv, to_json)
from .estimators import solve as run_solver
from .exceptions import (DrMlsadError, InfeasibleProblemError, InsufficientHistoryError,
                         MissingValuesError, ParseError, WindowInfeasibleError)
from .oracle import lp_reference_solve, subgradient_reference_solve
from .rwpi import DEFAULT_CV_GRID, choose_target_return, rwpi_radius

EXIT_OK, EXIT_IO, EXIT_ITER, EXIT_INFEASIBLE, EXIT_WINDOW = 0, 1, 2, 3, 4
TRACE_FIELDS = ("outer", "inner", "psi", "grad_norm", "step", "eps_j", "kkt", "sigma", "gamma")

log = logging.getLogger("drmlsad")


def _err(msg):
    print(f"drmlsad: {msg}", file=sys.stderr)


def _load(args):
    return load_returns_csv(args.input, missing=args.missing, unit=args.unit)


def _status_code(status):
    return {Status.CONVERGED: EXIT_OK, Status.ITER_LIMIT: EXIT_ITER,
            Status.INFEASIBLE: EXIT_INFEASIBLE}[Status(status)]


def _emit(text, out):
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_solve(args):
    data = _load(args)
    scen = build_scenario_model(data)
    eps = args.epsilon
    if args.rho is not None:
        rho = args.rho
    else:
        rho = choose_target_return(data) - eps
    prob = DrMlsadProblem(scen, eps, rho)
    it, rep = run_solver(prob, args.solver, args.tol) if not args.trace else _traced(prob, args)
    payload = {**rep.to_dict(), "iterations": rep.iteration_label,
               "problem": prob.to_dict(), "weights": it.x.tolist(),
               "asset_names": list(data.asset_names)}
    if args.verify:
        _, f_sub = subgradient_reference_solve(prob, iters=args.verify_iters)
        _, f_lp = lp_reference_solve(prob)
        payload["verify"] = {"subgradient_objective": f_sub, "lp_objective": f_lp,
                             "gap_to_lp": rep.objective - f_lp}
        print(f"verify: solver {rep.objective:.10g}  lp {f_lp:.10g}  "
              f"subgradient {f_sub:.10g}", file=sys.stderr)
    _emit(to_json(payload), args.json)
    if args.json:
        print(to_json({k: payload[k] for k in ("solver_name", "status", "objective",
                                                "kkt_residual", "iterations")}))
    return _status_code(rep.status)


def _traced(prob, args):
    from .admm import AdmmConfig, dadmm_solve, padmm_solve
    from .ppdssn import ppa_solve
    if args.solver == "ppdssn":
        it, rep = ppa_solve(prob, tol=args.tol, trace=True)
    else:
        fn = padmm_solve if args.solver == "padmm" else dadmm_solve
        it, rep = fn(prob, AdmmConfig(tol=args.tol), trace=True)
    with open(args.trace, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, extrasaction="ignore")
        w.writeheader()
        w.writerows(rep.trace)
    return it, rep


def cmd_radius(args):
    data = _load(args)
    rho_bar = args.rho_bar if args.rho_bar is not None else choose_target_return(data)
    est = rwpi_radius(data, rho_bar, args.alpha, k=args.k, seed=args.seed,
                      scaling=args.scaling)
    payload = {**est.to_dict(), "rho_bar": rho_bar}
    _emit(to_json(payload), args.json)
    return EXIT_OK


def cmd_backtest(args):
    data = _load(args)
    grid = tuple(float(v) for v in args.cv_grid.split(",")) if args.cv_grid else DEFAULT_CV_GRID
    cfg = BacktestConfig(tau=args.tau, step=args.step, strategy=args.strategy,
                         alpha_bar=args.alpha, cv_grid=grid, seed=args.seed,
                         tol=args.tol, scaling=args.scaling, fixed_epsilon=args.epsilon)
    if cfg.tau >= data.n_periods:
        _err(f"window exceeds data: tau={cfg.tau} >= {data.n_periods} periods")
        return EXIT_IO
    windows = []
    weights, metrics = rolling_backtest(data, cfg, windows)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "windows.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "epsilon", "rho", "objective", "realized", "status",
                    *data.asset_names])
        for rec, wt in zip(windows, weights):
            w.writerow([rec["t"], rec["epsilon"], rec["rho"], rec["objective"],
                        rec["realized"], rec["status"], *wt.tolist()])
    to_json({**metrics.to_dict(), "strategy": cfg.strategy.value, "tau": cfg.tau},
            out / "metrics.json")
    with (out / "wealth.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "wealth"])
        for i, v in enumerate(metrics.wealth):
            w.writerow([i, repr(float(v))])
    print(to_json({k: v for k, v in metrics.to_dict().items() if k != "wealth"}))
    return EXIT_OK


def _parse_sizes(text):
    sizes = []
    for tok in text.split(","):
        n, m = tok.lower().split("x")
        sizes.append((int(n), int(m)))
    return sizes


def cmd_bench(args):
    solvers = args.solvers.split(",")
    rows = []
    code = EXIT_OK
    for n, m in _parse_sizes(args.sizes):
        data = gen_synthetic(SyntheticSpec(n, m, seed=args.seed))
        prob = bench_defaults(data, rule=args.rho_rule)
        for s in solvers:
            _, rep = run_solver(prob, s, args.tol)
            rows.append({"size": f"{n}x{m}", "solver": s, "iter": rep.iteration_label,
                         "time": f"{rep.wall_time:.4f}", "kkt": f"{rep.kkt_residual:.3e}",
                         "objective": repr(rep.objective), "status": Status(rep.status).value})
            if rep.status is not Status.CONVERGED:
                code = EXIT_ITER
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return code


def cmd_gen(args):
    spec = SyntheticSpec(args.n, args.m, seed=args.seed,
                         scale_interpretation=args.scale_interpretation)
    save_returns_csv(gen_synthetic(spec), args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="drmlsad", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp):
        sp.add_argument("--input", required=True, help="returns CSV (header row of asset names)")
        sp.add_argument("--unit", choices=("percent", "fraction"), default="percent")
        sp.add_argument("--missing", choices=("reject", "drop-assets"), default="reject")

    sp = sub.add_parser("solve", help="solve one problem instance")
    data_opts(sp)
    sp.add_argument("--epsilon", type=float, required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--rho", type=float, help="return floor is rho + epsilon")
    g.add_argument("--rho-policy", choices=("target-minus-eps",), default="target-minus-eps")
    sp.add_argument("--solver", choices=("ppdssn", "padmm", "dadmm"), default="ppdssn")
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--verify", action="store_true", help="cross-check against reference solvers")
    sp.add_argument("--verify-iters", type=int, default=200_000)
    sp.add_argument("--json", help="write the full report here instead of stdout")
    sp.add_argument("--trace", help="write per-iteration records (CSV) here")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("radius", help="profile-inference Wasserstein radius")
    data_opts(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scaling", choices=("theorem", "paper-literal"), default="theorem")
    sp.add_argument("--rho-bar", type=float)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_radius)

    sp = sub.add_parser("backtest", help="rolling-window out-of-sample evaluation")
    data_opts(sp)
    sp.add_argument("--tau", type=int, default=90)
    sp.add_argument("--step", type=int, default=1)
    sp.add_argument("--strategy", choices=[s.value for s in Strategy], default="rwpi")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--cv-grid", help="comma-separated radii")
    sp.add_argument("--epsilon", type=float, help="fixed radius for every window")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scaling", choices=("theorem", "paper-literal"), default="theorem")
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--out-dir", default="backtest_out")
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("bench", help="synthetic solver benchmark")
    sp.add_argument("--sizes", default="200x4000", help="e.g. 200x4000,400x8000")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--solvers", default="ppdssn,padmm,dadmm")
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--rho-rule", choices=("mean", "literal"), default="mean")
    sp.add_argument("--out", help="CSV path (stdout by default)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gen", help="write a synthetic returns panel")
    sp.add_argument("--n", type=int, required=True, help="number of periods")
    sp.add_argument("--m", type=int, required=True, help="number of assets")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scale-interpretation", choices=("StdDev", "Variance"), default="StdDev")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except WindowInfeasibleError as exc:
        _err(f"infeasible window {exc.window}: {exc}")
        return EXIT_WINDOW
    except InfeasibleProblemError as exc:
        _err(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except InsufficientHistoryError as exc:
        _err(str(exc))
        return EXIT_IO
    except (OSError, ParseError, MissingValuesError) as exc:
        _err(str(exc))
        return EXIT_IO
    except (DrMlsadError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: fit, predict, sobol, plan, heat-demo, coverage, converge.
Every subcommand accepts --seed; results are emitted as JSON (reports also
as CSV). Failures print a machine-readable JSON error to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import budget as budget_mod
from .experiments import run_convergence_check, run_coverage_experiment
from .heat import HeatConfig, exact_solution, simulate_code, write_training_csv
from .hyperfit import HyperParams, SearchConfig, fit_hyperparameters, log_marginal_likelihood
from .kernels import GaussianMeasure, KernelFamily, KernelSpec
from .sobol import estimate_sobol, pick_freeze_sample
from .surrogate import fit_blup, load_training_csv, predict

__all__ = ["main", "cli_main"]


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _heat_config(args, cfg: dict) -> HeatConfig:
    section = dict(cfg.get("heat", {}))
    if getattr(args, "dispersions", None):
        section["dispersions"] = [float(v) for v in args.dispersions.split(",")]
    if getattr(args, "sigma_mu", None) is not None:
        section["design_std"] = args.sigma_mu
    kwargs = {}
    if "dispersions" in section:
        kwargs["dispersions"] = tuple(section["dispersions"])
    if "design_std" in section:
        kwargs["design_std"] = float(section["design_std"])
    if "time" in section:
        kwargs["time"] = float(section["time"])
    if "inner_batch" in section:
        kwargs["inner_batch"] = int(section["inner_batch"])
    return HeatConfig(**kwargs)


def _cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    data = load_training_csv(args.data, replications=args.replications)
    search = SearchConfig.from_config(cfg.get("search", {}))
    hyper = fit_hyperparameters(data, search, seed=args.seed)
    fitted = data.with_noise(hyper.noise_variance)
    summary = {
        "kernel": KernelSpec(
            KernelFamily.SQUARED_EXPONENTIAL, hyper.lengthscales, hyper.signal_variance
        ).to_config(),
        "noise_variance": hyper.noise_variance,
        "replications": data.replications,
        "n": data.n,
        "total_budget": data.total_budget,
        "log_marginal_likelihood": log_marginal_likelihood(fitted, hyper),
        "seed": args.seed,
    }
    out = json.dumps(summary, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    print(out)
    return 0


def _read_points_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    cols = [i for i, name in enumerate(header) if name.startswith("x")]
    return rows[:, cols]


def _blup_from_model(model_path, data_path):
    with open(model_path) as fh:
        model_cfg = json.load(fh)
    kernel = KernelSpec.from_config(model_cfg["kernel"])
    data = load_training_csv(
        data_path,
        noise_variance=model_cfg["noise_variance"],
        replications=model_cfg.get("replications"),
    )
    data = data.with_noise(model_cfg["noise_variance"])
    return fit_blup(data, kernel)


def _cmd_predict(args) -> int:
    model = _blup_from_model(args.model, args.data)
    points = _read_points_csv(args.points)
    mean, mse = predict(model, points)
    writer = csv.writer(open(args.out, "w", newline="") if args.out else sys.stdout)
    writer.writerow(["mean", "mse"])
    for a, b in zip(np.atleast_1d(mean), np.atleast_1d(mse)):
        writer.writerow([f"{a:.17g}", f"{b:.17g}"])
    return 0


def _cmd_sobol(args) -> int:
    cfg = _load_config(args.config)
    heat = _heat_config(args, cfg)
    frozen = [int(v) for v in args.frozen.split(",")]
    measure = GaussianMeasure(heat.dimension, heat.design_std**2)
    rng = np.random.default_rng(args.seed)
    sample = pick_freeze_sample(measure, frozen, args.m, rng)
    total_budget = None
    if args.evaluator == "exact":
        f = lambda pts: exact_solution(heat, pts)
    elif args.evaluator == "code":
        seeds = iter(rng.spawn(2 * args.m))

        def f(pts):
            return np.array(
                [simulate_code(heat, p, args.replications, next(seeds)).mean() for p in pts]
            )

        total_budget = float(2 * args.m * args.replications)
    elif args.evaluator == "surrogate":
        if not (args.model and args.data):
            raise ValueError("surrogate evaluator requires --model and --data")
        model = _blup_from_model(args.model, args.data)
        total_budget = float(model.n)
        f = lambda pts: predict(model, pts)[0]
    else:
        raise ValueError(f"unknown evaluator {args.evaluator}")
    est = estimate_sobol(f, sample, evaluator=args.evaluator, total_budget=total_budget)
    print(est.to_json(level=args.level))
    return 0


def _cmd_plan(args) -> int:
    if args.pilot_imse is not None:
        if args.pilot_T is None:
            raise ValueError("--pilot-imse requires --pilot-T")
        T = budget_mod.plan_budget_from_pilot(
            args.pilot_imse, args.pilot_T, args.sigma_eps2, args.m
        )
        imse_at_T = budget_mod.extrapolate_imse(args.pilot_imse, args.pilot_T, args.sigma_eps2, T)
        regime = budget_mod.regime_classify(args.m, imse_at_T)
        plan = budget_mod.BudgetPlan(
            m=args.m,
            total_budget=T,
            kernel_regime="pilot_extrapolation",
            noise_variance=args.sigma_eps2,
            regime=regime,
            m_bt2=args.m * imse_at_T,
        )
    else:
        if args.regime == "matern":
            regime_spec = budget_mod.MaternRegime(nu=args.nu, d=args.d)
        elif args.regime == "gaussian":
            regime_spec = budget_mod.GaussianRegime(d=args.d)
        elif args.regime == "gaussian-measure":
            regime_spec = budget_mod.GaussianMeasureRegime(xi_d=args.xi)
        else:
            raise ValueError(f"unknown regime {args.regime}")
        T = budget_mod.critical_budget(regime_spec, args.m, args.sigma_eps2)
        plan = budget_mod.BudgetPlan(
            m=args.m,
            total_budget=T,
            kernel_regime=args.regime,
            noise_variance=args.sigma_eps2,
            regime=budget_mod.Regime.BALANCED,  # critical point by construction
            m_bt2=1.0,
        )
    print(plan.to_json())
    return 0


def _cmd_heat_demo(args) -> int:
    cfg = _load_config(args.config)
    heat = _heat_config(args, cfg)
    write_training_csv(heat, args.out, n=args.n, replications=args.replications, seed=args.seed)
    print(json.dumps({"written": args.out, "n": args.n, "replications": args.replications}))
    return 0


def _cmd_coverage(args) -> int:
    cfg = _load_config(args.config)
    heat = _heat_config(args, cfg)
    grid = []
    for cell in args.grid.split(","):
        m_str, alpha_str = cell.split(":")
        grid.append((int(m_str), float(alpha_str)))
    report = run_coverage_experiment(
        heat,
        grid,
        replicates=args.replicates,
        level=args.level,
        seed=args.seed,
        evaluator=args.evaluator,
        pilot_budget=args.pilot_T,
        search=SearchConfig.from_config(cfg.get("search", {})),
    )
    if args.csv:
        report.write_csv(args.csv)
    out = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    print(out)
    return 0


def _cmd_converge(args) -> int:
    kernel = KernelSpec(
        KernelFamily.SQUARED_EXPONENTIAL,
        tuple([args.theta] * args.d),
        args.sigma2,
    )
    measure = GaussianMeasure(args.d, args.sigma_mu**2)
    levels = [int(v) for v in args.levels.split(",")]
    rows = run_convergence_check(
        kernel, measure, args.T, args.sigma_eps2, levels=levels, seed=args.seed
    )
    print(json.dumps({"levels": [{"n": n, "median_gap": g} for n, g in rows]}))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpsobol")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit hyperparameters to a training CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="BLUP mean and MSE at query points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("sobol", help="pick-freeze Sobol index with confidence interval")
    p.add_argument("--frozen", required=True, help="1-based coordinates, comma separated")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--evaluator", choices=["exact", "surrogate", "code"], default="exact")
    p.add_argument("--model", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--dispersions", default=None)
    p.add_argument("--sigma-mu", type=float, default=None)
    p.set_defaults(func=_cmd_sobol)

    p = sub.add_parser("plan", help="critical budget for a Monte-Carlo sample size")
    p.add_argument("--regime", choices=["matern", "gaussian", "gaussian-measure"], default=None)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--sigma-eps2", type=float, required=True)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--pilot-imse", type=float, default=None)
    p.add_argument("--pilot-T", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("heat-demo", help="write a simulated training CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", dest="replications", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="heat_training.csv")
    p.add_argument("--config", default=None)
    p.add_argument("--dispersions", default=None)
    p.add_argument("--sigma-mu", type=float, default=None)
    p.set_defaults(func=_cmd_heat_demo)

    p = sub.add_parser("coverage", help="confidence-interval coverage study")
    p.add_argument("--grid", required=True, help="cells as m:alpha, comma separated")
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--evaluator", choices=["spectral", "exact", "blup"], default="spectral")
    p.add_argument("--pilot-T", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--dispersions", default=None)
    p.add_argument("--sigma-mu", type=float, default=None)
    p.set_defaults(func=_cmd_coverage)

    p = sub.add_parser("converge", help="finite-design vs idealized MSE gap per design size")
    p.add_argument("--T", type=float, default=1000.0)
    p.add_argument("--sigma-eps2", type=float, default=1.0)
    p.add_argument("--levels", default="50,200,800")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--sigma-mu", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_converge)

    return parser


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse errors already printed usage
        return int(exc.code or 0)
    except Exception as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


def main() -> None:
    sys.exit(cli_main())

"""Command-line interface.

One executable, eight subcommands: ``simulate``, ``estimate``, ``bound``,
``oracle``, ``example``, ``coverage``, ``rate``, ``efficiency``. Every
successful run writes exactly one JSON document to stdout (floats carry 17
significant digits) with an embedded run manifest; logs go to stderr. Study
subcommands exit nonzero when an acceptance band is violated.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, _jsonio
from .aggregation import collapsibility_residuals
from .dgp import (
    OUTCOME_DEPENDENT,
    RANDOM_SAMPLING,
    DiscreteDGP,
    draw_outcome_dependent,
    draw_random_sample,
    read_dataset_csv,
    read_dgp_config,
    tilt_to_outcome_rate,
    worked_example,
    write_dataset_csv,
)
from .estimator import estimate_random_sampling, rho_grid
from .harness import ExperimentConfig, het3_dgp, run_study
from .inference import analyze_outcome_dependent, ci_random_sampling
from .nuisance import (
    ETA_COMPOSE,
    ETA_DIRECT,
    LOGISTIC,
    ORACLE,
    PERTURBED_ORACLE,
    PERTURB_TARGETS,
    NuisanceSpec,
    fit_nuisances,
    make_folds,
    perturb,
)
from .oracle import (
    efficiency_bound_outcome_dependent,
    efficiency_bound_random_sampling,
    estimand_report,
    marginal_risk_ratio,
    partial_curve,
    risk_difference_bound,
)

log = logging.getLogger("godds")

_BUILTIN_DGPS = {"worked_example": worked_example, "het3": het3_dgp}


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(
    subcommand: str,
    args: argparse.Namespace,
    inputs: list[str],
    t0: float,
    seed: int | None = None,
) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {
        "subcommand": subcommand,
        "flags": flags,
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "version": __version__,
        "master_seed": seed if seed is not None else getattr(args, "seed", None),
        "wall_clock_s": time.time() - t0,
    }


def _emit(doc: dict) -> None:
    sys.stdout.write(_jsonio.dumps(doc, indent=2) + "\n")


def _load_dgp(name_or_path: str) -> DiscreteDGP:
    if name_or_path in _BUILTIN_DGPS:
        return _BUILTIN_DGPS[name_or_path]()
    return read_dgp_config(name_or_path)


def _dgp_inputs(name_or_path: str) -> list[str]:
    return [] if name_or_path in _BUILTIN_DGPS else [name_or_path]


_CLI_NUISANCE_KINDS = {"logistic": LOGISTIC, "oracle": ORACLE, "perturbed": PERTURBED_ORACLE}


def _nuisance_spec(args: argparse.Namespace) -> NuisanceSpec:
    return NuisanceSpec(
        kind=_CLI_NUISANCE_KINDS[args.nuisance],
        clip_eps=args.clip_eps,
        ridge=args.ridge,
        eta_mode=args.eta_mode,
    )


def _oracle_truth(args: argparse.Namespace):
    if args.nuisance == "logistic":
        return None
    if args.dgp is None or args.omega is None:
        raise SystemExit(f"--nuisance {args.nuisance} requires --dgp and --omega for the truth law")
    return tilt_to_outcome_rate(_load_dgp(args.dgp), args.omega)


def _cli_perturbations(args: argparse.Namespace) -> tuple[tuple[str, float], ...]:
    if args.nuisance != "perturbed":
        return ()
    if args.perturb_target is None:
        raise SystemExit("--nuisance perturbed requires --perturb-target and --perturb-amplitude")
    return ((args.perturb_target, args.perturb_amplitude),)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    t0 = time.time()
    dgp = _load_dgp(args.dgp)
    if args.scheme == "ods":
        if args.omega is None:
            raise SystemExit("--scheme ods requires --omega")
        dataset = draw_outcome_dependent(dgp, args.n, args.omega, args.seed)
    else:
        dataset = draw_random_sample(dgp, args.n, args.seed)
    write_dataset_csv(dataset, args.out)
    log.info("wrote %d rows to %s", dataset.n, args.out)
    _emit(
        {
            "n": dataset.n,
            "d": dataset.d,
            "scheme": dataset.scheme,
            "omega_design": dataset.omega_design,
            "out": str(args.out),
            "manifest": _manifest("simulate", args, _dgp_inputs(args.dgp), t0),
        }
    )
    return 0


def _cmd_estimate(args) -> int:
    t0 = time.time()
    scheme = RANDOM_SAMPLING if args.sampling == "random" else OUTCOME_DEPENDENT
    dataset = read_dataset_csv(args.data, scheme=scheme)
    inputs = [args.data] + (_dgp_inputs(args.dgp) if args.dgp else [])
    spec = _nuisance_spec(args)

    if args.sampling == "random":
        plan = make_folds(dataset.n, args.folds, args.seed)
        truth = _oracle_truth(args)
        fits = fit_nuisances(dataset, plan, spec, truth=truth)
        for target, amplitude in _cli_perturbations(args):
            fits = {f: perturb(fit, target, amplitude) for f, fit in fits.items()}
        est = estimate_random_sampling(dataset, fits, plan)
        ci = ci_random_sampling(est, args.alpha)
        _emit(
            {
                "gamma_hat": est.gamma,
                "log_gamma_hat": est.log_gamma,
                "ci": {"lo": ci.lo, "hi": ci.hi},
                "alpha": args.alpha,
                "n": dataset.n,
                "manifest": _manifest("estimate", args, inputs, t0),
            }
        )
        return 0

    result = analyze_outcome_dependent(
        dataset,
        rho_low=args.rho_min,
        rho_high=args.rho_max,
        n_points=args.rho_points,
        alpha=args.alpha,
        spec=spec,
        k_folds=args.folds,
        seed=args.seed,
        truth=_oracle_truth(args),
        perturbations=_cli_perturbations(args),
    )
    cells = result.cells
    _emit(
        {
            "omega_hat": cells.omega_hat,
            "psi": {
                "a0y0": cells.values[(0, 0)],
                "a0y1": cells.values[(0, 1)],
                "a1y0": cells.values[(1, 0)],
                "a1y1": cells.values[(1, 1)],
            },
            "curve": [
                {
                    "rho": float(result.curve.rho_grid[i]),
                    "gamma_hat": float(result.curve.gamma[i]),
                    "ci_lo": float(result.ci_lo[i]),
                    "ci_hi": float(result.ci_hi[i]),
                }
                for i in range(result.curve.rho_grid.size)
            ],
            "bound": {"l": result.bound.l_alpha, "u": result.bound.u_alpha},
            "manifest": _manifest("estimate", args, inputs, t0),
        }
    )
    return 0


def _cmd_bound(args) -> int:
    t0 = time.time()
    dataset = read_dataset_csv(args.data, scheme=OUTCOME_DEPENDENT)
    inputs = [args.data] + (_dgp_inputs(args.dgp) if args.dgp else [])
    result = analyze_outcome_dependent(
        dataset,
        rho_low=args.rho_min,
        rho_high=args.rho_max,
        n_points=2 if args.rho_min < args.rho_max else 1,
        alpha=args.alpha,
        spec=_nuisance_spec(args),
        k_folds=args.folds,
        seed=args.seed,
        truth=_oracle_truth(args),
        perturbations=_cli_perturbations(args),
    )
    bound = result.bound
    endpoint_cis = [
        {
            "rho": float(result.curve.rho_grid[i]),
            "gamma_hat": float(result.curve.gamma[i]),
            "lo": float(result.ci_lo[i]),
            "hi": float(result.ci_hi[i]),
        }
        for i in range(result.curve.rho_grid.size)
    ]
    _emit(
        {
            "gamma_min": bound.gamma_min,
            "gamma_max": bound.gamma_max,
            "l_alpha": bound.l_alpha,
            "u_alpha": bound.u_alpha,
            "endpoint_cis": endpoint_cis,
            "manifest": _manifest("bound", args, inputs, t0),
        }
    )
    return 0


def _cmd_oracle(args) -> int:
    t0 = time.time()
    dgp = _load_dgp(args.dgp)
    qlaw = tilt_to_outcome_rate(dgp, args.omega)
    report = estimand_report(dgp)
    grid = rho_grid(args.rho_min, args.rho_max, args.rho_points)
    curve = partial_curve(qlaw, grid)
    _emit(
        {
            "rho_true": report.rho,
            "omega": qlaw.omega,
            "estimands": {
                "conditional_or": report.conditional,
                "population_or": report.population,
                "arithmetic_or": report.arithmetic,
                "geometric_or": report.geometric,
                "marginal_rr": report.marginal_rr,
            },
            "curve": [
                {
                    "rho": float(grid[i]),
                    "geometric": float(curve.geometric[i]),
                    "arithmetic": float(curve.arithmetic[i]),
                    "population": float(curve.population[i]),
                    "sigma2": efficiency_bound_outcome_dependent(qlaw, float(grid[i])),
                }
                for i in range(grid.size)
            ],
            "log_curve": {"slope": curve.log_slope, "intercept": curve.log_intercept},
            "bounds": {
                "outcome_dependent_at_rho_true": efficiency_bound_outcome_dependent(
                    qlaw, report.rho
                ),
                "random_sampling": efficiency_bound_random_sampling(dgp),
                "risk_difference": risk_difference_bound(dgp),
            },
            "manifest": _manifest("oracle", args, _dgp_inputs(args.dgp), t0),
        }
    )
    return 0


def _cmd_example(args) -> int:
    t0 = time.time()
    dgp = worked_example()
    report = estimand_report(dgp)
    rr = {
        lab: float(dgp.nu1[k] / dgp.nu0[k]) for k, lab in enumerate(dgp.labels)
    }
    table = [
        {
            "x": lab,
            "risk_treated": float(dgp.nu1[k]),
            "risk_control": float(dgp.nu0[k]),
            "rr": rr[lab],
            "or": report.conditional[lab],
        }
        for k, lab in enumerate(dgp.labels)
    ]
    _emit(
        {
            "table": table,
            "effects": {
                "population_or": report.population,
                "arithmetic_or": report.arithmetic,
                "geometric_or": report.geometric,
                "marginal_rr": marginal_risk_ratio(dgp),
            },
            "residuals": collapsibility_residuals(dgp),
            "manifest": _manifest("example", args, [], t0),
        }
    )
    return 0


def _cmd_study(args) -> int:
    t0 = time.time()
    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    doc.setdefault("study", args.study_name)
    if doc["study"] != args.study_name:
        raise SystemExit(
            f"config study {doc['study']!r} does not match subcommand {args.study_name!r}"
        )
    config = ExperimentConfig.from_dict(doc)
    log.info("running %s study on scenario %s", config.study, config.scenario)
    report = run_study(config)
    report_obj = report.to_json_obj()
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(_jsonio.dumps(report_obj, indent=2) + "\n")
        (out_dir / "report.csv").write_text(report.to_csv_text())
        log.info("wrote report.json and report.csv to %s", out_dir)
    _emit(
        {
            "report": report_obj,
            "manifest": _manifest(
                args.study_name, args, [args.config], t0, seed=config.master_seed
            ),
        }
    )
    return 0 if report.all_passed() else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_nuisance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nuisance", choices=sorted(_CLI_NUISANCE_KINDS), default="logistic")
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--clip-eps", type=float, default=0.01, dest="clip_eps")
    p.add_argument("--ridge", type=float, default=1e-4)
    p.add_argument("--eta-mode", choices=[ETA_COMPOSE, ETA_DIRECT], default=ETA_COMPOSE,
                   dest="eta_mode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dgp", default=None, help="builtin name or config path (oracle truth)")
    p.add_argument("--omega", type=float, default=None, help="design outcome rate of the truth law")
    p.add_argument("--perturb-target", choices=PERTURB_TARGETS, default=None,
                   dest="perturb_target")
    p.add_argument("--perturb-amplitude", type=float, default=0.0, dest="perturb_amplitude")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="godds",
        description="Geometric-mean odds ratio under outcome-dependent sampling",
    )
    parser.add_argument("--version", action="version", version=f"godds {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a dataset from a population definition")
    p.add_argument("--dgp", default="worked_example")
    p.add_argument("--scheme", choices=["random", "ods"], default="ods")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the odds-ratio curve from a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--rho-min", type=float, required=True, dest="rho_min")
    p.add_argument("--rho-max", type=float, required=True, dest="rho_max")
    p.add_argument("--rho-points", type=int, default=101, dest="rho_points")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sampling", choices=["ods", "random"], default="ods")
    _add_nuisance_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("bound", help="identified-set interval over a rate range")
    p.add_argument("--data", required=True)
    p.add_argument("--rho-min", type=float, required=True, dest="rho_min")
    p.add_argument("--rho-max", type=float, required=True, dest="rho_max")
    p.add_argument("--alpha", type=float, default=0.05)
    _add_nuisance_flags(p)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("oracle", help="exact estimands and bounds for a population")
    p.add_argument("--dgp", required=True)
    p.add_argument("--omega", type=float, default=0.5)
    p.add_argument("--rho-min", type=float, default=0.1, dest="rho_min")
    p.add_argument("--rho-max", type=float, default=0.9, dest="rho_max")
    p.add_argument("--rho-points", type=int, default=17, dest="rho_points")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("example", help="reproduce the two-stratum illustration")
    p.set_defaults(func=_cmd_example)

    for study in ("coverage", "rate", "efficiency"):
        p = sub.add_parser(study, help=f"run a Monte Carlo {study} study")
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default=None, dest="out_dir")
        p.set_defaults(func=_cmd_study, study_name=study)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

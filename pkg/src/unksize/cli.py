"""Command-line interface: ``unksize {fit,select,bootstrap,simulate}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, bootstrap_ci
from .ecm import EcmConfig, ecm_fit
from .errors import InferenceUnreliableError, OptimizationError, ValidationError
from .io import MBOVIS_SPEC, ModelSpec, fit_to_dict, load_csv, mbovis_path, save_json
from .links import get_link
from .model import Dataset, FitResult, MixingDistribution, fitted_means, group_means
from .selection import DEFAULT_K_MAX, select_K
from .simulate import STUDY_SETTINGS, SimDesign, run_study, study_design

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_OPTIMIZATION = 3
EXIT_UNRELIABLE = 4

log = logging.getLogger("unksize")


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _float_list(text: str) -> list[float]:
    return [float(s) for s in _csv_list(text)]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data and model")
    g.add_argument("--data", help="CSV file with a header row")
    g.add_argument("--example", choices=["mbovis"],
                   help="use a bundled dataset with its standard model instead of --data")
    g.add_argument("--response", help="response (count) column")
    g.add_argument("--covariates", type=_csv_list, default=(), help="comma-separated numeric columns")
    g.add_argument("--factors", type=_csv_list, default=(), help="comma-separated categorical columns")
    g.add_argument("--link", default="logit", choices=["logit", "probit"])
    g.add_argument("--no-intercept", action="store_true", help="do not add an intercept column")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=EcmConfig.n_starts, help="ECM starting points")
    p.add_argument("--json", type=Path, help="write machine-readable results here")
    p.add_argument("--fitted", type=Path, help="write fitted values CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unksize",
        description="Logistic regression with unknown binomial sizes (Poisson mixture ML).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit with a fixed number of support points")
    _add_data_args(p)
    p.add_argument("--K", type=int, required=True)
    _add_common_args(p)

    p = sub.add_parser("select", help="choose K by BIC")
    _add_data_args(p)
    p.add_argument("--kmax", type=int, default=DEFAULT_K_MAX)
    _add_common_args(p)

    p = sub.add_parser("bootstrap", help="bootstrap se and percentile CIs for beta")
    _add_data_args(p)
    k = p.add_mutually_exclusive_group()
    k.add_argument("--K", type=int, help="fixed K (default: select by BIC)")
    k.add_argument("--kmax", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--mode", choices=["parametric", "pairs"], default="parametric")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo study of the estimator")
    p.add_argument("--setting", type=int, choices=sorted(STUDY_SETTINGS), default=1,
                   help="cell of the built-in 2^3 design")
    p.add_argument("--beta", type=_float_list, help="override true coefficients (intercept,slope)")
    p.add_argument("--alphas", type=_float_list, help="override true mixing weights")
    p.add_argument("--lambdas", type=_float_list, help="override true support points")
    p.add_argument("--samples", type=int, default=800)
    p.add_argument("--K", type=int, help="K used when fitting (default: true K)")
    p.add_argument("--link", default="logit", choices=["logit", "probit"])
    p.add_argument("--jobs", type=int, default=1)
    _add_common_args(p)
    return parser


def _load(args) -> tuple[Dataset, ModelSpec]:
    if args.example == "mbovis":
        return load_csv(mbovis_path(), MBOVIS_SPEC), MBOVIS_SPEC
    if not args.data or not args.response:
        raise ValidationError("--data and --response are required (or use --example)")
    spec = ModelSpec(args.response, args.covariates, args.factors, args.link, not args.no_intercept)
    return load_csv(args.data, spec), spec


def _ecm_config(args) -> EcmConfig:
    return EcmConfig(n_starts=args.starts, seed=args.seed)


def _write_fitted(path: Path, data: Dataset, fit: FitResult) -> None:
    link = get_link(fit.link)
    yhat = fitted_means(data, fit.theta, link)
    gmean = group_means(data)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "y", "fitted", "group_mean"])
        for i in range(data.r):
            w.writerow([i + 1, int(data.y[i]), repr(float(yhat[i])), repr(float(gmean[i]))])


def _print_fit(fit: FitResult, data: Dataset) -> None:
    status = "converged" if fit.converged else "NOT converged"
    print(f"K = {fit.K}   loglik = {fit.loglik:.4f}   BIC = {fit.bic:.1f}   "
          f"({fit.iterations} iterations, {status})")
    print(f"{'j':>3} {'alpha':>8} {'lambda':>10}")
    for j, (a, lam) in enumerate(zip(fit.mixing.alphas, fit.mixing.lambdas), 1):
        print(f"{j:>3} {a:8.3f} {lam:10.4g}")
    print(f"{'coefficient':<28} {'estimate':>9}")
    for name, b in zip(data.column_names, fit.beta):
        print(f"{name:<28} {b:9.3f}")
    for msg in fit.warnings:
        print(f"warning: {msg}")


def cmd_fit(args) -> int:
    data, spec = _load(args)
    link = get_link(spec.link)
    fit = ecm_fit(data, args.K, link, _ecm_config(args))
    _print_fit(fit, data)
    out = fit_to_dict(fit, spec, args.seed, data.column_names)
    return _finish(args, out, data, fit)


def cmd_select(args) -> int:
    data, spec = _load(args)
    link = get_link(spec.link)
    sel = select_K(data, link, _ecm_config(args), args.kmax)
    print(f"{'K':>3} {'j':>3} {'alpha':>8} {'lambda':>10} {'BIC':>9}")
    for K, fit, b in sel.per_K:
        if fit is None:
            print(f"{K:>3}   (all starts failed)")
            continue
        for j, (a, lam) in enumerate(zip(fit.mixing.alphas, fit.mixing.lambdas), 1):
            mark = "*" if K == sel.chosen_K else " "
            bic_txt = f"{b:9.1f}{mark}" if j == 1 else ""
            print(f"{K if j == 1 else '':>3} {j:>3} {a:8.3f} {lam:10.4g} {bic_txt}")
    print(f"selected K = {sel.chosen_K}")
    out = fit_to_dict(sel.chosen_fit, spec, args.seed, data.column_names)
    out["selection"] = [
        {"K": K, "bic": None if fit is None else b,
         "fit": None if fit is None else fit_to_dict(fit)["theta"],
         "loglik": None if fit is None else fit.loglik}
        for K, fit, b in sel.per_K
    ]
    return _finish(args, out, data, sel.chosen_fit)


def cmd_bootstrap(args) -> int:
    data, spec = _load(args)
    link = get_link(spec.link)
    config = _ecm_config(args)
    if args.K is not None:
        fit = ecm_fit(data, args.K, link, config)
    else:
        fit = select_K(data, link, config, args.kmax).chosen_fit
    bconf = BootstrapConfig(n_resamples=args.resamples, level=args.level, mode=args.mode,
                            seed=args.seed, n_jobs=args.jobs)
    out = fit_to_dict(fit, spec, args.seed, data.column_names)
    code = EXIT_OK
    try:
        boot = bootstrap_ci(data, fit, link, bconf, config)
    except InferenceUnreliableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        boot = exc.partial
        out["failed"] = True
        code = EXIT_UNRELIABLE
        if boot is None:
            _finish(args, out, data, fit)
            return code
    pct = int(round(100 * args.level))
    print(f"K = {fit.K}, {args.resamples} {args.mode} resamples ({boot.n_failed} failed)")
    print(f"{'coefficient':<28} {'MLE':>8} {'se':>7}   {pct}% ci")
    for name, b, se, (lo, hi) in zip(data.column_names, fit.beta, boot.se, boot.ci):
        print(f"{name:<28} {b:8.3f} {se:7.3f}   ({lo:.3f}, {hi:.3f})")
    out["bootstrap"] = {
        "se": boot.se.tolist(),
        "ci": boot.ci.tolist(),
        "n_failed": boot.n_failed,
        "n_resamples": boot.n_resamples,
        "mode": args.mode,
        "level": args.level,
    }
    rc = _finish(args, out, data, fit)
    return code or rc


def cmd_simulate(args) -> int:
    base = study_design(args.setting, n_samples=args.samples, seed=args.seed)
    beta = np.array(args.beta) if args.beta else base.beta
    mixing = base.mixing
    if args.alphas or args.lambdas:
        mixing = MixingDistribution(args.alphas or base.mixing.alphas.tolist(),
                                    args.lambdas or base.mixing.lambdas.tolist())
    design = SimDesign(base.design_points, base.replications, beta, mixing,
                       args.samples, args.seed, base.column_names)
    summary = run_study(design, get_link(args.link), _ecm_config(args), args.K, n_jobs=args.jobs)
    alphas = ",".join(f"{a:g}" for a in mixing.alphas)
    lambdas = ",".join(f"{l:g}" for l in mixing.lambdas)
    k = design.beta.size - 1
    print(f"{'setting':>7} {'beta1':>6} {'alphas':>12} {'lambdas':>10} {'bias':>7} {'sd':>6} "
          f"{'qi':>17} {'mse':>6}")
    print(f"{args.setting:>7} {design.beta[k]:6g} {'(' + alphas + ')':>12} {'(' + lambdas + ')':>10} "
          f"{summary.bias[k]:7.3f} {summary.sd[k]:6.3f} "
          f"({summary.qi[k, 0]:.3f}, {summary.qi[k, 1]:.3f}) {summary.mse[k]:6.3f}")
    if summary.n_failed:
        print(f"{summary.n_failed} of {args.samples} datasets failed to fit")
    if args.json:
        out = {"setting": args.setting, "seed": args.seed, "samples": args.samples,
               "beta": design.beta.tolist(), "alphas": mixing.alphas.tolist(),
               "lambdas": mixing.lambdas.tolist(), **summary.as_dict()}
        save_json(out, args.json)
    return EXIT_OK


def _finish(args, out: dict, data: Dataset, fit: FitResult) -> int:
    code = EXIT_OK
    if not fit.converged:
        out["failed"] = True
        code = EXIT_OPTIMIZATION
        print("error: ECM did not converge", file=sys.stderr)
    if args.json:
        save_json(out, args.json)
    if args.fitted:
        _write_fitted(args.fitted, data, fit)
    return code


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "bootstrap": cmd_bootstrap,
            "simulate": cmd_simulate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OptimizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except InferenceUnreliableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNRELIABLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands:
  run           multi-trial experiment from a JSON config; CSV/JSON output
                plus a rendered figure alongside it
  sweep         rate experiment across the config's K_grid
  calibrate     Gaussian-mechanism noise scale for a privacy budget
  verify-lemma  Monte Carlo sweep of the clipped-moment bounds
  regimes       clipping-regime report for given problem constants
  stepsize      all step-size candidates for given constants

Exit codes: 0 success, 1 validation error, 2 experiment-level failure
(diverged majority, failed bound or lemma row). All randomness flows from
one --seed; every subcommand that uses it prints the effective seed.
Config-file values can be overridden with dotted key=value pairs, e.g.
``theory.K=1000 noise.alpha=1.5``.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from dataclasses import asdict

from . import harness, plots, schedule, verifier
from .config import config_from_dict
from .errors import HclipError
from .privacy import PrivacyTarget, calibrate_sigma_omega
from .schedule import TheoryParams


def _default_workers() -> int:
    env = os.environ.get("HCLIP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as err:
            raise HclipError(f"HCLIP_WORKERS must be an integer, got {env!r}") from err
    return os.cpu_count() or 1


def _apply_override(raw: dict, spec: str) -> None:
    if "=" not in spec:
        raise HclipError(f"override {spec!r} is not of the form key=value")
    path, text = spec.split("=", 1)
    keys = path.split(".")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node = raw
    for key in keys[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[keys[-1]] = value


def _load_experiment(args):
    if args.config is None:
        raise HclipError("this subcommand needs --config pointing to a JSON file")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise HclipError(f"cannot read config {args.config}: {err}") from err
    except json.JSONDecodeError as err:
        raise HclipError(f"config {args.config} is not valid JSON: {err}") from err
    raw = copy.deepcopy(raw)
    for spec in args.override:
        _apply_override(raw, spec)
    if args.seed is not None:
        raw["seed"] = args.seed
    raw["workers"] = args.workers if args.workers else _default_workers()
    if args.output is not None:
        raw["output_path"] = args.output
    return config_from_dict(raw)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        json.dump(payload, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
    else:
        print(human)


def _figure_path(output_path: str) -> str:
    base, _ = os.path.splitext(output_path)
    return base + ".png"


def _cmd_run(args) -> int:
    config = _load_experiment(args)
    if args.dry_run:
        _emit(args, config.to_dict(),
              json.dumps(config.to_dict(), indent=2))
        return 0
    print(f"seed = {config.seed}", file=sys.stderr)
    try:
        results, theory, gamma = harness.run_trials(config)
    except HclipError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    summary = harness.check_bound(results, theory, gamma)
    out = config.output_path
    if out:
        harness.persist(results, out, config.format, config=config)
        if not args.no_plot:
            plots.plot_quantile_summary(summary, _figure_path(out))
    payload = {
        "seed": config.seed, "gamma": gamma,
        "sigma_omega": theory.sigma_omega, "statistic": summary.statistic_name,
        "quantile": summary.quantile_value, "level": summary.level,
        "bound": summary.bound, "pass": summary.passed,
        "containment_fraction": summary.containment_fraction,
        "output_path": out,
    }
    human = (f"{summary.statistic_name} {summary.level:g}-quantile = "
             f"{summary.quantile_value:.6g} vs bound {summary.bound:.6g} "
             f"({'pass' if summary.passed else 'FAIL'})")
    if summary.containment_fraction is not None:
        human += f"; containment {summary.containment_fraction:.3f}"
    _emit(args, payload, human)
    return 0 if summary.passed else 2


def _cmd_sweep(args) -> int:
    config = _load_experiment(args)
    if args.dry_run:
        _emit(args, config.to_dict(), json.dumps(config.to_dict(), indent=2))
        return 0
    print(f"seed = {config.seed}", file=sys.stderr)
    try:
        fit = harness.rate_fit(config)
    except HclipError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    out = config.output_path
    if out:
        with open(out, "w") as fh:
            fh.write("K,quantile\n")
            for K, q in zip(fit.K_values, fit.quantiles):
                fh.write(f"{K},{q!r}\n")
        if not args.no_plot:
            plots.plot_rate_fit(fit, _figure_path(out))
    payload = asdict(fit)
    payload["seed"] = config.seed
    human = (f"floored slope = {fit.slope:.4f} (raw {fit.raw_slope:.4f}, "
             f"r2 {fit.r2:.3f}, floor {fit.floor:.6g})")
    if fit.diagnostic:
        human += f"\n{fit.diagnostic}"
    _emit(args, payload, human)
    return 0


def _cmd_calibrate(args) -> int:
    target = PrivacyTarget(epsilon=args.epsilon, delta=args.delta, K=args.K,
                           regime=args.regime, q=args.q, c_dp=args.c_dp)
    sigma_omega = calibrate_sigma_omega(target, args.lam)
    _emit(args, {"sigma_omega": sigma_omega, "lambda": args.lam,
                 "epsilon": args.epsilon, "delta": args.delta, "K": args.K,
                 "regime": args.regime},
          f"sigma_omega = {sigma_omega:.6g}")
    return 0


def _cmd_verify_lemma(args) -> int:
    print(f"seed = {args.seed or 0}", file=sys.stderr)
    grid = verifier.default_grid(n_samples=args.samples, seed=args.seed or 0)
    rows = verifier.sweep_lemma(grid)
    n_fail = sum(not r["pass"] for r in rows)
    if args.output:
        verifier.write_sweep_csv(rows, args.output)
        if not args.no_plot:
            plots.plot_lemma_sweep(rows, _figure_path(args.output))
    _emit(args, {"rows": len(rows), "failures": n_fail,
                 "output_path": args.output},
          f"{len(rows)} scenarios, {n_fail} failures")
    return 0 if n_fail == 0 else 2


def _theory_from_flags(args) -> TheoryParams:
    return TheoryParams(
        L=args.L, radius=args.R, sigma=args.sigma, alpha=args.alpha,
        K=args.K, beta=args.beta, lam=args.lam,
        sigma_omega=getattr(args, "sigma_omega", 0.0),
        d=getattr(args, "d", 1), convex=not getattr(args, "nonconvex", False))


def _cmd_regimes(args) -> int:
    report = schedule.classify_regime(_theory_from_flags(args))
    human = (f"regime {report.regime_id}: {report.regime_label}\n"
             f"  zeta = {report.zeta:.6g}\n"
             f"  neighborhood ~ {report.neighborhood:.6g}\n"
             f"  rate: {report.rate_label}\n"
             f"  optimal lambda = {report.optimal_lambda:.6g}")
    if report.notes:
        human += f"\n  note: {report.notes}"
    _emit(args, asdict(report), human)
    return 0


def _cmd_stepsize(args) -> int:
    theory = _theory_from_flags(args)
    if theory.convex:
        parts = schedule.stepsize_convex_full(theory)
    else:
        parts = schedule.stepsize_nonconvex_full(theory)
    d = parts.as_dict()
    lines = [f"  {k} = {v:.6g}" for k, v in d.items()]
    _emit(args, {**d, "binding": parts.binding()},
          "\n".join([f"gamma = {parts.gamma:.6g} (binding: {parts.binding()})"]
                    + lines[1:]))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true",
                   help="print a machine-readable JSON summary")
    p.add_argument("--seed", type=int, default=None, help="top-level RNG seed")


def _add_experiment(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--config", help="JSON experiment configuration file")
    p.add_argument("--output", help="override the config's output path")
    p.add_argument("--workers", type=int, default=None,
                   help="trial worker count (default: HCLIP_WORKERS or CPUs)")
    p.add_argument("--dry-run", action="store_true",
                   help="print the resolved configuration and exit")
    p.add_argument("--no-plot", action="store_true",
                   help="skip rendering the figure next to the output file")
    p.add_argument("override", nargs="*", metavar="key=value",
                   help="dotted config overrides, e.g. theory.K=1000")


def _add_theory_flags(p: argparse.ArgumentParser, with_noise: bool) -> None:
    _add_common(p)
    p.add_argument("--L", type=float, required=True, help="smoothness constant")
    p.add_argument("--R", type=float, required=True,
                   help="R (convex) or Delta (non-convex)")
    p.add_argument("--sigma", type=float, required=True, help="noise scale")
    p.add_argument("--alpha", type=float, required=True, help="moment order in (1,2]")
    p.add_argument("--K", type=int, required=True, help="iteration count")
    p.add_argument("--beta", type=float, default=0.1, help="failure probability")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="clipping level")
    p.add_argument("--nonconvex", action="store_true")
    if with_noise:
        p.add_argument("--sigma-omega", dest="sigma_omega", type=float,
                       default=0.0, help="injected Gaussian noise scale")
        p.add_argument("--d", type=int, default=1, help="dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hclip",
        description="clipped SGD under heavy-tailed noise: experiments, "
                    "step-sizes, privacy calibration")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("run", help="multi-trial experiment from a config file")
    _add_experiment(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="rate experiment across the config K_grid")
    _add_experiment(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("calibrate", help="privacy noise scale for a budget")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--regime", choices=("expectation", "finite-sum"),
                   default="expectation")
    p.add_argument("--q", type=float, default=None, help="sampling ratio")
    p.add_argument("--c-dp", dest="c_dp", type=float, default=1.0)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("verify-lemma", help="Monte Carlo clipped-moment sweep")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1_000_000,
                   help="Monte Carlo samples per scenario")
    p.add_argument("--output", help="CSV output path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_verify_lemma)

    p = sub.add_parser("regimes", help="clipping-regime report")
    _add_theory_flags(p, with_noise=False)
    p.set_defaults(func=_cmd_regimes)

    p = sub.add_parser("stepsize", help="step-size candidates")
    _add_theory_flags(p, with_noise=True)
    p.set_defaults(func=_cmd_stepsize)

    return parser


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on bad flags; this tool reserves 2 for
        # experiment failures, so remap parse errors to 1
        return 0 if not err.code else 1
    if getattr(args, "subcommand", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except HclipError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as err:
        print(f"error: invalid configuration: {err!r}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()

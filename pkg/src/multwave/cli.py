"""Command-line front end: ``multwave {simulate,estimate,mc,rate}``.

Options can also come from ``--config FILE`` holding ``key=value`` lines
(keys are option names with or without the leading dashes); command-line
flags override the file. Exit codes: 0 success, 2 validation error,
3 I/O error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from .errors import (
    CatalogError,
    ConfigError,
    DegenerateInputError,
    DomainError,
    FilterInvalidError,
    ShapeError,
    UnsupportedOrderError,
)
from .estimator import (
    EstimatorConfig,
    CoefficientSet,
    estimate_coefficients,
    estimate_to_csv,
    linear_estimate,
    nonlinear_estimate,
    universal_threshold,
)
from .harness import RateStudyConfig, rate_study, run_monte_carlo
from .model import FUNCTION_NAMES, NOISE_MODES, U_LAWS, DesignSample, ModelConfig, generate_sample, test_function
from .selection import select_jstar, select_threshold
from .svg import boxplot_svg, loglog_svg
from .wavelet import dwt_periodic, make_daubechies_filter

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

VALIDATION_ERRORS = (ConfigError, ShapeError, CatalogError, UnsupportedOrderError, DomainError, DegenerateInputError)
NUMERICAL_ERRORS = (FilterInvalidError, FloatingPointError, np.linalg.LinAlgError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _n_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list: {text!r}") from None


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--function", default="blip", choices=FUNCTION_NAMES, help="test function r")
    g.add_argument("--n", type=int, default=4096, help="sample size (power of two)")
    g.add_argument("--sigma2", type=float, default=0.01, help="variance of the additive noise V (a5)")
    g.add_argument("--u-law", default="uniform", choices=U_LAWS, help="law of the multiplicative noise U")
    g.add_argument("--raw-u", action="store_true", help="do not rescale U to E[U^2] = 1")
    g.add_argument("--noise-mode", default="a5", choices=NOISE_MODES, help="a5: V independent of X; a6: V = g(X)")
    g.add_argument("--g", default=None, help="known g for a6: zero, const:c, linear:a,b or sine:a")
    g.add_argument("--seed", type=int, default=0, help="master seed")


def _add_estimator_flags(p: argparse.ArgumentParser, selection: bool = True) -> None:
    g = p.add_argument_group("estimator")
    if selection:
        g.add_argument("--jstar", type=int, default=None, help="truncation level; selected by 2FCV if omitted")
        g.add_argument("--threshold", type=float, default=None, help="explicit hard threshold")
        g.add_argument("--rule", default="2fcv", choices=("2fcv", "universal"), help="threshold rule when --threshold is absent")
        g.add_argument("--policy", default="first", choices=("first", "middle"), help="plateau tie policy")
    g.add_argument("--j1", type=int, default=None, help="finest detail level (default log2(n) - 1)")
    g.add_argument("--kappa", type=float, default=1.0, help="constant of the universal threshold kappa * t_n")
    g.add_argument("--backend", default="pyramid", choices=("pyramid", "direct"))
    g.add_argument("--beta-truncation", type=_bool, default=False, help="apply the rho_n truncation to beta_hat")
    g.add_argument("--vanishing-moments", type=int, default=8, help="Daubechies order N (1..10)")


def build_parser():
    parser = _Parser(prog="multwave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a sample and write it as CSV")
    p.add_argument("--config", default=None, help="key=value file with defaults")
    _add_model_flags(p)
    p.add_argument("--out", default="sample.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="select parameters and estimate r from one sample")
    p.add_argument("--config", default=None, help="key=value file with defaults")
    p.add_argument("--input", default=None, help="sample CSV; generated from the model flags if omitted")
    p.add_argument("--method", default="both", choices=("linear", "nonlinear", "both"))
    _add_model_flags(p)
    _add_estimator_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc", help="Monte Carlo replications with boxplot summaries")
    p.add_argument("--config", default=None, help="key=value file with defaults")
    _add_model_flags(p)
    _add_estimator_flags(p, selection=False)
    p.add_argument("--N", type=int, default=100, help="number of replications")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("rate", help="MISE against n and the fitted log-log slope")
    p.add_argument("--config", default=None, help="key=value file with defaults")
    _add_model_flags(p)
    _add_estimator_flags(p, selection=False)
    p.add_argument("--n-list", type=_n_list, default=[1024, 2048, 4096, 8192, 16384])
    p.add_argument("--N", type=int, default=50, help="replications per n")
    p.add_argument("--exponent", type=float, default=-0.5, help="theoretical exponent -2s'/(2s'+1)")
    p.add_argument("--rule", default="theorem", choices=("theorem", "2fcv"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_rate)
    return parser, sub


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def _config_path(argv: List[str]) -> Optional[str]:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def load_config_file(path: str, sub: argparse.ArgumentParser) -> dict:
    """Parse ``key=value`` lines into typed defaults for ``sub``."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            dest = key.lstrip("-").replace("-", "_")
            if dest not in actions:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            action = actions[dest]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    out[dest] = _bool(value)
                elif action.type is not None:
                    out[dest] = action.type(value)
                else:
                    out[dest] = value
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
            if action.choices is not None and out[dest] not in action.choices:
                raise ConfigError(f"{path}:{lineno}: {key} must be one of {list(action.choices)}")
    return out


def _echo(args) -> str:
    skip = {"func", "config", "verbose", "out", "out_dir"}
    items = []
    for k in sorted(vars(args)):
        if k in skip:
            continue
        v = getattr(args, k)
        if isinstance(v, list):
            v = ",".join(str(i) for i in v)
        items.append(f"{k}={v}")
    return "multwave " + " ".join(items)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _model_config(args, n: Optional[int] = None) -> ModelConfig:
    return ModelConfig(
        r=test_function(args.function),
        n=args.n if n is None else n,
        sigma2=args.sigma2,
        u_law=args.u_law,
        u_standardize=not args.raw_u,
        noise_mode=args.noise_mode,
        g_spec=args.g,
        seed=args.seed,
    )


def _estimator_config(args, model: Optional[ModelConfig], j_star: int = 0) -> EstimatorConfig:
    kw = dict(
        j_star=j_star,
        j1=args.j1,
        kappa=args.kappa,
        backend=args.backend,
        beta_truncation=args.beta_truncation,
        wavelet_order=args.vanishing_moments,
    )
    make_daubechies_filter(args.vanishing_moments)
    if model is not None:
        return EstimatorConfig.for_model(model, **kw)
    return EstimatorConfig(noise_mode=args.noise_mode, sigma2=args.sigma2, g_spec=args.g, **kw)


def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def cmd_simulate(args) -> int:
    model = _model_config(args)
    sample = generate_sample(model)
    sample.to_csv(args.out, extra_header=_echo(args))
    print(f"wrote {sample.n} rows to {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.input is not None:
        sample = DesignSample.from_csv(args.input)
        model = sample.config
    else:
        model = _model_config(args)
        sample = generate_sample(model)
    cfg = _estimator_config(args, model)
    _ensure_dir(args.out_dir)
    header = _echo(args)
    true_r = model.r if model is not None else None

    if args.jstar is None:
        sel = select_jstar(sample, cfg, policy=args.policy)
        sel.to_csv(os.path.join(args.out_dir, "jstar_scores.csv"), header)
        j_star = sel.chosen_jstar
    else:
        j_star = args.jstar
    cfg = cfg.with_jstar(j_star)
    coeffs = estimate_coefficients(sample, cfg)
    columns = {}
    lines = [f"jstar={j_star}"]
    kept = None
    if args.method in ("linear", "both"):
        lin = linear_estimate(coeffs)
        columns["r_hat_linear"] = lin.values
    if args.method in ("nonlinear", "both"):
        if args.threshold is not None:
            lam = args.threshold
        elif args.rule == "universal":
            lam = universal_threshold(sample.n, args.kappa)
        else:
            tsel = select_threshold(sample, j_star, cfg, policy=args.policy)
            tsel.to_csv(os.path.join(args.out_dir, "threshold_scores.csv"), header)
            lam = tsel.chosen_threshold
        non = nonlinear_estimate(coeffs, lam)
        kept = non.kept
        columns["r_hat_nonlinear"] = non.values
        lines.append(f"threshold={lam!r}")
        lines.append(f"kept_details={non.kept_count}")
    grid = np.arange(sample.n) / sample.n
    if true_r is not None:
        columns["r_true"] = true_r(grid)
        _true_coefficients(true_r, sample.n, coeffs).to_csv(
            os.path.join(args.out_dir, "true_coefficients.csv"),
            {j: np.ones(2 ** j, dtype=bool) for j in coeffs.beta_hat},
            header,
        )
    estimate_to_csv(os.path.join(args.out_dir, "estimate.csv"), grid, columns, header)
    coeffs.to_csv(os.path.join(args.out_dir, "coefficients.csv"), kept, header)
    if true_r is not None:
        from .harness import mse

        for name, est in (("linear", "r_hat_linear"), ("nonlinear", "r_hat_nonlinear")):
            if est in columns:
                from .estimator import Estimate

                e = Estimate(grid, columns[est], coeffs)
                lines.append(f"mse_{name}={mse(e, true_r, sample.x)!r}")
    print(" ".join(lines))
    return EXIT_OK


def _true_coefficients(true_r, n: int, like: CoefficientSet) -> CoefficientSet:
    """Pyramid coefficients of r sampled on the grid, same levels as ``like``."""
    wavelet = make_daubechies_filter(like.wavelet_order)
    pyr = dwt_periodic(true_r(np.arange(n) / n) / np.sqrt(n), like.j_star, wavelet)
    beta = {j: pyr.details[j] for j in like.beta_hat}
    zeros = {j: np.zeros(2 ** j) for j in like.beta_hat}
    return CoefficientSet(n, like.j_star, like.j1, pyr.approx, beta, np.zeros(2 ** like.j_star), zeros, like.wavelet_order)


def cmd_mc(args) -> int:
    model = _model_config(args)
    cfg = _estimator_config(args, model)
    _ensure_dir(args.out_dir)
    result = run_monte_carlo(model, cfg, args.N, workers=args.workers)
    header = _echo(args)
    result.to_csv(os.path.join(args.out_dir, "records.csv"), header)
    result.write_summary(os.path.join(args.out_dir, "summary.json"))
    boxes = {m: result.summary[f"mse_{m}"] for m in ("lin_oracle", "lin_2fcv", "non_oracle", "non_2fcv")}
    title = f"{model.r.name}, n={model.n}, sigma2={model.sigma2}"
    with open(os.path.join(args.out_dir, "boxplot.svg"), "w") as fh:
        fh.write(boxplot_svg(boxes, title))
    for m, b in boxes.items():
        print(f"median_mse_{m}={b['median']!r}")
    return EXIT_OK


def cmd_rate(args) -> int:
    model = _model_config(args, n=min(args.n_list) if args.n_list else args.n)
    cfg = _estimator_config(args, model)
    rcfg = RateStudyConfig(model.r, tuple(args.n_list), args.N, args.exponent)
    _ensure_dir(args.out_dir)
    res = rate_study(rcfg, model, cfg, rule=args.rule, workers=args.workers)
    res.to_csv(os.path.join(args.out_dir, "rate.csv"), _echo(args))
    with open(os.path.join(args.out_dir, "rate.svg"), "w") as fh:
        fh.write(loglog_svg(res.n_list, res.mise, res.slope, res.intercept, f"{model.r.name}: MISE vs n"))
    print(f"slope={res.slope!r}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub = build_parser()
    try:
        path = _config_path(argv)
        if path is not None:
            cmd = next((a for a in argv if a in sub.choices), None)
            if cmd is None:
                parser.error("--config needs a command")
            sub.choices[cmd].set_defaults(**load_config_file(path, sub.choices[cmd]))
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        with np.errstate(invalid="raise", divide="raise"):
            return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"multwave: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"multwave: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NUMERICAL_ERRORS as exc:
        print(f"multwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

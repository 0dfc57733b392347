"""Monte Carlo replications, boxplot summaries and the convergence-rate study."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError, ShapeError
from .estimator import (
    EstimatorConfig,
    Estimate,
    evaluate_estimate,
    linear_estimate,
    nonlinear_estimate,
    pyramid_coefficients,
)
from .model import ModelConfig, TestFunction, generate_sample, mix_seed
from .selection import oracle_select, select_jstar, select_threshold
from .wavelet import dyadic_level

log = logging.getLogger(__name__)

METHODS = ("lin_2fcv", "lin_oracle", "non_2fcv", "non_oracle")


def mse(estimate: Estimate, true_r, design_points) -> float:
    """Mean of (r(X_i) - r_hat(X_i))**2 over the design points."""
    x = np.asarray(design_points, dtype=float)
    r_x = np.asarray(true_r(x), dtype=float) if callable(true_r) else np.asarray(true_r, dtype=float)
    if r_x.shape != x.shape:
        raise ShapeError("true values and design points differ in length")
    return float(np.mean((r_x - evaluate_estimate(estimate, x)) ** 2))


def integrated_squared_error(estimate: Estimate, true_r) -> float:
    """Trapezoid rule for int_0^1 (r_hat - r)**2 on the reconstruction grid.

    The estimate is periodic, so its value at x=1 is the one at x=0.
    """
    n = len(estimate.grid)
    xs = np.arange(n + 1) / n
    err = np.append(estimate.values, estimate.values[0]) - true_r(xs)
    return float(integrate.trapezoid(err ** 2, xs))


@dataclass
class ReplicationRecord:
    replication_index: int
    seed: int
    mse_lin_2fcv: float
    mse_lin_oracle: float
    mse_non_2fcv: float
    mse_non_oracle: float
    jstar_2fcv: int
    jstar_oracle: int
    threshold_2fcv: float
    threshold_oracle: float
    kept_detail_count: int
    ise_lin_2fcv: float
    ise_lin_oracle: float
    ise_non_2fcv: float
    ise_non_oracle: float

    @property
    def killed_all_details(self) -> bool:
        return self.kept_detail_count == 0


RECORD_FIELDS = [f.name for f in fields(ReplicationRecord)]


def replication_seed(master_seed: int, rep_index: int) -> int:
    return mix_seed(master_seed, rep_index)


def run_replication(model_config: ModelConfig, estimator_config: EstimatorConfig, rep_index: int) -> ReplicationRecord:
    """One generate / select / estimate cycle; ``model_config.seed`` is the master seed."""
    seed = replication_seed(model_config.seed, rep_index)
    sample = generate_sample(model_config.with_seed(seed))
    r = model_config.r
    cfg = estimator_config

    cv_j = select_jstar(sample, cfg)
    or_j = oracle_select(sample, r, cfg, "jstar")
    jhat = cv_j.chosen_jstar
    lin_cv = linear_estimate(pyramid_coefficients(sample, cfg.with_jstar(jhat)))
    lin_or = linear_estimate(pyramid_coefficients(sample, cfg.with_jstar(or_j.chosen_jstar)))

    cv_t = select_threshold(sample, jhat, cfg)
    or_t = oracle_select(sample, r, cfg, "threshold", j_star=jhat)
    full = pyramid_coefficients(sample, replace(cfg, j_star=jhat, j1=None))
    non_cv = nonlinear_estimate(full, cv_t.chosen_threshold)
    non_or = nonlinear_estimate(full, or_t.chosen_threshold)

    x = sample.x
    return ReplicationRecord(
        replication_index=rep_index,
        seed=seed,
        mse_lin_2fcv=mse(lin_cv, r, x),
        mse_lin_oracle=mse(lin_or, r, x),
        mse_non_2fcv=mse(non_cv, r, x),
        mse_non_oracle=mse(non_or, r, x),
        jstar_2fcv=jhat,
        jstar_oracle=or_j.chosen_jstar,
        threshold_2fcv=cv_t.chosen_threshold,
        threshold_oracle=or_t.chosen_threshold,
        kept_detail_count=non_cv.kept_count,
        ise_lin_2fcv=integrated_squared_error(lin_cv, r),
        ise_lin_oracle=integrated_squared_error(lin_or, r),
        ise_non_2fcv=integrated_squared_error(non_cv, r),
        ise_non_oracle=integrated_squared_error(non_or, r),
    )


def _run_one(args):
    return run_replication(*args)


def _map(func, jobs, workers: int):
    if workers <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def five_number(values) -> Dict[str, float]:
    v = np.asarray(values, dtype=float)
    # thresholds may be +inf; interpolating between inf values gives nan
    method = "linear" if np.all(np.isfinite(v)) else "nearest"
    q1, med, q3 = np.percentile(v, [25, 50, 75], method=method)
    return {"min": float(v.min()), "q1": float(q1), "median": float(med), "q3": float(q3), "max": float(v.max())}


def summarize(records: Sequence[ReplicationRecord]) -> Dict[str, Dict[str, float]]:
    """Five-number summary for every numeric record column except the bookkeeping ones."""
    out = {}
    for name in RECORD_FIELDS:
        if name in ("replication_index", "seed"):
            continue
        out[name] = five_number([getattr(r, name) for r in records])
    return out


@dataclass
class MonteCarloResult:
    model_config: ModelConfig
    records: List[ReplicationRecord]
    summary: Dict[str, Dict[str, float]]

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {header or self.model_config.header()}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_FIELDS)
            for rec in self.records:
                w.writerow([_cell(getattr(rec, f)) for f in RECORD_FIELDS])

    def summary_json(self) -> dict:
        cfg = self.model_config
        entries = []
        for metric in ("mse", "ise"):
            for method in METHODS:
                entries.append(
                    {
                        "function": cfg.r.name,
                        "n": cfg.n,
                        "sigma2": cfg.sigma2,
                        "method": method,
                        "metric": metric,
                        **self.summary[f"{metric}_{method}"],
                    }
                )
        return {
            "config": cfg.header(),
            "replications": len(self.records),
            "summaries": entries,
            "columns": self.summary,
        }

    def write_summary(self, path) -> None:
        """Strict JSON: non-finite values (an all-killing threshold) become strings."""
        with open(path, "w") as fh:
            json.dump(_finite_json(self.summary_json()), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")


def _finite_json(obj):
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_json(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_records(path) -> List[ReplicationRecord]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            kw = {}
            for f in fields(ReplicationRecord):
                kw[f.name] = int(row[f.name]) if f.type in (int, "int") else float(row[f.name])
            rows.append(ReplicationRecord(**kw))
    return rows


def run_monte_carlo(model_config: ModelConfig, estimator_config: EstimatorConfig, N: int, workers: int = 1) -> MonteCarloResult:
    if N < 1:
        raise ConfigError("N must be >= 1")
    jobs = [(model_config, estimator_config, i) for i in range(N)]
    records = _map(_run_one, jobs, workers)
    records.sort(key=lambda r: r.replication_index)
    return MonteCarloResult(model_config, records, summarize(records))


# ---------------------------------------------------------------------------
# Rate study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateStudyConfig:
    r: TestFunction
    n_list: tuple
    replications: int = 50
    theoretical_exponent: Optional[float] = None

    def __post_init__(self):
        ns = list(self.n_list)
        if len(ns) < 3:
            raise ConfigError("rate study needs at least 3 sample sizes")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_list must be strictly increasing")
        for n in ns:
            dyadic_level(n)
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")

    @property
    def smoothness(self) -> float:
        """s' recovered from the exponent -2s'/(2s'+1)."""
        e = self.theoretical_exponent
        if e is None or not -1.0 < e < 0.0:
            raise ConfigError("theorem tuning needs a theoretical exponent in (-1, 0)")
        return -e / (2.0 * (1.0 + e))


def theorem_jstar(n: int, smoothness: float) -> int:
    """Level with 2**j_star closest (in log scale) to n**(1/(2s'+1))."""
    J = dyadic_level(n)
    j = int(np.floor(J / (2.0 * smoothness + 1.0) + 0.5))
    return min(max(j, 0), J - 1)


@dataclass
class RateStudyResult:
    n_list: List[int]
    mise: List[float]
    mise_se: List[float]
    jstar: List[float]
    slope: float
    slope_se: float
    intercept: float

    def monotone_violations(self, n_se: float = 2.0) -> List[int]:
        """Indices i where MISE[i+1] exceeds MISE[i] by more than n_se standard errors."""
        bad = []
        for i in range(len(self.mise) - 1):
            se = np.hypot(self.mise_se[i], self.mise_se[i + 1])
            if self.mise[i + 1] - self.mise[i] > n_se * se:
                bad.append(i)
        return bad

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write(f"# slope={self.slope!r} slope_se={self.slope_se!r} intercept={self.intercept!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "mise", "mise_se", "mean_jstar", "slope"])
            for n, m, se, j in zip(self.n_list, self.mise, self.mise_se, self.jstar):
                w.writerow([n, repr(float(m)), repr(float(se)), repr(float(j)), repr(float(self.slope))])


def _rate_one(args):
    model_config, estimator_config, rule, smoothness, n, rep = args
    seed = mix_seed(mix_seed(model_config.seed, n), rep)
    sample = generate_sample(replace(model_config, n=n, seed=seed))
    if rule == "theorem":
        j = theorem_jstar(n, smoothness)
    else:
        j = select_jstar(sample, estimator_config).chosen_jstar
    est = linear_estimate(pyramid_coefficients(sample, replace(estimator_config, j_star=j, j1=None)))
    return integrated_squared_error(est, model_config.r), j


def rate_study(
    rate_config: RateStudyConfig,
    model_config: ModelConfig,
    estimator_config: EstimatorConfig,
    rule: str = "theorem",
    workers: int = 1,
) -> RateStudyResult:
    """Monte Carlo MISE of the linear estimator for each n and the log-log slope.

    ``rule='theorem'`` sets 2**j_star ~ n**(1/(2s'+1)) from the configured
    exponent; ``rule='2fcv'`` selects j_star by cross-validation.
    """
    if rule not in ("theorem", "2fcv"):
        raise ConfigError("rule must be 'theorem' or '2fcv'")
    smooth = rate_config.smoothness if rule == "theorem" else None
    mise, se, js = [], [], []
    for n in rate_config.n_list:
        jobs = [
            (model_config, estimator_config, rule, smooth, n, rep)
            for rep in range(rate_config.replications)
        ]
        out = _map(_rate_one, jobs, workers)
        ise = np.array([o[0] for o in out])
        mise.append(float(ise.mean()))
        se.append(float(ise.std(ddof=1) / np.sqrt(len(ise))) if len(ise) > 1 else 0.0)
        js.append(float(np.mean([o[1] for o in out])))
    fit = stats.linregress(np.log(rate_config.n_list), np.log(mise))
    return RateStudyResult(
        list(rate_config.n_list), mise, se, js, float(fit.slope), float(fit.stderr), float(fit.intercept)
    )

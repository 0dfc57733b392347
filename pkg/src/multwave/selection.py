"""Two-fold cross-validation of the truncation level and the global threshold.

Both halves of the X-ordered sample are fitted with the pyramid backend and
used to predict the other half; a held-out point is predicted by averaging
the fitted values at its two ordered neighbours (one neighbour at the edges).
Predictions are compared with ``Y**2`` minus the additive-noise centering
(``sigma2`` under a5, ``g(x)**2`` under a6).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .estimator import (
    CoefficientSet,
    EstimatorConfig,
    estimate_coefficients,
    evaluate_estimate,
    linear_estimate,
    nonlinear_estimate,
    pyramid_coefficients,
)
from .model import DesignSample
from .wavelet import discrete_basis_vector, dyadic_level, make_daubechies_filter

PLATEAU_RTOL = 1e-12
POLICIES = ("first", "middle")


@dataclass
class SelectionResult:
    parameter: str
    chosen_jstar: int
    chosen_threshold: Optional[float]
    score_curve: List[Tuple[float, float]]
    plateau_start: int
    plateau_length: int
    policy: str = "first"
    raw_score_curve: Optional[List[Tuple[float, float]]] = None

    @property
    def chosen(self) -> float:
        return self.chosen_jstar if self.parameter == "jstar" else self.chosen_threshold

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.score_curve])

    @property
    def candidates(self) -> np.ndarray:
        return np.array([p for p, _ in self.score_curve], dtype=float)

    def to_csv(self, path, header: str = "") -> None:
        scores = self.scores
        is_min = _minimal(scores)
        raw = self.raw_score_curve or [(p, float("nan")) for p, _ in self.score_curve]
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "cv_score", "is_min", "raw_score"])
            for (p, s), m, (_, r) in zip(self.score_curve, is_min, raw):
                w.writerow([_fmt(p), repr(float(s)), int(m), repr(float(r))])


def _fmt(p) -> str:
    if isinstance(p, (int, np.integer)):
        return str(int(p))
    return repr(float(p))


def _minimal(scores: np.ndarray) -> np.ndarray:
    best = scores.min()
    return np.abs(scores - best) <= PLATEAU_RTOL * abs(best)


def _pick(scores: np.ndarray, policy: str) -> Tuple[int, int, int]:
    """Index chosen under ``policy`` plus the start and length of the plateau.

    The plateau is the run of minimal scores beginning at the first minimum.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    if len(scores) == 0:
        raise DegenerateInputError("empty candidate grid")
    is_min = _minimal(scores)
    start = int(np.argmax(is_min))
    length = 1
    while start + length < len(scores) and is_min[start + length]:
        length += 1
    idx = start if policy == "first" else start + (length - 1) // 2
    return idx, start, length


# ---------------------------------------------------------------------------
# Splitting and prediction
# ---------------------------------------------------------------------------


def twofold_split(sample: DesignSample) -> Tuple[DesignSample, DesignSample]:
    """Odd (1st, 3rd, ...) and even (2nd, 4th, ...) points of the ordered sample."""
    n = sample.n
    dyadic_level(n)
    if n < 4:
        raise ShapeError("two-fold split needs at least 4 points")
    odd = DesignSample(sample.x[0::2], sample.y[0::2])
    even = DesignSample(sample.x[1::2], sample.y[1::2])
    return odd, even


def _neighbours(m: int, fit_on_odd: bool):
    i = np.arange(m)
    if fit_on_odd:
        # held-out even point i sits between odd points i and i + 1
        return i, np.minimum(i + 1, m - 1)
    return np.maximum(i - 1, 0), i


def _centering(x: np.ndarray, config: EstimatorConfig) -> np.ndarray:
    if config.noise_mode == "a5":
        return np.full(len(x), config.sigma2)
    return config.g(x) ** 2


def _folds(sample: DesignSample, config: EstimatorConfig):
    """Per direction: (fit half, held-out targets, centering, left, right)."""
    odd, even = twofold_split(sample)
    out = []
    for fit, held, on_odd in ((odd, even, True), (even, odd, False)):
        left, right = _neighbours(fit.n, on_odd)
        out.append((fit, held.y ** 2, _centering(held.x, config), left, right))
    return out


def _half_config(config: EstimatorConfig, j_star: int) -> EstimatorConfig:
    return replace(config, j_star=j_star, j1=None, backend="pyramid")


def max_cv_level(n: int) -> int:
    """Finest truncation level a half sample can be fitted at."""
    return dyadic_level(n) - 2


def cv_score_linear(sample: DesignSample, j_star: int, config: EstimatorConfig, centered: bool = True) -> float:
    if j_star > max_cv_level(sample.n):
        raise ShapeError(f"j_star {j_star} too fine for half samples of size {sample.n // 2}")
    total = 0.0
    for fit, y2, centre, left, right in _folds(sample, config):
        f = linear_estimate(pyramid_coefficients(fit, _half_config(config, j_star))).values
        pred = 0.5 * (f[left] + f[right])
        target = y2 - centre if centered else y2
        total += float(np.sum((target - pred) ** 2))
    return total


def select_jstar(sample: DesignSample, config: EstimatorConfig, policy: str = "first") -> SelectionResult:
    levels = range(0, max_cv_level(sample.n) + 1)
    scores = np.array([cv_score_linear(sample, j, config) for j in levels])
    raw = [cv_score_linear(sample, j, config, centered=False) for j in levels]
    idx, start, length = _pick(scores, policy)
    return SelectionResult(
        "jstar",
        int(levels[idx]),
        None,
        [(j, float(s)) for j, s in zip(levels, scores)],
        start,
        length,
        policy,
        [(j, float(s)) for j, s in zip(levels, raw)],
    )


# ---------------------------------------------------------------------------
# Threshold curves
# ---------------------------------------------------------------------------


def threshold_rescale(n: int) -> float:
    """Factor turning a half-sample threshold into a full-sample one."""
    return float(np.sqrt(1.0 - np.log(2.0) / np.log(n)))


def threshold_candidates(coeffs: CoefficientSet) -> np.ndarray:
    """0, the distinct |beta_hat| values, and +inf, ascending."""
    mags = np.unique(coeffs.detail_magnitudes())
    return np.unique(np.concatenate([[0.0], mags, [np.inf]]))


def prefix_scores(coeffs: CoefficientSet, target, idx0, idx1, w0, w1, centre=None):
    """Squared prediction error as detail coefficients are added by decreasing size.

    Predictions are ``w0 * f[idx0] + w1 * f[idx1]`` of the reconstruction f.
    Returns the sorted magnitudes and ``scores[p]`` (first p coefficients kept);
    with ``centre`` also the scores against ``target + centre``.
    """
    m = coeffs.n
    wavelet = make_daubechies_filter(coeffs.wavelet_order)
    f0 = linear_estimate(coeffs).values
    resid = np.asarray(target, dtype=float) - (w0 * f0[idx0] + w1 * f0[idx1])
    levels, shifts, values = [], [], []
    for j in sorted(coeffs.beta_hat):
        b = coeffs.beta_hat[j]
        levels.append(np.full(len(b), j))
        shifts.append(np.arange(len(b)))
        values.append(b)
    if levels:
        levels = np.concatenate(levels)
        shifts = np.concatenate(shifts)
        values = np.concatenate(values)
    else:
        levels = shifts = values = np.zeros(0)
    order = np.argsort(-np.abs(values), kind="stable")
    scale = np.sqrt(m)
    scores = np.empty(len(order) + 1)
    scores[0] = resid @ resid
    track = centre is not None
    if track:
        centre = np.asarray(centre, dtype=float)
        cross = np.empty(len(order) + 1)
        cross[0] = resid @ centre
    for p, q in enumerate(order):
        j = int(levels[q])
        base = discrete_basis_vector(wavelet, m, j, "psi")
        vec = np.roll(base, int(shifts[q]) * (m >> j)) * scale
        col = w0 * vec[idx0] + w1 * vec[idx1]
        resid -= values[q] * col
        scores[p + 1] = resid @ resid
        if track:
            cross[p + 1] = resid @ centre
    mags = np.abs(values[order])
    if not track:
        return mags, scores
    # ||resid + centre||^2 = ||resid||^2 + 2 resid.centre + ||centre||^2
    raw = scores + 2.0 * cross + centre @ centre
    return mags, scores, raw


def _kept_count(sorted_mags: np.ndarray, threshold: float) -> int:
    # number of magnitudes >= threshold in a descending array
    return int(np.searchsorted(-sorted_mags, -threshold, side="right"))


def half_sample_candidates(sample: DesignSample, j_star: int, config: EstimatorConfig) -> np.ndarray:
    """0, the distinct |beta_hat| values of both half-sample fits, and +inf."""
    mags = [pyramid_coefficients(fit, _half_config(config, j_star)).detail_magnitudes()
            for fit, *_ in _folds(sample, config)]
    return np.unique(np.concatenate([[0.0], *mags, [np.inf]]))


def cv_threshold_curve(sample: DesignSample, j_star: int, config: EstimatorConfig, half_thresholds):
    """Centered and raw 2FCV scores for each half-sample threshold."""
    if j_star > max_cv_level(sample.n):
        raise ShapeError(f"j_star {j_star} too fine for half samples of size {sample.n // 2}")
    half_thresholds = np.asarray(half_thresholds, dtype=float)
    scores = np.zeros(len(half_thresholds))
    raw = np.zeros(len(half_thresholds))
    for fit, y2, centre, left, right in _folds(sample, config):
        coeffs = pyramid_coefficients(fit, _half_config(config, j_star))
        mags, sc, rw = prefix_scores(coeffs, y2 - centre, left, right, 0.5, 0.5, centre)
        counts = [_kept_count(mags, lam) for lam in half_thresholds]
        scores += sc[counts]
        raw += rw[counts]
    return scores, raw


def cv_score_threshold(sample: DesignSample, j_star: int, half_threshold: float, config: EstimatorConfig) -> float:
    """Reference 2FCV score of a single half-sample threshold via explicit reconstructions."""
    total = 0.0
    for fit, y2, centre, left, right in _folds(sample, config):
        coeffs = pyramid_coefficients(fit, _half_config(config, j_star))
        f = nonlinear_estimate(coeffs, half_threshold).values
        pred = 0.5 * (f[left] + f[right])
        total += float(np.sum((y2 - centre - pred) ** 2))
    return total


def select_threshold(sample: DesignSample, j_star: int, config: EstimatorConfig, policy: str = "first") -> SelectionResult:
    """Pick a half-sample threshold by 2FCV and rescale it to the full sample.

    Score curves are reported against the rescaled full-sample thresholds.
    """
    half = half_sample_candidates(sample, j_star, config)
    scores, raw = cv_threshold_curve(sample, j_star, config, half)
    idx, start, length = _pick(scores, policy)
    full = half * threshold_rescale(sample.n)
    return SelectionResult(
        "threshold",
        j_star,
        float(full[idx]),
        [(float(c), float(s)) for c, s in zip(full, scores)],
        start,
        length,
        policy,
        [(float(c), float(s)) for c, s in zip(full, raw)],
    )


# ---------------------------------------------------------------------------
# Oracle selection
# ---------------------------------------------------------------------------


def _interp_operator(x: np.ndarray, m: int):
    pos = np.asarray(x, dtype=float) * m
    idx0 = np.floor(pos).astype(np.int64) % m
    w1 = pos - np.floor(pos)
    return idx0, (idx0 + 1) % m, 1.0 - w1, w1


def oracle_select(sample: DesignSample, true_r, config: EstimatorConfig, target: str = "jstar", j_star: Optional[int] = None) -> SelectionResult:
    """Minimise the design-point MSE against the true r.

    ``target='jstar'`` scans every level 0..log2(n)-1; ``target='threshold'``
    scans the full-sample candidates together with the rescaled grid of
    :func:`select_threshold` at ``j_star``.
    """
    r_x = true_r(sample.x)
    n = sample.n
    if target == "jstar":
        levels = list(range(0, dyadic_level(n)))
        mses = []
        for j in levels:
            est = linear_estimate(pyramid_coefficients(sample, _half_config(config, j)))
            mses.append(float(np.mean((evaluate_estimate(est, sample.x) - r_x) ** 2)))
        mses = np.array(mses)
        idx, start, length = _pick(mses, "first")
        return SelectionResult("jstar", levels[idx], None, list(zip(levels, mses.tolist())), start, length)
    if target != "threshold":
        raise ValueError("target must be 'jstar' or 'threshold'")
    if j_star is None:
        raise ValueError("threshold oracle needs j_star")
    coeffs = pyramid_coefficients(sample, _half_config(config, j_star))
    rescaled = half_sample_candidates(sample, j_star, config) * threshold_rescale(n)
    candidates = np.unique(np.concatenate([threshold_candidates(coeffs), rescaled]))
    mags, sc = prefix_scores(coeffs, r_x, *_interp_operator(sample.x, n))
    mses = sc[[_kept_count(mags, lam) for lam in candidates]] / n
    idx, start, length = _pick(mses, "first")
    return SelectionResult(
        "threshold",
        j_star,
        float(candidates[idx]),
        [(float(c), float(s)) for c, s in zip(candidates, mses)],
        start,
        length,
    )

"""Bias-corrected wavelet coefficient estimators and the two estimators of r.

Two backends produce the same :class:`CoefficientSet`:

* ``direct`` evaluates the periodized basis at the design points,
  ``alpha_hat = mean(Y**2 * Phi_jk(X)) - v_jk`` and the (optionally truncated)
  analogue for ``beta_hat``;
* ``pyramid`` treats the X-sorted responses as an equispaced signal
  ``Y_(i)**2 / sqrt(n)`` and runs the periodized Mallat pyramid on it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .model import DesignSample, ModelConfig, noise_function
from .wavelet import (
    CoefficientPyramid,
    ScalingTable,
    basis_entries,
    basis_quadrature,
    basis_sums,
    cascade_scaling_table,
    dwt_periodic,
    dyadic_level,
    eval_basis_periodized,
    idwt_periodic,
    make_daubechies_filter,
)


def rho_n(n: int) -> float:
    """Per-term truncation level sqrt(n / ln n)."""
    return float(np.sqrt(n / np.log(n)))


def t_n(n: int) -> float:
    """Universal threshold sqrt(ln n / n), the reciprocal of :func:`rho_n`."""
    return float(np.sqrt(np.log(n) / n))


def universal_threshold(n: int, kappa: float = 1.0) -> float:
    return kappa * t_n(n)


@dataclass(frozen=True)
class EstimatorConfig:
    j_star: int = 4
    j1: Optional[int] = None  # None: finest level log2(n) - 1
    kappa: float = 1.0
    noise_mode: str = "a5"
    sigma2: float = 0.0
    g_spec: Optional[str] = None
    backend: str = "pyramid"
    beta_truncation: bool = False
    wavelet_order: int = 8
    depth: int = 12

    def __post_init__(self):
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        if self.noise_mode not in ("a5", "a6"):
            raise ConfigError("noise_mode must be 'a5' or 'a6'")
        if self.noise_mode == "a6" and self.g_spec is None:
            raise ConfigError("a6 noise requires g")
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be non-negative")
        if self.backend not in ("direct", "pyramid"):
            raise ConfigError("backend must be 'direct' or 'pyramid'")

    @classmethod
    def for_model(cls, model: ModelConfig, **kwargs) -> "EstimatorConfig":
        """Copy the noise description of ``model`` into an estimator config."""
        kwargs.setdefault("noise_mode", model.noise_mode)
        kwargs.setdefault("sigma2", model.sigma2)
        kwargs.setdefault("g_spec", model.g_spec)
        return cls(**kwargs)

    def levels(self, n: int):
        """Validated (j_star, j1) for a sample of size n."""
        J = dyadic_level(n)
        j1 = J - 1 if self.j1 is None else self.j1
        if not 0 <= self.j_star <= j1 <= J - 1:
            raise ConfigError(f"need 0 <= j_star ({self.j_star}) <= j1 ({j1}) <= {J - 1}")
        return self.j_star, j1

    def with_jstar(self, j_star: int) -> "EstimatorConfig":
        return replace(self, j_star=j_star)

    @property
    def table(self) -> ScalingTable:
        return cascade_scaling_table(make_daubechies_filter(self.wavelet_order), self.depth)

    @property
    def g(self):
        return noise_function(self.g_spec) if self.g_spec is not None else None


# ---------------------------------------------------------------------------
# Additive-noise corrections
# ---------------------------------------------------------------------------


def corrections_v(j: int, config: EstimatorConfig, table: Optional[ScalingTable] = None) -> np.ndarray:
    """v_{j,k} for every k: E[V^2] 2^{-j/2}, or int g^2 Phi_{j,k}."""
    if config.noise_mode == "a5":
        return np.full(2 ** j, config.sigma2 * 2.0 ** (-j / 2.0))
    g = config.g
    return basis_quadrature(table or config.table, "phi", j, lambda x: g(x) ** 2)


def corrections_w(j: int, config: EstimatorConfig, table: Optional[ScalingTable] = None) -> np.ndarray:
    """w_{j,k} for every k: zero, or int g^2 Psi_{j,k}."""
    if config.noise_mode == "a5":
        return np.zeros(2 ** j)
    g = config.g
    return basis_quadrature(table or config.table, "psi", j, lambda x: g(x) ** 2)


def correction_v(j: int, k: int, config: EstimatorConfig, table: Optional[ScalingTable] = None) -> float:
    if not 0 <= k < 2 ** j:
        raise IndexError(k)
    if config.noise_mode == "a5":
        return config.sigma2 * 2.0 ** (-j / 2.0)
    return float(corrections_v(j, config, table)[k])


def correction_w(j: int, k: int, config: EstimatorConfig, table: Optional[ScalingTable] = None) -> float:
    if not 0 <= k < 2 ** j:
        raise IndexError(k)
    if config.noise_mode == "a5":
        return 0.0
    return float(corrections_w(j, config, table)[k])


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------


@dataclass
class CoefficientSet:
    n: int
    j_star: int
    j1: int
    alpha_hat: np.ndarray
    beta_hat: Dict[int, np.ndarray]
    v: np.ndarray
    w: Dict[int, np.ndarray]
    wavelet_order: int = 8

    @property
    def n_levels(self) -> int:
        return dyadic_level(self.n)

    def detail_magnitudes(self) -> np.ndarray:
        if not self.beta_hat:
            return np.zeros(0)
        return np.concatenate([np.abs(self.beta_hat[j]) for j in sorted(self.beta_hat)])

    def kept_mask(self, threshold: float) -> Dict[int, np.ndarray]:
        return {j: np.abs(b) >= threshold for j, b in self.beta_hat.items()}

    def to_pyramid(self, kept: Optional[Dict[int, np.ndarray]] = None) -> CoefficientPyramid:
        """Pyramid down to j_star; levels beyond j1 (and dropped terms) are zero."""
        J = self.n_levels
        details = {}
        for j in range(self.j_star, J):
            d = np.zeros(2 ** j)
            if j in self.beta_hat and kept is not None:
                d = np.where(kept[j], self.beta_hat[j], 0.0)
            details[j] = d
        return CoefficientPyramid(self.j_star, np.array(self.alpha_hat, dtype=float), details)

    def to_csv(self, path, kept: Optional[Dict[int, np.ndarray]] = None, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "index", "value", "kind", "kept"])
            for k, a in enumerate(self.alpha_hat):
                w.writerow([self.j_star, k, repr(float(a)), "alpha", 1])
            for j in sorted(self.beta_hat):
                mask = kept[j] if kept is not None else np.zeros(2 ** j, dtype=bool)
                for k, b in enumerate(self.beta_hat[j]):
                    w.writerow([j, k, repr(float(b)), "beta", int(mask[k])])


def alpha_hat_direct(sample: DesignSample, j: int, k: int, config: EstimatorConfig) -> float:
    """``mean(Y_i**2 Phi_{j,k}(X_i)) - v_{j,k}``."""
    table = config.table
    phi = eval_basis_periodized(table, "phi", j, k, sample.x)
    return float(np.mean(sample.y ** 2 * phi) - correction_v(j, k, config, table))


def beta_hat_direct(sample: DesignSample, j: int, k: int, config: EstimatorConfig) -> float:
    """Mean of ``K_i = Y_i**2 Psi_{j,k}(X_i) - w_{j,k}``, dropping ``|K_i| > rho_n``."""
    table = config.table
    psi = eval_basis_periodized(table, "psi", j, k, sample.x)
    K = sample.y ** 2 * psi - correction_w(j, k, config, table)
    if config.beta_truncation:
        K = np.where(np.abs(K) <= rho_n(sample.n), K, 0.0)
    return float(np.mean(K))


def _truncated_level(sample: DesignSample, j: int, w: np.ndarray, table: ScalingTable) -> np.ndarray:
    n = sample.n
    rho = rho_n(n)
    rows, cols, vals = basis_entries(table, "psi", j, sample.x)
    K = sample.y[rows] ** 2 * vals - w[cols]
    K = np.where(np.abs(K) <= rho, K, 0.0)
    total = np.bincount(cols, weights=K, minlength=2 ** j)
    # design points outside the support of Psi_{j,k} contribute K = -w_k
    hits = np.bincount(cols, minlength=2 ** j)
    outside = np.where(np.abs(w) <= rho, -w, 0.0) * (n - hits)
    return (total + outside) / n


def direct_coefficients(sample: DesignSample, config: EstimatorConfig) -> CoefficientSet:
    n = sample.n
    j_star, j1 = config.levels(n)
    table = config.table
    y2 = sample.y ** 2
    v = corrections_v(j_star, config, table)
    alpha = basis_sums(table, "phi", j_star, sample.x, y2) / n - v
    beta, w_all = {}, {}
    for j in range(j_star, j1 + 1):
        w = corrections_w(j, config, table)
        if config.beta_truncation:
            beta[j] = _truncated_level(sample, j, w, table)
        else:
            beta[j] = basis_sums(table, "psi", j, sample.x, y2) / n - w
        w_all[j] = w
    return CoefficientSet(n, j_star, j1, alpha, beta, v, w_all, config.wavelet_order)


def pyramid_coefficients(sample: DesignSample, config: EstimatorConfig) -> CoefficientSet:
    """Mallat pyramid on ``Y_(i)**2 / sqrt(n)`` followed by the v/w corrections.

    With ``beta_truncation`` the detail coefficients come from a second pyramid
    whose inputs with ``Y**2 > rho_n`` are zeroed; exact per-coefficient
    truncation is only available from the direct backend.
    """
    n = sample.n
    j_star, j1 = config.levels(n)
    wavelet = make_daubechies_filter(config.wavelet_order)
    s = sample.y ** 2 / np.sqrt(n)
    pyr = dwt_periodic(s, j_star, wavelet)
    if config.beta_truncation:
        clipped = np.where(np.abs(s) <= rho_n(n) / np.sqrt(n), s, 0.0)
        det_source = dwt_periodic(clipped, j_star, wavelet).details
    else:
        det_source = pyr.details
    table = config.table if config.noise_mode == "a6" else None
    v = corrections_v(j_star, config, table)
    alpha = pyr.approx - v
    beta, w_all = {}, {}
    for j in range(j_star, j1 + 1):
        w = corrections_w(j, config, table)
        beta[j] = det_source[j] - w
        w_all[j] = w
    return CoefficientSet(n, j_star, j1, alpha, beta, v, w_all, config.wavelet_order)


def estimate_coefficients(sample: DesignSample, config: EstimatorConfig) -> CoefficientSet:
    if config.backend == "direct":
        return direct_coefficients(sample, config)
    return pyramid_coefficients(sample, config)


# ---------------------------------------------------------------------------
# Function estimates
# ---------------------------------------------------------------------------


@dataclass
class Estimate:
    grid: np.ndarray
    values: np.ndarray
    coefficient_set: CoefficientSet
    kept: Optional[Dict[int, np.ndarray]] = None
    threshold: float = float("inf")

    @property
    def kept_count(self) -> int:
        if self.kept is None:
            return 0
        return int(sum(int(m.sum()) for m in self.kept.values()))


def _reconstruct(coeffs: CoefficientSet, kept) -> np.ndarray:
    wavelet = make_daubechies_filter(coeffs.wavelet_order)
    return idwt_periodic(coeffs.to_pyramid(kept), wavelet) * np.sqrt(coeffs.n)


def _grid(n: int) -> np.ndarray:
    return np.arange(n) / n


def linear_estimate(coeffs: CoefficientSet) -> Estimate:
    """Projection sum_k alpha_hat_k Phi_{j*,k} sampled on the grid i/n."""
    values = _reconstruct(coeffs, None)
    return Estimate(_grid(coeffs.n), values, coeffs)


def nonlinear_estimate(coeffs: CoefficientSet, threshold: Optional[float] = None, kappa: float = 1.0) -> Estimate:
    """Hard-thresholded reconstruction keeping ``|beta_hat| >= threshold``.

    ``threshold=None`` applies the universal rule ``kappa * t_n``.
    """
    if threshold is None:
        threshold = universal_threshold(coeffs.n, kappa)
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    kept = coeffs.kept_mask(threshold)
    values = _reconstruct(coeffs, kept)
    return Estimate(_grid(coeffs.n), values, coeffs, kept, float(threshold))


def evaluate_estimate(est: Estimate, points) -> np.ndarray:
    """Periodic piecewise-linear interpolation of the grid values."""
    p = np.asarray(points, dtype=float)
    if np.any((p < 0.0) | (p >= 1.0)):
        raise DomainError("evaluation points must lie in [0, 1)")
    return np.interp(p, est.grid, est.values, period=1.0)


def estimate_to_csv(path, grid, columns: Dict[str, np.ndarray], header: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        names = list(columns)
        w.writerow(["x"] + names)
        for i, x in enumerate(grid):
            w.writerow([repr(float(x))] + [repr(float(columns[c][i])) for c in names])

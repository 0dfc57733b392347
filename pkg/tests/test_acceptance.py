"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""
import filecmp
import time

import numpy as np
import pytest

from multwave.cli import main
from multwave.estimator import EstimatorConfig, alpha_hat_direct
from multwave.harness import RateStudyConfig, rate_study, run_monte_carlo
from multwave.model import ModelConfig, generate_sample, mix_seed, test_function as get_function
from multwave.wavelet import cascade_scaling_table, dwt_periodic, eval_basis_periodized, idwt_periodic, make_daubechies_filter

MASTER_SEED = 7
ALPHA_PAIRS = [(2, 1), (3, 4), (4, 9)]
MC_CONFIGS = [(f, 4096, 0.01) for f in ("blip", "parabolas", "ramp")] + [(f, 2048, 0.025) for f in ("blip", "parabolas", "ramp")]

_MC_CACHE = {}


def monte_carlo(name, n, sigma2, N=100):
    key = (name, n, sigma2, N)
    if key not in _MC_CACHE:
        m = ModelConfig(get_function(name), n, sigma2=sigma2, seed=MASTER_SEED)
        t0 = time.perf_counter()
        res = run_monte_carlo(m, EstimatorConfig.for_model(m), N)
        _MC_CACHE[key] = (res, time.perf_counter() - t0)
    return _MC_CACHE[key]


def iqr(summary, col):
    return summary[col]["q3"] - summary[col]["q1"]


def alpha_draws(n, N):
    """alpha_hat_direct over N replications for each ALPHA_PAIRS entry."""
    m = ModelConfig(get_function("blip"), n, sigma2=0.01, seed=MASTER_SEED)
    cfg = EstimatorConfig.for_model(m, backend="direct")
    out = np.zeros((N, len(ALPHA_PAIRS)))
    for rep in range(N):
        s = generate_sample(m.with_seed(mix_seed(mix_seed(MASTER_SEED, n), rep)))
        out[rep] = [alpha_hat_direct(s, j, k, cfg) for j, k in ALPHA_PAIRS]
    return out


@pytest.mark.slow
class TestAcceptance:
    def test_criterion_1_transform(self, criterion):
        t0 = time.perf_counter()
        worst_rec = worst_energy = worst_matrix = 0.0
        for N in (1, 2, 4, 8):
            w = make_daubechies_filter(N)
            for n in (64, 1024):
                x = np.random.default_rng(N * n).standard_normal(n)
                pyr = dwt_periodic(x, 0, w)
                worst_rec = max(worst_rec, np.max(np.abs(idwt_periodic(pyr, w) - x)))
                worst_energy = max(worst_energy, abs(pyr.energy() - x @ x) / (x @ x))
            # explicit orthogonal matrix: columns are transforms of unit vectors
            n = 64
            W = np.zeros((n, n))
            for i in range(n):
                W[:, i] = np.concatenate([dwt_periodic(np.eye(n)[i], 2, w).approx] +
                                         [dwt_periodic(np.eye(n)[i], 2, w).details[j] for j in range(2, 6)])
            A = _explicit_matrix(w, n, 2)
            x = np.random.default_rng(N).standard_normal(n)
            pyr = dwt_periodic(x, 2, w)
            flat = np.concatenate([pyr.approx] + [pyr.details[j] for j in range(2, 6)])
            worst_matrix = max(worst_matrix, np.max(np.abs(A @ x - flat)), np.max(np.abs(A - W)),
                               np.max(np.abs(A @ A.T - np.eye(n))))
        elapsed = time.perf_counter() - t0
        ok = worst_rec < 1e-10 and worst_energy < 1e-10 and worst_matrix < 1e-10 and elapsed < 5
        criterion(1, ok, f"recon={worst_rec:.1e} energy={worst_energy:.1e} matrix={worst_matrix:.1e} t={elapsed:.1f}s")
        assert ok

    def test_criterion_2_unbiased(self, criterion):
        t0 = time.perf_counter()
        draws = alpha_draws(1024, 2000)
        elapsed = time.perf_counter() - t0
        table = cascade_scaling_table(make_daubechies_filter(8), 12)
        grid = np.arange(2 ** 16) / 2 ** 16
        r = get_function("blip")(grid)
        z = []
        for col, (j, k) in enumerate(ALPHA_PAIRS):
            truth = np.mean(r * eval_basis_periodized(table, "phi", j, k, grid))
            se = draws[:, col].std(ddof=1) / np.sqrt(len(draws))
            z.append(abs(draws[:, col].mean() - truth) / se)
        ok = max(z) < 3 and elapsed < 120
        criterion(2, ok, "|mean-alpha|/SE=" + ",".join(f"{v:.2f}" for v in z) + f" t={elapsed:.0f}s")
        assert ok

    def test_criterion_3_variance(self, criterion):
        t0 = time.perf_counter()
        v1 = alpha_draws(1024, 2000).var(axis=0, ddof=1)
        v2 = alpha_draws(2048, 2000).var(axis=0, ddof=1)
        elapsed = time.perf_counter() - t0
        ratios = v2 / v1
        ok = bool(np.all((ratios >= 0.35) & (ratios <= 0.70))) and elapsed < 240
        criterion(3, ok, "ratios=" + ",".join(f"{v:.3f}" for v in ratios) + f" t={elapsed:.0f}s")
        assert ok

    def test_criterion_4_jstar_distribution(self, criterion):
        res, elapsed = monte_carlo("blip", 4096, 0.01)
        within = sum(abs(r.jstar_2fcv - r.jstar_oracle) <= 1 for r in res.records)
        med = res.summary["mse_lin_2fcv"]["median"]
        ok = within >= 80 and 0.001 <= med <= 0.01 and elapsed < 600
        criterion(4, ok, f"within+-1={within}/100 median_mse_lin_2fcv={med:.5f} t={elapsed:.0f}s")
        assert ok

    def test_criterion_5_threshold_plateau(self, criterion):
        res, _ = monte_carlo("blip", 4096, 0.01)
        killed = sum(r.killed_all_details for r in res.records)
        ok = killed > 50
        criterion(5, ok, f"all details killed in {killed}/100")
        assert ok

    def test_criterion_6_ordering(self, criterion):
        parts, ok = [], True
        for name, n, s2 in MC_CONFIGS:
            res, _ = monte_carlo(name, n, s2)
            S = res.summary
            ratio = S["mse_lin_2fcv"]["median"] / S["mse_lin_oracle"]["median"]
            i_cv, i_or = iqr(S, "mse_non_2fcv"), iqr(S, "mse_non_oracle")
            good = abs(ratio - 1) <= 0.2 and i_cv >= i_or
            ok &= good
            parts.append(f"{name}/{n}: lin={ratio:.3f} iqr={i_cv:.2e}{'>=' if i_cv >= i_or else '<'}{i_or:.2e}")
        criterion(6, ok, "; ".join(parts))
        assert ok

    def test_criterion_7_rate(self, criterion):
        m = ModelConfig(get_function("parabolas"), 1024, sigma2=0.01, seed=MASTER_SEED)
        cfg = RateStudyConfig(m.r, tuple(2 ** k for k in range(10, 15)), 50, theoretical_exponent=-0.5)
        t0 = time.perf_counter()
        res = rate_study(cfg, m, EstimatorConfig.for_model(m), rule="theorem")
        elapsed = time.perf_counter() - t0
        bad = res.monotone_violations(2.0)
        ok = res.slope <= -0.45 and not bad and elapsed < 900
        criterion(7, ok, f"slope={res.slope:.3f}+-{res.slope_se:.3f} violations={bad} t={elapsed:.0f}s")
        assert ok

    def test_criterion_8_determinism(self, criterion, tmp_path, monkeypatch):
        commands = [
            ["simulate", "--function", "blip", "--n", "4096", "--sigma2", "0.01", "--seed", "1", "--out", "sample.csv"],
            ["estimate", "--function", "blip", "--n", "4096", "--seed", "1", "--out-dir", "."],
            ["estimate", "--input", "sample.csv", "--noise-mode", "a5", "--out-dir", "from_file"],
            ["estimate", "--function", "ramp", "--n", "1024", "--noise-mode", "a6", "--g", "const:0.1",
             "--backend", "direct", "--beta-truncation", "true", "--out-dir", "a6"],
            ["mc", "--function", "parabolas", "--n", "1024", "--N", "5", "--seed", "3", "--out-dir", "mc"],
            ["rate", "--n-list", "256,512,1024", "--N", "3", "--seed", "3", "--out-dir", "rate"],
        ]
        dirs = [tmp_path / "first", tmp_path / "second"]
        codes = []
        for d in dirs:
            d.mkdir()
            monkeypatch.chdir(d)
            for cmd in commands:
                codes.append(main(cmd))
        files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file())
        other = sorted(p.relative_to(dirs[1]) for p in dirs[1].rglob("*") if p.is_file())
        same = files == other and all(filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False) for f in files)
        ok = same and all(c == 0 for c in codes) and len(files) >= 15
        criterion(8, ok, f"{len(files)} files compared, identical={same}, exit codes={sorted(set(codes))}")
        assert ok


def _explicit_matrix(wavelet, n, j0):
    """Periodized pyramid as a product of explicit analysis matrices."""
    def step(filt, m):
        A = np.zeros((m // 2, m))
        for r in range(m // 2):
            for k, c in enumerate(filt):
                A[r, (2 * r + k) % m] += c
        return A

    J = int(np.log2(n))
    P, rows = np.eye(n), {}
    for j in range(J - 1, j0 - 1, -1):
        m = 2 ** (j + 1)
        rows[j] = step(wavelet.highpass, m) @ P
        P = step(wavelet.lowpass, m) @ P
    return np.vstack([P] + [rows[j] for j in range(j0, J)])

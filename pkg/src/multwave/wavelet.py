"""Daubechies filters, the periodized Mallat pyramid and cascade tables.

Convolution convention, shared by the transform and the matrix oracle in the
tests: output sample ``m`` of one analysis step is
``sum_k filt[k] * signal[(2m + k) % n]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Union

import numpy as np

from ._filters import LOWPASS
from .errors import DomainError, FilterInvalidError, ShapeError, UnsupportedOrderError

ArrayLike = Union[float, np.ndarray]

DEFAULT_DEPTH = 12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WaveletFilter:
    vanishing_moments: int
    lowpass: np.ndarray
    highpass: np.ndarray

    @property
    def length(self) -> int:
        return len(self.lowpass)


def check_filter(filt: WaveletFilter) -> None:
    """Raise FilterInvalidError unless the orthonormal-QMF invariants hold."""
    h, g = filt.lowpass, filt.highpass
    N = filt.vanishing_moments
    L = len(h)
    if L != 2 * N or len(g) != L:
        raise FilterInvalidError(f"filter length {L} does not match order {N}")
    if abs(h.sum() - np.sqrt(2.0)) > 1e-12:
        raise FilterInvalidError("lowpass does not sum to sqrt(2)")
    for m in range(0, N):
        s = float(np.dot(h[: L - 2 * m], h[2 * m:]))
        target = 1.0 if m == 0 else 0.0
        if abs(s - target) > 1e-12:
            raise FilterInvalidError(f"shift orthonormality fails at m={m}")
    k = np.arange(L)
    if not np.allclose(g, (-1.0) ** k * h[::-1], rtol=0, atol=0):
        raise FilterInvalidError("highpass is not the quadrature mirror of lowpass")
    # centred abscissae: equivalent once lower moments vanish, and k**p for
    # k up to 19 would otherwise swamp the check in rounding error
    kc = k - (L - 1) / 2.0
    for p in range(N):
        if abs(np.dot(g, kc ** p)) > 1e-8:
            raise FilterInvalidError(f"vanishing moment {p} fails")


@lru_cache(maxsize=None)
def make_daubechies_filter(vanishing_moments: int) -> WaveletFilter:
    """Extremal-phase Daubechies filter with ``vanishing_moments`` moments (1..10).

    ``vanishing_moments=1`` is Haar. The embedded constants are re-validated
    against :func:`check_filter` on first use.
    """
    if vanishing_moments not in LOWPASS:
        raise UnsupportedOrderError(
            f"Daubechies order must be in 1..10, got {vanishing_moments}"
        )
    h = np.array(LOWPASS[vanishing_moments], dtype=float)
    k = np.arange(len(h))
    g = (-1.0) ** k * h[::-1]
    filt = WaveletFilter(vanishing_moments, _readonly(h), _readonly(g))
    check_filter(filt)
    return filt


# ---------------------------------------------------------------------------
# Periodized pyramid
# ---------------------------------------------------------------------------


@dataclass
class CoefficientPyramid:
    """Approximation at ``coarse_level`` plus details for every finer level."""

    coarse_level: int
    approx: np.ndarray
    details: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        """J such that the signal length is 2**J."""
        return self.coarse_level + len(self.details)

    @property
    def size(self) -> int:
        return len(self.approx) + sum(len(d) for d in self.details.values())

    def energy(self) -> float:
        return float(
            np.sum(self.approx ** 2) + sum(np.sum(d ** 2) for d in self.details.values())
        )

    def validate(self) -> None:
        j0 = self.coarse_level
        if j0 < 0:
            raise ShapeError("coarse level must be non-negative")
        if len(self.approx) != 2 ** j0:
            raise ShapeError(f"approx has {len(self.approx)} entries, expected {2 ** j0}")
        expected = list(range(j0, j0 + len(self.details)))
        if sorted(self.details) != expected:
            raise ShapeError(f"detail levels {sorted(self.details)} are not {expected}")
        for j, d in self.details.items():
            if len(d) != 2 ** j:
                raise ShapeError(f"level {j} has {len(d)} entries, expected {2 ** j}")

    def copy(self) -> "CoefficientPyramid":
        return CoefficientPyramid(
            self.coarse_level,
            self.approx.copy(),
            {j: d.copy() for j, d in self.details.items()},
        )


def dyadic_level(n: int) -> int:
    """Return J with n == 2**J, or raise ShapeError."""
    n = int(n)
    if n < 1 or n & (n - 1):
        raise ShapeError(f"length {n} is not a power of two")
    return n.bit_length() - 1


@lru_cache(maxsize=64)
def _step_index(n: int, L: int) -> np.ndarray:
    half = max(n // 2, 1)
    idx = (2 * np.arange(half)[:, None] + np.arange(L)[None, :]) % n
    idx.setflags(write=False)
    return idx


def _analysis_step(s: np.ndarray, h: np.ndarray, g: np.ndarray):
    idx = _step_index(len(s), len(h))
    block = s[idx]
    return block @ h, block @ g


def _synthesis_step(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = 2 * len(a)
    idx = _step_index(n, len(h))
    contrib = a[:, None] * h[None, :] + d[:, None] * g[None, :]
    return np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=n)


def dwt_periodic(signal, coarse_level: int, wavelet: WaveletFilter) -> CoefficientPyramid:
    """Forward periodized Mallat pyramid down to ``coarse_level``."""
    s = np.asarray(signal, dtype=float)
    if s.ndim != 1:
        raise ShapeError("signal must be one-dimensional")
    J = dyadic_level(len(s))
    if not 0 <= coarse_level <= J:
        raise ShapeError(f"coarse level {coarse_level} outside [0, {J}]")
    h, g = wavelet.lowpass, wavelet.highpass
    details = {}
    a = s
    for j in range(J - 1, coarse_level - 1, -1):
        a, d = _analysis_step(a, h, g)
        details[j] = d
    return CoefficientPyramid(coarse_level, a, dict(sorted(details.items())))


def idwt_periodic(pyramid: CoefficientPyramid, wavelet: WaveletFilter) -> np.ndarray:
    """Inverse of :func:`dwt_periodic`."""
    pyramid.validate()
    h, g = wavelet.lowpass, wavelet.highpass
    a = np.asarray(pyramid.approx, dtype=float)
    for j in range(pyramid.coarse_level, pyramid.n_levels):
        a = _synthesis_step(a, np.asarray(pyramid.details[j], dtype=float), h, g)
    return a


@lru_cache(maxsize=256)
def discrete_basis_vector(wavelet: WaveletFilter, n: int, j: int, kind: str) -> np.ndarray:
    """Synthesis of a unit coefficient at (j, k=0); shifting k rolls it by k*n/2**j."""
    J = dyadic_level(n)
    if not 0 <= j < J + (kind == "phi"):
        raise ShapeError(f"level {j} invalid for length {n}")
    pyr = CoefficientPyramid(j, np.zeros(2 ** j), {l: np.zeros(2 ** l) for l in range(j, J)})
    if kind == "phi":
        pyr.approx[0] = 1.0
    else:
        pyr.details[j][0] = 1.0
    v = idwt_periodic(pyr, wavelet)
    v.setflags(write=False)
    return v


# ---------------------------------------------------------------------------
# Cascade tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalingTable:
    """phi and psi sampled at k / 2**depth on their support [0, 2N - 1]."""

    filter: WaveletFilter
    depth: int
    values_phi: np.ndarray
    values_psi: np.ndarray

    @property
    def support(self) -> int:
        return self.filter.length - 1

    @property
    def grid_x(self) -> np.ndarray:
        return np.arange(len(self.values_phi)) / 2.0 ** self.depth

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["grid_x", "phi", "psi"])
            for x, p, q in zip(self.grid_x, self.values_phi, self.values_psi):
                w.writerow([repr(float(x)), repr(float(p)), repr(float(q))])


def _integer_values(h: np.ndarray) -> np.ndarray:
    L = len(h) - 1
    if L == 1:
        # Haar: right-continuous indicator of [0, 1)
        return np.array([1.0, 0.0])
    # phi vanishes at 0 and L; solve for the interior integers
    idx = np.arange(1, L)
    M = np.zeros((L - 1, L - 1))
    for a_i, a in enumerate(idx):
        for b_i, b in enumerate(idx):
            k = 2 * a - b
            if 0 <= k <= L:
                M[a_i, b_i] = np.sqrt(2.0) * h[k]
    w, V = np.linalg.eig(M)
    i = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i] - 1.0) > 1e-8:
        raise FilterInvalidError("refinement matrix has no eigenvalue 1")
    v = np.real(V[:, i])
    v = v / v.sum()
    return np.concatenate([[0.0], v, [0.0]])


@lru_cache(maxsize=32)
def cascade_scaling_table(wavelet: WaveletFilter, depth: int = DEFAULT_DEPTH) -> ScalingTable:
    """Evaluate phi and psi on the dyadic grid of resolution 2**-depth.

    Integer values come from the eigenvalue-1 eigenvector of the refinement
    matrix; each halving of the grid applies
    ``phi(x) = sqrt(2) * sum_k h[k] phi(2x - k)``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    h, g = wavelet.lowpass, wavelet.highpass
    L = len(h) - 1
    r2 = np.sqrt(2.0)
    vals = _integer_values(h)
    for d in range(1, depth + 1):
        m = np.arange(L * 2 ** d + 1)
        step = 2 ** (d - 1)
        new = np.zeros(len(m))
        for k, hk in enumerate(h):
            src = m - k * step
            ok = (src >= 0) & (src < len(vals))
            new[ok] += r2 * hk * vals[src[ok]]
        vals = new
    phi = vals
    m = np.arange(len(phi))
    psi = np.zeros(len(phi))
    for k, gk in enumerate(g):
        src = 2 * m - k * 2 ** depth
        ok = (src >= 0) & (src < len(phi))
        psi[ok] += r2 * gk * phi[src[ok]]
    return ScalingTable(wavelet, depth, _readonly(phi), _readonly(psi))


def _lookup(table: ScalingTable, kind: str, t: np.ndarray) -> np.ndarray:
    if kind not in ("phi", "psi"):
        raise ValueError(f"kind must be 'phi' or 'psi', got {kind!r}")
    vals = table.values_phi if kind == "phi" else table.values_psi
    idx = np.rint(t * 2.0 ** table.depth).astype(np.int64)
    inside = (idx >= 0) & (idx < len(vals))
    out = np.zeros(np.shape(t))
    out[inside] = vals[idx[inside]]
    return out


def eval_basis_periodized(table: ScalingTable, kind: str, j: int, k: int, x: ArrayLike) -> ArrayLike:
    """Periodized ``2**(j/2) * sum_m f(2**j (x + m) - k)`` for f = phi or psi.

    Uses nearest-grid-point lookup in ``table``. Accepts scalar or array ``x``
    in [0, 1).
    """
    if not 0 <= k < 2 ** j:
        raise IndexError(f"shift {k} outside 0..{2 ** j - 1}")
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0.0) | (xa >= 1.0)):
        raise DomainError("evaluation points must lie in [0, 1)")
    period = 2.0 ** j
    t = np.mod(period * xa - k, period)
    out = np.zeros(xa.shape)
    q = 0
    while q * period < table.support:
        out += _lookup(table, kind, t + q * period)
        q += 1
    out *= 2.0 ** (j / 2.0)
    return float(out) if np.ndim(x) == 0 else out


def basis_sums(table: ScalingTable, kind: str, j: int, x, weights) -> np.ndarray:
    """``sum_i weights[i] * F_{j,k}(x[i])`` for every shift k at once."""
    x = np.asarray(x, dtype=float)
    wts = np.asarray(weights, dtype=float)
    rows, cols, vals = basis_entries(table, kind, j, x)
    return np.bincount(cols, weights=wts[rows] * vals, minlength=2 ** j)


def basis_entries(table: ScalingTable, kind: str, j: int, x):
    """Non-zero entries (i, k, F_{j,k}(x[i])) of the periodized basis.

    Each (i, k) pair appears once; wraparound contributions at coarse levels
    are merged.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    period = 2 ** j
    u = period * x
    base = np.floor(u)
    frac = u - base
    L = table.support
    offsets = np.arange(L)
    t = frac[:, None] + offsets[None, :]
    cols = (base.astype(np.int64)[:, None] - offsets[None, :]) % period
    vals = _lookup(table, kind, t) * 2.0 ** (j / 2.0)
    rows = np.broadcast_to(np.arange(n)[:, None], t.shape)
    rows, cols, vals = rows.ravel(), cols.ravel(), vals.ravel()
    if period < L:
        key = rows * period + cols
        uniq, inv = np.unique(key, return_inverse=True)
        vals = np.bincount(inv, weights=vals, minlength=len(uniq))
        rows, cols = uniq // period, uniq % period
    return rows, cols, vals


def basis_quadrature(table: ScalingTable, kind: str, j: int, weight_fn, grid_level: int = 14) -> np.ndarray:
    """Trapezoid rule for ``int_0^1 weight_fn(x) F_{j,k}(x) dx``, all k.

    The grid has ``2**grid_level`` intervals; the basis is periodic, so the
    endpoint x=1 reuses the basis value at 0.
    """
    M = 2 ** grid_level
    xs = np.arange(M + 1) / M
    w = np.full(M + 1, 1.0 / M)
    w[0] = w[-1] = 0.5 / M
    fw = np.asarray(weight_fn(xs), dtype=float) * w
    # fold x=1 onto x=0 for the basis lookup
    folded = fw[:-1].copy()
    folded[0] += fw[-1]
    return basis_sums(table, kind, j, xs[:-1], folded)

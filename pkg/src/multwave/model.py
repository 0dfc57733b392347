"""Synthetic data from Y = f(X) U + V with r = f**2 drawn from a small catalog."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import CatalogError, ConfigError, ShapeError
from .wavelet import dyadic_level

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Derive a child seed: ``splitmix64(splitmix64(seed) ^ index)``.

    All arithmetic is modulo 2**64, so the value is independent of platform
    and of the order in which children are requested.
    """
    return splitmix64(splitmix64(int(seed) & MASK64) ^ (int(index) & MASK64))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


def _blip(x):
    x = np.asarray(x, dtype=float)
    left = 0.32 + 0.6 * x + 0.3 * np.exp(-100.0 * (x - 0.3) ** 2)
    right = -0.28 + 0.6 * x + 0.3 * np.exp(-100.0 * (x - 1.3) ** 2)
    return np.where(x <= 0.8, left, right)


def _ramp(x):
    x = np.asarray(x, dtype=float)
    return x - (x >= 0.37).astype(float)


def _parabolas(x):
    x = np.asarray(x, dtype=float)
    p1 = 4.0 * x ** 2 * (3.0 - 4.0 * x)
    p2 = (4.0 / 3.0) * x * (4.0 * x ** 2 - 10.0 * x + 7.0) - 1.5
    p3 = (16.0 / 3.0) * x * (1.0 - x) ** 2
    return np.where(x <= 0.5, p1, np.where(x <= 0.75, p2, p3))


_CATALOG = {
    "blip": (_blip, 0.0),
    "ramp": (_ramp, 0.70),
    "parabolas": (_parabolas, 0.05),
}

FUNCTION_NAMES = tuple(_CATALOG)


@dataclass(frozen=True)
class TestFunction:
    """The target r on [0, 1], already shifted so that min r >= 0.05."""

    __test__ = False  # not a pytest class

    name: str
    base: Callable = field(repr=False)
    positivity_shift: float = 0.0

    def __call__(self, x):
        return self.base(x) + self.positivity_shift

    def f(self, x):
        """The regression function f = sqrt(r)."""
        return np.sqrt(self(x))


def test_function(name: str) -> TestFunction:
    try:
        base, shift = _CATALOG[name.lower()]
    except KeyError:
        raise CatalogError(f"unknown test function {name!r}; choose from {FUNCTION_NAMES}") from None
    return TestFunction(name.lower(), base, shift)


test_function.__test__ = False


def noise_function(spec: str) -> Callable:
    """Parse a known additive term g for the deterministic-noise mode.

    Accepted forms: ``zero``, ``const:c``, ``linear:a,b`` (a + b x),
    ``sine:a`` (a sin 2 pi x).
    """
    kind, _, args = spec.partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise CatalogError(f"bad noise function arguments in {spec!r}") from None
    if kind == "zero" and not vals:
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if kind == "const" and len(vals) == 1:
        c = vals[0]
        return lambda x: np.full(np.shape(x), c)
    if kind == "linear" and len(vals) == 2:
        a, b = vals
        return lambda x: a + b * np.asarray(x, dtype=float)
    if kind == "sine" and len(vals) == 1:
        a = vals[0]
        return lambda x: a * np.sin(2 * np.pi * np.asarray(x, dtype=float))
    raise CatalogError(f"unknown noise function {spec!r}")


# ---------------------------------------------------------------------------
# Configuration and sampling
# ---------------------------------------------------------------------------

U_LAWS = ("uniform", "gaussian", "constant")
NOISE_MODES = ("a5", "a6")


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to draw one sample.

    ``u_law='constant'`` means U == 1 (pure additive regression), handy for
    noiseless checks. ``g_spec`` is the textual form of g used in CSV headers.
    """

    r: TestFunction
    n: int
    sigma2: float = 0.01
    u_law: str = "uniform"
    u_standardize: bool = True
    noise_mode: str = "a5"
    g_spec: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        J = dyadic_level(self.n)
        if not 2 <= J <= 20:
            raise ConfigError(f"n must be 2**J with 2 <= J <= 20, got {self.n}")
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be non-negative")
        if self.u_law not in U_LAWS:
            raise ConfigError(f"u_law must be one of {U_LAWS}")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError(f"noise_mode must be one of {NOISE_MODES}")
        if self.noise_mode == "a6":
            if self.g_spec is None:
                raise ConfigError("a6 noise requires a known function g")
            g = noise_function(self.g_spec)
            grid = np.linspace(0.0, 1.0, 2 ** 14 + 1)
            if not np.all(np.isfinite(g(grid))):
                raise ConfigError("g must be bounded on [0, 1]")

    @property
    def g(self) -> Optional[Callable]:
        return noise_function(self.g_spec) if self.g_spec is not None else None

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=seed)

    def header(self) -> str:
        parts = [
            f"function={self.r.name}",
            f"n={self.n}",
            f"sigma2={self.sigma2!r}",
            f"u_law={self.u_law}",
            f"u_standardize={int(self.u_standardize)}",
            f"noise_mode={self.noise_mode}",
        ]
        if self.g_spec is not None:
            parts.append(f"g={self.g_spec}")
        parts.append(f"seed={self.seed}")
        return " ".join(parts)

    @classmethod
    def from_header(cls, text: str) -> "ModelConfig":
        kv = dict(item.split("=", 1) for item in text.split())
        return cls(
            r=test_function(kv["function"]),
            n=int(kv["n"]),
            sigma2=float(kv["sigma2"]),
            u_law=kv["u_law"],
            u_standardize=bool(int(kv["u_standardize"])),
            noise_mode=kv["noise_mode"],
            g_spec=kv.get("g"),
            seed=int(kv["seed"]),
        )


@dataclass
class DesignSample:
    x: np.ndarray
    y: np.ndarray
    config: Optional[ModelConfig] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ShapeError("x and y must be 1-d arrays of equal length")

    @property
    def n(self) -> int:
        return len(self.x)

    def to_csv(self, path, extra_header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if self.config is not None:
                fh.write(f"# {self.config.header()}\n")
            if extra_header:
                fh.write(f"# {extra_header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y"])
            for xi, yi in zip(self.x, self.y):
                w.writerow([repr(float(xi)), repr(float(yi))])

    @classmethod
    def from_csv(cls, path) -> "DesignSample":
        config = None
        xs, ys = [], []
        with open(path, newline="") as fh:
            rows = []
            for line in fh:
                if line.startswith("#"):
                    body = line[1:].strip()
                    if config is None and body.startswith("function="):
                        config = ModelConfig.from_header(body)
                    continue
                rows.append(line)
        reader = csv.reader(rows)
        header = next(reader, None)
        if header != ["x", "y"]:
            raise ConfigError(f"{path}: expected header 'x,y', got {header}")
        for row in reader:
            xs.append(float(row[0]))
            ys.append(float(row[1]))
        order = np.argsort(xs, kind="stable")
        return cls(np.asarray(xs)[order], np.asarray(ys)[order], config)


def draw_unsorted(config: ModelConfig):
    """Raw draws in generation order: (x, y, u, v)."""
    rng = np.random.default_rng(config.seed)
    n = config.n
    x = rng.random(n)
    if config.u_law == "uniform":
        u = rng.uniform(-1.0, 1.0, n)
        if config.u_standardize:
            u = u * np.sqrt(3.0)
    elif config.u_law == "gaussian":
        u = rng.standard_normal(n)
    else:
        u = np.ones(n)
    if config.noise_mode == "a5":
        v = rng.normal(0.0, np.sqrt(config.sigma2), n) if config.sigma2 > 0 else np.zeros(n)
    else:
        v = config.g(x)
    y = np.sqrt(config.r(x)) * u + v
    return x, y, u, v


def generate_sample(config: ModelConfig) -> DesignSample:
    """Draw a sample and sort it by x, carrying y along."""
    x, y, _, _ = draw_unsorted(config)
    if len(np.unique(x)) < len(x):
        log.info("tied design points in seed %d; jittering by 1e-15 * i", config.seed)
        x = x + 1e-15 * np.arange(len(x))
    order = np.argsort(x, kind="stable")
    return DesignSample(x[order], y[order], config)

"""Distribution zoo, reference measures, and reproducible RNG streams.

Sampling algorithms are fixed and documented so that a (master seed, stream
index) pair reproduces draws bit-exactly:

* streams are counter-based Philox generators keyed by the 128-bit pair
  ``(master_seed, stream_index)``; distinct keys give independent streams,
* exponential draws use inverse-CDF on one uniform,
* chi-squared with 1 degree of freedom is the square of a standard normal,
* Poisson and geometric draws use inverse-CDF (table walk / closed form),
* other gammas use the generator's gamma method,
* mixtures draw a component indicator, then both component vectors, and
  select elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, inf, lgamma, log

import numpy as np
from scipy.special import gammaincinv, pdtr

__all__ = [
    "Exponential", "Gamma", "ChiSquared", "Poisson", "Geometric",
    "Uniform01", "Mixture", "PointMass",
    "Exponential1Ref", "Uniform01Ref", "GeometricRef",
    "RngStream", "density_m", "sample", "pdf_or_pmf",
]

_TAIL_MASS = 1e-12  # per-axis truncation mass for deterministic engines


def _mix64(z: int) -> int:
    """SplitMix64 finalizer; folds tags into fresh 64-bit stream indices."""
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (master_seed, stream_index)."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = [self.master_seed & 0xFFFFFFFFFFFFFFFF,
               self.stream_index & 0xFFFFFFFFFFFFFFFF]
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *tags: int) -> "RngStream":
        """Derive an independent stream by mixing tags into the index."""
        idx = self.stream_index & 0xFFFFFFFFFFFFFFFF
        for t in tags:
            idx = _mix64(idx ^ _mix64(t & 0xFFFFFFFFFFFFFFFF))
        return RngStream(self.master_seed, idx)


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

class Distribution:
    """Common surface: density/mass, sampling, support, tail truncation."""

    discrete = False

    def pdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def draw(self, gen: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def upper_quantile(self, tail: float = _TAIL_MASS) -> float:
        """Point with at most ``tail`` probability above it."""
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(Distribution):
    mean_value: float = 1.0

    def __post_init__(self):
        if not self.mean_value > 0:
            raise ValueError("exponential mean must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        ok = x >= 0
        out[ok] = np.exp(-x[ok] / self.mean_value) / self.mean_value
        return out

    def draw(self, gen, size):
        return -self.mean_value * np.log1p(-gen.random(size))

    def mean(self):
        return self.mean_value

    def support(self):
        return (0.0, inf)

    def upper_quantile(self, tail=_TAIL_MASS):
        return -self.mean_value * log(tail)

    def config(self):
        return {"kind": "exponential", "mean": self.mean_value}


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("gamma shape and scale must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        lg = ((self.shape - 1) * np.log(x[pos]) - x[pos] / self.scale
              - lgamma(self.shape) - self.shape * log(self.scale))
        out[pos] = np.exp(lg)
        if self.shape == 1:
            out[x == 0] = 1.0 / self.scale
        return out

    def draw(self, gen, size):
        return gen.gamma(self.shape, self.scale, size)

    def mean(self):
        return self.shape * self.scale

    def support(self):
        return (0.0, inf)

    def upper_quantile(self, tail=_TAIL_MASS):
        return self.scale * float(gammaincinv(self.shape, 1.0 - tail))

    def config(self):
        return {"kind": "gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class ChiSquared(Distribution):
    """Chi-squared law; identical to Gamma(df / 2, 2) with pinned sampling."""

    df: float

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError("degrees of freedom must be positive")

    def _gamma(self) -> Gamma:
        return Gamma(self.df / 2.0, 2.0)

    def pdf(self, x):
        return self._gamma().pdf(x)

    def draw(self, gen, size):
        if self.df == 1:
            return gen.standard_normal(size) ** 2
        return gen.gamma(self.df / 2.0, 2.0, size)

    def mean(self):
        return self.df

    def support(self):
        return (0.0, inf)

    def upper_quantile(self, tail=_TAIL_MASS):
        return self._gamma().upper_quantile(tail)

    def config(self):
        return {"kind": "chi_squared", "df": self.df}


@dataclass(frozen=True)
class Poisson(Distribution):
    discrete = True
    mean_value: float = 1.0

    def __post_init__(self):
        if not self.mean_value > 0:
            raise ValueError("Poisson mean must be positive")

    def pdf(self, x):
        from scipy.special import gammaln
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        ok = (x >= 0) & (x == np.floor(x))
        k = x[ok]
        out[ok] = np.exp(k * log(self.mean_value) - self.mean_value
                         - gammaln(k + 1.0))
        return out

    def _cdf_table(self) -> np.ndarray:
        hi = int(self.upper_quantile(_TAIL_MASS * 1e-3)) + 2
        return pdtr(np.arange(hi), self.mean_value)

    def draw(self, gen, size):
        cdf = self._cdf_table()
        return np.searchsorted(cdf, gen.random(size), side="left").astype(float)

    def mean(self):
        return self.mean_value

    def support(self):
        return (0.0, inf)

    def upper_quantile(self, tail=_TAIL_MASS):
        lam = self.mean_value
        k, cum, term = 0, exp(-lam), exp(-lam)
        while cum < 1.0 - tail and k < 100_000:
            k += 1
            term *= lam / k
            cum += term
        return float(k)

    def config(self):
        return {"kind": "poisson", "mean": self.mean_value}


@dataclass(frozen=True)
class Geometric(Distribution):
    """Geometric on {0, 1, ...} parameterized by its mean.

    With mean m the success structure is q = m / (1 + m) and
    P(x) = (1 - q) * q**x.
    """

    discrete = True
    mean_value: float = 1.0

    def __post_init__(self):
        if not self.mean_value > 0:
            raise ValueError("geometric mean must be positive")

    @property
    def q(self) -> float:
        return self.mean_value / (1.0 + self.mean_value)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        ok = (x >= 0) & (x == np.floor(x))
        out[ok] = (1.0 - self.q) * self.q ** x[ok]
        return out

    def draw(self, gen, size):
        return np.floor(np.log1p(-gen.random(size)) / log(self.q))

    def mean(self):
        return self.mean_value

    def support(self):
        return (0.0, inf)

    def upper_quantile(self, tail=_TAIL_MASS):
        return float(np.ceil(log(tail) / log(self.q)))

    def config(self):
        return {"kind": "geometric", "mean": self.mean_value}


@dataclass(frozen=True)
class Uniform01(Distribution):
    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), 1.0, 0.0)

    def draw(self, gen, size):
        return gen.random(size)

    def mean(self):
        return 0.5

    def support(self):
        return (0.0, 1.0)

    def upper_quantile(self, tail=_TAIL_MASS):
        return 1.0

    def config(self):
        return {"kind": "uniform01"}


@dataclass(frozen=True)
class PointMass(Distribution):
    value: float = 0.0

    @property
    def discrete(self):  # type: ignore[override]
        return float(self.value).is_integer() and self.value >= 0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x == self.value, 1.0, 0.0)

    def draw(self, gen, size):
        return np.full(size, float(self.value))

    def mean(self):
        return float(self.value)

    def support(self):
        return (float(self.value), float(self.value))

    def upper_quantile(self, tail=_TAIL_MASS):
        return float(self.value)

    def config(self):
        return {"kind": "point_mass", "value": self.value}


@dataclass(frozen=True)
class Mixture(Distribution):
    """Two-component mixture; components must agree on discreteness."""

    weight: float
    a: Distribution
    b: Distribution

    def __post_init__(self):
        if not 0 <= self.weight <= 1:
            raise ValueError("mixture weight must lie in [0, 1]")
        if self.a.discrete != self.b.discrete:
            raise ValueError("mixture components must both be discrete or "
                             "both be continuous")

    @property
    def discrete(self):  # type: ignore[override]
        return self.a.discrete

    def pdf(self, x):
        return self.weight * self.a.pdf(x) + (1 - self.weight) * self.b.pdf(x)

    def draw(self, gen, size):
        pick = gen.random(size) < self.weight
        xa = self.a.draw(gen, size)
        xb = self.b.draw(gen, size)
        return np.where(pick, xa, xb)

    def mean(self):
        return self.weight * self.a.mean() + (1 - self.weight) * self.b.mean()

    def support(self):
        lo_a, hi_a = self.a.support()
        lo_b, hi_b = self.b.support()
        return (min(lo_a, lo_b), max(hi_a, hi_b))

    def upper_quantile(self, tail=_TAIL_MASS):
        return max(self.a.upper_quantile(tail), self.b.upper_quantile(tail))

    def config(self):
        return {"kind": "mixture", "weight": self.weight,
                "a": self.a.config(), "b": self.b.config()}


def sample(dist: Distribution, rng: RngStream, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. values from ``dist`` on the given stream."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return dist.draw(rng.generator(), count)


def pdf_or_pmf(dist: Distribution, x) -> np.ndarray | float:
    """Density against Lebesgue or counting measure; 0 outside the support."""
    out = dist.pdf(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Reference measures
# ---------------------------------------------------------------------------

class ReferenceMeasure:
    """Probability measure whose density m() weights the polynomial basis."""

    kind = ""
    discrete = False

    def density(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_support(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential1Ref(ReferenceMeasure):
    kind = "exponential1"

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.exp(-np.clip(x, 0, None)), 0.0)

    def in_support(self, x):
        return np.asarray(x, dtype=float) >= 0

    def support(self):
        return (0.0, inf)

    def config(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Uniform01Ref(ReferenceMeasure):
    kind = "uniform01"

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), 1.0, 0.0)

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= 0) & (x <= 1)

    def support(self):
        return (0.0, 1.0)

    def config(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class GeometricRef(ReferenceMeasure):
    kind = "geometric"
    discrete = True
    p: float = 0.5

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("geometric reference parameter must lie in (0, 1)")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x == np.floor(x))
        out = np.zeros_like(x)
        out[ok] = self.p ** x[ok] * (1.0 - self.p)
        return out

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= 0) & (x == np.floor(x))

    def support(self):
        return (0.0, inf)

    def config(self):
        return {"kind": self.kind, "p": self.p}


def density_m(ref: ReferenceMeasure, x) -> np.ndarray | float:
    """Reference density/mass at x; 0 outside the support."""
    out = ref.density(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out

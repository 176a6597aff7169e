"""Input side of the large-dam model: batch sizes, service laws, costs.

Every type here is an immutable value object.  Service families provide
closed-form Laplace-Stieltjes transforms, raw moments up to order three,
and the mixed-Poisson weights ``m_k = Pr{k Poisson(lam) events during one
service}`` consumed by :mod:`largedam.busy_period`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, ModelError

PROB_TOL = 1e-12


# --------------------------------------------------------------------------
# batch sizes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BatchDistribution:
    """Batch-size pmf ``probs[i-1] = Pr{batch = i}`` on the support 1..K."""

    probs: tuple[float, ...]

    def __init__(self, probs: Sequence[float]):
        p = tuple(float(x) for x in probs)
        if len(p) == 0:
            raise ModelError("batch pmf must have at least one entry")
        if any((not math.isfinite(x)) or x < 0 for x in p):
            raise ModelError("batch probabilities must be finite and nonnegative")
        if abs(math.fsum(p) - 1.0) > PROB_TOL:
            raise ModelError(f"batch probabilities sum to {math.fsum(p)!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def array(self) -> np.ndarray:
        """pmf as an array indexed by batch size (entry 0 is zero)."""
        return np.concatenate(([0.0], np.asarray(self.probs)))

    def pgf(self, z: float) -> float:
        return math.fsum(r * z**i for i, r in enumerate(self.probs, start=1))

    def pgf_deriv(self, z: float) -> float:
        return math.fsum(i * r * z ** (i - 1) for i, r in enumerate(self.probs, start=1))

    def moment(self, order: int) -> float:
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        return math.fsum(i**order * r for i, r in enumerate(self.probs, start=1))

    @property
    def mean(self) -> float:
        return self.moment(1)

    def tail(self, m: int) -> float:
        """``Pr{batch > m}``."""
        if m < 1:
            return 1.0
        return math.fsum(self.probs[m:])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(np.arange(1, self.size + 1), size=size, p=self.probs)


# --------------------------------------------------------------------------
# service laws
# --------------------------------------------------------------------------


class ServiceDistribution(ABC):
    """A parametric service-time law."""

    family: str = ""

    @abstractmethod
    def moment(self, order: int) -> float:
        """Raw moment ``E X**order`` for order 1, 2 or 3."""

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def rate(self) -> float:
        """``mu = 1 / mean``."""
        return 1.0 / self.mean

    @property
    @abstractmethod
    def strip(self) -> float:
        """The LST converges for ``s > strip`` (``-inf`` for entire transforms)."""

    def _check_strip(self, s: float) -> None:
        if not s > self.strip:
            raise DomainError(
                f"{self.family} LST undefined at s={s!r} (needs s > {self.strip!r})"
            )

    @abstractmethod
    def lst(self, s: float) -> float:
        """Laplace-Stieltjes transform ``E exp(-s X)``."""

    @abstractmethod
    def lst_deriv(self, s: float) -> float:
        """First derivative of :meth:`lst` in ``s``."""

    @abstractmethod
    def mixed_poisson(self, lam: float, kmax: int) -> np.ndarray:
        """Weights ``m_0..m_kmax`` of the Poisson(lam X) count."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` service times."""

    @abstractmethod
    def with_mean(self, mean: float) -> "ServiceDistribution":
        """Same family and shape, durations rescaled to the given mean."""

    @abstractmethod
    def params(self) -> dict[str, Any]:
        """Parameters as a plain dict (inverse of :func:`service_from_dict`)."""

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, **self.params()}

    def time_scaled(self, factor: float) -> "ServiceDistribution":
        """Multiply every duration by ``factor``."""
        return self.with_mean(self.mean * factor)


def _positive(name: str, value: float) -> float:
    v = float(value)
    if not (math.isfinite(v) and v > 0):
        raise ModelError(f"{name} must be a positive finite number, got {value!r}")
    return v


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    rate_param: float
    family = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate_param", _positive("rate", self.rate_param))

    def moment(self, order: int) -> float:
        return math.factorial(order) / self.rate_param**order

    @property
    def strip(self) -> float:
        return -self.rate_param

    def lst(self, s: float) -> float:
        self._check_strip(s)
        return self.rate_param / (self.rate_param + s)

    def lst_deriv(self, s: float) -> float:
        self._check_strip(s)
        return -self.rate_param / (self.rate_param + s) ** 2

    def mixed_poisson(self, lam: float, kmax: int) -> np.ndarray:
        p = self.rate_param / (lam + self.rate_param)
        return p * (1.0 - p) ** np.arange(kmax + 1)

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate_param, size)

    def with_mean(self, mean: float) -> "Exponential":
        return Exponential(1.0 / _positive("mean", mean))

    def params(self):
        return {"rate": self.rate_param}


@dataclass(frozen=True)
class Erlang(ServiceDistribution):
    shape: int
    rate_param: float
    family = "erlang"

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ModelError(f"Erlang shape must be a positive integer, got {self.shape!r}")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "rate_param", _positive("rate", self.rate_param))

    def moment(self, order: int) -> float:
        n = self.shape
        rising = math.prod(range(n, n + order))
        return rising / self.rate_param**order

    @property
    def strip(self) -> float:
        return -self.rate_param

    def lst(self, s: float) -> float:
        self._check_strip(s)
        return (self.rate_param / (self.rate_param + s)) ** self.shape

    def lst_deriv(self, s: float) -> float:
        self._check_strip(s)
        mu, n = self.rate_param, self.shape
        return -n * mu**n / (mu + s) ** (n + 1)

    def mixed_poisson(self, lam: float, kmax: int) -> np.ndarray:
        p = self.rate_param / (lam + self.rate_param)
        return stats.nbinom.pmf(np.arange(kmax + 1), self.shape, p)

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate_param, size)

    def with_mean(self, mean: float) -> "Erlang":
        return Erlang(self.shape, self.shape / _positive("mean", mean))

    def params(self):
        return {"shape": self.shape, "rate": self.rate_param}


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    duration: float
    family = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "duration", _positive("duration", self.duration))

    def moment(self, order: int) -> float:
        return self.duration**order

    @property
    def strip(self) -> float:
        return -math.inf

    def lst(self, s: float) -> float:
        return math.exp(-s * self.duration)

    def lst_deriv(self, s: float) -> float:
        return -self.duration * math.exp(-s * self.duration)

    def mixed_poisson(self, lam: float, kmax: int) -> np.ndarray:
        return stats.poisson.pmf(np.arange(kmax + 1), lam * self.duration)

    def sample(self, rng, size):
        return np.full(size, self.duration)

    def with_mean(self, mean: float) -> "Deterministic":
        return Deterministic(mean)

    def params(self):
        return {"duration": self.duration}


@dataclass(frozen=True)
class HyperExponential(ServiceDistribution):
    weights: tuple[float, ...]
    rates: tuple[float, ...]
    family = "hyperexponential"

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        r = tuple(_positive("rate", x) for x in self.rates)
        if len(w) != len(r) or not w:
            raise ModelError("hyperexponential weights and rates must have equal nonzero length")
        if any(x < 0 for x in w) or abs(math.fsum(w) - 1.0) > PROB_TOL:
            raise ModelError("hyperexponential weights must be a probability vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)

    def moment(self, order: int) -> float:
        k = math.factorial(order)
        return math.fsum(w * k / mu**order for w, mu in zip(self.weights, self.rates))

    @property
    def strip(self) -> float:
        return -min(mu for w, mu in zip(self.weights, self.rates) if w > 0)

    def lst(self, s: float) -> float:
        self._check_strip(s)
        return math.fsum(w * mu / (mu + s) for w, mu in zip(self.weights, self.rates))

    def lst_deriv(self, s: float) -> float:
        self._check_strip(s)
        return -math.fsum(w * mu / (mu + s) ** 2 for w, mu in zip(self.weights, self.rates))

    def mixed_poisson(self, lam: float, kmax: int) -> np.ndarray:
        k = np.arange(kmax + 1)
        out = np.zeros(kmax + 1)
        for w, mu in zip(self.weights, self.rates):
            p = mu / (lam + mu)
            out += w * p * (1.0 - p) ** k
        return out

    def sample(self, rng, size):
        phase = rng.choice(len(self.rates), size=size, p=self.weights)
        return rng.exponential(1.0, size) / np.asarray(self.rates)[phase]

    def with_mean(self, mean: float) -> "HyperExponential":
        c = self.mean / _positive("mean", mean)
        return HyperExponential(self.weights, tuple(mu * c for mu in self.rates))

    def params(self):
        return {"weights": list(self.weights), "rates": list(self.rates)}


def service_from_dict(d: dict[str, Any]) -> ServiceDistribution:
    """Build a service law from ``{"family": ..., <params>}``."""
    d = dict(d)
    fam = str(d.pop("family", "")).lower()
    try:
        if fam == "exponential":
            if "mean" in d:
                return Exponential(1.0 / _positive("mean", d.pop("mean")))
            return Exponential(d.pop("rate"))
        if fam == "erlang":
            shape = d.pop("shape")
            if "mean" in d:
                return Erlang(shape, shape / _positive("mean", d.pop("mean")))
            return Erlang(shape, d.pop("rate"))
        if fam == "deterministic":
            return Deterministic(d.pop("duration", d.pop("mean", None)))
        if fam == "hyperexponential":
            return HyperExponential(tuple(d.pop("weights")), tuple(d.pop("rates")))
    except KeyError as exc:
        raise ModelError(f"{fam} service is missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ModelError(f"bad {fam} service parameters: {exc}") from None
    raise ModelError(f"unknown service family {fam!r}")


# --------------------------------------------------------------------------
# water costs
# --------------------------------------------------------------------------


class CostProfile(ABC):
    """Level-dependent water costs ``c_1 >= ... >= c_L``."""

    kind: str = ""

    @abstractmethod
    def levels(self, L: int) -> np.ndarray:
        """Cost vector ``c_1..c_L`` for threshold ``L``."""

    @abstractmethod
    def fraction_cost(self, y: np.ndarray | float) -> np.ndarray | float:
        """Cost as a function of the level fraction ``y = (i-1)/(L-1)`` in [0, 1]."""

    @abstractmethod
    def c_star(self) -> float:
        """Cesaro limit ``lim (1/L) sum c_i``."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        ...

    @property
    def is_constant(self) -> bool:
        return False


def _nonneg(name: str, v: float) -> float:
    x = float(v)
    if not (math.isfinite(x) and x >= 0):
        raise ModelError(f"{name} must be finite and nonnegative, got {v!r}")
    return x


@dataclass(frozen=True)
class ConstantCost(CostProfile):
    value: float
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "value", _nonneg("cost", self.value))

    def levels(self, L):
        return np.full(L, self.value)

    def fraction_cost(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.value) if np.ndim(y) else self.value

    def c_star(self):
        return self.value

    @property
    def is_constant(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class LinearCost(CostProfile):
    """``c_i = c_high - (i-1)/(L-1) (c_high - c_low)``."""

    c_high: float
    c_low: float
    kind = "linear"

    def __post_init__(self):
        hi, lo = _nonneg("c_high", self.c_high), _nonneg("c_low", self.c_low)
        if lo > hi:
            raise ModelError(f"linear costs need c_low <= c_high, got {lo} > {hi}")
        object.__setattr__(self, "c_high", hi)
        object.__setattr__(self, "c_low", lo)

    def levels(self, L):
        if L == 1:
            return np.array([self.c_high])
        i = np.arange(1, L + 1)
        return self.c_high - (i - 1) / (L - 1) * (self.c_high - self.c_low)

    def fraction_cost(self, y):
        return self.c_high - np.asarray(y, dtype=float) * (self.c_high - self.c_low)

    def c_star(self):
        return 0.5 * (self.c_high + self.c_low)

    @property
    def is_constant(self):
        return self.c_high == self.c_low

    def to_dict(self):
        return {"kind": self.kind, "c_high": self.c_high, "c_low": self.c_low}


@dataclass(frozen=True)
class TableCost(CostProfile):
    """Explicit costs; other thresholds interpolate linearly in level fraction."""

    values: tuple[float, ...]
    kind = "table"

    def __post_init__(self):
        v = tuple(_nonneg("cost", x) for x in self.values)
        if not v:
            raise ModelError("cost table is empty")
        if any(b > a for a, b in zip(v, v[1:])):
            raise ModelError("cost table must be nonincreasing in the level")
        object.__setattr__(self, "values", v)

    @property
    def _grid(self) -> np.ndarray:
        n = len(self.values)
        return np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.0])

    def levels(self, L):
        if L == len(self.values):
            return np.asarray(self.values)
        if L == 1:
            return np.array([self.values[0]])
        return self.fraction_cost(np.linspace(0.0, 1.0, L))

    def fraction_cost(self, y):
        if len(self.values) == 1:
            return np.full_like(np.asarray(y, dtype=float), self.values[0])
        return np.interp(y, self._grid, self.values)

    def c_star(self):
        if len(self.values) == 1:
            return self.values[0]
        return float(integrate.trapezoid(self.values, self._grid))

    @property
    def is_constant(self):
        return len(set(self.values)) == 1

    def to_dict(self):
        return {"kind": self.kind, "values": list(self.values)}


def cost_from_dict(d: dict[str, Any]) -> CostProfile:
    kind = str(d.get("kind", "")).lower()
    try:
        if kind == "constant":
            return ConstantCost(d["value"])
        if kind == "linear":
            return LinearCost(d["c_high"], d["c_low"])
        if kind == "table":
            return TableCost(tuple(d["values"]))
    except KeyError as exc:
        raise ModelError(f"{kind} cost profile is missing field {exc.args[0]!r}") from None
    raise ModelError(f"unknown cost kind {kind!r}")


# --------------------------------------------------------------------------
# full model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadFactors:
    rho1: float
    rho2: float
    rho12: float
    rho13: float | None


@dataclass(frozen=True)
class DamModel:
    """One instance of the threshold queue.

    ``b1`` serves a customer whose service starts with at most ``level``
    customers present (the entering customer included); ``b2`` serves the
    rest.  The first customer of a busy period always receives ``b1``.
    """

    lam: float
    batches: BatchDistribution
    b1: ServiceDistribution
    b2: ServiceDistribution
    level: int
    j1: float = 0.0
    j2: float = 0.0
    costs: CostProfile = field(default_factory=lambda: ConstantCost(0.0))

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive("lambda", self.lam))
        if int(self.level) != self.level or self.level < 1:
            raise ModelError(f"level L must be a positive integer, got {self.level!r}")
        object.__setattr__(self, "level", int(self.level))
        for name in ("j1", "j2"):
            object.__setattr__(self, name, _nonneg(name, getattr(self, name)))
        if not self.rho2 < 1.0:
            raise ModelError(f"rho2 = {self.rho2:.6g} must be < 1 for stability above the threshold")

    @property
    def e_sigma(self) -> float:
        return self.batches.mean

    @property
    def rho1(self) -> float:
        return self.lam * self.e_sigma * self.b1.mean

    @property
    def rho2(self) -> float:
        return self.lam * self.e_sigma * self.b2.mean

    @property
    def rho12(self) -> float:
        return self.lam**2 * self.b1.moment(2)

    @property
    def rho13(self) -> float:
        return self.lam**3 * self.b1.moment(3)

    @property
    def kappa(self) -> float:
        """``rho12 Es^3 + Es^2 - Es`` evaluated at this model's B1."""
        es = self.e_sigma
        return self.rho12 * es**3 + self.batches.moment(2) - es

    def load_factors(self) -> LoadFactors:
        return load_factors(self)

    def with_level(self, L: int) -> "DamModel":
        return replace(self, level=L)

    def with_rho1(self, rho1: float) -> "DamModel":
        """Rescale B1 durations so that ``rho1`` takes the given value."""
        return replace(self, b1=self.b1.with_mean(rho1 / (self.lam * self.e_sigma)))

    def cost_levels(self) -> np.ndarray:
        return self.costs.levels(self.level)

    def to_dict(self) -> dict[str, Any]:
        return {
            "arrivals": {"rate": self.lam, "batch_pmf": list(self.batches.probs)},
            "service": {"b1": self.b1.to_dict(), "b2": self.b2.to_dict()},
            "control": {"level": self.level},
            "damage": {"j1": self.j1, "j2": self.j2},
            "costs": self.costs.to_dict(),
        }


def load_factors(m: DamModel) -> LoadFactors:
    return LoadFactors(m.rho1, m.rho2, m.rho12, m.rho13)


def batch_pgf(b: BatchDistribution, z: float) -> float:
    return b.pgf(z)


def batch_moment(b: BatchDistribution, order: int) -> float:
    return b.moment(order)


def service_lst(dist: ServiceDistribution, s: float) -> float:
    return dist.lst(s)

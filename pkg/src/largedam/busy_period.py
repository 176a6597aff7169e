"""Busy-period expectations for the B1 regime.

The central object is the Takacs-type recurrence

    Q_n = sum_{i=0}^{n} Q_{n-i+1} f_i,

where ``f_i`` is the probability that ``i`` customers arrive during one B1
service.  Started from ``Q_0 = 1`` it yields the expected number of
B1-served customers in a busy period opened by one customer with ``j``
places left below the threshold.  Mixing over the number in system after
the first departure gives the per-busy-period count consumed by
:mod:`largedam.stationary`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import NumericalError, TruncationError
from .model import BatchDistribution, DamModel

DEFAULT_TOL = 1e-12
_N_CAP = 1 << 21


@dataclass(frozen=True)
class ArrivalCountCoeffs:
    """Pmf ``f_0..f_N`` of the customers arriving during one service."""

    f: np.ndarray
    truncation_error: float

    @property
    def f0(self) -> float:
        return float(self.f[0])

    def mean(self) -> float:
        return math.fsum(np.arange(len(self.f)) * self.f)

    def __len__(self) -> int:
        return len(self.f)


def _compound(weights: np.ndarray, batch: np.ndarray, n: int) -> np.ndarray:
    """``sum_k weights[k] * batch^{*k}`` truncated at index ``n``."""
    if len(batch) == 2:  # single atom at 1
        return weights[: n + 1].copy()
    out = np.zeros(n + 1)
    power = np.zeros(n + 1)
    power[0] = 1.0
    # reverse cumulative weights tell us when the remaining terms vanish
    rest = np.cumsum(weights[::-1])[::-1]
    for k in range(min(n, len(weights) - 1) + 1):
        if k > 0:
            power = np.convolve(power, batch)[: n + 1]
        out += weights[k] * power
        if k + 1 < len(rest) and rest[k + 1] < 1e-300:
            break
    return out


def arrival_count_coeffs(
    m: DamModel,
    which: Literal["B1", "B2"] = "B1",
    n_max: int = 64,
    tol: float = DEFAULT_TOL,
) -> ArrivalCountCoeffs:
    """Arrival-count pmf during one service of ``which``.

    The length grows beyond ``n_max`` until the discarded mass is below
    ``tol``.
    """
    if n_max < 1 or tol <= 0:
        raise ValueError("n_max must be >= 1 and tol > 0")
    dist = m.b1 if which.upper() == "B1" else m.b2
    batch = m.batches.array
    n = max(int(n_max), 8)
    while True:
        weights = dist.mixed_poisson(m.lam, n)
        f = np.clip(_compound(weights, batch, n), 0.0, None)
        err = max(0.0, 1.0 - math.fsum(f))
        if err <= tol:
            return ArrivalCountCoeffs(f, err)
        if n >= _N_CAP:
            raise TruncationError(
                f"arrival-count tail mass {err:.3g} still above tol={tol:g} at N={n}"
            )
        n *= 2


def solve_takacs_recurrence(
    f: ArrivalCountCoeffs | Sequence[float] | np.ndarray, q0: float = 1.0, n: int = 0
) -> np.ndarray:
    """Forward solve of the recurrence, returning ``Q_0..Q_n``.

    Sums are accumulated in extended precision because the alternating
    structure ``Q_k - sum(...)`` cancels more and more digits as ``k`` grows.
    """
    coeffs = np.asarray(f.f if isinstance(f, ArrivalCountCoeffs) else f, dtype=float)
    if coeffs.size == 0 or not coeffs[0] > 0:
        raise ValueError("the recurrence needs f_0 > 0")
    if not q0 > 0 or n < 0:
        raise ValueError("need q0 > 0 and n >= 0")
    fl = np.zeros(n + 1, dtype=np.longdouble)
    k = min(n + 1, coeffs.size)
    fl[:k] = coeffs[:k]
    f0 = fl[0]
    q = np.empty(n + 1, dtype=np.longdouble)
    q[0] = q0
    for j in range(n):
        # sum_{i=1}^{j} Q_{j-i+1} f_i
        s = np.dot(q[j:0:-1], fl[1 : j + 1]) if j else np.longdouble(0)
        q[j + 1] = (q[j] - s) / f0
        if not np.isfinite(q[j + 1]):
            raise NumericalError(f"recurrence overflowed at index {j + 1}")
    return q.astype(float)


def zeta1_distribution(f: ArrivalCountCoeffs | np.ndarray, b: BatchDistribution) -> np.ndarray:
    """Pmf of the number in system right after the first departure of a busy period."""
    coeffs = np.asarray(f.f if isinstance(f, ArrivalCountCoeffs) else f, dtype=float)
    return np.convolve(b.array, coeffs)[1:]


def _tail_from(pmf: np.ndarray, L: int) -> np.ndarray:
    """``S_i = Pr{zeta >= i}`` for i = 0..L with truncated mass counted in every tail."""
    head = np.zeros(L + 1)
    k = min(L, len(pmf))
    head[:k] = pmf[:k]
    cum = np.concatenate(([0.0], np.cumsum(head[:L], dtype=np.longdouble)))
    return (1.0 - cum).astype(float).clip(0.0, 1.0)


def nu1_of_zeta(table: Sequence[float] | np.ndarray, zeta_pmf: np.ndarray, L: int) -> float:
    """Expected B1-served customers in a busy period at threshold ``L``."""
    nu = np.asarray(table, dtype=float)
    if len(nu) < L + 1:
        raise IndexError(f"busy-period table has {len(nu)} entries, needs {L + 1}")
    if L == 0:
        return 1.0
    tail = _tail_from(np.asarray(zeta_pmf, dtype=float), L)
    # sum_{i=1}^{L} Pr{zeta >= i} * nu_{L-i+1}
    return 1.0 + math.fsum(tail[1:] * nu[L:0:-1])


def nu1_prefix(table: np.ndarray, zeta_pmf: np.ndarray, L: int) -> np.ndarray:
    """The same count for every threshold ``0..L`` in one pass."""
    nu = np.asarray(table, dtype=float)
    if len(nu) < L + 1:
        raise IndexError(f"busy-period table has {len(nu)} entries, needs {L + 1}")
    out = np.ones(L + 1)
    if L:
        tail = _tail_from(np.asarray(zeta_pmf, dtype=float), L)
        out[1:] += np.convolve(tail[1:], nu[1 : L + 1])[:L]
    return out


@dataclass(frozen=True)
class BusyPeriodTable:
    """Busy-period quantities of one model at threshold ``L``."""

    level: int
    coeffs: ArrivalCountCoeffs
    nu1_tilde: np.ndarray
    zeta1_pmf: np.ndarray
    nu1: np.ndarray

    @property
    def nu1_L(self) -> float:
        return float(self.nu1[self.level])

    @property
    def zeta1_mean(self) -> float:
        return math.fsum(np.arange(len(self.zeta1_pmf)) * self.zeta1_pmf)


def busy_period_table(m: DamModel, tol: float = DEFAULT_TOL) -> BusyPeriodTable:
    L = m.level
    coeffs = arrival_count_coeffs(m, "B1", n_max=L + 2, tol=tol)
    nu_t = solve_takacs_recurrence(coeffs, 1.0, L)
    zeta = zeta1_distribution(coeffs, m.batches)
    return BusyPeriodTable(L, coeffs, nu_t, zeta, nu1_prefix(nu_t, zeta, L))

"""Exact stationary quantities from busy-period expectations.

Conventions (all time-stationary fractions):

* ``p1``  -- the system is empty;
* ``p2``  -- the server is busy with a B2 service;
* ``q[i-1]`` -- the server is busy with a B1 service that started with
  ``i`` customers present (the entering one included), ``i = 1..L``.  A
  busy period opened by a batch larger than ``L`` starts its first B1
  service above the threshold; that service is counted in ``q[L-1]``.

With these conventions ``p1 + p2 + sum(q) = 1`` is an identity.  The
occupancy distribution ``Pr{L_t = i}`` for ``i <= L`` is reported as well.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .busy_period import DEFAULT_TOL, BusyPeriodTable, busy_period_table
from .errors import DegenerateModel
from .model import DamModel


@dataclass(frozen=True)
class StationaryResult:
    level: int
    rho1: float
    rho2: float
    p1: float
    p2: float
    q: np.ndarray
    nu1_L: float
    nu2_L: float
    zeta1_mean: float
    e_sigma: float
    busy_mean: float
    occupancy: np.ndarray = field(repr=False)

    @property
    def total(self) -> float:
        return math.fsum([self.p1, self.p2, *self.q])

    @property
    def prob_above(self) -> float:
        """``Pr{L_t > L}``."""
        return max(0.0, 1.0 - math.fsum(self.occupancy))

    def to_record(self) -> dict[str, Any]:
        rec = asdict(self)
        rec["q"] = [float(x) for x in self.q]
        rec["occupancy"] = [float(x) for x in self.occupancy]
        rec["prob_above"] = self.prob_above
        return rec

    @classmethod
    def from_record(cls, d: dict[str, Any]) -> "StationaryResult":
        kw = {k: d[k] for k in cls.__dataclass_fields__}
        kw["q"] = np.asarray(kw["q"], dtype=float)
        kw["occupancy"] = np.asarray(kw["occupancy"], dtype=float)
        return cls(**kw)


def exact_p1_p2(m: DamModel, bp: BusyPeriodTable) -> tuple[float, float]:
    """Empty-system and B2-busy fractions.

    A busy cycle (idle + busy) carries ``E nu = E nu1 + E nu2`` departures
    and ``lam Es`` arrivals per unit time, so ``p1 = Es / E nu``.
    """
    es, r1, r2 = m.e_sigma, m.rho1, m.rho2
    nu1 = bp.nu1_L
    nu2 = nu2_of_zeta(m, nu1)
    if r1 == r2:
        p1 = 1.0 - r2
    else:
        p1 = (1.0 - r2) * es / (es + (r1 - r2) * nu1)
    if not (0.0 < p1 <= 1.0) or nu2 < -1e-9 * max(1.0, nu1):
        raise DegenerateModel(f"inconsistent busy-period counts (p1={p1!r}, nu2={nu2!r})")
    p2 = r2 * max(nu2, 0.0) * p1 / es
    return p1, p2


def nu2_of_zeta(m: DamModel, nu1: float) -> float:
    """Expected B2-served customers per busy period.

    Follows from the cycle balance ``nu1 + nu2 = Es + rho1 nu1 + rho2 nu2``.
    """
    es = m.e_sigma
    zeta_mean = m.rho1 - 1.0 + es
    return zeta_mean / (1.0 - m.rho2) - (1.0 - m.rho1) / (1.0 - m.rho2) * (nu1 - 1.0)


def busy_time_parts(m: DamModel, nu1: float) -> tuple[float, float]:
    """Expected B1 and B2 service time per busy period (Wald)."""
    return nu1 * m.b1.mean, nu2_of_zeta(m, nu1) * m.b2.mean


def _departure_probs(m: DamModel, bp: BusyPeriodTable, p1: float) -> np.ndarray:
    """Departure-epoch probabilities ``pi_0..pi_L`` of leaving ``j`` behind."""
    d = np.diff(bp.nu1, prepend=0.0)  # nu_0 - 0, nu_1 - nu_0, ...
    return (p1 / m.e_sigma) * d


def exact_q(m: DamModel, bp: BusyPeriodTable, p1: float | None = None) -> np.ndarray:
    """B1-busy fractions by start level, ``q_1..q_L``."""
    if p1 is None:
        p1, _ = exact_p1_p2(m, bp)
    L = m.level
    pi = _departure_probs(m, bp, p1)
    # service starts at level i: departures leaving i, or a batch of size i into an empty system
    r = np.zeros(L + 1)
    k = min(L, m.batches.size)
    r[1 : k + 1] = m.batches.probs[:k]
    r[L] += m.batches.tail(L)
    starts = pi[1:] + pi[0] * r[1:]
    return np.clip(m.rho1 * starts, 0.0, None)


def occupancy(m: DamModel, bp: BusyPeriodTable, p1: float) -> np.ndarray:
    """``Pr{L_t = i}`` for ``i = 0..L`` by level crossing.

    Down-crossings from ``i+1`` to ``i`` equal departures leaving ``i``; up-
    crossings over the same boundary come from batches arriving at levels
    ``k <= i`` that exceed ``i - k``.
    """
    L = m.level
    pi = _departure_probs(m, bp, p1)
    es = m.e_sigma
    K = m.batches.size
    tail = np.array([m.batches.tail(k) for k in range(K)])  # zero from K on
    occ = np.zeros(L + 1)
    for j in range(L + 1):
        lo = max(0, j - K + 1)
        carry = math.fsum(occ[lo:j] * tail[j - lo : 0 : -1]) if j else 0.0
        occ[j] = es * pi[j] - carry
    return np.clip(occ, 0.0, None)


def stationary(m: DamModel, bp: BusyPeriodTable | None = None, tol: float = DEFAULT_TOL) -> StationaryResult:
    """Exact stationary result for model ``m``."""
    if bp is None:
        bp = busy_period_table(m, tol)
    p1, p2 = exact_p1_p2(m, bp)
    q = exact_q(m, bp, p1)
    nu1 = bp.nu1_L
    t1, t2 = busy_time_parts(m, nu1)
    return StationaryResult(
        level=m.level,
        rho1=m.rho1,
        rho2=m.rho2,
        p1=p1,
        p2=p2,
        q=q,
        nu1_L=nu1,
        nu2_L=nu2_of_zeta(m, nu1),
        zeta1_mean=m.rho1 - 1.0 + m.e_sigma,
        e_sigma=m.e_sigma,
        busy_mean=t1 + t2,
        occupancy=occupancy(m, bp, p1),
    )

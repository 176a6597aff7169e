"""Long-run cost objective and the scalar heavy-traffic control problem.

The finite-threshold objective is ``J = p1 j1 L + p2 j2 L + sum c_i q_i``.
Along ``rho1(L) = 1 + C/L`` it converges to

    G(C) = j1 L p1(C) + j2 L p2(C) + W(C),

where the damage terms come from :func:`largedam.asymptotics.heavy_traffic_p1_p2`
and ``W`` is the limiting water cost: ``psi(C)`` for ``C >= 0`` and
``eta(-C)`` for ``C < 0``.  Both are averages of the cost profile against
the exponential level profile of :func:`largedam.asymptotics.asymp_q_profile`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import integrate, optimize

from .asymptotics import HeavyTrafficParams, heavy_traffic_p1_p2
from .errors import SearchError
from .model import CostProfile, DamModel, LinearCost, TableCost
from .stationary import StationaryResult


@dataclass(frozen=True)
class ObjectiveValue:
    total: float
    damage_lower: float
    damage_upper: float
    water: float


def exact_objective(m: DamModel, st: StationaryResult) -> ObjectiveValue:
    L = m.level
    d1 = st.p1 * m.j1 * L
    d2 = st.p2 * m.j2 * L
    water = math.fsum(m.cost_levels() * st.q)
    return ObjectiveValue(d1 + d2 + water, d1, d2, water)


# --------------------------------------------------------------------------
# limiting water costs
# --------------------------------------------------------------------------


def _mean_u_linear(a: float) -> float:
    """Mean of ``u`` on [0, 1] under the density proportional to ``exp(-a u)``."""
    if abs(a) < 1e-4:
        return 0.5 - a / 12.0 + a**3 / 720.0
    if a > 700:
        return 1.0 / a
    if a < -700:
        return 1.0 + 1.0 / a
    return 1.0 / a - 1.0 / math.expm1(a)


def _tilted_cost(costs: CostProfile, a: float) -> float:
    """``int c(1-u) e^{-a u} du / int e^{-a u} du`` over u in [0, 1]."""
    if costs.is_constant:
        return float(costs.levels(1)[0])
    if isinstance(costs, LinearCost):
        return costs.c_low + (costs.c_high - costs.c_low) * _mean_u_linear(a)
    if isinstance(costs, TableCost):
        n = len(costs.values)
        points = list(np.linspace(0.0, 1.0, n)[1:-1]) if n > 2 else None
    else:
        points = None
    # weight normalized so the integrand stays O(1) for large |a|
    shift = max(0.0, -a)
    w = lambda u: math.exp(-a * u - shift)
    c = lambda u: float(costs.fraction_cost(1.0 - u))
    if abs(a) > 50:
        extra = [min(1.0, 30.0 / abs(a)), max(0.0, 1.0 - 30.0 / abs(a))]
        points = sorted(set((points or []) + extra) - {0.0, 1.0})
    opts = dict(epsabs=1e-12, epsrel=1e-10, limit=400, points=points)
    num, _ = integrate.quad(lambda u: c(u) * w(u), 0.0, 1.0, **opts)
    den, _ = integrate.quad(w, 0.0, 1.0, **opts)
    return num / den


def cost_limit_psi(costs: CostProfile, D: float, kappa: float, e_sigma: float = 1.0) -> float:
    """Water cost limit in the upper regime, ``D = C >= 0``."""
    if D < 0:
        raise ValueError("D must be nonnegative")
    if D == 0:
        return costs.c_star()
    return _tilted_cost(costs, 2.0 * D * e_sigma / kappa)


def cost_limit_eta(costs: CostProfile, D: float, kappa: float, e_sigma: float = 1.0) -> float:
    """Water cost limit in the lower regime, ``D = -C >= 0``."""
    if D < 0:
        raise ValueError("D must be nonnegative")
    if D == 0:
        return costs.c_star()
    return _tilted_cost(costs, -2.0 * D * e_sigma / kappa)


def finite_cost_average(costs: CostProfile, L: int, a: float) -> float:
    """Finite-threshold counterpart: ``sum c_{L-j} x^j / sum x^j`` with ``x = 1 - a/L``."""
    c = costs.levels(L)[::-1]  # c_L, c_{L-1}, ..., c_1
    j = np.arange(L)
    logw = j * math.log1p(-a / L)
    w = np.exp(logw - logw.max())
    return math.fsum(c * w) / math.fsum(w)


# --------------------------------------------------------------------------
# limiting objectives
# --------------------------------------------------------------------------


def _damage(ht: HeavyTrafficParams, rho2: float, j1: float, j2: float) -> float:
    lp1, lp2 = heavy_traffic_p1_p2(ht, rho2)
    return j1 * lp1 + j2 * lp2


def objective_zero(ht: HeavyTrafficParams, rho2: float, j1: float, j2: float, costs: CostProfile) -> float:
    base = ht.base
    return j1 * base + j2 * rho2 / (1.0 - rho2) * base + costs.c_star()


def objective_upper(ht: HeavyTrafficParams, rho2: float, j1: float, j2: float, costs: CostProfile) -> float:
    if not ht.c_param > 0:
        raise ValueError("objective_upper needs C > 0")
    return _damage(ht, rho2, j1, j2) + cost_limit_psi(costs, ht.c_param, ht.kappa, ht.e_sigma)


def objective_lower(ht: HeavyTrafficParams, rho2: float, j1: float, j2: float, costs: CostProfile) -> float:
    if not ht.c_param < 0:
        raise ValueError("objective_lower needs C < 0")
    return _damage(ht, rho2, j1, j2) + cost_limit_eta(costs, -ht.c_param, ht.kappa, ht.e_sigma)


def nocost_objective(C: float, j1: float, j2: float, rho2: float, kappa: float, e_sigma: float = 1.0) -> float:
    """Damage part of the limiting objective alone."""
    return _damage(HeavyTrafficParams(C, kappa, float("nan"), e_sigma), rho2, j1, j2)


def nocost_stationarity_equation(
    C: float, j1: float, j2: float, rho2: float, kappa: float, e_sigma: float = 1.0
) -> float:
    """``(e^a - 1) dJ*/da`` in units of ``kappa/(2 Es)``, with ``a = 2 C Es / kappa``.

    Equals ``j1 [1 - a e^a/(e^a-1)] + k e^a [1 - a/(e^a-1)]`` where
    ``k = j2 rho2/(1-rho2)``; its positive root is the no-cost optimum.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    a = 2.0 * C * e_sigma / kappa
    k = j2 * rho2 / (1.0 - rho2)
    em1 = math.expm1(a)
    return j1 * (1.0 - a * (em1 + 1.0) / em1) + k * (em1 + 1.0) * (1.0 - a / em1)


# --------------------------------------------------------------------------
# control problem
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlProblem:
    """Everything the limiting objective needs; B1's mean is the decision."""

    rho2: float
    j1: float
    j2: float
    costs: CostProfile
    rho12_limit: float = 1.0
    e_sigma: float = 1.0
    e_sigma2: float = 1.0

    def __post_init__(self):
        if not self.rho2 < 1:
            raise ValueError("rho2 must be < 1")

    @property
    def kappa(self) -> float:
        return self.rho12_limit * self.e_sigma**3 + self.e_sigma2 - self.e_sigma

    def ht(self, C: float) -> HeavyTrafficParams:
        return HeavyTrafficParams(C, self.kappa, self.rho12_limit, self.e_sigma)

    @classmethod
    def from_model(cls, m: DamModel, rho12_limit: float | None = None) -> "ControlProblem":
        return cls(
            m.rho2, m.j1, m.j2, m.costs,
            m.rho12 if rho12_limit is None else rho12_limit,
            m.e_sigma, m.batches.moment(2),
        )

    def with_j2(self, j2: float) -> "ControlProblem":
        return replace(self, j2=j2)


def limiting_objective(p: ControlProblem, C: float) -> float:
    """Piecewise ``G(C)``: upper for ``C > 0``, zero at 0, lower for ``C < 0``."""
    ht = p.ht(C)
    if C > 0:
        return objective_upper(ht, p.rho2, p.j1, p.j2, p.costs)
    if C < 0:
        return objective_lower(ht, p.rho2, p.j1, p.j2, p.costs)
    return objective_zero(ht, p.rho2, p.j1, p.j2, p.costs)


@dataclass(frozen=True)
class ControlSolution:
    c_opt: float
    regime: Literal["upper", "lower", "critical"]
    objective: float
    trace: tuple[tuple[float, float], ...] = field(repr=False, default=())

    def to_record(self) -> dict:
        return {
            "c_opt": self.c_opt,
            "regime": self.regime,
            "objective": self.objective,
            "trace": [list(t) for t in self.trace],
        }

    @classmethod
    def from_record(cls, d: dict) -> "ControlSolution":
        return cls(float(d["c_opt"]), d["regime"], float(d["objective"]),
                   tuple((float(a), float(b)) for a, b in d.get("trace", ())))


def _regime(c: float) -> Literal["upper", "lower", "critical"]:
    return "critical" if c == 0 else ("upper" if c > 0 else "lower")


def optimize_control(
    p: ControlProblem, c_min: float = -10.0, c_max: float = 10.0, tol: float = 1e-6
) -> ControlSolution:
    """Minimize ``G`` over ``[c_min, c_max]`` with a bounded Brent search."""
    if not c_min < 0 < c_max:
        raise ValueError("the search interval must contain 0 in its interior")
    trace: list[tuple[float, float]] = []

    def g(c: float) -> float:
        v = limiting_objective(p, float(c))
        trace.append((float(c), v))
        return v

    res = optimize.minimize_scalar(g, bounds=(c_min, c_max), method="bounded", options={"xatol": tol})
    c = float(res.x)
    for edge, step in ((c_min, tol), (c_max, -tol)):
        if abs(c - edge) < 10 * tol and g(edge) < g(edge + step):
            raise SearchError(f"objective still decreasing at the bracket edge C={edge:g}")
    # the zero regime is a single point; snap when the search lands on it
    if abs(c) <= 2 * tol and g(0.0) <= g(c):
        c = 0.0
    val = g(c)
    best_c, best_v = min(trace, key=lambda t: t[1])
    if best_v < val:
        c, val = best_c, best_v
    k = p.j2 * p.rho2 / (1.0 - p.rho2)
    if p.j1 > k and not c > 0:
        raise SearchError(f"expected a positive optimum since j1 > j2 rho2/(1-rho2), got C={c:g}")
    return ControlSolution(c, _regime(c), val, tuple(trace))


@dataclass(frozen=True)
class SweepRow:
    value: float
    c_opt: float
    objective: float
    regime: str
    diff: float | None
    param: str = "j2"

    @property
    def j2(self) -> float:
        return self.value


SWEEPABLE = ("j1", "j2", "rho2", "rho12_limit")


def sweep(
    p: ControlProblem,
    param: str,
    values: Iterable[float],
    c_min: float = -10.0,
    c_max: float = 10.0,
    tol: float = 1e-6,
    workers: int = 1,
) -> list[SweepRow]:
    """Optimize along a grid of one scalar; ``diff`` is ``C(previous row) - C(this row)``."""
    if param not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param!r}; choose one of {', '.join(SWEEPABLE)}")
    grid = [float(x) for x in values]
    run = lambda v: optimize_control(replace(p, **{param: v}), c_min, c_max, tol)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            sols = list(ex.map(run, grid))
    else:
        sols = [run(v) for v in grid]
    rows = []
    for i, (v, s) in enumerate(zip(grid, sols)):
        diff = None if i == 0 else sols[i - 1].c_opt - s.c_opt
        rows.append(SweepRow(v, s.c_opt, s.objective, s.regime, diff, param))
    return rows


def sweep_j2(p: ControlProblem, j2_values: Iterable[float], **kw) -> list[SweepRow]:
    return sweep(p, "j2", j2_values, **kw)


def reference_problem() -> ControlProblem:
    """The reference configuration: Poisson input, linear costs from 2 down to 1."""
    return ControlProblem(rho2=0.5, j1=1.0, j2=1.06, costs=LinearCost(2.0, 1.0),
                          rho12_limit=1.0, e_sigma=1.0, e_sigma2=1.0)


REFERENCE_J2: Sequence[float] = tuple(round(1.06 + 0.02 * i, 2) for i in range(15))


__all__ = [
    "ControlProblem",
    "ControlSolution",
    "ObjectiveValue",
    "SweepRow",
    "REFERENCE_J2",
    "cost_limit_eta",
    "cost_limit_psi",
    "exact_objective",
    "finite_cost_average",
    "limiting_objective",
    "nocost_objective",
    "nocost_stationarity_equation",
    "objective_lower",
    "objective_upper",
    "objective_zero",
    "optimize_control",
    "sweep",
    "sweep_j2",
    "reference_problem",
]

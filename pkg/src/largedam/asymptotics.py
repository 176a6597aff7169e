"""Large-threshold asymptotics.

Root solvers for ``z = B1(lam - lam R(z))`` on either side of 1, the limits
of the busy-period recurrence, the fixed-load limits of ``p1`` and ``p2``,
and the heavy-traffic family ``rho1(L) = 1 + C/L``.  Heavy-traffic results
are returned in L-scaled form (``L p1``, ``L p2``, ``L q_{L-j}``); each is
one analytic function of ``C`` and ``C = 0`` is a removable singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from scipy import optimize

from .errors import DomainError, NoRoot, RegimeError
from .model import DamModel

Regime = Literal["below", "critical", "above"]
NEAR_CRITICAL = 1e-6
ZERO_C = 1e-8


@dataclass(frozen=True)
class HeavyTrafficParams:
    """``C = lim L (rho1(L) - 1)`` together with the moments that scale it."""

    c_param: float
    denom: float
    rho12_limit: float
    e_sigma: float = 1.0

    def __post_init__(self):
        if not self.denom > 0:
            raise ValueError(f"kappa must be positive, got {self.denom!r}")

    @classmethod
    def from_moments(cls, c_param: float, rho12: float, e_sigma: float, e_sigma2: float):
        kappa = rho12 * e_sigma**3 + e_sigma2 - e_sigma
        return cls(c_param, kappa, rho12, e_sigma)

    @classmethod
    def from_model(cls, m: DamModel, c_param: float | None = None):
        if c_param is None:
            c_param = m.level * (m.rho1 - 1.0)
        return cls.from_moments(c_param, m.rho12, m.e_sigma, m.batches.moment(2))

    @property
    def kappa(self) -> float:
        return self.denom

    @property
    def alpha(self) -> float:
        """``2 C Es / kappa``."""
        return 2.0 * self.c_param * self.e_sigma / self.denom

    @property
    def base(self) -> float:
        """``kappa / (2 Es)``, the critical-regime value of ``L p1``."""
        return self.denom / (2.0 * self.e_sigma)

    def with_c(self, c_param: float) -> "HeavyTrafficParams":
        return HeavyTrafficParams(c_param, self.denom, self.rho12_limit, self.e_sigma)


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    iterations: int
    method: str = "bracket+newton"


# --------------------------------------------------------------------------
# roots of z = B1(lam - lam R(z))
# --------------------------------------------------------------------------


def _u(m: DamModel, z: float) -> float:
    return m.b1.lst(m.lam - m.lam * m.batches.pgf(z))


def _u_prime(m: DamModel, z: float) -> float:
    s = m.lam - m.lam * m.batches.pgf(z)
    return -m.lam * m.batches.pgf_deriv(z) * m.b1.lst_deriv(s)


def _polish(m: DamModel, z: float, lo: float, hi: float, steps: int = 4) -> tuple[float, int]:
    it = 0
    for _ in range(steps):
        g = _u(m, z) - z
        dg = _u_prime(m, z) - 1.0
        if dg == 0 or g == 0:
            break
        nz = z - g / dg
        if not lo <= nz <= hi:
            break
        it += 1
        if nz == z:
            break
        z = nz
    return z, it


def _expansion_root(m: DamModel, sign: float) -> RootResult:
    delta = abs(m.rho1 - 1.0)
    z = 1.0 + sign * 2.0 * delta * m.e_sigma / m.kappa
    return RootResult(z, abs(_u(m, z) - z), 0, "expansion")


def solve_phi(m: DamModel) -> RootResult:
    """Least positive root below 1 (requires ``rho1 > 1``)."""
    if abs(m.rho1 - 1.0) < NEAR_CRITICAL and m.rho1 > 1.0:
        return _expansion_root(m, -1.0)
    lo = m.b1.lst(m.lam)  # f_0 <= phi since phi = U(phi) >= U(0)
    hi = 1.0 - 1e-9
    g = lambda z: _u(m, z) - z
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 and ghi < 0):
        raise NoRoot(f"no sign change for phi on [{lo:.3g}, {hi}] (rho1={m.rho1:.6g})")
    z, info = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, full_output=True)
    z, extra = _polish(m, z, lo, hi)
    return RootResult(z, abs(g(z)), info.iterations + extra)


def solve_tau(m: DamModel, z_max: float = 1e6) -> RootResult:
    """Root above 1 (requires ``rho1 < 1`` and an LST analytic past 0)."""
    if m.rho1 >= 1.0:
        raise NoRoot(f"tau needs rho1 < 1, got {m.rho1:.6g}")
    if abs(m.rho1 - 1.0) < NEAR_CRITICAL:
        return _expansion_root(m, 1.0)
    g = lambda z: _u(m, z) - z
    # the transform argument lam - lam R(z) reaches the strip edge at z_edge
    z_edge = math.inf
    if math.isfinite(m.b1.strip):
        edge = lambda z: m.lam - m.lam * m.batches.pgf(z) - m.b1.strip
        hi = 2.0
        while edge(hi) > 0:
            hi *= 2.0
        z_edge = optimize.brentq(edge, 1.0, hi, xtol=1e-15, rtol=1e-15)
    h = 1e-6
    lo = 1.0
    while True:
        z = 1.0 + h
        if z >= z_edge:
            # approach the edge by halving; the root may sit right below it
            if z_edge - lo < 1e-12 * z_edge:
                raise DomainError(
                    f"LST leaves its strip at z={z_edge:.6g} before the tau root (rho1={m.rho1:.6g})",
                    module="asymptotics",
                )
            z = 0.5 * (lo + z_edge)
        if z > z_max:
            raise NoRoot(f"no sign change for tau in (1, {z_max:g}]")
        if g(z) > 0:
            break
        lo = z
        h *= 2.0
    z, info = optimize.brentq(g, lo, z, xtol=1e-15, rtol=1e-15, full_output=True)
    z, extra = _polish(m, z, 1.0, math.inf)
    return RootResult(z, abs(g(z)), info.iterations + extra)


# --------------------------------------------------------------------------
# limits of the recurrence and of p1, p2 at fixed load
# --------------------------------------------------------------------------


def regime_of(m: DamModel, tol: float = 1e-12) -> Regime:
    if abs(m.rho1 - 1.0) <= tol:
        return "critical"
    return "below" if m.rho1 < 1.0 else "above"


@dataclass(frozen=True)
class TakacsLimit:
    regime: Regime
    value: float
    phi: float | None = None

    def describe(self) -> str:
        if self.regime == "below":
            return f"limit {self.value:.12g}"
        if self.regime == "critical":
            return f"successive differences -> {self.value:.12g}"
        return f"Q_n phi^n -> {self.value:.12g} with phi = {self.phi:.12g}"


def takacs_limit(m: DamModel, regime: Regime | None = None) -> TakacsLimit:
    """Limiting behaviour of ``Q_n`` as ``n -> inf``.

    below: the limit ``1/(1-rho1)``; critical: the limit of ``Q_{n+1}-Q_n``,
    ``2 Es / kappa``; above: the amplitude ``lim Q_n phi^n``.
    """
    regime = regime or regime_of(m)
    if regime == "below":
        if m.rho1 >= 1:
            raise RegimeError("below regime needs rho1 < 1")
        return TakacsLimit("below", 1.0 / (1.0 - m.rho1))
    if regime == "critical":
        if not math.isfinite(m.kappa):
            raise RegimeError("critical regime needs finite second moments")
        return TakacsLimit("critical", 2.0 * m.e_sigma / m.kappa)
    if m.rho1 <= 1:
        raise RegimeError("above regime needs rho1 > 1")
    phi = solve_phi(m).root
    return TakacsLimit("above", 1.0 / (1.0 - _u_prime(m, phi)), phi)


@dataclass(frozen=True)
class AsymptoticP1P2:
    """Fixed-load limits.

    below: ``p1``, ``p2`` limits.  critical: ``L p1`` and ``L p2`` limits.
    above: ``p1 ~ p1_amplitude * phi**L`` and the ``p2`` limit.
    """

    regime: Regime
    p1: float
    p2: float
    phi: float | None = None
    p1_amplitude: float | None = None

    def p1_at(self, L: int) -> float:
        if self.regime == "below":
            return self.p1
        if self.regime == "critical":
            return self.p1 / L
        return self.p1_amplitude * self.phi**L


def asymp_p1_p2(m: DamModel, regime: Regime | None = None) -> AsymptoticP1P2:
    actual = regime_of(m)
    regime = regime or actual
    if regime != actual:
        raise RegimeError(f"regime {regime!r} does not match rho1={m.rho1:.6g}")
    r1, r2, es = m.rho1, m.rho2, m.e_sigma
    if regime == "below":
        return AsymptoticP1P2("below", 1.0 - r1, 0.0)
    if regime == "critical":
        base = m.kappa / (2.0 * es)
        return AsymptoticP1P2("critical", base, r2 / (1.0 - r2) * base)
    lim = takacs_limit(m, "above")
    phi = lim.phi
    # nu_L(zeta1) ~ A phi^{-L} (1 - E phi^zeta1)/(1 - phi) and E phi^zeta1 = R(phi)
    amp = (1.0 - r2) * es * (1.0 - phi) / ((r1 - r2) * lim.value * (1.0 - m.batches.pgf(phi)))
    return AsymptoticP1P2("above", 0.0, r2 * (r1 - 1.0) / (r1 - r2), phi, amp)


def stated_p1_amplitude(m: DamModel) -> float:
    """Amplitude ``(1-rho2)(1 + lam B1'(.) R'(phi)) / (rho1 - rho2)`` without the batch factor.

    Coincides with :func:`asymp_p1_p2` for single arrivals only.
    """
    lim = takacs_limit(m, "above")
    return (1.0 - m.rho2) / ((m.rho1 - m.rho2) * lim.value)


# --------------------------------------------------------------------------
# heavy traffic
# --------------------------------------------------------------------------


def _x_over_expm1(x: float) -> float:
    """``x / (e^x - 1)`` with the removable point at 0."""
    if abs(x) < 1e-12:
        return 1.0 - 0.5 * x
    if x > 700:
        return x * math.exp(-x)
    return x / math.expm1(x)


def _x_exp_over_expm1(x: float) -> float:
    """``x e^x / (e^x - 1) = x / (1 - e^{-x})``."""
    return _x_over_expm1(-x)


def heavy_traffic_p1_p2(ht: HeavyTrafficParams, rho2: float) -> tuple[float, float]:
    """``(L p1, L p2)`` limits for ``rho1(L) = 1 + C/L``.

    ``L p1 = C / (e^a - 1)`` and ``L p2 = rho2/(1-rho2) C e^a / (e^a - 1)`` with
    ``a = 2 C Es / kappa``, for either sign of ``C``.
    """
    if not rho2 < 1:
        raise ValueError("rho2 must be < 1")
    base, a = ht.base, ht.alpha
    k = rho2 / (1.0 - rho2)
    if abs(ht.c_param) < ZERO_C:
        return base, k * base
    return base * _x_over_expm1(a), k * base * _x_exp_over_expm1(a)


def heavy_traffic_finite_L(ht: HeavyTrafficParams, rho2: float, L: int) -> tuple[float, float]:
    """Heavy-traffic prediction of ``(p1, p2)`` at a concrete threshold."""
    lp1, lp2 = heavy_traffic_p1_p2(ht, rho2)
    return lp1 / L, lp2 / L


def asymp_q_profile(
    ht: HeavyTrafficParams,
    j: int,
    L: int | None = None,
    regime: Literal["critical", "upper", "lower"] | None = None,
) -> float:
    """``L q_{L-j}`` in the limit with ``j/L`` fixed.

    upper (``C > 0``): ``a e^a / (e^a - 1) * exp(-a j/L)``;
    lower (``C < 0``): ``b / (e^b - 1) * exp(b j/L)`` with ``b = -a``;
    critical: 1.  Without ``L`` the profile is evaluated at ``j/L -> 0``.
    """
    if j < 0:
        raise ValueError("j must be nonnegative")
    c = ht.c_param
    if regime is None:
        regime = "critical" if abs(c) < ZERO_C else ("upper" if c > 0 else "lower")
    if regime == "critical" or abs(c) < ZERO_C:
        return 1.0
    if (regime == "upper") != (c > 0):
        raise RegimeError(f"regime {regime!r} inconsistent with C={c!r}")
    u = 0.0 if L is None else j / L
    a = ht.alpha
    if regime == "upper":
        return _x_exp_over_expm1(a) * math.exp(-a * u)
    b = -a
    return _x_over_expm1(b) * math.exp(b * u)


def model_for_c(base: DamModel, c_param: float, L: int) -> DamModel:
    """``base`` at threshold ``L`` with B1 rescaled to ``rho1 = 1 + C/L``."""
    return base.with_level(L).with_rho1(1.0 + c_param / L)


def phi_expansion(m: DamModel) -> float:
    return 1.0 - 2.0 * abs(m.rho1 - 1.0) * m.e_sigma / m.kappa


def tau_expansion(m: DamModel) -> float:
    return 1.0 + 2.0 * abs(m.rho1 - 1.0) * m.e_sigma / m.kappa


__all__ = [
    "AsymptoticP1P2",
    "HeavyTrafficParams",
    "RootResult",
    "TakacsLimit",
    "asymp_p1_p2",
    "asymp_q_profile",
    "heavy_traffic_finite_L",
    "heavy_traffic_p1_p2",
    "model_for_c",
    "phi_expansion",
    "regime_of",
    "solve_phi",
    "solve_tau",
    "stated_p1_amplitude",
    "takacs_limit",
    "tau_expansion",
]

from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import mm_model

from largedam import (
    BatchDistribution,
    DamModel,
    Erlang,
    Exponential,
    HeavyTrafficParams,
    arrival_count_coeffs,
    asymp_p1_p2,
    asymp_q_profile,
    heavy_traffic_p1_p2,
    regime_of,
    solve_phi,
    solve_takacs_recurrence,
    solve_tau,
    stationary,
    takacs_limit,
)
from largedam.asymptotics import model_for_c, phi_expansion, stated_p1_amplitude, tau_expansion
from largedam.errors import DomainError, NoRoot, RegimeError

BATCH = BatchDistribution([0.5, 0.3, 0.2])


def batch_model(rho1: float, L: int = 10, b1=None) -> DamModel:
    lam = 0.5
    b1 = b1 or Erlang(2, 1.0)
    m = DamModel(lam, BATCH, b1, Exponential(2.0 * lam * BATCH.mean), L)
    return m.with_rho1(rho1)


@pytest.mark.parametrize("rho", [1.1, 1.5, 3.0])
def test_phi_is_inverse_load_for_mm1(rho):
    # [DERIVED] z = mu / (mu + lam - lam z) has roots 1 and mu / lam
    m = mm_model(lam=rho, mu1=1.0, mu2=4.0 * rho, L=3)
    r = solve_phi(m)
    assert abs(r.root - 1.0 / rho) < 1e-12
    assert r.residual < 1e-14


@pytest.mark.parametrize("rho", [0.3, 0.7, 0.95])
def test_tau_is_inverse_load_for_mm1(rho):
    m = mm_model(lam=rho, mu1=1.0, mu2=2.0, L=3)
    assert abs(solve_tau(m).root - 1.0 / rho) < 1e-12


def test_roots_solve_fixed_point_for_batches():
    for rho in (0.6, 1.4):
        m = batch_model(rho)
        r = solve_tau(m) if rho < 1 else solve_phi(m)
        u = m.b1.lst(m.lam - m.lam * m.batches.pgf(r.root))
        assert abs(u - r.root) < 1e-13
        assert (r.root > 1) == (rho < 1)


def test_phi_wrong_regime_raises():
    with pytest.raises(NoRoot):
        solve_phi(mm_model(lam=0.5))
    with pytest.raises(NoRoot):
        solve_tau(mm_model(lam=1.5, mu2=4.0))


def test_tau_leaves_strip():
    # exponential B1: the strip ends before the root when arrivals come in large batches
    m = DamModel(0.2, BatchDistribution([0.0, 0.0, 0.0, 1.0]), Exponential(1.0), Exponential(4.0), 3)
    try:
        r = solve_tau(m)
    except DomainError:
        return
    assert m.lam - m.lam * m.batches.pgf(r.root) > m.b1.strip


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_root_expansions(sign):
    # (1 - phi) kappa / (2 delta Es) and (tau - 1) kappa / (2 delta Es) are 1 + O(delta)
    errs = []
    for delta in (1e-2, 1e-3, 1e-4):
        m = batch_model(1.0 + sign * delta)
        if sign > 0:
            ratio = (1.0 - solve_phi(m).root) * m.kappa / (2 * delta * m.e_sigma)
        else:
            ratio = (solve_tau(m).root - 1.0) * m.kappa / (2 * delta * m.e_sigma)
        errs.append(abs(ratio - 1.0))
        assert errs[-1] < 5 * delta
    assert errs[0] > errs[1] > errs[2]


def test_expansion_helpers_near_critical():
    m = batch_model(1.0 + 1e-8)
    assert solve_phi(m).root == pytest.approx(phi_expansion(m), abs=1e-14)
    m = batch_model(1.0 - 1e-8)
    assert solve_tau(m).root == pytest.approx(tau_expansion(m), abs=1e-14)


def test_tau_is_geometric_rate_of_subcritical_recurrence():
    m = batch_model(0.8)
    q = solve_takacs_recurrence(arrival_count_coeffs(m), 1.0, 120)
    gap = takacs_limit(m).value - q
    rate = gap[61] / gap[60]
    assert rate == pytest.approx(1.0 / solve_tau(m).root, rel=0.05)


def test_regime_and_takacs_limit():
    assert regime_of(batch_model(0.5)) == "below"
    assert regime_of(batch_model(1.0)) == "critical"
    assert regime_of(batch_model(1.5)) == "above"
    with pytest.raises(RegimeError):
        takacs_limit(batch_model(0.5), "above")
    assert "phi" in takacs_limit(batch_model(1.5)).describe()


def test_fixed_subcritical_load():
    m = mm_model(lam=0.5, mu1=1.0, mu2=2.0, L=200)
    a = asymp_p1_p2(m)
    assert a.p1 == 0.5 and a.p2 == 0.0
    assert abs(stationary(m).p1 - a.p1) < 1e-3


def test_critical_load_scaling():
    m = batch_model(1.0, L=800)
    a = asymp_p1_p2(m)
    s = stationary(m)
    assert m.level * s.p1 == pytest.approx(a.p1, rel=0.05)
    assert m.level * s.p2 == pytest.approx(a.p2, rel=0.05)


@pytest.mark.parametrize("batch", [(1.0,), (0.5, 0.3, 0.2)])
def test_supercritical_amplitude(batch):
    b = BatchDistribution(batch)
    m = DamModel(0.5, b, Exponential(0.5 * b.mean / 1.3), Exponential(2.0), 200)
    a = asymp_p1_p2(m)
    s = stationary(m)
    assert s.p1 == pytest.approx(a.p1_at(200), rel=1e-10)
    assert s.p2 == pytest.approx(a.p2, rel=1e-6)
    if len(batch) == 1:
        assert stated_p1_amplitude(m) == pytest.approx(a.p1_amplitude, rel=1e-12)
    else:
        assert stated_p1_amplitude(m) != pytest.approx(a.p1_amplitude, rel=0.05)


def test_heavy_traffic_zero_is_continuous():
    ht = HeavyTrafficParams.from_moments(0.0, 1.0, 1.7, 3.5)
    z = heavy_traffic_p1_p2(ht, 0.4)
    for c in (1e-7, -1e-7):
        v = heavy_traffic_p1_p2(ht.with_c(c), 0.4)
        assert v[0] == pytest.approx(z[0], rel=1e-6)
        assert v[1] == pytest.approx(z[1], rel=1e-6)


@pytest.mark.parametrize("C", [1.0, 0.5, -0.5, -1.0])
@pytest.mark.parametrize("batch", [(1.0,), (0.5, 0.3, 0.2)])
def test_heavy_traffic_monotone_convergence(C, batch):
    b = BatchDistribution(batch)
    base = DamModel(1.0, b, Erlang(2, 2.0 * b.mean), Exponential(4.0 * b.mean), 10)
    ht = HeavyTrafficParams.from_moments(C, base.rho12, b.mean, b.moment(2))
    lp1, lp2 = heavy_traffic_p1_p2(ht, base.rho2)
    errs1, errs2 = [], []
    for L in (100, 200, 400, 800):
        s = stationary(model_for_c(base, C, L))
        errs1.append(abs(L * s.p1 - lp1))
        errs2.append(abs(L * s.p2 - lp2))
    assert all(a > b for a, b in zip(errs1, errs1[1:]))
    assert errs1[-1] < 0.02 * lp1
    assert errs2[-1] < 0.02 * lp2


def test_heavy_traffic_poisson_c_one():
    # exponential B1 at rho1 -> 1 gives rho12 = 2, so kappa = 2 and L p1 -> 1 / (e - 1)
    base = mm_model(lam=1.0, mu1=1.0, mu2=2.0, L=10)
    ht = HeavyTrafficParams.from_moments(1.0, 2.0, 1.0, 1.0)
    assert ht.kappa == 2.0
    lp1, _ = heavy_traffic_p1_p2(ht, base.rho2)
    assert lp1 == pytest.approx(1.0 / (math.e - 1.0), rel=1e-14)
    s = stationary(model_for_c(base, 1.0, 800))
    assert 800 * s.p1 == pytest.approx(lp1, rel=0.05)


@pytest.mark.parametrize("C", [1.5, -1.5])
def test_q_profile(C):
    base = mm_model(lam=1.0, mu1=1.0, mu2=2.0, L=10)
    L = 800
    s = stationary(model_for_c(base, C, L))
    ht = HeavyTrafficParams.from_moments(C, 2.0, 1.0, 1.0)
    for j in (100, 400, 700):
        assert L * s.q[L - j - 1] == pytest.approx(asymp_q_profile(ht, j, L), rel=0.03)
    us = np.linspace(0, 1, 2001)
    prof = [asymp_q_profile(ht, int(round(u * 10**6)), 10**6) for u in us]
    from scipy.integrate import trapezoid

    assert trapezoid(prof, us) == pytest.approx(1.0, abs=1e-6)


def test_q_profile_regime_check():
    ht = HeavyTrafficParams.from_moments(1.0, 1.0, 1.0, 1.0)
    assert asymp_q_profile(ht.with_c(0.0), 5, 10) == 1.0
    with pytest.raises(RegimeError):
        asymp_q_profile(ht, 3, 10, regime="lower")
    with pytest.raises(ValueError):
        asymp_q_profile(ht, -1, 10)

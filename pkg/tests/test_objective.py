from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from largedam import (
    BatchDistribution,
    ConstantCost,
    ControlProblem,
    ControlSolution,
    DamModel,
    Deterministic,
    Exponential,
    LinearCost,
    TableCost,
    cost_limit_eta,
    cost_limit_psi,
    exact_objective,
    limiting_objective,
    optimize_control,
    stationary,
    sweep,
)
from largedam.errors import SearchError
from largedam.objective import (
    REFERENCE_J2,
    finite_cost_average,
    nocost_objective,
    nocost_stationarity_equation,
    reference_problem,
)

LIN = LinearCost(2.0, 1.0)
DGRID = np.linspace(0.0, 5.0, 51)


@pytest.mark.parametrize("costs", [LIN, TableCost((3.0, 2.5, 1.0, 0.8))], ids=["linear", "table"])
def test_psi_eta_at_zero_are_cesaro_mean(costs):
    assert cost_limit_psi(costs, 0.0, 1.0) == costs.c_star()
    assert cost_limit_eta(costs, 0.0, 1.0) == costs.c_star()
    # and the limits from the right agree
    assert cost_limit_psi(costs, 1e-7, 1.0) == pytest.approx(costs.c_star(), abs=1e-6)
    assert cost_limit_eta(costs, 1e-7, 1.0) == pytest.approx(costs.c_star(), abs=1e-6)


def test_linear_cesaro_mean_is_midpoint():
    assert LIN.c_star() == 1.5
    L = 10**5
    assert math.fsum(LIN.levels(L)) / L == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 3.0])
def test_psi_decreasing_convex_eta_increasing(kappa):
    psi = np.array([cost_limit_psi(LIN, d, kappa) for d in DGRID])
    eta = np.array([cost_limit_eta(LIN, d, kappa) for d in DGRID])
    assert np.all(np.diff(psi) < 0)
    assert np.all(np.diff(psi, 2) > 0)
    assert np.all(np.diff(eta) > 0)


def test_table_profile_shapes():
    costs = TableCost((3.0, 2.5, 1.0, 0.8))
    psi = np.array([cost_limit_psi(costs, d, 1.0) for d in DGRID])
    eta = np.array([cost_limit_eta(costs, d, 1.0) for d in DGRID])
    assert np.all(np.diff(psi) < 0)
    assert np.all(np.diff(eta) > 0)


@pytest.mark.parametrize("D", [0.05, 0.5, 2.0, 5.0])
def test_linear_closed_form_against_finite_sums(D):
    # [DERIVED] x = 1 -/+ a/L with q_{L-j} proportional to x^j, summed exactly at L = 1e5
    L = 10**5
    a = 2.0 * D
    assert abs(cost_limit_psi(LIN, D, 1.0) - finite_cost_average(LIN, L, a)) < 1e-4
    assert abs(cost_limit_eta(LIN, D, 1.0) - finite_cost_average(LIN, L, -a)) < 1e-4


def test_quadrature_path_matches_closed_form():
    # a two-point table is the linear profile; it goes through numerical integration
    table = TableCost((2.0, 1.0))
    for D in (0.01, 0.7, 4.0, 40.0):
        assert cost_limit_psi(table, D, 1.0) == pytest.approx(cost_limit_psi(LIN, D, 1.0), abs=1e-10)
        assert cost_limit_eta(table, D, 1.0) == pytest.approx(cost_limit_eta(LIN, D, 1.0), abs=1e-10)


def test_negative_d_rejected():
    with pytest.raises(ValueError):
        cost_limit_psi(LIN, -1.0, 1.0)
    with pytest.raises(ValueError):
        cost_limit_eta(LIN, -1.0, 1.0)


@pytest.mark.parametrize("costs", [LIN, ConstantCost(1.0), TableCost((3.0, 2.5, 1.0, 0.8))], ids=str)
@pytest.mark.parametrize("j2", [0.5, 1.2, 3.0])
def test_objective_continuous_at_zero(costs, j2):
    p = ControlProblem(0.5, 1.0, j2, costs, rho12_limit=1.3, e_sigma=1.7, e_sigma2=3.5)
    g0 = limiting_objective(p, 0.0)
    for c in (1e-9, -1e-9):
        assert abs(limiting_objective(p, c) - g0) < 1e-8


def test_constant_costs_balanced_damage_gives_zero():
    rho2, j2 = 0.5, 1.3
    p = ControlProblem(rho2, j2 * rho2 / (1 - rho2), j2, ConstantCost(1.0))
    sol = optimize_control(p)
    assert abs(sol.c_opt) <= 1e-3


@pytest.mark.parametrize("excess", [0.01, 0.3, 2.0])
def test_positive_optimum_when_lower_damage_dominates(excess):
    rho2, j2 = 0.4, 1.0
    k = j2 * rho2 / (1 - rho2)
    sol = optimize_control(ControlProblem(rho2, k + excess, j2, ConstantCost(0.0)))
    assert sol.c_opt > 0 and sol.regime == "upper"


def test_negative_optimum_when_upper_damage_dominates():
    sol = optimize_control(ControlProblem(0.5, 1.0, 3.0, ConstantCost(0.0)))
    assert sol.c_opt < 0 and sol.regime == "lower"


def test_limiting_objective_convex():
    p = reference_problem()
    cs = np.linspace(-3.0, 3.0, 601)
    g = np.array([limiting_objective(p, c) for c in cs])
    assert np.all(np.diff(g, 2) > -1e-10)


@settings(max_examples=25, deadline=None)
@given(lo=st.floats(-9.0, -0.1), hi=st.floats(0.1, 9.0), j2=st.floats(1.0, 1.5))
def test_optimum_independent_of_bracket(lo, hi, j2):
    p = reference_problem().with_j2(j2)
    ref = optimize_control(p).c_opt
    try:
        c = optimize_control(p, lo, hi, tol=1e-8).c_opt
    except SearchError:
        assert not lo < ref < hi
        return
    assert c == pytest.approx(ref, abs=1e-5)


def test_search_error_at_bracket_edge():
    p = ControlProblem(0.5, 5.0, 0.1, ConstantCost(0.0))
    with pytest.raises(SearchError):
        optimize_control(p, -1.0, 0.05)


@pytest.mark.parametrize("j1,j2,rho2", [(1.0, 0.5, 0.5), (2.0, 1.0, 0.3), (1.0, 0.1, 0.8)])
def test_nocost_root_against_grid(j1, j2, rho2):
    kappa = 1.0
    root = optimize.brentq(lambda c: nocost_stationarity_equation(c, j1, j2, rho2, kappa), 1e-6, 50.0)
    grid = np.linspace(1e-3, 20.0, 200001)
    vals = [nocost_objective(c, j1, j2, rho2, kappa) for c in grid[::100]]
    coarse = grid[::100][int(np.argmin(vals))]
    fine = np.linspace(coarse - 0.01, coarse + 0.01, 20001)
    best = fine[int(np.argmin([nocost_objective(c, j1, j2, rho2, kappa) for c in fine]))]
    assert root == pytest.approx(best, abs=2e-6)
    sol = optimize_control(ControlProblem(rho2, j1, j2, ConstantCost(0.0)), tol=1e-9)
    assert sol.c_opt == pytest.approx(root, abs=1e-5)


def test_stationarity_equation_is_scaled_derivative():
    j1, j2, rho2, kappa = 1.0, 0.7, 0.5, 1.4
    for c in (0.1, 0.8, 3.0):
        a = 2 * c / kappa
        h = 1e-6
        da = (nocost_objective(c + h, j1, j2, rho2, kappa) - nocost_objective(c - h, j1, j2, rho2, kappa)) / (2 * h)
        da *= kappa / 2  # dC -> da
        expected = da * math.expm1(a) / (kappa / 2)
        assert nocost_stationarity_equation(c, j1, j2, rho2, kappa) == pytest.approx(expected, rel=1e-6)


def test_stationarity_equation_vanishes_at_zero_from_the_right():
    assert abs(nocost_stationarity_equation(1e-7, 1.0, 2.0, 0.5, 1.0)) < 1e-6


def test_sweep_ordering_and_diffs():
    rows = sweep(reference_problem(), "j2", REFERENCE_J2, workers=4)
    assert [r.value for r in rows] == list(REFERENCE_J2)
    serial = sweep(reference_problem(), "j2", REFERENCE_J2)
    assert [r.c_opt for r in rows] == [r.c_opt for r in serial]
    assert rows[0].diff is None
    for a, b in zip(rows, rows[1:]):
        assert b.diff == pytest.approx(a.c_opt - b.c_opt)
    with pytest.raises(ValueError):
        sweep(reference_problem(), "level", [1, 2])


def test_zero_crossing_of_table_configuration():
    # with kappa = 1 and linear costs 2 -> 1 the optimum changes sign at j2 = 1 + 1/3
    p = reference_problem()
    assert optimize_control(p.with_j2(1.0 + 1.0 / 3.0 - 1e-3)).c_opt > 0
    assert optimize_control(p.with_j2(1.0 + 1.0 / 3.0 + 1e-3)).c_opt < 0


def test_solution_record_round_trip():
    sol = optimize_control(reference_problem())
    back = ControlSolution.from_record(sol.to_record())
    assert back == sol


def _exact_g(C: float, j2: float, L: int) -> float:
    # deterministic B1 keeps rho12 = 1 along the sequence, matching kappa = 1
    m = DamModel(1.0, BatchDistribution([1.0]), Deterministic(1.0 + C / L), Exponential(2.0), L,
                 j1=1.0, j2=j2, costs=LIN)
    return exact_objective(m, stationary(m)).total


@pytest.mark.parametrize("j2", [1.06, 1.2])
def test_finite_threshold_consistency(j2):
    L = 2000
    p = reference_problem().with_j2(j2)
    for C in (-0.2, 0.1, 0.3):
        assert _exact_g(C, j2, L) == pytest.approx(limiting_objective(p, C), abs=5e-3)
    grid = np.arange(0.0, 0.42, 0.02)
    best = grid[int(np.argmin([_exact_g(c, j2, L) for c in grid]))]
    assert abs(best - optimize_control(p).c_opt) < 0.05


def test_exact_objective_parts():
    m = DamModel(0.5, BatchDistribution([1.0]), Exponential(1.0), Exponential(2.0), 4, j1=2.0, j2=3.0, costs=LIN)
    s = stationary(m)
    v = exact_objective(m, s)
    assert v.damage_lower == pytest.approx(2.0 * 4 * s.p1)
    assert v.damage_upper == pytest.approx(3.0 * 4 * s.p2)
    assert v.water == pytest.approx(float(np.dot(LIN.levels(4), s.q)))
    assert v.total == pytest.approx(v.damage_lower + v.damage_upper + v.water)


def test_lower_regime_damage_without_lower_weight_decreases_in_magnitude():
    # j1 = 0: the damage is j2 L p2, which falls as the load drops further below critical
    p = ControlProblem(0.5, 0.0, 1.5, ConstantCost(1.0))
    vals = [limiting_objective(p, -c) - 1.0 for c in (0.1, 0.5, 1.0, 3.0, 8.0)]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))

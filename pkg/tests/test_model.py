from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import lst_quadrature, mixed_poisson_quadrature

from largedam import (
    BatchDistribution,
    ConstantCost,
    DamModel,
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    LinearCost,
    TableCost,
)
from largedam.errors import DomainError, ModelError
from largedam.model import cost_from_dict, service_from_dict

FAMILIES = [
    Exponential(1.3),
    Erlang(3, 2.0),
    Deterministic(0.7),
    HyperExponential((0.3, 0.7), (0.5, 3.0)),
]


def test_batch_rejects_bad_pmf():
    with pytest.raises(ModelError):
        BatchDistribution([0.5, 0.4])
    with pytest.raises(ModelError):
        BatchDistribution([1.2, -0.2])
    with pytest.raises(ModelError):
        BatchDistribution([])


def test_batch_moments_and_tail():
    b = BatchDistribution([0.5, 0.3, 0.2])
    assert b.mean == pytest.approx(1.7)
    assert b.moment(2) == pytest.approx(0.5 + 1.2 + 1.8)
    assert b.tail(1) == pytest.approx(0.5)
    assert b.tail(3) == 0.0
    assert b.pgf(1.0) == pytest.approx(1.0)
    assert b.pgf_deriv(1.0) == pytest.approx(b.mean)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_lst_against_quadrature(dist):
    for s in (0.0, 0.3, 1.7):
        assert dist.lst(s) == pytest.approx(lst_quadrature(dist, s), abs=1e-10)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_lst_derivative_is_minus_mean(dist):
    assert dist.lst_deriv(0.0) == pytest.approx(-dist.mean, rel=1e-12)
    h = 1e-6
    fd = (dist.lst(0.4 + h) - dist.lst(0.4 - h)) / (2 * h)
    assert dist.lst_deriv(0.4) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_mixed_poisson_against_quadrature(dist):
    w = dist.mixed_poisson(0.9, 12)
    ref = [mixed_poisson_quadrature(dist, 0.9, k) for k in range(13)]
    np.testing.assert_allclose(w, ref, atol=1e-11)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_mixed_poisson_mean_matches_lambda_times_mean(dist):
    w = dist.mixed_poisson(0.8, 400)
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(k * x for k, x in enumerate(w)) == pytest.approx(0.8 * dist.mean, rel=1e-10)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_sample_moments(dist):
    x = dist.sample(np.random.default_rng(1), 200_000)
    se = math.sqrt(dist.moment(2) - dist.mean**2) / math.sqrt(len(x))
    assert abs(x.mean() - dist.mean) < 5 * se + 1e-12


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family)
def test_with_mean_and_round_trip(dist):
    d2 = dist.with_mean(2.5)
    assert d2.family == dist.family
    assert d2.mean == pytest.approx(2.5)
    assert service_from_dict(dist.to_dict()) == dist


def test_lst_outside_strip_raises():
    with pytest.raises(DomainError):
        Exponential(1.0).lst(-1.5)
    with pytest.raises(DomainError):
        HyperExponential((0.5, 0.5), (0.5, 3.0)).lst(-0.6)
    assert Deterministic(1.0).lst(-3.0) == pytest.approx(math.exp(3.0))


def test_service_from_dict_errors():
    with pytest.raises(ModelError, match="unknown service family"):
        service_from_dict({"family": "weibull"})
    with pytest.raises(ModelError, match="missing field"):
        service_from_dict({"family": "erlang", "rate": 1.0})


def test_linear_cost_levels():
    c = LinearCost(2.0, 1.0)
    np.testing.assert_allclose(c.levels(5), [2.0, 1.75, 1.5, 1.25, 1.0])
    assert c.c_star() == 1.5
    assert not c.is_constant


def test_table_cost_interpolates_and_is_monotone():
    c = TableCost((3.0, 2.0, 2.0, 0.5))
    np.testing.assert_allclose(c.levels(4), [3.0, 2.0, 2.0, 0.5])
    lv = c.levels(50)
    assert np.all(np.diff(lv) <= 1e-15)
    with pytest.raises(ModelError):
        TableCost((1.0, 2.0))


def test_cost_from_dict():
    assert cost_from_dict({"kind": "constant", "value": 1.0}) == ConstantCost(1.0)
    assert cost_from_dict({"kind": "linear", "c_high": 2, "c_low": 1}) == LinearCost(2.0, 1.0)
    with pytest.raises(ModelError):
        cost_from_dict({"kind": "quadratic"})


def test_model_invariants():
    b = BatchDistribution([1.0])
    with pytest.raises(ModelError, match="rho2"):
        DamModel(1.0, b, Exponential(1.0), Exponential(1.0), 3)
    with pytest.raises(ModelError, match="level"):
        DamModel(0.5, b, Exponential(1.0), Exponential(1.0), 0)
    with pytest.raises(ModelError):
        DamModel(-0.5, b, Exponential(1.0), Exponential(1.0), 2)


def test_load_factors_mm1():
    m = DamModel(0.5, BatchDistribution([1.0]), Exponential(1.0), Exponential(2.0), 3)
    assert m.rho1 == 0.5
    assert m.rho2 == 0.25
    assert m.rho12 == pytest.approx(0.5)  # lam^2 * 2/mu^2
    # kappa = rho12 Es^3 + Es^2 - Es
    assert m.kappa == pytest.approx(0.5)


def test_with_rho1_rescales_b1_only():
    m = DamModel(0.5, BatchDistribution([0.5, 0.5]), Erlang(2, 3.0), Exponential(2.0), 3)
    m2 = m.with_rho1(1.1)
    assert m2.rho1 == pytest.approx(1.1)
    assert m2.rho2 == m.rho2
    assert m2.b1.family == "erlang" and m2.b1.shape == 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6))
def test_batch_pgf_derivative_at_one_is_mean(w):
    p = np.asarray(w) / sum(w)
    p[-1] = 1.0 - p[:-1].sum()
    b = BatchDistribution(p)
    assert b.pgf(1.0) == pytest.approx(1.0, abs=1e-12)
    assert b.pgf_deriv(1.0) == pytest.approx(b.mean, rel=1e-12)

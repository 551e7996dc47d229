import math

import numpy as np
import pytest

from patient_exchange import inelastic as inel
from patient_exchange.inelastic import InelasticParams

BASE = dict(mu=12.0, delta_bar=160.0)


def test_support_hand_value():
    P = InelasticParams(0.5, **BASE)
    assert P.support == pytest.approx(160 / 12)
    assert InelasticParams(1.0, **BASE).support == math.inf


@pytest.mark.parametrize("gamma", [0.5, 1.01, 0.2])
def test_gamma_range(gamma):
    with pytest.raises(ValueError):
        InelasticParams(1.0, gamma=gamma, **BASE)


def test_cdf_boundaries():
    P = InelasticParams(0.5, **BASE)
    assert inel.interior_cdf(P, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert inel.interior_cdf(P, P.support) == pytest.approx(1.0, abs=1e-15)
    assert inel.equilibrium_cdf(P, -1.0) == 0.0
    assert inel.equilibrium_cdf(P, 2 * P.support) == 1.0


def test_rho_one_never_uses_bounded_formula():
    P = InelasticParams(1.0, **BASE)
    with pytest.raises(ValueError):
        inel.equilibrium_cdf(P, 1.0)
    assert inel.cdf(P, 5.0) == pytest.approx(inel.limit_cdf(P, 5.0))


def test_gamma_tail_requires_critical_load():
    with pytest.raises(ValueError):
        inel.gamma_tail(InelasticParams(0.9, gamma=0.75, **BASE), 1.0)


def test_gamma_one_tail_is_limit_cdf():
    P = InelasticParams(1.0, gamma=1.0, **BASE)
    p = np.linspace(0, 500, 101)
    assert np.allclose(1 - inel.gamma_tail(P, p), inel.limit_cdf(P, p), atol=1e-15)


def test_closed_form_solves_ode_on_graded_grid():
    P = InelasticParams(0.5, **BASE)
    g = inel.graded_grid(P.support, 10**4)
    assert inel.ode_residual(P, g, inel.equilibrium_cdf(P, g)) < 1e-6


def test_power_tail_solves_ode():
    P = InelasticParams(1.0, gamma=0.75, **BASE)
    g = np.linspace(0, 100 * P.price_scale, 10**4)
    assert inel.ode_residual(P, g, 1 - inel.gamma_tail(P, g)) < 1e-6


@pytest.mark.parametrize("rho,gamma", [(0.5, 1.0), (0.9, 1.0), (1.0, 1.0), (1.0, 0.75), (1.0, 0.6)])
def test_rk4_matches_closed_forms(rho, gamma):
    P = InelasticParams(rho, gamma=gamma, **BASE)
    p_max = 2 * P.support if rho < 1 else 10 * P.price_scale
    sol = inel.integrate_ode(P, p_max)
    assert np.max(np.abs(sol.F - inel.cdf(P, sol.grid))) < 1e-6
    if rho < 1:
        assert sol.crossing(1 - 1e-4) == pytest.approx(P.support, rel=1e-3)


@pytest.mark.parametrize("rho,gamma", [(0.3, 0.75), (0.9, 0.6), (0.5, 0.95)])
def test_inverse_cdf_agrees_with_rk4(rho, gamma):
    P = InelasticParams(rho, gamma=gamma, **BASE)
    end = inel.support_end(P)
    sol = inel.integrate_ode(P, 2 * end)
    # compare prices: near the end F(p) is ill-conditioned (an ulp in p moves F by ~1e-7)
    assert np.max(np.abs(inel.price_of_cdf(P, sol.F) - sol.grid)) < 1e-9 * end
    assert np.max(np.abs(sol.F - inel.cdf_by_inversion(P, sol.grid))) < 1e-5
    assert sol.reached == pytest.approx(end, rel=1e-6)


def test_inverse_cdf_reduces_to_closed_form():
    P = InelasticParams(0.7, **BASE)
    p = inel.graded_grid(P.support, 500)
    assert np.allclose(inel.cdf_by_inversion(P, p), inel.equilibrium_cdf(P, p), atol=1e-14)
    assert inel.support_end(P) == P.support


def test_near_critical_approaches_limit():
    P = InelasticParams(0.999, **BASE)
    p = np.linspace(0, 100 * P.price_scale, 20001)
    assert np.max(np.abs(inel.equilibrium_cdf(P, p) - inel.limit_cdf(P, p))) < 0.01


def test_power_law_exponents():
    P = InelasticParams(1.0, gamma=0.75, **BASE)
    assert inel.tail_slope(P) == pytest.approx(-1.5, abs=0.01)
    assert inel.depth_slope(P) == pytest.approx(1.5, abs=0.01)
    assert inel.impact_slope(P) == pytest.approx(2 / 3, abs=0.01)


def test_inventory_density_forms_agree():
    for rho, gamma in [(0.5, 1.0), (1.0, 0.75), (1.0, 1.0)]:
        P = InelasticParams(rho, gamma=gamma, **BASE)
        p = np.linspace(0, min(P.support, 50.0) * 0.99, 200)
        assert np.allclose(inel.inventory_density(P, p), inel.inventory_from_cdf(P, inel.cdf(P, p)), rtol=1e-12)


def test_inventory_outside_support_rejected():
    P = InelasticParams(0.5, **BASE)
    with pytest.raises(ValueError):
        inel.inventory_density(P, P.support)


def test_depth_is_integral_of_inventory():
    P = InelasticParams(0.5, **BASE)
    g = inel.graded_grid(P.support, 4001)
    c = inel.tabulate(P, g)
    assert c.D[-1] == pytest.approx(inel.market_depth(P, g[-1]), rel=1e-5)
    # scalar input
    assert isinstance(inel.market_depth(P, 1.0), float)


def test_depth_at_criticality_uniform():
    P = InelasticParams(1.0, **BASE)
    # Q is flat at mu / (2 delta_bar) for gamma = 1
    assert inel.market_depth(P, 10.0) == pytest.approx(10.0 * 12 / 320, rel=1e-10)


def test_conditional_mean_block_formula():
    P = InelasticParams(0.5, **BASE)
    v = inel.conditional_mean(P, 0.0)
    # best ask at 0 means nothing ahead: plain M/M/1 count
    assert v == pytest.approx(0.5 / 0.5)


def test_conditional_density_reduces_at_zero():
    P = InelasticParams(0.5, **BASE)
    p = np.linspace(0, 10, 50)
    F = inel.cdf(P, p)
    expect = P.rho * inel.density(P, p) / (1 - P.rho * F) ** 2
    assert np.allclose(inel.conditional_density(P, p, 0.0), expect)
    with pytest.raises(ValueError):
        inel.conditional_density(P, [1.0], 2.0)


def test_price_of_delta():
    P = InelasticParams(1.0, gamma=0.75, **BASE)
    assert inel.price_of_delta(P, 160.0) == pytest.approx(0.0)
    assert inel.price_of_delta(P, 0.0) == math.inf
    d = np.linspace(1, 160, 50)
    assert np.all(np.diff(inel.price_of_delta(P, d)) < 0)


def test_price_of_delta_consistent_with_cdf():
    # sellers with patience delta post price p(delta); fraction of sellers below p is 1 - F_delta(delta)
    P = InelasticParams(1.0, gamma=0.75, **BASE)
    d = np.array([10.0, 50.0, 120.0])
    p = inel.price_of_delta(P, d)
    assert np.allclose(inel.cdf(P, p), 1 - (d / P.delta_bar) ** P.gamma, atol=1e-12)


def test_tabulate_rejects_bad_grid():
    with pytest.raises(ValueError):
        inel.tabulate(InelasticParams(0.5, **BASE), [0.0, 2.0, 1.0])

import numpy as np
import pytest

from patient_exchange.market import (
    DemandCurve,
    MarketConfig,
    PatienceDistribution,
    example_config,
    patience_cdf,
    patience_sample,
    validate,
    validate_patience,
)


def test_quadratic_demand_endpoints():
    d = DemandCurve.quadratic(50)
    assert len(d) == 50
    assert d.beta[0] == pytest.approx((0.5 + (50 / 15) ** 2) / 12)
    assert d.beta[-1] == pytest.approx((0.5 + (1 / 15) ** 2) / 12)
    assert np.all(np.diff(d.beta) < 0)


def test_example_config_is_valid(example):
    assert example.n_ticks == 50
    assert example.lam == 3 and example.mu == 12
    assert validate(example).ok
    assert np.array_equal(example.ticks, np.arange(1, 51))


def test_uniform_patience():
    p = PatienceDistribution.uniform(160)
    assert patience_cdf(p, 0) == 0
    assert patience_cdf(p, 40) == pytest.approx(0.25)
    assert patience_cdf(p, 1e6) == 1
    assert p.mean() == pytest.approx(80, rel=1e-6)


def test_power_patience_cdf_and_ppf_invert():
    p = PatienceDistribution.power(2.0, 0.75)
    u = np.linspace(0, 1, 11)
    assert np.allclose(p.cdf(p.ppf(u)), u)


def test_negative_patience_rejected():
    with pytest.raises(ValueError):
        PatienceDistribution.uniform(1.0).cdf(-0.1)


@pytest.mark.parametrize("gamma", [0.5, 0.3, 1.2])
def test_power_exponent_outside_range_rejected(gamma):
    assert not validate_patience(PatienceDistribution.power(1.0, gamma))


def test_tabulated_interpolates_linearly():
    p = PatienceDistribution.tabulated([0, 1, 3], [0, 0.5, 1.0])
    assert p.cdf(0.5) == pytest.approx(0.25)
    assert p.cdf(2.0) == pytest.approx(0.75)
    assert p.delta_bar == 3


def test_sampling_matches_cdf(rng):
    p = PatienceDistribution.power(10.0, 0.8)
    x = patience_sample(p, rng, 200_000)
    for q in (1.0, 3.0, 7.0):
        assert np.mean(x <= q) == pytest.approx(p.cdf(q), abs=5e-3)


def test_validation_collects_every_failure():
    cfg = MarketConfig(-1.0, 0.0, 1.0, 3, DemandCurve(np.array([0.2, 0.5, 1.5])), PatienceDistribution.uniform(1.0))
    rep = validate(cfg)
    assert not rep
    fields = {f for f, _ in rep.failures}
    assert {"lambda", "mu", "demand"} <= fields
    assert any("non-increasing" in rule for _, rule in rep.failures)
    assert len(rep.failures) >= 4


def test_validation_catches_length_mismatch():
    cfg = MarketConfig(1.0, 2.0, 1.0, 4, DemandCurve.constant(3), PatienceDistribution.uniform(1.0))
    assert not validate(cfg)


def test_prices_are_tick_multiples():
    cfg = example_config()
    assert np.allclose(cfg.prices, cfg.epsilon * cfg.ticks)

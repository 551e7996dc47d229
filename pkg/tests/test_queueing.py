import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse
from scipy.sparse.linalg import spsolve

from patient_exchange.market import DemandCurve, MarketConfig, PatienceDistribution
from patient_exchange.queueing import (
    INF,
    analyze,
    as_simplex,
    conditional_inventory,
    conditional_profile,
    execution_time,
    expected_inventory,
    price_tail,
    time_average_price_pmf,
    traffic_intensity,
)


def _cfg(beta, lam=1.0, mu=4.0):
    beta = np.asarray(beta, dtype=float)
    return MarketConfig(lam, mu, 1.0, len(beta), DemandCurve(beta), PatienceDistribution.uniform(1.0))


def test_mm1_reduction(mm1):
    assert execution_time(mm1, [1.0])[0] == pytest.approx(1 / 9, abs=1e-12)
    assert expected_inventory(mm1, [1.0])[0] == pytest.approx(1 / 3, abs=1e-12)
    assert price_tail([0.25])[0] == pytest.approx(0.75)


def test_two_class_preemptive_priority():
    # textbook preemptive M/M/1 with two classes and a common service rate
    lam, mu = 1.0, 4.0
    cfg = _cfg([1.0, 1.0], lam, mu)
    T = execution_time(cfg, [0.5, 0.5])
    r1 = r2 = lam * 0.5 / mu
    assert T[0] == pytest.approx(1 / (mu * (1 - r1)))
    assert T[1] == pytest.approx((1 / mu) / ((1 - r1) * (1 - r1 - r2)))


def test_unstable_ticks_are_infinite():
    cfg = _cfg([1.0, 1.0, 1.0], lam=10.0, mu=4.0)
    T = execution_time(cfg, [0.2, 0.3, 0.5])
    assert np.isfinite(T[0])
    assert np.all(np.isinf(T[1:]))
    Q = expected_inventory(cfg, [0.2, 0.3, 0.5])
    assert np.isinf(Q[1])


def test_zero_mass_tick_has_zero_inventory():
    cfg = _cfg([1.0, 0.8, 0.5])
    Q = expected_inventory(cfg, [0.5, 0.0, 0.5])
    assert Q[1] == 0.0
    assert np.isfinite(execution_time(cfg, [0.5, 0.0, 0.5])[1])


def test_conditional_inventory_reduces_to_mm1():
    for rho in (0.1, 0.3, 0.9):
        assert conditional_inventory([rho], 1, 1) == pytest.approx(rho / (1 - rho), abs=1e-12)


def test_conditional_inventory_two_blocks():
    r1, r2 = 0.25, 0.25
    expect = r2 * (1 - 2 * r1 + r1**2 + r1 * r2) / ((1 - r1) ** 2 * (1 - r1 - r2))
    assert conditional_inventory([r1, r2], 2, 2) == pytest.approx(expect, rel=1e-14)
    assert expect == pytest.approx(0.5556, abs=1e-4)


def test_conditional_inventory_against_ctmc():
    # truncated two-class CTMC, preemptive priority, solved for its stationary law
    l1, l2, mu, M = 0.3, 0.2, 1.0, 60
    idx = lambda a, b: a * (M + 1) + b  # noqa: E731
    n = (M + 1) ** 2
    rows, cols, vals = [], [], []
    for a in range(M + 1):
        for b in range(M + 1):
            i = idx(a, b)
            moves = []
            if a < M:
                moves.append((idx(a + 1, b), l1))
            if b < M:
                moves.append((idx(a, b + 1), l2))
            if a > 0:
                moves.append((idx(a - 1, b), mu))
            elif b > 0:
                moves.append((idx(a, b - 1), mu))
            for k, rate in moves:
                rows += [k, i]
                cols += [i, i]
                vals += [rate, -rate]
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n)).tolil()
    A[0, :] = 1.0  # swap one balance equation for the normalisation
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = spsolve(A.tocsc(), rhs).reshape(M + 1, M + 1)
    cond = (pi[0] * np.arange(M + 1)).sum() / pi[0].sum()
    assert conditional_inventory([l1 / mu, l2 / mu], 2, 2) == pytest.approx(cond, rel=1e-8)


def test_conditional_profile_matches_pointwise():
    rho = np.array([0.1, 0.2, 0.15, 0.05])
    prof = conditional_profile(rho, 2)
    assert len(prof) == 4
    assert prof[1] == pytest.approx(conditional_inventory(rho, 2, 2))


def test_conditional_inventory_unstable():
    assert conditional_inventory([0.6, 0.6], 2, 2) == INF


def test_time_average_pmf_sums_to_one():
    pmf = time_average_price_pmf([0.1, 0.2, 0.3])
    assert pmf.sum() == pytest.approx(1.0)
    assert pmf[2] == pytest.approx(0.5)


def test_as_simplex_idempotent():
    a = np.array([0.1, 0.2, 0.7])
    assert as_simplex(a) is not None
    assert np.array_equal(as_simplex(as_simplex(a)), as_simplex(a))
    with pytest.raises(ValueError):
        as_simplex([0.5, 0.6])
    with pytest.raises(ValueError):
        as_simplex([1.5, -0.5])


def test_analyze_bundle(example, example_eq):
    an = analyze(example, example_eq.alpha_star)
    assert np.allclose(an.inventory, example.lam * an.alpha * an.exec_time)
    assert an.tail[-1] == pytest.approx(max(0.0, 1 - an.rho.sum()))
    assert an.stable_up_to == example.n_ticks


alphas = st.integers(1, 12).flatmap(
    lambda n: st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-3)
)


@settings(max_examples=200, deadline=None)
@given(raw=alphas, load=st.floats(0.05, 0.95))
def test_execution_time_monotone_in_tick(raw, load):
    alpha = np.asarray(raw) / sum(raw)
    n = len(alpha)
    # ticks with equal demand so the total load is exactly `load`
    cfg = _cfg(np.ones(n), lam=load * 4.0, mu=4.0)
    T = execution_time(cfg, alpha)
    assert np.all(np.isfinite(T))
    assert np.all(np.diff(T) >= -1e-12)
    assert T[0] >= 1 / cfg.mu - 1e-15


@settings(max_examples=200, deadline=None)
@given(raw=alphas, lam=st.floats(0.1, 50.0))
def test_little_law_and_tail_consistency(raw, lam):
    alpha = np.asarray(raw) / sum(raw)
    n = len(alpha)
    beta = np.linspace(1.0, 0.2, n)
    cfg = _cfg(beta, lam=lam, mu=10.0)
    an = analyze(cfg, alpha)
    rho = traffic_intensity(cfg, alpha)
    assert np.allclose(an.rho, rho)
    fin = np.isfinite(an.exec_time) & (alpha > 0)
    assert np.allclose(an.inventory[fin], lam * alpha[fin] * an.exec_time[fin])
    assert 0.0 <= an.tail[-1] <= 1.0
    assert np.all(np.diff(an.tail) <= 1e-15)
    # once one tick is unstable, every later tick is too
    inf = np.isinf(an.exec_time)
    if inf.any():
        assert inf[np.argmax(inf):].all()


@settings(max_examples=100, deadline=None)
@given(r1=st.floats(0.01, 0.6), r2=st.floats(0.01, 0.38))
def test_block_conditional_positive_and_reduces(r1, r2):
    v = conditional_inventory([r1, r2], 2, 2)
    assert v > 0
    if r1 + r2 < 1:
        assert math.isfinite(v)
    assert conditional_inventory([1e-15, r2], 2, 2) == pytest.approx(r2 / (1 - r2), rel=1e-9)

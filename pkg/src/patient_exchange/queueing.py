"""Stationary analysis of the book as a Markovian preemptive-priority queue.

Tick ``j`` is priority class ``j``: a buyer always takes the lowest outstanding
ask, so orders at lower ticks preempt service of higher ones.  Class ``j``
arrives at rate ``lam * alpha_j`` and is served at rate ``mu * beta_j``.

Unstable quantities are reported as ``math.inf``; numpy propagates it through
sums and products, which is all the downstream code relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import MarketConfig

INF = math.inf
# cumulative load this close to 1 counts as unstable
STABILITY_MARGIN = 1e-9


def as_simplex(alpha, atol: float = 1e-9) -> np.ndarray:
    """Validate a thinning vector and renormalise it onto the simplex.

    Vectors already summing to 1 within 1e-12 are returned unchanged so that
    repeated calls are idempotent (CSV round trips stay bit-exact).
    """
    a = np.array(alpha, dtype=float)
    if a.ndim != 1 or len(a) == 0:
        raise ValueError("alpha must be a non-empty vector")
    if np.any(a < -atol):
        raise ValueError("alpha must be non-negative")
    a = np.maximum(a, 0.0)
    s = a.sum()
    if not abs(s - 1.0) <= max(atol, 1e-6):
        raise ValueError(f"alpha must sum to 1 (got {s!r})")
    if abs(s - 1.0) > 1e-12:
        a = a / s
    return a


@dataclass(frozen=True)
class QueueAnalytics:
    alpha: np.ndarray
    rho: np.ndarray
    cum_rho: np.ndarray
    exec_time: np.ndarray
    inventory: np.ndarray
    tail: np.ndarray
    stable_up_to: int  # largest tick with cum_rho < 1, 0 if none

    @property
    def n_ticks(self) -> int:
        return len(self.rho)


def traffic_intensity(config: MarketConfig, alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return (config.lam / config.mu) * (alpha / config.beta)


def _unstable(cum_rho: np.ndarray) -> np.ndarray:
    return cum_rho >= 1.0 - STABILITY_MARGIN


def execution_time(config: MarketConfig, alpha) -> np.ndarray:
    """Expected time from posting at each tick until sale; ``inf`` where the class is unstable."""
    beta = config.beta
    rho = traffic_intensity(config, alpha)
    cum = np.cumsum(rho)
    cum_before = np.concatenate(([0.0], cum[:-1]))
    weighted = np.cumsum(rho / beta)
    unstable = _unstable(cum)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = (1.0 / config.mu) / (1.0 - cum_before) * (1.0 / beta + weighted / (1.0 - cum))
    T[unstable] = INF
    return T


def expected_inventory(config: MarketConfig, alpha, exec_time=None) -> np.ndarray:
    """Little's law per tick.  A tick nobody posts at holds nothing, even when unstable."""
    alpha = np.asarray(alpha, dtype=float)
    T = execution_time(config, alpha) if exec_time is None else np.asarray(exec_time, dtype=float)
    Q = np.zeros_like(T)
    pos = alpha > 0
    Q[pos] = config.lam * alpha[pos] * T[pos]
    return Q


def price_tail(rho) -> np.ndarray:
    """P(best ask > j * epsilon) = 1 - sum_{k<=j} rho_k, floored at 0."""
    return np.maximum(0.0, 1.0 - np.cumsum(np.asarray(rho, dtype=float)))


def conditional_inventory(rho, j: int, k: int) -> float:
    """Mean number of orders at ticks ``j..k`` given ticks ``1..j-1`` are empty.

    Ticks are 1-based.  The higher-priority block ``1..j-1`` and the block
    ``j..k`` are collapsed into a two-class preemptive queue.
    """
    rho = np.asarray(rho, dtype=float)
    n = len(rho)
    if not 1 <= j <= k <= n:
        raise ValueError(f"need 1 <= j <= k <= {n}, got j={j}, k={k}")
    r1 = float(rho[: j - 1].sum())
    r2 = float(rho[j - 1 : k].sum())
    if r1 + r2 >= 1.0 - STABILITY_MARGIN:
        return INF
    return r2 * (1 - 2 * r1 + r1 * r1 + r1 * r2) / ((1 - r1) ** 2 * (1 - r1 - r2))


def conditional_profile(rho, j: int) -> np.ndarray:
    """Per-tick expected inventory at ticks ``j..N`` given ticks below ``j`` are empty.

    Differences of the block means; entries below ``j`` are zero.
    """
    rho = np.asarray(rho, dtype=float)
    n = len(rho)
    block = np.array([conditional_inventory(rho, j, k) for k in range(j, n + 1)])
    out = np.zeros(n)
    out[j - 1 :] = np.diff(np.concatenate(([0.0], block)))
    return out


def time_average_price_pmf(rho) -> np.ndarray:
    """Distribution of the best ask over time, conditional on the book being non-empty."""
    rho = np.asarray(rho, dtype=float)
    return rho / rho.sum()


def analyze(config: MarketConfig, alpha) -> QueueAnalytics:
    alpha = as_simplex(alpha)
    if len(alpha) != config.n_ticks:
        raise ValueError(f"alpha has {len(alpha)} entries, config has {config.n_ticks} ticks")
    rho = traffic_intensity(config, alpha)
    cum = np.cumsum(rho)
    T = execution_time(config, alpha)
    stable = np.flatnonzero(~_unstable(cum))
    return QueueAnalytics(
        alpha=alpha,
        rho=rho,
        cum_rho=cum,
        exec_time=T,
        inventory=expected_inventory(config, alpha, T),
        tail=price_tail(rho),
        stable_up_to=int(stable[-1] + 1) if len(stable) else 0,
    )


def weighted_moments(values, weights) -> tuple[float, float]:
    """Mean and standard deviation of ``values`` under the weights (normalised here)."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    v = np.asarray(values, dtype=float)
    m = float(np.dot(w, v))
    return m, float(math.sqrt(max(np.dot(w, (v - m) ** 2), 0.0)))

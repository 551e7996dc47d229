"""Symmetric Bayesian-Nash equilibrium of the posted-price game.

A seller with patience ``delta`` posts at the tick maximising
``j * epsilon - delta * T(j)``.  Integrating that choice against the patience
distribution maps a thinning vector ``alpha`` to a new one (``psi_map``); an
equilibrium is a fixed point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .market import MarketConfig, PatienceDistribution
from .queueing import QueueAnalytics, analyze, execution_time, weighted_moments

log = logging.getLogger(__name__)


class NoFeasiblePosting(ValueError):
    """Every tick has infinite expected execution time."""


class EquilibriumNotConverged(RuntimeError):
    def __init__(self, result: "EquilibriumResult", tol: float):
        super().__init__(f"best residual {result.residual:.3e} exceeds tolerance {tol:.1e}")
        self.result = result


@dataclass(frozen=True)
class BestResponsePartition:
    """Cells ``(tick, lo, hi)`` ordered by increasing patience cost.

    Each cell is half-open ``[lo, hi)`` except the last, which also contains
    ``delta_bar``.  At a breakpoint the cell starting there (the lower tick)
    wins, which makes ties deterministic.
    """

    ticks: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    measures: np.ndarray
    delta_bar: float

    @property
    def cells(self):
        return list(zip(self.ticks.tolist(), self.lo.tolist(), self.hi.tolist()))

    def thinning(self, n_ticks: int) -> np.ndarray:
        out = np.zeros(n_ticks)
        np.add.at(out, self.ticks - 1, self.measures)
        return out

    def tick_at(self, delta: float) -> int:
        if not 0.0 <= delta <= self.delta_bar:
            raise ValueError(f"delta={delta} outside [0, {self.delta_bar}]")
        i = int(np.searchsorted(self.lo, delta, side="right")) - 1
        return int(self.ticks[max(i, 0)])

    def is_monotone(self) -> bool:
        """Assigned tick non-increasing as patience cost grows."""
        return bool(np.all(np.diff(self.ticks) <= 0))


def _upper_envelope(intercepts: np.ndarray, slopes: np.ndarray) -> tuple[list, list]:
    """Upper envelope of ``intercept - x * slope`` over the whole real line.

    Returns line indices in order of increasing ``x`` and the breakpoints
    between consecutive lines.
    """
    # lines entering the envelope as x grows have decreasing slope; ties keep the larger intercept,
    # and among equal (slope, intercept) the lower index
    order = np.lexsort((np.arange(len(slopes)), -intercepts, -slopes))
    hull: list[int] = []
    starts: list[float] = []
    last_slope = None
    for i in order:
        if last_slope is not None and slopes[i] == last_slope:
            continue
        last_slope = slopes[i]
        x = -math.inf
        while hull:
            k = hull[-1]
            x = (intercepts[k] - intercepts[i]) / (slopes[k] - slopes[i])
            if x <= starts[-1]:
                hull.pop()
                starts.pop()
                x = -math.inf
                continue
            break
        hull.append(int(i))
        starts.append(x)
    return hull, starts[1:]


def best_response(exec_time, epsilon: float, patience: PatienceDistribution) -> BestResponsePartition:
    """Partition ``[0, delta_bar]`` by the tick each patience level prefers."""
    T = np.asarray(exec_time, dtype=float)
    finite = np.flatnonzero(np.isfinite(T))
    if len(finite) == 0:
        raise NoFeasiblePosting("all execution times are infinite")
    ticks = finite + 1
    hull, breaks = _upper_envelope(epsilon * ticks.astype(float), T[finite])
    dbar = patience.delta_bar
    lo = np.concatenate(([-math.inf], breaks))
    hi = np.concatenate((breaks, [math.inf]))
    lo = np.clip(lo, 0.0, dbar)
    hi = np.clip(hi, 0.0, dbar)
    keep = hi > lo
    if not np.any(keep):
        # only happens when dbar == 0; degenerate but well defined
        keep = np.zeros(len(hull), bool)
        keep[0] = True
    cell_ticks = ticks[hull][keep]
    lo, hi = lo[keep], hi[keep]
    measures = patience.cdf(hi) - patience.cdf(lo)
    return BestResponsePartition(
        ticks=np.asarray(cell_ticks, dtype=int),
        lo=np.atleast_1d(lo),
        hi=np.atleast_1d(hi),
        measures=np.atleast_1d(np.asarray(measures, dtype=float)),
        delta_bar=dbar,
    )


def monotone_partition(alpha, patience: PatienceDistribution) -> BestResponsePartition:
    """The monotone strategy that realises ``alpha``: the least patient sellers take the top ticks."""
    a = np.asarray(alpha, dtype=float)
    ticks = np.flatnonzero(a > 0)[::-1] + 1
    edges = patience.ppf(np.clip(np.concatenate(([0.0], np.cumsum(a[ticks - 1]))), 0.0, 1.0))
    edges[-1] = patience.delta_bar
    return BestResponsePartition(
        ticks=ticks.astype(int), lo=edges[:-1], hi=edges[1:], measures=a[ticks - 1].copy(), delta_bar=patience.delta_bar
    )


def psi_map(config: MarketConfig, alpha) -> np.ndarray:
    T = execution_time(config, alpha)
    part = best_response(T, config.epsilon, config.patience)
    return part.thinning(config.n_ticks)


def residual(config: MarketConfig, alpha) -> float:
    return float(np.linalg.norm(psi_map(config, alpha) - np.asarray(alpha)))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    r = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[r] / (r + 1.0), 0.0)


@dataclass
class EquilibriumResult:
    alpha_star: np.ndarray
    analytics: QueueAnalytics
    residual: float
    partition: BestResponsePartition
    premise_holds: bool
    strategy_monotone: bool
    restarts_used: int
    converged: bool
    distinct_equilibria: int = 1
    iterations: int = 0
    restart_residuals: list = field(default_factory=list)

    @property
    def alpha_moments(self) -> tuple[float, float]:
        return weighted_moments(np.arange(1, len(self.alpha_star) + 1), self.alpha_star)

    @property
    def price_moments(self) -> tuple[float, float]:
        """Moments (in ticks) of the time-average best-ask distribution."""
        rho = self.analytics.rho
        return weighted_moments(np.arange(1, len(rho) + 1), rho)


def monotonicity_premise(T) -> bool:
    """True when T is finite, strictly increasing and has non-decreasing increments."""
    T = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(T)):
        return False
    if len(T) < 2:
        return True
    d = np.diff(T)
    return bool(np.all(d > 0) and np.all(np.diff(d) >= -1e-12 * np.abs(T[1:-1]).max(initial=1.0)))


def _damped_iteration(config, alpha, tol, max_iter, eta, window, eta_min):
    best_r, best_a = math.inf, alpha
    window_best, prev_window_best = math.inf, math.inf
    it = 0
    while it < max_iter:
        p = psi_map(config, alpha)
        r = float(np.linalg.norm(p - alpha))
        if r < best_r:
            best_r, best_a = r, alpha
        if r < tol:
            break
        window_best = min(window_best, r)
        it += 1
        if it % window == 0:
            if window_best > 0.9 * prev_window_best:
                eta *= 0.5
                if eta < eta_min:
                    break
            prev_window_best = min(prev_window_best, window_best)
            window_best = math.inf
        alpha = alpha + eta * (p - alpha)
        alpha = np.maximum(alpha, 0.0)
        alpha /= alpha.sum()
    return best_a, best_r, it


def _minimize_residual(config, alpha, tol, max_fev):
    def objective(x):
        a = project_simplex(x)
        return float(np.sum((psi_map(config, a) - a) ** 2))

    res = optimize.minimize(
        objective,
        alpha,
        method="Nelder-Mead",
        options={"maxfev": max_fev, "xatol": 1e-14, "fatol": tol * tol * 1e-2, "adaptive": True},
    )
    a = project_simplex(res.x)
    return a, math.sqrt(objective(a))


def _build_result(config, alpha, restarts, restart_residuals, converged, distinct, iterations):
    an = analyze(config, alpha / alpha.sum())
    alpha = an.alpha
    part = best_response(an.exec_time, config.epsilon, config.patience)
    r = float(np.linalg.norm(part.thinning(config.n_ticks) - alpha))
    return EquilibriumResult(
        alpha_star=alpha,
        analytics=an,
        residual=r,
        partition=part,
        premise_holds=monotonicity_premise(an.exec_time),
        strategy_monotone=part.is_monotone(),
        restarts_used=restarts,
        converged=converged,
        distinct_equilibria=distinct,
        iterations=iterations,
        restart_residuals=restart_residuals,
    )


def solve_equilibrium(
    config: MarketConfig,
    tol: float = 1e-8,
    max_iter: int = 20000,
    n_restarts: int = 20,
    rng=None,
    eta: float = 0.5,
    window: int = 25,
    eta_min: float = 1e-3,
    max_fev: int = 20000,
    raise_on_failure: bool = True,
) -> EquilibriumResult:
    """Find a fixed point of ``psi_map``.

    Each restart runs damped iteration ``alpha <- alpha + eta * (psi(alpha) - alpha)``,
    halving ``eta`` whenever a window of iterations fails to cut the residual by
    10%.  If that stalls above ``tol`` the squared residual is minimised with
    Nelder-Mead over simplex-projected points.  Restart 0 starts from the
    uniform vector, the rest from Dirichlet(1) draws.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(rng)
    n = config.n_ticks
    n_restarts = max(int(n_restarts), 1)
    streams = rng.spawn(n_restarts)

    solutions, residuals = [], []
    total_iter = 0
    for k in range(n_restarts):
        a0 = np.full(n, 1.0 / n) if k == 0 else streams[k].dirichlet(np.ones(n))
        a, r, it = _damped_iteration(config, a0, tol, max_iter, eta, window, eta_min)
        total_iter += it
        if r >= tol:
            log.info("restart %d stalled at residual %.3e; switching to Nelder-Mead", k, r)
            a2, r2 = _minimize_residual(config, a, tol, max_fev)
            if r2 < r:
                a, r = a2, r2
        solutions.append(a)
        residuals.append(r)

    best = int(np.argmin(residuals))
    converged_sols = [s for s, r in zip(solutions, residuals) if r < tol]
    distinct: list[np.ndarray] = []
    for s in converged_sols:
        if all(np.max(np.abs(s - d)) > 1e-4 for d in distinct):
            distinct.append(s)
    if len(distinct) > 1:
        log.warning("restarts converged to %d distinct equilibria", len(distinct))

    result = _build_result(
        config, solutions[best], n_restarts, residuals, residuals[best] < tol, max(len(distinct), 1), total_iter
    )
    result.converged = result.residual < tol
    if result.premise_holds and not result.strategy_monotone:
        log.warning("monotone-strategy premise holds but the partition is not monotone")
    if not result.converged and raise_on_failure:
        raise EquilibriumNotConverged(result, tol)
    return result


def strategy_of_delta(result: EquilibriumResult, delta: float) -> int:
    return result.partition.tick_at(delta)


@dataclass(frozen=True)
class TwoPriceProblem:
    """Two sellers, two admissible prices; buyers arrive faster at the lower price."""

    p1: float
    p2: float
    mu1: float
    mu2: float
    patience: PatienceDistribution

    def __post_init__(self):
        if self.p2 < self.p1:
            raise ValueError("need p1 <= p2")
        if not self.mu1 > self.mu2 > 0:
            raise ValueError("need mu1 > mu2 > 0")


@dataclass(frozen=True)
class TwoPriceResult:
    alpha2: float
    residual: float
    threshold: float  # patience level above which a seller takes the low price


def _two_price_threshold(pr: TwoPriceProblem, a2: float) -> float:
    return pr.mu1 * pr.mu2 * (pr.p2 - pr.p1) / (pr.mu1 - pr.mu2 + 0.5 * a2 * (pr.mu1 + pr.mu2))


def two_price_residual(problem: TwoPriceProblem, alpha2: float) -> float:
    return alpha2 - problem.patience.cdf(_two_price_threshold(problem, alpha2))


def two_price_equilibrium(problem: TwoPriceProblem) -> TwoPriceResult:
    """Probability of posting the high price, found by bracketing on ``[0, 1]``.

    The residual ``a - F(threshold(a))`` is increasing in ``a``, non-positive
    at 0 and non-negative at 1, so the bracket always holds a root.
    """
    g0 = two_price_residual(problem, 0.0)
    g1 = two_price_residual(problem, 1.0)
    if g0 >= 0:
        a = 0.0
    elif g1 <= 0:
        a = 1.0
    else:
        a = optimize.brentq(lambda x: two_price_residual(problem, x), 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return TwoPriceResult(a, abs(two_price_residual(problem, a)), _two_price_threshold(problem, a))

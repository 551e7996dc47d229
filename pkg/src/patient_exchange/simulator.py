"""Event-driven simulation of the exchange.

Sellers (rate ``lam``) post one unit at a tick, buyers (rate ``mu``) look at
the lowest non-empty tick ``j`` and buy its head-of-line unit with probability
``beta_j``.  A buyer who declines, or finds the book empty, leaves for good.

This is deliberately written without reference to the queueing formulas so
it can be used to check them.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .equilibrium import BestResponsePartition, best_response
from .market import MarketConfig, PatienceDistribution
from .queueing import STABILITY_MARGIN, traffic_intensity

log = logging.getLogger(__name__)

FIFO = "fifo"
RANDOM = "random"
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    market: MarketConfig
    alpha: Optional[np.ndarray] = None
    partition: Optional[BestResponsePartition] = None
    horizon: int = 10**6
    warmup_fraction: float = 0.2
    n_batches: int = 20
    seed: int = 0
    discipline: str = FIFO

    def __post_init__(self):
        if (self.alpha is None) == (self.partition is None):
            raise ValueError("give exactly one of alpha (alpha-driven) or partition (strategy-driven)")
        if self.n_batches < 2:
            raise ValueError("need at least two batches")
        if self.horizon < 10 * self.n_batches:
            raise ValueError(f"horizon must be >= 10 * n_batches = {10 * self.n_batches}")
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.discipline not in (FIFO, RANDOM):
            raise ValueError(f"unknown discipline {self.discipline!r}")
        if self.alpha is not None:
            a = np.asarray(self.alpha, dtype=float)
            if len(a) != self.market.n_ticks or np.any(a < 0) or not math.isclose(a.sum(), 1.0, abs_tol=1e-9):
                raise ValueError("alpha must be a probability vector over the ticks")
            object.__setattr__(self, "alpha", a / a.sum())

    @property
    def mode(self) -> str:
        return "alpha" if self.alpha is not None else "strategy"

    def posting_distribution(self) -> np.ndarray:
        if self.alpha is not None:
            return self.alpha
        return self.partition.thinning(self.market.n_ticks)


@dataclass
class Estimate:
    """Point estimate with a batch-means 95% half-width (nan when not estimable)."""

    value: np.ndarray
    half_width: np.ndarray


@dataclass
class SimEstimates:
    mean_wait: Estimate
    time_avg_inventory: Estimate
    best_price_tail: Estimate
    cond_inventory: Estimate
    cond_time_fraction: np.ndarray
    exec_price_pmf: np.ndarray
    trades: np.ndarray  # executed trades per tick
    posted: np.ndarray  # seller arrivals per tick
    alpha_hat: np.ndarray
    stationary: np.ndarray
    n_trades: int
    n_lost_buyers: int
    n_buyers: int
    n_sellers: int
    duration: float
    seed: int
    lam: float = field(default=math.nan)

    @property
    def low_confidence(self) -> np.ndarray:
        return self.cond_time_fraction < 0.01

    def little_law_gap(self) -> tuple[np.ndarray, np.ndarray]:
        """``|Q - lam * alpha_hat * W|`` and the matching 3-half-width allowance, per tick."""
        pred = self.lam * self.alpha_hat * self.mean_wait.value
        gap = np.abs(self.time_avg_inventory.value - pred)
        allow = 3 * (self.time_avg_inventory.half_width + self.lam * self.alpha_hat * self.mean_wait.half_width)
        return gap, allow


def _batch_estimate(num: np.ndarray, den: np.ndarray) -> Estimate:
    """Ratio estimator sum(num)/sum(den) with half-width from per-batch ratios."""
    tot_den = den.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = num.sum(axis=0) / tot_den
        ratios = num / den
    hw = np.full(value.shape, math.nan)
    valid = den > 0
    nb = valid.sum(axis=0)
    flat_r = ratios.reshape(len(ratios), -1)
    flat_v = valid.reshape(len(valid), -1)
    flat_hw = hw.reshape(-1)
    for i in range(flat_r.shape[1]):
        k = flat_v[:, i].sum()
        if k >= 2:
            sd = flat_r[flat_v[:, i], i].std(ddof=1)
            flat_hw[i] = stats.t.ppf(0.975, k - 1) * sd / math.sqrt(k)
    return Estimate(value, flat_hw.reshape(value.shape))


def run(sim: SimConfig) -> SimEstimates:
    m = sim.market
    n = m.n_ticks
    lam, mu = float(m.lam), float(m.mu)
    if lam < 0 or mu <= 0:
        raise ValueError("need lam >= 0 and mu > 0")
    beta = [float(b) for b in m.beta]
    rng = np.random.default_rng(sim.seed)
    rate = lam + mu
    p_seller = lam / rate

    post_dist = sim.posting_distribution()
    cum_rho = np.cumsum(traffic_intensity(m, post_dist))
    stationary = cum_rho < 1.0 - STABILITY_MARGIN

    horizon = int(sim.horizon)
    warm = int(sim.warmup_fraction * horizon)
    nb = sim.n_batches
    # buyer count at which each batch ends
    ends = [warm + (horizon - warm) * (b + 1) // nb for b in range(nb)]

    b_dur = np.zeros(nb)
    b_area = np.zeros((nb, n))
    b_wsum = np.zeros((nb, n))
    b_wcnt = np.zeros((nb, n))
    b_posted = np.zeros((nb, n))
    b_Ltime = np.zeros((nb, n + 1))
    b_Larea = np.zeros((nb, n + 1))
    n_trades = n_lost = 0

    random_discipline = sim.discipline == RANDOM
    queues = [deque() if not random_discipline else [] for _ in range(n)]
    X = [0] * n
    last = [0.0] * n
    area = [0.0] * n
    wsum = [0.0] * n
    wcnt = [0] * n
    posted = [0] * n
    Ltime = [0.0] * (n + 1)
    Larea = [0.0] * (n + 1)
    mask = 0
    total = 0
    t = 0.0
    t_last = 0.0
    L = n
    buyers = 0
    batch = -1  # -1 while warming up
    batch_start = 0.0
    next_edge = warm if warm > 0 else None

    def flush(now):
        for j in range(n):
            area[j] += X[j] * (now - last[j])
            last[j] = now

    def close_batch(idx, now):
        nonlocal batch_start
        flush(now)
        if idx >= 0:
            b_dur[idx] = now - batch_start
            b_area[idx] = area
            b_wsum[idx] = wsum
            b_wcnt[idx] = wcnt
            b_posted[idx] = posted
            b_Ltime[idx] = Ltime
            b_Larea[idx] = Larea
        for j in range(n):
            area[j] = 0.0
            wsum[j] = 0.0
            wcnt[j] = 0
            posted[j] = 0
        for j in range(n + 1):
            Ltime[j] = 0.0
            Larea[j] = 0.0
        batch_start = now

    if next_edge is None:
        batch = 0
        next_edge = ends[0]

    if sim.mode == "alpha":
        cdf_ticks = np.cumsum(post_dist)
        cdf_ticks[-1] = 1.0
    part = sim.partition
    patience = m.patience

    done = False
    while not done:
        dts = rng.exponential(1.0 / rate, _CHUNK)
        kinds = rng.random(_CHUNK)
        draws = rng.random(_CHUNK)
        if sim.mode == "alpha":
            ticks = np.searchsorted(cdf_ticks, draws, side="right")
            np.minimum(ticks, n - 1, out=ticks)
        else:
            deltas = patience.ppf(draws)
            idx = np.searchsorted(part.lo, deltas, side="right") - 1
            ticks = part.ticks[np.maximum(idx, 0)] - 1
        buys = rng.random(_CHUNK)
        picks = rng.random(_CHUNK) if random_discipline else None
        dts_l = dts.tolist()
        kinds_l = kinds.tolist()
        ticks_l = ticks.tolist()
        buys_l = buys.tolist()
        picks_l = picks.tolist() if picks is not None else None
        for i in range(_CHUNK):
            t += dts_l[i]
            if kinds_l[i] < p_seller:
                j = ticks_l[i]
                dt = t - t_last
                Ltime[L] += dt
                Larea[L] += total * dt
                t_last = t
                area[j] += X[j] * (t - last[j])
                last[j] = t
                X[j] += 1
                total += 1
                queues[j].append(t)
                posted[j] += 1
                mask |= 1 << j
                if j < L:
                    L = j
                continue
            # buyer arrival
            buyers += 1
            if L == n or buys_l[i] >= beta[L]:
                n_lost += batch >= 0
            else:
                j = L
                dt = t - t_last
                Ltime[L] += dt
                Larea[L] += total * dt
                t_last = t
                area[j] += X[j] * (t - last[j])
                last[j] = t
                q = queues[j]
                if random_discipline:
                    k = int(picks_l[i] * len(q))
                    q[k], q[-1] = q[-1], q[k]
                    t0 = q.pop()
                else:
                    t0 = q.popleft()
                X[j] -= 1
                total -= 1
                if X[j] == 0:
                    mask &= ~(1 << j)
                    L = (mask & -mask).bit_length() - 1 if mask else n
                if batch >= 0:
                    wsum[j] += t - t0
                    wcnt[j] += 1
                    n_trades += 1
            if buyers == next_edge:
                dt = t - t_last
                Ltime[L] += dt
                Larea[L] += total * dt
                t_last = t
                close_batch(batch, t)
                batch += 1
                if batch >= nb:
                    done = True
                    break
                next_edge = ends[batch]

    duration = float(b_dur.sum())
    dur_col = b_dur[:, None]
    mean_wait = _batch_estimate(b_wsum, b_wcnt)
    inventory = _batch_estimate(b_area, np.broadcast_to(dur_col, b_area.shape))

    # time with ticks 1..j all empty == best ask index (0-based) >= j
    tail_time = np.cumsum(b_Ltime[:, ::-1], axis=1)[:, ::-1][:, 1:]
    tail = _batch_estimate(tail_time, np.broadcast_to(dur_col, tail_time.shape))
    cond_time = np.cumsum(b_Ltime[:, ::-1], axis=1)[:, ::-1][:, :n]
    cond_area = np.cumsum(b_Larea[:, ::-1], axis=1)[:, ::-1][:, :n]
    cond = _batch_estimate(cond_area, cond_time)

    trades = b_wcnt.sum(axis=0)
    posted_tot = b_posted.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        pmf = trades / trades.sum() if trades.sum() > 0 else np.zeros(n)
        alpha_hat = posted_tot / posted_tot.sum() if posted_tot.sum() > 0 else np.zeros(n)
    n_buyers = horizon - warm
    return SimEstimates(
        mean_wait=mean_wait,
        time_avg_inventory=inventory,
        best_price_tail=tail,
        cond_inventory=cond,
        cond_time_fraction=cond_time.sum(axis=0) / duration if duration > 0 else np.zeros(n),
        exec_price_pmf=pmf,
        trades=trades.astype(int),
        posted=posted_tot.astype(int),
        alpha_hat=alpha_hat,
        stationary=stationary,
        n_trades=int(n_trades),
        n_lost_buyers=int(n_lost),
        n_buyers=int(n_buyers),
        n_sellers=int(posted_tot.sum()),
        duration=duration,
        seed=sim.seed,
        lam=lam,
    )


def empirical_best_response(
    sim: SimConfig,
    estimates: SimEstimates,
    epsilon: float | None = None,
    patience: PatienceDistribution | None = None,
    min_trades: int = 1,
) -> np.ndarray:
    """Thinning vector induced when sellers best-respond to the simulated waits.

    Ticks with fewer than ``min_trades`` executions, or flagged non-stationary,
    are treated as unavailable (infinite wait).
    """
    epsilon = sim.market.epsilon if epsilon is None else epsilon
    patience = sim.market.patience if patience is None else patience
    T = np.array(estimates.mean_wait.value, dtype=float)
    bad = (estimates.trades < max(min_trades, 1)) | ~estimates.stationary | ~np.isfinite(T)
    if np.any(bad):
        warnings.warn(f"excluding {int(bad.sum())} ticks without a usable wait estimate", stacklevel=2)
    T[bad] = math.inf
    return best_response(T, epsilon, patience).thinning(sim.market.n_ticks)


def total_variation(a, b) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def best_response_regret(partition: BestResponsePartition, exec_time, epsilon: float, patience: PatienceDistribution,
                         n_points: int = 4001) -> float:
    """Expected utility a seller gives up by following ``partition`` when waits are ``exec_time``.

    Measured in ticks and averaged over patience quantiles.  Unlike the
    induced thinning vector this is insensitive to small errors in
    ``exec_time``.
    """
    T = np.asarray(exec_time, dtype=float)
    deltas = patience.ppf((np.arange(n_points) + 0.5) / n_points)
    ticks = np.arange(1, len(T) + 1)
    finite = np.isfinite(T)
    util = epsilon * ticks[None, finite] - deltas[:, None] * T[None, finite]
    best = util.max(axis=1)
    chosen = np.array([partition.tick_at(float(d)) for d in deltas])
    T_chosen = T[chosen - 1]
    played = np.where(np.isfinite(T_chosen), epsilon * chosen - deltas * T_chosen, -math.inf)
    return float(np.mean(best - played) / epsilon)

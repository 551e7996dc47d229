"""Continuous-price equilibrium when buyers ignore price (beta == 1).

Prices live on ``[0, inf)``.  With load ``rho = lam / mu`` and patience
``F(x) = (x / delta_bar) ** gamma`` the equilibrium price CDF ``F_P`` solves

    dF/dp = mu / (2 delta_bar) * (1 - rho F)**3 / (rho (1 - F)**(1/gamma)),  F(0) = 0.

Closed forms exist for ``gamma = 1, rho < 1`` (bounded support ``[0, K]``) and
for ``rho = 1`` with any ``gamma`` in ``(1/2, 1]`` (power-law tail).  The two
regimes are kept on separate code paths; ``rho = 1`` is never pushed through
the ``rho < 1`` formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

INF = math.inf


@dataclass(frozen=True)
class InelasticParams:
    rho: float
    mu: float
    delta_bar: float
    gamma: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.delta_bar > 0:
            raise ValueError("delta_bar must be positive")
        if not 0.5 < self.gamma <= 1:
            raise ValueError("gamma must lie in (1/2, 1]")

    @property
    def critical(self) -> bool:
        return self.rho == 1.0

    @property
    def support(self) -> float:
        """Upper end K of the price support; infinite at rho = 1."""
        if self.critical:
            return INF
        return (self.delta_bar / self.mu) * self.rho / (1.0 - self.rho)

    @property
    def price_scale(self) -> float:
        return self.delta_bar / self.mu

    @property
    def tail_exponent(self) -> float:
        return self.gamma / (2 * self.gamma - 1)


def surplus(params: InelasticParams, p, delta, F_at_p):
    """Expected surplus of posting at ``p`` when a fraction ``F_at_p`` of orders sits below it."""
    rF = params.rho * np.asarray(F_at_p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        wait = (rF / (1 - rF) ** 2 + 1 / (1 - rF)) / params.mu
        out = np.where(rF < 1, np.asarray(p, dtype=float) - np.asarray(delta, dtype=float) * wait, -INF)
    return float(out) if out.ndim == 0 else out


def delta_of_price(params: InelasticParams, F_at_p, density_at_p):
    """Patience level for which ``p`` satisfies the first-order condition."""
    dens = np.asarray(density_at_p, dtype=float)
    if np.any(dens <= 0):
        raise ValueError("first-order condition undefined where the price density vanishes")
    rF = params.rho * np.asarray(F_at_p, dtype=float)
    out = 0.5 * params.mu * (1 - rF) ** 3 / (params.rho * dens)
    return float(out) if out.ndim == 0 else out


def ode_rhs(params: InelasticParams, F):
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (params.mu / (2 * params.delta_bar)) * (1 - params.rho * F) ** 3 / (
            params.rho * (1 - F) ** (1.0 / params.gamma)
        )
    return float(out) if out.ndim == 0 else out


def equilibrium_cdf(params: InelasticParams, p):
    """Closed-form price CDF for uniform patience and rho < 1."""
    if params.critical:
        raise ValueError("rho = 1 has no bounded support; use limit_cdf or gamma_tail")
    if params.gamma != 1:
        raise ValueError("closed form only for uniform patience (gamma = 1)")
    r = params.rho
    p = np.asarray(p, dtype=float)
    x = 1 + params.mu * np.clip(p, 0.0, params.support) / params.delta_bar
    num = r * x - np.sqrt(np.maximum(1 - (1 - r) * (1 + r * x), 0.0))
    F = num / (r * (1 + r * x))
    F = np.where(p <= 0, 0.0, np.where(p >= params.support, 1.0, F))
    return float(F) if F.ndim == 0 else F


def interior_cdf(params: InelasticParams, p):
    """The bounded-support formula evaluated as written, with no clamping to [0, K]."""
    r = params.rho
    x = 1 + params.mu * np.asarray(p, dtype=float) / params.delta_bar
    F = (r * x - np.sqrt(1 - (1 - r) * (1 + r * x))) / (r * (1 + r * x))
    return float(F) if F.ndim == 0 else F


def limit_cdf(params: InelasticParams, p):
    """rho -> 1 limit of the uniform-patience CDF."""
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    F = 1 - 2 * params.delta_bar / (2 * params.delta_bar + params.mu * p)
    return float(F) if F.ndim == 0 else F


def gamma_tail(params: InelasticParams, p):
    """Survival ``1 - F_P(p)`` at rho = 1 for power-law patience."""
    if not params.critical:
        raise ValueError("power-law tail closed form requires rho = 1")
    g = params.gamma
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    S = (1 + (2 * g - 1) * params.mu * p / (2 * g * params.delta_bar)) ** (-g / (2 * g - 1))
    return float(S) if S.ndim == 0 else S


def cdf(params: InelasticParams, p):
    """Whichever closed form applies to these parameters."""
    if params.critical:
        if params.gamma == 1:
            return limit_cdf(params, p)
        S = gamma_tail(params, p)
        return 1 - S
    return equilibrium_cdf(params, p)


def density(params: InelasticParams, p):
    """Equilibrium price density, from the ODE right-hand side at the closed-form CDF."""
    p = np.asarray(p, dtype=float)
    out = np.where((p >= 0) & (p < params.support), ode_rhs(params, cdf(params, p)), 0.0)
    return float(out) if out.ndim == 0 else out


def ode_residual(params: InelasticParams, grid, F_values) -> float:
    """Sup-norm mismatch between the finite-difference slope of ``F_values`` and the ODE.

    Uses the three-point second-order formula, which is the plain central
    difference on a uniform grid and stays second order on graded grids.
    Points with ``F >= 1 - 1e-6`` are skipped.
    """
    p = np.asarray(grid, dtype=float)
    F = np.asarray(F_values, dtype=float)
    if len(p) < 3:
        raise ValueError("need at least three grid points")
    hm = p[1:-1] - p[:-2]
    hp = p[2:] - p[1:-1]
    dF = (hm**2 * F[2:] - hp**2 * F[:-2] + (hp**2 - hm**2) * F[1:-1]) / (hm * hp * (hm + hp))
    Fi = F[1:-1]
    ok = Fi < 1 - 1e-6
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(dF[ok] - ode_rhs(params, Fi[ok]))))


def graded_grid(K: float, n: int, frac: float = 0.999) -> np.ndarray:
    """``n`` points on ``[0, frac * K]`` whose spacing shrinks geometrically toward ``K``.

    The CDF has a square-root singularity at ``K``; uniform spacing there makes
    finite differences useless long before the formula itself is in doubt.
    """
    u = np.linspace(0.0, 1.0, n)
    return K * (1.0 - (1.0 - frac) ** u)


@dataclass
class OdeSolution:
    grid: np.ndarray
    F: np.ndarray
    status: str  # "p_max", "terminal" or "underflow"

    @property
    def reached(self) -> float:
        return float(self.grid[-1])

    def crossing(self, level: float) -> float:
        """First price at which F reaches ``level`` (linear interpolation), inf if never."""
        idx = np.flatnonzero(self.F >= level)
        if len(idx) == 0:
            return INF
        i = idx[0]
        if i == 0:
            return float(self.grid[0])
        p0, p1, f0, f1 = self.grid[i - 1], self.grid[i], self.F[i - 1], self.F[i]
        return float(p0 + (level - f0) * (p1 - p0) / (f1 - f0))


def _rk4_step(params, F, h):
    k1 = ode_rhs(params, F)
    k2 = ode_rhs(params, F + 0.5 * h * k1)
    k3 = ode_rhs(params, F + 0.5 * h * k2)
    k4 = ode_rhs(params, F + h * k3)
    return F + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def integrate_ode(
    params: InelasticParams,
    p_max: float,
    h0: float | None = None,
    atol: float = 1e-12,
    terminal: float = 1 - 1e-9,
    h_min_rel: float = 1e-15,
) -> OdeSolution:
    """RK4 from ``F(0) = 0`` with step-doubling error control.

    The right-hand side blows up like ``(1 - F)**(-1/gamma)``, so steps shrink
    automatically as ``F -> 1``.  Any step whose stages leave ``[0, 1)`` is
    halved.  Stops at ``p_max``, at ``F >= terminal``, or when the step
    underflows.
    """
    h = h0 if h0 is not None else min(p_max, params.price_scale) * 1e-3
    p, F = 0.0, 0.0
    ps, Fs = [p], [F]
    status = "p_max"
    while p < p_max:
        if F >= terminal:
            status = "terminal"
            break
        h = min(h, p_max - p)
        if h <= h_min_rel * max(1.0, p):
            status = "underflow"
            break
        full = _rk4_step(params, F, h)
        half = _rk4_step(params, F, 0.5 * h)
        two = _rk4_step(params, half, 0.5 * h) if np.isfinite(half) and half < 1 else math.nan
        if not (np.isfinite(full) and np.isfinite(two) and two < 1 and full < 1):
            h *= 0.5
            continue
        err = abs(two - full) / 15
        if err > atol:
            h *= 0.5
            continue
        F_new = two + (two - full) / 15
        if not F_new < 1:
            h *= 0.5
            continue
        p += h
        F = F_new
        ps.append(p)
        Fs.append(F)
        if err < atol / 64:
            h *= 2
    return OdeSolution(np.array(ps), np.array(Fs), status)


def inventory_density(params: InelasticParams, p):
    """Expected outstanding orders per unit price at ``p``."""
    p = np.asarray(p, dtype=float)
    base = params.mu / (2 * params.delta_bar)
    if params.critical:
        g = params.gamma
        out = base * (1 + (2 * g - 1) * params.mu * np.maximum(p, 0) / (2 * g * params.delta_bar)) ** (
            (1 - g) / (2 * g - 1)
        )
    else:
        if params.gamma != 1:
            raise ValueError("inventory closed form below rho = 1 requires gamma = 1")
        if np.any((p < 0) | (p >= params.support)):
            raise ValueError(f"price outside [0, K) with K = {params.support}")
        F = np.asarray(equilibrium_cdf(params, p))
        out = base * (1 + (1 - params.rho) * F / (1 - F))
    return float(out) if out.ndim == 0 else out


def price_of_cdf(params: InelasticParams, F):
    """Inverse of the equilibrium CDF for rho < 1 and any gamma.

    ``dp/dF`` is the reciprocal of the ODE right-hand side, which integrates to
    a Gauss hypergeometric function; ``price_of_cdf(params, 1)`` is the upper
    end of the support.
    """
    if params.critical:
        raise ValueError("rho = 1 has closed-form CDFs; no inversion needed")
    a = 1.0 / params.gamma
    r = params.rho
    c = r / (1 - r)

    def G(x):
        return x ** (a + 1) / (a + 1) * special.hyp2f1(3.0, a + 1, a + 2, -c * x)

    F = np.asarray(F, dtype=float)
    out = 2 * params.delta_bar * r / (params.mu * (1 - r) ** 3) * (G(1.0) - G(1 - F))
    return float(out) if out.ndim == 0 else out


def support_end(params: InelasticParams) -> float:
    """Upper end of the price support: K for gamma = 1, the inverse CDF at 1 otherwise, inf at rho = 1."""
    if params.critical:
        return INF
    if params.gamma == 1:
        return params.support
    return price_of_cdf(params, 1.0)


def cdf_by_inversion(params: InelasticParams, p, iters: int = 64):
    """Equilibrium CDF for rho < 1 by bisection on :func:`price_of_cdf`."""
    p = np.asarray(p, dtype=float)
    lo = np.zeros_like(p)
    hi = np.ones_like(p)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = price_of_cdf(params, mid) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    F = np.where(p <= 0, 0.0, np.where(p >= support_end(params), 1.0, 0.5 * (lo + hi)))
    return float(F) if F.ndim == 0 else F


def inventory_from_cdf(params: InelasticParams, F):
    """Inventory density as a function of the price CDF; valid for any rho and gamma."""
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore"):
        out = (params.mu / (2 * params.delta_bar)) * (1 - params.rho * F) / (1 - F) ** (1.0 / params.gamma)
    out = np.where(F < 1, out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class Curves:
    p: np.ndarray
    F: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    D: np.ndarray
    method: str  # "closed form" or "inverse cdf"


def has_closed_form(params: InelasticParams) -> bool:
    return params.critical or params.gamma == 1


def tabulate(params: InelasticParams, p) -> Curves:
    """Price CDF, density, inventory density and depth on ``p`` (sorted, starting at 0).

    Uses the closed forms where they exist and otherwise inverts
    :func:`price_of_cdf`.  Depth here is the trapezoid integral of the
    inventory density on ``p``; :func:`market_depth` is the accurate version.
    """
    p = np.asarray(p, dtype=float)
    if np.any(np.diff(p) <= 0) or p[0] < 0:
        raise ValueError("price grid must be increasing and non-negative")
    if has_closed_form(params):
        F = np.asarray(cdf(params, p), dtype=float)
        method = "closed form"
    else:
        F = cdf_by_inversion(params, p)
        method = "inverse cdf"
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(F < 1, ode_rhs(params, np.minimum(F, 1 - 1e-300)), 0.0)
    Q = inventory_from_cdf(params, F)
    D = np.concatenate(([0.0], np.cumsum(0.5 * (Q[1:] + Q[:-1]) * np.diff(p))))
    return Curves(p, F, f, Q, D, method)


def _block_conditional_mean(r1, r2):
    """E[orders in block 2 | block 1 empty] for aggregate loads r1 (ahead) and r2 (block)."""
    return r2 * (1 - 2 * r1 + r1 * r1 + r1 * r2) / ((1 - r1) ** 2 * (1 - r1 - r2))


def conditional_mean(params: InelasticParams, s: float, p: float | None = None) -> float:
    """Expected orders priced in ``(s, p]`` given the best ask is ``s``; ``p`` defaults to the support end."""
    p = params.support if p is None else p
    v1 = params.rho * cdf(params, s)
    v2 = params.rho * cdf(params, p)
    if v2 >= 1:
        return INF
    return float(_block_conditional_mean(v1, v2 - v1))


def conditional_from_cdf(rho: float, F_s: float, F_p, f_p):
    """Conditional order density from ``F_P(s)``, ``F_P(p)`` and ``f_P(p)``."""
    v1 = rho * F_s
    v2 = rho * np.asarray(F_p, dtype=float)
    bracket = (1 - 3 * v1 + v1**2 + 2 * v1 * v2 - v1 * v2**2) / ((1 - v1) ** 2 * (1 - v2) ** 2)
    with np.errstate(invalid="ignore"):
        out = np.where(v2 < 1, bracket * rho * np.asarray(f_p, dtype=float), INF)
    return float(out) if out.ndim == 0 else out


def conditional_density(params: InelasticParams, p, s: float):
    """Expected order density at ``p`` given the current best ask is ``s <= p``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < s) or s < 0:
        raise ValueError("need p >= s >= 0")
    return conditional_from_cdf(params.rho, cdf(params, s), cdf(params, p), density(params, p))


def market_depth(params: InelasticParams, p):
    """Expected number of orders priced at or below ``p`` (quadrature of the inventory density)."""

    def one(x):
        if x <= 0:
            return 0.0
        upper = min(x, params.support)
        if not params.critical and upper >= params.support:
            upper = math.nextafter(params.support, 0.0)
        val, _ = integrate.quad(lambda u: inventory_density(params, u), 0.0, upper, limit=200, epsabs=0, epsrel=1e-12)
        return val

    p = np.asarray(p, dtype=float)
    out = np.vectorize(one, otypes=[float])(p)
    return float(out) if out.ndim == 0 else out


def price_of_delta(params: InelasticParams, delta):
    """Price posted in equilibrium by a seller with patience ``delta`` (rho = 1)."""
    if not params.critical:
        raise ValueError("closed-form strategy requires rho = 1")
    d = np.asarray(delta, dtype=float)
    if np.any((d < 0) | (d > params.delta_bar)):
        raise ValueError("delta outside [0, delta_bar]")
    g = params.gamma
    with np.errstate(divide="ignore"):
        out = (2 * g * params.delta_bar / (params.mu * (2 * g - 1))) * ((params.delta_bar / d) ** (2 * g - 1) - 1)
    out = np.where(d == 0, INF, out)
    return float(out) if out.ndim == 0 else out


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# window (in units of delta_bar / mu) where the power laws have settled to their asymptotic slope
ASYMPTOTIC_WINDOW = (1e3, 1e6)


def _window_grid(params, window, n):
    lo, hi = window
    return np.geomspace(lo, hi, n) * params.price_scale


def tail_slope(params: InelasticParams, window=ASYMPTOTIC_WINDOW, n: int = 200) -> float:
    p = _window_grid(params, window, n)
    return loglog_slope(p, gamma_tail(params, p))


def depth_slope(params: InelasticParams, window=ASYMPTOTIC_WINDOW, n: int = 200) -> float:
    p = _window_grid(params, window, n)
    return loglog_slope(p, market_depth(params, p))


def impact_slope(params: InelasticParams, window=ASYMPTOTIC_WINDOW, n: int = 200) -> float:
    """Slope of price against depth consumed: log p vs log D."""
    p = _window_grid(params, window, n)
    return loglog_slope(market_depth(params, p), p)

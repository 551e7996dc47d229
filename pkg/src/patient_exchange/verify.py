"""End-to-end acceptance checks, shared by the test suite and ``patient-exchange verify``.

Each check returns a :class:`Check` with one or more named sub-results.
``quick=True`` cuts simulation horizons 10x and widens every tolerance 2x.
"""

from __future__ import annotations

import inspect
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import inelastic as inel
from .equilibrium import TwoPriceProblem, monotone_partition, solve_equilibrium, two_price_equilibrium
from .market import DemandCurve, MarketConfig, PatienceDistribution, example_config
from .queueing import conditional_inventory, execution_time, expected_inventory
from .simulator import SimConfig, best_response_regret, empirical_best_response, run, total_variation

DEFAULT_SEED = 0


@dataclass
class Check:
    name: str
    parts: list = field(default_factory=list)  # (label, passed, detail)
    seconds: float = 0.0

    def add(self, label: str, passed: bool, detail: str):
        self.parts.append((label, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(p for _, p, _ in self.parts)

    def lines(self) -> list[str]:
        return [f"{self.name:4s} {'PASS' if ok else 'FAIL'}  {label}: {detail}" for label, ok, detail in self.parts]


def _scale(quick: bool) -> tuple[int, float]:
    return (10, 2.0) if quick else (1, 1.0)


@lru_cache(maxsize=4)
def example_equilibrium(n_restarts: int = 20, seed: int = DEFAULT_SEED):
    return solve_equilibrium(example_config(), tol=1e-8, n_restarts=n_restarts, rng=seed)


def mm1_config(lam=3.0, mu=12.0) -> MarketConfig:
    return MarketConfig(lam, mu, 1.0, 1, DemandCurve.constant(1), PatienceDistribution.uniform(1.0))


def check_a1(quick: bool = False) -> Check:
    c = Check("A1")
    cfg = mm1_config()
    T = execution_time(cfg, [1.0])[0]
    Q = expected_inventory(cfg, [1.0])[0]
    c.add("T(1) = 1/9", abs(T - 1 / 9) <= 1e-12, f"|T - 1/9| = {abs(T - 1 / 9):.2e}")
    c.add("Q_1 = 1/3", abs(Q - 1 / 3) <= 1e-12, f"|Q - 1/3| = {abs(Q - 1 / 3):.2e}")
    return c


def check_a2(quick: bool = False, seed: int = DEFAULT_SEED) -> Check:
    c = Check("A2")
    div, widen = _scale(quick)
    res = example_equilibrium()
    cfg = example_config()
    est = run(SimConfig(cfg, alpha=res.alpha_star, horizon=10**6 // div, seed=seed))
    T = res.analytics.exec_time
    min_trades = 1000 // div
    ok = est.trades >= min_trades
    rel = np.abs(est.mean_wait.value - T) / T
    worst = int(np.argmax(np.where(ok, rel, -1))) + 1
    tol = 0.05 * widen
    c.add(
        f"mean wait within {tol:.0%} on ticks with >= {min_trades} trades",
        ok.any() and rel[ok].max() <= tol,
        f"{int(ok.sum())} ticks, max rel err {rel[ok].max():.4f} at tick {worst}",
    )
    return c


def check_a3(quick: bool = False, seed: int = DEFAULT_SEED) -> Check:
    c = Check("A3")
    div, widen = _scale(quick)
    rho = np.array([0.25, 0.25])
    r = conditional_inventory([0.3], 1, 1)
    c.add("j=1 reduction rho/(1-rho)", abs(r - 0.3 / 0.7) <= 1e-12, f"|err| = {abs(r - 0.3 / 0.7):.2e}")
    exact = conditional_inventory(rho, 2, 2)
    # two ticks, equal service rate, loads 0.25 each
    cfg = MarketConfig(1.0, 2.0, 1.0, 2, DemandCurve.constant(2), PatienceDistribution.uniform(1.0))
    est = run(SimConfig(cfg, alpha=np.array([0.5, 0.5]), horizon=10**6 // div, seed=seed))
    sim = est.cond_inventory.value[1]
    frac = est.cond_time_fraction[1]
    tol = 0.10 * widen
    c.add(
        f"simulated E[X2 | X1 = 0] within {tol:.0%}",
        frac >= 0.01 and abs(sim - exact) / exact <= tol,
        f"closed form {exact:.4f}, simulated {sim:.4f} +- {est.cond_inventory.half_width[1]:.4f}, conditioning time {frac:.2f}",
    )
    return c


def check_a4(quick: bool = False) -> Check:
    c = Check("A4")
    _, widen = _scale(quick)
    res = example_equilibrium()
    tol = 1.0 * widen
    am, asd = res.alpha_moments
    pm, psd = res.price_moments
    c.add("residual < 1e-6", res.residual < 1e-6, f"{res.residual:.2e} after {res.restarts_used} restarts")
    c.add("alpha* mean/std ~ 12.70/10.52", abs(am - 12.70) <= tol and abs(asd - 10.52) <= tol, f"{am:.3f}/{asd:.3f}")
    c.add("time-average price mean/std ~ 23.77/15.55", abs(pm - 23.77) <= tol and abs(psd - 15.55) <= tol, f"{pm:.3f}/{psd:.3f}")
    c.add(
        "strategy monotone where premise holds",
        (not res.premise_holds) or res.strategy_monotone,
        f"premise {'holds' if res.premise_holds else 'fails'}, monotone={res.strategy_monotone}",
    )
    return c


def check_a5(quick: bool = False) -> Check:
    c = Check("A5")
    _, widen = _scale(quick)
    tol = 1e-6 * widen
    P = inel.InelasticParams(0.5, 12.0, 160.0)
    K = P.support
    grid = inel.graded_grid(K, 10**4)
    r = inel.ode_residual(P, grid, inel.equilibrium_cdf(P, grid))
    c.add("closed-form CDF satisfies its ODE (gamma=1, rho=0.5)", r < tol, f"sup residual {r:.2e}")

    Pc = inel.InelasticParams(1.0, 12.0, 160.0, 0.75)
    g = np.linspace(0, 100 * Pc.price_scale, 10**4)
    r = inel.ode_residual(Pc, g, 1 - inel.gamma_tail(Pc, g))
    c.add("power-tail CDF satisfies its ODE (gamma=3/4, rho=1)", r < tol, f"sup residual {r:.2e}")

    sol = inel.integrate_ode(P, 2 * K)
    err = np.max(np.abs(sol.F - inel.equilibrium_cdf(P, sol.grid)))
    c.add("RK4 matches bounded-support CDF", err < tol, f"max |err| {err:.2e} over {len(sol.grid)} points ({sol.status})")
    P1 = inel.InelasticParams(1.0, 12.0, 160.0, 1.0)
    sol = inel.integrate_ode(P1, 10 * P1.price_scale)
    err = np.max(np.abs(sol.F - inel.limit_cdf(P1, sol.grid)))
    c.add("RK4 matches rho->1 limit CDF", err < tol, f"max |err| {err:.2e}")
    sol = inel.integrate_ode(Pc, 10 * Pc.price_scale)
    err = np.max(np.abs(sol.F - (1 - inel.gamma_tail(Pc, sol.grid))))
    c.add("RK4 matches power-tail CDF", err < tol, f"max |err| {err:.2e}")

    f0 = inel.interior_cdf(P, 0.0)
    fK = inel.interior_cdf(P, K)
    c.add("F*(0)=0 and F*(K)=1", abs(f0) <= 1e-9 * widen and abs(fK - 1) <= 1e-9 * widen, f"F(0)={f0:.2e}, 1-F(K)={1 - fK:.2e}")
    return c


def check_a6(quick: bool = False) -> Check:
    c = Check("A6")
    _, widen = _scale(quick)
    P = inel.InelasticParams(0.999, 12.0, 160.0)
    p = np.linspace(0, 100 * P.price_scale, 10**5)
    d = np.max(np.abs(inel.equilibrium_cdf(P, p) - inel.limit_cdf(P, p)))
    c.add("rho=0.999 CDF near its limit", d < 0.01 * widen, f"sup distance {d:.4f}")
    Pc = inel.InelasticParams(1.0, 12.0, 160.0, 0.75)
    tol = 0.01 * widen
    s = inel.tail_slope(Pc)
    c.add("tail slope -1.5", abs(s + 1.5) <= tol, f"{s:.4f}")
    s = inel.depth_slope(Pc)
    c.add("depth slope 1.5", abs(s - 1.5) <= tol, f"{s:.4f}")
    s = inel.impact_slope(Pc)
    c.add("price impact exponent 2/3", abs(s - 2 / 3) <= tol, f"{s:.4f}")
    return c


def perturb_toward_top(alpha, mass: float = 0.1) -> np.ndarray:
    """Move ``mass`` of probability from the lowest ticks (tick 1 first) onto the top tick."""
    a = np.array(alpha, dtype=float)
    need = mass
    for j in range(len(a) - 1):
        take = min(a[j], need)
        a[j] -= take
        need -= take
        if need <= 0:
            break
    a[-1] += mass - need
    return a


def _simulated_waits(est) -> np.ndarray:
    T = np.array(est.mean_wait.value, dtype=float)
    T[(est.trades < 1) | ~est.stationary] = np.inf
    return T


def check_a7(quick: bool = False, seed: int = DEFAULT_SEED) -> Check:
    c = Check("A7")
    div, widen = _scale(quick)
    res = example_equilibrium()
    cfg = example_config()
    tol = 0.05 * widen
    sim = SimConfig(cfg, alpha=res.alpha_star, horizon=10**6 // div, seed=seed)
    est = run(sim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = empirical_best_response(sim, est)
    tv = total_variation(out, res.alpha_star)
    regret = best_response_regret(res.partition, _simulated_waits(est), cfg.epsilon, cfg.patience)
    c.add(
        f"empirical best response within TV {tol} of alpha*",
        tv < tol,
        f"TV = {tv:.4f} (diagnostic: mean regret of the equilibrium strategy {regret:.3f} ticks)",
    )

    bad = perturb_toward_top(res.alpha_star, 0.1)
    sim = SimConfig(cfg, alpha=bad, horizon=10**6 // div, seed=seed)
    est = run(sim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = empirical_best_response(sim, est)
    tv_bad = total_variation(out, bad)
    regret_bad = best_response_regret(monotone_partition(bad, cfg.patience), _simulated_waits(est), cfg.epsilon, cfg.patience)
    c.add(
        "perturbed alpha detected",
        tv_bad > tol,
        f"TV = {tv_bad:.4f} (diagnostic: mean regret {regret_bad:.3f} ticks"
        + (", some sellers sit at a tick that never clears)" if math.isinf(regret_bad) else ")"),
    )
    return c


def check_a8(quick: bool = False) -> Check:
    c = Check("A8")
    pr = TwoPriceProblem(1.0, 1.5, 2.0, 1.0, PatienceDistribution.uniform(1.0))
    out = two_price_equilibrium(pr)
    c.add("fixed-point residual < 1e-10", out.residual < 1e-10, f"alpha2 = {out.alpha2:.12f}, residual {out.residual:.1e}")
    a, b, k = (pr.mu1 + pr.mu2) / 2, pr.mu1 - pr.mu2, pr.mu1 * pr.mu2 * (pr.p2 - pr.p1)
    q = a * out.alpha2**2 + b * out.alpha2 - k
    c.add("root satisfies the uniform-patience quadratic", abs(q) < 1e-10, f"|a x^2 + b x - c| = {abs(q):.1e}")
    exact = (-1 + math.sqrt(7)) / 3
    c.add("matches (sqrt(7) - 1)/3", abs(out.alpha2 - exact) < 1e-10, f"|err| = {abs(out.alpha2 - exact):.1e}")
    return c


CHECKS = {
    "A1": check_a1,
    "A2": check_a2,
    "A3": check_a3,
    "A4": check_a4,
    "A5": check_a5,
    "A6": check_a6,
    "A7": check_a7,
    "A8": check_a8,
}


def run_all(quick: bool = False, only=None, seed: int = DEFAULT_SEED) -> list[Check]:
    out = []
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        kw = {"seed": seed} if "seed" in inspect.signature(fn).parameters else {}
        chk = fn(quick=quick, **kw)
        chk.seconds = time.perf_counter() - t0
        out.append(chk)
    return out

"""Command-line front end.

    patient-exchange equilibrate --out runs/eq
    patient-exchange analyze --alpha runs/eq/equilibrium.csv --out runs/an
    patient-exchange simulate --alpha-from runs/eq/equilibrium.csv --out runs/sim
    patient-exchange inelastic --set inelastic.gamma=0.75 --set inelastic.rho=1
    patient-exchange two-price
    patient-exchange verify --quick

Exit codes: 0 success, 1 bad config or usage, 2 solver did not converge,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import inelastic as inel
from . import reports, verify
from .equilibrium import (
    EquilibriumNotConverged,
    NoFeasiblePosting,
    monotone_partition,
    solve_equilibrium,
    two_price_equilibrium,
)
from .market import validate
from .queueing import analyze, as_simplex
from .simulator import SimConfig, run

log = logging.getLogger("patient_exchange")

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_ACCEPTANCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Run:
    """Resolved config, output directory and the comment stamped on every file."""

    def __init__(self, args):
        self.args = args
        overrides = list(args.set or [])
        self.cfg = cfgmod.load(args.config, overrides)
        if args.seed is not None:
            self.cfg["seed"] = int(args.seed)
        self.seed = int(self.cfg["seed"])
        self.hash = cfgmod.config_hash(self.cfg)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.plots = not args.no_plots

    def comment(self, extra: str = "") -> str:
        s = f"config_hash={self.hash} seed={self.seed}"
        return f"{s} {extra}".rstrip()

    def market(self):
        market = cfgmod.market_from_dict(self.cfg)
        report = validate(market)
        if not report:
            raise UsageError(str(report))
        return market


def _parse_alpha(spec: str, n_ticks: int) -> np.ndarray:
    path = Path(spec)
    if path.exists():
        alpha = reports.read_alpha(path)
    else:
        try:
            alpha = np.array([float(x) for x in spec.replace(",", " ").split()])
        except ValueError:
            raise UsageError(f"--alpha: {spec!r} is neither a file nor a list of numbers") from None
    if len(alpha) != n_ticks:
        raise UsageError(f"alpha has {len(alpha)} entries, config has {n_ticks} ticks")
    if np.any(alpha < 0) or not np.isclose(alpha.sum(), 1.0, atol=1e-9):
        raise UsageError("alpha must be non-negative and sum to 1")
    return as_simplex(alpha)


def _analytics_columns(an, alpha_name="alpha"):
    return {
        "tick": np.arange(1, len(an.alpha) + 1),
        alpha_name: an.alpha,
        "rho": an.rho,
        "exec_time": an.exec_time,
        "inventory": an.inventory,
        "tail": an.tail,
    }


def cmd_analyze(r: _Run) -> int:
    market = r.market()
    if r.args.alpha is None:
        raise UsageError("analyze needs --alpha FILE or --alpha 'a1,a2,...'")
    alpha = _parse_alpha(r.args.alpha, market.n_ticks)
    an = analyze(market, alpha)
    path = reports.write_columns(r.out / "analytics.csv", _analytics_columns(an), r.comment())
    if np.isfinite(an.stable_up_to) and an.stable_up_to < market.n_ticks:
        log.warning("only the first %d ticks are stable; the rest have infinite execution time", an.stable_up_to)
    print(path)
    return EXIT_OK


def _solve(r: _Run, market, raise_on_failure=True):
    s = r.cfg["solver"]
    return solve_equilibrium(
        market,
        tol=float(s["tol"]),
        max_iter=int(s["max_iter"]),
        n_restarts=int(s["n_restarts"]),
        rng=r.seed,
        eta=float(s["eta"]),
        raise_on_failure=raise_on_failure,
    )


def cmd_equilibrate(r: _Run) -> int:
    market = r.market()
    failed = False
    try:
        res = _solve(r, market)
    except EquilibriumNotConverged as exc:
        res, failed = exc.result, True
    marker = " FAILED: residual above tolerance" if failed else ""
    an = res.analytics
    cols = _analytics_columns(an, "alpha_star")
    del cols["rho"]
    reports.write_columns(r.out / "equilibrium.csv", cols, r.comment(marker))
    part = res.partition
    reports.write_columns(
        r.out / "partition.csv", {"delta_lo": part.lo, "delta_hi": part.hi, "tick": part.ticks}, r.comment(marker)
    )
    am, asd = res.alpha_moments
    pm, psd = res.price_moments
    summary = {
        "status": "FAILED" if failed else "converged",
        "residual": res.residual,
        "alpha_mean": am,
        "alpha_std": asd,
        "price_mean": pm,
        "price_std": psd,
        "premise_holds": res.premise_holds,
        "strategy_monotone": res.strategy_monotone,
        "restarts": res.restarts_used,
        "distinct_equilibria": res.distinct_equilibria,
    }
    reports.write_summary(r.out / "summary.txt", summary, r.comment())
    if r.plots:
        from .plotting import plot_equilibrium

        plot_equilibrium(r.out, market, res)
    for k, v in summary.items():
        print(f"{k}: {v}")
    return EXIT_CONVERGENCE if failed else EXIT_OK


def cmd_simulate(r: _Run) -> int:
    market = r.market()
    sc = r.cfg["simulation"]
    mode = str(sc["mode"])
    if mode not in ("alpha", "strategy"):
        raise UsageError("simulation.mode must be alpha or strategy")
    if r.args.alpha_from is not None:
        alpha = _parse_alpha(r.args.alpha_from, market.n_ticks)
        partition = monotone_partition(alpha, market.patience) if mode == "strategy" else None
    elif sc["alpha"] is not None:
        alpha = _parse_alpha(",".join(str(a) for a in sc["alpha"]), market.n_ticks)
        partition = monotone_partition(alpha, market.patience) if mode == "strategy" else None
    else:
        log.info("no alpha given; solving for the equilibrium first")
        res = _solve(r, market, raise_on_failure=False)
        if not res.converged:
            log.warning("equilibrium residual %.2e above tolerance; simulating the best iterate", res.residual)
        alpha, partition = res.alpha_star, res.partition
    kw = dict(
        horizon=int(float(sc["horizon"])),
        warmup_fraction=float(sc["warmup_fraction"]),
        n_batches=int(sc["n_batches"]),
        seed=r.seed,
        discipline=str(sc["discipline"]),
    )
    try:
        sim = SimConfig(market, alpha=None, partition=partition, **kw) if mode == "strategy" else SimConfig(
            market, alpha=alpha, **kw
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    est = run(sim)
    an = analyze(market, sim.posting_distribution())
    n = market.n_ticks
    ticks = np.arange(1, n + 1)
    reports.write_columns(
        r.out / "sim.csv",
        {
            "tick": ticks,
            "alpha_hat": est.alpha_hat,
            "posted": est.posted,
            "trades": est.trades,
            "mean_wait": est.mean_wait.value,
            "mean_wait_hw": est.mean_wait.half_width,
            "inventory": est.time_avg_inventory.value,
            "inventory_hw": est.time_avg_inventory.half_width,
            "tail": est.best_price_tail.value,
            "tail_hw": est.best_price_tail.half_width,
            "cond_inventory": est.cond_inventory.value,
            "cond_inventory_hw": est.cond_inventory.half_width,
            "cond_time_fraction": est.cond_time_fraction,
            "exec_price_pmf": est.exec_price_pmf,
            "stationary": est.stationary,
        },
        r.comment(f"mode={mode} horizon={sim.horizon}"),
    )
    min_trades = int(sc["min_trades"])
    rel_tol = float(sc["rel_tol"])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(est.mean_wait.value - an.exec_time) / an.exec_time
    status = np.where(
        ~est.stationary,
        "nonstationary",
        np.where(est.trades < min_trades, "few_trades", np.where(rel <= rel_tol, "pass", "fail")),
    )
    reports.write_columns(
        r.out / "comparison.csv",
        {
            "tick": ticks,
            "analytic_wait": an.exec_time,
            "sim_wait": est.mean_wait.value,
            "sim_wait_hw": est.mean_wait.half_width,
            "rel_err": rel,
            "analytic_inventory": an.inventory,
            "sim_inventory": est.time_avg_inventory.value,
            "sim_inventory_hw": est.time_avg_inventory.half_width,
            "analytic_tail": an.tail,
            "sim_tail": est.best_price_tail.value,
            "sim_tail_hw": est.best_price_tail.half_width,
            "trades": est.trades,
            "status": status,
        },
        r.comment(f"rel_tol={rel_tol!r} min_trades={min_trades}"),
    )
    judged = (status == "pass") | (status == "fail")
    n_pass = int((status == "pass").sum())
    summary = {
        "mode": mode,
        "buyers": est.n_buyers,
        "sellers": est.n_sellers,
        "trades": est.n_trades,
        "lost_buyers": est.n_lost_buyers,
        "ticks_judged": int(judged.sum()),
        "ticks_pass": n_pass,
        "ticks_nonstationary": int((status == "nonstationary").sum()),
    }
    reports.write_summary(r.out / "sim_summary.txt", summary, r.comment())
    if r.plots:
        from .plotting import plot_comparison

        plot_comparison(r.out, an.exec_time, est, min_trades)
    for k, v in summary.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _inelastic_grid(params, p_max, n):
    if params.critical:
        return np.linspace(0.0, p_max if p_max is not None else 100 * params.price_scale, n)
    end = inel.support_end(params)
    if p_max is not None and p_max < end:
        return np.linspace(0.0, p_max, n)
    return inel.graded_grid(end, n)


def cmd_inelastic(r: _Run) -> int:
    s = r.cfg["inelastic"]
    try:
        params = cfgmod.inelastic_from_dict(r.cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    p_max = None if s["p_max"] is None else float(s["p_max"])
    n = int(s["n_points"])
    if n < 3:
        raise UsageError("inelastic.n_points must be at least 3")
    p = _inelastic_grid(params, p_max, n)
    c = inel.tabulate(params, p)
    reports.write_columns(r.out / "curves.csv", {"p": p, "F": c.F, "Q": c.Q, "D": c.D}, r.comment(c.method))

    s_values = [float(v) for v in s["s_values"]]
    rows, cond = [], []
    for sv in s_values:
        Fs = float(np.interp(sv, p, c.F))
        qc = inel.conditional_from_cdf(params.rho, Fs, c.F, c.f)
        qc = np.where(p >= sv, qc, np.nan)
        cond.append(qc)
        rows.extend((pi, sv, qi) for pi, qi in zip(p, qc) if pi >= sv)
    reports.write_csv(r.out / "conditional.csv", ["p", "s", "Q_c"], rows, r.comment())

    check = {"method": c.method, "rho": params.rho, "gamma": params.gamma}
    if not params.critical:
        check["support_end"] = inel.support_end(params)
    check["ode_residual_sup"] = inel.ode_residual(params, p, c.F)
    sol = inel.integrate_ode(params, float(p[-1]))
    exact = inel.cdf(params, sol.grid) if inel.has_closed_form(params) else inel.cdf_by_inversion(params, sol.grid)
    check["rk4_vs_cdf_sup"] = float(np.max(np.abs(sol.F - exact)))
    check["rk4_status"] = sol.status
    if params.critical:
        check["expected_tail_slope"] = -params.tail_exponent
        if params.gamma < 1:
            check["tail_slope"] = inel.tail_slope(params)
            check["depth_slope"] = inel.depth_slope(params)
            check["impact_slope"] = inel.impact_slope(params)
        else:
            check["tail_slope"] = inel.loglog_slope(*_window(params, lambda q: 1 - inel.limit_cdf(params, q)))
    reports.write_summary(r.out / "ode_check.txt", check, r.comment())
    if r.plots:
        from .plotting import plot_inelastic

        plot_inelastic(r.out, p, c.F, c.Q, c.D, cond, s_values, params)
    for k, v in check.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _window(params, fn):
    q = np.geomspace(*inel.ASYMPTOTIC_WINDOW, 200) * params.price_scale
    return q, fn(q)


def cmd_two_price(r: _Run) -> int:
    try:
        problem = cfgmod.two_price_from_dict(r.cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = two_price_equilibrium(problem)
    items = {"alpha2": out.alpha2, "residual": out.residual, "threshold": out.threshold}
    reports.write_summary(r.out / "two_price.txt", items, r.comment())
    for k, v in items.items():
        print(f"{k}: {v!r}")
    return EXIT_OK


def cmd_verify(r: _Run) -> int:
    checks = verify.run_all(quick=r.args.quick, seed=r.seed)
    lines = []
    for c in checks:
        lines.extend(c.lines())
    n_ok = sum(c.passed for c in checks)
    lines.append(f"{n_ok}/{len(checks)} criteria pass" + (" (quick mode)" if r.args.quick else ""))
    text = "\n".join(lines) + "\n"
    (r.out / "verify.txt").write_text(f"# {r.comment()}\n" + text)
    sys.stdout.write(text)
    return EXIT_OK if n_ok == len(checks) else EXIT_ACCEPTANCE


COMMANDS = {
    "analyze": cmd_analyze,
    "equilibrate": cmd_equilibrate,
    "simulate": cmd_simulate,
    "inelastic": cmd_inelastic,
    "two-price": cmd_two_price,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config; built-in defaults when omitted")
    common.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry, e.g. market.lambda=2")
    common.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="patient-exchange", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", parents=[common], help="queue analytics for a given alpha")
    p.add_argument("--alpha", help="CSV with an alpha/alpha_star column, a plain list file, or 'a1,a2,...'")
    sub.add_parser("equilibrate", parents=[common], help="solve for the equilibrium posting distribution")
    p = sub.add_parser("simulate", parents=[common], help="simulate the exchange and compare with the analytics")
    p.add_argument("--alpha-from", help="alpha source as for analyze; default solves the equilibrium")
    sub.add_parser("inelastic", parents=[common], help="continuous-price curves when demand is price-inelastic")
    sub.add_parser("two-price", parents=[common], help="two-price equilibrium")
    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="10x shorter simulations, 2x wider tolerances")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    if not hasattr(args, "quick"):
        args.quick = False
    try:
        r = _Run(args)
        return COMMANDS[args.command](r)
    except (UsageError, cfgmod.ConfigError, NoFeasiblePosting, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

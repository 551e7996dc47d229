"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# PNG metadata carries the matplotlib version by default; drop it so reruns are byte-identical
_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def _figure(width=6.4, height=None):
    golden = (np.sqrt(5) - 1.0) / 2.0
    fig, ax = plt.subplots(figsize=(width, height or width * golden))
    ax.tick_params(labelsize=9)
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_equilibrium(out_dir, config, result):
    """Supply density with execution time; supply vs demand; demand vs supply tail; inventories."""
    out_dir = Path(out_dir)
    ticks = config.ticks
    an = result.analytics
    paths = []

    fig, ax = _figure()
    ax.bar(ticks, result.alpha_star, color="tab:blue", alpha=0.7, label=r"$\alpha^*_j$")
    ax.set_xlabel("price tick $j$")
    ax.set_ylabel("supply density")
    ax2 = ax.twinx()
    T = np.where(np.isfinite(an.exec_time), an.exec_time, np.nan)
    ax2.plot(ticks, T, "k-", lw=1.5, label=r"$T^*(j)$")
    ax2.set_ylabel("expected execution time")
    fig.legend(loc="upper center", ncol=2, fontsize=8, frameon=False)
    paths.append(_save(fig, out_dir / "equilibrium.png"))

    fig, ax = _figure()
    ax.step(ticks, config.lam * np.cumsum(result.alpha_star), where="mid", label=r"supply $\lambda F_{\alpha^*}$")
    ax.step(ticks, config.mu * config.beta, where="mid", label=r"demand $\mu\beta_j$")
    ax.set_xlabel("price tick $j$")
    ax.set_ylabel("rate")
    ax.legend(fontsize=8, frameon=False)
    paths.append(_save(fig, out_dir / "supply_demand.png"))

    fig, ax = _figure()
    ax.plot(ticks, config.beta / config.beta[0], label=r"$\beta_j / \beta_1$")
    ax.plot(ticks, 1 - np.cumsum(result.alpha_star) + result.alpha_star, label=r"tail of $\alpha^*$")
    ax.set_xlabel("price tick $j$")
    ax.legend(fontsize=8, frameon=False)
    paths.append(_save(fig, out_dir / "tail.png"))

    from .queueing import conditional_profile

    fig, ax = _figure()
    ax.plot(ticks, an.inventory, "k-", lw=2, label="unconditional")
    for j in (1, 10, 20, 30):
        if j <= config.n_ticks and np.isfinite(an.cum_rho[-1]) and an.cum_rho[-1] < 1:
            prof = conditional_profile(an.rho, j)
            ax.plot(ticks[j - 1 :], prof[j - 1 :], lw=1, label=f"ticks < {j} empty")
    ax.set_xlabel("price tick $j$")
    ax.set_ylabel("expected inventory")
    ax.legend(fontsize=8, frameon=False)
    paths.append(_save(fig, out_dir / "inventory.png"))
    return paths


def plot_comparison(out_dir, analytic_T, est, min_trades):
    fig, ax = _figure()
    ticks = np.arange(1, len(analytic_T) + 1)
    T = np.where(np.isfinite(analytic_T), analytic_T, np.nan)
    ax.plot(ticks, T, "k-", label="closed form")
    ok = est.trades >= min_trades
    ax.errorbar(ticks[ok], est.mean_wait.value[ok], yerr=est.mean_wait.half_width[ok], fmt="o", ms=3, label="simulated")
    ax.set_xlabel("price tick $j$")
    ax.set_ylabel("mean execution time")
    ax.legend(fontsize=8, frameon=False)
    return [_save(fig, Path(out_dir) / "comparison.png")]


def plot_inelastic(out_dir, p, F, Q, D, cond, s_values, params):
    out_dir = Path(out_dir)
    paths = []
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    axes[0].plot(p, F)
    axes[0].set_title("price CDF", fontsize=10)
    axes[1].plot(p, Q)
    axes[1].set_title("inventory density", fontsize=10)
    axes[2].plot(p, D)
    axes[2].set_title("market depth", fontsize=10)
    for ax in axes:
        ax.set_xlabel("price")
    paths.append(_save(fig, out_dir / "curves.png"))

    fig, ax = _figure()
    for s, qc in zip(s_values, cond):
        mask = p >= s
        ax.plot(p[mask], qc[mask], label=f"s = {s:g}")
    ax.set_xlabel("price $p$")
    ax.set_ylabel("conditional order density")
    ax.legend(fontsize=8, frameon=False)
    paths.append(_save(fig, out_dir / "conditional.png"))

    if params.critical:
        fig, ax = _figure()
        pos = p > 0
        ax.loglog(p[pos], 1 - F[pos])
        ax.set_xlabel("price $p$")
        ax.set_ylabel("P(price > p)")
        paths.append(_save(fig, out_dir / "tail_loglog.png"))
    return paths

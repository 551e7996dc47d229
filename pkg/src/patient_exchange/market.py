"""Exogenous parameters of the exchange: arrival rates, tick grid, demand, patience."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

UNIFORM = "uniform"
POWER = "power"
TABULATED = "tabulated"
PATIENCE_KINDS = (UNIFORM, POWER, TABULATED)


@dataclass(frozen=True)
class DemandCurve:
    """Buy probability per tick; ``beta[j-1]`` applies when tick ``j`` is the best ask."""

    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    def __len__(self):
        return len(self.beta)

    @classmethod
    def quadratic(cls, n_ticks: int, scale: float = 1 / 12, base: float = 0.5, width: float = 15.0) -> "DemandCurve":
        """``scale * (base + ((N - j + 1) / width)**2)`` for j = 1..N."""
        j = np.arange(1, n_ticks + 1)
        return cls(scale * (base + ((n_ticks - j + 1) / width) ** 2))

    @classmethod
    def constant(cls, n_ticks: int, value: float = 1.0) -> "DemandCurve":
        return cls(np.full(n_ticks, float(value)))


@dataclass(frozen=True)
class PatienceDistribution:
    """Distribution of a seller's waiting cost per unit time on ``[0, delta_bar]``.

    ``power`` has cdf ``(x / delta_bar) ** gamma``; ``uniform`` is ``gamma = 1``.
    ``tabulated`` interpolates linearly through ``table`` (rows of ``(x, F(x))``).
    """

    kind: str = UNIFORM
    delta_bar: float = 1.0
    gamma: float = 1.0
    table: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == TABULATED and self.table is not None:
            t = np.array(self.table, dtype=float)
            t.setflags(write=False)
            object.__setattr__(self, "table", t)
            object.__setattr__(self, "delta_bar", float(t[-1, 0]))

    @classmethod
    def uniform(cls, delta_bar: float) -> "PatienceDistribution":
        return cls(UNIFORM, float(delta_bar), 1.0)

    @classmethod
    def power(cls, delta_bar: float, gamma: float) -> "PatienceDistribution":
        return cls(POWER, float(delta_bar), float(gamma))

    @classmethod
    def tabulated(cls, xs: Sequence[float], cdf: Sequence[float]) -> "PatienceDistribution":
        return cls(TABULATED, float(xs[-1]), 1.0, np.column_stack([xs, cdf]))

    @property
    def exponent(self) -> float:
        return 1.0 if self.kind == UNIFORM else self.gamma

    def cdf(self, x):
        """Vectorised cdf, clamped to ``[0, 1]``; raises on negative input."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("patience values must be non-negative")
        xc = np.minimum(x, self.delta_bar)
        if self.kind == TABULATED:
            out = np.interp(xc, self.table[:, 0], self.table[:, 1])
        else:
            out = (xc / self.delta_bar) ** self.exponent
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        """Inverse cdf used for sampling."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind == TABULATED:
            xs, fs = self.table[:, 0], self.table[:, 1]
            # flat stretches of F make the inverse multi-valued; np.interp picks a consistent branch
            out = np.interp(u, fs, xs)
        else:
            out = self.delta_bar * u ** (1.0 / self.exponent)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        return self.ppf(rng.random(size))

    def mean(self) -> float:
        if self.kind == TABULATED:
            xs, fs = self.table[:, 0], self.table[:, 1]
            # E[X] = integral of the survival function for piecewise-linear F
            surv = 1.0 - fs
            return float(np.sum(0.5 * (surv[1:] + surv[:-1]) * np.diff(xs)))
        g = self.exponent
        return self.delta_bar * g / (g + 1.0)


def patience_cdf(dist: PatienceDistribution, x):
    return dist.cdf(x)


def patience_sample(dist: PatienceDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


@dataclass(frozen=True)
class MarketConfig:
    lam: float
    mu: float
    epsilon: float
    n_ticks: int
    demand: DemandCurve
    patience: PatienceDistribution

    @property
    def beta(self) -> np.ndarray:
        return self.demand.beta

    @property
    def ticks(self) -> np.ndarray:
        return np.arange(1, self.n_ticks + 1)

    @property
    def prices(self) -> np.ndarray:
        return self.epsilon * self.ticks


def example_config() -> MarketConfig:
    """The elastic-demand example market: 50 ticks, lambda=3, mu=12, delta ~ U[0, 160]."""
    n = 50
    return MarketConfig(
        lam=3.0,
        mu=12.0,
        epsilon=1.0,
        n_ticks=n,
        demand=DemandCurve.quadratic(n),
        patience=PatienceDistribution.uniform(160.0),
    )


@dataclass
class ValidationReport:
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, field_name: str, rule: str):
        self.failures.append((field_name, rule))

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "pass"
        return "\n".join(f"{f}: {r}" for f, r in self.failures)


def validate_patience(dist: PatienceDistribution, report: Optional[ValidationReport] = None) -> ValidationReport:
    report = ValidationReport() if report is None else report
    if dist.kind not in PATIENCE_KINDS:
        report.add("patience.kind", f"must be one of {PATIENCE_KINDS}")
        return report
    if not dist.delta_bar > 0:
        report.add("patience.delta_bar", "delta_bar > 0")
    if dist.kind == POWER and not (0.5 < dist.gamma <= 1.0):
        report.add("patience.gamma", "gamma in (1/2, 1]")
    if dist.kind == TABULATED:
        t = dist.table
        if t is None or t.ndim != 2 or t.shape[1] != 2 or len(t) < 2:
            report.add("patience.table", "need at least two (x, F) rows")
            return report
        xs, fs = t[:, 0], t[:, 1]
        if np.any(np.diff(xs) <= 0):
            report.add("patience.table", "x grid strictly increasing")
        if np.any(np.diff(fs) < 0):
            report.add("patience.table", "F non-decreasing")
        if xs[0] != 0 or fs[0] != 0:
            report.add("patience.table", "F(0) = 0")
        if fs[-1] != 1:
            report.add("patience.table", "F(delta_bar) = 1")
    return report


def validate(config: MarketConfig) -> ValidationReport:
    """Collect every violated invariant instead of stopping at the first."""
    report = ValidationReport()
    if not config.lam > 0:
        report.add("lambda", "lambda > 0")
    if not config.mu > 0:
        report.add("mu", "mu > 0")
    if not config.epsilon > 0:
        report.add("epsilon", "epsilon > 0")
    if int(config.n_ticks) != config.n_ticks or config.n_ticks < 1:
        report.add("n_ticks", "n_ticks >= 1")
    beta = config.beta
    if len(beta) != config.n_ticks:
        report.add("demand", f"demand must have n_ticks={config.n_ticks} entries, got {len(beta)}")
    if np.any(beta <= 0) or np.any(beta > 1):
        report.add("demand", "0 < beta_j <= 1")
    if np.any(np.diff(beta) > 0):
        report.add("demand", "demand not non-increasing in j")
    validate_patience(config.patience, report)
    return report

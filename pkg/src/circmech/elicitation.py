"""Why trust cannot be elicited, at desk scale.

Two experiments.  In the first, the mechanism sets security from an agent's
reported trust; since the agent bears its own enforcement penalty but only
``1/n`` of the residual risk, overstating trust pays whenever ``n > 1``.
In the second, signalers emit a credibility signal that receivers use to
extend trust; exploiters learn to mimic it while receivers re-fit their
signal weight from realised outcomes, which drives the exploitable
correlation and the exploiters' profit to zero.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .enforcement import EnforcementParams, cost, optimal_security, residual_risk


def direct_report_payoffs(
    true_tau: float,
    reported_tau: float,
    params: EnforcementParams,
    penalty_schedule: Callable[[float], float] | None = None,
    n_agents: int = 100,
    value: float = 1.0,
) -> float:
    """Payoff of reporting ``reported_tau`` when the agent's trust is ``true_tau``.

    The report only moves the security level ``S = schedule(report)``; true
    trust only moves the residual risk.  The enforcement penalty ``K(S)`` is
    levied on the reporting agent, the residual risk is shared by ``n``.
    """
    if penalty_schedule is None:
        def penalty_schedule(t):
            return optimal_security(params, t)
    S = penalty_schedule(reported_tau)
    return value - cost(params, S) - residual_risk(params, S, true_tau) / n_agents


@dataclass(frozen=True)
class DominanceResult:
    truthful: bool
    best_reports: dict[float, float]
    # (true_tau, reported_tau) -> payoff
    payoffs: dict[tuple[float, float], float]

    @property
    def verdict(self) -> str:
        return "truthful" if self.truthful else "non-truthful"

    def rows(self) -> list[dict]:
        return [
            {
                "true_tau": t,
                "reported_tau": r,
                "payoff": p,
                "best": self.best_reports[t] == r,
            }
            for (t, r), p in self.payoffs.items()
        ]


def misreport_dominance(
    params: EnforcementParams,
    n_agents: int,
    report_grid: Sequence[float],
    value: float = 1.0,
) -> DominanceResult:
    """Best report for every true trust level on the grid."""
    grid = sorted(set(float(t) for t in report_grid))
    if not grid:
        raise ValueError("report_grid must be non-empty")
    schedule = {t: optimal_security(params, t) for t in grid}
    payoffs = {}
    best = {}
    for true_tau in grid:
        row = {
            r: direct_report_payoffs(true_tau, r, params, schedule.__getitem__, n_agents, value)
            for r in grid
        }
        payoffs.update({(true_tau, r): p for r, p in row.items()})
        # ties go to the truthful report
        top = max(row.values())
        best[true_tau] = true_tau if row[true_tau] == top else max(row, key=row.get)
    truthful = all(best[t] == t for t in grid)
    return DominanceResult(truthful, best, payoffs)


@dataclass(frozen=True)
class CollapseConfig:
    exploit_fraction: float = 0.3
    signal_noise: float = 0.2
    learning_rate: float = 1.0
    rounds: int = 1500
    seed: int = 7
    deals_per_round: int = 100
    window_rounds: int = 50
    mimic_rate: float = 0.01
    honor_gain: float = 1.0
    betrayal_loss: float = 1.0
    initial_weight: float = 1.0
    initial_mimicry: float = 0.7

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0 <= self.exploit_fraction < 1:
            raise ValueError("exploit_fraction must lie in [0, 1)")
        if not 0 <= self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in [0, 1]")
        if self.deals_per_round < 2 or self.window_rounds < 1:
            raise ValueError("deals_per_round must be >= 2 and window_rounds >= 1")
        if self.signal_noise < 0:
            raise ValueError("signal_noise must be non-negative")


@dataclass(frozen=True)
class CollapseRound:
    round: int
    marginal_correlation: float
    exploiter_profit: float
    mean_signal_weight: float
    mimicry: float


class _PearsonWindow:
    """Pearson correlation over the deals of the most recent ``size`` rounds."""

    def __init__(self, size: int):
        self._sums: deque[np.ndarray] = deque(maxlen=size)

    def push(self, x: np.ndarray, y: np.ndarray) -> float:
        self._sums.append(
            np.array([len(x), x.sum(), y.sum(), (x * x).sum(), (y * y).sum(), (x * y).sum()])
        )
        n, sx, sy, sxx, syy, sxy = np.sum(self._sums, axis=0)
        vx = sxx - sx * sx / n
        vy = syy - sy * sy / n
        if vx <= 0 or vy <= 0:
            return 0.0
        return float((sxy - sx * sy / n) / math.sqrt(vx * vy))


def correlation_collapse(cfg: CollapseConfig, rng: np.random.Generator | None = None) -> list[CollapseRound]:
    """Simulate defensive updating against signal mimicry.

    Each round ``deals_per_round`` signalers are drawn.  Honest types have
    honesty ``h ~ U(0, 1)``, signal ``h + noise`` and honour a deal with
    probability ``h``; exploiters signal ``mimicry + noise`` and never honour.
    Receivers extend trust ``w * (s - c)`` around the previous round's mean
    signal ``c``.  After the round they move ``w`` toward the slope of
    realised deal value on the signal (betrayals on high signals pull it
    down), and exploiters raise their mimicry in proportion to the trust a
    higher signal currently buys.  Both adaptations scale with
    ``learning_rate``.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    lr = cfg.learning_rate
    g, l = cfg.honor_gain, cfg.betrayal_loss
    w = cfg.initial_weight
    mimic = cfg.initial_mimicry
    ref = None
    window = _PearsonWindow(cfg.window_rounds)
    trace = []
    d = cfg.deals_per_round
    for r in range(cfg.rounds):
        # fixed draw order keeps runs comparable across configs
        is_exploiter = rng.random(d) < cfg.exploit_fraction
        honesty = rng.random(d)
        noise = rng.standard_normal(d) * cfg.signal_noise
        honour_draw = rng.random(d)

        honesty = np.where(is_exploiter, 0.0, honesty)
        signal = np.where(is_exploiter, mimic, honesty) + noise
        honoured = honour_draw < honesty
        if ref is None:
            ref = float(signal.mean())

        centred = signal - ref
        trust = w * centred
        if is_exploiter.any():
            profit = float((trust[is_exploiter] * l).mean())
        else:
            profit = 0.0
        corr = window.push(signal, honoured.astype(float))
        trace.append(CollapseRound(r, corr, profit, w, mimic))

        deal_value = np.where(honoured, g, -l)
        dev = signal - signal.mean()
        spread = float((dev * dev).sum())
        slope = float((dev * deal_value).sum()) / spread if spread > 0 else 0.0
        # exploiters respond to the trust bought by the current weight
        mimic += lr * cfg.mimic_rate * w * l
        w += lr * (slope - w)
        ref = float(signal.mean())
    return trace


def collapse_rows(trace: Sequence[CollapseRound]) -> list[dict]:
    return [
        {
            "round": t.round,
            "marginal_correlation": t.marginal_correlation,
            "exploiter_profit": t.exploiter_profit,
            "mean_signal_weight": t.mean_signal_weight,
        }
        for t in trace
    ]


def terminal_summary(trace: Sequence[CollapseRound], tail: int = 100) -> dict:
    """Terminal correlation and the tail mean/standard error of exploiter profit."""
    profits = np.array([t.exploiter_profit for t in trace[-tail:]])
    se = float(profits.std(ddof=1) / math.sqrt(len(profits))) if len(profits) > 1 else 0.0
    return {
        "terminal_correlation": trace[-1].marginal_correlation,
        "tail_profit_mean": float(profits.mean()),
        "tail_profit_se": se,
    }

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circmech.elicitation import (
    CollapseConfig,
    collapse_rows,
    correlation_collapse,
    direct_report_payoffs,
    misreport_dominance,
    terminal_summary,
)
from circmech.enforcement import BASELINE, cost, optimal_security, residual_risk

GRID = np.linspace(0, 4, 10).tolist()


def test_truthful_report_at_zero():
    s = math.log(100)
    expected = 1 - cost(BASELINE, s) - residual_risk(BASELINE, s, 0) / 100
    assert direct_report_payoffs(0, 0, BASELINE) == pytest.approx(expected)


def test_overstating_trust_pays():
    assert direct_report_payoffs(0.2, 0.9, BASELINE) > direct_report_payoffs(0.2, 0.2, BASELINE)


def test_constant_schedule_makes_report_irrelevant():
    flat = lambda _: 2.0  # noqa: E731
    values = {direct_report_payoffs(0.5, r, BASELINE, flat) for r in (0, 1, 3)}
    assert len(values) == 1


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 5))
def test_payoff_factors_through_security(true_tau, r1, r2):
    # two reports mapped to the same S pay the same
    schedule = lambda r: 3.0 if r in (r1, r2) else 0.0  # noqa: E731
    assert direct_report_payoffs(true_tau, r1, BASELINE, schedule) == direct_report_payoffs(
        true_tau, r2, BASELINE, schedule
    )


def test_large_population_reports_max_trust():
    result = misreport_dominance(BASELINE, 100, GRID)
    assert result.verdict == "non-truthful"
    assert all(best == GRID[-1] for best in result.best_reports.values())


def test_single_agent_reports_truthfully():
    result = misreport_dominance(BASELINE, 1, GRID)
    assert result.truthful
    assert result.best_reports == {t: t for t in GRID}


def test_degenerate_grid_is_truthful():
    assert misreport_dominance(BASELINE, 100, [1.5]).truthful
    with pytest.raises(ValueError):
        misreport_dominance(BASELINE, 100, [])


def test_dominance_rows():
    rows = misreport_dominance(BASELINE, 100, [0, 1]).rows()
    assert len(rows) == 4
    assert sum(r["best"] for r in rows) == 2


def test_no_exploiters():
    trace = correlation_collapse(CollapseConfig(exploit_fraction=0.0, rounds=300))
    assert all(t.exploiter_profit == 0 for t in trace)
    assert trace[-1].marginal_correlation > 0.3


def test_no_learning_keeps_profit_positive():
    trace = correlation_collapse(CollapseConfig(learning_rate=0.0, rounds=400))
    profits = np.array([t.exploiter_profit for t in trace])
    assert (profits[50:] > 0).all()
    first, second = profits[:200], profits[200:]
    se = math.hypot(first.std() / math.sqrt(200), second.std() / math.sqrt(200))
    assert abs(first.mean() - second.mean()) < 4 * se
    assert {t.mean_signal_weight for t in trace} == {1.0}


def test_seed_seven_collapses():
    summary = terminal_summary(correlation_collapse(CollapseConfig(seed=7)))
    assert abs(summary["terminal_correlation"]) < 0.05
    assert abs(summary["tail_profit_mean"]) <= 2 * summary["tail_profit_se"]


def test_profit_non_negative_while_correlated():
    means = []
    for seed in range(30):
        trace = correlation_collapse(CollapseConfig(seed=seed, rounds=300))
        means.append(np.mean([t.exploiter_profit for t in trace if t.marginal_correlation > 0]))
    assert np.mean(means) >= 0


def test_deterministic_per_seed():
    cfg = CollapseConfig(seed=3, rounds=200)
    assert correlation_collapse(cfg) == correlation_collapse(cfg)
    assert collapse_rows(correlation_collapse(cfg))[0].keys() == {
        "round", "marginal_correlation", "exploiter_profit", "mean_signal_weight"
    }


@pytest.mark.parametrize(
    "kwargs",
    [{"rounds": 0}, {"exploit_fraction": 1.0}, {"learning_rate": 2.0}, {"deals_per_round": 1}, {"signal_noise": -1}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CollapseConfig(**kwargs)


def test_schedule_defaults_to_optimum():
    s = optimal_security(BASELINE, 2.0)
    assert direct_report_payoffs(1.0, 2.0, BASELINE) == pytest.approx(
        1 - cost(BASELINE, s) - residual_risk(BASELINE, s, 1.0) / 100
    )

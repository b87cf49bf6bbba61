import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circmech.saito import (
    SINK,
    Block,
    Chain,
    EpochConfig,
    LotteryOutcome,
    Transaction,
    distribute_payout,
    produce_block,
    revision_cost,
    routing_work,
    run_lottery,
    simulate_epoch,
)

from oracles import binomial_band


def tx(fee, *path, id="t"):
    return Transaction(id, fee, path)


def chain_with_burns(*burns):
    chain = Chain()
    for i, b in enumerate(burns, start=1):
        chain.append(Block(f"b{i}", "p", (tx(1.0, "p"),), b, chain.tip, i))
    return chain


def test_routing_work_examples():
    t = tx(8.0, "a", "b", "c")
    assert routing_work(t, "a") == 8
    assert routing_work(t, "c") == 2
    assert routing_work(t, "z") == 0


def test_transaction_validation():
    for fee, path in ((0.0, ("a",)), (1.0, ()), (1.0, ("a", "a"))):
        with pytest.raises(ValueError):
            Transaction("t", fee, path)


def test_produce_block_threshold_zero():
    wealth = {"z": 10.0}
    block = produce_block("z", [tx(1.0, "a")], 0.0, Chain(), wealth)
    assert block is not None and block.burn_paid == 0
    assert wealth["z"] == 10


def test_produce_block_refusal_leaves_state():
    wealth = {"p": 10.0}
    mempool = [tx(4.0, "p"), tx(2.0, "x", "p")]  # work 5
    assert produce_block("p", mempool, 6.0, Chain(), wealth) is None
    assert wealth == {"p": 10.0}


def test_produce_block_boundary_pays_burn():
    wealth = {"p": 10.0}
    mempool = [tx(4.0, "p"), tx(4.0, "x", "p")]  # work 6
    block = produce_block("p", mempool, 6.0, Chain(), wealth)
    assert block is not None and block.burn_paid == 6
    assert wealth == {"p": 4.0, SINK: 6.0}


def test_lottery_single_router():
    block = Block("b1", "p", (tx(1.0, "r"), tx(2.0, "r")), 0.0, "genesis", 1)
    rng = np.random.default_rng(0)
    assert {run_lottery(block, 0.5, rng).winning_router for _ in range(50)} == {"r"}


def test_lottery_difficulty_one():
    block = Block("b1", "p", (tx(1.0, "r"),), 0.0, "genesis", 1)
    rng = np.random.default_rng(0)
    assert {run_lottery(block, 1.0, rng).attempts for _ in range(50)} == {1}


def test_lottery_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        run_lottery(Block("b", "p", (), 0.0, "genesis", 1), 0.5, rng)
    block = Block("b", "p", (tx(1.0, "r"),), 0.0, "genesis", 1)
    for d in (0.0, 1.5):
        with pytest.raises(ValueError):
            run_lottery(block, d, rng)


def test_lottery_shares_and_attempts():
    block = Block("b1", "p", (tx(3.0, "r1"), tx(1.0, "r2")), 0.0, "genesis", 1)
    rng = np.random.default_rng(2024)
    draws = [run_lottery(block, 0.05, rng) for _ in range(10_000)]
    share = sum(d.winning_router == "r1" for d in draws) / len(draws)
    lo, hi = binomial_band(10_000, 0.75)
    assert lo <= share <= hi
    assert abs(np.mean([d.attempts for d in draws]) - 20) <= 0.05 * 20


def test_payout_examples():
    block = Block("b1", "p", (tx(4.0, "r"), tx(6.0, "r")), 2.0, "genesis", 1)
    split = distribute_payout(LotteryOutcome("b1", 3, "r", "p"), block)
    assert (split.total, split.miner_amount, split.router_amount) == (10, 5, 5)
    block = Block("b2", "p", (tx(1.0, "r"),), 0.0, "genesis", 1)
    split = distribute_payout(LotteryOutcome("b2", 1, "r", "p"), block)
    assert (split.miner_amount, split.router_amount) == (0.5, 0.5)
    with pytest.raises(ValueError):
        distribute_payout(LotteryOutcome("other", 1, "r", "p"), block)


def test_revision_cost_examples():
    chain = chain_with_burns(2.0, 3.0, 5.0)
    assert revision_cost(chain, 0) == 0
    assert revision_cost(chain, 2) == 8
    assert revision_cost(chain, 3) == 10
    with pytest.raises(ValueError):
        revision_cost(chain, 4)


def test_chain_rejects_bad_parent():
    chain = chain_with_burns(1.0)
    with pytest.raises(ValueError):
        chain.append(Block("x", "p", (tx(1.0, "p"),), 1.0, "genesis", 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0, 4), st.floats(0.05, 1))
def test_epoch_invariants(seed, nodes, threshold, difficulty):
    cfg = EpochConfig(nodes=nodes, max_path_length=min(3, nodes), threshold=threshold,
                      difficulty=difficulty, rounds=40)
    res = simulate_epoch(cfg, np.random.default_rng(seed))
    report = res.conservation_report()
    assert abs(report["payout_error"]) < 1e-9
    assert report["system_wealth_change"] == pytest.approx(-report["burns"], abs=1e-9)
    assert report["revision_cost_monotone"]
    assert all(b.burn_paid >= threshold for b in res.chain.blocks)
    assert len(res.chain) == 40
    costs = [revision_cost(res.chain, k) for k in range(len(res.chain) + 1)]
    assert all(b >= a for a, b in zip(costs, costs[1:]))


def test_epoch_deterministic():
    cfg = EpochConfig(rounds=50)
    a = simulate_epoch(cfg, np.random.default_rng(4))
    b = simulate_epoch(cfg, np.random.default_rng(4))
    assert a.rows() == b.rows() and a.wealth == b.wealth


def test_unreachable_threshold_raises():
    cfg = EpochConfig(nodes=2, max_path_length=1, tx_per_round=1, fee_mean=1e-6,
                      threshold=1e9, rounds=1, max_idle_rounds=20)
    with pytest.raises(RuntimeError):
        simulate_epoch(cfg, np.random.default_rng(0))


@pytest.mark.parametrize("kwargs", [{"nodes": 0}, {"max_path_length": 9}, {"difficulty": 0.0},
                                    {"payout_miner_fraction": 1.5}, {"threshold": -1.0}])
def test_epoch_config_validation(kwargs):
    with pytest.raises(ValueError):
        EpochConfig(**kwargs)

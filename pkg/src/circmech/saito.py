"""Desk-scale three-layer consensus: routing, burn-gated blocks, payout lottery.

Users pay fees on transactions that are forwarded along routing paths.  A
node may bundle the mempool into a block only if its own routing work in
that bundle reaches the burn threshold, and it pays the threshold into an
irreversible sink.  A fixed-difficulty lottery (attempts are geometric)
then picks one router in proportion to routing work, and the block's fees
are split between the producer and that router.  Rewriting the last ``k``
blocks means re-paying their burns, so revision cost grows with depth.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

GENESIS = "genesis"
USERS = "users"
SINK = "sink"


@dataclass(frozen=True)
class Transaction:
    id: str
    fee: float
    routing_path: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "routing_path", tuple(self.routing_path))
        if not self.fee > 0:
            raise ValueError(f"transaction {self.id}: fee must be positive")
        if not self.routing_path:
            raise ValueError(f"transaction {self.id}: routing path is empty")
        if len(set(self.routing_path)) != len(self.routing_path):
            raise ValueError(f"transaction {self.id}: routing path repeats a node")


@dataclass(frozen=True)
class Block:
    id: str
    producer: str
    transactions: tuple[Transaction, ...]
    burn_paid: float
    parent: str
    depth: int

    @property
    def fees(self) -> float:
        return math.fsum(tx.fee for tx in self.transactions)


@dataclass(frozen=True)
class LotteryOutcome:
    block_id: str
    attempts: int
    winning_router: str
    miner: str


@dataclass(frozen=True)
class PayoutSplit:
    miner_amount: float
    router_amount: float
    total: float


def routing_work(tx: Transaction, node: str) -> float:
    """Fee share claimed by ``node``: halves with every hop from the entry node."""
    try:
        k = tx.routing_path.index(node)
    except ValueError:
        return 0.0
    return tx.fee / 2**k


def work_by_node(transactions: Sequence[Transaction]) -> dict[str, float]:
    work: dict[str, float] = {}
    for tx in transactions:
        for k, node in enumerate(tx.routing_path):
            work[node] = work.get(node, 0.0) + tx.fee / 2**k
    return work


@dataclass
class Chain:
    blocks: list[Block] = field(default_factory=list)

    @property
    def tip(self) -> str:
        return self.blocks[-1].id if self.blocks else GENESIS

    @property
    def height(self) -> int:
        return len(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def append(self, block: Block) -> None:
        if block.parent != self.tip or block.depth != self.height + 1:
            raise ValueError(f"block {block.id} does not extend the tip")
        self.blocks.append(block)


def produce_block(
    producer: str,
    mempool: Sequence[Transaction],
    threshold: float,
    parent: Chain,
    wealth: dict[str, float],
    block_id: str | None = None,
) -> Block | None:
    """Bundle the mempool if the producer's routing work meets the burn threshold.

    On success the threshold is debited from ``wealth[producer]`` and credited
    to the sink; ``None`` is a refusal and leaves every argument untouched.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    txs = tuple(mempool)
    own_work = math.fsum(routing_work(tx, producer) for tx in txs)
    if own_work < threshold:
        return None
    depth = parent.height + 1
    block = Block(
        id=block_id or f"b{depth}",
        producer=producer,
        transactions=txs,
        burn_paid=threshold,
        parent=parent.tip,
        depth=depth,
    )
    wealth[producer] = wealth.get(producer, 0.0) - threshold
    wealth[SINK] = wealth.get(SINK, 0.0) + threshold
    return block


def run_lottery(block: Block, difficulty: float, rng: np.random.Generator) -> LotteryOutcome:
    if not block.transactions:
        raise ValueError("lottery needs a block with at least one transaction")
    if not 0 < difficulty <= 1:
        raise ValueError("difficulty must lie in (0, 1]")
    attempts = int(rng.geometric(difficulty))
    work = work_by_node(block.transactions)
    nodes = list(work)
    weights = np.array([work[n] for n in nodes])
    winner = nodes[int(rng.choice(len(nodes), p=weights / weights.sum()))]
    return LotteryOutcome(block.id, attempts, winner, block.producer)


def distribute_payout(
    outcome: LotteryOutcome, block: Block, miner_fraction: float = 0.5
) -> PayoutSplit:
    """Split the block's fees; the burn is already in the sink and is not touched."""
    if outcome.block_id != block.id or outcome.miner != block.producer:
        raise ValueError("lottery outcome does not belong to this block")
    if not 0 <= miner_fraction <= 1:
        raise ValueError("miner_fraction must lie in [0, 1]")
    pool = block.fees
    miner = miner_fraction * pool
    return PayoutSplit(miner_amount=miner, router_amount=pool - miner, total=pool)


def revision_cost(chain: Chain, depth: int) -> float:
    """Burn that must be re-paid to rewrite the most recent ``depth`` blocks."""
    if depth < 0 or depth > len(chain):
        raise ValueError(f"depth {depth} outside [0, {len(chain)}]")
    if depth == 0:
        return 0.0
    return math.fsum(b.burn_paid for b in chain.blocks[-depth:])


@dataclass(frozen=True)
class EpochConfig:
    nodes: int = 8
    tx_per_round: int = 5
    max_path_length: int = 3
    fee_mean: float = 1.0
    threshold: float = 2.0
    difficulty: float = 0.05
    rounds: int = 100
    payout_miner_fraction: float = 0.5
    initial_wealth: float = 100.0
    max_idle_rounds: int = 10_000

    def __post_init__(self):
        if self.nodes < 1 or self.tx_per_round < 1 or self.rounds < 0:
            raise ValueError("nodes and tx_per_round must be >= 1, rounds >= 0")
        if not 1 <= self.max_path_length <= self.nodes:
            raise ValueError("max_path_length must lie in [1, nodes]")
        if not self.fee_mean > 0 or self.threshold < 0:
            raise ValueError("fee_mean must be positive and threshold non-negative")
        if not 0 < self.difficulty <= 1:
            raise ValueError("difficulty must lie in (0, 1]")
        if not 0 <= self.payout_miner_fraction <= 1:
            raise ValueError("payout_miner_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class BlockMetrics:
    block: int
    producer: str
    fees: float
    burn: float
    attempts: int
    winning_router: str
    miner_payout: float
    router_payout: float
    cum_revision_cost: float


@dataclass
class EpochResult:
    chain: Chain
    blocks: list[BlockMetrics]
    wealth: dict[str, float]
    fees_injected: float
    payouts: float
    burns: float
    initial_system_wealth: float
    revision_monotone: bool

    @property
    def final_system_wealth(self) -> float:
        return math.fsum(v for k, v in self.wealth.items() if k != SINK)

    def conservation_report(self) -> dict:
        return {
            "fees_injected": self.fees_injected,
            "payouts": self.payouts,
            "burns": self.burns,
            "payout_error": self.payouts - self.fees_injected,
            "system_wealth_change": self.final_system_wealth - self.initial_system_wealth,
            "revision_cost_monotone": self.revision_monotone,
        }

    def rows(self) -> list[dict]:
        return [m.__dict__.copy() for m in self.blocks]


def simulate_epoch(cfg: EpochConfig, rng: np.random.Generator) -> EpochResult:
    """Inject, forward, produce, draw and pay out until ``cfg.rounds`` blocks exist.

    Each round users inject ``tx_per_round`` transactions with exponential
    fees and a random entry-to-exit path.  Nodes with enough routing work in
    the mempool try to produce, highest work first (ties by node order); if
    nobody qualifies the mempool keeps growing.  System wealth is node wealth
    plus the users' account; the sink sits outside the system.
    """
    node_ids = [f"n{i}" for i in range(cfg.nodes)]
    wealth = {n: cfg.initial_wealth for n in node_ids}
    wealth[USERS] = 0.0
    wealth[SINK] = 0.0
    initial_system = math.fsum(v for k, v in wealth.items() if k != SINK)

    chain = Chain()
    mempool: list[Transaction] = []
    metrics: list[BlockMetrics] = []
    fee_terms: list[float] = []
    payout_terms: list[float] = []
    monotone = True
    tx_counter = 0
    idle = 0
    while len(chain) < cfg.rounds:
        for _ in range(cfg.tx_per_round):
            fee = float(rng.exponential(cfg.fee_mean))
            if fee <= 0:
                fee = cfg.fee_mean
            length = int(rng.integers(1, cfg.max_path_length + 1))
            path = tuple(node_ids[i] for i in rng.choice(cfg.nodes, size=length, replace=False))
            mempool.append(Transaction(f"t{tx_counter}", fee, path))
            tx_counter += 1
            wealth[USERS] -= fee
            fee_terms.append(fee)

        work = work_by_node(mempool)
        candidates = sorted(node_ids, key=lambda n: (-work.get(n, 0.0), node_ids.index(n)))
        block = None
        for producer in candidates:
            block = produce_block(producer, mempool, cfg.threshold, chain, wealth)
            if block is not None:
                break
        if block is None:
            idle += 1
            if idle > cfg.max_idle_rounds:
                raise RuntimeError("no node reached the burn threshold; raise tx volume or lower it")
            continue
        idle = 0
        chain.append(block)
        mempool = []

        outcome = run_lottery(block, cfg.difficulty, rng)
        split = distribute_payout(outcome, block, cfg.payout_miner_fraction)
        wealth[outcome.miner] += split.miner_amount
        wealth[outcome.winning_router] += split.router_amount
        payout_terms.extend((split.miner_amount, split.router_amount))

        # suffix sums of burns from the tip back: revision cost at every depth
        costs = [0.0, *itertools.accumulate(b.burn_paid for b in reversed(chain.blocks))]
        strict = cfg.threshold > 0
        if any(b < a or (strict and b == a) for a, b in zip(costs, costs[1:])):
            monotone = False

        metrics.append(
            BlockMetrics(
                block=block.depth,
                producer=block.producer,
                fees=block.fees,
                burn=block.burn_paid,
                attempts=outcome.attempts,
                winning_router=outcome.winning_router,
                miner_payout=split.miner_amount,
                router_payout=split.router_amount,
                cum_revision_cost=revision_cost(chain, len(chain)),
            )
        )

    return EpochResult(
        chain=chain,
        blocks=metrics,
        wealth=wealth,
        fees_injected=math.fsum(fee_terms),
        payouts=math.fsum(payout_terms),
        burns=math.fsum(b.burn_paid for b in chain.blocks),
        initial_system_wealth=initial_system,
        revision_monotone=monotone,
    )

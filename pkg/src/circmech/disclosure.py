"""Selective-disclosure meta-game with a retreat-rate feedback controller.

Agents are paired each round.  The proposer offers to settle privately and
bypass enforcement; the receiver accepts or keeps the mechanism.  The
mechanism never sees trust or honesty, only the fraction of pairings that
went private, and nudges its security level toward a target retreat rate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .enforcement import (
    EnforcementParams,
    cost,
    foc_residual,
    optimal_security,
    residual_risk,
    search_upper_bound,
)

STABLE_DELTA = 1e-4
STABLE_ROUNDS = 50


class Settlement(enum.Enum):
    MECHANISM = "mechanism"
    PRIVATE_CHANNEL = "private_channel"


@dataclass
class Agent:
    id: int
    tau: float
    honesty: float
    wealth: float = 0.0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError(f"agent {self.id}: tau must be >= 0")
        if not 0 <= self.honesty <= 1:
            raise ValueError(f"agent {self.id}: honesty must lie in [0, 1]")


@dataclass(frozen=True)
class DisclosureProposal:
    proposer_id: int
    receiver_id: int
    surplus_offer: float
    # latent: visible to tests, never read by receivers or the controller
    sincere: bool = True

    def __post_init__(self):
        if self.proposer_id == self.receiver_id:
            raise ValueError("proposer and receiver must differ")
        if not self.surplus_offer > 0:
            raise ValueError("surplus_offer must be positive")


@dataclass(frozen=True)
class FeedbackController:
    security: float
    target_retreat: float = 0.1
    gain: float = 0.05
    bounds: tuple[float, float] = (0.0, 20.0)

    def __post_init__(self):
        lo, hi = self.bounds
        if not 0 <= lo < hi:
            raise ValueError(f"bounds must satisfy 0 <= S_min < S_max, got {self.bounds}")
        if not 0 < self.target_retreat < 1:
            raise ValueError("target_retreat must lie in (0, 1)")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        object.__setattr__(self, "security", min(max(self.security, lo), hi))


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    security: float
    retreat_rate: float
    betrayals: int
    mean_payoff: float
    private_settlements: int = 0
    pairings: int = 0


@dataclass(frozen=True)
class Terms:
    """Per-settlement economics shared by every pairing."""

    value: float = 1.0
    loss: float = 0.5
    n_agents: int = 100


def trust_weight(tau: float) -> float:
    return 1.0 - math.exp(-tau)


def mechanism_payoff(params: EnforcementParams, S: float, tau: float, terms: Terms) -> float:
    """``v - K(S)/n - R(S, tau)/n``: settlement value net of the amortised shares."""
    n = terms.n_agents
    return terms.value - cost(params, S) / n - residual_risk(params, S, tau) / n


def private_payoff(surplus: float, tau: float, terms: Terms) -> float:
    p = trust_weight(tau)
    return terms.value + surplus * p - terms.loss * (1 - p)


def evaluate_proposal(
    receiver: Agent,
    proposal: DisclosureProposal,
    security: float,
    params: EnforcementParams,
    terms: Terms = Terms(),
) -> Settlement:
    """Receiver's choice between mechanism settlement and the private deal.

    The private deal is taken when both hold:

    * at the receiver's trust the side deal beats a plain settlement,
      ``surplus * p - loss * (1 - p) > 0``;
    * enforcement is excessive at the margin for this receiver, i.e. the
      marginal cost of security exceeds the marginal risk it removes
      (``foc_residual(S, tau) > 0``).

    The second condition is what makes retreat rise with ``S`` and vanish
    below ``S*(tau)``.
    """
    if not security >= 0:
        raise ValueError("security must be non-negative")
    p = trust_weight(receiver.tau)
    side_deal = proposal.surplus_offer * p - terms.loss * (1 - p)
    if side_deal <= 0:
        return Settlement.MECHANISM
    if foc_residual(params, security, receiver.tau) <= 0:
        return Settlement.MECHANISM
    return Settlement.PRIVATE_CHANNEL


def update_enforcement(controller: FeedbackController, observed_retreat: float) -> FeedbackController:
    if not 0 <= observed_retreat <= 1:
        raise ValueError(f"observed retreat {observed_retreat!r} outside [0, 1]")
    lo, hi = controller.bounds
    s = controller.security - controller.gain * (observed_retreat - controller.target_retreat)
    return replace(controller, security=min(max(s, lo), hi))


def controller_trajectory(controller: FeedbackController, retreats: Iterable[float]) -> list[float]:
    """Security path obtained by feeding a retreat sequence to the controller."""
    path = []
    for r in retreats:
        controller = update_enforcement(controller, r)
        path.append(controller.security)
    return path


def step_round(
    agents: Sequence[Agent],
    controller: FeedbackController,
    params: EnforcementParams,
    rng: np.random.Generator,
    surplus_offer: float = 0.5,
    terms: Terms | None = None,
    round_index: int = 0,
) -> RoundMetrics:
    """Play one round of pairings at the controller's current security level.

    Random draws are made in a fixed order (permutation, then one sincerity
    draw per pair) so a round's randomness does not depend on any decision.
    Agents' wealth is updated in place; an odd agent out sits the round out.
    """
    n = len(agents)
    if n < 2:
        raise ValueError("step_round needs at least two agents")
    if terms is None:
        terms = Terms(n_agents=n)
    S = controller.security
    order = rng.permutation(n)
    n_pairs = n // 2
    sincerity_draws = rng.random(n_pairs)
    proposers = order[0 : 2 * n_pairs : 2]
    receivers = order[1 : 2 * n_pairs : 2]

    # a receiver's choice depends only on its own trust, so evaluate once per agent
    accepts = np.empty(n, dtype=bool)
    u_mech = np.empty(n)
    cache: dict[float, tuple[bool, float]] = {}
    for i, agent in enumerate(agents):
        if agent.tau not in cache:
            template = DisclosureProposal(-1, agent.id, surplus_offer)
            choice = evaluate_proposal(agent, template, S, params, terms)
            cache[agent.tau] = (
                choice is Settlement.PRIVATE_CHANNEL,
                mechanism_payoff(params, S, agent.tau, terms),
            )
        accepts[i], u_mech[i] = cache[agent.tau]

    honesty = np.array([a.honesty for a in agents])
    sincere = sincerity_draws < honesty[proposers]
    went_private = accepts[receivers]
    betrayed = went_private & ~sincere

    # mechanism settlements pay both parties the receiver's u_M
    pr = u_mech[receivers].copy()
    rv = u_mech[receivers].copy()
    honoured = went_private & sincere
    pr[honoured] = rv[honoured] = terms.value + surplus_offer
    rv[betrayed] = terms.value - terms.loss
    pr[betrayed] = terms.value + terms.loss

    payoffs = np.zeros(n)
    payoffs[proposers] = pr
    payoffs[receivers] = rv
    for i in proposers.tolist() + receivers.tolist():
        agents[i].wealth += float(payoffs[i])
    private = int(went_private.sum())
    betrayals = int(betrayed.sum())

    return RoundMetrics(
        round=round_index,
        security=S,
        retreat_rate=private / n_pairs,
        betrayals=betrayals,
        mean_payoff=float(payoffs.mean()),
        private_settlements=private,
        pairings=n_pairs,
    )


@dataclass(frozen=True)
class DisclosureConfig:
    n_agents: int = 100
    tau: float = 1.0
    tau_spread: float = 0.0
    honesty: float = 0.9
    value: float = 1.0
    surplus_offer: float = 0.5
    loss: float = 0.5
    initial_security: float = 1.0
    target_retreat: float = 0.1
    gain: float = 0.05
    security_bounds: tuple[float, float] | None = None
    max_rounds: int = 5000
    params: EnforcementParams = field(default_factory=EnforcementParams)

    def bounds(self) -> tuple[float, float]:
        if self.security_bounds is not None:
            return tuple(self.security_bounds)
        return (0.0, search_upper_bound(self.params))


@dataclass
class SimTrace:
    rounds: list[RoundMetrics]
    converged: bool
    # per-round flag: stability streak reached by this round
    stable: list[bool]
    agents: list[Agent]

    @property
    def terminal_security(self) -> float:
        return self.rounds[-1].security if self.rounds else math.nan

    @property
    def securities(self) -> list[float]:
        return [m.security for m in self.rounds]

    @property
    def retreats(self) -> list[float]:
        return [m.retreat_rate for m in self.rounds]

    def rows(self) -> list[dict]:
        return [
            {
                "round": m.round,
                "security": m.security,
                "retreat_rate": m.retreat_rate,
                "betrayals": m.betrayals,
                "mean_payoff": m.mean_payoff,
                "converged": s,
            }
            for m, s in zip(self.rounds, self.stable)
        ]


def make_population(cfg: DisclosureConfig, rng: np.random.Generator) -> list[Agent]:
    if cfg.n_agents < 2:
        raise ValueError("n_agents must be >= 2")
    if cfg.tau_spread > 0:
        lo = max(0.0, cfg.tau - cfg.tau_spread)
        taus = rng.uniform(lo, cfg.tau + cfg.tau_spread, cfg.n_agents)
    else:
        taus = np.full(cfg.n_agents, cfg.tau)
    return [Agent(i, float(t), cfg.honesty) for i, t in enumerate(taus)]


def run_to_equilibrium(
    cfg: DisclosureConfig,
    rng: np.random.Generator,
    agents: list[Agent] | None = None,
) -> SimTrace:
    """Alternate play and controller updates until S is stable or rounds run out.

    Stable means ``|dS| < 1e-4`` for 50 consecutive rounds.  A persistent
    limit cycle (common with homogeneous populations, where retreat is all or
    nothing) is reported with ``converged=False``.
    """
    if agents is None:
        agents = make_population(cfg, rng)
    terms = Terms(value=cfg.value, loss=cfg.loss, n_agents=len(agents))
    ctl = FeedbackController(cfg.initial_security, cfg.target_retreat, cfg.gain, cfg.bounds())
    rounds: list[RoundMetrics] = []
    stable: list[bool] = []
    streak = 0
    converged = False
    for r in range(cfg.max_rounds):
        m = step_round(agents, ctl, cfg.params, rng, cfg.surplus_offer, terms, round_index=r)
        new = update_enforcement(ctl, m.retreat_rate)
        streak = streak + 1 if abs(new.security - ctl.security) < STABLE_DELTA else 0
        ctl = new
        rounds.append(m)
        converged = streak >= STABLE_ROUNDS
        stable.append(converged)
        if converged:
            break
    return SimTrace(rounds, converged, stable, agents)


def equilibrium_gap(trace: SimTrace, params: EnforcementParams) -> tuple[float, float]:
    """(terminal S, S* at the population's mean trust)."""
    mean_tau = float(np.mean([a.tau for a in trace.agents]))
    return trace.terminal_security, optimal_security(params, mean_tau)

"""FDM, IDM and neighbour-only VCG outcomes.

Prices are exact rationals throughout. ``_Market.without(K)`` is the highest
reported valuation among participants outside ``V_k`` for every ``k`` in
``K``, with each ``V_k`` taken in the unmodified graph. An empty remainder
prices at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .graph import (
    ActionProfile,
    CriticalStructure,
    EffectiveGraph,
    Network,
    Node,
    TieBreak,
    critical_structure,
    highest_bidder,
    lowest_id,
    price,
    top_bid,
)

ZERO = Fraction(0)


class NoParticipants(RuntimeError):
    pass


@dataclass(frozen=True)
class Outcome:
    mechanism: str
    winner: Node | None
    allocation: Mapping[Node, int]
    payment: Mapping[Node, Fraction]
    reward: Mapping[Node, Fraction]
    utility: Mapping[Node, Fraction]
    seller_revenue: Fraction
    social_welfare: Fraction
    # money paid to the seller side and money received from the next strong
    # ancestor, before redistribution; payment = paid - received - reward
    paid: Mapping[Node, Fraction] = field(default_factory=dict)
    received: Mapping[Node, Fraction] = field(default_factory=dict)
    highest_bidder: Node | None = None
    strong_sequence: tuple = ()
    base_revenue: Fraction = ZERO
    undistributed: Fraction = ZERO

    def breakdown(self, buyer: Node) -> tuple[Fraction, Fraction, Fraction]:
        return (
            self.paid.get(buyer, ZERO),
            self.received.get(buyer, ZERO),
            self.reward.get(buyer, ZERO),
        )


def _finish(
    mechanism: str,
    winner: Node | None,
    paid: dict,
    received: dict,
    reward: dict,
    profile: ActionProfile,
    truth: Network,
    **extra,
) -> Outcome:
    buyers = list(truth.valuation)
    allocation = {b: int(b == winner) for b in buyers}
    payment = {
        b: paid.get(b, ZERO) - received.get(b, ZERO) - reward.get(b, ZERO)
        for b in buyers
    }
    utility = {b: allocation[b] * truth.valuation[b] - payment[b] for b in buyers}
    welfare = profile.bid(winner) if winner is not None else ZERO
    return Outcome(
        mechanism=mechanism,
        winner=winner,
        allocation=allocation,
        payment=payment,
        reward={b: reward.get(b, ZERO) for b in buyers},
        utility=utility,
        seller_revenue=sum(payment.values(), ZERO),
        social_welfare=welfare,
        paid=paid,
        received=received,
        **extra,
    )


class _Market:
    """Cached prices of the market after removing node sets."""

    def __init__(
        self,
        graph: EffectiveGraph,
        profile: ActionProfile,
        descendants: Mapping[Node, frozenset],
    ) -> None:
        self.graph = graph
        self.profile = profile
        self.descendants = descendants
        self._cache: dict[frozenset, Fraction] = {}

    def without(self, removed: Iterable[Node]) -> Fraction:
        key = frozenset(removed)
        if key not in self._cache:
            gone = set().union(*(self.descendants[k] for k in key))
            self._cache[key] = price(
                self.profile, (n for n in self.graph.participants if n not in gone)
            )
        return self._cache[key]


def _structure_for_top(
    graph: EffectiveGraph, profile: ActionProfile, tie_break: TieBreak
) -> CriticalStructure:
    if not graph.participants:
        raise NoParticipants("no buyer joined the auction")
    top = highest_bidder(profile, graph.participants, tie_break)
    return critical_structure(graph, top)


def fdm_winner(
    graph: EffectiveGraph,
    profile: ActionProfile,
    tie_break: TieBreak = lowest_id,
    _structure: CriticalStructure | None = None,
    _market: _Market | None = None,
) -> Node:
    structure = _structure or _structure_for_top(graph, profile, tie_break)
    market = _market or _Market(graph, profile, structure.descendants)
    seq = structure.sequence
    for here, nxt in zip(seq, seq[1:]):
        if profile.bid(here) == market.without({nxt} | structure.segment(here, nxt)):
            return here
    return seq[-1]


def fdm_outcome(
    graph: EffectiveGraph,
    profile: ActionProfile,
    truth: Network,
    tie_break: TieBreak = lowest_id,
) -> Outcome:
    structure = _structure_for_top(graph, profile, tie_break)
    market = _Market(graph, profile, structure.descendants)
    winner = fdm_winner(graph, profile, tie_break, structure, market)
    seq = structure.sequence
    chain = list(seq[: seq.index(winner) + 1])

    paid: dict = {}
    received: dict = {}
    reward: dict = {}
    for j, c in enumerate(chain):
        paid[c] = market.without({c})
        if c != winner:
            nxt = chain[j + 1]
            received[c] = market.without({nxt} | structure.segment(c, nxt))
        if j == 0:
            continue
        weak = structure.segment(chain[j - 1], c)
        if not weak:
            continue
        floor = market.without({c} | weak)
        share = len(weak) + 1
        holder = top_descendant_holder_in(profile, weak, structure.descendants, tie_break)
        reward[c] = (market.without({c, holder}) - floor) / share
        for i in weak:
            reward[i] = (market.without({i, c}) - floor) / share

    base = market.without({chain[0]})
    out = _finish(
        "fdm",
        winner,
        paid,
        received,
        reward,
        profile,
        truth,
        highest_bidder=structure.target,
        strong_sequence=tuple(chain),
        base_revenue=base,
    )
    return _with_undistributed(out)


def _with_undistributed(out: Outcome) -> Outcome:
    from dataclasses import replace

    return replace(out, undistributed=out.seller_revenue - out.base_revenue)


def top_descendant_holder_in(
    profile: ActionProfile,
    nodes: Iterable[Node],
    descendants: Mapping[Node, frozenset],
    tie_break: TieBreak = lowest_id,
) -> Node:
    nodes = list(nodes)
    scores = {n: top_bid(None, profile, descendants[n]) for n in nodes}
    best = max(scores.values())
    return tie_break([n for n in nodes if scores[n] == best])


def idm_outcome(
    graph: EffectiveGraph,
    profile: ActionProfile,
    truth: Network,
    tie_break: TieBreak = lowest_id,
) -> Outcome:
    structure = _structure_for_top(graph, profile, tie_break)
    market = _Market(graph, profile, structure.descendants)
    seq = structure.sequence
    winner = seq[-1]
    for here, nxt in zip(seq, seq[1:]):
        if profile.bid(here) == market.without({nxt}):
            winner = here
            break
    chain = list(seq[: seq.index(winner) + 1])
    paid = {c: market.without({c}) for c in chain}
    received = {c: market.without({n}) for c, n in zip(chain, chain[1:])}
    out = _finish(
        "idm",
        winner,
        paid,
        received,
        {},
        profile,
        truth,
        highest_bidder=structure.target,
        strong_sequence=tuple(chain),
        base_revenue=paid[chain[0]],
    )
    return _with_undistributed(out)


def neighbor_vcg_outcome(
    truth: Network, profile: ActionProfile, tie_break: TieBreak = lowest_id
) -> Outcome:
    """Second-price auction among the seller's reporting neighbours only."""
    pool = [n for n in truth.neighbors_of(truth.seller) if profile.reports.get(n) is not None]
    if not pool:
        raise NoParticipants("the seller has no reporting neighbour")
    winner = highest_bidder(profile, pool, tie_break)
    second = price(profile, [n for n in pool if n != winner])
    out = _finish("vcg", winner, {winner: second}, {}, {}, profile, truth, base_revenue=second)
    return out


def social_welfare(outcome: Outcome, profile: ActionProfile) -> Fraction:
    return sum(
        (profile.bid(b) for b, won in outcome.allocation.items() if won), ZERO
    )


MECHANISMS = {
    "fdm": fdm_outcome,
    "idm": idm_outcome,
}


def run_mechanism(
    name: str,
    truth: Network,
    profile: ActionProfile,
    graph: EffectiveGraph | None = None,
    tie_break: TieBreak = lowest_id,
) -> Outcome:
    """Single entry point used by the verifier and the harness."""
    if name == "vcg":
        return neighbor_vcg_outcome(truth, profile, tie_break)
    if name not in MECHANISMS:
        raise ValueError(f"unknown mechanism {name!r}")
    if graph is None:
        from .graph import build_effective_graph

        graph = build_effective_graph(truth, profile)
    return MECHANISMS[name](graph, profile, truth, tie_break)

"""Participation graphs and the cut structure that diffusion mechanisms price on.

Every buyer reachable from the seller through invitations is a participant.
For a target participant the cut structure consists of

* the strong critical ancestors: single nodes whose removal disconnects the
  target from the seller, ordered by depth and ending at the target itself;
* the weak critical ancestors between two consecutive strong ones: the
  interior of the biconnected block that joins them;
* critical descendant sets ``V_i``: ``i`` plus everything that loses its last
  route to the seller once ``i`` leaves.

All of it comes out of one lowlink depth-first search rooted at the seller.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Callable, Hashable, Iterable, Mapping, Sequence

Node = Hashable


class ProfileError(ValueError):
    """A report that the ground-truth network cannot support."""


class NotAParticipant(LookupError):
    pass


@total_ordering
class _NegInfinity:
    """Bid of an empty market: below every rational."""

    _instance: _NegInfinity | None = None

    def __new__(cls) -> _NegInfinity:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        return other is not self

    def __hash__(self) -> int:
        return hash("-inf")

    def __repr__(self) -> str:
        return "NEG_INF"


NEG_INF = _NegInfinity()


@dataclass(frozen=True)
class Network:
    """Ground truth: seller, buyers, private valuations and true neighbours."""

    seller: Node
    valuation: Mapping[Node, Fraction]
    neighbors: Mapping[Node, frozenset]

    def __post_init__(self) -> None:
        if self.seller in self.valuation:
            raise ProfileError(f"seller {self.seller!r} cannot also be a buyer")
        for buyer, value in self.valuation.items():
            if value < 0:
                raise ProfileError(f"buyer {buyer!r} has negative valuation {value}")
        for node, nbrs in self.neighbors.items():
            if node != self.seller and node not in self.valuation:
                raise ProfileError(f"unknown node {node!r} in neighbour map")
            for other in nbrs:
                if other == node:
                    raise ProfileError(f"self-loop at {node!r}")
                if node not in self.neighbors.get(other, ()):
                    raise ProfileError(f"asymmetric edge {node!r} -> {other!r}")

    @classmethod
    def from_edges(
        cls,
        seller: Node,
        valuation: Mapping[Node, int | Fraction | str],
        edges: Iterable[tuple[Node, Node]],
    ) -> Network:
        nbrs: dict[Node, set] = {seller: set()}
        vals = {b: Fraction(v) for b, v in valuation.items()}
        for b in vals:
            nbrs.setdefault(b, set())
        for u, v in edges:
            for x in (u, v):
                if x not in nbrs:
                    raise ProfileError(f"edge endpoint {x!r} is not a known node")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(seller, vals, {k: frozenset(s) for k, s in nbrs.items()})

    @property
    def buyers(self) -> frozenset:
        return frozenset(self.valuation)

    def neighbors_of(self, node: Node) -> frozenset:
        return self.neighbors.get(node, frozenset())

    def edges(self) -> set[frozenset]:
        return {frozenset((u, v)) for u, nbrs in self.neighbors.items() for v in nbrs}


@dataclass(frozen=True)
class Report:
    valuation: Fraction
    neighbors: frozenset


@dataclass(frozen=True)
class ActionProfile:
    """Per-buyer reports; ``None`` means the buyer takes no part."""

    reports: Mapping[Node, Report | None]

    @classmethod
    def truthful(cls, network: Network) -> ActionProfile:
        return cls(
            {
                b: Report(v, network.neighbors_of(b))
                for b, v in network.valuation.items()
            }
        )

    def replace(self, buyer: Node, report: Report | None) -> ActionProfile:
        reports = dict(self.reports)
        reports[buyer] = report
        return ActionProfile(reports)

    def bid(self, buyer: Node) -> Fraction:
        report = self.reports.get(buyer)
        if report is None:
            raise NotAParticipant(buyer)
        return report.valuation


@dataclass(frozen=True)
class EffectiveGraph:
    seller: Node
    participants: frozenset
    adjacency: Mapping[Node, frozenset]
    depth: Mapping[Node, int]

    @property
    def nodes(self) -> list:
        return [self.seller, *self.participants]

    def edges(self) -> set[frozenset]:
        return {frozenset((u, v)) for u, nbrs in self.adjacency.items() for v in nbrs}

    def require(self, node: Node) -> None:
        if node not in self.participants:
            raise NotAParticipant(f"{node!r} is not a participant")


@dataclass(frozen=True)
class CriticalStructure:
    target: Node
    sequence: tuple
    # keyed by consecutive pairs of (seller, *sequence); the (seller, c_1)
    # entry holds the weak ancestors in front of the first strong ancestor
    weak_sets: Mapping[tuple, frozenset]
    descendants: Mapping[Node, frozenset] = field(default_factory=dict)

    def segment(self, upper: Node, lower: Node) -> frozenset:
        return self.weak_sets[(upper, lower)]

    def critical_ancestors(self) -> frozenset:
        out = set(self.sequence)
        for members in self.weak_sets.values():
            out |= members
        return frozenset(out)


def validate_profile(network: Network, profile: ActionProfile) -> None:
    for buyer, report in profile.reports.items():
        if buyer not in network.valuation:
            raise ProfileError(f"report from unknown buyer {buyer!r}")
        if report is None:
            continue
        if report.valuation < 0:
            raise ProfileError(f"buyer {buyer!r} reported negative valuation")
        invented = set(report.neighbors) - network.neighbors_of(buyer)
        if invented:
            raise ProfileError(
                f"buyer {buyer!r} reported non-neighbours {sorted(map(repr, invented))}"
            )


def build_effective_graph(network: Network, profile: ActionProfile) -> EffectiveGraph:
    """Participants are those the invitation chain from the seller reaches.

    An edge between two participants exists when either endpoint reports the
    other.
    """
    validate_profile(network, profile)
    reports = profile.reports
    seller = network.seller

    def active(node: Node) -> bool:
        return reports.get(node) is not None

    participants: set = set()
    queue = deque(n for n in network.neighbors_of(seller) if active(n))
    participants.update(queue)
    while queue:
        node = queue.popleft()
        for invitee in reports[node].neighbors:
            if invitee not in participants and invitee != seller and active(invitee):
                participants.add(invitee)
                queue.append(invitee)

    adjacency: dict[Node, set] = {n: set() for n in participants}
    adjacency[seller] = {n for n in network.neighbors_of(seller) if n in participants}
    for n in adjacency[seller]:
        adjacency[n].add(seller)
    for node in participants:
        for other in reports[node].neighbors:
            if other in participants:
                adjacency[node].add(other)
                adjacency[other].add(node)

    frozen = {n: frozenset(s) for n, s in adjacency.items()}
    return EffectiveGraph(
        seller, frozenset(participants), frozen, _bfs_depths(frozen, seller)
    )


def _bfs_depths(adjacency: Mapping[Node, frozenset], root: Node) -> dict:
    depth = {root: 0}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in depth:
                depth[nxt] = depth[node] + 1
                queue.append(nxt)
    return depth


def reachable_without(graph: EffectiveGraph, removed: Iterable[Node]) -> set:
    """Participants still connected to the seller once ``removed`` is deleted."""
    blocked = set(removed)
    seen = {graph.seller}
    queue = deque([graph.seller])
    adjacency = graph.adjacency
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen and nxt not in blocked:
                seen.add(nxt)
                queue.append(nxt)
    seen.discard(graph.seller)
    return seen


def critical_descendants(graph: EffectiveGraph, node: Node) -> frozenset:
    graph.require(node)
    return frozenset(graph.participants - reachable_without(graph, (node,)))


def removed_set(graph: EffectiveGraph, removed: Iterable[Node]) -> frozenset:
    """``N_{-K}``: participants outside every removed node's descendant set.

    For a single node, or a strong ancestor together with the weak set in
    front of it, this equals what stays reachable once ``K`` is deleted. For
    arbitrary sets it can be larger, since nodes that only lose their last
    route when several members of ``K`` leave together are kept.
    """
    gone: set = set()
    for node in removed:
        gone |= critical_descendants(graph, node)
    return frozenset(graph.participants - gone)


@dataclass
class _Lowlink:
    """Output of the lowlink search rooted at the seller."""

    order: list
    preorder: dict
    parent: dict
    low: dict
    size: dict
    blocks: list

    def subtree(self, node: Node) -> list:
        start = self.preorder[node]
        return self.order[start : start + self.size[node]]

    def separating_children(self, node: Node, children: Mapping[Node, list]) -> list:
        pre = self.preorder[node]
        return [c for c in children.get(node, ()) if self.low[c] >= pre]


def _lowlink(graph: EffectiveGraph) -> tuple[_Lowlink, dict]:
    """Iterative Hopcroft-Tarjan search from the seller, collecting blocks."""
    adjacency = graph.adjacency
    root = graph.seller
    preorder = {root: 0}
    order = [root]
    parent: dict = {root: None}
    low = {root: 0}
    children: dict = {}
    blocks: list[frozenset] = []
    edge_stack: list[tuple] = []
    stack = [(root, iter(sorted(adjacency[root], key=_sort_key)))]
    while stack:
        node, it = stack[-1]
        advanced = False
        for nxt in it:
            if nxt not in preorder:
                preorder[nxt] = len(order)
                order.append(nxt)
                low[nxt] = preorder[nxt]
                parent[nxt] = node
                children.setdefault(node, []).append(nxt)
                edge_stack.append((node, nxt))
                stack.append((nxt, iter(sorted(adjacency[nxt], key=_sort_key))))
                advanced = True
                break
            if nxt != parent[node] and preorder[nxt] < preorder[node]:
                low[node] = min(low[node], preorder[nxt])
                edge_stack.append((node, nxt))
        if advanced:
            continue
        stack.pop()
        if stack:
            up = stack[-1][0]
            low[up] = min(low[up], low[node])
            if low[node] >= preorder[up]:
                members = set()
                while True:
                    edge = edge_stack.pop()
                    members.update(edge)
                    if edge == (up, node):
                        break
                blocks.append(frozenset(members))
    size = {n: 1 for n in order}
    for n in reversed(order[1:]):
        size[parent[n]] += size[n]
    return _Lowlink(order, preorder, parent, low, size, blocks), children


def _sort_key(node: Node) -> tuple:
    return (type(node).__name__, node)


def all_critical_descendants(graph: EffectiveGraph) -> dict:
    """``V_i`` for every participant from a single lowlink pass."""
    ll, children = _lowlink(graph)
    out = {}
    for node in ll.order[1:]:
        members = {node}
        for child in ll.separating_children(node, children):
            members.update(ll.subtree(child))
        out[node] = frozenset(members)
    return out


def _strong_chain(graph: EffectiveGraph, target: Node, ll: _Lowlink) -> list:
    chain = [target]
    child, node = target, ll.parent[target]
    while node is not None and node != graph.seller:
        if ll.low[child] >= ll.preorder[node]:
            chain.append(node)
        child, node = node, ll.parent[node]
    chain.reverse()
    depths = [graph.depth[c] for c in chain]
    assert all(a < b for a, b in zip(depths, depths[1:])), "depth tie inside C"
    return chain


def strong_critical_sequence(graph: EffectiveGraph, target: Node) -> list:
    graph.require(target)
    ll, _ = _lowlink(graph)
    return _strong_chain(graph, target, ll)


def _weak_sets(graph: EffectiveGraph, sequence: Sequence, blocks: list) -> dict:
    by_node: dict = {}
    for idx, block in enumerate(blocks):
        for n in block:
            by_node.setdefault(n, set()).add(idx)
    out = {}
    chain = [graph.seller, *sequence]
    for upper, lower in zip(chain, chain[1:]):
        shared = by_node.get(upper, set()) & by_node.get(lower, set())
        assert len(shared) == 1, f"{upper!r} and {lower!r} share {len(shared)} blocks"
        block = blocks[shared.pop()]
        out[(upper, lower)] = frozenset(block - {upper, lower})
    return out


def weak_critical_sets(graph: EffectiveGraph, sequence: Sequence) -> dict:
    """Weak critical ancestors per consecutive pair of the strong sequence.

    The result also carries the segment in front of the first strong
    ancestor under the key ``(seller, sequence[0])``.
    """
    ll, _ = _lowlink(graph)
    return _weak_sets(graph, sequence, ll.blocks)


def critical_structure(graph: EffectiveGraph, target: Node) -> CriticalStructure:
    graph.require(target)
    ll, children = _lowlink(graph)
    sequence = _strong_chain(graph, target, ll)
    weak = _weak_sets(graph, sequence, ll.blocks)
    descendants = {}
    for node in ll.order[1:]:
        members = {node}
        for child in ll.separating_children(node, children):
            members.update(ll.subtree(child))
        descendants[node] = frozenset(members)
    return CriticalStructure(target, tuple(sequence), weak, descendants)


# -- bids over node sets ---------------------------------------------------

TieBreak = Callable[[Sequence[Node]], Node]


def lowest_id(candidates: Sequence[Node]) -> Node:
    return min(candidates, key=_sort_key)


def seeded_tie_break(seed: int) -> TieBreak:
    """Uniform tie-breaking driven by its own RNG, for experiments only."""
    import random

    rng = random.Random(seed)

    def pick(candidates: Sequence[Node]) -> Node:
        return rng.choice(sorted(candidates, key=_sort_key))

    return pick


def top_bid(graph: EffectiveGraph, profile: ActionProfile, nodes: Iterable[Node]):
    best = NEG_INF
    for node in nodes:
        bid = profile.bid(node)
        if best is NEG_INF or bid > best:
            best = bid
    return best


def price(profile: ActionProfile, nodes: Iterable[Node]) -> Fraction:
    """Highest bid in ``nodes``; an empty market sets a price of zero."""
    best = top_bid(None, profile, nodes)
    return Fraction(0) if best is NEG_INF else best


def highest_bidder(
    profile: ActionProfile, nodes: Iterable[Node], tie_break: TieBreak = lowest_id
) -> Node | None:
    nodes = list(nodes)
    if not nodes:
        return None
    best = top_bid(None, profile, nodes)
    return tie_break([n for n in nodes if profile.bid(n) == best])


def top_descendant_holder(
    graph: EffectiveGraph,
    profile: ActionProfile,
    nodes: Iterable[Node],
    descendants: Mapping[Node, frozenset] | None = None,
    tie_break: TieBreak = lowest_id,
) -> Node | None:
    """The member of ``nodes`` whose descendant set holds the highest bid."""
    nodes = list(nodes)
    if not nodes:
        return None
    if descendants is None:
        descendants = {n: critical_descendants(graph, n) for n in nodes}
    scores = {n: top_bid(graph, profile, descendants[n]) for n in nodes}
    best = max(scores.values())
    return tie_break([n for n in nodes if scores[n] == best])

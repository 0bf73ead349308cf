"""Brute-force oracles and property sweeps for the diffusion mechanisms.

The sweeps never raise on a failed property; they collect violations into a
:class:`PropertyReport` together with the seed that reproduces them.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import chain, combinations
from math import lcm
from typing import Any, Callable, Iterable, Sequence

from .graph import (
    ActionProfile,
    CriticalStructure,
    EffectiveGraph,
    Network,
    Node,
    Report,
    build_effective_graph,
    critical_structure,
    highest_bidder,
    lowest_id,
    reachable_without,
    top_bid,
)
from .instances import GeneratorSpec, ValuationSpec, generate_network, random_small_network
from .mechanisms import NoParticipants, Outcome, _finish, run_mechanism

log = logging.getLogger(__name__)

MAX_ORACLE_BUYERS = 16
MAX_IC_BUYERS = 16
MAX_SWEEP_DEGREE = 10

Mechanism = Callable[[Network, ActionProfile, EffectiveGraph], Outcome]


class SizeGuardError(RuntimeError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class DeviationReport:
    agent: Node
    valuation: Fraction
    neighbors: frozenset
    truthful_utility: Fraction
    deviating_utility: Fraction

    @property
    def profitable(self) -> bool:
        return self.deviating_utility > self.truthful_utility


@dataclass
class PropertyReport:
    name: str
    seed: int | None = None
    instances_checked: int = 0
    checks: int = 0
    violations: list[tuple[Any, Any]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def merge(self, other: PropertyReport) -> None:
        self.instances_checked += other.instances_checked
        self.checks += other.checks
        self.violations.extend(other.violations)

    def summary(self) -> str:
        status = "PASS" if self.holds else "FAIL"
        return (
            f"{status} {self.name}: {self.instances_checked} instances, "
            f"{self.checks} checks, {len(self.violations)} violations"
        )


def _label(mechanism: str | Mechanism) -> str:
    return mechanism if isinstance(mechanism, str) else getattr(mechanism, "__name__", "custom")


def resolve(mechanism: str | Mechanism) -> Mechanism:
    if callable(mechanism):
        return mechanism
    return lambda truth, profile, graph: run_mechanism(mechanism, truth, profile, graph)


def _run(mech: Mechanism, truth: Network, profile: ActionProfile) -> Outcome | None:
    graph = build_effective_graph(truth, profile)
    try:
        return mech(truth, profile, graph)
    except NoParticipants:
        return None


def _utility(outcome: Outcome | None, buyer: Node) -> Fraction:
    return Fraction(0) if outcome is None else outcome.utility[buyer]


def _subsets(items: Iterable[Node]) -> Iterable[frozenset]:
    items = sorted(items, key=lambda n: (type(n).__name__, n))
    return (
        frozenset(c)
        for c in chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))
    )


# -- structural oracle -----------------------------------------------------------


def simple_paths(graph: EffectiveGraph, target: Node) -> list[tuple]:
    """Every simple seller-to-target path, by exhaustive DFS."""
    paths: list[tuple] = []
    path = [graph.seller]
    on_path = {graph.seller}

    def extend(node: Node) -> None:
        if node == target:
            paths.append(tuple(path))
            return
        for nxt in graph.adjacency[node]:
            if nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                extend(nxt)
                path.pop()
                on_path.discard(nxt)

    extend(graph.seller)
    return paths


def oracle_critical_structure(graph: EffectiveGraph, target: Node) -> CriticalStructure:
    if len(graph.participants) > MAX_ORACLE_BUYERS:
        raise SizeGuardError(
            f"oracle enumeration refused for {len(graph.participants)} buyers"
            f" (limit {MAX_ORACLE_BUYERS})"
        )
    graph.require(target)
    paths = simple_paths(graph, target)
    on_every = set(paths[0][1:]).intersection(*(p[1:] for p in paths))
    sequence = [n for n in paths[0] if n in on_every]
    for p in paths:
        if [n for n in p if n in on_every] != sequence:
            raise AssertionError(f"strong ancestors appear out of order on {p}")
    anchors = [graph.seller, *sequence]
    buckets: dict[tuple, set] = {pair: set() for pair in zip(anchors, anchors[1:])}
    for p in paths:
        passed = 0
        for node in p[1:]:
            if node in on_every:
                passed += 1
            else:
                buckets[(anchors[passed], anchors[passed + 1])].add(node)
    descendants = {
        n: frozenset(graph.participants - reachable_without(graph, (n,)))
        for n in graph.participants
    }
    return CriticalStructure(
        target, tuple(sequence), {k: frozenset(v) for k, v in buckets.items()}, descendants
    )


def oracle_strong_sequence(graph: EffectiveGraph, target: Node) -> list:
    """Nodes whose single removal disconnects ``target``, by depth."""
    cut = [
        n
        for n in graph.participants
        if n != target and target not in reachable_without(graph, (n,))
    ]
    return sorted(cut, key=graph.depth.__getitem__) + [target]


def structures_match(graph: EffectiveGraph, target: Node) -> list[str]:
    """Differences between the lowlink result and the path oracle."""
    fast = critical_structure(graph, target)
    slow = oracle_critical_structure(graph, target)
    problems = []
    if fast.sequence != slow.sequence:
        problems.append(f"sequence {fast.sequence} != {slow.sequence}")
    if dict(fast.weak_sets) != dict(slow.weak_sets):
        problems.append(f"weak sets {dict(fast.weak_sets)} != {dict(slow.weak_sets)}")
    if dict(fast.descendants) != dict(slow.descendants):
        problems.append("descendant sets differ")
    if list(fast.sequence) != oracle_strong_sequence(graph, target):
        problems.append("sequence disagrees with the removal test")
    return problems


# -- individual rationality -------------------------------------------------------


def _sweep_guard(network: Network, limit_buyers: int) -> None:
    degree = max((len(network.neighbors_of(b)) for b in network.valuation), default=0)
    if len(network.valuation) > limit_buyers or degree > MAX_SWEEP_DEGREE:
        raise SizeGuardError(
            f"exhaustive sweep refused: {len(network.valuation)} buyers, max degree"
            f" {degree} (limits {limit_buyers} buyers, degree {MAX_SWEEP_DEGREE})"
        )


def check_ir(
    network: Network,
    mechanism: str | Mechanism,
    neighbor_sweep: bool = False,
    seed: Any = None,
) -> PropertyReport:
    """Truthful-valuation buyers never end with negative utility.

    With ``neighbor_sweep`` every buyer in turn also tries every subset of
    her neighbours as her invitation list.
    """
    mech = resolve(mechanism)
    report = PropertyReport(f"ir[{_label(mechanism)}]", seed, instances_checked=1)
    truthful = ActionProfile.truthful(network)
    profiles = [truthful]
    if neighbor_sweep:
        _sweep_guard(network, MAX_IC_BUYERS)
        for buyer in sorted(network.valuation, key=lambda n: (type(n).__name__, n)):
            full = network.neighbors_of(buyer)
            for subset in _subsets(full):
                if subset != full:
                    profiles.append(
                        truthful.replace(buyer, Report(network.valuation[buyer], subset))
                    )
    for profile in profiles:
        outcome = _run(mech, network, profile)
        report.checks += 1
        if outcome is None:
            continue
        for buyer, utility in outcome.utility.items():
            if utility < 0:
                report.violations.append((seed, (buyer, profile.reports[buyer], utility)))
    return report


# -- incentive compatibility ------------------------------------------------------


def valuation_grid(network: Network, buyer: Node) -> list[Fraction]:
    """Reports that hit every region where the outcome can change.

    Outcomes depend on a buyer's report only through its order relative to
    the other bids, so the other bids themselves, points just beside them,
    zero, her true value and a point above the maximum cover every case.
    """
    values = list(network.valuation.values())
    unit = Fraction(1, lcm(*(v.denominator for v in values))) if values else Fraction(1)
    eps = unit / 2
    grid = {Fraction(0), network.valuation[buyer]}
    others = [v for b, v in network.valuation.items() if b != buyer]
    for v in others:
        grid.update((v - eps, v, v + eps))
    grid.add(max(values, default=Fraction(0)) + eps)
    return sorted(g for g in grid if g >= 0)


def check_ic(
    network: Network,
    mechanism: str | Mechanism,
    seed: Any = None,
    grid: Callable[[Network, Node], Sequence[Fraction]] = valuation_grid,
) -> PropertyReport:
    """No single buyer gains by misreporting her valuation or hiding neighbours."""
    _sweep_guard(network, MAX_IC_BUYERS)
    mech = resolve(mechanism)
    report = PropertyReport(f"ic[{_label(mechanism)}]", seed, instances_checked=1)
    truthful = ActionProfile.truthful(network)
    base_graph = build_effective_graph(network, truthful)
    baseline = _run(mech, network, truthful)
    for buyer in sorted(base_graph.participants, key=lambda n: (type(n).__name__, n)):
        honest = _utility(baseline, buyer)
        values = grid(network, buyer)
        for subset in _subsets(network.neighbors_of(buyer)):
            probe = truthful.replace(buyer, Report(network.valuation[buyer], subset))
            graph = build_effective_graph(network, probe)
            for value in values:
                profile = probe.replace(buyer, Report(value, subset))
                try:
                    outcome = mech(network, profile, graph)
                except NoParticipants:
                    outcome = None
                report.checks += 1
                dev = DeviationReport(buyer, value, subset, honest, _utility(outcome, buyer))
                if dev.profitable:
                    report.violations.append((seed, dev))
    return report


# -- revenue ---------------------------------------------------------------------


def check_revenue_chain(network: Network, seed: Any = None) -> PropertyReport:
    """FDM revenue >= IDM revenue >= neighbour-VCG revenue, exactly."""
    report = PropertyReport("revenue_chain", seed, instances_checked=1, checks=1)
    profile = ActionProfile.truthful(network)
    graph = build_effective_graph(network, profile)
    if not graph.participants:
        return report
    fdm = run_mechanism("fdm", network, profile, graph)
    idm = run_mechanism("idm", network, profile, graph)
    vcg = run_mechanism("vcg", network, profile, graph)
    if not fdm.seller_revenue >= idm.seller_revenue >= vcg.seller_revenue:
        report.violations.append(
            (seed, ("fdm>=idm>=vcg", fdm.seller_revenue, idm.seller_revenue, vcg.seller_revenue))
        )
    if fdm.base_revenue != idm.seller_revenue:
        report.violations.append((seed, ("fdm base == idm", fdm.base_revenue, idm.seller_revenue)))
    if fdm.seller_revenue != fdm.base_revenue + fdm.undistributed or fdm.undistributed < 0:
        report.violations.append((seed, ("remainder >= 0", fdm.undistributed)))
    return report


def holder_divergence(network: Network) -> list[tuple]:
    """Segments where the top descendant holder depends on when ``V`` is taken.

    FDM picks the holder with descendant sets of the full graph. The other
    reading recomputes them after the segment's closing strong ancestor has
    left. Returns ``(segment, static_holder, recomputed_holder)`` for every
    segment of the winner's chain where the two picks differ.
    """
    profile = ActionProfile.truthful(network)
    graph = build_effective_graph(network, profile)
    if not graph.participants:
        return []
    outcome = run_mechanism("fdm", network, profile, graph)
    structure = critical_structure(graph, outcome.highest_bidder)
    chain_ = outcome.strong_sequence
    out = []
    for upper, lower in zip(chain_, chain_[1:]):
        weak = structure.segment(upper, lower)
        if not weak:
            continue
        static = {w: top_bid(graph, profile, structure.descendants[w]) for w in weak}
        alive = reachable_without(graph, {lower})
        recomputed = {}
        for w in weak:
            gone = alive - reachable_without(graph, {lower, w})
            recomputed[w] = top_bid(graph, profile, gone | {w})
        pick_static = lowest_id([w for w in weak if static[w] == max(static.values())])
        pick_new = lowest_id([w for w in weak if recomputed[w] == max(recomputed.values())])
        if pick_static != pick_new:
            out.append(((upper, lower), pick_static, pick_new))
    return out


# -- table metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class MechanismMetrics:
    mechanism: str
    winner: Node | None
    social_welfare: Fraction
    beneficial_buyers: tuple
    critical_ancestors: int
    beneficial_ratio: Fraction
    total_utility: Fraction
    revenue: Fraction

    @property
    def beneficial_count(self) -> int:
        return len(self.beneficial_buyers)


def outcome_metrics(outcome: Outcome | None, graph: EffectiveGraph, mechanism: str) -> MechanismMetrics:
    zero = Fraction(0)
    if outcome is None:
        return MechanismMetrics(mechanism, None, zero, (), 0, zero, zero, zero)
    ancestors = critical_structure(graph, outcome.winner).critical_ancestors()
    beneficial = tuple(
        sorted((b for b, u in outcome.utility.items() if u > 0), key=lambda n: (type(n).__name__, n))
    )
    hits = sum(1 for b in beneficial if b in ancestors)
    return MechanismMetrics(
        mechanism,
        outcome.winner,
        outcome.social_welfare,
        beneficial,
        len(ancestors),
        Fraction(hits, len(ancestors)),
        sum(outcome.utility.values(), zero),
        outcome.seller_revenue,
    )


def check_table1_metrics(network: Network, mechanisms: Sequence[str] = ("fdm", "idm")) -> dict:
    profile = ActionProfile.truthful(network)
    graph = build_effective_graph(network, profile)
    out = {}
    for name in mechanisms:
        outcome = None
        if graph.participants:
            outcome = run_mechanism(name, network, profile, graph)
        out[name] = outcome_metrics(outcome, graph, name)
    return out


# -- detector self-tests -------------------------------------------------------


def first_price_stub(truth: Network, profile: ActionProfile, graph: EffectiveGraph) -> Outcome:
    """Deliberately broken: highest participant pays her own bid."""
    if not graph.participants:
        raise NoParticipants("empty market")
    winner = highest_bidder(profile, graph.participants)
    return _finish("first_price", winner, {winner: profile.bid(winner)}, {}, {}, profile, truth)


def overcharge_stub(truth: Network, profile: ActionProfile, graph: EffectiveGraph) -> Outcome:
    """Deliberately broken: the winner pays one unit above her bid."""
    if not graph.participants:
        raise NoParticipants("empty market")
    winner = highest_bidder(profile, graph.participants)
    return _finish("overcharge", winner, {winner: profile.bid(winner) + 1}, {}, {}, profile, truth)


STUBS = {"first_price": first_price_stub, "overcharge": overcharge_stub}


# -- seeded sweeps ----------------------------------------------------------------


def instance_seeds(seed: int, count: int) -> list[int]:
    rng = random.Random(seed)
    return [rng.getrandbits(64) for _ in range(count)]


def _sweep(
    name: str,
    seed: int,
    count: int,
    make: Callable[[int], Network],
    check: Callable[[Network, int], PropertyReport],
) -> PropertyReport:
    total = PropertyReport(name, seed)
    for s in instance_seeds(seed, count):
        total.merge(check(make(s), s))
    log.info(total.summary())
    return total


def sweep_oracle(seed: int, count: int, max_buyers: int = 10) -> PropertyReport:
    def check(net: Network, s: int) -> PropertyReport:
        rep = PropertyReport("oracle", s, instances_checked=1)
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        for target in graph.participants:
            rep.checks += 1
            problems = structures_match(graph, target)
            if problems:
                rep.violations.append((s, (target, problems)))
        return rep

    return _sweep("oracle", seed, count, lambda s: random_small_network(s, max_buyers), check)


def sweep_ir(
    seed: int, count: int, mechanism: str | Mechanism = "fdm", max_buyers: int = 10
) -> PropertyReport:
    return _sweep(
        f"ir[{_label(mechanism)}]",
        seed,
        count,
        lambda s: random_small_network(s, max_buyers),
        lambda net, s: check_ir(net, mechanism, neighbor_sweep=True, seed=s),
    )


def sweep_ic(
    seed: int, count: int, mechanism: str | Mechanism = "fdm", max_buyers: int = 8
) -> PropertyReport:
    return _sweep(
        f"ic[{_label(mechanism)}]",
        seed,
        count,
        lambda s: random_small_network(s, max_buyers),
        lambda net, s: check_ic(net, mechanism, seed=s),
    )


def sweep_revenue(seed: int, count: int, max_buyers: int = 30) -> PropertyReport:
    return _sweep(
        "revenue_chain",
        seed,
        count,
        lambda s: random_small_network(s, max_buyers),
        check_revenue_chain,
    )


def degeneracy_violations(network: Network, star: bool = False) -> list[str]:
    """FDM and IDM must coincide on trees; on stars both equal second price."""
    profile = ActionProfile.truthful(network)
    graph = build_effective_graph(network, profile)
    if not graph.participants:
        return []
    fdm = run_mechanism("fdm", network, profile, graph)
    idm = run_mechanism("idm", network, profile, graph)
    problems = []
    if fdm.winner != idm.winner or dict(fdm.payment) != dict(idm.payment):
        problems.append("fdm != idm")
    if any(fdm.reward.values()):
        problems.append("non-zero reward")
    if star:
        vcg = run_mechanism("vcg", network, profile, graph)
        if vcg.winner != fdm.winner or dict(vcg.payment) != dict(fdm.payment):
            problems.append("star outcome != second price")
    return problems


def generated(kind: str, n: int, seed: int, **params) -> Network:
    return generate_network(GeneratorSpec(kind, n, **params), ValuationSpec("uniform_int", 0, 20), seed)

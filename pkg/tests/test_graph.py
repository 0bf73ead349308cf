from __future__ import annotations

from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import HealthCheck, given, settings

from fairdiffusion.graph import (
    NEG_INF,
    ActionProfile,
    Network,
    NotAParticipant,
    ProfileError,
    Report,
    all_critical_descendants,
    build_effective_graph,
    critical_descendants,
    critical_structure,
    reachable_without,
    removed_set,
    seeded_tie_break,
    strong_critical_sequence,
    top_bid,
    top_descendant_holder,
    weak_critical_sets,
)
from fairdiffusion.verifier import oracle_strong_sequence, simple_paths

from .strategies import networks

PROPS = settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])

ALL_BUYERS = set("abcdefghijklmn")
V_B = set("befghjklmn")


def path_graph():
    net = Network.from_edges("s", {"x": 5, "y": 9}, [("s", "x"), ("x", "y")])
    profile = ActionProfile.truthful(net)
    return net, profile, build_effective_graph(net, profile)


class TestBuildEffectiveGraph:
    def test_truthful_fixture_reaches_everyone(self, fixture_graph):
        assert fixture_graph.participants == ALL_BUYERS

    def test_nil_report_cuts_off_descendants(self, fixture_net, fixture_profile):
        graph = build_effective_graph(fixture_net, fixture_profile.replace("b", None))
        assert graph.participants == {"a", "c", "d", "i"}
        assert not graph.participants & V_B

    def test_empty_market(self):
        net = Network.from_edges("s", {}, [])
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        assert graph.participants == frozenset()
        assert graph.edges() == set()

    def test_invented_edge_names_buyer(self, fixture_net, fixture_profile):
        bad = fixture_profile.replace("a", Report(Fraction(1), frozenset({"m"})))
        with pytest.raises(ProfileError, match="'a'"):
            build_effective_graph(fixture_net, bad)

    def test_depths_are_bfs_hops(self, fixture_graph):
        assert fixture_graph.depth["b"] == 1
        assert fixture_graph.depth["l"] == 4
        assert fixture_graph.depth["n"] == 6

    def test_either_side_report_creates_edge(self, fixture_net, fixture_profile):
        # j hides l, but l still lists j and both are reachable
        profile = fixture_profile.replace("j", Report(Fraction(5), frozenset({"f", "g"})))
        graph = build_effective_graph(fixture_net, profile)
        assert "l" in graph.adjacency["j"]

    def test_uninvited_buyer_stays_out(self, fixture_net, fixture_profile):
        profile = fixture_profile.replace("d", Report(Fraction(4), frozenset()))
        graph = build_effective_graph(fixture_net, profile)
        assert "i" not in graph.participants
        assert "d" in graph.participants

    @PROPS
    @given(networks())
    def test_edges_symmetric_and_depths_consistent(self, net):
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        for u, nbrs in graph.adjacency.items():
            for v in nbrs:
                assert u in graph.adjacency[v]
        nxg = nx.Graph(list(tuple(e) for e in graph.edges()))
        nxg.add_node(net.seller)
        expected = nx.single_source_shortest_path_length(nxg, net.seller)
        assert dict(graph.depth) == expected
        assert set(graph.participants) == set(expected) - {net.seller}


class TestDescendants:
    def test_fixture_b(self, fixture_graph):
        assert critical_descendants(fixture_graph, "b") == V_B

    def test_fixture_f(self, fixture_graph):
        assert critical_descendants(fixture_graph, "f") == {"f"}

    def test_single_buyer(self):
        net = Network.from_edges("s", {"x": 3}, [("s", "x")])
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        assert critical_descendants(graph, "x") == {"x"}

    def test_non_participant(self, fixture_net, fixture_profile):
        graph = build_effective_graph(fixture_net, fixture_profile.replace("b", None))
        with pytest.raises(NotAParticipant):
            critical_descendants(graph, "e")

    @PROPS
    @given(networks())
    def test_lowlink_descendants_equal_removal_test(self, net):
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        fast = all_critical_descendants(graph)
        assert fast == {n: critical_descendants(graph, n) for n in graph.participants}
        for n, members in fast.items():
            assert n in members


class TestRemovedSet:
    def test_remove_b(self, fixture_graph):
        assert removed_set(fixture_graph, {"b"}) == {"a", "c", "d", "i"}

    def test_remove_nothing(self, fixture_graph):
        assert removed_set(fixture_graph, set()) == fixture_graph.participants

    def test_remove_l_and_weak_segment(self, fixture_graph):
        k = {"l", "f", "g", "h", "j", "k"}
        assert removed_set(fixture_graph, k) == {"a", "b", "c", "d", "e", "i"}
        assert reachable_without(fixture_graph, k) == {"a", "b", "c", "d", "e", "i"}

    def test_joint_cut_differs_from_reachability(self, fixture_graph):
        # {f, g, h} is a minimal cut set of l: deleting all three strands j, k,
        # l, m, n, yet none of them is a descendant of any single member
        assert removed_set(fixture_graph, {"f", "g", "h"}) == ALL_BUYERS - {"f", "g", "h"}
        assert reachable_without(fixture_graph, {"f", "g", "h"}) == {"a", "b", "c", "d", "e", "i"}

    @PROPS
    @given(networks())
    def test_singletons_and_segments_agree_with_reachability(self, net):
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        for i in graph.participants:
            assert removed_set(graph, {i}) == graph.participants - critical_descendants(graph, i)
            assert removed_set(graph, {i}) == reachable_without(graph, {i})
        for target in graph.participants:
            cs = critical_structure(graph, target)
            for (upper, lower), weak in cs.weak_sets.items():
                k = {lower} | weak
                assert removed_set(graph, k) == reachable_without(graph, k)


class TestStrongSequence:
    def test_fixture_m(self, fixture_graph):
        assert strong_critical_sequence(fixture_graph, "m") == ["b", "l", "m"]

    def test_fixture_l(self, fixture_graph):
        assert strong_critical_sequence(fixture_graph, "l") == ["b", "l"]

    def test_path(self):
        _, _, graph = path_graph()
        assert strong_critical_sequence(graph, "y") == ["x", "y"]

    @PROPS
    @given(networks(max_buyers=12))
    def test_matches_single_removal_oracle(self, net):
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        for target in graph.participants:
            seq = strong_critical_sequence(graph, target)
            assert seq == oracle_strong_sequence(graph, target)
            depths = [graph.depth[c] for c in seq]
            assert depths == sorted(set(depths))

    @PROPS
    @given(networks())
    def test_sequence_order_on_every_simple_path(self, net):
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        for target in graph.participants:
            seq = strong_critical_sequence(graph, target)
            for path in simple_paths(graph, target):
                assert [n for n in path if n in seq] == seq


class TestWeakSets:
    def test_fixture_segments(self, fixture_graph):
        weak = weak_critical_sets(fixture_graph, ["b", "l", "m"])
        assert weak[("b", "l")] == {"h", "k", "g", "j", "f"}
        assert weak[("l", "m")] == frozenset()
        assert weak[("s", "b")] == frozenset()

    def test_path(self):
        _, _, graph = path_graph()
        assert weak_critical_sets(graph, ["x", "y"])[("x", "y")] == frozenset()

    def test_sorted_view_by_bid(self, fixture_graph, fixture_profile):
        weak = weak_critical_sets(fixture_graph, ["b", "l", "m"])[("b", "l")]
        ranked = sorted(weak, key=fixture_profile.bid, reverse=True)
        assert ranked == ["h", "k", "g", "j", "f"]

    @PROPS
    @given(networks())
    def test_structure_covers_exactly_the_simple_path_nodes(self, net):
        graph = build_effective_graph(net, ActionProfile.truthful(net))
        for target in graph.participants:
            cs = critical_structure(graph, target)
            on_paths = set()
            for path in simple_paths(graph, target):
                on_paths.update(path[1:])
            assert cs.critical_ancestors() == on_paths
            seen: set = set(cs.sequence)
            for members in cs.weak_sets.values():
                assert not members & seen
                seen |= members
            for members in cs.weak_sets.values():
                for w in members:
                    assert target in reachable_without(graph, {w})


class TestTopBid:
    def test_without_b(self, fixture_graph, fixture_profile):
        assert top_bid(fixture_graph, fixture_profile, removed_set(fixture_graph, {"b"})) == 7

    def test_without_l(self, fixture_graph, fixture_profile):
        assert top_bid(fixture_graph, fixture_profile, removed_set(fixture_graph, {"l"})) == 11

    def test_empty(self, fixture_graph, fixture_profile):
        assert top_bid(fixture_graph, fixture_profile, set()) is NEG_INF
        assert NEG_INF < Fraction(0)
        assert max([NEG_INF, Fraction(-5)]) == -5


class TestTopDescendantHolder:
    def test_weak_segment(self, fixture_graph, fixture_profile):
        weak = {"f", "g", "h", "j", "k"}
        scores = {n: top_bid(fixture_graph, fixture_profile, critical_descendants(fixture_graph, n)) for n in weak}
        assert scores == {"f": 4, "g": 6, "h": 11, "j": 5, "k": 10}
        assert top_descendant_holder(fixture_graph, fixture_profile, weak) == "h"

    def test_empty(self, fixture_graph, fixture_profile):
        assert top_descendant_holder(fixture_graph, fixture_profile, set()) is None

    def test_singleton(self, fixture_graph, fixture_profile):
        assert top_descendant_holder(fixture_graph, fixture_profile, {"e"}) == "e"

    def test_ties_go_to_lowest_id(self):
        net = Network.from_edges("s", {"x": 4, "y": 4}, [("s", "x"), ("s", "y")])
        profile = ActionProfile.truthful(net)
        graph = build_effective_graph(net, profile)
        assert top_descendant_holder(graph, profile, {"y", "x"}) == "x"

    def test_seeded_tie_break_is_reproducible(self):
        picks = [seeded_tie_break(3)(["a", "b", "c"]) for _ in range(2)]
        assert picks[0] == picks[1]

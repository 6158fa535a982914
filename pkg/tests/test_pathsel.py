import random
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from osdf.pathsel import (
    AlgorithmRegistry, NoPathError, PathError, UnknownAlgorithmError, build_path, path_via,
    select_path, shortest_path, validate_path,
)
from osdf.topo import gen_linear

from oracles import (
    adjacency, connected_graphs, graph_topology, random_connected_graph, simple_paths,
)


def policy(via=()):
    return SimpleNamespace(via=tuple(via))


def brute_best(t, src, dst, through=()):
    """Shortest simple path (then lexicographically smallest) visiting ``through`` in order."""
    adj = {d: [p for _, p, _ in t.neighbors(d)] for d in t.devices}

    def ordered(path):
        it = iter(path)
        return all(w in it for w in through)

    cands = [p for p in simple_paths(adj, src, dst) if ordered(p)]
    return min(cands, key=lambda p: (len(p), p))


def test_linear_shortest(linear5):
    assert shortest_path(linear5, "s1", "s5").devices == ["s1", "s2", "s3", "s4", "s5"]


def test_identity_path(linear5):
    p = shortest_path(linear5, "s3", "s3")
    assert p.devices == ["s3"] and p.hops[0].in_port is None


def test_three_region_a1_c2(three_region):
    p = shortest_path(three_region, "a1", "c2")
    assert p.devices == ["a1", "a2", "c1", "c2"] == brute_best(three_region, "a1", "c2")


def test_three_region_all_pairs_match_brute_force(three_region):
    for s in three_region.devices:
        for d in three_region.devices:
            assert shortest_path(three_region, s, d).devices == brute_best(three_region, s, d)


def test_ports_follow_links(three_region):
    p = shortest_path(three_region, "a1", "b2", src_port=1, dst_port=1)
    assert [(h.device, h.in_port, h.out_port) for h in p.hops] == [
        ("a1", 1, 2), ("a2", 2, 3), ("b1", 3, 2), ("b2", 2, 1)]
    r = p.reversed()
    assert [(h.device, h.in_port, h.out_port) for h in r.hops] == [
        ("b2", 1, 2), ("b1", 2, 3), ("a2", 3, 2), ("a1", 2, 1)]
    validate_path(three_region, r)


def test_via_on_line(linear5):
    assert path_via(linear5, "s1", "s5", ["s3"]).devices == shortest_path(
        linear5, "s1", "s5").devices


def test_via_b1(three_region):
    p = path_via(three_region, "a1", "c2", ["b1"])
    assert p.devices == ["a1", "a2", "b1", "b2", "c1", "c2"]
    assert p.devices == brute_best(three_region, "a1", "c2", ["b1"])
    assert not p.concatenated


def test_via_empty_is_shortest(three_region):
    assert path_via(three_region, "a1", "c2", []).devices == ["a1", "a2", "c1", "c2"]


def test_via_revisit_flagged(linear5):
    p = path_via(linear5, "s2", "s3", ["s1"])
    assert p.devices == ["s2", "s1", "s2", "s3"] and p.concatenated and p.loops


def test_disconnected():
    t = graph_topology(["x", "y"], [])
    with pytest.raises(NoPathError):
        shortest_path(t, "x", "y")


def test_select_path_dispatch(three_region):
    reg = AlgorithmRegistry()
    assert select_path(reg, three_region, policy(), "a1", "b2").devices == \
        shortest_path(three_region, "a1", "b2").devices
    p = select_path(reg, three_region, policy(["c1"]), "a1", "b2")
    assert "c1" in p.devices and p.algorithm == "via"
    with pytest.raises(UnknownAlgorithmError, match="widest"):
        select_path(reg, three_region, policy(), "a1", "b2", algorithm="widest")


def test_registered_algorithm(three_region):
    reg = AlgorithmRegistry()
    reg.register("scenic", lambda t, s, d: ["a1", "a2", "b1", "b2"])
    p = select_path(reg, three_region, policy(), "a1", "b2", algorithm="scenic")
    assert p.algorithm == "scenic" and p.devices == ["a1", "a2", "b1", "b2"]
    reg.register("broken", lambda t, s, d: ["a1", "b1"])
    with pytest.raises(PathError):
        select_path(reg, three_region, policy(), "a1", "b1", algorithm="broken")


def test_build_path_rejects_non_adjacent(three_region):
    with pytest.raises(PathError):
        build_path(three_region, ["a1", "b1"])


@pytest.mark.parametrize("n", range(1, 6))
def test_minimality_exhaustive_small(n):
    for nodes, edges in connected_graphs(n):
        t = graph_topology(nodes, edges)
        adj = adjacency(nodes, edges)
        for s in nodes:
            for d in nodes:
                best = min(simple_paths(adj, s, d), key=lambda p: (len(p), p))
                assert shortest_path(t, s, d).devices == best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.data())
def test_waypoints_in_order_and_determinism(seed, n, data):
    rng = random.Random(seed)
    nodes, edges = random_connected_graph(rng, n)
    t = graph_topology(nodes, edges)
    s, d = data.draw(st.sampled_from(nodes)), data.draw(st.sampled_from(nodes))
    ways = data.draw(st.lists(st.sampled_from(nodes), max_size=3))
    p = path_via(t, s, d, ways)
    stops = [x for i, x in enumerate([s, *ways, d]) if i == 0 or x != [s, *ways, d][i - 1]]
    it = iter(p.devices)
    assert all(w in it for w in stops)
    assert p.devices[0] == s and p.devices[-1] == d
    assert p == path_via(t, s, d, ways)
    validate_path(t, p)

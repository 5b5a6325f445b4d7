import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qncsim.graph import GraphError, NetworkGraph, generate_random_network, shortest_paths_to_gateway

from conftest import chain


def bellman_ford_to_gateway(g):
    dist = {g.gateway: 0}
    for _ in range(g.n_nodes):
        for e in g.edges:
            if e.head in dist and dist.get(e.tail, np.inf) > dist[e.head] + 1:
                dist[e.tail] = dist[e.head] + 1
    return dist


def test_rejects_invalid_graphs():
    with pytest.raises(GraphError):
        NetworkGraph.from_pairs(3, [(0, 0), (1, 0), (2, 0)], 0)
    with pytest.raises(GraphError):
        NetworkGraph.from_pairs(3, [(1, 3), (2, 0)], 0)
    with pytest.raises(GraphError):
        NetworkGraph.from_pairs(3, [(0, 1), (2, 1)], 0)  # gateway without in-edge
    with pytest.raises(GraphError):
        NetworkGraph.from_pairs(2, [(1, 0)], 0, capacity=0)


def test_routing_names_unreachable_node():
    g = NetworkGraph.from_pairs(3, [(1, 0), (0, 2)], 0)
    with pytest.raises(GraphError, match="node 2"):
        shortest_paths_to_gateway(g)


def test_two_node_exhaustion():
    g = generate_random_network(2, 2, seed=11)
    assert {(e.tail, e.head) for e in g.edges} == {(0, 1), (1, 0)}


def test_desk_scale_deployment_reaches_gateway():
    g = generate_random_network(100, 400, seed=7)
    assert g.nodes_reaching_gateway() == set(range(100))


def test_two_node_route():
    g = NetworkGraph.from_pairs(2, [(0, 1)], 1)
    routes = shortest_paths_to_gateway(g)
    assert routes.dist == {0: 1, 1: 0}
    assert routes.next_hop[0] == 0


def test_edge_budget_checked():
    with pytest.raises(GraphError):
        generate_random_network(4, 13, seed=0)
    with pytest.raises(GraphError):
        generate_random_network(4, 2, seed=0)  # cannot connect 3 sources with 2 edges


def test_random_network_is_reproducible_and_valid():
    a = generate_random_network(30, 90, seed=7)
    b = generate_random_network(30, 90, seed=7)
    assert a == b
    assert a.n_edges == 90
    assert len({(e.tail, e.head) for e in a.edges}) == 90
    assert a.nodes_reaching_gateway() == set(range(30))


def test_in_out_lists():
    g = chain(4)
    assert g.in_edges(1) == (1,)  # edge 1 is 2 -> 1
    assert g.out_edges(1) == (0,)
    assert g.gateway_edges == (0,)
    assert g.in_edges(3) == ()


def test_text_round_trip(tmp_path):
    g = generate_random_network(15, 40, capacity=2, seed=3)
    g.save(tmp_path / "g.txt")
    assert NetworkGraph.load(tmp_path / "g.txt") == g


def test_chain_routes():
    g = chain(5)
    routes = shortest_paths_to_gateway(g)
    assert routes.dist[4] == 4
    assert routes.path(g, 4) == [3, 2, 1, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 25), st.integers(0, 10_000))
def test_bfs_matches_bellman_ford(n, seed):
    edges = min(3 * n, n * (n - 1))
    g = generate_random_network(n, edges, seed=seed)
    routes = shortest_paths_to_gateway(g)
    ref = bellman_ford_to_gateway(g)
    for v in range(n):
        assert routes.dist[v] == ref[v]
        if v != g.gateway:
            e = g.edges[routes.next_hop[v]]
            assert e.tail == v and routes.dist[e.head] == routes.dist[v] - 1

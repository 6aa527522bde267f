"""Shared instance builders for the test suite."""

from __future__ import annotations

import numpy as np

import trafficeq as tq

BRAESS_NET = """\
nodes 4
origins 0
destinations 3
edge 0 1 1.0 10.0 0.15 4
edge 0 2 2.0 10.0 0.15 4
edge 1 3 2.0 10.0 0.15 4
edge 2 3 1.0 10.0 0.15 4
edge 1 2 0.5 10.0 0.15 4
"""
BRAESS_OD = "od 0 3 18.0\n"

# Two BPR routes 0 -> 1 with free times (1, 2); the slow route runs through
# a zero-cost midpoint because parallel arcs are rejected.
TWO_ROUTE_BPR_NET = """\
nodes 3
edge 0 1 1.0 10.0 0.15 4
edge 0 2 2.0 10.0 0.15 4
edge 2 1 0.0 1000.0 0.0 1
"""
TWO_ROUTE_BPR_OD = "od 0 1 10.0\n"

# Capacitated two-route instance: capacities (2, 10), free times (1, 2),
# demand 5. Cheapest feasible routing costs 2*1 + 3*2 = 8.
TWO_ROUTE_LP_NET = """\
nodes 3
edge 0 1 1.0 2.0 0.0 1
edge 0 2 2.0 10.0 0.0 1
edge 2 1 0.0 10.0 0.0 1
"""
TWO_ROUTE_LP_OD = "od 0 1 5.0\n"

SD_ORACLE_VALUE = 8.0


def braess(demand: float = 18.0):
    net = tq.parse_network(BRAESS_NET)
    dem = tq.parse_demands(f"od 0 3 {demand}\n", net)
    return net, dem


def two_route_bpr(demand: float = 10.0):
    net = tq.parse_network(TWO_ROUTE_BPR_NET)
    dem = tq.parse_demands(f"od 0 1 {demand}\n", net)
    return net, dem


def two_route_lp():
    net = tq.parse_network(TWO_ROUTE_LP_NET)
    dem = tq.parse_demands(TWO_ROUTE_LP_OD, net)
    return net, dem


def single_edge(t_bar=1.0, cap=10.0, gamma=0.0, power=1.0, demand=6.0):
    net = tq.Network.from_edges(2, [(0, 1, t_bar, cap, gamma, power)])
    dem = tq.DemandTable.from_entries([(0, 1, demand)])
    return net, dem


def random_network(
    rng: np.random.Generator,
    n_nodes: int = 8,
    extra_edges: int = 10,
    n_origins: int = 2,
    n_pairs: int = 5,
    integer_rates: bool = True,
):
    """Random strongly-usable instance: arborescence from node 0 plus extras,
    with demands drawn only between reachable pairs."""
    edges = []
    seen = set()
    for v in range(1, n_nodes):
        u = int(rng.integers(0, v))
        edges.append((u, v))
        seen.add((u, v))
    tries = 0
    while len(edges) < n_nodes - 1 + extra_edges and tries < 50 * extra_edges:
        tries += 1
        a, b = int(rng.integers(n_nodes)), int(rng.integers(n_nodes))
        if a == b or (a, b) in seen:
            continue
        seen.add((a, b))
        edges.append((a, b))
    rows = [
        (
            a,
            b,
            float(rng.uniform(0.5, 3.0)),
            float(rng.uniform(2.0, 20.0)),
            float(rng.uniform(0.05, 0.5)),
            float(rng.choice([2.0, 4.0])),
        )
        for (a, b) in edges
    ]
    net = tq.Network.from_edges(n_nodes, rows)

    entries = []
    used = set()
    per_origin = max(1, n_pairs // max(1, n_origins))
    for origin in range(min(n_origins, n_nodes)):
        tree = tq.dijkstra(net, net.free_time, origin)
        dests = [v for v in range(n_nodes) if v != origin and np.isfinite(tree.dist[v])]
        rng.shuffle(dests)
        for dest in dests[:per_origin]:
            if (origin, dest) in used:
                continue
            used.add((origin, dest))
            rate = float(rng.integers(1, 8)) if integer_rates else float(rng.uniform(0.5, 6.0))
            entries.append((origin, dest, rate))
    dem = tq.DemandTable.from_entries(entries)
    return net, dem


def random_tree_instance(rng: np.random.Generator, n_nodes: int = 10):
    """Random arborescence from node 0 with integer demands into random nodes."""
    edges = []
    for v in range(1, n_nodes):
        u = int(rng.integers(0, v))
        edges.append((u, v, float(rng.uniform(0.5, 2.0)), 10.0, 0.1, 2.0))
    net = tq.Network.from_edges(n_nodes, edges)
    dests = [v for v in range(1, n_nodes) if rng.random() < 0.7] or [n_nodes - 1]
    entries = [(0, d, float(rng.integers(1, 50))) for d in dests]
    dem = tq.DemandTable.from_entries(entries)
    return net, dem


def divergence(net: tq.Network, flows: np.ndarray) -> np.ndarray:
    """Per-node outflow minus inflow."""
    div = np.zeros(net.node_count)
    np.add.at(div, net.tails, flows)
    np.subtract.at(div, net.heads, flows)
    return div


def expected_divergence(net: tq.Network, dem: tq.DemandTable) -> np.ndarray:
    expect = np.zeros(net.node_count)
    for origin, dest, rate in dem.entries:
        expect[origin] += rate
        expect[dest] -= rate
    return expect


def path_flows_to_edges(net: tq.Network, paths, x) -> np.ndarray:
    flows = np.zeros(net.edge_count)
    for path, amount in zip(paths, x):
        for e in path:
            flows[e] += amount
    return flows

"""Shortest-path trees under nonnegative edge weights and demand-weighted flow loading."""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import inf, isfinite
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .exceptions import UnreachableError

if TYPE_CHECKING:
    from .network import DemandTable, Network


@dataclass(frozen=True)
class ShortestPathTree:
    """Single-source tree: distances, parent edges (-1 where absent), settle order."""

    source: int
    dist: np.ndarray
    parent_edge: np.ndarray
    order: tuple[int, ...]


def dijkstra(net: "Network", times: np.ndarray, source: int) -> ShortestPathTree:
    """Exact shortest distances from ``source`` under edge weights ``times``.

    Binary heap with lazy deletion. Tie-breaking is deterministic: when a
    relaxation ties the current label of an unsettled node, the smaller edge
    index becomes the parent; heap ties settle lower node ids first.
    """
    if not (0 <= source < net.node_count):
        raise ValueError(f"source {source} out of range")
    w = times.tolist() if isinstance(times, np.ndarray) else [float(t) for t in times]
    if len(w) != net.edge_count:
        raise ValueError(f"expected {net.edge_count} edge weights, got {len(w)}")
    if w and min(w) < 0.0:
        raise ValueError("negative edge weight")

    n = net.node_count
    dist = [inf] * n
    parent = [-1] * n
    settled = [False] * n
    order: list[int] = []
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    out_edges = net.out_edges
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        d, v = pop(heap)
        if settled[v]:
            continue
        settled[v] = True
        order.append(v)
        for head, e in out_edges[v]:
            nd = d + w[e]
            if nd < dist[head]:
                dist[head] = nd
                parent[head] = e
                push(heap, (nd, head))
            elif nd == dist[head] and not settled[head] and e < parent[head]:
                parent[head] = e
    return ShortestPathTree(
        source=source,
        dist=np.asarray(dist),
        parent_edge=np.asarray(parent, dtype=np.int64),
        order=tuple(order),
    )


def tree_path(net: "Network", tree: ShortestPathTree, dest: int) -> tuple[int, ...]:
    """Edge indices of the tree path from the source to ``dest``."""
    if not isfinite(tree.dist[dest]):
        raise UnreachableError(f"destination {dest} unreachable from origin {tree.source}")
    edges: list[int] = []
    v = dest
    parent = tree.parent_edge
    tails = net.tails
    while v != tree.source:
        e = int(parent[v])
        edges.append(e)
        v = int(tails[e])
    edges.reverse()
    return tuple(edges)


def aggregate_tree_flows(
    net: "Network",
    tree: ShortestPathTree,
    demands: Iterable[tuple[int, float]],
) -> np.ndarray:
    """Edge-flow contribution of one source, in one backward pass over the tree.

    Each tree edge carries the total demand of all destinations in its
    subtree; non-tree edges carry zero. O(n) after the tree is built.
    """
    weight = [0.0] * net.node_count
    for dest, rate in demands:
        if not isfinite(tree.dist[dest]):
            raise UnreachableError(
                f"destination {dest} unreachable from origin {tree.source}"
            )
        weight[dest] += rate
    flows = np.zeros(net.edge_count)
    parent = tree.parent_edge
    tails = net.tails
    source = tree.source
    # Reversed settle order visits every child before its parent.
    for v in reversed(tree.order):
        if v == source:
            continue
        wv = weight[v]
        if wv:
            e = int(parent[v])
            flows[e] = wv
            weight[int(tails[e])] += wv
    return flows


@dataclass(frozen=True)
class AonResult:
    """All-or-nothing assignment: loaded flows, its cost value, per-origin trees."""

    flows: np.ndarray
    value: float
    trees: dict[int, ShortestPathTree]


def _load_origin(net, times, origin, demands):
    tree = dijkstra(net, times, origin)
    flows = aggregate_tree_flows(net, tree, demands)
    value = sum(rate * float(tree.dist[dest]) for dest, rate in demands)
    return tree, flows, value


def all_or_nothing(
    net: "Network",
    times: np.ndarray,
    dem: "DemandTable",
    threads: int = 1,
) -> AonResult:
    """Route every pair's whole demand along one shortest path at fixed times.

    Per-origin work is independent; with ``threads > 1`` origins are processed
    by a thread pool and merged in ascending origin order, so the result does
    not depend on completion order.
    """
    origins = dem.origins
    if threads > 1 and len(origins) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partial = dict(
                zip(
                    origins,
                    pool.map(
                        lambda o: _load_origin(net, times, o, dem.by_origin[o]),
                        origins,
                    ),
                )
            )
    else:
        partial = {o: _load_origin(net, times, o, dem.by_origin[o]) for o in origins}

    flows = np.zeros(net.edge_count)
    value = 0.0
    trees: dict[int, ShortestPathTree] = {}
    for origin in origins:
        tree, part, val = partial[origin]
        flows += part
        value += val
        trees[origin] = tree
    return AonResult(flows=flows, value=value, trees=trees)


def aon_value(net: "Network", times: np.ndarray, dem: "DemandTable", threads: int = 1) -> float:
    """Demand-weighted sum of shortest-path distances at the given times."""
    return all_or_nothing(net, times, dem, threads=threads).value

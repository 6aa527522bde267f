"""Road-network and travel-demand data model with plain-text ingestion.

File formats (UTF-8 text, ``#`` starts a comment anywhere on a line):

network file::

    nodes <n>
    origins <id ...>          # optional; default: inferred from demands
    destinations <id ...>     # optional
    edge <tail> <head> <t_bar> <f_cap> <bpr_gamma> <bpr_power>

demand file::

    od <origin> <dest> <rate>

Node ids are contiguous integers from 0. Parallel edges (same tail and head)
are rejected; model them by splitting one arc with a zero-cost midpoint node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .exceptions import FormatError


@dataclass(frozen=True)
class Network:
    """Directed road network with per-edge BPR cost parameters.

    Edges are indexed by construction (file) order. ``origins`` and
    ``destinations`` hold the declared node sets, or None when the network
    file left them to be inferred from the demand table. Instances are
    immutable and safe to share across threads.
    """

    node_count: int
    tails: np.ndarray
    heads: np.ndarray
    free_time: np.ndarray
    capacity: np.ndarray
    bpr_gamma: np.ndarray
    bpr_power: np.ndarray
    origins: frozenset[int] | None
    destinations: frozenset[int] | None
    out_edges: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def edge_count(self) -> int:
        return int(self.tails.shape[0])

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Sequence[tuple[int, int, float, float, float, float]],
        origins: Iterable[int] | None = None,
        destinations: Iterable[int] | None = None,
    ) -> "Network":
        """Build and validate a network from (tail, head, t_bar, f_cap, gamma, power) rows."""
        if node_count <= 0:
            raise ValueError("node_count must be positive")
        tails = np.empty(len(edges), dtype=np.int64)
        heads = np.empty(len(edges), dtype=np.int64)
        free_time = np.empty(len(edges))
        capacity = np.empty(len(edges))
        gamma = np.empty(len(edges))
        power = np.empty(len(edges))
        seen: set[tuple[int, int]] = set()
        for e, (tail, head, t_bar, f_cap, g, p) in enumerate(edges):
            _check_edge(node_count, tail, head, t_bar, f_cap, g, p)
            if (tail, head) in seen:
                raise ValueError(f"duplicate edge {tail}->{head}")
            seen.add((tail, head))
            tails[e], heads[e] = tail, head
            free_time[e], capacity[e], gamma[e], power[e] = t_bar, f_cap, g, p
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(node_count)]
        for e in range(len(edges)):
            adjacency[int(tails[e])].append((int(heads[e]), e))
        for arr in (tails, heads, free_time, capacity, gamma, power):
            arr.setflags(write=False)
        return cls(
            node_count=node_count,
            tails=tails,
            heads=heads,
            free_time=free_time,
            capacity=capacity,
            bpr_gamma=gamma,
            bpr_power=power,
            origins=None if origins is None else frozenset(_check_ids(node_count, origins)),
            destinations=None if destinations is None else frozenset(_check_ids(node_count, destinations)),
            out_edges=tuple(tuple(adj) for adj in adjacency),
        )


def _check_edge(node_count, tail, head, t_bar, f_cap, gamma, power) -> None:
    if not (0 <= tail < node_count) or not (0 <= head < node_count):
        raise ValueError(f"unknown node id on edge {tail}->{head} (nodes: {node_count})")
    if tail == head:
        raise ValueError(f"self-loop edge {tail}->{head}")
    if not t_bar >= 0.0:
        raise ValueError(f"negative free time on edge {tail}->{head}")
    if not f_cap > 0.0:
        raise ValueError(f"nonpositive capacity on edge {tail}->{head}")
    if not gamma >= 0.0:
        raise ValueError(f"negative cost coefficient on edge {tail}->{head}")
    if not power >= 1.0:
        raise ValueError(f"cost power below 1 on edge {tail}->{head}")


def _check_ids(node_count: int, ids: Iterable[int]) -> list[int]:
    out = []
    for i in ids:
        if not (0 <= i < node_count):
            raise ValueError(f"unknown node id {i}")
        out.append(int(i))
    return out


@dataclass(frozen=True)
class DemandTable:
    """Origin-destination rates with precomputed totals.

    ``entries`` preserves file order. ``total`` is the sum of the per-origin
    totals taken in ascending origin order, so ``total == sum(origin_totals
    over origins)`` holds exactly in floating point.
    """

    entries: tuple[tuple[int, int, float], ...]
    origins: tuple[int, ...]
    total: float
    origin_totals: Mapping[int, float]
    by_origin: Mapping[int, tuple[tuple[int, float], ...]]

    @classmethod
    def from_entries(cls, entries: Sequence[tuple[int, int, float]]) -> "DemandTable":
        seen: set[tuple[int, int]] = set()
        grouped: dict[int, list[tuple[int, float]]] = {}
        for origin, dest, rate in entries:
            if origin == dest:
                raise ValueError(f"origin equals destination for pair {origin}->{dest}")
            if not rate > 0.0:
                raise ValueError(f"nonpositive rate for pair {origin}->{dest}")
            if (origin, dest) in seen:
                raise ValueError(f"duplicate pair {origin}->{dest}")
            seen.add((origin, dest))
            grouped.setdefault(int(origin), []).append((int(dest), float(rate)))
        origins = tuple(sorted(grouped))
        origin_totals = {i: sum(rate for _, rate in grouped[i]) for i in origins}
        total = sum(origin_totals[i] for i in origins)
        return cls(
            entries=tuple((int(o), int(d), float(r)) for o, d, r in entries),
            origins=origins,
            total=total,
            origin_totals=origin_totals,
            by_origin={i: tuple(grouped[i]) for i in origins},
        )

    @property
    def pair_count(self) -> int:
        return len(self.entries)

    def destination_set(self) -> frozenset[int]:
        return frozenset(d for _, d, _ in self.entries)


def _read_lines(source: str | IO[str]) -> list[str]:
    if hasattr(source, "read"):
        source = source.read()  # type: ignore[union-attr]
    return str(source).splitlines()


def _tokens(line: str) -> list[str]:
    return line.split("#", 1)[0].split()


def _parse_real(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"line {lineno}: bad {what} {token!r}") from None
    if not np.isfinite(value):
        raise FormatError(f"line {lineno}: non-finite {what} {token!r}")
    return value


def _parse_node(token: str, node_count: int, lineno: int) -> int:
    try:
        node = int(token)
    except ValueError:
        raise FormatError(f"line {lineno}: bad node id {token!r}") from None
    if not (0 <= node < node_count):
        raise FormatError(f"line {lineno}: unknown node id {node} (nodes: {node_count})")
    return node


def parse_network(source: str | IO[str]) -> Network:
    """Parse a network file; edge index equals position in the file."""
    node_count: int | None = None
    origins: list[int] | None = None
    destinations: list[int] | None = None
    edges: list[tuple[int, int, float, float, float, float]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(_read_lines(source), start=1):
        tok = _tokens(raw)
        if not tok:
            continue
        kind, args = tok[0], tok[1:]
        if kind == "nodes":
            if node_count is not None:
                raise FormatError(f"line {lineno}: repeated 'nodes' header")
            if len(args) != 1:
                raise FormatError(f"line {lineno}: 'nodes' expects one integer")
            try:
                node_count = int(args[0])
            except ValueError:
                raise FormatError(f"line {lineno}: bad node count {args[0]!r}") from None
            if node_count <= 0:
                raise FormatError(f"line {lineno}: node count must be positive")
        elif kind in ("origins", "destinations"):
            if node_count is None:
                raise FormatError(f"line {lineno}: '{kind}' before 'nodes' header")
            ids = [_parse_node(a, node_count, lineno) for a in args]
            if kind == "origins":
                if origins is not None:
                    raise FormatError(f"line {lineno}: repeated 'origins' line")
                origins = ids
            else:
                if destinations is not None:
                    raise FormatError(f"line {lineno}: repeated 'destinations' line")
                destinations = ids
        elif kind == "edge":
            if node_count is None:
                raise FormatError(f"line {lineno}: 'edge' before 'nodes' header")
            if len(args) != 6:
                raise FormatError(f"line {lineno}: 'edge' expects 6 fields, got {len(args)}")
            tail = _parse_node(args[0], node_count, lineno)
            head = _parse_node(args[1], node_count, lineno)
            t_bar = _parse_real(args[2], lineno, "free time")
            f_cap = _parse_real(args[3], lineno, "capacity")
            gamma = _parse_real(args[4], lineno, "cost coefficient")
            power = _parse_real(args[5], lineno, "cost power")
            try:
                _check_edge(node_count, tail, head, t_bar, f_cap, gamma, power)
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
            if (tail, head) in seen:
                raise FormatError(f"line {lineno}: duplicate edge {tail}->{head}")
            seen.add((tail, head))
            edges.append((tail, head, t_bar, f_cap, gamma, power))
        else:
            raise FormatError(f"line {lineno}: unknown directive {kind!r}")
    if node_count is None:
        raise FormatError("missing 'nodes' header")
    return Network.from_edges(node_count, edges, origins, destinations)


def serialize_network(net: Network) -> str:
    """Render a network back to its file format, round-tripping every value."""
    lines = [f"nodes {net.node_count}"]
    if net.origins is not None:
        lines.append("origins " + " ".join(str(i) for i in sorted(net.origins)))
    if net.destinations is not None:
        lines.append("destinations " + " ".join(str(i) for i in sorted(net.destinations)))
    for e in range(net.edge_count):
        lines.append(
            "edge {} {} {} {} {} {}".format(
                int(net.tails[e]),
                int(net.heads[e]),
                repr(float(net.free_time[e])),
                repr(float(net.capacity[e])),
                repr(float(net.bpr_gamma[e])),
                repr(float(net.bpr_power[e])),
            )
        )
    return "\n".join(lines) + "\n"


def parse_demands(source: str | IO[str], net: Network | None = None) -> DemandTable:
    """Parse a demand file.

    When ``net`` is given, node ids are range-checked against it and, if the
    network declares origin/destination sets, membership is enforced.
    """
    entries: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(_read_lines(source), start=1):
        tok = _tokens(raw)
        if not tok:
            continue
        if tok[0] != "od":
            raise FormatError(f"line {lineno}: unknown directive {tok[0]!r}")
        if len(tok) != 4:
            raise FormatError(f"line {lineno}: 'od' expects 3 fields, got {len(tok) - 1}")
        if net is not None:
            origin = _parse_node(tok[1], net.node_count, lineno)
            dest = _parse_node(tok[2], net.node_count, lineno)
        else:
            try:
                origin, dest = int(tok[1]), int(tok[2])
            except ValueError:
                raise FormatError(f"line {lineno}: bad node id") from None
            if origin < 0 or dest < 0:
                raise FormatError(f"line {lineno}: negative node id")
        rate = _parse_real(tok[3], lineno, "rate")
        if rate <= 0.0:
            raise FormatError(f"line {lineno}: nonpositive rate {rate}")
        if origin == dest:
            raise FormatError(f"line {lineno}: origin equals destination ({origin})")
        if (origin, dest) in seen:
            raise FormatError(f"line {lineno}: duplicate pair {origin}->{dest}")
        seen.add((origin, dest))
        if net is not None:
            if net.origins is not None and origin not in net.origins:
                raise FormatError(f"line {lineno}: node {origin} not in declared origins")
            if net.destinations is not None and dest not in net.destinations:
                raise FormatError(f"line {lineno}: node {dest} not in declared destinations")
        entries.append((origin, dest, rate))
    return DemandTable.from_entries(entries)


@dataclass
class Diagnostics:
    """Outcome of :func:`validate`: overall verdict plus message lists."""

    passed: bool
    errors: list[str]
    warnings: list[str]

    def messages(self) -> list[str]:
        return [f"error: {m}" for m in self.errors] + [f"warning: {m}" for m in self.warnings]


def validate(net: Network, dem: DemandTable) -> Diagnostics:
    """Check a network/demand pair: reachability is fatal, isolation a warning."""
    from .shortest_paths import dijkstra

    errors: list[str] = []
    warnings: list[str] = []

    touched = np.zeros(net.node_count, dtype=bool)
    touched[net.tails] = True
    touched[net.heads] = True
    for node in np.flatnonzero(~touched):
        warnings.append(f"node {int(node)} has no incident edges")

    if net.origins is not None:
        for origin in dem.origins:
            if origin not in net.origins:
                errors.append(f"demand origin {origin} not in declared origins")
    if net.destinations is not None:
        for dest in sorted(dem.destination_set()):
            if dest not in net.destinations:
                errors.append(f"demand destination {dest} not in declared destinations")

    for origin in dem.origins:
        tree = dijkstra(net, net.free_time, origin)
        for dest, _ in dem.by_origin[origin]:
            if not np.isfinite(tree.dist[dest]):
                errors.append(f"destination {dest} unreachable from origin {origin}")

    return Diagnostics(passed=not errors, errors=errors, warnings=warnings)

"""Directed network model, random deployments and hop-count routing.

Node ids are ``0..n-1`` and edge ids are ``0..|E|-1``; an edge's id is its
position in :attr:`NetworkGraph.edges`.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_DEPLOYMENT_ATTEMPTS = 100


class GraphError(ValueError):
    """Raised for malformed graphs and unroutable deployments."""


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int
    capacity: int = 1


@dataclass(frozen=True)
class NetworkGraph:
    n_nodes: int
    edges: tuple[Edge, ...]
    gateway: int
    _in: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _out: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_nodes
        if n < 1:
            raise GraphError("a network needs at least one node")
        if not 0 <= self.gateway < n:
            raise GraphError(f"gateway {self.gateway} is not a node id")
        ins = [[] for _ in range(n)]
        outs = [[] for _ in range(n)]
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise GraphError(f"edge at position {i} has id {e.id}")
            if not (0 <= e.tail < n and 0 <= e.head < n):
                raise GraphError(f"edge {e.id} has an endpoint outside 0..{n - 1}")
            if e.tail == e.head:
                raise GraphError(f"edge {e.id} is a self-loop on node {e.tail}")
            if int(e.capacity) != e.capacity or e.capacity < 1:
                raise GraphError(f"edge {e.id} capacity must be a positive integer")
            outs[e.tail].append(i)
            ins[e.head].append(i)
        if n > 1 and not ins[self.gateway]:
            raise GraphError(f"gateway {self.gateway} has no incoming edge")
        object.__setattr__(self, "_in", tuple(map(tuple, ins)))
        object.__setattr__(self, "_out", tuple(map(tuple, outs)))

    @classmethod
    def from_pairs(cls, n_nodes, pairs, gateway, capacity=1):
        """Build a graph from ``(tail, head)`` pairs; edge ids follow list order."""
        edges = tuple(Edge(i, int(a), int(b), capacity) for i, (a, b) in enumerate(pairs))
        return cls(n_nodes, edges, gateway)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def in_edges(self, v: int) -> tuple[int, ...]:
        return self._in[v]

    def out_edges(self, v: int) -> tuple[int, ...]:
        return self._out[v]

    @property
    def gateway_edges(self) -> tuple[int, ...]:
        """Incoming edges of the gateway, in increasing id order."""
        return self._in[self.gateway]

    @property
    def tails(self) -> np.ndarray:
        return np.array([e.tail for e in self.edges], dtype=int)

    @property
    def heads(self) -> np.ndarray:
        return np.array([e.head for e in self.edges], dtype=int)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([e.capacity for e in self.edges], dtype=int)

    def nodes_reaching_gateway(self) -> set[int]:
        """Nodes with a directed path to the gateway (BFS on reversed edges)."""
        seen = {self.gateway}
        queue = deque([self.gateway])
        while queue:
            v = queue.popleft()
            for e in self._in[v]:
                u = self.edges[e].tail
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return seen

    # -- plain-text edge list -------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.n_nodes} {self.n_edges} {self.gateway}"]
        lines += [f"{e.id} {e.tail} {e.head} {e.capacity}" for e in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NetworkGraph":
        rows = [ln.split() for ln in io.StringIO(text) if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise GraphError("empty edge list")
        n, m, gateway = (int(v) for v in rows[0])
        if len(rows) - 1 != m:
            raise GraphError(f"header announces {m} edges, found {len(rows) - 1}")
        edges = tuple(Edge(*(int(v) for v in r)) for r in rows[1:])
        return cls(n, edges, gateway)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "NetworkGraph":
        return cls.from_text(Path(path).read_text())


def generate_random_network(n_nodes, n_edges, capacity=1, seed=None) -> NetworkGraph:
    """Random simple digraph with a uniformly chosen gateway.

    Edges are ``n_edges`` distinct ordered pairs drawn uniformly without
    replacement. Deployments in which some node cannot reach the gateway are
    redrawn, up to ``MAX_DEPLOYMENT_ATTEMPTS`` times.
    """
    if n_nodes < 2:
        raise GraphError("need at least 2 nodes")
    max_edges = n_nodes * (n_nodes - 1)
    if not 0 < n_edges <= max_edges:
        raise GraphError(f"n_edges must be in 1..{max_edges} for {n_nodes} nodes, got {n_edges}")
    rng = np.random.default_rng(seed)
    worst = None
    for _ in range(MAX_DEPLOYMENT_ATTEMPTS):
        # ordered pair index p -> (p // (n-1), skip-diagonal column)
        picks = np.sort(rng.choice(max_edges, size=n_edges, replace=False))
        tails = picks // (n_nodes - 1)
        heads = picks % (n_nodes - 1)
        heads = heads + (heads >= tails)
        gateway = int(rng.integers(n_nodes))
        if not np.any(heads == gateway):
            continue
        g = NetworkGraph.from_pairs(n_nodes, zip(tails, heads), gateway, capacity)
        missing = n_nodes - len(g.nodes_reaching_gateway())
        if missing == 0:
            return g
        worst = missing if worst is None else min(worst, missing)
    raise GraphError(
        f"no connected deployment of {n_nodes} nodes / {n_edges} edges in "
        f"{MAX_DEPLOYMENT_ATTEMPTS} attempts (best attempt left {worst} nodes unable to reach the gateway)"
    )


@dataclass(frozen=True)
class RoutingTable:
    next_hop: dict[int, int]
    dist: dict[int, int]

    def path(self, g: NetworkGraph, v: int) -> list[int]:
        """Edge ids from ``v`` to the gateway."""
        hops = []
        while v != g.gateway:
            e = self.next_hop[v]
            hops.append(e)
            v = g.edges[e].head
        return hops


def shortest_paths_to_gateway(g: NetworkGraph) -> RoutingTable:
    """Hop-count shortest paths from every node to the gateway.

    All edges have unit weight, so Dijkstra reduces to a breadth-first search
    over reversed edges. Among equally short options a node uses its
    smallest-id outgoing edge.
    """
    dist = {g.gateway: 0}
    queue = deque([g.gateway])
    while queue:
        v = queue.popleft()
        for e in g.in_edges(v):
            u = g.edges[e].tail
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    unreachable = sorted(set(range(g.n_nodes)) - dist.keys())
    if unreachable:
        raise GraphError(f"node {unreachable[0]} has no path to gateway {g.gateway}"
                         + (f" ({len(unreachable)} such nodes)" if len(unreachable) > 1 else ""))
    next_hop = {}
    for v in range(g.n_nodes):
        if v == g.gateway:
            continue
        next_hop[v] = min(e for e in g.out_edges(v) if dist[g.edges[e].head] == dist[v] - 1)
    return RoutingTable(next_hop, dist)

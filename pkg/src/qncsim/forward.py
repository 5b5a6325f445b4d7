"""Shortest-path store-and-forward baseline.

Every node quantizes its own message once and sends it as one packet along
its routing-table path. Per timestep a node pushes at most one queued packet
over its next-hop edge (one L-bit payload per edge per timestep); packets
that arrive during timestep ``tau`` can leave at ``tau + 1``. Queues are FIFO
with ties broken by origin node id. Relays never re-quantize.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import GraphError, NetworkGraph, RoutingTable
from .qnc import quantizer_for_edge


@dataclass(frozen=True)
class ForwardingRun:
    arrival: np.ndarray  # timestep at which node v's packet reaches the gateway
    x_hat: np.ndarray
    L: int
    bits: int

    @property
    def timesteps(self) -> int:
        return int(self.arrival.max())

    @property
    def total_delay(self) -> int:
        """Channel uses until the last delivery."""
        return self.L * self.timesteps


def forwarding_schedule(g: NetworkGraph, routes: RoutingTable) -> np.ndarray:
    """Arrival timestep of each node's packet at the gateway (0 for the
    gateway itself)."""
    n = g.n_nodes
    missing = [v for v in range(n) if v != g.gateway and v not in routes.next_hop]
    if missing:
        raise GraphError(f"node {missing[0]} has no route to the gateway")
    arrival = np.full(n, -1, dtype=int)
    arrival[g.gateway] = 0
    queues = {v: deque([v]) for v in range(n) if v != g.gateway}
    pending = n - 1
    tau = 0
    while pending:
        tau += 1
        if tau > n * n:
            raise RuntimeError("forwarding did not terminate; routing table is inconsistent")
        moved = []
        for v in sorted(queues):
            if queues[v]:
                moved.append((g.edges[routes.next_hop[v]].head, queues[v].popleft()))
        # arrivals of this timestep join queues after all departures
        for head, origin in sorted(moved, key=lambda hm: hm[1]):
            if head == g.gateway:
                arrival[origin] = tau
                pending -= 1
            else:
                queues[head].append(origin)
    return arrival


def simulate_forwarding(g: NetworkGraph, routes: RoutingTable, x, L, q_max, arrival=None) -> ForwardingRun:
    """Deliver every message, source-quantized with ``L * C_min`` bits.

    ``C_min`` is the smallest edge capacity so the payload fits every hop.
    ``arrival`` may be supplied from :func:`forwarding_schedule` since it
    does not depend on ``x`` or ``L``.
    """
    c_min = int(g.capacities.min())
    q = quantizer_for_edge(L, c_min, q_max)
    if arrival is None:
        arrival = forwarding_schedule(g, routes)
    return ForwardingRun(np.asarray(arrival), q(np.asarray(x, float)), int(L), q.bits)

"""Bus graph utilities: hop distance, vicinity sets, counter-intuitive cases."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .measurements import MeasurementMatrix, normalize

UNREACHABLE = math.inf


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph of buses (vertices) and lines (edges)."""

    buses: frozenset
    lines: frozenset

    def __init__(self, buses=(), lines=()):
        bus_list = [int(b) for b in buses]
        if len(set(bus_list)) != len(bus_list):
            raise TopologyError("duplicate bus id")
        bus_set = set(bus_list)
        edges = set()
        for a, b in lines:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"self-loop at bus {a}")
            bus_set.update((a, b))
            edges.add(frozenset((a, b)))
        object.__setattr__(self, "buses", frozenset(bus_set))
        object.__setattr__(self, "lines", frozenset(edges))
        adj = {b: set() for b in bus_set}
        for e in edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        object.__setattr__(self, "_adj", {b: tuple(sorted(n)) for b, n in adj.items()})

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        return cls(doc.get("buses", ()), [tuple(e) for e in doc.get("lines", ())])

    def to_dict(self) -> dict:
        return {"buses": sorted(self.buses),
                "lines": sorted(sorted(e) for e in self.lines)}

    def neighbors(self, bus: int) -> tuple:
        self._require(bus)
        return self._adj[bus]

    def _require(self, bus):
        if bus not in self.buses:
            raise TopologyError(f"unknown bus id {bus}")

    def distances_from(self, source: int) -> dict:
        """Breadth-first hop counts from ``source`` to every reachable bus."""
        self._require(source)
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist


def graph_distance(topo: Topology, i: int, j: int):
    """Number of lines on a shortest ``i``-``j`` path; ``math.inf`` if disconnected."""
    topo._require(j)
    return topo.distances_from(i).get(j, UNREACHABLE)


def vicinity_set(topo: Topology, source: int, n0: int) -> frozenset:
    """Buses within ``n0`` hops of ``source`` (``{source}`` when ``n0 == 0``)."""
    if n0 < 0:
        raise TopologyError(f"n0 must be nonnegative, got {n0}")
    return frozenset(b for b, d in topo.distances_from(source).items() if d <= n0)


def argmax_entry(M) -> tuple:
    """Row and column of the largest ``|entry|``; ties go to the smallest row, then column."""
    M = np.abs(np.asarray(M))
    flat = int(np.argmax(M))
    return divmod(flat, M.shape[1])


def is_counter_intuitive(Yn: MeasurementMatrix, topo: Topology, source_bus: int, n0: int = 0) -> bool:
    """True when the loudest normalized entry sits outside the source's vicinity.

    ``Yn`` is normalized first if it is a raw measurement matrix.
    """
    if not hasattr(Yn, "scale_factors"):
        Yn = normalize(Yn)
    p, _ = argmax_entry(Yn.data)
    bus = Yn.channels[p].bus_id
    topo._require(bus)
    return bus not in vicinity_set(topo, source_bus, n0)

"""Road network model.

A network is a directed graph of nodes and links.  Links carry the
parameters of a BPR-style volume-delay function; travel times are
quantized to whole simulation steps so the engine stays integer-clocked.
The module also provides deterministic shortest-path routing and the
length-based graph distance used as the spatial coordinate of
information-propagation kernels.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .errors import NetworkFormatError, UnreachableError, ValidationError

# Absorbs float noise before ceiling, so e.g. 20 * 1.15 quantizes to 23
# regardless of which side of the integer the product lands on.
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class Node:
    """A junction, identified by a unique integer id."""

    id: int


@dataclass(frozen=True)
class Link:
    """Directed road segment with volume-delay parameters.

    length is in distance units, t0 (free-flow travel time) in simulation
    steps, capacity in vehicles per step.  alpha and beta shape the
    congestion response: t = t0 * (1 + alpha * (volume/capacity)**beta).
    """

    id: int
    from_node: int
    to_node: int
    length: float
    t0: float
    capacity: float
    alpha: float = 0.15
    beta: float = 4.0

    def __post_init__(self):
        if self.length <= 0:
            raise ValidationError(f"link {self.id}: length must be > 0")
        if self.t0 <= 0:
            raise ValidationError(f"link {self.id}: t0 must be > 0")
        if self.capacity <= 0:
            raise ValidationError(f"link {self.id}: capacity must be > 0")
        if self.alpha < 0:
            raise ValidationError(f"link {self.id}: alpha must be >= 0")
        if self.beta < 1:
            raise ValidationError(f"link {self.id}: beta must be >= 1")


@dataclass(frozen=True)
class DemandEntry:
    """Travel demand between one OD pair.

    rate is the expected departures per step; guided_fraction the share of
    travelers receiving guidance (market penetration); window the
    half-open [start, end) interval of steps during which demand flows.
    """

    origin: int
    dest: int
    rate: float
    guided_fraction: float = 1.0
    window: tuple[int, int] = (0, 2**31)

    def __post_init__(self):
        if self.origin == self.dest:
            raise ValidationError("demand: origin must differ from dest")
        if self.rate < 0:
            raise ValidationError("demand: rate must be >= 0")
        if not 0.0 <= self.guided_fraction <= 1.0:
            raise ValidationError("demand: guided_fraction must be in [0,1]")
        if self.window[0] > self.window[1]:
            raise ValidationError("demand: window start must be <= end")


@dataclass
class Network:
    """Immutable-after-construction directed graph.

    Safe to share read-only across concurrent runs; the distance cache is
    filled lazily but never invalidated.
    """

    nodes: dict[int, Node]
    links: dict[int, Link]
    _adjacency: dict[int, list[Link]] = field(init=False, repr=False)
    _dist_cache: dict[int, dict[int, float]] = field(
        init=False, repr=False, default_factory=dict
    )

    def __post_init__(self):
        if not self.nodes:
            raise ValidationError("network must contain at least one node")
        adjacency: dict[int, list[Link]] = {nid: [] for nid in self.nodes}
        for link in self.links.values():
            if link.from_node not in self.nodes:
                raise ValidationError(
                    f"link {link.id}: from_node {link.from_node} not in network"
                )
            if link.to_node not in self.nodes:
                raise ValidationError(
                    f"link {link.id}: to_node {link.to_node} not in network"
                )
            if link.from_node == link.to_node:
                raise ValidationError(f"link {link.id}: self-loops are not allowed")
            adjacency[link.from_node].append(link)
        for out in adjacency.values():
            out.sort(key=lambda l: l.id)
        self._adjacency = adjacency

    def outgoing(self, node_id: int) -> list[Link]:
        return self._adjacency[node_id]

    def free_flow_costs(self) -> dict[int, int]:
        """Per-link travel time at zero volume, in whole steps."""
        return {lid: link_travel_time(link, 0) for lid, link in self.links.items()}

    def diameter(self) -> float:
        """Largest finite graph distance over ordered node pairs."""
        best = 0.0
        for a in self.nodes:
            for b in self.nodes:
                d = graph_distance(self, a, b)
                if d != math.inf and d > best:
                    best = d
        return best


def load_network(text: str) -> Network:
    """Parse a network from CSV text.

    Required header: ``link_id,from_node,to_node,length,t0,capacity,alpha,beta``.
    Nodes are implied by link endpoints; isolated nodes may be listed one id
    per line after a ``#nodes`` marker line.
    """
    header = "link_id,from_node,to_node,length,t0,capacity,alpha,beta"
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("//")]
    if not lines or lines[0].replace(" ", "") != header:
        raise NetworkFormatError(f"first line must be the header '{header}'")

    links: dict[int, Link] = {}
    nodes: dict[int, Node] = {}
    in_nodes_section = False
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "#nodes":
            in_nodes_section = True
            continue
        if raw.startswith("#"):
            continue
        if in_nodes_section:
            try:
                nid = int(raw)
            except ValueError:
                raise NetworkFormatError(f"line {lineno}: bad node id {raw!r}")
            nodes[nid] = Node(nid)
            continue
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 8:
            raise NetworkFormatError(
                f"line {lineno}: expected 8 fields, got {len(parts)}"
            )
        try:
            lid = int(parts[0])
            from_node = int(parts[1])
            to_node = int(parts[2])
            numeric = [float(p) for p in parts[3:]]
        except ValueError as exc:
            raise NetworkFormatError(f"line {lineno}: {exc}") from exc
        if lid in links:
            raise ValidationError(f"line {lineno}: duplicate link id {lid}")
        links[lid] = Link(lid, from_node, to_node, *numeric)
        nodes.setdefault(from_node, Node(from_node))
        nodes.setdefault(to_node, Node(to_node))
    return Network(nodes=nodes, links=links)


def link_travel_time(link: Link, volume: float) -> int:
    """Volume-dependent travel time, rounded up to whole steps (min 1)."""
    if volume < 0:
        raise ValidationError("volume must be >= 0")
    raw = link.t0 * (1.0 + link.alpha * (volume / link.capacity) ** link.beta)
    return max(1, math.ceil(raw - _CEIL_EPS))


def shortest_path(
    net: Network,
    costs: dict[int, float],
    origin: int,
    dest: int,
    exclude_link: int | None = None,
) -> list[int]:
    """Minimum-cost link sequence from origin to dest under the given costs.

    Ties are broken deterministically in favour of the lexicographically
    smallest link-id sequence.  ``exclude_link`` removes one link from
    consideration (used for best-alternative queries).
    """
    if origin not in net.nodes:
        raise ValidationError(f"unknown origin node {origin}")
    if dest not in net.nodes:
        raise ValidationError(f"unknown destination node {dest}")
    if origin == dest:
        return []
    settled: set[int] = set()
    heap: list[tuple[float, tuple[int, ...], int]] = [(0.0, (), origin)]
    while heap:
        cost, path, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == dest:
            return list(path)
        for link in net.outgoing(node):
            if link.id == exclude_link or link.to_node in settled:
                continue
            step_cost = costs[link.id]
            if step_cost < 0:
                raise ValidationError(f"negative cost on link {link.id}")
            heapq.heappush(heap, (cost + step_cost, path + (link.id,), link.to_node))
    raise UnreachableError(f"no path from node {origin} to node {dest}")


def _length_distances(net: Network, source: int) -> dict[int, float]:
    """Shortest-path length (sum of link lengths) from source to all nodes."""
    cached = net._dist_cache.get(source)
    if cached is not None:
        return cached
    dist: dict[int, float] = {}
    heap: list[tuple[float, int]] = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if node in dist:
            continue
        dist[node] = d
        for link in net.outgoing(node):
            if link.to_node not in dist:
                heapq.heappush(heap, (d + link.length, link.to_node))
    net._dist_cache[source] = dist
    return dist


def graph_distance(net: Network, origin_node: int, position: int) -> float:
    """Spatial separation between an information origin and an observer.

    Directed shortest-path length from origin_node to position; falls back
    to the reverse direction when unreachable, and to +inf when the nodes
    are mutually unreachable.
    """
    if origin_node not in net.nodes:
        raise ValidationError(f"unknown node {origin_node}")
    if position not in net.nodes:
        raise ValidationError(f"unknown node {position}")
    if origin_node == position:
        return 0.0
    d = _length_distances(net, origin_node).get(position)
    if d is not None:
        return d
    d = _length_distances(net, position).get(origin_node)
    if d is not None:
        return d
    return math.inf

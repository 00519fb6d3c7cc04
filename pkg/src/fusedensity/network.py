"""Geometric-network data model and the depth-first line embedding.

A geometric network is a connected graph whose edges carry positive lengths
and are identified with real intervals.  Each edge has a fixed orientation:
endpoint ``u`` sits at offset 0 and endpoint ``v`` at offset ``length``.
Points on the network are (edge, offset) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    DanglingEndpoint,
    DisconnectedNetwork,
    NetworkMismatch,
    NonpositiveLength,
)

__all__ = [
    "Edge",
    "GeometricNetwork",
    "NetworkPoint",
    "EmbeddingSpan",
    "Embedding",
    "validate",
    "total_length",
    "dfs_embed",
    "embed_point",
    "embed_function",
]


@dataclass(frozen=True)
class Edge:
    """One edge: an interval of a given length glued between two nodes."""

    id: str
    u: str
    v: str
    length: float


@dataclass(frozen=True)
class NetworkPoint:
    """A point on a network, as an offset along an oriented edge."""

    edge: str
    offset: float


@dataclass(frozen=True, eq=False)
class GeometricNetwork:
    """Immutable node/edge structure with helper indexes.

    The constructor only enforces what indexing requires (unique ids);
    the mathematical invariants (positive lengths, existing endpoints,
    connectivity) are checked by :func:`validate`, so that invalid
    networks can be constructed and then rejected with a precise error.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    _edge_map: dict = field(repr=False, compare=False, default=None)
    _incidence: dict = field(repr=False, compare=False, default=None)

    def __init__(self, nodes, edges):
        node_tuple = tuple(sorted(str(n) for n in nodes))
        if len(set(node_tuple)) != len(node_tuple):
            raise ValueError("duplicate node ids")
        edge_tuple = []
        for e in edges:
            if isinstance(e, Edge):
                edge_tuple.append(Edge(str(e.id), str(e.u), str(e.v), float(e.length)))
            else:
                eid, u, v, length = e
                edge_tuple.append(Edge(str(eid), str(u), str(v), float(length)))
        edge_tuple = tuple(edge_tuple)
        if len({e.id for e in edge_tuple}) != len(edge_tuple):
            raise ValueError("duplicate edge ids")
        object.__setattr__(self, "nodes", node_tuple)
        object.__setattr__(self, "edges", edge_tuple)
        object.__setattr__(self, "_edge_map", {e.id: e for e in edge_tuple})
        node_set = set(node_tuple)
        incidence = {n: [] for n in node_tuple}
        for e in edge_tuple:
            if e.u in node_set:
                incidence[e.u].append((e.id, "u"))
            if e.v in node_set:
                incidence[e.v].append((e.id, "v"))
        object.__setattr__(
            self, "_incidence", {n: tuple(sorted(ends)) for n, ends in incidence.items()}
        )

    def edge(self, edge_id: str) -> Edge:
        try:
            return self._edge_map[edge_id]
        except KeyError:
            raise NetworkMismatch(f"no edge {edge_id!r} in this network") from None

    def has_edge(self, edge_id: str) -> bool:
        return edge_id in self._edge_map

    def incident_ends(self, node: str) -> tuple[tuple[str, str], ...]:
        """(edge id, end flag) pairs at a node, sorted; self-loops appear twice."""
        return self._incidence[node]

    def degree(self, node: str) -> int:
        """Number of edge ends meeting at the node (a self-loop counts twice)."""
        return len(self._incidence[node])

    def __eq__(self, other):
        if not isinstance(other, GeometricNetwork):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return hash((self.nodes, self.edges))


def validate(network: GeometricNetwork) -> None:
    """Check all structural invariants, raising on the first failure.

    Raises
    ------
    NonpositiveLength
        If an edge length is not finite and strictly positive.
    DanglingEndpoint
        If an edge endpoint is not a declared node.
    DisconnectedNetwork
        If the network has more than one component.
    """
    node_set = set(network.nodes)
    for e in network.edges:
        if not math.isfinite(e.length) or e.length <= 0.0:
            raise NonpositiveLength(f"edge {e.id!r} has length {e.length!r}")
        for endpoint in (e.u, e.v):
            if endpoint not in node_set:
                raise DanglingEndpoint(f"edge {e.id!r} references unknown node {endpoint!r}")
    if len(network.nodes) > 1:
        seen = {network.nodes[0]}
        stack = [network.nodes[0]]
        while stack:
            node = stack.pop()
            for eid, end in network.incident_ends(node):
                e = network.edge(eid)
                other = e.v if end == "u" else e.u
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        missing = node_set - seen
        if missing:
            raise DisconnectedNetwork(
                f"nodes {sorted(missing)} are not reachable from {network.nodes[0]!r}"
            )


def total_length(network: GeometricNetwork) -> float:
    """Sum of all edge lengths (the total base measure)."""
    return float(sum(e.length for e in network.edges))


@dataclass(frozen=True)
class EmbeddingSpan:
    """One edge interval placed on the real line."""

    edge: str
    reverse: bool
    start: float


@dataclass(frozen=True)
class Embedding:
    """A measure-preserving traversal of a network laid out on [0, total]."""

    network: GeometricNetwork
    spans: tuple[EmbeddingSpan, ...]
    total: float


def dfs_embed(network: GeometricNetwork) -> Embedding:
    """Lay every edge interval on the real line by depth-first traversal.

    The network is expanded so that each edge becomes an open interval
    between two per-end "limit" markers, each attached by a zero-length
    link to its node.  A limit marker has exactly two neighbours, so a
    depth-first walk of the expansion crosses every interval exactly once.
    The walk is deterministic: it roots at the lowest node id and explores
    a node's attachments in ascending (edge id, end) order.

    The univariate image of a function under this layout has total
    variation at most twice the network total variation, while integrals
    and Hellinger distances are preserved exactly.
    """
    validate(network)
    if not network.edges:
        raise DisconnectedNetwork("cannot embed a network with no edges")

    # Expanded-graph vertices: ("val", node) and ("lim", edge, end).
    root = ("val", network.nodes[0])
    visited = {root}
    spans = []
    pos = 0.0

    def neighbors(vertex):
        if vertex[0] == "val":
            return [("lim", eid, end) for eid, end in network.incident_ends(vertex[1])]
        _, eid, end = vertex
        e = network.edge(eid)
        other_end = "v" if end == "u" else "u"
        attached = e.u if end == "u" else e.v
        # Interval before the zero-length link: the walk fresh off a link
        # must cross the interval, never hop to another branch first.
        return [("lim", eid, other_end), ("val", attached)]

    stack = [(root, iter(neighbors(root)))]
    while stack:
        vertex, it = stack[-1]
        advanced = False
        for nxt in it:
            if nxt in visited:
                continue
            if vertex[0] == "lim" and nxt[0] == "lim":
                eid = vertex[1]
                e = network.edge(eid)
                spans.append(EmbeddingSpan(eid, reverse=vertex[2] == "v", start=pos))
                pos += e.length
            visited.add(nxt)
            stack.append((nxt, iter(neighbors(nxt))))
            advanced = True
            break
        if not advanced:
            stack.pop()

    return Embedding(network=network, spans=tuple(spans), total=pos)


def embed_point(embedding: Embedding, p: NetworkPoint) -> float:
    """Position of a network point on the embedded line."""
    for span in embedding.spans:
        if span.edge == p.edge:
            e = embedding.network.edge(p.edge)
            t = float(p.offset)
            return span.start + (e.length - t if span.reverse else t)
    raise NetworkMismatch(f"no edge {p.edge!r} in the embedding")


def embed_function(embedding: Embedding, f) -> "PiecewiseConstantFn":
    """Image of a piecewise-constant function under the line embedding.

    Returns a function on a synthetic single-edge network of the total
    embedded length (edge id ``"line"`` between nodes ``"lo"`` and
    ``"hi"``).  Segment measures are carried over verbatim, so integrals
    and Hellinger distances match the originals exactly.
    """
    from .density import PiecewiseConstantFn

    if f.network != embedding.network:
        raise NetworkMismatch("function and embedding are on different networks")

    breakpoints = []
    values = []
    for span in embedding.spans:
        e = embedding.network.edge(span.edge)
        bp = list(f.breakpoints(span.edge))
        vals = list(f.values(span.edge))
        if span.reverse:
            bp = [e.length - t for t in reversed(bp)]
            vals = list(reversed(vals))
        if span.start > 0.0:
            breakpoints.append(span.start)
        breakpoints.extend(span.start + t for t in bp)
        values.extend(vals)

    first, last = embedding.spans[0], embedding.spans[-1]
    e_first = embedding.network.edge(first.edge)
    e_last = embedding.network.edge(last.edge)
    start_node = e_first.v if first.reverse else e_first.u
    end_node = e_last.u if last.reverse else e_last.v

    line = GeometricNetwork(
        nodes=("hi", "lo"),
        edges=((("line", "lo", "hi", embedding.total)),),
    )
    return PiecewiseConstantFn(
        network=line,
        edge_breakpoints={"line": breakpoints},
        edge_values={"line": values},
        node_values={
            "lo": f.node_value(start_node),
            "hi": f.node_value(end_node),
        },
        is_density=f.is_density,
    )

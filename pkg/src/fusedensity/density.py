"""Piecewise-constant functions on geometric networks.

A function is described per edge by strictly increasing interior
breakpoints and one value per open segment, plus one value per node.
Densities, log-densities, and fitted estimates all share this type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyObservations,
    NetworkMismatch,
    NonpositiveValue,
    NotADensity,
)
from .network import GeometricNetwork, NetworkPoint

__all__ = [
    "PiecewiseConstantFn",
    "integrate",
    "tv",
    "log_tv",
    "hellinger_sq",
    "evaluate",
    "mean_log_likelihood",
    "common_refinement",
    "fused_partition",
]

# Evaluations below this floor are clamped before taking logs, so that
# held-out points falling in a zero-density region contribute a large
# finite penalty instead of -inf.
LOG_FLOOR = 1e-300

# Two values belong to the same fused region when they agree to this
# relative tolerance (plus a tiny absolute slack for values near zero).
FUSE_REL_TOL = 1e-6
_FUSE_ABS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewiseConstantFn:
    """Immutable piecewise-constant function on a network.

    Parameters
    ----------
    network : GeometricNetwork
    edge_breakpoints : mapping edge id -> increasing offsets in (0, length)
    edge_values : mapping edge id -> one value per open segment
    node_values : mapping node id -> value
    is_density : bool
        When set, all values must be nonnegative and the integral must be
        1 within 1e-9; violations raise ``NotADensity``.
    """

    network: GeometricNetwork
    is_density: bool
    _breakpoints: dict = field(repr=False)
    _values: dict = field(repr=False)
    _node_values: dict = field(repr=False)

    def __init__(self, network, edge_breakpoints, edge_values, node_values, is_density=False):
        bp_map = {}
        val_map = {}
        for e in network.edges:
            bp = np.array(edge_breakpoints.get(e.id, ()), dtype=float)
            vals = np.array(edge_values.get(e.id, ()), dtype=float)
            if bp.size + 1 != vals.size:
                raise ValueError(
                    f"edge {e.id!r}: {bp.size} breakpoints require {bp.size + 1} "
                    f"segment values, got {vals.size}"
                )
            if bp.size and (bp[0] <= 0.0 or bp[-1] >= e.length or np.any(np.diff(bp) <= 0.0)):
                raise ValueError(
                    f"edge {e.id!r}: breakpoints must be strictly increasing inside "
                    f"(0, {e.length})"
                )
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"edge {e.id!r}: non-finite segment value")
            bp.setflags(write=False)
            vals.setflags(write=False)
            bp_map[e.id] = bp
            val_map[e.id] = vals
        nv = {}
        for node in network.nodes:
            val = float(node_values[node])
            if not math.isfinite(val):
                raise ValueError(f"node {node!r}: non-finite value")
            nv[node] = val
        object.__setattr__(self, "network", network)
        object.__setattr__(self, "_breakpoints", bp_map)
        object.__setattr__(self, "_values", val_map)
        object.__setattr__(self, "_node_values", nv)
        object.__setattr__(self, "is_density", bool(is_density))
        if is_density:
            if any(v.size and v.min() < 0.0 for v in val_map.values()) or any(
                v < 0.0 for v in nv.values()
            ):
                raise NotADensity("density flagged but some value is negative")
            mass = integrate(self)
            if abs(mass - 1.0) > 1e-9:
                raise NotADensity(f"density flagged but integral is {mass!r}")

    def breakpoints(self, edge_id: str) -> np.ndarray:
        return self._breakpoints[edge_id]

    def values(self, edge_id: str) -> np.ndarray:
        return self._values[edge_id]

    def node_value(self, node: str) -> float:
        return self._node_values[node]

    def segment_lengths(self, edge_id: str) -> np.ndarray:
        e = self.network.edge(edge_id)
        cuts = np.concatenate([[0.0], self._breakpoints[edge_id], [e.length]])
        return np.diff(cuts)

    def end_value(self, edge_id: str, end: str) -> float:
        """Segment value adjacent to an edge end ('u' = offset 0, 'v' = length)."""
        vals = self._values[edge_id]
        return float(vals[0] if end == "u" else vals[-1])

    def with_density_flag(self) -> "PiecewiseConstantFn":
        return PiecewiseConstantFn(
            self.network, self._breakpoints, self._values, self._node_values, is_density=True
        )

    @staticmethod
    def constant(network: GeometricNetwork, value: float, is_density=False):
        """The function equal to ``value`` everywhere (segments and nodes)."""
        return PiecewiseConstantFn(
            network,
            {e.id: () for e in network.edges},
            {e.id: (value,) for e in network.edges},
            {n: value for n in network.nodes},
            is_density=is_density,
        )

    @staticmethod
    def uniform(network: GeometricNetwork):
        """The uniform density 1/total_length."""
        total = sum(e.length for e in network.edges)
        return PiecewiseConstantFn.constant(network, 1.0 / total, is_density=True)


def integrate(f: PiecewiseConstantFn) -> float:
    """Integral against the base measure; node values carry measure zero."""
    acc = 0.0
    for e in f.network.edges:
        acc += float(np.dot(f.segment_lengths(e.id), f.values(e.id)))
    return acc


def tv(f: PiecewiseConstantFn) -> float:
    """Total variation: interior jumps plus node-versus-segment jumps.

    Each edge contributes the sum of absolute differences of consecutive
    segment values; each (node, incident edge end) pair contributes the
    absolute difference between the node value and the adjacent segment
    value.
    """
    acc = 0.0
    for e in f.network.edges:
        vals = f.values(e.id)
        if vals.size > 1:
            acc += float(np.abs(np.diff(vals)).sum())
    for node in f.network.nodes:
        k = f.node_value(node)
        for eid, end in f.network.incident_ends(node):
            acc += abs(k - f.end_value(eid, end))
    return acc


def _logged(f: PiecewiseConstantFn) -> PiecewiseConstantFn:
    for e in f.network.edges:
        if f.values(e.id).min(initial=np.inf) <= 0.0:
            raise NonpositiveValue(f"edge {e.id!r} has a nonpositive segment value")
    for node in f.network.nodes:
        if f.node_value(node) <= 0.0:
            raise NonpositiveValue(f"node {node!r} has a nonpositive value")
    return PiecewiseConstantFn(
        f.network,
        {e.id: f.breakpoints(e.id) for e in f.network.edges},
        {e.id: np.log(f.values(e.id)) for e in f.network.edges},
        {n: math.log(f.node_value(n)) for n in f.network.nodes},
    )


def log_tv(f: PiecewiseConstantFn) -> float:
    """Total variation of the value-wise logarithm; requires positive values."""
    return tv(_logged(f))


def common_refinement(f: PiecewiseConstantFn, g: PiecewiseConstantFn):
    """Rewrite both functions on the union of their breakpoints.

    The outputs equal the inputs pointwise and share identical breakpoint
    sets, which makes exact segment-wise arithmetic possible.
    """
    if f.network != g.network:
        raise NetworkMismatch("functions live on different networks")

    def refine(fn, merged_map):
        new_vals = {}
        for e in fn.network.edges:
            merged = merged_map[e.id]
            bp = fn.breakpoints(e.id)
            vals = fn.values(e.id)
            left = np.concatenate([[0.0], merged])
            idx = np.searchsorted(bp, left, side="right")
            new_vals[e.id] = vals[idx]
        return PiecewiseConstantFn(
            fn.network,
            merged_map,
            new_vals,
            {n: fn.node_value(n) for n in fn.network.nodes},
            is_density=fn.is_density,
        )

    merged_map = {
        e.id: np.union1d(f.breakpoints(e.id), g.breakpoints(e.id)) for e in f.network.edges
    }
    return refine(f, merged_map), refine(g, merged_map)


def hellinger_sq(f: PiecewiseConstantFn, g: PiecewiseConstantFn) -> float:
    """Squared Hellinger distance, exact on the common refinement.

    Both inputs must be densities on the same network.  The value is
    0.5 * integral of (sqrt f - sqrt g)^2 and always lies in [0, 1].
    """
    if f.network != g.network:
        raise NetworkMismatch("functions live on different networks")
    for fn in (f, g):
        if not fn.is_density:
            raise NotADensity("hellinger_sq requires density-flagged inputs")
    fr, gr = common_refinement(f, g)
    acc = 0.0
    for e in fr.network.edges:
        lengths = fr.segment_lengths(e.id)
        diff = np.sqrt(fr.values(e.id)) - np.sqrt(gr.values(e.id))
        acc += float(np.dot(lengths, diff * diff))
    return 0.5 * acc


def evaluate(f: PiecewiseConstantFn, p: NetworkPoint) -> float:
    """Pointwise value, with the max rule at breakpoints and nodes.

    Interior points take their segment's value.  A point exactly at a
    breakpoint takes the larger of the two adjacent segment values; a
    point at a node takes the maximum of the node value and all incident
    segment values.  This matches the optimal eliminated point values of
    the underlying program, so likelihoods computed here agree with it.
    """
    if not f.network.has_edge(p.edge):
        raise NetworkMismatch(f"no edge {p.edge!r} in the function's network")
    e = f.network.edge(p.edge)
    t = float(p.offset)
    if t < 0.0 or t > e.length:
        raise NetworkMismatch(f"offset {t!r} outside edge {p.edge!r} of length {e.length!r}")
    if t == 0.0 or t == e.length:
        node = e.u if t == 0.0 else e.v
        best = f.node_value(node)
        for eid, end in f.network.incident_ends(node):
            best = max(best, f.end_value(eid, end))
        return float(best)
    bp = f.breakpoints(p.edge)
    vals = f.values(p.edge)
    i = int(np.searchsorted(bp, t, side="left"))
    if i < bp.size and bp[i] == t:
        return float(max(vals[i], vals[i + 1]))
    return float(vals[i])


def mean_log_likelihood(f: PiecewiseConstantFn, obs) -> float:
    """Mean log value over observations, clamped at a 1e-300 floor."""
    obs = list(obs)
    if not obs:
        raise EmptyObservations("mean_log_likelihood needs at least one observation")
    acc = 0.0
    for p in obs:
        acc += math.log(max(evaluate(f, p), LOG_FLOOR))
    return acc / len(obs)


def _values_fused(a: float, b: float) -> bool:
    return abs(a - b) <= FUSE_REL_TOL * max(abs(a), abs(b)) + _FUSE_ABS_TOL


def fused_partition(f: PiecewiseConstantFn) -> dict:
    """Partition segments and nodes into maximal constant regions.

    Elements are ``("seg", edge id, index)`` and ``("node", node id)``;
    adjacent elements (consecutive segments, or a node and an adjacent
    end segment) are merged when their values agree within a relative
    tolerance of 1e-6.  Returns a mapping from element to region index,
    with regions numbered by first appearance in a fixed element order.
    """
    parent = {}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    elements = []
    for e in f.network.edges:
        for i in range(f.values(e.id).size):
            elements.append(("seg", e.id, i))
    for node in f.network.nodes:
        elements.append(("node", node))
    for el in elements:
        parent[el] = el

    for e in f.network.edges:
        vals = f.values(e.id)
        for i in range(vals.size - 1):
            if _values_fused(vals[i], vals[i + 1]):
                union(("seg", e.id, i), ("seg", e.id, i + 1))
    for node in f.network.nodes:
        k = f.node_value(node)
        for eid, end in f.network.incident_ends(node):
            last = f.values(eid).size - 1
            idx = 0 if end == "u" else last
            if _values_fused(k, f.end_value(eid, end)):
                union(("node", node), ("seg", eid, idx))

    labels = {}
    region_of_root = {}
    for el in elements:
        root = find(el)
        if root not in region_of_root:
            region_of_root[root] = len(region_of_root)
        labels[el] = region_of_root[root]
    return labels

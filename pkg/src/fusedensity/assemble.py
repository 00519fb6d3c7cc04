"""Assembly of the finite-dimensional program from network and data.

The estimator is the minimizer of

    0.5 * z' S z + w' z + u' h + || D1 z + D2 h ||_1

over segment values ``z`` (one per open segment between consecutive
observations along an edge) and node values ``h``.  ``S`` is the diagonal
of segment lengths, ``w`` and ``u`` are likelihood terms built from
observation multiplicities, and ``D1``/``D2`` are signed difference
operators carrying the penalty weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EmptyObservations, LambdaTooSmall, PointOffNetwork
from .network import GeometricNetwork, NetworkPoint, total_length, validate

__all__ = ["ObservationSet", "QpProblem", "build_observations", "lambda_min", "build_qp"]

# Strictness guard: the program is only well posed strictly above the
# threshold, and exactly at it the minimizer set is unbounded.
LAMBDA_GUARD = 1e-12


@dataclass(frozen=True)
class ObservationSet:
    """Deduplicated observations: interior locations with multiplicities
    per edge, plus per-node counts for observations at offsets 0/length."""

    network: GeometricNetwork
    locations: dict = field(repr=False)  # edge id -> increasing offsets in (0, length)
    multiplicities: dict = field(repr=False)  # edge id -> int counts, same shape
    node_counts: dict = field(repr=False)  # node id -> int count (all nodes present)
    n: int = 0

    def interior_count(self, edge_id: str) -> int:
        return int(self.locations[edge_id].size)


def build_observations(network, raw, merge_eps: float = 0.0) -> ObservationSet:
    """Group raw points into an ObservationSet.

    Points with exactly equal (edge, offset) merge into one location with
    a multiplicity.  Points at offset 0 or at the edge length are counted
    at the corresponding node.  ``merge_eps > 0`` snaps offsets to a grid
    of that pitch before deduplication, for dirty data; by default only
    exact coincidences merge.
    """
    validate(network)
    raw = list(raw)
    if not raw:
        raise EmptyObservations("no observations")
    counts = {e.id: {} for e in network.edges}
    node_counts = {v: 0 for v in network.nodes}
    for p in raw:
        if p.edge not in counts:
            raise PointOffNetwork(f"point on unknown edge {p.edge!r}")
        e = network.edge(p.edge)
        t = float(p.offset)
        if not (0.0 <= t <= e.length):
            raise PointOffNetwork(
                f"offset {t!r} outside edge {p.edge!r} of length {e.length!r}"
            )
        if merge_eps > 0.0:
            t = min(max(round(t / merge_eps) * merge_eps, 0.0), e.length)
        if t == 0.0:
            node_counts[e.u] += 1
        elif t == e.length:
            node_counts[e.v] += 1
        else:
            counts[p.edge][t] = counts[p.edge].get(t, 0) + 1
    locations = {}
    multiplicities = {}
    for eid, c in counts.items():
        locs = np.array(sorted(c), dtype=float)
        locs.setflags(write=False)
        mult = np.array([c[t] for t in locs], dtype=np.int64)
        mult.setflags(write=False)
        locations[eid] = locs
        multiplicities[eid] = mult
    return ObservationSet(
        network=network,
        locations=locations,
        multiplicities=multiplicities,
        node_counts=node_counts,
        n=len(raw),
    )


def lambda_min(obs: ObservationSet, network: GeometricNetwork | None = None) -> float:
    """Strict lower bound on the penalty below which no estimator exists.

    Equals the maximum over observation locations of q / (n * deg), where
    ``deg`` is 2 at interior points and the node degree at nodes.  With n
    distinct interior observations this is 1/(2n).
    """
    network = network if network is not None else obs.network
    n = obs.n
    worst = 0.0
    for eid, mult in obs.multiplicities.items():
        if mult.size:
            worst = max(worst, float(mult.max()) / (2.0 * n))
    for node, r in obs.node_counts.items():
        if r > 0:
            worst = max(worst, r / (n * network.degree(node)))
    return worst


@dataclass(frozen=True)
class QpProblem:
    """The assembled program, in both weighted and unweighted forms.

    Rows come in two kinds, in a fixed order: one difference row per
    interior observation (edge id order, then position), then one
    node-incidence row per (node, incident edge end) pair (node id order,
    then edge id and end).  ``C1``/``C2`` hold the plain +/-1 structure;
    ``D1``/``D2`` are the same rows scaled by the penalty weights ``b``
    (``lam - q/(2n)`` on difference rows, ``lam`` on node rows).
    """

    network: GeometricNetwork
    obs: ObservationSet
    lam: float
    n: int
    s: np.ndarray  # segment lengths, one per column of C1
    w: np.ndarray  # linear term over segments
    u: np.ndarray  # linear term over nodes (ordered by node_ids)
    b: np.ndarray  # row weights
    C1: sp.csr_matrix
    C2: sp.csr_matrix
    D1: sp.csr_matrix
    D2: sp.csr_matrix
    row_meta: tuple  # ("diff", edge, i) or ("node", node, edge, end)
    seg_labels: tuple  # column -> (edge id, segment position starting at 1)
    edge_order: tuple  # edge ids in column order
    node_ids: tuple  # node ids in u/C2-column order
    n_diff_rows: int

    def seg_slice(self, edge_id: str) -> slice:
        start = self._seg_starts[edge_id]
        return slice(start, start + self.obs.interior_count(edge_id) + 1)

    @property
    def _seg_starts(self):
        starts = {}
        pos = 0
        for eid in self.edge_order:
            starts[eid] = pos
            pos += self.obs.interior_count(eid) + 1
        return starts

    def primal_objective(self, z: np.ndarray, h: np.ndarray) -> float:
        quad = 0.5 * float(np.dot(self.s * z, z))
        lin = float(np.dot(self.w, z) + np.dot(self.u, h))
        pen = float(np.abs(self.D1 @ z + self.D2 @ h).sum())
        return quad + lin + pen


def build_qp(network: GeometricNetwork, obs: ObservationSet, lam: float) -> QpProblem:
    """Assemble the program for a penalty ``lam``.

    Raises ``LambdaTooSmall`` (reporting the threshold) unless ``lam``
    exceeds :func:`lambda_min` by at least a small guard, since the
    minimizer degenerates at the threshold itself.
    """
    lam = float(lam)
    threshold = lambda_min(obs, network)
    if lam < threshold + LAMBDA_GUARD:
        raise LambdaTooSmall(lam, threshold)
    n = obs.n

    edge_order = tuple(sorted(e.id for e in network.edges))
    node_ids = tuple(network.nodes)
    node_col = {v: i for i, v in enumerate(node_ids)}

    seg_labels = []
    seg_col = {}
    s_parts = []
    w_parts = []
    for eid in edge_order:
        e = network.edge(eid)
        locs = obs.locations[eid]
        mult = obs.multiplicities[eid].astype(float)
        cuts = np.concatenate([[0.0], locs, [e.length]])
        s_parts.append(np.diff(cuts))
        qpad = np.concatenate([[0.0], mult, [0.0]])
        w_parts.append(-(qpad[:-1] + qpad[1:]) / (2.0 * n))
        for i in range(locs.size + 1):
            seg_col[(eid, i + 1)] = len(seg_labels)
            seg_labels.append((eid, i + 1))
    s = np.concatenate(s_parts)
    w = np.concatenate(w_parts)
    u = np.array([-obs.node_counts[v] / n for v in node_ids], dtype=float)

    rows = []
    cols1 = []
    vals1 = []
    cols2 = []
    vals2 = []
    rows2 = []
    bvals = []
    row_meta = []
    r = 0
    for eid in edge_order:
        mult = obs.multiplicities[eid]
        for i in range(mult.size):
            rows.extend((r, r))
            cols1.extend((seg_col[(eid, i + 1)], seg_col[(eid, i + 2)]))
            vals1.extend((1.0, -1.0))
            bvals.append(lam - float(mult[i]) / (2.0 * n))
            row_meta.append(("diff", eid, i + 1))
            r += 1
    n_diff = r
    for v in node_ids:
        for eid, end in network.incident_ends(v):
            pos = 1 if end == "u" else obs.interior_count(eid) + 1
            rows.append(r)
            cols1.append(seg_col[(eid, pos)])
            vals1.append(-1.0)
            rows2.append(r)
            cols2.append(node_col[v])
            vals2.append(1.0)
            bvals.append(lam)
            row_meta.append(("node", v, eid, end))
            r += 1

    m = r
    C1 = sp.csr_matrix((vals1, (rows, cols1)), shape=(m, len(seg_labels)))
    C2 = sp.csr_matrix((vals2, (rows2, cols2)), shape=(m, len(node_ids)))
    b = np.array(bvals, dtype=float)
    B = sp.diags(b)
    qp = QpProblem(
        network=network,
        obs=obs,
        lam=lam,
        n=n,
        s=s,
        w=w,
        u=u,
        b=b,
        C1=C1,
        C2=C2,
        D1=(B @ C1).tocsr(),
        D2=(B @ C2).tocsr(),
        row_meta=tuple(row_meta),
        seg_labels=tuple(seg_labels),
        edge_order=edge_order,
        node_ids=node_ids,
        n_diff_rows=n_diff,
    )
    for arr in (qp.s, qp.w, qp.u, qp.b):
        arr.setflags(write=False)
    return qp


def as_observation_set(network, obs, merge_eps: float = 0.0) -> ObservationSet:
    """Accept either raw points or an already-built ObservationSet."""
    if isinstance(obs, ObservationSet):
        return obs
    return build_observations(network, obs, merge_eps=merge_eps)

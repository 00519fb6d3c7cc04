"""File formats: network JSON, observations CSV, estimate JSON, reports.

All emitters are canonical: fixed key order, floats printed with 17
significant digits (enough to round-trip any double exactly), and no
locale or clock dependence, so equal inputs produce byte-equal files.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .density import PiecewiseConstantFn
from .network import Embedding, GeometricNetwork, NetworkPoint
from .select import SelectionReport
from .simulate import RateReport

__all__ = [
    "dumps_canonical",
    "network_to_json",
    "network_from_json",
    "observations_to_csv",
    "observations_from_csv",
    "estimate_to_json",
    "estimate_from_json",
    "embedding_to_json",
    "selection_report_to_csv",
    "rate_report_to_csv",
]


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    return format(float(x), ".17g")


def _emit(obj, out):
    if obj is None:
        out.write("null")
    elif obj is True:
        out.write("true")
    elif obj is False:
        out.write("false")
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(_fmt_float(obj))
    elif isinstance(obj, dict):
        out.write("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                out.write(",")
            out.write(json.dumps(str(key)))
            out.write(":")
            _emit(val, out)
        out.write("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.write("[")
        for i, val in enumerate(obj):
            if i:
                out.write(",")
            _emit(val, out)
        out.write("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    """JSON text with deterministic bytes and exact float round-trips."""
    out = io.StringIO()
    _emit(obj, out)
    out.write("\n")
    return out.getvalue()


def network_to_json(network: GeometricNetwork) -> str:
    return dumps_canonical(_network_obj(network))


def _network_obj(network: GeometricNetwork) -> dict:
    return {
        "nodes": [{"id": n} for n in network.nodes],
        "edges": [
            {"id": e.id, "u": e.u, "v": e.v, "length": e.length} for e in network.edges
        ],
    }


def network_from_json(text: str) -> GeometricNetwork:
    doc = json.loads(text)
    return _network_from_obj(doc)


def _network_from_obj(doc: dict) -> GeometricNetwork:
    nodes = [item["id"] for item in doc["nodes"]]
    edges = [(e["id"], e["u"], e["v"], float(e["length"])) for e in doc["edges"]]
    return GeometricNetwork(nodes=nodes, edges=edges)


def observations_to_csv(points) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["edge_id", "offset"])
    for p in points:
        writer.writerow([p.edge, _fmt_float(p.offset)])
    return out.getvalue()


def observations_from_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [c.strip() for c in header[:2]] != ["edge_id", "offset"]:
        raise ValueError("observations CSV must start with header 'edge_id,offset'")
    points = []
    for row in reader:
        if not row:
            continue
        points.append(NetworkPoint(row[0], float(row[1])))
    return points


def estimate_to_json(fn: PiecewiseConstantFn, metadata: dict | None = None) -> str:
    """Serialize an estimate with its network, so the file is self-contained."""
    doc = {
        "network": _network_obj(fn.network),
        "edges": {
            e.id: {
                "breakpoints": list(fn.breakpoints(e.id)),
                "values": list(fn.values(e.id)),
            }
            for e in fn.network.edges
        },
        "nodes": {n: fn.node_value(n) for n in fn.network.nodes},
        "is_density": fn.is_density,
        "metadata": dict(metadata or {}),
    }
    return dumps_canonical(doc)


def estimate_from_json(text: str):
    """Parse an estimate file; returns (function, metadata dict)."""
    doc = json.loads(text)
    network = _network_from_obj(doc["network"])
    fn = PiecewiseConstantFn(
        network,
        {eid: spec["breakpoints"] for eid, spec in doc["edges"].items()},
        {eid: spec["values"] for eid, spec in doc["edges"].items()},
        {n: float(v) for n, v in doc["nodes"].items()},
        is_density=bool(doc.get("is_density", False)),
    )
    return fn, doc.get("metadata", {})


def embedding_to_json(embedding: Embedding, estimate_doc: str | None = None) -> str:
    doc = {
        "total_length": embedding.total,
        "spans": [
            {"edge": s.edge, "reverse": s.reverse, "start": s.start}
            for s in embedding.spans
        ],
    }
    if estimate_doc is not None:
        doc["estimate"] = json.loads(estimate_doc)
    return dumps_canonical(doc)


def selection_report_to_csv(report: SelectionReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    score_col = {"cv": "cv_score", "aic": "aic", "bic": "bic"}[report.method]
    writer.writerow(["lambda", score_col, "dof", "chosen"])
    for lam, score, dof in zip(report.lambdas, report.scores, report.dofs):
        writer.writerow(
            [
                _fmt_float(lam),
                "" if score is None else _fmt_float(score),
                "" if dof is None else int(dof),
                "true" if lam == report.chosen else "false",
            ]
        )
    return out.getvalue()


def rate_report_to_csv(report: RateReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n", "reps", "mean_h2", "std_h2", "slope"])
    slope = "" if report.slope is None else _fmt_float(report.slope)
    for n, mean, std in zip(report.n_grid, report.mean_h2, report.std_h2):
        writer.writerow([n, report.reps, _fmt_float(mean), _fmt_float(std), slope])
    return out.getvalue()

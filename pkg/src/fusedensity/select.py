"""Penalty selection, degrees of freedom, and the post-selection refit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import (
    PiecewiseConstantFn,
    evaluate,
    fused_partition,
    mean_log_likelihood,
)
from .errors import LambdaTooSmall, TooFewObservations
from .network import GeometricNetwork, NetworkPoint
from .solver import SolverSettings, fit

__all__ = ["SelectionReport", "count_dof", "ic_select", "cv_select", "refit_mle"]


def count_dof(f: PiecewiseConstantFn) -> int:
    """Number of maximal connected regions on which the estimate is constant.

    Regions cover both segments and node values; values agree within a
    relative tolerance of 1e-6, since the solver returns approximately
    rather than exactly fused values.
    """
    return len(set(fused_partition(f).values()))


@dataclass(frozen=True)
class SelectionReport:
    """Outcome of a grid search over penalties."""

    method: str  # "cv", "aic", or "bic"
    lambdas: tuple
    scores: tuple  # per-lambda criterion value; None if never evaluated
    dofs: tuple  # per-lambda dof of the full-data fit; None if skipped
    chosen: float
    details: tuple  # per-(fold, lambda) records for cv; per-lambda skips for ic
    folds: int = 0
    seed: int | None = None


def _pick(lambdas, scores, better):
    """Best score; ties resolved toward the larger penalty."""
    best = None
    for lam, score in zip(lambdas, scores):
        if score is None:
            continue
        if best is None or better(score, best[1]) or (score == best[1] and lam > best[0]):
            best = (lam, score)
    if best is None:
        raise LambdaTooSmall(min(lambdas), float("nan"))
    return best[0]


def ic_select(
    network: GeometricNetwork,
    points,
    grid,
    criterion: str = "aic",
    settings: SolverSettings | None = None,
) -> SelectionReport:
    """Pick the penalty minimizing an information criterion over a grid.

    AIC = -2n * mean log-likelihood + 2 * dof;
    BIC = -2n * mean log-likelihood + dof * log n.
    Grid entries below the existence threshold are skipped and reported.
    """
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise ValueError(f"unknown criterion {criterion!r}")
    points = list(points)
    n = len(points)
    scores = []
    dofs = []
    details = []
    for lam in grid:
        try:
            _, fn = fit(network, points, lam, settings)
        except LambdaTooSmall as err:
            scores.append(None)
            dofs.append(None)
            details.append((lam, None, f"skipped: threshold {err.threshold!r}"))
            continue
        dof = count_dof(fn)
        mll = mean_log_likelihood(fn, points)
        penalty = 2.0 * dof if criterion == "aic" else dof * float(np.log(n))
        score = -2.0 * n * mll + penalty
        scores.append(score)
        dofs.append(dof)
        details.append((lam, score, ""))
    chosen = _pick(tuple(grid), scores, better=lambda a, b: a < b)
    return SelectionReport(
        method=criterion,
        lambdas=tuple(grid),
        scores=tuple(scores),
        dofs=tuple(dofs),
        chosen=chosen,
        details=tuple(details),
    )


def cv_select(
    network: GeometricNetwork,
    points,
    grid,
    folds: int = 20,
    seed: int = 0,
    settings: SolverSettings | None = None,
) -> SelectionReport:
    """Pick the penalty maximizing mean held-out log density across folds.

    The points are partitioned into ``folds`` nearly equal parts by a
    seeded permutation; each part is scored under the fit to its
    complement.  A (fold, lambda) pair whose training threshold excludes
    the penalty is skipped and recorded.  Ties choose the larger penalty.
    """
    points = list(points)
    n = len(points)
    if not (2 <= folds <= n):
        raise TooFewObservations(f"need n >= folds >= 2, got n={n}, folds={folds}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    parts = np.array_split(order, folds)
    grid = tuple(grid)
    fold_scores = {lam: [] for lam in grid}
    details = []
    for fold_idx, part in enumerate(parts):
        held = set(int(i) for i in part)
        train = [p for i, p in enumerate(points) if i not in held]
        test = [points[i] for i in sorted(held)]
        for lam in grid:
            try:
                _, fn = fit(network, train, lam, settings)
            except LambdaTooSmall as err:
                details.append((fold_idx, lam, None, f"skipped: threshold {err.threshold!r}"))
                continue
            score = mean_log_likelihood(fn, test)
            fold_scores[lam].append(score)
            details.append((fold_idx, lam, score, ""))
    scores = []
    dofs = []
    for lam in grid:
        if fold_scores[lam]:
            scores.append(float(np.mean(fold_scores[lam])))
        else:
            scores.append(None)
        try:
            _, fn = fit(network, points, lam, settings)
            dofs.append(count_dof(fn))
        except LambdaTooSmall:
            dofs.append(None)
    chosen = _pick(grid, scores, better=lambda a, b: a > b)
    return SelectionReport(
        method="cv",
        lambdas=grid,
        scores=tuple(scores),
        dofs=tuple(dofs),
        chosen=chosen,
        details=tuple(details),
        folds=folds,
        seed=seed,
    )


def refit_mle(network: GeometricNetwork, points, fhat: PiecewiseConstantFn):
    """Restricted maximum likelihood on the regions selected by a fit.

    The fitted function is fused into constant regions; each region's new
    value is (observations in region) / (n * region length).  Observations
    exactly on a region boundary go to the higher-valued adjacent region,
    consistent with how the fit itself values boundary points.  The output
    integrates to 1.
    """
    points = list(points)
    n = len(points)
    labels = fused_partition(fhat)
    n_regions = len(set(labels.values()))
    region_len = np.zeros(n_regions)
    region_val = np.zeros(n_regions)  # fitted value, used to break boundary ties
    for e in network.edges:
        lengths = fhat.segment_lengths(e.id)
        vals = fhat.values(e.id)
        for i in range(vals.size):
            r = labels[("seg", e.id, i)]
            region_len[r] += lengths[i]
            region_val[r] = vals[i]
    for node in network.nodes:
        region_val[labels[("node", node)]] = fhat.node_value(node)

    counts = np.zeros(n_regions)
    for p in points:
        e = network.edge(p.edge)
        t = float(p.offset)
        if t == 0.0 or t == e.length:
            node = e.u if t == 0.0 else e.v
            candidates = [labels[("node", node)]]
            for eid, end in network.incident_ends(node):
                idx = 0 if end == "u" else fhat.values(eid).size - 1
                candidates.append(labels[("seg", eid, idx)])
        else:
            bp = fhat.breakpoints(p.edge)
            i = int(np.searchsorted(bp, t, side="left"))
            if i < bp.size and bp[i] == t:
                candidates = [labels[("seg", p.edge, i)], labels[("seg", p.edge, i + 1)]]
            else:
                candidates = [labels[("seg", p.edge, i)]]
        # highest fitted value wins; zero-length regions cannot carry mass
        candidates = sorted(set(candidates), key=lambda r: (region_val[r], -r))
        positive = [r for r in candidates if region_len[r] > 0.0]
        counts[(positive or candidates)[-1]] += 1.0

    new_val = np.zeros(n_regions)
    mask = region_len > 0.0
    new_val[mask] = counts[mask] / (n * region_len[mask])
    # a zero-length region is a lone node: give it its best neighbour's value
    for node in network.nodes:
        r = labels[("node", node)]
        if not mask[r]:
            adj = [
                new_val[labels[("seg", eid, 0 if end == "u" else fhat.values(eid).size - 1)]]
                for eid, end in network.incident_ends(node)
            ]
            new_val[r] = max(adj)

    return PiecewiseConstantFn(
        network,
        {e.id: fhat.breakpoints(e.id) for e in network.edges},
        {
            e.id: [new_val[labels[("seg", e.id, i)]] for i in range(fhat.values(e.id).size)]
            for e in network.edges
        },
        {node: float(new_val[labels[("node", node)]]) for node in network.nodes},
        is_density=True,
    )

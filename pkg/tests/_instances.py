"""Seeded random instances shared across the test modules."""

import numpy as np

from fusedensity import (
    GeometricNetwork,
    NetworkPoint,
    PiecewiseConstantFn,
    build_observations,
    lambda_min,
)


def random_network(rng, max_extra_edges=4, max_nodes=7):
    """Random connected network: a spanning tree plus a few extra edges.

    Extra edges may create cycles, parallel edges, or self-loops.
    """
    n_nodes = int(rng.integers(2, max_nodes + 1))
    nodes = [f"n{i}" for i in range(n_nodes)]
    edges = []
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        edges.append((f"e{len(edges)}", nodes[j], nodes[i], float(rng.uniform(0.2, 2.0))))
    for _ in range(int(rng.integers(0, max_extra_edges + 1))):
        a = int(rng.integers(0, n_nodes))
        b = int(rng.integers(0, n_nodes))
        edges.append((f"e{len(edges)}", nodes[a], nodes[b], float(rng.uniform(0.2, 2.0))))
    return GeometricNetwork(nodes=nodes, edges=edges)


def random_points(rng, network, n, node_frac=0.0, dup_frac=0.0):
    """n points, length-weighted uniform; optionally some at nodes/duplicated."""
    lengths = np.array([e.length for e in network.edges])
    probs = lengths / lengths.sum()
    idx = rng.choice(len(network.edges), size=n, p=probs)
    points = []
    for i in idx:
        e = network.edges[i]
        roll = rng.random()
        if roll < node_frac:
            points.append(NetworkPoint(e.id, 0.0 if rng.random() < 0.5 else e.length))
        elif roll < node_frac + dup_frac and points:
            points.append(points[int(rng.integers(0, len(points)))])
        else:
            points.append(NetworkPoint(e.id, float(rng.uniform(0.0, e.length))))
    return points


def random_pcf(rng, network, max_breaks=3, density=False):
    """Random positive piecewise-constant function, optionally normalized."""
    bp = {}
    vals = {}
    for e in network.edges:
        k = int(rng.integers(0, max_breaks + 1))
        cuts = np.sort(rng.uniform(0.0, e.length, size=k))
        cuts = np.unique(cuts[(cuts > 0.0) & (cuts < e.length)])
        bp[e.id] = cuts
        vals[e.id] = rng.uniform(0.1, 3.0, size=cuts.size + 1)
    node_vals = {v: float(rng.uniform(0.1, 3.0)) for v in network.nodes}
    fn = PiecewiseConstantFn(network, bp, vals, node_vals)
    if density:
        from fusedensity import integrate

        mass = integrate(fn)
        fn = PiecewiseConstantFn(
            network,
            bp,
            {eid: v / mass for eid, v in vals.items()},
            {n: v / mass for n, v in node_vals.items()},
            is_density=True,
        )
    return fn


def feasible_lambda(rng, network, points, spread=0.08):
    """A penalty safely above the existence threshold for these points."""
    obs = build_observations(network, points)
    thr = lambda_min(obs)
    return 1.25 * thr + float(rng.uniform(0.002, spread))


def step_density_on_interval(levels=(0.5, 1.75, 0.5), cuts=(0.3, 0.7)):
    """A small step density on a unit single-edge network."""
    net = GeometricNetwork(nodes=["lo", "hi"], edges=[("e", "lo", "hi", 1.0)])
    vals = np.asarray(levels, dtype=float)
    lengths = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
    mass = float(np.dot(lengths, vals))
    vals = vals / mass
    return PiecewiseConstantFn(
        net,
        {"e": cuts},
        {"e": vals},
        {"lo": float(vals[0]), "hi": float(vals[-1])},
        is_density=True,
    )

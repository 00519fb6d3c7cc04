import numpy as np
import pytest

from fusedensity import (
    EmptyObservations,
    GeometricNetwork,
    LambdaTooSmall,
    NetworkPoint,
    PointOffNetwork,
    build_observations,
    build_qp,
    lambda_min,
    total_length,
)
from fusedensity.density import PiecewiseConstantFn, tv

from _instances import random_network, random_points, feasible_lambda


def unit_edge():
    return GeometricNetwork(nodes=["a", "b"], edges=[("e", "a", "b", 1.0)])


class TestBuildObservations:
    def test_single_point(self):
        obs = build_observations(unit_edge(), [NetworkPoint("e", 0.5)])
        assert list(obs.locations["e"]) == [0.5]
        assert list(obs.multiplicities["e"]) == [1]
        assert obs.node_counts == {"a": 0, "b": 0}
        assert obs.n == 1

    def test_exact_duplicates_merge(self):
        pts = [NetworkPoint("e", 0.5), NetworkPoint("e", 0.5), NetworkPoint("e", 0.2)]
        obs = build_observations(unit_edge(), pts)
        assert list(obs.locations["e"]) == [0.2, 0.5]
        assert list(obs.multiplicities["e"]) == [1, 2]
        assert obs.n == 3

    def test_endpoint_attributed_to_node(self):
        obs = build_observations(unit_edge(), [NetworkPoint("e", 0.0)])
        assert obs.node_counts["a"] == 1
        assert obs.interior_count("e") == 0
        obs = build_observations(unit_edge(), [NetworkPoint("e", 1.0)])
        assert obs.node_counts["b"] == 1

    def test_merge_eps_snaps_before_dedup(self):
        pts = [NetworkPoint("e", 0.5000001), NetworkPoint("e", 0.4999999)]
        exact = build_observations(unit_edge(), pts)
        assert exact.interior_count("e") == 2
        snapped = build_observations(unit_edge(), pts, merge_eps=1e-3)
        assert snapped.interior_count("e") == 1
        assert list(snapped.multiplicities["e"]) == [2]

    def test_empty_rejected(self):
        with pytest.raises(EmptyObservations):
            build_observations(unit_edge(), [])

    def test_off_network_rejected(self):
        with pytest.raises(PointOffNetwork):
            build_observations(unit_edge(), [NetworkPoint("zz", 0.5)])
        with pytest.raises(PointOffNetwork):
            build_observations(unit_edge(), [NetworkPoint("e", 1.0001)])


class TestLambdaMin:
    def test_distinct_interior_is_half_over_n(self):
        rng = np.random.default_rng(0)
        pts = [NetworkPoint("e", float(t)) for t in rng.uniform(0.01, 0.99, size=100)]
        obs = build_observations(unit_edge(), pts)
        assert lambda_min(obs) == 0.005

    def test_interior_multiplicity(self):
        pts = [NetworkPoint("e", 0.5), NetworkPoint("e", 0.5)]
        obs = build_observations(unit_edge(), pts)
        # q = 2, n = 2, deg = 2
        assert lambda_min(obs) == 0.5

    def test_node_observation_uses_node_degree(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c", "h"],
            edges=[("e1", "h", "a", 1.0), ("e2", "h", "b", 1.0), ("e3", "h", "c", 1.0)],
        )
        obs = build_observations(net, [NetworkPoint("e1", 0.0)])  # at the hub
        assert lambda_min(obs) == pytest.approx(1.0 / 3.0)


class TestBuildQp:
    def test_unit_instance_by_hand(self):
        # one observation at 0.5 on a unit edge, n = 1, lam = 0.6
        obs = build_observations(unit_edge(), [NetworkPoint("e", 0.5)])
        qp = build_qp(unit_edge(), obs, 0.6)
        assert list(qp.s) == [0.5, 0.5]
        assert list(qp.w) == [-0.5, -0.5]
        assert list(qp.u) == [0.0, 0.0]
        assert qp.n_diff_rows == 1
        assert qp.row_meta[0] == ("diff", "e", 1)
        assert qp.b[0] == pytest.approx(0.1)
        assert qp.b[1] == qp.b[2] == 0.6
        # difference row couples the two segments; node rows hang off them
        D1 = qp.D1.toarray()
        assert D1[0].tolist() == pytest.approx([0.1, -0.1])
        assert sorted(qp.row_meta[1:]) == [("node", "a", "e", "u"), ("node", "b", "e", "v")]

    def test_lambda_guard(self):
        obs = build_observations(unit_edge(), [NetworkPoint("e", 0.5)])
        with pytest.raises(LambdaTooSmall) as err:
            build_qp(unit_edge(), obs, 0.4)
        assert err.value.threshold == 0.5

    def test_unobserved_edge_spans_one_segment_with_zero_w(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c"], edges=[("e1", "a", "b", 1.0), ("e2", "b", "c", 2.0)]
        )
        obs = build_observations(net, [NetworkPoint("e1", 0.5)])
        qp = build_qp(net, obs, 0.7)
        sl = qp.seg_slice("e2")
        assert qp.s[sl].tolist() == [2.0]
        assert qp.w[sl].tolist() == [0.0]
        # no difference row touches e2; it is coupled through node rows only
        assert all(meta[1] != "e2" for meta in qp.row_meta if meta[0] == "diff")

    def test_structural_invariants_on_random_instances(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            net = random_network(rng)
            pts = random_points(rng, net, int(rng.integers(3, 40)), node_frac=0.1, dup_frac=0.15)
            lam = feasible_lambda(rng, net, pts)
            obs = build_observations(net, pts)
            qp = build_qp(net, obs, lam)
            assert qp.s.min() > 0
            assert qp.s.sum() == pytest.approx(total_length(net), rel=1e-12)
            # w sums to -(interior mass)/n; with node observations the
            # remaining -r/n lives in u
            assert qp.w.sum() + qp.u.sum() == pytest.approx(-1.0, abs=1e-12)
            if all(r == 0 for r in obs.node_counts.values()):
                assert qp.w.sum() == pytest.approx(-1.0, abs=1e-12)
            # each C-row holds exactly one +1 and one -1
            C = np.hstack([qp.C1.toarray(), qp.C2.toarray()])
            assert ((C == 1).sum(axis=1) == 1).all()
            assert ((C == -1).sum(axis=1) == 1).all()
            assert (np.abs(C).sum(axis=1) == 2).all()
            # difference rows never touch node columns
            assert qp.C2[: qp.n_diff_rows].nnz == 0
            # row weights positive; node rows weigh lam
            assert qp.b.min() > 0
            assert (qp.b[qp.n_diff_rows :] == lam).all()
            # no free column: every variable appears in some row
            touched = np.abs(qp.C1).sum(axis=0)
            assert touched.min() >= 1

    def test_penalty_reconstructs_weighted_tv(self):
        # For functions with breakpoints exactly at the observations,
        # ||D1 z + D2 h||_1 equals the weighted jump terms of the objective.
        rng = np.random.default_rng(33)
        for _ in range(100):
            net = random_network(rng)
            pts = random_points(rng, net, int(rng.integers(3, 25)), dup_frac=0.1)
            lam = feasible_lambda(rng, net, pts)
            obs = build_observations(net, pts)
            qp = build_qp(net, obs, lam)
            z = rng.uniform(0.1, 3.0, size=qp.s.size)
            h = rng.uniform(0.1, 3.0, size=len(qp.node_ids))
            direct = float(np.abs(qp.D1 @ z + qp.D2 @ h).sum())
            expected = 0.0
            for eid in qp.edge_order:
                sl = qp.seg_slice(eid)
                zvals = z[sl]
                mult = obs.multiplicities[eid]
                for i in range(mult.size):
                    weight = lam - mult[i] / (2.0 * qp.n)
                    expected += weight * abs(zvals[i] - zvals[i + 1])
            for vi, v in enumerate(qp.node_ids):
                for eid, end in net.incident_ends(v):
                    sl = qp.seg_slice(eid)
                    zv = z[sl][0 if end == "u" else -1]
                    expected += lam * abs(h[vi] - zv)
            assert direct == pytest.approx(expected, abs=1e-12, rel=1e-12)

    def test_single_edge_unweighted_structure_is_chain_incidence(self):
        rng = np.random.default_rng(4)
        pts = [NetworkPoint("e", float(t)) for t in sorted(rng.uniform(0.1, 0.9, 5))]
        obs = build_observations(unit_edge(), pts)
        qp = build_qp(unit_edge(), obs, 0.3)
        C = np.hstack([qp.C1.toarray(), qp.C2.toarray()])
        # chain vertices: 6 segments + 2 nodes; rows are its oriented edges
        assert C.shape == (7, 8)
        pairs = set()
        for row in C:
            plus = np.where(row == 1)[0]
            minus = np.where(row == -1)[0]
            assert plus.size == 1 and minus.size == 1
            pairs.add((int(plus[0]), int(minus[0])))
        # consecutive segments 0..5 plus (node, end segment) attachments
        expected = {(i, i + 1) for i in range(5)} | {(6, 0), (7, 5)}
        assert pairs == expected

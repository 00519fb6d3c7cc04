import numpy as np
import pytest

from fusedensity import (
    DisconnectedNetwork,
    GeometricNetwork,
    NetworkPoint,
    NonpositiveLength,
    DanglingEndpoint,
    PiecewiseConstantFn,
    dfs_embed,
    embed_function,
    embed_point,
    hellinger_sq,
    integrate,
    total_length,
    tv,
    validate,
)

from _instances import random_network, random_pcf


def single_edge(length=1.0):
    return GeometricNetwork(nodes=["a", "b"], edges=[("e", "a", "b", length)])


def star_hub_out():
    return GeometricNetwork(
        nodes=["a", "b", "c", "h"],
        edges=[("e1", "h", "a", 1.0), ("e2", "h", "b", 1.0), ("e3", "h", "c", 1.0)],
    )


class TestValidate:
    def test_minimal_network_ok(self):
        validate(single_edge())

    def test_two_components_rejected(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c", "d"],
            edges=[("e1", "a", "b", 1.0), ("e2", "c", "d", 1.0)],
        )
        with pytest.raises(DisconnectedNetwork):
            validate(net)

    def test_zero_length_rejected(self):
        with pytest.raises(NonpositiveLength):
            validate(single_edge(length=0.0))

    def test_nan_length_rejected(self):
        with pytest.raises(NonpositiveLength):
            validate(single_edge(length=float("nan")))

    def test_dangling_endpoint_rejected(self):
        net = GeometricNetwork(nodes=["a"], edges=[("e", "a", "zz", 1.0)])
        with pytest.raises(DanglingEndpoint):
            validate(net)

    def test_duplicate_ids_rejected_at_construction(self):
        with pytest.raises(ValueError):
            GeometricNetwork(nodes=["a", "a"], edges=[])
        with pytest.raises(ValueError):
            GeometricNetwork(
                nodes=["a", "b"], edges=[("e", "a", "b", 1.0), ("e", "b", "a", 1.0)]
            )


class TestTotalLength:
    def test_single_edge(self):
        assert total_length(single_edge()) == 1.0

    def test_star_additivity(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c", "h"],
            edges=[("e1", "h", "a", 1.0), ("e2", "h", "b", 2.0), ("e3", "h", "c", 3.0)],
        )
        assert total_length(net) == 6.0

    def test_self_loop(self):
        net = GeometricNetwork(nodes=["a"], edges=[("e", "a", "a", 2.5)])
        assert total_length(net) == 2.5


class TestDfsEmbed:
    def test_single_edge_identity(self):
        emb = dfs_embed(single_edge())
        assert len(emb.spans) == 1
        span = emb.spans[0]
        assert (span.edge, span.reverse, span.start) == ("e", False, 0.0)
        assert emb.total == 1.0

    def test_path_is_consecutive(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c"], edges=[("e1", "a", "b", 1.0), ("e2", "b", "c", 1.0)]
        )
        emb = dfs_embed(net)
        assert [s.edge for s in emb.spans] == ["e1", "e2"]
        assert [s.start for s in emb.spans] == [0.0, 1.0]
        assert emb.total == 2.0

    def test_star_traversal_enumerated_by_hand(self):
        # Root is "a" (lowest id); the walk enters e1 at its far end, so e1
        # is laid reversed, then fans out from the hub in edge-id order.
        emb = dfs_embed(star_hub_out())
        assert [(s.edge, s.reverse, s.start) for s in emb.spans] == [
            ("e1", True, 0.0),
            ("e2", False, 1.0),
            ("e3", False, 2.0),
        ]
        assert emb.total == 3.0

    def test_each_edge_exactly_once_and_lengths_add_up(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            net = random_network(rng)
            emb = dfs_embed(net)
            assert sorted(s.edge for s in emb.spans) == sorted(e.id for e in net.edges)
            assert emb.total == pytest.approx(total_length(net), rel=1e-12)
            # spans tile [0, total] contiguously
            pos = 0.0
            for s in emb.spans:
                assert s.start == pytest.approx(pos, abs=1e-12)
                pos += net.edge(s.edge).length

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        net = random_network(rng)
        assert dfs_embed(net) == dfs_embed(net)

    def test_disconnected_rejected(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c", "d"],
            edges=[("e1", "a", "b", 1.0), ("e2", "c", "d", 1.0)],
        )
        with pytest.raises(DisconnectedNetwork):
            dfs_embed(net)

    def test_self_loop_traversed_once(self):
        net = GeometricNetwork(nodes=["a"], edges=[("e", "a", "a", 2.0)])
        emb = dfs_embed(net)
        assert len(emb.spans) == 1
        assert emb.total == 2.0


class TestEmbedFunction:
    def test_constant_embeds_to_constant(self):
        net = star_hub_out()
        f = PiecewiseConstantFn.uniform(net)
        g = embed_function(dfs_embed(net), f)
        assert g.network.edges[0].length == 3.0
        assert np.allclose(g.values("line"), 1.0 / 3.0)
        assert integrate(g) == pytest.approx(1.0, rel=1e-12)

    def test_two_edge_path_measure_preserved(self):
        net = GeometricNetwork(
            nodes=["a", "b", "c"], edges=[("e1", "a", "b", 1.0), ("e2", "b", "c", 1.0)]
        )
        f = PiecewiseConstantFn(
            net,
            {"e1": (), "e2": ()},
            {"e1": (2.0 / 3.0,), "e2": (1.0 / 3.0,)},
            {"a": 2.0 / 3.0, "b": 0.5, "c": 1.0 / 3.0},
            is_density=True,
        )
        g = embed_function(dfs_embed(net), f)
        assert list(g.values("line")) == [2.0 / 3.0, 1.0 / 3.0]
        assert integrate(g) == pytest.approx(integrate(f), rel=1e-12)

    def test_star_tv_inflation_enumerated_by_hand(self):
        # Hand computation for the fixed traversal (e1 reversed, e2, e3):
        # network TV is 3, and the univariate image's TV is also exactly 3,
        # within the theoretical bound of 2 * network TV.
        net = star_hub_out()
        f = PiecewiseConstantFn(
            net,
            {"e1": (), "e2": (), "e3": ()},
            {"e1": (1.0,), "e2": (2.0,), "e3": (4.0,)},
            {"h": 2.0, "a": 1.0, "b": 2.0, "c": 4.0},
        )
        assert tv(f) == pytest.approx(3.0, abs=1e-15)
        g = embed_function(dfs_embed(net), f)
        assert tv(g) == pytest.approx(3.0, abs=1e-15)
        assert tv(g) <= 2.0 * tv(f) + 1e-12

    def test_random_functions_preserve_integral_hellinger_and_tv_bound(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            net = random_network(rng)
            emb = dfs_embed(net)
            g = random_pcf(rng, net)
            ge = embed_function(emb, g)
            assert integrate(ge) == pytest.approx(integrate(g), rel=1e-12)
            assert tv(ge) <= 2.0 * tv(g) + 1e-12
            f1 = random_pcf(rng, net, density=True)
            f2 = random_pcf(rng, net, density=True)
            h_net = hellinger_sq(f1, f2)
            h_line = hellinger_sq(embed_function(emb, f1), embed_function(emb, f2))
            assert h_line == pytest.approx(h_net, rel=1e-12, abs=1e-15)

    def test_embed_point_lands_in_matching_span(self):
        net = star_hub_out()
        emb = dfs_embed(net)
        # e1 is reversed: offset 0.25 from the hub end maps to 1 - 0.25
        assert embed_point(emb, NetworkPoint("e1", 0.25)) == pytest.approx(0.75)
        assert embed_point(emb, NetworkPoint("e2", 0.25)) == pytest.approx(1.25)

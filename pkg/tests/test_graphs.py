import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyngossip.errors import ConstructionError
from dyngossip.graphs import (
    DynamicTrace,
    Graph,
    augment_to_c_connected,
    harary_overlay,
    interval_connectivity_ok,
    is_connected,
    peel_adjacency,
    peel_high_degree,
    vertex_connectivity,
)

from conftest import brute_vertex_connectivity, random_graph


def complete(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle(n):
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


class TestGraphBasics:
    def test_canonicalisation(self):
        g = Graph(4, [(2, 1), (1, 2), (0, 3)])
        assert g.edge_set() == {(1, 2), (0, 3)}
        assert g.edge_count == 2

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            Graph(3, [(1, 1)])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            Graph(3, [(0, 3)])

    def test_equality_ignores_input_order(self):
        assert Graph(3, [(0, 1), (1, 2)]) == Graph(3, [(2, 1), (1, 0)])

    def test_union(self):
        g = Graph(4, [(0, 1)]).union([(1, 2), (0, 1)])
        assert g.edge_set() == {(0, 1), (1, 2)}

    def test_trace_requires_same_n(self):
        with pytest.raises(ValueError):
            DynamicTrace(4, [Graph(4), Graph(5)])


class TestIsConnected:
    def test_path(self):
        assert is_connected(Graph(4, [(0, 1), (1, 2), (2, 3)]))

    def test_two_disjoint_edges(self):
        assert not is_connected(Graph(4, [(0, 1), (2, 3)]))

    def test_single_node(self):
        assert is_connected(Graph(1))

    def test_empty_graph_multi_node(self):
        assert not is_connected(Graph(2))


class TestVertexConnectivity:
    def test_complete_k5(self):
        assert vertex_connectivity(complete(5)) == 4

    def test_cycle_c6(self):
        assert vertex_connectivity(cycle(6)) == 2

    def test_harary_overlay_c4_s10(self):
        g = Graph(10, harary_overlay(list(range(10)), 4))
        assert vertex_connectivity(g) == 4
        assert brute_vertex_connectivity(g) == 4

    def test_requires_two_nodes(self):
        with pytest.raises(ValueError):
            vertex_connectivity(Graph(1))

    def test_disconnected_is_zero(self):
        assert vertex_connectivity(Graph(4, [(0, 1), (2, 3)])) == 0

    def test_cut_vertex(self):
        # two triangles sharing node 2
        g = Graph(5, [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)])
        assert vertex_connectivity(g) == 1

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_bruteforce_on_random_graphs(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 9))
        g = random_graph(n, float(rng.uniform(0.2, 0.8)), rng)
        assert vertex_connectivity(g) == brute_vertex_connectivity(g)

    @given(st.integers(0, 2**32 - 1), st.integers(4, 8))
    @settings(max_examples=40, deadline=None)
    def test_bruteforce_equivalence_property(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_graph(n, float(rng.uniform(0.1, 0.9)), rng)
        assert vertex_connectivity(g) == brute_vertex_connectivity(g)

    @pytest.mark.parametrize("seed", range(4))
    def test_removal_of_c_minus_1_keeps_connected(self, seed):
        from itertools import combinations

        rng = np.random.default_rng(100 + seed)
        g = random_graph(8, 0.6, rng)
        c = vertex_connectivity(g)
        if c < 2:
            return
        adj = g.adjacency()
        for cut in combinations(range(8), c - 1):
            keep = [u for u in range(8) if u not in cut]
            sub = adj[np.ix_(keep, keep)]
            su, sv = np.nonzero(np.triu(sub, 1))
            assert is_connected(Graph.from_arrays(len(keep), su, sv))


class TestHararyOverlay:
    def test_c3_on_4_nodes_is_complete(self):
        assert harary_overlay([0, 1, 2, 3], 3) == complete(4).edge_set()

    def test_c2_on_8_nodes_is_cycle(self):
        assert Graph(8, harary_overlay(list(range(8)), 2)) == cycle(8)

    def test_rejects_too_few_nodes(self):
        with pytest.raises(ValueError):
            harary_overlay([0, 1, 2], 3)

    @pytest.mark.parametrize("c,s", [(1, 4), (2, 5), (3, 7), (3, 8), (4, 9), (5, 11), (5, 12), (6, 13)])
    def test_connectivity_and_edge_budget(self, c, s):
        edges = harary_overlay(list(range(s)), c)
        g = Graph(s, edges)
        assert vertex_connectivity(g) >= c
        assert len(edges) <= -(-c * s // 2) + s

    def test_arbitrary_node_ids(self):
        nodes = [7, 3, 11, 5, 9]
        edges = harary_overlay(nodes, 2)
        assert all(u in nodes and v in nodes for u, v in edges)


class TestPeeling:
    def test_complete_k5_threshold_2(self):
        order, residual = peel_high_degree(complete(5), 2)
        assert len(order) == 3
        assert residual == {3, 4}

    def test_empty_graph(self):
        order, residual = peel_high_degree(Graph(4), 1)
        assert order == []
        assert residual == {0, 1, 2, 3}

    def test_star_center_first(self):
        star = Graph(5, [(0, i) for i in range(1, 5)])
        order, residual = peel_high_degree(star, 2)
        assert order == [0]
        assert residual == {1, 2, 3, 4}

    def test_residual_degrees_below_threshold(self, rng):
        g = random_graph(12, 0.5, rng)
        c = 3
        _, residual = peel_high_degree(g, c)
        adj = g.adjacency()
        for u in residual:
            assert sum(1 for v in residual if v != u and adj[u, v]) < c

    def test_stop_size(self, rng):
        adj = np.array(complete(10).adjacency())
        order, alive = peel_adjacency(adj, 2, stop_size=6)
        assert alive.sum() == 6
        assert len(order) == 4

    def test_reinsertion_preserves_c_connectivity(self):
        # Peel a graph built around a c-connected core, then re-add the peel
        # order in reverse: connectivity never drops below c.
        rng = np.random.default_rng(7)
        c = 3
        for trial in range(3):
            core_edges = harary_overlay(list(range(8)), c)
            extra = []
            n = 14
            for u in range(8, n):
                targets = rng.choice(u, size=c + 1, replace=False)
                extra.extend((int(t), u) for t in targets)
            g = Graph(n, list(core_edges) + extra)
            order, residual = peel_high_degree(g, c)
            adj = g.adjacency()
            present = sorted(residual)
            if len(present) <= c:
                continue
            sub = adj[np.ix_(present, present)]
            su, sv = np.nonzero(np.triu(sub, 1))
            current = Graph.from_arrays(len(present), su, sv)
            if vertex_connectivity(current) < c:
                continue
            for v in reversed(order):
                present = sorted(present + [v])
                sub = adj[np.ix_(present, present)]
                su, sv = np.nonzero(np.triu(sub, 1))
                assert vertex_connectivity(Graph.from_arrays(len(present), su, sv)) >= c


class TestIntervalConnectivity:
    def test_t1_equals_per_round_connectivity(self, rng):
        graphs = [random_graph(6, 0.4, rng) for _ in range(6)]
        trace = DynamicTrace(6, graphs)
        assert interval_connectivity_ok(trace, 1) == all(is_connected(g) for g in graphs)

    def test_constant_connected_trace_any_t(self):
        g = cycle(6)
        trace = DynamicTrace(6, [g] * 8)
        for T in (1, 2, 4, 8):
            assert interval_connectivity_ok(trace, T)

    def test_alternating_edge_disjoint_spanning_trees(self):
        t1 = Graph(4, [(0, 1), (1, 2), (2, 3)])
        t2 = Graph(4, [(0, 2), (0, 3), (1, 3)])
        assert not (t1.edge_set() & t2.edge_set())
        trace = DynamicTrace(4, [t1, t2] * 4)
        assert interval_connectivity_ok(trace, 1)
        assert not interval_connectivity_ok(trace, 2)

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError):
            interval_connectivity_ok(DynamicTrace(3, []), 0)

    def test_short_trace_uses_all_rounds(self):
        disconnected = Graph(4, [(0, 1)])
        trace = DynamicTrace(4, [disconnected])
        assert not interval_connectivity_ok(trace, 3)


class TestAugmentation:
    @pytest.mark.parametrize("seed,c", [(0, 2), (1, 3), (2, 4), (3, 2)])
    def test_augments_random_graphs(self, seed, c):
        rng = np.random.default_rng(seed)
        n = 10
        g = random_graph(n, 0.3, rng)
        adj = np.array(g.adjacency())
        added = augment_to_c_connected(adj, c)
        out = g.union(added)
        assert vertex_connectivity(out) >= c

    def test_no_additions_when_already_connected(self):
        g = Graph(6, harary_overlay(list(range(6)), 3))
        assert augment_to_c_connected(np.array(g.adjacency()), 3) == []

    def test_clique_hint_path(self):
        # nodes 0..3 form a clique; rest hangs off sparsely
        edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        edges += [(3, 4), (4, 5), (5, 6)]
        g = Graph(7, edges)
        adj = np.array(g.adjacency())
        added = augment_to_c_connected(adj, 2, clique=[0, 1, 2, 3])
        assert vertex_connectivity(g.union(added)) >= 2

    def test_budget_enforced(self):
        adj = np.zeros((8, 8), dtype=bool)
        with pytest.raises(ConstructionError):
            augment_to_c_connected(adj, 4, max_added=2)

    def test_impossible_size(self):
        with pytest.raises(ValueError):
            augment_to_c_connected(np.zeros((3, 3), dtype=bool), 3)

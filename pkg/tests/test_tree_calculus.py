"""Tree enumeration, potentials, elevations, barriers, coradius."""

import math

import numpy as np
import pytest

import evobarrier as eb
from helpers import brute_force_elevation, brute_force_trees, random_graph


def barrier_closed_form(a, b, N):
    return b if a >= b else (b - a) * N + a


class TestEnumeration:
    def test_unique_zero_tree_in_chain(self):
        graph = eb.example1(2.0, 1.0, 1).graph
        trees = eb.enumerate_trees(graph, "0")
        assert len(trees) == 1
        assert set(trees[0].edges) == {("-1", "0"), ("1", "0")}
        assert trees[0].cost == 2.0  # 2*b

    def test_two_state_graph_one_tree_per_root(self):
        cost = np.array([[0.0, 1.5], [0.5, 0.0]])
        graph = eb.CostGraph(("a", "b"), cost)
        assert len(eb.enumerate_trees(graph, "a")) == 1
        assert len(eb.enumerate_trees(graph, "b")) == 1

    def test_complete_three_state_graph_matches_brute_force(self):
        cost = np.ones((3, 3))
        np.fill_diagonal(cost, 0.0)
        graph = eb.CostGraph(("a", "b", "c"), cost)
        trees = eb.enumerate_trees(graph, "a")
        oracle = brute_force_trees(graph, "a")
        assert len(trees) == 3
        assert {t.edges for t in trees} == {e for e, _ in oracle}

    @pytest.mark.parametrize("seed", range(8))
    def test_enumeration_matches_brute_force(self, seed):
        rng = np.random.default_rng(4000 + seed)
        graph = random_graph(rng, int(rng.integers(2, 6)))
        for root in graph.states:
            mine = {(t.edges, t.cost) for t in eb.enumerate_trees(graph, root)}
            theirs = set(brute_force_trees(graph, root))
            assert mine == theirs

    def test_cap_exceeded(self):
        cost = np.ones((6, 6))
        np.fill_diagonal(cost, 0.0)
        graph = eb.CostGraph(tuple("abcdef"), cost)
        with pytest.raises(eb.EnumerationCapError, match="cap=10"):
            eb.enumerate_trees(graph, "a", cap=10)

    def test_tree_invariants(self):
        graph = eb.example2().graph
        for root in graph.states:
            for tree in eb.enumerate_trees(graph, root):
                tails = [a for a, _ in tree.edges]
                assert sorted(tails) == sorted(set(graph.states) - {root})
                assert root not in tails
                assert math.isfinite(tree.cost)


class TestQuasiPotential:
    @pytest.mark.parametrize("a,b,N", [(2.0, 1.0, 3), (3.0, 1.0, 2), (2.0, 2.0, 2)])
    def test_chain_closed_form_a_ge_b(self, a, b, N):
        graph = eb.example1(a, b, N).graph
        report = eb.quasi_potential(graph)
        for i, s in enumerate(graph.states):
            x = abs(int(s))
            assert report.tilde_V[i] == pytest.approx(2 * N * b + (a - b) * x)

    def test_uniform_cost_model_flat_potential(self):
        graph = eb.example3(5, 1.0).graph
        report = eb.quasi_potential(graph)
        assert np.all(report.tilde_V == 4.0)
        assert np.all(report.V == 0.0)

    def test_example2_values(self):
        report = eb.quasi_potential(eb.example2().graph)
        assert list(report.tilde_V) == [3.0, 2.0, 2.0, 3.0]
        assert list(report.V) == [1.0, 0.0, 0.0, 1.0]
        assert report.c0 == 2.0
        assert report.S0 == {"TR", "BL"}

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_enumeration_minimum(self, seed):
        rng = np.random.default_rng(5000 + seed)
        graph = random_graph(rng, int(rng.integers(2, 7)))
        report = eb.quasi_potential(graph)
        for i, root in enumerate(graph.states):
            oracle = min(t.cost for t in eb.enumerate_trees(graph, root))
            assert report.tilde_V[i] == pytest.approx(oracle, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_min_V_is_exactly_zero(self, seed):
        rng = np.random.default_rng(6000 + seed)
        graph = random_graph(rng, int(rng.integers(2, 7)))
        assert eb.quasi_potential(graph).V.min() == 0.0


class TestTreeGap:
    def test_chain_gap_is_cost_difference(self):
        assert eb.tree_gap(eb.example1(2.0, 1.0, 3).graph) == 1.0
        assert eb.tree_gap(eb.example1(1.0, 2.0, 3).graph) == 1.0
        assert eb.tree_gap(eb.example1(3.0, 1.0, 2).graph) == 2.0

    def test_equal_costs_gap_infinite(self):
        assert eb.tree_gap(eb.example1(2.0, 2.0, 2).graph) == math.inf

    def test_example2_gap(self):
        assert eb.tree_gap(eb.example2().graph) == 1.0

    @pytest.mark.parametrize("seed", range(8))
    def test_gap_positive_or_infinite(self, seed):
        rng = np.random.default_rng(7000 + seed)
        graph = random_graph(rng, int(rng.integers(2, 6)))
        theta = eb.tree_gap(graph)
        costs = [
            t.cost for s in graph.states for t in eb.enumerate_trees(graph, s)
        ]
        if math.isinf(theta):
            assert max(costs) - min(costs) == 0.0
        else:
            assert theta > 0.0


class TestEdgePotential:
    def test_chain_closed_form(self):
        a, b, N = 2.0, 1.0, 3
        graph = eb.example1(a, b, N).graph
        report = eb.quasi_potential(graph)
        for x in range(0, N):
            w = eb.edge_potential(report, graph, str(x), str(x + 1))
            assert w == pytest.approx((a - b) * (x + 1) + b)

    def test_one_sided_edge(self):
        cost = np.array([[0.0, 2.0], [math.inf, 0.0]])
        cost[1, 0] = 1.0  # make admissible; then hide one direction
        graph = eb.CostGraph(("a", "b"), cost)
        report = eb.quasi_potential(graph)
        cost2 = np.array([[0.0, 2.0], [1.0, 0.0]])
        assert eb.edge_potential(report, graph, "a", "b") == min(
            report.V[0] + 2.0, report.V[1] + 1.0
        )

    @pytest.mark.parametrize("seed", range(6))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(8000 + seed)
        graph = random_graph(rng, 5)
        report = eb.quasi_potential(graph)
        for x in graph.states:
            for y in graph.states:
                if x < y:
                    assert eb.edge_potential(report, graph, x, y) == eb.edge_potential(
                        report, graph, y, x
                    )


class TestElevation:
    def test_chain_closed_form(self):
        a, b, N = 2.0, 1.0, 3
        graph = eb.example1(a, b, N).graph
        for x, y in [(-3, 3), (-1, 2), (1, 3)]:
            val, path = eb.elevation(graph, str(x), str(y))
            expect = max((a - b) * abs(x) + b, (a - b) * abs(y) + b)
            assert val == pytest.approx(expect)
            assert path[0] == str(x) and path[-1] == str(y)

    def test_witness_path_attains_value(self):
        graph = eb.example2().graph
        report = eb.quasi_potential(graph)
        val, path = eb.elevation(graph, "TL", "BR", report=report)
        W = np.minimum(
            report.V[:, None] + graph.cost, (report.V[:, None] + graph.cost).T
        )
        along = max(
            W[graph.index(u), graph.index(v)] for u, v in zip(path[:-1], path[1:])
        )
        assert along == pytest.approx(val)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_brute_force_minimax(self, seed):
        rng = np.random.default_rng(9000 + seed)
        graph = random_graph(rng, 6)
        report = eb.quasi_potential(graph)
        states = graph.states
        x, y = rng.choice(len(states), size=2, replace=False)
        val, _ = eb.elevation(graph, states[x], states[y], report=report)
        oracle = brute_force_elevation(graph, report.V, states[x], states[y])
        assert val == pytest.approx(oracle, abs=1e-12)

    def test_symmetric_in_endpoints(self):
        rng = np.random.default_rng(123)
        graph = random_graph(rng, 5)
        for x in graph.states:
            for y in graph.states:
                if x < y:
                    assert eb.elevation(graph, x, y)[0] == pytest.approx(
                        eb.elevation(graph, y, x)[0]
                    )


class TestEnergyBarrier:
    def test_chain_closed_form_sweep(self):
        for a in (1.0, 2.0, 3.0):
            for b in (1.0, 2.0, 3.0):
                for N in (1, 2, 3):
                    graph = eb.example1(a, b, N).graph
                    assert eb.energy_barrier(graph) == barrier_closed_form(a, b, N)

    def test_example2_barrier_and_witness(self):
        barrier, witness = eb.energy_barrier(eb.example2().graph, with_witness=True)
        assert barrier == 1.0
        assert set(witness) in ({"TL", "TR"}, {"TL", "BL"}, {"BR", "TR"}, {"BR", "BL"})

    def test_nonnegative(self):
        rng = np.random.default_rng(321)
        for _ in range(10):
            graph = random_graph(rng, int(rng.integers(2, 6)))
            assert eb.energy_barrier(graph) >= 0.0


class TestResistanceCoradius:
    def test_chain_resistance_to_origin(self):
        b = 1.0
        graph = eb.example1(2.0, b, 3).graph
        for x in range(-3, 4):
            assert eb.resistance(graph, str(x), {"0"}) == b * abs(x)

    def test_inside_target_is_zero(self):
        graph = eb.example2().graph
        assert eb.resistance(graph, "TL", {"TL", "BR"}) == 0.0

    def test_example2_resistances(self):
        graph = eb.example2().graph
        assert eb.resistance(graph, "TL", {"TR"}) == 1.0

    def test_chain_coradius_closed_form(self):
        a, b, N = 2.0, 1.0, 3
        graph = eb.example1(a, b, N).graph
        for x in range(-N, N + 1):
            assert eb.coradius(graph, {str(x)}) == b * N + a * abs(x)
        assert eb.min_coradius(graph) == b * N

    def test_example2_coradius(self):
        graph = eb.example2().graph
        assert eb.coradius(graph, {"TR"}) == 1.0
        assert eb.coradius(graph, {"TL"}) == 3.0
        assert eb.min_coradius(graph) == 1.0

    def test_full_target_zero(self):
        graph = eb.example2().graph
        assert eb.coradius(graph, set(graph.states)) == 0.0

    def test_empty_target_error(self):
        graph = eb.example2().graph
        with pytest.raises(ValueError):
            eb.coradius(graph, set())

    @pytest.mark.parametrize("seed", range(40))
    def test_barrier_below_min_coradius(self, seed):
        rng = np.random.default_rng(10_000 + seed)
        graph = random_graph(rng, int(rng.integers(2, 7)))
        assert eb.energy_barrier(graph) <= eb.min_coradius(graph) + 1e-12


class TestFullReport:
    def test_contains_all_pieces(self):
        report = eb.full_report(eb.example2().graph)
        assert report.theta == 1.0
        assert report.energy_barrier == 1.0
        assert report.barrier_witness is not None
        assert report.W is not None
        assert report.elevation_values is not None

from itertools import combinations

import numpy as np
import pytest

from treegen.graph import GraphError, SpatialGraph, is_tree
from treegen.mst import (
    EdgeProbabilities,
    all_pairs,
    pair_index,
    project,
    project_mst,
    threshold_edges,
)


def probs_from_neg(n, neg_by_pair):
    return EdgeProbabilities.from_pairs(
        n, {pair: (1.0 - c, c) for pair, c in neg_by_pair.items()}
    )


def as_graph(n, edges):
    coords = tuple((k / max(n - 1, 1), 0.0) for k in range(n))
    return SpatialGraph(coords, frozenset(edges))


def test_pair_index_lexicographic():
    n = 5
    for k, (i, j) in enumerate(all_pairs(n)):
        assert pair_index(i, j, n) == k


class TestThreshold:
    def test_direct_comparison(self):
        p = EdgeProbabilities.from_pairs(
            3, {(0, 1): (0.9, 0.1), (0, 2): (0.2, 0.8), (1, 2): (0.2, 0.8)}
        )
        assert threshold_edges(p) == {(0, 1)}

    def test_ties_excluded(self):
        p = EdgeProbabilities.from_pairs(
            3, {pair: (0.5, 0.5) for pair in all_pairs(3)}
        )
        assert threshold_edges(p) == frozenset()

    def test_complete(self):
        p = EdgeProbabilities.from_pairs(
            3, {pair: (1.0, 0.0) for pair in all_pairs(3)}
        )
        assert threshold_edges(p) == frozenset(all_pairs(3))


class TestProjectMst:
    def test_k3_brute_force(self):
        # cheapest two of the three spanning trees of K3
        p = probs_from_neg(3, {(0, 1): 0.1, (0, 2): 0.2, (1, 2): 0.9})
        assert project_mst(p) == {(0, 1), (0, 2)}

    def test_single_node(self):
        p = EdgeProbabilities(1, np.zeros(0), np.zeros(0))
        assert project_mst(p) == frozenset()

    def test_equal_cost_tie_break(self):
        # all costs equal: Kruskal with (cost, i, j) order takes the star at 0
        p = probs_from_neg(4, {pair: 0.5 for pair in all_pairs(4)})
        assert project_mst(p) == {(0, 1), (0, 2), (0, 3)}

    def test_exhaustive_minimum(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(2, 7))
            neg = {pair: float(c) for pair, c in zip(all_pairs(n), rng.random(len(all_pairs(n))))}
            tree = project_mst(probs_from_neg(n, neg))
            assert is_tree(as_graph(n, tree))
            best = min(
                sum(neg[e] for e in cand)
                for cand in combinations(all_pairs(n), n - 1)
                if is_tree(as_graph(n, frozenset(cand)))
            )
            assert sum(neg[e] for e in tree) == pytest.approx(best, abs=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        neg = {pair: float(c) for pair, c in zip(all_pairs(6), rng.random(15))}
        p = probs_from_neg(6, neg)
        results = {project_mst(p) for _ in range(5)}
        assert len(results) == 1


class TestProject:
    def test_fixed_point_delta_empty(self):
        # unconstrained edges already the minimal spanning tree
        p = probs_from_neg(3, {(0, 1): 0.1, (0, 2): 0.2, (1, 2): 0.9})
        edges, delta = project(p)
        assert edges == {(0, 1), (0, 2)}
        assert delta.removed == frozenset()  # (1,2) has y+ < 0.5, not thresholded

    def test_removed_from_complete(self):
        p = probs_from_neg(3, {(0, 1): 0.1, (0, 2): 0.2, (1, 2): 0.4})
        edges, delta = project(p)
        assert delta.removed == {(1, 2)}
        assert delta.added == frozenset()

    def test_added_from_empty(self):
        p = probs_from_neg(3, {(0, 1): 0.6, (0, 2): 0.7, (1, 2): 0.9})
        edges, delta = project(p)
        assert delta.added == edges
        assert delta.removed == frozenset()

    def test_idempotent_on_own_output(self):
        rng = np.random.default_rng(5)
        eps = 1e-6
        for _ in range(50):
            n = int(rng.integers(2, 7))
            neg = {pair: float(c) for pair, c in zip(all_pairs(n), rng.random(len(all_pairs(n))))}
            tree = project_mst(probs_from_neg(n, neg))
            encoded = probs_from_neg(
                n, {pair: (eps if pair in tree else 1.0 - eps) for pair in all_pairs(n)}
            )
            assert project_mst(encoded) == tree


class TestValidation:
    def test_normalization_enforced(self):
        with pytest.raises(GraphError, match="sum to 1"):
            EdgeProbabilities(2, np.array([0.7]), np.array([0.7]))

    def test_entry_count(self):
        with pytest.raises(GraphError, match="pair entries"):
            EdgeProbabilities(3, np.array([0.5]), np.array([0.5]))

    def test_json_round_trip(self):
        p = probs_from_neg(4, {pair: 0.25 for pair in all_pairs(4)})
        q = EdgeProbabilities.from_json_obj(p.to_json_obj())
        assert q.n == p.n
        assert np.array_equal(q.pos, p.pos)

import itertools
import math

import numpy as np
import pytest

from treegen.graph import GraphError, SpatialGraph, save_graph
from treegen.metrics import (
    evaluate_dataset,
    sample_edge_points,
    smd,
    topo_score,
    tree_rate,
)


def make(coords, edges=()):
    return SpatialGraph(tuple(coords), frozenset(edges))


def single_edge(y=0.5, x0=0.0, x1=1.0):
    return make([(x0, y), (x1, y)], [(0, 1)])


class TestSampling:
    def test_midpoint_of_halves(self):
        pts = sample_edge_points(single_edge(), k=2)
        assert sorted(p[0] for p in pts) == pytest.approx([0.25, 0.75])

    def test_points_on_segments(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            coords = [(float(x), float(y)) for x, y in rng.random((5, 2))]
            g = make(coords, [(0, 1), (1, 2), (2, 3), (3, 4)])
            pts = sample_edge_points(g, k=50)
            for p in pts:
                dmin = min(
                    _point_segment_dist(p, coords[i], coords[j]) for i, j in g.edges
                )
                assert dmin <= 1e-12

    def test_proportional_allocation(self):
        g = make([(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)], [(0, 1), (1, 2)])
        pts = sample_edge_points(g, k=4)
        assert sum(1 for p in pts if p[0] <= 0.5) == 2

    def test_edgeless_graph_centroid(self):
        g = make([(0.0, 0.0), (1.0, 1.0)])
        pts = sample_edge_points(g, k=3)
        assert np.allclose(pts, 0.5)

    def test_empty_graph_error(self):
        with pytest.raises(GraphError):
            sample_edge_points(make([]), k=3)


def _point_segment_dist(p, a, b):
    a, b, p = np.array(a), np.array(b), np.array(p)
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0, 1)
    return float(np.linalg.norm(p - (a + t * ab)))


class TestSmd:
    def test_identity(self):
        g = single_edge()
        assert smd(g, g) == 0.0

    def test_translation_squared(self):
        delta = 0.1
        assert smd(single_edge(x0=0.0, x1=0.5), single_edge(x0=delta, x1=0.5 + delta)) == (
            pytest.approx(delta**2, abs=1e-9)
        )

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = make([(float(x), float(y)) for x, y in rng.random((4, 2))], [(0, 1), (2, 3)])
        b = make([(float(x), float(y)) for x, y in rng.random((4, 2))], [(0, 2), (1, 3)])
        assert smd(a, b) == pytest.approx(smd(b, a), abs=1e-15)

    def test_matches_permutation_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            k = int(rng.integers(2, 7))
            a = make([(float(x), float(y)) for x, y in rng.random((3, 2))], [(0, 1), (1, 2)])
            b = make([(float(x), float(y)) for x, y in rng.random((3, 2))], [(0, 1), (0, 2)])
            pa, pb = sample_edge_points(a, k), sample_edge_points(b, k)
            brute = min(
                sum(np.sum((pa[i] - pb[p[i]]) ** 2) for i in range(k)) / k
                for p in itertools.permutations(range(k))
            )
            assert smd(a, b, k) == pytest.approx(brute, abs=1e-9)


def star(center, leaves):
    coords = [center] + list(leaves)
    return make(coords, [(0, k) for k in range(1, len(coords))])


class TestTopoScore:
    def test_identical(self):
        g = star((0.5, 0.5), [(0.1, 0.5), (0.9, 0.5), (0.5, 0.9)])
        assert topo_score(g, g) == (1.0, 1.0, 1.0)

    def test_all_keypoints_too_far(self):
        a = star((0.2, 0.2), [(0.1, 0.2), (0.3, 0.2)])
        b = star((0.8, 0.8), [(0.7, 0.8), (0.9, 0.8)])
        assert topo_score(a, b) == (0.0, 0.0, 0.0)

    def test_missing_leaf(self):
        # dropping one leaf demotes the predicted hub to degree 2, so only
        # the two remaining leaves can match the four ground-truth keypoints
        gt = star((0.5, 0.5), [(0.1, 0.5), (0.9, 0.5), (0.5, 0.9)])
        pred = make([(0.5, 0.5), (0.1, 0.5), (0.9, 0.5)], [(0, 1), (0, 2)])
        p, r, f1 = topo_score(pred, gt)
        assert p == 1.0
        assert r == pytest.approx(0.5)

    def test_degree_mismatch_not_tp(self):
        gt = star((0.5, 0.5), [(0.1, 0.5), (0.9, 0.5), (0.5, 0.9)])
        pred = star((0.5, 0.5), [(0.1, 0.5), (0.9, 0.5), (0.5, 0.9), (0.5, 0.1)])
        p, r, f1 = topo_score(pred, gt)
        # hub degrees differ (4 vs 3); the three shared leaves still match
        assert p == pytest.approx(3 / 5)
        assert r == pytest.approx(3 / 4)

    def test_relabeling_invariance(self):
        gt = star((0.5, 0.5), [(0.1, 0.5), (0.9, 0.5), (0.5, 0.9)])
        relabeled = make(
            [(0.1, 0.5), (0.5, 0.5), (0.5, 0.9), (0.9, 0.5)],
            [(0, 1), (1, 3), (1, 2)],
        )
        assert topo_score(relabeled, gt) == (1.0, 1.0, 1.0)

    def test_empty_conventions(self):
        cycle4 = make(
            [(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)],
            [(0, 1), (1, 2), (2, 3), (0, 3)],
        )
        keypointed = star((0.5, 0.5), [(0.1, 0.5)])
        p, r, f1 = topo_score(cycle4, keypointed)
        assert p == 1.0 and r == 0.0
        p, r, f1 = topo_score(keypointed, cycle4)
        assert p == 0.0 and r == 1.0

    def test_bad_radius(self):
        g = single_edge()
        with pytest.raises(GraphError):
            topo_score(g, g, radius=0.0)


class TestTreeRate:
    def test_mixed(self):
        tree = single_edge()
        cycle = make([(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)], [(0, 1), (1, 2), (0, 2)])
        assert tree_rate([tree, cycle]) == 0.5

    def test_empty_list(self):
        with pytest.raises(GraphError):
            tree_rate([])


class TestEvaluateDataset:
    def _write(self, d, graphs):
        d.mkdir(parents=True, exist_ok=True)
        for k, g in enumerate(graphs):
            save_graph(g, d / f"{k:03d}.json")

    def test_self_evaluation(self, tmp_path):
        graphs = [
            single_edge(),
            star((0.5, 0.5), [(0.1, 0.5), (0.9, 0.5), (0.5, 0.9)]),
        ]
        self._write(tmp_path / "pred", graphs)
        self._write(tmp_path / "gt", graphs)
        report = evaluate_dataset(tmp_path / "pred", tmp_path / "gt")
        assert report.smd == 0.0
        assert report.topo_f1 == 1.0
        assert report.tree_rate == 1.0
        assert report.n == 2

    def test_orphan_detection(self, tmp_path):
        self._write(tmp_path / "pred", [single_edge()])
        self._write(tmp_path / "gt", [single_edge(), single_edge()])
        with pytest.raises(GraphError, match="unmatched"):
            evaluate_dataset(tmp_path / "pred", tmp_path / "gt")

    def test_malformed_file_named(self, tmp_path):
        self._write(tmp_path / "pred", [single_edge()])
        self._write(tmp_path / "gt", [single_edge()])
        (tmp_path / "pred" / "000.json").write_text("{broken")
        with pytest.raises(GraphError, match="000.json"):
            evaluate_dataset(tmp_path / "pred", tmp_path / "gt")

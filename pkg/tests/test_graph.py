import json

import numpy as np
import pytest

from treegen.graph import (
    EdgeDelta,
    GraphError,
    SpatialGraph,
    edge_delta,
    is_tree,
    load_graph,
    save_graph,
)


def make(coords, edges=()):
    return SpatialGraph(tuple(coords), frozenset(edges))


class TestIsTree:
    def test_path_graph(self):
        g = make([(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)], [(0, 1), (1, 2)])
        assert is_tree(g)

    def test_cycle(self):
        g = make([(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)], [(0, 1), (1, 2), (0, 2)])
        assert not is_tree(g)

    def test_single_node(self):
        assert is_tree(make([(0.2, 0.2)]))

    def test_empty_graph(self):
        assert is_tree(make([]))

    def test_disconnected_forest(self):
        g = make([(0.0, 0.0), (0.1, 0.1), (0.9, 0.9), (1.0, 1.0)], [(0, 1), (2, 3)])
        assert not is_tree(g)


def random_graph(rng, n_max=8):
    n = int(rng.integers(1, n_max + 1))
    coords = [(float(x), float(y)) for x, y in rng.random((n, 2))]
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.3:
                edges.add((i, j))
    return make(coords, edges)


def connected(g):
    if g.n == 0:
        return True
    adj = g.adjacency()
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == g.n


def acyclic(g):
    # union-find cycle detection
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in g.edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def test_tree_characterizations_agree():
    rng = np.random.default_rng(0)
    for _ in range(500):
        g = random_graph(rng)
        count_def = connected(g) and len(g.edges) == g.n - 1
        acyclic_def = connected(g) and acyclic(g)
        assert is_tree(g) == count_def == acyclic_def


class TestEdgeDelta:
    def test_identical_sets(self):
        d = edge_delta({(0, 1)}, {(0, 1)})
        assert d.empty

    def test_set_difference(self):
        d = edge_delta({(0, 1), (0, 2)}, {(0, 1), (1, 2)})
        assert d.added == {(1, 2)}
        assert d.removed == {(0, 2)}

    def test_from_empty(self):
        d = edge_delta(set(), {(0, 1)})
        assert d.added == {(0, 1)} and not d.removed

    def test_overlap_rejected(self):
        with pytest.raises(GraphError):
            EdgeDelta(frozenset({(0, 1)}), frozenset({(0, 1)}))

    def test_reconstruction(self):
        rng = np.random.default_rng(1)
        pairs = [(i, j) for i in range(6) for j in range(i + 1, 6)]
        for _ in range(300):
            a = frozenset(p for p in pairs if rng.random() < 0.5)
            b = frozenset(p for p in pairs if rng.random() < 0.5)
            d = edge_delta(a, b)
            assert (a - d.removed) | d.added == b


class TestSerialization:
    def test_round_trip_random(self, tmp_path):
        rng = np.random.default_rng(2)
        path = tmp_path / "g.json"
        for _ in range(1000):
            g = random_graph(rng)
            save_graph(g, path)
            assert load_graph(path) == g

    def test_dangling_edge(self, tmp_path):
        path = tmp_path / "bad.json"
        obj = {
            "nodes": [{"id": 0, "x": 0.1, "y": 0.1}, {"id": 1, "x": 0.2, "y": 0.2},
                      {"id": 2, "x": 0.3, "y": 0.3}],
            "edges": [[0, 99]],
        }
        path.write_text(json.dumps(obj))
        with pytest.raises(GraphError, match="edge"):
            load_graph(path)

    def test_out_of_range_coordinate(self, tmp_path):
        path = tmp_path / "bad.json"
        obj = {"nodes": [{"id": 0, "x": 1.5, "y": 0.0}], "edges": []}
        path.write_text(json.dumps(obj))
        with pytest.raises(GraphError, match="coordinate"):
            load_graph(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(GraphError, match="JSON"):
            load_graph(path)

    def test_non_contiguous_ids(self, tmp_path):
        path = tmp_path / "bad.json"
        obj = {"nodes": [{"id": 1, "x": 0.5, "y": 0.5}], "edges": []}
        path.write_text(json.dumps(obj))
        with pytest.raises(GraphError, match="contiguous"):
            load_graph(path)

"""Projection of edge probabilities onto a minimum spanning tree.

Edge costs are the per-pair non-existence probabilities; Kruskal's algorithm
with (cost, i, j) lexicographic tie-breaking spans the complete graph on the
node set, so the result is deterministic and always a tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import Edge, EdgeDelta, GraphError, edge_delta

__all__ = [
    "EdgeProbabilities",
    "pair_index",
    "all_pairs",
    "threshold_edges",
    "project_mst",
    "project",
]

_NORM_TOL = 1e-9


def pair_index(i: int, j: int, n: int) -> int:
    """Index of pair (i, j), i<j, in lexicographic order over n nodes."""
    if not 0 <= i < j < n:
        raise GraphError(f"invalid pair ({i}, {j}) for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def all_pairs(n: int) -> list[Edge]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


@dataclass(frozen=True)
class EdgeProbabilities:
    """Per-pair (existence, non-existence) probabilities over n nodes.

    ``pos[k]`` / ``neg[k]`` belong to the k-th pair in lexicographic i<j
    order; each pair sums to 1.
    """

    n: int
    pos: np.ndarray
    neg: np.ndarray

    def __post_init__(self) -> None:
        m = self.n * (self.n - 1) // 2
        if self.pos.shape != (m,) or self.neg.shape != (m,):
            raise GraphError(f"expected {m} pair entries for n={self.n}")
        if m == 0:
            return
        if np.any(self.pos < -_NORM_TOL) or np.any(self.pos > 1 + _NORM_TOL):
            raise GraphError("existence probabilities outside [0, 1]")
        if np.any(np.abs(self.pos + self.neg - 1.0) > _NORM_TOL):
            raise GraphError("pair probabilities must sum to 1")

    def pair(self, i: int, j: int) -> tuple[float, float]:
        k = pair_index(i, j, self.n)
        return float(self.pos[k]), float(self.neg[k])

    @classmethod
    def from_pairs(cls, n: int, entries: dict[Edge, tuple[float, float]]) -> "EdgeProbabilities":
        m = n * (n - 1) // 2
        pos = np.empty(m)
        neg = np.empty(m)
        for (i, j), (p, q) in entries.items():
            k = pair_index(i, j, n)
            pos[k] = p
            neg[k] = q
        if len(entries) != m:
            raise GraphError(f"expected {m} entries, got {len(entries)}")
        return cls(n, pos, neg)

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "probs": [
                {"i": i, "j": j, "pos": float(self.pos[k]), "neg": float(self.neg[k])}
                for k, (i, j) in enumerate(all_pairs(self.n))
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EdgeProbabilities":
        try:
            n = int(obj["n"])
            entries = {
                (int(r["i"]), int(r["j"])): (float(r["pos"]), float(r["neg"]))
                for r in obj["probs"]
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed probabilities object: {exc}") from exc
        return cls.from_pairs(n, entries)

    @classmethod
    def load(cls, path) -> "EdgeProbabilities":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_obj(json.load(fh))


def threshold_edges(p: EdgeProbabilities) -> frozenset[Edge]:
    """Edge set where existence strictly beats non-existence; ties excluded."""
    return frozenset(
        (i, j) for k, (i, j) in enumerate(all_pairs(p.n)) if p.pos[k] > p.neg[k]
    )


class _UnionFind:
    """Union-find with path compression and union by rank."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def kruskal(n: int, costs: dict[Edge, float]) -> frozenset[Edge]:
    """Deterministic Kruskal MST over explicit pair costs.

    Edges are processed in (cost, i, j) lexicographic order so equal-cost
    trees resolve identically across runs.
    """
    order = sorted(costs, key=lambda e: (costs[e], e[0], e[1]))
    uf = _UnionFind(n)
    tree = []
    for i, j in order:
        if uf.union(i, j):
            tree.append((i, j))
            if len(tree) == n - 1:
                break
    return frozenset(tree)


def project_mst(p: EdgeProbabilities) -> frozenset[Edge]:
    """MST edge set of the complete graph with non-existence as edge cost."""
    if p.n <= 1:
        return frozenset()
    costs = {(i, j): float(p.neg[k]) for k, (i, j) in enumerate(all_pairs(p.n))}
    return kruskal(p.n, costs)


def project(p: EdgeProbabilities) -> tuple[frozenset[Edge], EdgeDelta]:
    """Project unconstrained probabilities onto a tree edge set.

    Returns the projected edges and the delta against the thresholded set;
    the node set is never modified.
    """
    tree = project_mst(p)
    return tree, edge_delta(threshold_edges(p), tree)

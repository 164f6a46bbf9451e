"""Spatial graph data model and JSON serialization.

A :class:`SpatialGraph` is an undirected graph whose nodes carry 2D
coordinates in the normalized unit square. Node ids are contiguous from 0,
edges are stored canonically with the smaller id first. All instances are
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

__all__ = [
    "GraphError",
    "SpatialGraph",
    "EdgeDelta",
    "canonical_edge",
    "is_tree",
    "edge_delta",
    "load_graph",
    "save_graph",
]

Edge = tuple[int, int]


class GraphError(ValueError):
    """Raised for malformed graphs or graph files."""


def canonical_edge(i: int, j: int) -> Edge:
    """Return the (min, max) form of a node pair. Self-loops are invalid."""
    if i == j:
        raise GraphError(f"self-loop on node {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SpatialGraph:
    """Immutable undirected graph with [0,1]^2 node coordinates.

    ``coords[k]`` is the (x, y) position of node k; edges are a frozenset of
    (i, j) pairs with i < j.
    """

    coords: tuple[tuple[float, float], ...]
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        n = len(self.coords)
        for k, (x, y) in enumerate(self.coords):
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise GraphError(f"node {k}: coordinate ({x}, {y}) outside [0,1]^2")
        seen = set()
        for e in self.edges:
            i, j = e
            if not (0 <= i < j < n):
                raise GraphError(f"edge {e}: invalid or non-canonical node pair (n={n})")
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)

    @classmethod
    def from_nodes(
        cls, nodes: Iterable[tuple[int, float, float]], edges: Iterable[Edge] = ()
    ) -> "SpatialGraph":
        """Build from explicit (id, x, y) triples; ids must be 0..n-1 in order."""
        coords = []
        for k, (nid, x, y) in enumerate(nodes):
            if nid != k:
                raise GraphError(f"node ids must be contiguous from 0, got id {nid} at position {k}")
            coords.append((float(x), float(y)))
        return cls(tuple(coords), frozenset(canonical_edge(i, j) for i, j in edges))

    @property
    def n(self) -> int:
        return len(self.coords)

    def degree(self, k: int) -> int:
        return sum(1 for (i, j) in self.edges if i == k or j == k)

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


@dataclass(frozen=True)
class EdgeDelta:
    """Edges added / removed by a projection relative to a thresholded set."""

    added: frozenset[Edge] = field(default_factory=frozenset)
    removed: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        overlap = self.added & self.removed
        if overlap:
            raise GraphError(f"delta sets overlap: {sorted(overlap)}")

    @property
    def empty(self) -> bool:
        return not self.added and not self.removed


def is_tree(g: SpatialGraph) -> bool:
    """True iff the graph is a spanning tree of its node set.

    For 0 or 1 nodes the graph is a (degenerate) tree iff it has no edges.
    """
    n = g.n
    if n <= 1:
        return not g.edges
    if len(g.edges) != n - 1:
        return False
    # connectivity via BFS
    adj = g.adjacency()
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


def edge_delta(unconstrained: Iterable[Edge], constrained: Iterable[Edge]) -> EdgeDelta:
    """Set difference between a thresholded edge set and its projection."""
    before = frozenset(unconstrained)
    after = frozenset(constrained)
    return EdgeDelta(added=after - before, removed=before - after)


def _graph_to_obj(g: SpatialGraph) -> dict:
    return {
        "nodes": [{"id": k, "x": x, "y": y} for k, (x, y) in enumerate(g.coords)],
        "edges": [[i, j] for i, j in sorted(g.edges)],
    }


def save_graph(g: SpatialGraph, path) -> None:
    """Write the canonical JSON representation (full float precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_graph_to_obj(g), fh)
        fh.write("\n")


def graph_from_obj(obj: dict) -> SpatialGraph:
    if not isinstance(obj, dict) or "nodes" not in obj or "edges" not in obj:
        raise GraphError("graph object must contain 'nodes' and 'edges'")
    nodes = []
    for rec in obj["nodes"]:
        try:
            nodes.append((int(rec["id"]), float(rec["x"]), float(rec["y"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed node record {rec!r}: {exc}") from exc
    edges = []
    for rec in obj["edges"]:
        if not isinstance(rec, (list, tuple)) or len(rec) != 2:
            raise GraphError(f"malformed edge record {rec!r}")
        i, j = int(rec[0]), int(rec[1])
        if not i < j:
            raise GraphError(f"edge [{i}, {j}]: smaller id must come first")
        edges.append((i, j))
    return SpatialGraph.from_nodes(nodes, edges)


def load_graph(path) -> SpatialGraph:
    """Load a graph JSON file, validating the schema and invariants."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return graph_from_obj(obj)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from exc

"""Graph evaluation metrics: point-cloud transport distance, keypoint
precision/recall, and tree rate.

The transport distance samples K points uniformly along each graph's edges
and solves the exact optimal assignment between the two clouds with squared
Euclidean cost. Keypoints are nodes of degree != 2; they are matched one-to-one
within a radius, and a match only counts when the degrees agree.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import GraphError, SpatialGraph, is_tree, load_graph

__all__ = [
    "MetricsReport",
    "sample_edge_points",
    "smd",
    "topo_score",
    "tree_rate",
    "evaluate_dataset",
]

DEFAULT_K = 100
DEFAULT_RADIUS = 0.01
_UNMATCHABLE = 1e9


@dataclass(frozen=True)
class MetricsReport:
    smd: float
    topo_precision: float
    topo_recall: float
    topo_f1: float
    tree_rate: float
    n: int

    def to_obj(self) -> dict:
        return {
            "smd": self.smd,
            "topo_precision": self.topo_precision,
            "topo_recall": self.topo_recall,
            "topo_f1": self.topo_f1,
            "tree_rate": self.tree_rate,
            "n": self.n,
        }


def sample_edge_points(g: SpatialGraph, k: int = DEFAULT_K) -> np.ndarray:
    """K points at arc-length positions (m + 0.5) * L / K along the edges.

    Edges are concatenated in canonical sorted order. An edgeless graph with
    nodes degrades to K copies of the node centroid.
    """
    if k < 1:
        raise GraphError("k must be >= 1")
    if g.n == 0:
        raise GraphError("cannot sample points from an empty graph")
    coords = np.array(g.coords)
    edges = sorted(g.edges)
    if not edges:
        centroid = coords.mean(axis=0)
        return np.tile(centroid, (k, 1))
    starts = coords[[i for i, _ in edges]]
    ends = coords[[j for _, j in edges]]
    lengths = np.linalg.norm(ends - starts, axis=1)
    total = lengths.sum()
    if total == 0.0:
        return np.tile(starts[0], (k, 1))
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    targets = (np.arange(k) + 0.5) * total / k
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(edges) - 1)
    local = targets - cum[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(lengths[idx] > 0, local / lengths[idx], 0.0)
    return starts[idx] + frac[:, None] * (ends[idx] - starts[idx])


def cloud_transport_cost(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared-Euclidean cost of the optimal one-to-one assignment."""
    if a.shape != b.shape:
        raise GraphError("point clouds must have equal cardinality")
    diff = a[:, None, :] - b[None, :, :]
    cost = (diff ** 2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / a.shape[0])


def smd(pred: SpatialGraph, gt: SpatialGraph, k: int = DEFAULT_K) -> float:
    """Transport distance between edge point clouds of the two graphs."""
    return cloud_transport_cost(sample_edge_points(pred, k), sample_edge_points(gt, k))


def _keypoints(g: SpatialGraph) -> tuple[np.ndarray, list[int]]:
    deg = g.degrees()
    ids = [k for k in range(g.n) if deg[k] != 2]
    pts = np.array([g.coords[k] for k in ids]).reshape(len(ids), 2)
    return pts, [deg[k] for k in ids]


def topo_score(
    pred: SpatialGraph, gt: SpatialGraph, radius: float = DEFAULT_RADIUS
) -> tuple[float, float, float]:
    """(precision, recall, f1) over degree != 2 keypoints.

    Matching is a one-to-one assignment minimizing total distance among pairs
    within the radius; a matched pair is a true positive only when both node
    degrees agree. With no predicted keypoints precision is 1; with no ground
    truth keypoints recall is 1.
    """
    if radius <= 0:
        raise GraphError("radius must be positive")
    pk, pdeg = _keypoints(pred)
    gk, gdeg = _keypoints(gt)
    np_, ng = len(pdeg), len(gdeg)
    tp = 0
    if np_ and ng:
        dist = np.linalg.norm(pk[:, None, :] - gk[None, :, :], axis=2)
        cost = np.where(dist <= radius, dist, _UNMATCHABLE)
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            if dist[r, c] <= radius and pdeg[r] == gdeg[c]:
                tp += 1
    precision = tp / np_ if np_ else 1.0
    recall = tp / ng if ng else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def tree_rate(graphs) -> float:
    """Fraction of graphs that are spanning trees."""
    graphs = list(graphs)
    if not graphs:
        raise GraphError("tree_rate of an empty list is undefined")
    return sum(1 for g in graphs if is_tree(g)) / len(graphs)


def evaluate_dataset(
    pred_dir,
    gt_dir,
    k: int = DEFAULT_K,
    radius: float = DEFAULT_RADIUS,
    samples_out=None,
) -> MetricsReport:
    """Evaluate matching graph files from two directories.

    Filenames must correspond one-to-one; orphans on either side are an
    error. Per-sample records are appended to ``samples_out`` when given.
    """
    pred_files = sorted(f for f in os.listdir(pred_dir) if f.endswith(".json"))
    gt_files = sorted(f for f in os.listdir(gt_dir) if f.endswith(".json"))
    if pred_files != gt_files:
        orphans = sorted(set(pred_files) ^ set(gt_files))
        raise GraphError(f"unmatched files between directories: {orphans}")
    if not pred_files:
        raise GraphError("no graph files to evaluate")

    smds, precs, recs, f1s = [], [], [], []
    trees = 0
    for name in pred_files:
        pred = load_graph(os.path.join(pred_dir, name))
        gt = load_graph(os.path.join(gt_dir, name))
        s = smd(pred, gt, k)
        p, r, f1 = topo_score(pred, gt, radius)
        smds.append(s)
        precs.append(p)
        recs.append(r)
        f1s.append(f1)
        tree = is_tree(pred)
        trees += tree
        if samples_out is not None:
            samples_out.append(
                {
                    "file": name,
                    "smd": s,
                    "topo_precision": p,
                    "topo_recall": r,
                    "topo_f1": f1,
                    "is_tree": bool(tree),
                }
            )
    n = len(pred_files)
    return MetricsReport(
        smd=float(np.mean(smds)),
        topo_precision=float(np.mean(precs)),
        topo_recall=float(np.mean(recs)),
        topo_f1=float(np.mean(f1s)),
        tree_rate=trees / n,
        n=n,
    )


def write_report(report: MetricsReport, samples: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"aggregate": report.to_obj(), "samples": samples}, fh, indent=2)
        fh.write("\n")

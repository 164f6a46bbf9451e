"""Stochastic bracketed L-system generator for synthetic branching datasets.

Sequences are strings over {F, A, +, -, [, ]} where F and A carry an
iteration digit (F0, A1, ...). Rewriting replaces every A leaf with a
randomly chosen rule expansion, incrementing the digit; turtle interpretation
draws F segments with randomized lengths and branching angles, producing a
tree-structured spatial graph normalized to the unit square.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphError, SpatialGraph, save_graph

__all__ = [
    "LSystemSpec",
    "SampleRejected",
    "parse_sequence",
    "format_sequence",
    "rewrite",
    "interpret",
    "resample_nodes",
    "generate_sample",
    "generate_dataset",
]

DEFAULT_AXIOMS = ("F0[+A0]A0", "F0[-A0]A0", "F0[+A0]F0[-A0]A0")
DEFAULT_RULES = (
    "F[+A]",
    "F[-A]",
    "F[+A][-A]",
    "F[+A]A",
    "F[-A]A",
    "FF[+A]",
    "FF[-A]",
    "F[+A][-A]A",
)

_MERGE_TOL = 1e-9
_NORM_MARGIN = 1.0 / 16.0


class SampleRejected(RuntimeError):
    """A generated structure exceeded the node budget; redraw the sample."""


@dataclass(frozen=True)
class LSystemSpec:
    axioms: tuple[str, ...] = DEFAULT_AXIOMS
    rules: tuple[str, ...] = DEFAULT_RULES
    max_iterations: int = 3
    length_scale_range: tuple[float, float] = (0.5, 2.5)
    angle_range_deg: tuple[float, float] = (10.0, 35.0)
    max_nodes: int = 100
    canvas: int = 512

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise GraphError("max_iterations must be >= 0")
        for name in ("length_scale_range", "angle_range_deg"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise GraphError(f"{name}: range must be ordered low <= high")
        if not self.axioms or not self.rules:
            raise GraphError("need at least one axiom and one rule")
        for s in list(self.axioms) + list(self.rules):
            _check_sequence(s)

    @property
    def base_length(self) -> float:
        # px; depth-3 expansions fit the canvas with margin
        return self.canvas / 16.0

    def to_obj(self) -> dict:
        return {
            "axioms": list(self.axioms),
            "rules": list(self.rules),
            "max_iterations": self.max_iterations,
            "length_scale_range": list(self.length_scale_range),
            "angle_range_deg": list(self.angle_range_deg),
            "max_nodes": self.max_nodes,
            "canvas": self.canvas,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "LSystemSpec":
        try:
            return cls(
                axioms=tuple(obj.get("axioms", DEFAULT_AXIOMS)),
                rules=tuple(obj.get("rules", DEFAULT_RULES)),
                max_iterations=int(obj.get("max_iterations", 3)),
                length_scale_range=tuple(obj.get("length_scale_range", (0.5, 2.5))),
                angle_range_deg=tuple(obj.get("angle_range_deg", (10.0, 35.0))),
                max_nodes=int(obj.get("max_nodes", 100)),
                canvas=int(obj.get("canvas", 512)),
            )
        except (TypeError, ValueError) as exc:
            raise GraphError(f"malformed generator spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "LSystemSpec":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_obj(obj)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_obj(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


Token = tuple[str, int | None]  # symbol, iteration digit (F/A only)


def parse_sequence(s: str) -> list[Token]:
    """Tokenize a bracketed sequence, validating symbols and bracket balance."""
    tokens: list[Token] = []
    depth = 0
    i = 0
    while i < len(s):
        c = s[i]
        if c in "FA":
            j = i + 1
            while j < len(s) and s[j].isdigit():
                j += 1
            digit = int(s[i + 1 : j]) if j > i + 1 else None
            tokens.append((c, digit))
            i = j
            continue
        if c in "+-":
            tokens.append((c, None))
        elif c == "[":
            depth += 1
            tokens.append((c, None))
        elif c == "]":
            depth -= 1
            if depth < 0:
                raise GraphError(f"unbalanced ']' at position {i} in {s!r}")
            tokens.append((c, None))
        else:
            raise GraphError(f"invalid symbol {c!r} at position {i} in {s!r}")
        i += 1
    if depth != 0:
        raise GraphError(f"unbalanced brackets in {s!r}")
    return tokens


def format_sequence(tokens: list[Token]) -> str:
    return "".join(c if d is None else f"{c}{d}" for c, d in tokens)


def _check_sequence(s: str) -> None:
    parse_sequence(s)


def rewrite(sequence: str, rules, rng: np.random.Generator) -> str:
    """Replace every A leaf with an independently sampled rule expansion.

    Symbols in the expansion get the leaf's iteration digit plus one; F
    symbols in the original sequence are left untouched.
    """
    rules = list(rules)
    parsed_rules = [parse_sequence(r) for r in rules]
    out: list[Token] = []
    for sym, digit in parse_sequence(sequence):
        if sym != "A":
            out.append((sym, digit))
            continue
        expansion = parsed_rules[int(rng.integers(len(rules)))]
        child = 0 if digit is None else digit + 1
        for c, _ in expansion:
            out.append((c, child) if c in "FA" else (c, None))
    return format_sequence(out)


def interpret(sequence: str, rng: np.random.Generator, spec: LSystemSpec) -> SpatialGraph:
    """Turtle-interpret a sequence into a normalized spatial graph.

    F draws a randomized-length segment, +/- turn by a sampled angle, and
    brackets push/pop turtle state; A symbols are growth placeholders and draw
    nothing. Coincident endpoints merge, so shared branch points become single
    nodes and the result is always a tree.
    """
    tokens = parse_sequence(sequence)
    lo_s, hi_s = spec.length_scale_range
    lo_a, hi_a = spec.angle_range_deg

    pos = (0.0, 0.0)
    heading = math.pi / 2.0  # grow upward
    stack: list[tuple[tuple[float, float], float]] = []

    points: list[tuple[float, float]] = [pos]
    index = {_quantize(pos): 0}
    edges: set[tuple[int, int]] = set()

    def node_id(p: tuple[float, float]) -> int:
        key = _quantize(p)
        if key not in index:
            index[key] = len(points)
            points.append(p)
        return index[key]

    for sym, _ in tokens:
        if sym == "F":
            length = spec.base_length * rng.uniform(lo_s, hi_s)
            nxt = (pos[0] + length * math.cos(heading), pos[1] + length * math.sin(heading))
            a, b = node_id(pos), node_id(nxt)
            if a != b:
                edges.add((a, b) if a < b else (b, a))
            pos = nxt
        elif sym == "+":
            heading += math.radians(rng.uniform(lo_a, hi_a))
        elif sym == "-":
            heading -= math.radians(rng.uniform(lo_a, hi_a))
        elif sym == "[":
            stack.append((pos, heading))
        elif sym == "]":
            pos, heading = stack.pop()
    if stack:
        raise GraphError("unbalanced turtle state stack")

    if len(points) >= spec.max_nodes:
        raise SampleRejected(f"{len(points)} nodes >= cap {spec.max_nodes}")
    return SpatialGraph(_normalize(points), frozenset(edges))


def _quantize(p: tuple[float, float]) -> tuple[int, int]:
    return (round(p[0] / _MERGE_TOL), round(p[1] / _MERGE_TOL))


def _normalize(points) -> tuple[tuple[float, float], ...]:
    """Fit points into [margin, 1-margin]^2 preserving aspect ratio."""
    arr = np.array(points, dtype=float)
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    if extent == 0.0:
        return tuple((0.5, 0.5) for _ in points)
    scale = (1.0 - 2.0 * _NORM_MARGIN) / extent
    center = (lo + hi) / 2.0
    out = (arr - center) * scale + 0.5
    return tuple((float(x), float(y)) for x, y in out)


def resample_nodes(g: SpatialGraph, interval_px: float, canvas_px: int = 512) -> SpatialGraph:
    """Insert nodes every ``interval_px`` along degree-2 chains.

    Keypoints (degree != 2) and original chain vertices are preserved, so the
    polyline geometry and total length are exactly unchanged; only new
    interval nodes are added along each chain, measured from its starting
    keypoint in pixel units of the given canvas.
    """
    if interval_px <= 0:
        raise GraphError("interval must be positive")
    deg = g.degrees()
    keypoints = [k for k in range(g.n) if deg[k] != 2]
    adj = g.adjacency()

    new_points: list[tuple[float, float]] = []
    remap: dict[int, int] = {}

    def keep(old: int) -> int:
        if old not in remap:
            remap[old] = len(new_points)
            new_points.append(g.coords[old])
        return remap[old]

    new_edges: set[tuple[int, int]] = set()

    def add_edge(a: int, b: int) -> None:
        if a != b:
            new_edges.add((a, b) if a < b else (b, a))

    visited: set[tuple[int, int]] = set()
    interval = interval_px / canvas_px
    for start in keypoints:
        for first in adj[start]:
            e0 = (start, first) if start < first else (first, start)
            if e0 in visited:
                continue
            # walk the degree-2 chain until the next keypoint
            chain = [start, first]
            visited.add(e0)
            while deg[chain[-1]] == 2:
                prev, cur = chain[-2], chain[-1]
                nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                visited.add((cur, nxt) if cur < nxt else (nxt, cur))
                chain.append(nxt)
            _resample_chain(g, chain, interval, keep, add_edge, new_points)

    if not keypoints and g.edges:
        # a tree always has degree-1 leaves, so this only covers edge cases
        # like isolated cycles, which are rejected upstream
        raise GraphError("graph has no keypoints to anchor resampling")
    if g.n and not g.edges:
        for k in range(g.n):
            keep(k)
    return SpatialGraph(tuple(new_points), frozenset(new_edges))


def _resample_chain(g, chain, interval, keep, add_edge, new_points) -> None:
    pts = np.array([g.coords[k] for k in chain])
    seg_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])

    # arc positions: original vertices plus interval marks from the start
    marks = set(float(c) for c in cum)
    d = interval
    while d < total - _MERGE_TOL:
        marks.add(d)
        d += interval
    positions = sorted(marks)

    prev_id = keep(chain[0])
    for s in positions[1:-1]:
        if any(abs(s - float(c)) <= _MERGE_TOL for c in cum):
            # an original vertex
            k = int(np.argmin(np.abs(cum - s)))
            cur_id = keep(chain[k])
        else:
            seg = int(np.searchsorted(cum, s, side="right") - 1)
            frac = (s - cum[seg]) / seg_len[seg]
            p = tuple(pts[seg] + frac * (pts[seg + 1] - pts[seg]))
            cur_id = len(new_points)
            new_points.append((float(p[0]), float(p[1])))
        add_edge(prev_id, cur_id)
        prev_id = cur_id
    add_edge(prev_id, keep(chain[-1]))


def generate_sample(spec: LSystemSpec, rng: np.random.Generator) -> SpatialGraph:
    """Draw one tree, redrawing whenever the node cap rejects a structure."""
    while True:
        axiom = spec.axioms[int(rng.integers(len(spec.axioms)))]
        iterations = int(rng.integers(1, spec.max_iterations + 1)) if spec.max_iterations else 0
        seq = axiom
        for _ in range(iterations):
            seq = rewrite(seq, spec.rules, rng)
        try:
            return interpret(seq, rng, spec)
        except SampleRejected:
            continue


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-sample stream; output does not depend on worker count."""
    return np.random.default_rng((seed, 2, index))


def generate_dataset(
    spec: LSystemSpec,
    count: int,
    seed: int,
    out_dir,
    render: bool = False,
    resample_interval_px: float | None = None,
    stroke_px: int = 3,
    threads: int = 1,
) -> dict:
    """Write ``count`` graph samples plus a manifest under ``out_dir``.

    Fully reproducible from (spec, seed): each sample uses its own rng stream
    derived from the seed and sample index.
    """
    graphs_dir = os.path.join(out_dir, "graphs")
    os.makedirs(graphs_dir, exist_ok=True)
    if render:
        images_dir = os.path.join(out_dir, "images")
        os.makedirs(images_dir, exist_ok=True)

    def build(index: int) -> SpatialGraph:
        g = generate_sample(spec, sample_rng(seed, index))
        if resample_interval_px is not None:
            g = resample_nodes(g, resample_interval_px, spec.canvas)
        return g

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            graphs = list(pool.map(build, range(count)))
    else:
        graphs = [build(i) for i in range(count)]

    samples = []
    for index, g in enumerate(graphs):
        name = f"{index:06d}"
        try:
            save_graph(g, os.path.join(graphs_dir, name + ".json"))
            if render:
                from .raster import rasterize

                img = rasterize(g, spec.canvas, spec.canvas, stroke_px)
                img.save(os.path.join(images_dir, name + ".png"))
        except OSError as exc:
            raise OSError(f"sample {index}: {exc}") from exc
        samples.append({"index": index, "nodes": g.n, "edges": len(g.edges)})

    manifest = {
        "seed": seed,
        "count": count,
        "spec_hash": spec.content_hash(),
        "spec": spec.to_obj(),
        "resample_interval_px": resample_interval_px,
        "samples": samples,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest

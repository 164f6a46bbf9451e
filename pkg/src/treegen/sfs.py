"""Selective feature suppression: a differentiable stand-in for MST projection.

For pairs where the projection disagrees with the thresholded prediction, one
of the two pre-softmax logits is overwritten with a large negative constant
-lambda, so the softmax output reproduces the projected edge decision while the
surviving logit keeps its gradient path. The backward pass implements the
exact cross-entropy derivative of that forward (the replaced constant is
detached, so its coordinate receives exactly zero gradient).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import EdgeDelta, GraphError
from .mst import EdgeProbabilities, all_pairs, pair_index

__all__ = [
    "EdgeLogits",
    "SfsConfig",
    "SfsOutput",
    "softmax2",
    "sfs_forward",
    "sfs_backward",
    "classify_case",
    "suppression_epsilon",
    "suppression_table",
]

# per-pair suppression markers
NONE, SUPPRESS_NEG, SUPPRESS_POS = 0, 1, -1


@dataclass(frozen=True)
class EdgeLogits:
    """Pre-softmax [f+, f-] per pair, lexicographic i<j order."""

    n: int
    feats: np.ndarray  # shape (n_pairs, 2)

    def __post_init__(self) -> None:
        m = self.n * (self.n - 1) // 2
        if self.feats.shape != (m, 2):
            raise GraphError(f"expected feats shape ({m}, 2), got {self.feats.shape}")
        if m and not np.all(np.isfinite(self.feats)):
            raise GraphError("logits must be finite")

    @property
    def n_pairs(self) -> int:
        return self.feats.shape[0]


@dataclass(frozen=True)
class SfsConfig:
    """Suppression constant. lambda=10 gives exp(-lambda) = 4.5e-5."""

    lam: float = 10.0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise GraphError("lambda must be positive")
        if not math.isfinite(math.exp(-self.lam)):
            raise GraphError("exp(-lambda) must be representable")


@dataclass(frozen=True)
class SfsOutput:
    unconstrained_probs: EdgeProbabilities
    constrained_probs: EdgeProbabilities
    delta: EdgeDelta
    suppressed: np.ndarray  # per pair: 0 none, +1 f- suppressed, -1 f+ suppressed
    # pairs whose surviving logit is <= -lambda, where thresholding the
    # constrained output is not guaranteed to reproduce the projection
    flagged: tuple[int, ...] = field(default_factory=tuple)


def softmax2(f: np.ndarray) -> np.ndarray:
    """Row-wise 2-class softmax with max-subtraction for stability."""
    f = np.asarray(f, dtype=float)
    single = f.ndim == 1
    if single:
        f = f[None, :]
    shifted = f - f.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out[0] if single else out


def _suppression_marks(n: int, delta: EdgeDelta, n_pairs: int) -> np.ndarray:
    marks = np.zeros(n_pairs, dtype=int)
    for i, j in delta.added:
        marks[pair_index(i, j, n)] = SUPPRESS_NEG
    for i, j in delta.removed:
        marks[pair_index(i, j, n)] = SUPPRESS_POS
    return marks


def sfs_forward(f: EdgeLogits, delta: EdgeDelta, cfg: SfsConfig = SfsConfig()) -> SfsOutput:
    """Apply selective suppression and return both probability sets.

    Pairs in the added set get f- := -lambda; pairs in the removed set get
    f+ := -lambda; everything else passes through untouched.
    """
    marks = _suppression_marks(f.n, delta, f.n_pairs)
    modified = f.feats.copy()
    modified[marks == SUPPRESS_NEG, 1] = -cfg.lam
    modified[marks == SUPPRESS_POS, 0] = -cfg.lam

    unconstrained = softmax2(f.feats) if f.n_pairs else np.zeros((0, 2))
    constrained = softmax2(modified) if f.n_pairs else np.zeros((0, 2))

    surviving = np.where(marks == SUPPRESS_NEG, f.feats[:, 0], f.feats[:, 1])
    flagged = tuple(int(k) for k in np.nonzero((marks != NONE) & (surviving <= -cfg.lam))[0])

    return SfsOutput(
        unconstrained_probs=EdgeProbabilities(f.n, unconstrained[:, 0], unconstrained[:, 1]),
        constrained_probs=EdgeProbabilities(f.n, constrained[:, 0], constrained[:, 1]),
        delta=delta,
        suppressed=marks,
        flagged=flagged,
    )


def _check_targets(t: np.ndarray, n_pairs: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (n_pairs, 2):
        raise GraphError(f"expected targets shape ({n_pairs}, 2), got {t.shape}")
    if not np.all((t == 0) | (t == 1)) or not np.all(t.sum(axis=1) == 1):
        raise GraphError("targets must be one-hot rows")
    return t


def sfs_backward(
    f: EdgeLogits, delta: EdgeDelta, targets: np.ndarray, cfg: SfsConfig = SfsConfig()
) -> np.ndarray:
    """Exact per-pair cross-entropy gradient w.r.t. the raw logits.

    Suppressed pairs: the surviving coordinate gets (1 - eps) - t, where eps
    is the softmax mass left on the replaced constant; the suppressed
    coordinate gets exactly 0. Untouched pairs: the usual y - t.
    """
    t = _check_targets(targets, f.n_pairs)
    out = sfs_forward(f, delta, cfg)
    y = np.column_stack([out.constrained_probs.pos, out.constrained_probs.neg])
    grad = y - t
    grad[out.suppressed == SUPPRESS_NEG, 1] = 0.0
    grad[out.suppressed == SUPPRESS_POS, 0] = 0.0
    return grad


def classify_case(feat: np.ndarray, membership: str, target: np.ndarray) -> int:
    """Map one pair's state to a case id 1..8.

    ``membership`` is "added", "removed", or "none"; ``target`` is one-hot
    [t+, t-]. Cases 1/2/5/6 are untouched pairs, 3/4 projection removals,
    7/8 projection additions; odd ids have t+=1.
    """
    feat = np.asarray(feat, dtype=float)
    target = np.asarray(target, dtype=float)
    if target.shape != (2,) or sorted(target.tolist()) != [0.0, 1.0]:
        raise GraphError("target must be one-hot [t+, t-]")
    positive_pred = feat[0] > feat[1]
    gt_edge = target[0] == 1
    if membership == "none":
        if positive_pred:
            return 1 if gt_edge else 2
        return 5 if gt_edge else 6
    if membership == "removed":
        if not positive_pred:
            raise GraphError("removed pairs must have f+ > f- (edge was present)")
        return 3 if gt_edge else 4
    if membership == "added":
        if positive_pred:
            raise GraphError("added pairs must have f+ <= f- (edge was absent)")
        return 7 if gt_edge else 8
    raise GraphError(f"unknown membership {membership!r}")


def suppression_epsilon(lam: float) -> float:
    """exp(-lambda), the residual softmax mass on a suppressed feature."""
    return math.exp(-lam)


def suppression_table(lams: tuple[float, ...] = (2, 5, 10, 100)) -> list[tuple[float, str]]:
    """(lambda, exp(-lambda) to 2 significant digits) rows for reporting."""
    return [(lam, f"{suppression_epsilon(lam):.1e}") for lam in lams]

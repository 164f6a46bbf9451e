"""Finite-difference oracles for the suppression layer and the edge scorer.

Relative error uses the usual gradcheck normalization
|a - b| / max(1, |a|, |b|), so near-zero components are measured absolutely.
Instances are resampled away from relu kinks so central differences see a
smooth function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import EdgeDelta
from .mst import EdgeProbabilities, all_pairs, project
from .scorer import (
    PARAM_NAMES,
    ScorerModel,
    TrainConfig,
    _feature_matrix,
    _forward,
    edge_loss,
    make_targets,
)
from .sfs import (
    EdgeLogits,
    SfsConfig,
    classify_case,
    sfs_backward,
    sfs_forward,
    softmax2,
    suppression_epsilon,
)

__all__ = [
    "rel_err",
    "random_sfs_instance",
    "check_sfs_gradients",
    "CaseReport",
    "check_case_table",
    "check_model_gradients",
]

FD_STEP = 1e-5


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _ce_sum(feats: np.ndarray, delta: EdgeDelta, targets: np.ndarray, n: int, cfg: SfsConfig) -> float:
    out = sfs_forward(EdgeLogits(n, feats), delta, cfg)
    y = np.column_stack([out.constrained_probs.pos, out.constrained_probs.neg])
    return float(-(targets * np.log(y)).sum())


def random_sfs_instance(rng: np.random.Generator, n: int = 5):
    """Random logits with a consistent delta and one-hot targets.

    Pairs predicted present may be marked removed, pairs predicted absent may
    be marked added; membership is sampled independently per pair.
    """
    pairs = all_pairs(n)
    feats = rng.normal(0.0, 2.0, size=(len(pairs), 2))
    added, removed = set(), set()
    for k, pair in enumerate(pairs):
        if rng.random() < 0.4:
            if feats[k, 0] > feats[k, 1]:
                removed.add(pair)
            else:
                added.add(pair)
    targets = np.zeros((len(pairs), 2))
    hot = rng.integers(0, 2, size=len(pairs))
    targets[np.arange(len(pairs)), hot] = 1.0
    return EdgeLogits(n, feats), EdgeDelta(frozenset(added), frozenset(removed)), targets


def check_sfs_gradients(
    trials: int, seed: int, lam: float = 10.0, n: int = 5, step: float = FD_STEP
) -> dict:
    """Compare sfs_backward against central differences of the forward loss.

    Returns max relative error and the largest magnitude seen on a suppressed
    coordinate (must be exactly 0).
    """
    rng = np.random.default_rng(seed)
    cfg = SfsConfig(lam)
    max_err = 0.0
    max_suppressed = 0.0
    for _ in range(trials):
        logits, delta, targets = random_sfs_instance(rng, n)
        grad = sfs_backward(logits, delta, targets, cfg)
        out = sfs_forward(logits, delta, cfg)
        for k in range(logits.n_pairs):
            for c in range(2):
                if out.suppressed[k] == 1 and c == 1 or out.suppressed[k] == -1 and c == 0:
                    max_suppressed = max(max_suppressed, abs(float(grad[k, c])))
                fp = logits.feats.copy()
                fp[k, c] += step
                fm = logits.feats.copy()
                fm[k, c] -= step
                fd = (
                    _ce_sum(fp, delta, targets, logits.n, cfg)
                    - _ce_sum(fm, delta, targets, logits.n, cfg)
                ) / (2 * step)
                max_err = max(max_err, rel_err(float(grad[k, c]), fd))
    return {"max_rel_err": max_err, "max_suppressed_grad": max_suppressed, "trials": trials}


@dataclass(frozen=True)
class CaseReport:
    case: int
    trials: int
    sign_ok: bool
    norm_ok: bool
    max_abs_dev: float  # worst deviation from the approximate-derivative pattern

    @property
    def ok(self) -> bool:
        return self.sign_ok and self.norm_ok


def _case_instance(case: int, rng: np.random.Generator):
    f = np.sort(rng.normal(0.0, 2.0, size=2))
    if case in (1, 2, 3, 4):
        f = f[::-1].copy()  # f+ > f-
    membership = {3: "removed", 4: "removed", 7: "added", 8: "added"}.get(case, "none")
    t = np.array([1.0, 0.0]) if case % 2 == 1 else np.array([0.0, 1.0])
    return f, membership, t


def check_case_table(seed: int, trials_per_case: int = 100, lam: float = 10.0) -> list[CaseReport]:
    """Verify the sign/zero pattern and norm ordering of all eight cases."""
    rng = np.random.default_rng(seed)
    cfg = SfsConfig(lam)
    reports = []
    for case in range(1, 9):
        sign_ok = True
        norm_ok = True
        max_dev = 0.0
        for _ in range(trials_per_case):
            f, membership, t = _case_instance(case, rng)
            assert classify_case(f, membership, t) == case
            delta = EdgeDelta(
                frozenset({(0, 1)}) if membership == "added" else frozenset(),
                frozenset({(0, 1)}) if membership == "removed" else frozenset(),
            )
            logits = EdgeLogits(2, f[None, :])
            grad = sfs_backward(logits, delta, t[None, :], cfg)[0]
            y = softmax2(f)
            surviving = f[0] if membership == "added" else f[1]
            eps_bound = suppression_epsilon(lam) * math.exp(-surviving)

            if case in (1, 5):  # [y+ - 1, y-]
                expect = np.array([y[0] - 1.0, y[1]])
            elif case in (2, 6):  # [y+, y- - 1]
                expect = np.array([y[0], y[1] - 1.0])
            elif case == 3:
                expect = np.array([0.0, 1.0])
            elif case == 8:
                expect = np.array([1.0, 0.0])
            else:  # 4, 7: ~0
                expect = np.zeros(2)
            dev = float(np.abs(grad - expect).max())
            max_dev = max(max_dev, dev)

            if membership == "none":
                sign_ok &= dev < 1e-12
            else:
                suppressed_coord = 1 if membership == "added" else 0
                sign_ok &= grad[suppressed_coord] == 0.0
                sign_ok &= dev <= eps_bound + 1e-12
            if case in (3, 8):
                unconstrained = y - t
                norm_ok &= float(np.linalg.norm(grad)) >= 1.0 - eps_bound
                norm_ok &= float(np.linalg.norm(grad)) > float(np.linalg.norm(unconstrained))
                norm_ok &= float(np.linalg.norm(unconstrained)) < math.sqrt(0.5)
        reports.append(CaseReport(case, trials_per_case, sign_ok, norm_ok, max_dev))
    return reports


def _random_instance(rng: np.random.Generator, model: ScorerModel, n: int, margin: float = 1e-4):
    """Random nodes + ground-truth tree, resampled away from relu kinks."""
    from .mst import kruskal

    while True:
        coords = tuple((float(x), float(y)) for x, y in rng.random((n, 2)))
        x = _feature_matrix(coords)
        if np.abs(_forward(model, x).z1).min() < margin:
            continue
        costs = {pair: float(c) for pair, c in zip(all_pairs(n), rng.random(n * (n - 1) // 2))}
        gt_edges = kruskal(n, costs)
        return coords, gt_edges


def check_model_gradients(
    instances: int,
    seed: int,
    cfg: TrainConfig,
    n: int = 6,
    step: float = FD_STEP,
) -> float:
    """Max relative error of full-loss parameter gradients vs central FD.

    In constrained modes the projection delta is computed once per instance
    and held fixed for both the analytic gradient and the differences.
    """
    rng = np.random.default_rng(seed)
    model = ScorerModel.init(cfg.hidden, rng)
    constrained = cfg.mode in ("ours", "train-only")
    max_err = 0.0
    for _ in range(instances):
        coords, gt_edges = _random_instance(rng, model, n)
        delta = None
        if constrained:
            y = softmax2(_forward(model, _feature_matrix(coords)).logits)
            _, delta = project(EdgeProbabilities(n, y[:, 0], y[:, 1]))
        _, grads = edge_loss(model, coords, gt_edges, cfg, delta=delta, compute_delta=False)

        def loss_at(m: ScorerModel) -> float:
            breakdown, _ = edge_loss(m, coords, gt_edges, cfg, delta=delta, compute_delta=False)
            return breakdown.l_edge

        params = model.params()
        for name in PARAM_NAMES:
            flat = params[name].ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                perturbed = {k: v.copy() for k, v in params.items()}
                perturbed[name].ravel()[idx] = orig + step
                lp = loss_at(ScorerModel(**perturbed))
                perturbed[name].ravel()[idx] = orig - step
                lm = loss_at(ScorerModel(**perturbed))
                fd = (lp - lm) / (2 * step)
                max_err = max(max_err, rel_err(float(grads[name].ravel()[idx]), fd))
    return max_err

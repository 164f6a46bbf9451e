"""A small pairwise edge scorer with analytic gradients and its training loop.

The scorer consumes perturbed ground-truth node coordinates (a stand-in for a
detection backbone) and predicts per-pair edge logits with a one-hidden-layer
MLP, layer-normalized before the final linear map. Training composes the
scorer with the MST projection and the suppression layer, backpropagating the
combined unconstrained + constrained cross-entropy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import Edge, EdgeDelta, GraphError, SpatialGraph
from .mst import EdgeProbabilities, all_pairs, project, project_mst, threshold_edges
from .sfs import EdgeLogits, SfsConfig, sfs_backward, sfs_forward, softmax2

__all__ = [
    "ScorerModel",
    "TrainConfig",
    "LossBreakdown",
    "NumericalError",
    "MODES",
    "pair_features",
    "score_edges",
    "edge_loss",
    "train",
    "infer",
    "prepare_instances",
    "save_model",
    "load_model",
]

PAIR_FEATURE_DIM = 7
_LN_EPS = 1e-8

MODES = ("unconstrained", "test-time", "train-only", "ours")
_TRAIN_CONSTRAINED = {"ours", "train-only"}
_INFER_PROJECTED = {"ours", "test-time"}


class NumericalError(RuntimeError):
    """Raised when training produces a non-finite loss."""


@dataclass(frozen=True)
class ScorerModel:
    """MLP parameters: 7 -> hidden (relu, layernorm) -> 2."""

    w1: np.ndarray  # (H, 7)
    b1: np.ndarray  # (H,)
    ln_gain: np.ndarray  # (H,)
    ln_bias: np.ndarray  # (H,)
    w2: np.ndarray  # (2, H)
    b2: np.ndarray  # (2,)

    def __post_init__(self) -> None:
        h = self.w1.shape[0]
        shapes = {
            "w1": (h, PAIR_FEATURE_DIM), "b1": (h,), "ln_gain": (h,),
            "ln_bias": (h,), "w2": (2, h), "b2": (2,),
        }
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise GraphError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise GraphError(f"{name}: non-finite parameters")

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def init(cls, hidden: int, rng: np.random.Generator) -> "ScorerModel":
        s1 = 1.0 / math.sqrt(PAIR_FEATURE_DIM)
        s2 = 1.0 / math.sqrt(hidden)
        return cls(
            w1=rng.normal(0.0, s1, size=(hidden, PAIR_FEATURE_DIM)),
            b1=np.zeros(hidden),
            ln_gain=np.ones(hidden),
            ln_bias=np.zeros(hidden),
            w2=rng.normal(0.0, s2, size=(2, hidden)),
            b2=np.zeros(2),
        )

    @classmethod
    def zeros(cls, hidden: int) -> "ScorerModel":
        return cls(
            w1=np.zeros((hidden, PAIR_FEATURE_DIM)), b1=np.zeros(hidden),
            ln_gain=np.zeros(hidden), ln_bias=np.zeros(hidden),
            w2=np.zeros((2, hidden)), b2=np.zeros(2),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {
            "w1": self.w1, "b1": self.b1, "ln_gain": self.ln_gain,
            "ln_bias": self.ln_bias, "w2": self.w2, "b2": self.b2,
        }


PARAM_NAMES = ("w1", "b1", "ln_gain", "ln_bias", "w2", "b2")


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 10.0
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 100
    pos_weight: float | None = None  # None: (#neg / #pos) clamped to [1, 50]
    sigma: float = 0.005
    seed: int = 0
    mode: str = "ours"
    hidden: int = 64

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise GraphError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("lam", "lr", "epochs", "hidden"):
            if not getattr(self, name) > 0:
                raise GraphError(f"{name} must be positive")
        if not 0 <= self.momentum < 1:
            raise GraphError("momentum must be in [0, 1)")
        if self.sigma < 0:
            raise GraphError("sigma must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    l_unconst: float
    l_const: float

    @property
    def l_edge(self) -> float:
        return self.l_unconst + self.l_const


def pair_features(coords, i: int, j: int) -> np.ndarray:
    """[xi, yi, xj, yj, |dx|, |dy|, dist] for the canonical i<j pair."""
    xi, yi = coords[i]
    xj, yj = coords[j]
    dx, dy = abs(xi - xj), abs(yi - yj)
    return np.array([xi, yi, xj, yj, dx, dy, math.hypot(dx, dy)])


def _feature_matrix(coords) -> np.ndarray:
    n = len(coords)
    pairs = all_pairs(n)
    if not pairs:
        return np.zeros((0, PAIR_FEATURE_DIM))
    return np.stack([pair_features(coords, i, j) for i, j in pairs])


@dataclass
class _ForwardCache:
    x: np.ndarray
    z1: np.ndarray
    hhat: np.ndarray
    inv_std: np.ndarray
    logits: np.ndarray


def _forward(model: ScorerModel, x: np.ndarray) -> _ForwardCache:
    z1 = x @ model.w1.T + model.b1
    h = np.maximum(z1, 0.0)
    mu = h.mean(axis=1, keepdims=True)
    var = ((h - mu) ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    hhat = (h - mu) * inv_std
    a = hhat * model.ln_gain + model.ln_bias
    logits = a @ model.w2.T + model.b2
    return _ForwardCache(x=x, z1=z1, hhat=hhat, inv_std=inv_std, logits=logits)


def _backward(model: ScorerModel, cache: _ForwardCache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    a = cache.hhat * model.ln_gain + model.ln_bias
    dw2 = dlogits.T @ a
    db2 = dlogits.sum(axis=0)
    da = dlogits @ model.w2
    dgain = (da * cache.hhat).sum(axis=0)
    dbias = da.sum(axis=0)
    dhhat = da * model.ln_gain
    mean_d = dhhat.mean(axis=1, keepdims=True)
    mean_dh = (dhhat * cache.hhat).mean(axis=1, keepdims=True)
    dh = (dhhat - mean_d - cache.hhat * mean_dh) * cache.inv_std
    dz1 = dh * (cache.z1 > 0)
    dw1 = dz1.T @ cache.x
    db1 = dz1.sum(axis=0)
    return {"w1": dw1, "b1": db1, "ln_gain": dgain, "ln_bias": dbias, "w2": dw2, "b2": db2}


def score_edges(model: ScorerModel, coords) -> EdgeLogits:
    """Per-pair edge logits for a node list; empty for fewer than 2 nodes."""
    x = _feature_matrix(coords)
    if x.shape[0] == 0:
        return EdgeLogits(len(coords), np.zeros((0, 2)))
    return EdgeLogits(len(coords), _forward(model, x).logits)


def make_targets(n: int, gt_edges: frozenset[Edge]) -> np.ndarray:
    t = np.zeros((n * (n - 1) // 2, 2))
    for k, pair in enumerate(all_pairs(n)):
        if pair in gt_edges:
            t[k, 0] = 1.0
        else:
            t[k, 1] = 1.0
    return t


def _pair_weights(targets: np.ndarray, pos_weight: float | None) -> np.ndarray:
    w = np.ones(targets.shape[0])
    positive = targets[:, 0] == 1
    if pos_weight is None:
        n_pos = int(positive.sum())
        n_neg = targets.shape[0] - n_pos
        pos_weight = min(max(n_neg / n_pos, 1.0), 50.0) if n_pos else 1.0
    w[positive] = pos_weight
    return w


def _ce_from_logits(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    # logsumexp(f) - f[target], stable for suppressed features
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return lse - (logits * targets).sum(axis=1)


def loss_and_grad_logits(
    logits: EdgeLogits,
    delta: EdgeDelta | None,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> tuple[LossBreakdown, np.ndarray]:
    """Weighted-mean edge loss and its gradient w.r.t. the raw logits.

    ``delta=None`` selects the unconstrained loss only; otherwise the
    constrained term is evaluated through the suppression layer and both
    gradients are summed.
    """
    w = _pair_weights(targets, cfg.pos_weight)
    wsum = w.sum()
    y = softmax2(logits.feats)
    ce_unconst = _ce_from_logits(logits.feats, targets)
    l_unconst = float((w * ce_unconst).sum() / wsum)
    dlogits = (y - targets) * (w / wsum)[:, None]

    l_const = 0.0
    if delta is not None:
        sfs_cfg = SfsConfig(cfg.lam)
        out = sfs_forward(logits, delta, sfs_cfg)
        modified = logits.feats.copy()
        modified[out.suppressed == 1, 1] = -cfg.lam
        modified[out.suppressed == -1, 0] = -cfg.lam
        ce_const = _ce_from_logits(modified, targets)
        l_const = float((w * ce_const).sum() / wsum)
        dlogits = dlogits + sfs_backward(logits, delta, targets, sfs_cfg) * (w / wsum)[:, None]

    return LossBreakdown(l_unconst, l_const), dlogits


def edge_loss(
    model: ScorerModel,
    coords,
    gt_edges: frozenset[Edge],
    cfg: TrainConfig,
    delta: EdgeDelta | None = None,
    compute_delta: bool | None = None,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Full per-sample loss and parameter gradients.

    When ``compute_delta`` is true (default in constrained modes) the current
    logits are projected onto a tree inside the call; an explicit ``delta``
    pins the projection instead, which keeps finite-difference checks on a
    fixed branch of the piecewise loss.
    """
    x = _feature_matrix(coords)
    if x.shape[0] == 0:
        raise GraphError("sample has fewer than 2 nodes")
    cache = _forward(model, x)
    logits = EdgeLogits(len(coords), cache.logits)
    if compute_delta is None:
        compute_delta = cfg.mode in _TRAIN_CONSTRAINED and delta is None
    if compute_delta:
        y = softmax2(cache.logits)
        _, delta = project(EdgeProbabilities(len(coords), y[:, 0], y[:, 1]))
    targets = make_targets(len(coords), gt_edges)
    breakdown, dlogits = loss_and_grad_logits(logits, delta, targets, cfg)
    return breakdown, _backward(model, cache, dlogits)


def infer(model: ScorerModel, coords, mode: str) -> SpatialGraph:
    """Predict a graph over the given nodes; projected modes always yield trees."""
    if mode not in MODES:
        raise GraphError(f"unknown mode {mode!r}")
    logits = score_edges(model, coords)
    y = softmax2(logits.feats) if logits.n_pairs else np.zeros((0, 2))
    probs = EdgeProbabilities(len(coords), y[:, 0], y[:, 1])
    if mode in _INFER_PROJECTED:
        edges = project_mst(probs)
    else:
        edges = threshold_edges(probs)
    return SpatialGraph(tuple(coords), frozenset(edges))


def perturb_nodes(g: SpatialGraph, sigma: float, rng: np.random.Generator):
    """Gaussian-perturbed coordinates, clipped back into the unit square."""
    coords = np.array(g.coords)
    noisy = np.clip(coords + rng.normal(0.0, sigma, size=coords.shape), 0.0, 1.0)
    return tuple((float(x), float(y)) for x, y in noisy)


def prepare_instances(graphs, sigma: float, seed: int):
    """(noisy coords, gt edge set) training instances with per-sample rng streams."""
    instances = []
    for idx, g in enumerate(graphs):
        rng = np.random.default_rng((seed, 1, idx))
        instances.append((perturb_nodes(g, sigma, rng), g.edges))
    return instances


def train(
    train_instances,
    val_instances,
    cfg: TrainConfig,
    log: list | None = None,
) -> ScorerModel:
    """SGD-with-momentum training; returns the best-validation-SMD model.

    Instances are (coords, gt edge set) pairs from :func:`prepare_instances`.
    Per-sample updates run in a seeded shuffled order, so identical configs
    reproduce identical parameters.
    """
    from .metrics import smd, topo_score, tree_rate

    if not train_instances:
        raise GraphError("empty training set")
    rng = np.random.default_rng((cfg.seed, 0))
    model = ScorerModel.init(cfg.hidden, rng)
    velocity = {name: np.zeros_like(arr) for name, arr in model.params().items()}

    best_model = model
    best_smd = math.inf
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_instances))
        sum_unconst = 0.0
        sum_const = 0.0
        for idx in order:
            coords, gt_edges = train_instances[idx]
            breakdown, grads = edge_loss(model, coords, gt_edges, cfg)
            if not math.isfinite(breakdown.l_edge):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, sample {idx}: {breakdown}"
                )
            params = model.params()
            new_params = {}
            for name in PARAM_NAMES:
                velocity[name] = cfg.momentum * velocity[name] + grads[name]
                new_params[name] = params[name] - cfg.lr * velocity[name]
            model = ScorerModel(**new_params)
            sum_unconst += breakdown.l_unconst
            sum_const += breakdown.l_const

        record = {
            "epoch": epoch,
            "l_unconst": sum_unconst / len(train_instances),
            "l_const": sum_const / len(train_instances),
        }
        if val_instances:
            preds = [infer(model, coords, cfg.mode) for coords, _ in val_instances]
            gts = [
                SpatialGraph(tuple(coords), gt) for (coords, gt) in val_instances
            ]
            smds = [smd(p, g) for p, g in zip(preds, gts)]
            f1s = [topo_score(p, g)[2] for p, g in zip(preds, gts)]
            record["val_smd"] = float(np.mean(smds))
            record["val_f1"] = float(np.mean(f1s))
            record["tree_rate"] = tree_rate(preds)
            if record["val_smd"] < best_smd:
                best_smd = record["val_smd"]
                best_model = model
        else:
            best_model = model
        if log is not None:
            log.append(record)
    return best_model


def save_model(model: ScorerModel, path) -> None:
    obj = {
        "arch": {"in": PAIR_FEATURE_DIM, "hidden": model.hidden},
        "w1": model.w1.tolist(), "b1": model.b1.tolist(),
        "ln_gain": model.ln_gain.tolist(), "ln_bias": model.ln_bias.tolist(),
        "w2": model.w2.tolist(), "b2": model.b2.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_model(path) -> ScorerModel:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        if obj["arch"]["in"] != PAIR_FEATURE_DIM:
            raise GraphError(f"unsupported input dimension {obj['arch']['in']}")
        return ScorerModel(
            w1=np.array(obj["w1"], dtype=float),
            b1=np.array(obj["b1"], dtype=float),
            ln_gain=np.array(obj["ln_gain"], dtype=float),
            ln_bias=np.array(obj["ln_bias"], dtype=float),
            w2=np.array(obj["w2"], dtype=float),
            b2=np.array(obj["b2"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"{path}: malformed model file ({exc})") from exc

"""Solution prediction: a residual GCN over the linkage graph and a logistic-regression baseline.

Both models are plain numpy, trained by sequential SGD (one instance graph per
step) on the mean binary cross-entropy over all variables.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

MODEL_VERSION = 1
CLAMP = 1e-12


class ModelFormatError(ValueError):
    """Raised for unreadable, corrupt or mismatched model files."""


@dataclass
class TrainExample:
    laplacian: sp.spmatrix
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        n = self.features.shape[0]
        if self.laplacian.shape != (n, n) or self.labels.shape != (n,):
            raise ValueError(
                f"size mismatch: laplacian {self.laplacian.shape}, features {self.features.shape}, "
                f"labels {self.labels.shape}"
            )


@dataclass
class GcnModel:
    """Weights ``W[l]`` of shape ``dims[l] x dims[l+1]``; the last layer has width 1."""

    dims: list[int]
    weights: list[np.ndarray]
    kind = "gcn"

    @property
    def nlayers(self) -> int:
        return len(self.weights)

    @classmethod
    def init(cls, nfeat: int, nlayers: int = 20, hidden: int = 32, seed: int = 0) -> "GcnModel":
        if nlayers < 1:
            raise ValueError("nlayers must be >= 1")
        dims = [nfeat] + [hidden] * (nlayers - 1) + [1]
        return cls(dims, _gcn_init(dims, np.random.default_rng(seed)))

    def residual(self, l: int) -> bool:
        """Residual term only where the layer keeps its width and is not the output."""
        return l < self.nlayers - 1 and self.dims[l] == self.dims[l + 1]


@dataclass
class LogRegModel:
    """Logistic regression; ``weights = [w (F x 1), b (1 x 1)]``."""

    dims: list[int]
    weights: list[np.ndarray]
    kind = "lr"

    @classmethod
    def init(cls, nfeat: int) -> "LogRegModel":
        return cls([nfeat, 1], [np.zeros((nfeat, 1)), np.zeros((1, 1))])


@dataclass
class TrainConfig:
    model: str = "gcn"
    nlayers: int = 20
    hidden: int = 32
    lr: float = 1e-2
    epochs: int = 200
    seed: int = 0


def _glorot(dims, rng) -> list[np.ndarray]:
    out = []
    for a, b in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (a + b))
        out.append(rng.uniform(-lim, lim, size=(a, b)))
    return out


def _gcn_init(dims, rng) -> list[np.ndarray]:
    """Glorot init with the residual layers shrunk by 1/nlayers.

    Each residual layer adds ``L H W`` on top of ``H``; at full Glorot scale
    the activations grow geometrically over 20 layers and SGD diverges.
    """
    weights = _glorot(dims, rng)
    nl = len(weights)
    for l in range(nl - 1):
        if dims[l] == dims[l + 1]:
            weights[l] /= nl
    return weights


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def gcn_forward(model: GcnModel, L, F):
    """Return ``(p, cache)``; ``cache`` holds each layer's input and pre-activation."""
    H = np.asarray(F, dtype=float)
    if H.ndim != 2 or H.shape[1] != model.dims[0]:
        raise ValueError(f"feature matrix shape {H.shape} does not match model input {model.dims[0]}")
    if L.shape != (H.shape[0], H.shape[0]):
        raise ValueError(f"laplacian shape {L.shape} does not match {H.shape[0]} variables")
    cache = []
    for l, W in enumerate(model.weights):
        Z = L @ (H @ W)
        if model.residual(l):
            Z = Z + H
        cache.append((H, Z))
        H = _sigmoid(Z) if l == model.nlayers - 1 else np.maximum(Z, 0.0)
    return H[:, 0], cache


def cross_entropy(p, y) -> float:
    """Mean binary cross-entropy over all variables; lists of arrays are concatenated."""
    if isinstance(p, (list, tuple)) and p and np.ndim(p[0]) > 0:
        p = np.concatenate([np.asarray(a, dtype=float) for a in p])
        y = np.concatenate([np.asarray(a, dtype=float) for a in y])
    p = np.clip(np.asarray(p, dtype=float), CLAMP, 1 - CLAMP)
    y = np.asarray(y, dtype=float)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _gcn_backward(model: GcnModel, L, cache, p, y, scale: float) -> list[np.ndarray]:
    grads = [None] * model.nlayers
    dZ = ((p - y) * scale)[:, None]
    for l in range(model.nlayers - 1, -1, -1):
        H, _ = cache[l]
        LdZ = L.T @ dZ
        grads[l] = H.T @ LdZ
        if l == 0:
            break
        dH = LdZ @ model.weights[l].T
        if model.residual(l):
            dH = dH + dZ
        dZ = dH * (cache[l - 1][1] > 0)
    return grads


def gcn_gradients(model: GcnModel, examples) -> list[np.ndarray]:
    """Exact gradient of the mean cross-entropy over ``examples`` w.r.t. every weight matrix."""
    if isinstance(examples, TrainExample):
        examples = [examples]
    total = sum(len(e.labels) for e in examples)
    grads = [np.zeros_like(W) for W in model.weights]
    for e in examples:
        p, cache = gcn_forward(model, e.laplacian, e.features)
        for g, d in zip(grads, _gcn_backward(model, e.laplacian, cache, p, e.labels, 1.0 / total)):
            g += d
    return grads


def logreg_predict(model: LogRegModel, F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.shape[1] != model.dims[0]:
        raise ValueError(f"feature matrix shape {F.shape} does not match model input {model.dims[0]}")
    w, b = model.weights
    return _sigmoid(F @ w[:, 0] + b[0, 0])


def logreg_gradients(model: LogRegModel, examples) -> list[np.ndarray]:
    if isinstance(examples, TrainExample):
        examples = [examples]
    total = sum(len(e.labels) for e in examples)
    gw = np.zeros_like(model.weights[0])
    gb = np.zeros_like(model.weights[1])
    for e in examples:
        r = (logreg_predict(model, e.features) - e.labels) / total
        gw[:, 0] += e.features.T @ r
        gb[0, 0] += r.sum()
    return [gw, gb]


def predict(model, L, F) -> np.ndarray:
    """Probability vector for one instance; ``L`` is ignored by logistic regression."""
    if model.kind == "lr":
        p = logreg_predict(model, F)
    else:
        p, _ = gcn_forward(model, L, F)
    return np.clip(p, CLAMP, 1 - CLAMP)


def dataset_loss(model, examples: Sequence[TrainExample]) -> float:
    ps = [predict(model, e.laplacian, e.features) for e in examples]
    return cross_entropy(ps, [e.labels for e in examples])


def train(
    dataset: Sequence[TrainExample],
    config: TrainConfig | None = None,
    validation: Sequence[TrainExample] | None = None,
    on_epoch: Callable[[int, float, float | None], None] | None = None,
):
    """Sequential SGD, one step per instance per epoch in a seeded shuffled order.

    With ``validation`` the weights of the epoch with the lowest validation
    loss are returned, otherwise the final weights.
    """
    config = config or TrainConfig()
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    nfeat = dataset[0].features.shape[1]
    if config.model == "gcn":
        model = GcnModel([nfeat] + [config.hidden] * (config.nlayers - 1) + [1], [])
        model.weights = _gcn_init(model.dims, rng)
        grad_fn = gcn_gradients
    elif config.model == "lr":
        model = LogRegModel.init(nfeat)
        grad_fn = logreg_gradients
    else:
        raise ValueError(f"unknown model type {config.model!r}")

    best = None
    best_val = np.inf
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for idx in order:
            ex = dataset[idx]
            if on_epoch is not None:
                losses.append(dataset_loss(model, [ex]))
            grads = grad_fn(model, ex)
            for W, g in zip(model.weights, grads):
                W -= config.lr * g
        val = None
        if validation:
            val = dataset_loss(model, validation)
            if val < best_val:
                best_val = val
                best = [W.copy() for W in model.weights]
        if on_epoch is not None:
            on_epoch(epoch, float(np.mean(losses)), val)
    if best is not None:
        model.weights = best
    return model


def logreg_train(dataset, config: TrainConfig | None = None, **kw) -> LogRegModel:
    config = config or TrainConfig(model="lr")
    config.model = "lr"
    return train(dataset, config, **kw)


def average_precision(p, y) -> float:
    """Sum over ranks of ``(R_k - R_{k-1}) * P_k``, ranking by descending score (stable)."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y).astype(bool)
    npos = int(y.sum())
    if npos == 0:
        raise ValueError("average precision needs at least one positive label")
    order = np.argsort(-p, kind="stable")
    hits = y[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(p) + 1)
    return float(precision[hits].sum() / npos)


# -- model files -------------------------------------------------------------


def save_model(model, path) -> None:
    d = {
        "version": MODEL_VERSION,
        "type": model.kind,
        "dims": list(model.dims),
        "weights": [W.ravel().tolist() for W in model.weights],
    }
    Path(path).write_text(json.dumps(d) + "\n", encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from exc
    if not isinstance(d, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    if d.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {d.get('version')!r}")
    kind, dims, flat = d.get("type"), d.get("dims"), d.get("weights")
    if kind == "gcn":
        shapes = list(zip(dims[:-1], dims[1:]))
        cls = GcnModel
    elif kind == "lr":
        shapes = [(dims[0], 1), (1, 1)]
        cls = LogRegModel
    else:
        raise ModelFormatError(f"{path}: unknown model type {kind!r}")
    if not isinstance(flat, list) or len(flat) != len(shapes):
        raise ModelFormatError(f"{path}: expected {len(shapes)} weight arrays")
    weights = []
    for (a, b), w in zip(shapes, flat):
        if len(w) != a * b:
            raise ModelFormatError(f"{path}: weight array of length {len(w)} does not match {a}x{b}")
        W = np.array(w, dtype=float).reshape(a, b)
        if not np.all(np.isfinite(W)):
            raise ModelFormatError(f"{path}: non-finite weights")
        weights.append(W)
    return cls(list(dims), weights)

"""Softmax classifiers on a flat parameter vector, local SGD and weighted averaging.

Parameters for a network with layer widths ``(F, H1, ..., C)`` are stored as one
flat float64 vector laid out layer by layer as ``W (d_in x d_out)`` then ``b``.
Width tuple ``(F, C)`` is multinomial logistic regression; hidden layers use tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset

LOSS_KINDS = ("mse_onehot", "cross_entropy")
MODEL_KINDS = ("logistic", "mlp")
BITS_PER_PARAM = 32


@dataclass(frozen=True, eq=False)
class ModelParams:
    values: np.ndarray
    shape: tuple[int, ...]

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True).ravel()
        shape = tuple(int(s) for s in self.shape)
        if len(shape) < 2:
            raise ValueError("shape needs at least input and output widths")
        if vals.size != param_count(shape):
            raise ValueError(f"{vals.size} values do not fit layer widths {shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("parameters must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "shape", shape)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)

    @property
    def bits(self) -> int:
        """Wire size of the model."""
        return BITS_PER_PARAM * self.values.size

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return _unpack(self.values, self.shape)


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.001
    epochs: int = 1
    batch_size: int = 32
    loss_kind: str = "mse_onehot"
    model_kind: str = "logistic"
    hidden_dims: tuple[int, ...] = field(default=(32,))

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.model_kind == "mlp" and (not self.hidden_dims or min(self.hidden_dims) < 1):
            raise ValueError("mlp needs at least one positive hidden width")

    def layer_widths(self, feature_dim: int, class_count: int) -> tuple[int, ...]:
        if self.model_kind == "logistic":
            return (feature_dim, class_count)
        return (feature_dim, *self.hidden_dims, class_count)


@dataclass(frozen=True)
class LocalUpdate:
    device_id: int
    params: ModelParams
    sample_count: int
    train_loss: float

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


def param_count(shape: Sequence[int]) -> int:
    return sum(a * b + b for a, b in zip(shape[:-1], shape[1:]))


def _unpack(values: np.ndarray, shape: Sequence[int]) -> list[tuple[np.ndarray, np.ndarray]]:
    out, pos = [], 0
    for a, b in zip(shape[:-1], shape[1:]):
        w = values[pos : pos + a * b].reshape(a, b)
        pos += a * b
        out.append((w, values[pos : pos + b]))
        pos += b
    return out


def init_params(shape: Sequence[int], rng: np.random.Generator, scale: float = 0.05) -> ModelParams:
    return ModelParams(rng.uniform(-scale, scale, size=param_count(shape)), tuple(shape))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(values, shape, x):
    layers = _unpack(values, shape)
    acts = [x]
    for w, b in layers[:-1]:
        acts.append(np.tanh(acts[-1] @ w + b))
    w, b = layers[-1]
    return acts, acts[-1] @ w + b


def predict_proba(params: ModelParams, x: np.ndarray) -> np.ndarray:
    return _softmax(_forward(params.values, params.shape, np.asarray(x, dtype=np.float64))[1])


def _onehot(y: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((y.shape[0], c))
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def loss_from_proba(p: np.ndarray, y: np.ndarray, loss_kind: str) -> float:
    if loss_kind == "mse_onehot":
        return float(np.mean(np.mean((p - _onehot(y, p.shape[1])) ** 2, axis=1)))
    return float(np.mean(-np.log(np.clip(p[np.arange(y.shape[0]), y], 1e-300, None))))


def loss_and_grad(values: np.ndarray, shape: tuple[int, ...], x: np.ndarray, y: np.ndarray, loss_kind: str) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. the flat parameter vector."""
    n, c = x.shape[0], shape[-1]
    acts, z = _forward(values, shape, x)
    target = _onehot(y, c)
    if loss_kind == "mse_onehot":
        p = _softmax(z)
        loss = float(np.mean(np.mean((p - target) ** 2, axis=1)))
        v = 2.0 * (p - target) / c
        # softmax Jacobian-vector product
        dz = p * (v - np.sum(p * v, axis=1, keepdims=True))
    else:
        zs = z - z.max(axis=1, keepdims=True)
        logp = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
        loss = float(-np.mean(logp[np.arange(n), y]))
        dz = np.exp(logp) - target
    dz /= n

    layers = _unpack(values, shape)
    grads: list[np.ndarray] = []
    delta = dz
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        grads.append(delta.sum(axis=0))
        grads.append((acts[li].T @ delta).ravel())
        if li:
            delta = (delta @ w.T) * (1.0 - acts[li] ** 2)
    return loss, np.concatenate(grads[::-1])


def _check_fit(params: ModelParams, data: Dataset) -> None:
    if params.shape[0] != data.feature_dim:
        raise ValueError(f"model expects {params.shape[0]} features, data has {data.feature_dim}")
    if len(data) and int(data.labels.max()) >= params.shape[-1]:
        raise ValueError("data labels exceed the model's class count")


def local_loss(params: ModelParams, data: Dataset, cfg: TrainingConfig) -> float:
    if len(data) == 0:
        raise ValueError("loss of an empty dataset is undefined")
    _check_fit(params, data)
    return loss_from_proba(predict_proba(params, data.features), data.labels, cfg.loss_kind)


def local_train(params_in: ModelParams, data: Dataset, cfg: TrainingConfig, seed, device_id: int = 0) -> LocalUpdate:
    """``cfg.epochs`` passes of mini-batch SGD with a fresh seeded shuffle per epoch."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    _check_fit(params_in, data)
    rng = np.random.default_rng(seed)
    w = params_in.values.copy()
    x, y, n = data.features, data.labels, len(data)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, g = loss_and_grad(w, params_in.shape, x[idx], y[idx], cfg.loss_kind)
            w -= cfg.learning_rate * g
    out = ModelParams(w, params_in.shape)
    return LocalUpdate(device_id, out, n, local_loss(out, data, cfg))


def aggregation_weights(updates: Sequence[LocalUpdate]) -> np.ndarray:
    if not updates:
        raise ValueError("no updates to aggregate")
    counts = np.array([u.sample_count for u in updates], dtype=np.float64)
    return counts / counts.sum()


def _ordered(updates: Sequence[LocalUpdate]) -> list[LocalUpdate]:
    if not updates:
        raise ValueError("no updates to aggregate")
    ordered = sorted(updates, key=lambda u: u.device_id)
    shape = ordered[0].params.shape
    if any(u.params.shape != shape for u in ordered):
        raise ValueError("updates have mismatched parameter shapes")
    return ordered


def aggregate(updates: Sequence[LocalUpdate]) -> ModelParams:
    """Sample-count weighted average, summed in ascending device id."""
    ordered = _ordered(updates)
    weights = aggregation_weights(ordered)
    # offsets from the first update: identical inputs reproduce it bit for bit
    base = ordered[0].params.values
    total = base.copy()
    for wk, u in zip(weights, ordered):
        total += wk * (u.params.values - base)
    return ModelParams(total, ordered[0].params.shape)


def global_loss(updates: Sequence[LocalUpdate]) -> float:
    ordered = _ordered(updates)
    weights = aggregation_weights(ordered)
    return float(sum(wk * u.train_loss for wk, u in zip(weights, ordered)))


def evaluate(params: ModelParams, test: Dataset, loss_kind: str = "mse_onehot") -> tuple[float, float]:
    """(accuracy, loss) of ``params`` on ``test``."""
    if len(test) == 0:
        raise ValueError("empty test set")
    _check_fit(params, test)
    p = predict_proba(params, test.features)
    acc = float(np.mean(np.argmax(p, axis=1) == test.labels))
    return acc, loss_from_proba(p, test.labels, loss_kind)

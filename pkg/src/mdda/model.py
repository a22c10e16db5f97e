"""A small fully-connected softmax classifier with hand-written backprop.

The victim model for the attack/defense experiments: flatten -> zero or
more ReLU hidden layers -> K logits. Everything is float64 and written
against the package's deterministic RNG, so training twice with one seed
reproduces the weights bit for bit on any platform.

Serialization format (little-endian binary):

    magic  b"MDDATOY1"
    u32    height, width, channels, n_classes, n_hidden
    u32[n_hidden]            hidden layer sizes
    f64[...] per layer       weight matrix (out x in, row-major), then bias

Layer count is n_hidden + 1 (the final linear map to logits).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import DimensionMismatchError, as_image
from .rng import RngState

_MAGIC = b"MDDATOY1"


@dataclass(frozen=True)
class ClassifierModel:
    """Immutable MLP weights plus the input geometry they expect."""

    input_dims: tuple[int, int, int]  # (height, width, channels)
    n_classes: int
    weights: tuple[np.ndarray, ...]  # each (fan_out, fan_in)
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        fan_in = int(np.prod(self.input_dims))
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != fan_in or w.shape[0] != b.shape[0]:
                raise DimensionMismatchError(
                    f"layer shapes do not chain: {w.shape} after fan-in {fan_in}"
                )
            fan_in = w.shape[0]
        if fan_in != self.n_classes:
            raise DimensionMismatchError(
                f"final layer width {fan_in} != n_classes {self.n_classes}"
            )
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite weights")

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters for the toy victim."""

    hidden_sizes: tuple[int, ...] = (64,)
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("invalid training hyperparameters")


def _flatten_batch(model: ClassifierModel, imgs: np.ndarray) -> np.ndarray:
    if imgs.ndim == 3:
        imgs = imgs[None]
    if imgs.shape[1:] != model.input_dims:
        raise DimensionMismatchError(
            f"input dims {imgs.shape[1:]} do not match model {model.input_dims}"
        )
    return imgs.reshape(imgs.shape[0], -1)


def _forward_cached(model, x):
    """Forward pass keeping pre-activations for backprop. x: (n, fan_in)."""
    pre = []
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0)
    logits = h @ model.weights[-1].T + model.biases[-1]
    return logits, pre


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: ClassifierModel, img) -> np.ndarray:
    """Logits for one image, shape (n_classes,)."""
    x = _flatten_batch(model, as_image(img))
    logits, _ = _forward_cached(model, x)
    return logits[0]


def forward_batch(model: ClassifierModel, imgs: np.ndarray) -> np.ndarray:
    """Logits for a stack of images, shape (n, n_classes)."""
    logits, _ = _forward_cached(model, _flatten_batch(model, imgs))
    return logits


def input_gradient_from_dlogits(model, imgs, dlogits):
    """Backpropagate d(objective)/d(logits) to the input pixels.

    Accepts one image or a stack; returns gradients with matching shape.
    The attacks only ever need input gradients, so objectives built from
    logits (cross-entropy, margins) all share this path.
    """
    single = np.asarray(imgs).ndim == 3
    imgs = as_image(imgs) if single else np.asarray(imgs, dtype=np.float64)
    x = _flatten_batch(model, imgs)
    _, pre = _forward_cached(model, x)
    d = np.atleast_2d(dlogits)
    for w, z in zip(model.weights[:0:-1], pre[::-1]):
        d = (d @ w) * (z > 0.0)
    d = d @ model.weights[0]
    grads = d.reshape((-1,) + model.input_dims)
    return grads[0] if single else grads


def loss_and_input_gradient(model, img, label: int):
    """Cross-entropy loss and its exact gradient w.r.t. the input pixels."""
    img = as_image(img)
    if not 0 <= label < model.n_classes:
        raise ValueError(f"label {label} outside 0..{model.n_classes - 1}")
    logits = forward(model, img)
    p = softmax(logits)
    loss = -float(np.log(max(p[label], 1e-300)))
    dlogits = p.copy()
    dlogits[label] -= 1.0
    return loss, input_gradient_from_dlogits(model, img, dlogits)


def predict(model: ClassifierModel, img) -> int:
    """Argmax class; ties resolve to the lowest index."""
    return int(np.argmax(forward(model, img)))


def predict_batch(model: ClassifierModel, imgs: np.ndarray) -> np.ndarray:
    return np.argmax(forward_batch(model, imgs), axis=1)


def accuracy(model: ClassifierModel, dataset) -> float:
    """Fraction of dataset items whose argmax prediction matches the label."""
    preds = predict_batch(model, dataset.images)
    return float(np.mean(preds == dataset.labels))


def init_model(input_dims, n_classes, hidden_sizes=(64,), seed: int = 0) -> ClassifierModel:
    """He-scaled random initialization from the deterministic stream."""
    rng = RngState(seed).child("init")
    sizes = [int(np.prod(input_dims))] + list(hidden_sizes) + [n_classes]
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(scale * rng.child(i).normal(fan_out * fan_in).reshape(fan_out, fan_in))
        biases.append(np.zeros(fan_out))
    return ClassifierModel(
        input_dims=tuple(input_dims),
        n_classes=n_classes,
        weights=tuple(weights),
        biases=tuple(biases),
    )


def train(dataset, cfg: TrainConfig = TrainConfig()) -> ClassifierModel:
    """Minibatch SGD on cross-entropy; deterministic for a fixed seed."""
    n = len(dataset.labels)
    if n == 0:
        raise ValueError("empty training dataset")
    model = init_model(dataset.images.shape[1:], dataset.n_classes, cfg.hidden_sizes, cfg.seed)
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    x_all = dataset.images.reshape(n, -1)
    y_all = dataset.labels
    shuffler = RngState(cfg.seed).child("shuffle")
    for epoch in range(cfg.epochs):
        order = shuffler.child(epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x, y = x_all[idx], y_all[idx]
            # forward
            pre, acts = [], [x]
            h = x
            for w, b in zip(weights[:-1], biases[:-1]):
                z = h @ w.T + b
                pre.append(z)
                h = np.maximum(z, 0.0)
                acts.append(h)
            logits = h @ weights[-1].T + biases[-1]
            d = softmax(logits)
            d[np.arange(len(y)), y] -= 1.0
            d /= len(y)
            # backward
            for li in range(len(weights) - 1, -1, -1):
                dw = d.T @ acts[li]
                db = d.sum(axis=0)
                if li > 0:
                    d = (d @ weights[li]) * (pre[li - 1] > 0.0)
                weights[li] -= cfg.learning_rate * dw
                biases[li] -= cfg.learning_rate * db
    return ClassifierModel(
        input_dims=model.input_dims,
        n_classes=model.n_classes,
        weights=tuple(weights),
        biases=tuple(biases),
    )


def save_model(model: ClassifierModel, path) -> None:
    path = Path(path)
    h, w, c = model.input_dims
    parts = [_MAGIC, struct.pack("<5I", h, w, c, model.n_classes, len(model.hidden_sizes))]
    parts.append(struct.pack(f"<{len(model.hidden_sizes)}I", *model.hidden_sizes))
    for wt, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(wt, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    path.write_bytes(b"".join(parts))


def load_model(path) -> ClassifierModel:
    data = Path(path).read_bytes()
    if data[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"not a model file: {path}")
    off = len(_MAGIC)
    h, w, c, k, n_hidden = struct.unpack_from("<5I", data, off)
    off += 20
    hidden = struct.unpack_from(f"<{n_hidden}I", data, off)
    off += 4 * n_hidden
    sizes = [h * w * c] + list(hidden) + [k]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        wt = np.frombuffer(data, dtype="<f8", count=fan_out * fan_in, offset=off)
        off += 8 * fan_out * fan_in
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(wt.reshape(fan_out, fan_in).copy())
        biases.append(b.copy())
    if off != len(data):
        raise ValueError(f"trailing bytes in model file: {path}")
    return ClassifierModel(
        input_dims=(h, w, c), n_classes=k, weights=tuple(weights), biases=tuple(biases)
    )

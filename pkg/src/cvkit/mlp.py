"""Fully connected classifier mapping correlation patterns to three
entanglement probabilities.

Architecture 2304-1024-128-64-3: three ReLU hidden layers with inverted
dropout during training, sigmoid outputs, binary cross-entropy loss and
Adam updates.  Everything is plain numpy; gradients are exact (verified
against central finite differences in the test suite).  The 64-dim
post-ReLU activations of the last hidden layer double as the feature
vector consumed by the clustering tools.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .homodyne import CorrelationPattern
from .witness import LabelVector

LAYER_DIMS = (2304, 1024, 128, 64, 3)
PROB_CLIP = 1e-7
CHECKPOINT_MAGIC = b"CVNN1"


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite losses or activations."""


@dataclass
class MlpModel:
    """Weights y = x W + b per layer, plus Adam moment buffers."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[0]]
                     + [w.shape[1] for w in self.weights])

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            m_w=[m.copy() for m in self.m_w],
            v_w=[v.copy() for v in self.v_w],
            m_b=[m.copy() for m in self.m_b],
            v_b=[v.copy() for v in self.v_b],
            step=self.step,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3000
    batch_size: int = 64
    learning_rate: float = 1e-3
    dropout_rate: float = 0.2
    val_fraction: float = 0.3
    seed: int = 0
    threshold: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


def init_model(seed, dims: tuple[int, ...] = LAYER_DIMS) -> MlpModel:
    """He-scaled normal weights (std sqrt(2/fan_in)), zero biases and
    Adam moments."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out))
                       * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        weights=weights,
        biases=biases,
        m_w=[np.zeros_like(w) for w in weights],
        v_w=[np.zeros_like(w) for w in weights],
        m_b=[np.zeros_like(b) for b in biases],
        v_b=[np.zeros_like(b) for b in biases],
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def pattern_input(pattern) -> np.ndarray:
    """Flatten a CorrelationPattern (or pass through a vector/batch)."""
    if isinstance(pattern, CorrelationPattern):
        return pattern.flat()
    return np.asarray(pattern, dtype=float)


def _forward_cached(model: MlpModel, x: np.ndarray, train_mode: bool,
                    rng, dropout_rate: float):
    """Batch forward pass keeping pre-activations and dropout masks."""
    n_layers = len(model.weights)
    h = x
    pre, post, masks = [], [x], []
    for i in range(n_layers - 1):
        z = h @ model.weights[i] + model.biases[i]
        a = np.maximum(z, 0.0)
        if train_mode and dropout_rate > 0.0:
            if rng is None:
                raise ValueError("train_mode with dropout needs an rng")
            keep = 1.0 - dropout_rate
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        else:
            mask = None
        pre.append(z)
        post.append(a)
        masks.append(mask)
        h = a
    z_out = h @ model.weights[-1] + model.biases[-1]
    probs = _sigmoid(z_out)
    if not np.isfinite(probs).all():
        raise DivergenceError("non-finite activations in forward pass")
    return probs, pre, post, masks


def forward(model: MlpModel, pattern, train_mode: bool = False, rng=None,
            dropout_rate: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """(sigmoid probabilities, last-hidden-layer features).

    Accepts a single pattern or a batch; dropout is applied only when
    train_mode is set and the rate is positive.
    """
    x = pattern_input(pattern)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    probs, _, post, _ = _forward_cached(model, x, train_mode, rng,
                                        dropout_rate)
    features = post[-1]
    if single:
        return probs[0], features[0]
    return probs, features


def bce_loss(probs: np.ndarray, labels) -> float:
    """Binary cross-entropy, averaged over the 3 heads (and any batch),
    with probabilities clipped to [1e-7, 1 - 1e-7]."""
    y = labels.as_array() if isinstance(labels, LabelVector) else np.asarray(
        labels, dtype=float)
    p = np.clip(np.asarray(probs, dtype=float), PROB_CLIP, 1.0 - PROB_CLIP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def backprop(model: MlpModel, x: np.ndarray, y: np.ndarray,
             train_mode: bool = False, rng=None, dropout_rate: float = 0.0):
    """Loss and exact gradients for a batch.

    Returns (loss, grad_weights, grad_biases).  The gradient of the clip
    in bce_loss is honored: saturated heads contribute zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    probs, pre, post, masks = _forward_cached(model, x, train_mode, rng,
                                              dropout_rate)
    batch, n_out = probs.shape
    loss = bce_loss(probs, y)

    inside = (probs > PROB_CLIP) & (probs < 1.0 - PROB_CLIP)
    delta = np.where(inside, probs - y, 0.0) / (batch * n_out)

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    grad_w[-1] = post[-1].T @ delta
    grad_b[-1] = delta.sum(axis=0)
    up = delta @ model.weights[-1].T
    for i in range(len(model.weights) - 2, -1, -1):
        if masks[i] is not None:
            up = up * masks[i]
        up = up * (pre[i] > 0)
        grad_w[i] = post[i].T @ up
        grad_b[i] = up.sum(axis=0)
        if i > 0:
            up = up @ model.weights[i].T
    return loss, grad_w, grad_b


def adam_step(model: MlpModel, grad_w, grad_b, config: TrainConfig) -> None:
    """One in-place Adam update with bias-corrected moments.

    Uses the folded form theta -= lr*sqrt(c2)/c1 * m / (sqrt(v) + eps*sqrt(c2)),
    algebraically identical to (m/c1) / (sqrt(v/c2) + eps) but with fewer
    large temporaries.
    """
    model.step += 1
    t = model.step
    b1, b2, eps, lr = config.beta1, config.beta2, config.eps, config.learning_rate
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    alpha = lr * np.sqrt(c2) / c1
    eps_hat = eps * np.sqrt(c2)
    for i in range(len(model.weights)):
        for param, grad, m, v in (
                (model.weights[i], grad_w[i], model.m_w[i], model.v_w[i]),
                (model.biases[i], grad_b[i], model.m_b[i], model.v_b[i])):
            scratch = np.empty_like(grad)
            np.multiply(grad, 1.0 - b1, out=scratch)
            m *= b1
            m += scratch
            np.square(grad, out=scratch)
            scratch *= 1.0 - b2
            v *= b2
            v += scratch
            np.sqrt(v, out=scratch)
            scratch += eps_hat
            np.divide(m, scratch, out=scratch)
            scratch *= alpha
            param -= scratch


@dataclass
class TrainResult:
    final_model: MlpModel
    best_model: MlpModel
    best_epoch: int
    history: list[dict] = field(default_factory=list)


def _dataset_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([pattern_input(p) for p, _ in dataset])
    ys = np.stack([l.as_array() if isinstance(l, LabelVector)
                   else np.asarray(l, dtype=float) for _, l in dataset])
    return xs, ys


def train(model: MlpModel, dataset, config: TrainConfig) -> TrainResult:
    """Minibatch Adam on a 70/30 shuffled split.

    History records per epoch: mean train-batch loss, validation loss and
    per-label validation accuracy.  Keeps both the final-epoch model and
    the best-validation-loss checkpoint.
    """
    xs, ys = _dataset_arrays(dataset)
    n = xs.shape[0]
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_val = int(round(config.val_fraction * n))
    if n_val == 0 or n_val == n:
        raise ValueError(f"dataset of {n} items cannot be split "
                         f"{1 - config.val_fraction:.0%}/{config.val_fraction:.0%}")
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr = xs[train_idx], ys[train_idx]
    x_val, y_val = xs[val_idx], ys[val_idx]

    best_val = np.inf
    best_model = model.copy()
    best_epoch = 0
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(x_tr))
        loss_sum, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, gw, gb = backprop(model, x_tr[batch], y_tr[batch],
                                    train_mode=True, rng=rng,
                                    dropout_rate=config.dropout_rate)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss diverged at epoch {epoch}, batch offset {start}: {loss}")
            adam_step(model, gw, gb, config)
            loss_sum += loss * len(batch)
            seen += len(batch)

        val_probs, _ = forward(model, x_val)
        val_loss = bce_loss(val_probs, y_val)
        val_acc = ((val_probs >= config.threshold) == (y_val >= 0.5)).mean(axis=0)
        history.append({
            "epoch": epoch,
            "train_loss": loss_sum / seen,
            "val_loss": val_loss,
            "acc_ppt": float(val_acc[0]),
            "acc_qfi1": float(val_acc[1]),
            "acc_qfi2": float(val_acc[2]),
        })
        if val_loss < best_val:
            best_val = val_loss
            best_model = model.copy()
            best_epoch = epoch
    return TrainResult(final_model=model, best_model=best_model,
                       best_epoch=best_epoch, history=history)


def predict_labels(model: MlpModel, pattern,
                   threshold: float = 0.5) -> tuple[np.ndarray, LabelVector]:
    """Sigmoid outputs thresholded at 0.5 (inclusive) into binary labels."""
    probs, _ = forward(model, pattern)
    bits = (probs >= threshold).astype(int)
    return probs, LabelVector(int(bits[0]), int(bits[1]), int(bits[2]))


def signed_scores(model: MlpModel, pattern) -> np.ndarray:
    """2p - 1 per head: positive means entangled, 0 is the 50/50 point."""
    probs, _ = forward(model, pattern)
    return 2.0 * probs - 1.0


def evaluate_accuracy(model: MlpModel, testset) -> np.ndarray:
    """Per-label fraction of exact matches over (pattern, labels) pairs."""
    if len(testset) == 0:
        raise ValueError("empty test set")
    xs, ys = _dataset_arrays(testset)
    probs, _ = forward(model, xs)
    return ((probs >= 0.5) == (ys >= 0.5)).mean(axis=0)


def save_model(model: MlpModel, path) -> None:
    """Checkpoint: magic CVNN1, u32 layer count, u32 dims, then per layer
    the row-major float64 weight matrix and bias vector, little-endian."""
    dims = model.dims
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(model.weights)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> MlpModel:
    """Inverse of save_model; Adam moments are reset to zero."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{n_layers + 1}I", fh.read(4 * (n_layers + 1)))
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            weights.append(w.reshape(fan_in, fan_out).copy())
            biases.append(np.frombuffer(fh.read(8 * fan_out),
                                        dtype="<f8").copy())
        if fh.read(1):
            raise ValueError("trailing bytes in checkpoint")
    return MlpModel(
        weights=weights,
        biases=biases,
        m_w=[np.zeros_like(w) for w in weights],
        v_w=[np.zeros_like(v) for v in weights],
        m_b=[np.zeros_like(b) for b in biases],
        v_b=[np.zeros_like(b) for b in biases],
    )

"""Training loop, loss, SGD with momentum, and finite-difference grad checks.

Training operates on week tensors: every (user week, user label) pair is one
sample. Users are split into train/validation partitions before any weeks
are seen, so no user contributes to both sides, and the channel normalizer
is fitted on the training partition only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featurize import (
    DEFAULT_AGE_EDGES,
    AgeBuckets,
    NormStats,
    TensorDataset,
    apply_normalizer,
    bucketize_age,
    fit_normalizer,
)
from .ingest import LabelRecord
from .net import ModelParams, NetworkConfig, backward, forward, forward_batch, init_params

GRAD_TOL = 1e-4
ATTRIBUTES = ("gender", "age")


class NumericError(ArithmeticError):
    """Loss or gradients stopped being finite during optimization."""


def cross_entropy(probs, labels) -> float:
    """Mean negative log-likelihood; probabilities are clipped at 1e-12.

    Accepts a single (K,) row with an int label or an (N, K) batch with an
    (N,) label vector.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 1:
        p = p[None]
        labels = [labels]
    idx = np.asarray(labels, dtype=np.intp)
    picked = p[np.arange(len(p)), idx]
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def loss_gradient(probs, labels) -> np.ndarray:
    """d(mean cross-entropy)/d(logits) = (probs - onehot) / N."""
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    if single:
        p = p[None]
        labels = [labels]
    idx = np.asarray(labels, dtype=np.intp)
    grad = p.copy()
    grad[np.arange(len(p)), idx] -= 1.0
    grad /= len(p)
    return grad[0] if single else grad


def sgd_step(
    tensors: dict[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    learning_rate: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
) -> None:
    """In-place momentum update: v = mu*v - lr*(g + wd*w); w += v."""
    for name, w in tensors.items():
        g = grads[name]
        if weight_decay != 0.0 and name.endswith(".w"):
            g = g + weight_decay * w
        v = velocity[name]
        v *= momentum
        v -= learning_rate * g
        w += v


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    weight_decay: float = 0.0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float | None

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_accuracy": self.val_accuracy,
        }


def class_assignments(
    user_ids: list[str],
    labels: dict[str, LabelRecord],
    attribute: str,
    age_edges: tuple[int, ...] = DEFAULT_AGE_EDGES,
) -> tuple[dict[str, int], tuple[str, ...]]:
    """Map each labeled user to a class index; returns (assignment, class names).

    Gender classes are the sorted distinct values seen in the labels; age
    classes are the bucket intervals. Users absent from the labels are left
    out of the assignment.
    """
    if attribute not in ATTRIBUTES:
        raise ValueError(f"unknown attribute {attribute!r}, expected one of {ATTRIBUTES}")
    known = [u for u in user_ids if u in labels]
    if attribute == "gender":
        classes = tuple(sorted({labels[u].gender for u in known}))
        if len(classes) < 2:
            raise ValueError("need at least two distinct gender values to train")
        index = {c: k for k, c in enumerate(classes)}
        return {u: index[labels[u].gender] for u in known}, classes
    buckets = AgeBuckets(tuple(age_edges))
    assign = {u: bucketize_age(labels[u].age_years, buckets) for u in known}
    return assign, buckets.class_labels()


def split_users(user_ids: list[str], val_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Deterministic user-level split; validation gets round(frac * n) users."""
    order = list(user_ids)
    rng = np.random.default_rng(seed)
    rng.shuffle(order)
    n_val = int(round(val_fraction * len(order)))
    n_val = min(n_val, len(order) - 1)
    val = sorted(order[:n_val])
    train = sorted(order[n_val:])
    return train, val


def train(
    dataset: TensorDataset,
    labels: dict[str, LabelRecord],
    attribute: str,
    config: TrainConfig,
    net_config: NetworkConfig | None = None,
    age_edges: tuple[int, ...] = DEFAULT_AGE_EDGES,
) -> tuple[ModelParams, list[EpochStats]]:
    """Fit the network on week tensors grouped by user.

    Unlabeled users are skipped. The normalizer is refitted on the training
    partition (any stats shipped with the dataset are ignored). Raises
    NumericError if the loss leaves the finite range.
    """
    grouped = dataset.by_user()
    assign, class_names = class_assignments(list(grouped), labels, attribute, age_edges)
    by_user = {u: t for u, t in grouped.items() if u in assign}
    if not by_user:
        raise ValueError("no labeled users in the dataset")

    train_users, val_users = split_users(list(by_user), config.val_fraction, config.seed)

    stats = fit_normalizer(np.concatenate([by_user[u] for u in train_users], axis=0))

    def stack(users: list[str]) -> tuple[np.ndarray, np.ndarray]:
        xs = [apply_normalizer(by_user[u], stats) for u in users]
        ys = [np.full(len(by_user[u]), assign[u], dtype=np.intp) for u in users]
        return np.concatenate(xs, axis=0), np.concatenate(ys)

    x_train, y_train = stack(train_users)
    x_val, y_val = stack(val_users) if val_users else (None, None)

    if net_config is None:
        net_config = NetworkConfig(classes=len(class_names))
    elif net_config.classes != len(class_names):
        raise ValueError(
            f"network emits {net_config.classes} classes but labels define {len(class_names)}"
        )

    params = init_params(net_config, config.seed)
    params.norm_stats = stats
    params.attribute = attribute
    params.class_labels = class_names
    if attribute == "age":
        params.age_edges = tuple(int(e) for e in age_edges)

    velocity = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    rng = np.random.default_rng(config.seed + 1)
    n = len(x_train)
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            probs, _, trace = forward_batch(params, x_train[idx])
            loss = cross_entropy(probs, y_train[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            grads = backward(params, trace, loss_gradient(probs, y_train[idx]))
            sgd_step(
                params.tensors,
                velocity,
                grads,
                config.learning_rate,
                config.momentum,
                config.weight_decay,
            )
            total += loss * len(idx)
            seen += len(idx)

        val_acc = None
        if x_val is not None:
            probs, _, _ = forward_batch(params, x_val)
            val_acc = float((probs.argmax(axis=1) == y_val).mean())
        history.append(EpochStats(epoch=epoch, train_loss=total / seen, val_accuracy=val_acc))

    return params, history


def max_relative_error(a: float, b: float) -> float:
    """|a - b| / max(1e-8, |a| + |b|)."""
    return abs(a - b) / max(1e-8, abs(a) + abs(b))


def grad_check(params: ModelParams, x, label: int, step: float = 1e-5) -> dict[str, float]:
    """Central-difference check of every parameter gradient on one sample.

    Returns the worst relative error per parameter tensor; all values should
    sit below GRAD_TOL when the analytic backward pass is correct. Keep the
    network small: cost is two forward passes per scalar parameter.
    """
    x = np.asarray(x, dtype=np.float64)
    probs, _, trace = forward(params, x)
    analytic = backward(params, trace, loss_gradient(probs, label))

    worst: dict[str, float] = {}
    for name, tensor in params.tensors.items():
        flat = tensor.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        err = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = cross_entropy(forward(params, x)[0], label)
            flat[i] = orig - step
            minus = cross_entropy(forward(params, x)[0], label)
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * step)
            err = max(err, max_relative_error(numeric, grad_flat[i]))
        worst[name] = err
    return worst

"""User-level prediction heads, a linear one-vs-rest SVM, and evaluation.

Two strategies turn per-week network outputs into one answer per user:

* averaging: the per-week softmax vectors are averaged arithmetically and
  the argmax of the average is the prediction;
* feature extractor + SVM: the last hidden activation (dense8) is averaged
  across the user's weeks and fed to a linear SVM trained with projected
  stochastic subgradient descent on the regularized hinge objective
  (Pegasos-style step sizes).

Ties always break toward the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .featurize import (
    DEFAULT_AGE_EDGES,
    STD_FLOOR,
    AgeBuckets,
    TensorDataset,
    apply_normalizer,
    bucketize_age,
)
from .ingest import LabelRecord
from .net import ModelParams, forward_batch

FEATURE_LAYER = "dense8"


@dataclass(frozen=True)
class UserPrediction:
    """One user's aggregated prediction.

    scores holds averaged class probabilities for the averaging head and
    per-class decision margins for the SVM head; class_index is its argmax.
    """

    user_id: str
    scores: np.ndarray
    class_index: int
    weeks_used: int


def _user_batch(model: ModelParams, weeks) -> np.ndarray:
    stack = np.asarray(weeks, dtype=np.float64)
    if stack.ndim == 3:
        stack = stack[None]
    if stack.ndim != 4 or len(stack) == 0:
        raise ValueError("need at least one week tensor")
    if model.norm_stats is not None:
        stack = apply_normalizer(stack, model.norm_stats)
    return stack


def predict_user(model: ModelParams, weeks, user_id: str = "") -> UserPrediction:
    """Average the per-week softmax vectors; argmax of the mean is the class."""
    probs, _, _ = forward_batch(model, _user_batch(model, weeks))
    mean = probs.mean(axis=0)
    return UserPrediction(
        user_id=user_id,
        scores=mean,
        class_index=int(np.argmax(mean)),
        weeks_used=len(probs),
    )


def extract_user_features(model: ModelParams, weeks) -> np.ndarray:
    """Mean dense8 activation across the user's weeks (the SVM feature vector)."""
    _, feats, _ = forward_batch(model, _user_batch(model, weeks))
    return feats.mean(axis=0)


@dataclass
class SvmModel:
    """One-vs-rest linear classifiers over the dense8 feature space.

    Weights are (K, d), biases (K,). Features are standardized with the
    stored training-set mean/std before scoring. objective_history holds
    the per-class epoch-end objective curves from training and is not
    serialized.
    """

    weights: np.ndarray
    bias: np.ndarray
    lam: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    feature_layer: str = FEATURE_LAYER
    class_labels: tuple[str, ...] | None = None
    objective_history: list[list[float]] = field(default_factory=list, repr=False)


def _hinge_objective(w, b, x, y, lam) -> float:
    margins = y * (x @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * lam * (w @ w) + hinge.mean())


def train_linear_svm(
    features,
    labels,
    lam: float = 1e-4,
    epochs: int = 50,
    seed: int = 0,
    class_labels: tuple[str, ...] | None = None,
) -> SvmModel:
    """Train K one-vs-rest hinge classifiers with Pegasos step sizes.

    Per step t (1-based): eta = 1/(lam*t); w shrinks by (1 - 1/t); on a
    margin violation (y*(w.x+b) < 1) w gains eta*y*x and b gains eta*y; w is
    then projected onto the ball of radius 1/sqrt(lam). The bias is not
    regularized. Each class trains on its own rng stream spawned from the
    seed, so results are independent of class training order.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (N, d) feature matrix, got shape {np.shape(features)}")
    y_all = np.asarray(labels, dtype=np.intp)
    if len(y_all) != len(x):
        raise ValueError("features and labels have different lengths")
    n_classes = len(class_labels) if class_labels is not None else int(y_all.max()) + 1
    if len(np.unique(y_all)) < 2:
        raise ValueError("need at least two classes present in the training labels")
    if lam <= 0.0 or epochs < 1:
        raise ValueError("lam must be positive and epochs at least 1")

    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    z = (x - mean) / std

    n, d = z.shape
    weights = np.zeros((n_classes, d))
    bias = np.zeros(n_classes)
    history: list[list[float]] = []
    radius = 1.0 / np.sqrt(lam)

    streams = np.random.SeedSequence(seed).spawn(n_classes)
    for k in range(n_classes):
        rng = np.random.default_rng(streams[k])
        y = np.where(y_all == k, 1.0, -1.0)
        w = np.zeros(d)
        b = 0.0
        t = 0
        curve: list[float] = []
        for _ in range(epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                w *= 1.0 - 1.0 / t
                if y[i] * (w @ z[i] + b) < 1.0:
                    w += eta * y[i] * z[i]
                    b += eta * y[i]
                norm = np.sqrt(w @ w)
                if norm > radius:
                    w *= radius / norm
            curve.append(_hinge_objective(w, b, z, y, lam))
        weights[k] = w
        bias[k] = b
        history.append(curve)

    return SvmModel(
        weights=weights,
        bias=bias,
        lam=lam,
        feature_mean=mean,
        feature_std=std,
        class_labels=class_labels,
        objective_history=history,
    )


def svm_margins(svm: SvmModel, features) -> np.ndarray:
    """Per-class decision values w_c.z + b_c for one vector or an (N, d) batch."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != svm.weights.shape[1]:
        raise ValueError(
            f"feature dim {x.shape[-1]} does not match SVM dim {svm.weights.shape[1]}"
        )
    z = (x - svm.feature_mean) / svm.feature_std
    return z @ svm.weights.T + svm.bias


def svm_predict(svm: SvmModel, features):
    """Argmax class of the decision values; ties go to the lowest index."""
    margins = svm_margins(svm, features)
    idx = np.argmax(margins, axis=-1)
    return int(idx) if margins.ndim == 1 else idx


def svm_predict_user(model: ModelParams, svm: SvmModel, weeks, user_id: str = "") -> UserPrediction:
    """SVM head: score the user's averaged dense8 features."""
    stack = np.asarray(weeks, dtype=np.float64)
    feats = extract_user_features(model, weeks)
    margins = svm_margins(svm, feats)
    return UserPrediction(
        user_id=user_id,
        scores=margins,
        class_index=int(np.argmax(margins)),
        weeks_used=1 if stack.ndim == 3 else len(stack),
    )


def predict_dataset(
    model: ModelParams, dataset: TensorDataset, head: str = "avg"
) -> list[UserPrediction]:
    """Predict every user in the dataset with the chosen head, sorted by user id."""
    if head not in ("avg", "svm"):
        raise ValueError(f"unknown head {head!r}, expected 'avg' or 'svm'")
    if head == "svm" and model.svm is None:
        raise ValueError("model carries no SVM head; train one first")
    out = []
    for user_id, weeks in dataset.by_user().items():
        if head == "avg":
            out.append(predict_user(model, weeks, user_id=user_id))
        else:
            out.append(svm_predict_user(model, model.svm, weeks, user_id=user_id))
    return out


def class_index_for_label(
    record: LabelRecord,
    attribute: str,
    class_labels: tuple[str, ...],
    age_edges: tuple[int, ...] = DEFAULT_AGE_EDGES,
) -> int:
    """Map a raw label row to a class index the same way training does."""
    if attribute == "gender":
        try:
            return class_labels.index(record.gender)
        except ValueError:
            raise ValueError(
                f"gender {record.gender!r} not among trained classes {class_labels}"
            ) from None
    if attribute == "age":
        return bucketize_age(record.age_years, AgeBuckets(tuple(age_edges)))
    raise ValueError(f"unknown attribute {attribute!r}")


def train_svm_head(
    model: ModelParams,
    dataset: TensorDataset,
    labels: dict[str, LabelRecord],
    lam: float = 1e-4,
    epochs: int = 50,
    seed: int = 0,
    val_fraction: float = 0.0,
) -> SvmModel:
    """Fit the SVM head on per-user features from the model's feature layer.

    Users are mapped to classes with the model's own label rule, and the
    same deterministic user split as network training keeps any validation
    users out of the SVM's training set.
    """
    from .training import split_users

    if model.attribute is None or model.class_labels is None:
        raise ValueError("model carries no attribute/class metadata")
    edges = model.age_edges if model.age_edges is not None else DEFAULT_AGE_EDGES
    by_user = dataset.by_user()
    users = [u for u in by_user if u in labels]
    if not users:
        raise ValueError("no labeled users in the dataset")
    train_users, _ = split_users(users, val_fraction, seed)

    feats = np.stack([extract_user_features(model, by_user[u]) for u in train_users])
    y = [
        class_index_for_label(labels[u], model.attribute, model.class_labels, edges)
        for u in train_users
    ]
    return train_linear_svm(
        feats, y, lam=lam, epochs=epochs, seed=seed, class_labels=model.class_labels
    )


@dataclass(frozen=True)
class Metrics:
    """Evaluation summary; confusion rows are true classes, columns predicted."""

    n_users: int
    accuracy: float
    majority_accuracy: float
    uniform_accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    class_labels: tuple[str, ...] | None = None

    def to_json(self) -> dict:
        return {
            "n_users": self.n_users,
            "accuracy": self.accuracy,
            "majority_accuracy": self.majority_accuracy,
            "uniform_accuracy": self.uniform_accuracy,
            "confusion": self.confusion.tolist(),
            "precision": [float(p) for p in self.precision],
            "recall": [float(r) for r in self.recall],
            "class_labels": list(self.class_labels) if self.class_labels else None,
        }


def evaluate(
    predictions,
    truth,
    n_classes: int | None = None,
    class_labels: tuple[str, ...] | None = None,
) -> Metrics:
    """Score (user_id, class index) predictions against a truth mapping.

    predictions may be UserPrediction objects or (user_id, class) pairs;
    truth is a dict or pair list. Every predicted user must have a truth
    entry. The majority baseline is the frequency of the most common true
    class; the uniform baseline is 1/K.
    """
    pairs = [
        (p.user_id, p.class_index) if isinstance(p, UserPrediction) else (p[0], int(p[1]))
        for p in predictions
    ]
    truth_map = dict(truth) if not isinstance(truth, dict) else truth
    if not pairs:
        raise ValueError("no predictions to evaluate")
    missing = [u for u, _ in pairs if u not in truth_map]
    if missing:
        raise ValueError(f"no truth label for user(s) {missing[:5]}")

    true = np.array([int(truth_map[u]) for u, _ in pairs], dtype=np.intp)
    pred = np.array([c for _, c in pairs], dtype=np.intp)
    if n_classes is None:
        n_classes = len(class_labels) if class_labels else int(max(true.max(), pred.max())) + 1

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)
    diag = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros(n_classes), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(n_classes), where=row > 0)

    n = len(pairs)
    return Metrics(
        n_users=n,
        accuracy=float((true == pred).mean()),
        majority_accuracy=float(row.max() / n),
        uniform_accuracy=1.0 / n_classes,
        confusion=confusion,
        precision=precision,
        recall=recall,
        class_labels=class_labels,
    )


def write_predictions(path, predictions: list[UserPrediction]) -> None:
    """CSV "user_id,predicted_class,p_0,...,p_{K-1}"; scores use repr floats.

    The schema is the same for both heads; with the SVM head the p_ columns
    carry decision margins instead of probabilities.
    """
    if not predictions:
        raise ValueError("no predictions to write")
    k = len(predictions[0].scores)
    header = "user_id,predicted_class," + ",".join(f"p_{i}" for i in range(k))
    lines = [header]
    for p in predictions:
        scores = ",".join(repr(float(v)) for v in p.scores)
        lines.append(f"{p.user_id},{p.class_index},{scores}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_predictions(path) -> list[UserPrediction]:
    """Parse a predictions CSV back into UserPrediction rows (weeks_used 0)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("user_id,predicted_class,"):
        raise ValueError(f"{path}: not a predictions file")
    out = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) < 3:
            raise ValueError(f"{path}: malformed row {ln!r}")
        scores = np.array([float(v) for v in parts[2:]])
        out.append(
            UserPrediction(
                user_id=parts[0],
                scores=scores,
                class_index=int(parts[1]),
                weeks_used=0,
            )
        )
    return out


def format_table(rows: list[tuple[str, float]]) -> str:
    """Small aligned accuracy table, one classifier (or baseline) per row."""
    width = max(len("classifier"), max(len(name) for name, _ in rows))
    lines = [f"{'classifier'.ljust(width)}  accuracy"]
    for name, acc in rows:
        lines.append(f"{name.ljust(width)}  {100.0 * acc:6.2f}%")
    return "\n".join(lines)

"""The three learners plus model serialization.

- Linear max-margin SVM trained in the dual by sequential pairwise
  optimization, with exhaustive 2-of-d feature-pair selection by k-fold
  cross-validation.
- Feed-forward sigmoid network trained by full-batch backprop on MSE,
  with an abstention band around score 0.5.
- Logistic-loss gradient descent on min-max normalized features.

Ties on a decision boundary classify as malignant for every model. All
training is deterministic given (data, config, seed).
"""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    ParseError,
    TrainingError,
    UnsupportedVersionError,
)

BENIGN = "benign"
MALIGNANT = "malignant"
INCONCLUSIVE = "inconclusive"

FORMAT_VERSION = 1

# Step size reported for the breast-cancer gradient descent; produces no
# visible movement on [0,1]-normalized features within 5000 iterations,
# so the practical default step is 0.5. Both remain selectable.
PAPER_SIGMA = 2e-9
DEFAULT_GD_STEP = 0.5
DEFAULT_GD_ITERATIONS = 5000

BREAST_ANN_LAYERS = (9, 16, 12, 8, 8, 4, 1)
MELANOMA_ANN_LAYERS = (6, 10, 6, 1)
DEFAULT_DELTA = 0.05


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LabeledDataset:
    """Named feature matrix with binary labels (0 benign, 1 malignant)."""

    feature_names: tuple
    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        names = tuple(str(n) for n in self.feature_names)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if rows.shape[1] != len(names):
            raise ValueError("feature name count does not match row width")
        if labels.shape != (rows.shape[0],):
            raise ValueError("label count does not match row count")
        if rows.size and not np.isfinite(rows).all():
            raise ValueError("rows contain NaN or infinite entries")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        rows = rows.copy()
        rows.setflags(write=False)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    def select_columns(self, indices) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(
            tuple(self.feature_names[i] for i in idx), self.rows[:, idx], self.labels
        )

    def subset(self, row_indices) -> "LabeledDataset":
        idx = np.asarray(row_indices)
        return LabeledDataset(self.feature_names, self.rows[idx], self.labels[idx])


@dataclass(frozen=True)
class Prediction:
    score: float
    label: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")
        if self.label not in (BENIGN, MALIGNANT, INCONCLUSIVE):
            raise ValueError(f"unknown label {self.label!r}")


def _label_from_score(score: float, delta: float) -> str:
    if abs(score - 0.5) < delta:
        return INCONCLUSIVE
    return MALIGNANT if score >= 0.5 else BENIGN


def _normalize_rows(rows: np.ndarray, extremes: np.ndarray) -> np.ndarray:
    lo = extremes[:, 0]
    span = extremes[:, 1] - extremes[:, 0]
    out = np.zeros_like(rows, dtype=np.float64)
    nz = span != 0
    out[:, nz] = (rows[:, nz] - lo[nz]) / span[nz]
    return out


def _feature_extremes(rows: np.ndarray) -> np.ndarray:
    return np.column_stack([rows.min(axis=0), rows.max(axis=0)])


# ---------------------------------------------------------------------------
# Linear SVM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearSvmModel:
    """Separating hyperplane over a subset of the input columns."""

    weights: np.ndarray
    bias: float
    feature_indices: tuple
    regularization: float
    feature_names: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).copy()
        w.setflags(write=False)
        if w.shape != (len(self.feature_indices),):
            raise ValueError("one weight per selected feature required")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "feature_indices", tuple(int(i) for i in self.feature_indices))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def decision_value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (len(self.feature_names),):
            raise DimensionMismatchError(
                f"expected {len(self.feature_names)} features, got {x.shape}"
            )
        return float(self.weights @ x[list(self.feature_indices)] + self.bias)


def _check_two_classes(data: LabeledDataset):
    if data.n == 0 or data.labels.min() == data.labels.max():
        raise TrainingError("training data must contain both classes")


def train_svm(data: LabeledDataset, C: float = 10.0, tol: float = 1e-4,
              max_passes: int = 200, feature_indices=None) -> LinearSvmModel:
    """Soft-margin dual SVM via sequential two-variable optimization.

    One pass is worth ``n`` pair updates; optimization usually stops far
    earlier, when the worst KKT violation gap falls below 2*tol.
    ``feature_indices`` restricts training to those columns; the model
    still expects full rows at prediction time.
    """
    _check_two_classes(data)
    if C <= 0:
        raise ValueError("C must be positive")
    if feature_indices is None:
        feature_indices = tuple(range(data.d))
    else:
        feature_indices = tuple(int(i) for i in feature_indices)
    X = np.ascontiguousarray(data.rows[:, list(feature_indices)])
    y = (data.labels.astype(np.float64) * 2.0 - 1.0)
    K = np.ascontiguousarray(X @ X.T)
    alphas, b = kernels.smo_core(K, y, float(C), float(tol),
                                 int(max_passes) * max(data.n, 10))
    w = (alphas * y) @ X
    return LinearSvmModel(w, float(b), feature_indices, float(C), data.feature_names)


def predict_svm(model: LinearSvmModel, x) -> Prediction:
    """Hard 0/1 decision; a point exactly on the hyperplane is malignant."""
    score = 1.0 if model.decision_value(x) >= 0.0 else 0.0
    return Prediction(score, MALIGNANT if score == 1.0 else BENIGN)


class FeaturePairChoice(NamedTuple):
    i: int
    j: int
    cv_accuracy: float


def _stratified_folds(labels: np.ndarray, folds: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def select_feature_pair(data: LabeledDataset, C: float = 10.0, folds: int = 5,
                        seed=0, tol: float = 1e-4,
                        max_passes: int = 10) -> FeaturePairChoice:
    """Exhaustive search for the best 2-of-d column pair by k-fold CV.

    Ties break toward the lexicographically smallest (i, j).
    """
    if data.d < 2:
        raise ValueError("need at least two feature columns")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    _check_two_classes(data)
    assignment = _stratified_folds(data.labels, folds, seed)
    best = None
    for i in range(data.d):
        for j in range(i + 1, data.d):
            correct = 0
            for k in range(folds):
                train = data.subset(np.flatnonzero(assignment != k))
                test = data.subset(np.flatnonzero(assignment == k))
                model = train_svm(train, C=C, tol=tol, max_passes=max_passes,
                                  feature_indices=(i, j))
                # Column-reduced training: model indices refer to the
                # reduced frame, so score test rows the same way.
                for row, label in zip(test.rows, test.labels):
                    pred = predict_svm(model, row)
                    predicted = 1 if pred.label == MALIGNANT else 0
                    correct += int(predicted == label)
            accuracy = correct / data.n
            if best is None or accuracy > best.cv_accuracy:
                best = FeaturePairChoice(i, j, accuracy)
    return best


# ---------------------------------------------------------------------------
# Feed-forward network
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MlpModel:
    """Sigmoid feed-forward network with a single output unit.

    ``normalization`` (optional per-feature (min, max) pairs) is applied
    before the first layer. ``loss_trace`` is training metadata and is
    not serialized.
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple
    inconclusive_delta: float
    feature_names: tuple
    normalization: Optional[np.ndarray] = None
    loss_trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or sizes[-1] != 1:
            raise ValueError("layer sizes must end in a single output unit")
        if sizes[0] != len(self.feature_names):
            raise ValueError("input width must match feature name count")
        if not 0.0 <= self.inconclusive_delta < 0.5:
            raise ValueError("inconclusive delta must lie in [0, 0.5)")
        ws = []
        bs = []
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.asarray(w, dtype=np.float64).copy()
            b = np.asarray(b, dtype=np.float64).copy()
            if w.shape != (sizes[li + 1], sizes[li]) or b.shape != (sizes[li + 1],):
                raise ValueError(f"layer {li} parameter shapes disagree with sizes")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        if len(ws) != len(sizes) - 1:
            raise ValueError("one weight matrix per layer transition required")
        norm = self.normalization
        if norm is not None:
            norm = np.asarray(norm, dtype=np.float64).copy()
            if norm.shape != (sizes[0], 2):
                raise ValueError("normalization needs one (min, max) per feature")
            norm.setflags(write=False)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "normalization", norm)
        object.__setattr__(self, "loss_trace", tuple(float(v) for v in self.loss_trace))

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Batch scores in (0, 1); X is (n, d)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.layer_sizes[0]:
            raise DimensionMismatchError(
                f"expected (n, {self.layer_sizes[0]}) inputs, got {X.shape}"
            )
        a = _normalize_rows(X, self.normalization) if self.normalization is not None else X
        for w, b in zip(self.weights, self.biases):
            a = _sigmoid(a @ w.T + b)
        return a[:, 0]


def init_mlp(layer_sizes, feature_names, seed, inconclusive_delta=DEFAULT_DELTA,
             normalization=None) -> MlpModel:
    """Seeded uniform [-0.5, 0.5] initialization, weights before biases."""
    rng = np.random.default_rng(seed)
    ws = []
    bs = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        ws.append(rng.uniform(-0.5, 0.5, size=(fan_out, fan_in)))
        bs.append(rng.uniform(-0.5, 0.5, size=fan_out))
    return MlpModel(tuple(layer_sizes), tuple(ws), tuple(bs), inconclusive_delta,
                    tuple(feature_names), normalization)


def _raw_forward_trace(weights, biases, norm, X):
    a = _normalize_rows(X, norm) if norm is not None else X
    activations = [a]
    for w, b in zip(weights, biases):
        a = _sigmoid(a @ w.T + b)
        activations.append(a)
    return activations


def _raw_gradient(weights, biases, norm, X, y):
    """MSE loss and its exact backprop gradient for one full batch."""
    n = X.shape[0]
    activations = _raw_forward_trace(weights, biases, norm, X)
    out = activations[-1]
    target = y.astype(np.float64)[:, None]
    loss = float(((out[:, 0] - y) ** 2).mean())
    delta = (2.0 / n) * (out - target) * out * (1.0 - out)
    w_grads = [None] * len(weights)
    b_grads = [None] * len(biases)
    for li in range(len(weights) - 1, -1, -1):
        w_grads[li] = delta.T @ activations[li]
        b_grads[li] = delta.sum(axis=0)
        if li > 0:
            prev = activations[li]
            delta = (delta @ weights[li]) * prev * (1.0 - prev)
    return loss, w_grads, b_grads


def mlp_loss(model: MlpModel, data: LabeledDataset) -> float:
    """Mean squared error of the scores against 0/1 labels."""
    scores = model.forward(data.rows)
    return float(((scores - data.labels) ** 2).mean())


def mlp_gradient(model: MlpModel, data: LabeledDataset):
    """Exact MSE gradient by backpropagation.

    Returns (weight_grads, bias_grads) shaped like the model parameters.
    """
    if data.d != model.layer_sizes[0]:
        raise DimensionMismatchError(
            f"model expects {model.layer_sizes[0]} features, data has {data.d}"
        )
    _, w_grads, b_grads = _raw_gradient(model.weights, model.biases,
                                        model.normalization, data.rows,
                                        data.labels.astype(np.float64))
    return w_grads, b_grads


def train_mlp(data: LabeledDataset, layer_sizes, epochs: int,
              learning_rate: float, seed=0,
              inconclusive_delta: float = DEFAULT_DELTA,
              normalize: bool = True) -> MlpModel:
    """Full-batch gradient descent on MSE with sigmoid activations.

    The loss trace holds the pre-update loss of every epoch. With
    ``epochs=0`` the seeded initialization is returned untouched.
    """
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if layer_sizes[0] != data.d:
        raise DimensionMismatchError(
            f"first layer size {layer_sizes[0]} != feature count {data.d}"
        )
    norm = _feature_extremes(data.rows) if normalize else None
    model = init_mlp(layer_sizes, data.feature_names, seed, inconclusive_delta, norm)
    if epochs == 0:
        return model
    weights = list(model.weights)
    biases = list(model.biases)
    y = data.labels.astype(np.float64)
    trace = []
    for _ in range(epochs):
        loss, w_grads, b_grads = _raw_gradient(weights, biases, norm, data.rows, y)
        trace.append(loss)
        for li in range(len(weights)):
            weights[li] = weights[li] - learning_rate * w_grads[li]
            biases[li] = biases[li] - learning_rate * b_grads[li]
    return MlpModel(layer_sizes, tuple(weights), tuple(biases), inconclusive_delta,
                    data.feature_names, norm, tuple(trace))


def predict_mlp(model: MlpModel, x) -> Prediction:
    """Score plus three-way label; abstains inside the delta band."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.layer_sizes[0],):
        raise DimensionMismatchError(
            f"expected {model.layer_sizes[0]} features, got {x.shape}"
        )
    score = float(model.forward(x[None, :])[0])
    return Prediction(score, _label_from_score(score, model.inconclusive_delta))


# ---------------------------------------------------------------------------
# Normalized gradient descent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GdModel:
    """Logistic scorer over min-max normalized features."""

    weights: np.ndarray
    bias: float
    iterations: int
    step: float
    normalization: np.ndarray
    feature_names: tuple
    loss_trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).copy()
        norm = np.asarray(self.normalization, dtype=np.float64).copy()
        if norm.shape != (w.shape[0], 2):
            raise ValueError("normalization needs one (min, max) per feature")
        if (norm[:, 0] > norm[:, 1]).any():
            raise ValueError("normalization minima must not exceed maxima")
        w.setflags(write=False)
        norm.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "normalization", norm)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "loss_trace", tuple(float(v) for v in self.loss_trace))

    def score_rows(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.weights.shape[0]:
            raise DimensionMismatchError(
                f"expected (n, {self.weights.shape[0]}) inputs, got {X.shape}"
            )
        z = _normalize_rows(X, self.normalization)
        return _sigmoid(z @ self.weights + self.bias)


def train_gd(data: LabeledDataset, iterations: int = DEFAULT_GD_ITERATIONS,
             step: float = DEFAULT_GD_STEP) -> GdModel:
    """Fixed-step full-batch descent on the logistic log-loss.

    Features are min-max normalized with the training extremes, which are
    stored in the model; constant columns map to 0. The loss trace holds
    the pre-update loss of every step.
    """
    if data.n < 1:
        raise TrainingError("need at least one training row")
    if step <= 0:
        raise ValueError("step must be positive")
    extremes = _feature_extremes(data.rows)
    Z = _normalize_rows(data.rows, extremes)
    y = data.labels.astype(np.float64)
    w = np.zeros(data.d)
    b = 0.0
    n = data.n
    trace = []
    for _ in range(iterations):
        z = Z @ w + b
        trace.append(float((y * np.logaddexp(0.0, -z)
                            + (1.0 - y) * np.logaddexp(0.0, z)).mean()))
        p = _sigmoid(z)
        residual = p - y
        w = w - step * (Z.T @ residual) / n
        b = b - step * float(residual.mean())
    return GdModel(w, float(b), int(iterations), float(step), extremes,
                   data.feature_names, tuple(trace))


def predict_gd(model: GdModel, x) -> Prediction:
    """Logistic score thresholded at 0.5; never abstains."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.weights.shape[0],):
        raise DimensionMismatchError(
            f"expected {model.weights.shape[0]} features, got {x.shape}"
        )
    score = float(model.score_rows(x[None, :])[0])
    return Prediction(score, MALIGNANT if score >= 0.5 else BENIGN)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def _model_document(model) -> dict:
    if isinstance(model, LinearSvmModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": "svm",
            "feature_names": list(model.feature_names),
            "parameters": {
                "weights": model.weights.tolist(),
                "bias": model.bias,
                "feature_indices": list(model.feature_indices),
                "regularization": model.regularization,
            },
            "normalization": None,
            "inconclusive_delta": None,
        }
    if isinstance(model, MlpModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": "ann",
            "feature_names": list(model.feature_names),
            "parameters": {
                "layer_sizes": list(model.layer_sizes),
                "weights": [w.tolist() for w in model.weights],
                "biases": [b.tolist() for b in model.biases],
            },
            "normalization": None if model.normalization is None
            else model.normalization.tolist(),
            "inconclusive_delta": model.inconclusive_delta,
        }
    if isinstance(model, GdModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": "gd",
            "feature_names": list(model.feature_names),
            "parameters": {
                "weights": model.weights.tolist(),
                "bias": model.bias,
                "iterations": model.iterations,
                "step": model.step,
            },
            "normalization": model.normalization.tolist(),
            "inconclusive_delta": None,
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def save_model(model, path):
    """Write a versioned JSON document; floats keep round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_model_document(model), fh, indent=1)
        fh.write("\n")


def model_to_text(model) -> str:
    return json.dumps(_model_document(model), indent=1) + "\n"


def _require(doc: dict, key: str):
    if key not in doc:
        raise ParseError("missing model field", field=key)
    return doc[key]


def load_model_text(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid model document: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    version = _require(doc, "format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"model format version {version!r} not supported (expected {FORMAT_VERSION})"
        )
    kind = _require(doc, "model_kind")
    names = tuple(_require(doc, "feature_names"))
    params = _require(doc, "parameters")
    try:
        if kind == "svm":
            return LinearSvmModel(
                np.asarray(params["weights"], dtype=np.float64),
                float(params["bias"]),
                tuple(params["feature_indices"]),
                float(params["regularization"]),
                names,
            )
        if kind == "ann":
            return MlpModel(
                tuple(params["layer_sizes"]),
                tuple(np.asarray(w, dtype=np.float64) for w in params["weights"]),
                tuple(np.asarray(b, dtype=np.float64) for b in params["biases"]),
                float(_require(doc, "inconclusive_delta")),
                names,
                None if doc.get("normalization") is None
                else np.asarray(doc["normalization"], dtype=np.float64),
            )
        if kind == "gd":
            return GdModel(
                np.asarray(params["weights"], dtype=np.float64),
                float(params["bias"]),
                int(params["iterations"]),
                float(params["step"]),
                np.asarray(_require(doc, "normalization"), dtype=np.float64),
                names,
            )
    except KeyError as exc:
        raise ParseError("missing model parameter", field=str(exc)) from exc
    raise ParseError(f"unknown model kind {kind!r}", field="model_kind")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return load_model_text(fh.read())


def predict(model, x) -> Prediction:
    """Dispatch prediction by model type."""
    if isinstance(model, LinearSvmModel):
        return predict_svm(model, x)
    if isinstance(model, MlpModel):
        return predict_mlp(model, x)
    if isinstance(model, GdModel):
        return predict_gd(model, x)
    raise TypeError(f"cannot predict with {type(model).__name__}")


def model_kind(model) -> str:
    if isinstance(model, LinearSvmModel):
        return "svm"
    if isinstance(model, MlpModel):
        return "ann"
    if isinstance(model, GdModel):
        return "gd"
    raise TypeError(f"unknown model type {type(model).__name__}")

"""Seeded numpy classifiers: logistic regression and a dropout MLP.

Training is plain minibatch SGD on softmax cross-entropy, fully deterministic
given the configured seeds (fixed shuffle order and dropout-mask stream).
Per-epoch snapshots can log the probability assigned to the gold label for a
watch set of examples, which downstream map construction consumes.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .errors import ConfigError, NumericError
from .seeds import derive_rng

MODEL_KINDS = ("logreg", "mlp")
REPRESENTATION_SPACES = ("vision", "language", "fused")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    dim_vision: int
    dim_language: int
    num_classes: int
    hidden_dim: int = 64
    dropout_rate: float = 0.0
    init_scale: float = 0.1
    rng_seed: int = 0

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.dim_vision < 1 or self.dim_language < 1:
            raise ConfigError("feature dimensions must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1 for the MLP")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.init_scale < 0:
            raise ConfigError("init_scale must be >= 0")

    @property
    def input_dim(self) -> int:
        return self.dim_vision + self.dim_language


@dataclass
class Model:
    spec: ModelSpec
    params: dict[str, np.ndarray]

    def copy(self) -> "Model":
        return Model(spec=self.spec, params={k: v.copy() for k, v in self.params.items()})


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.05
    minibatch_size: int = 32
    l2_penalty: float = 1e-4
    rng_seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.minibatch_size < 1:
            raise ConfigError("minibatch_size must be >= 1")
        if self.l2_penalty < 0:
            raise ConfigError("l2_penalty must be >= 0")


@dataclass
class TrainingDynamics:
    """Per-example, per-epoch gold-label confidence from end-of-epoch snapshots."""

    indices: np.ndarray  # (w,) watched example ids
    gold_confidence: np.ndarray  # (w, epochs)
    correct: np.ndarray  # (w, epochs) bool, argmax == gold

    @property
    def num_epochs(self) -> int:
        return self.gold_confidence.shape[1]


@dataclass
class TrainResult:
    model: Model
    dynamics: TrainingDynamics | None
    epoch_loss: np.ndarray  # (epochs,) mean cross-entropy over the subset, dropout off


def init_model(spec: ModelSpec) -> Model:
    """Deterministic seeded initialization; zero init_scale gives uniform outputs."""
    spec.validate()
    rng = derive_rng(spec.rng_seed, "init")
    d, c = spec.input_dim, spec.num_classes
    if spec.kind == "logreg":
        params = {
            "W": spec.init_scale * rng.standard_normal((d, c)),
            "b": np.zeros(c),
        }
    else:
        h = spec.hidden_dim
        params = {
            "W1": spec.init_scale * rng.standard_normal((d, h)),
            "b1": np.zeros(h),
            "W2": spec.init_scale * rng.standard_normal((h, c)),
            "b2": np.zeros(c),
        }
    return Model(spec=spec, params=params)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _check_pair(model: Model, xv: np.ndarray, xl: np.ndarray) -> np.ndarray:
    xv = np.atleast_2d(np.asarray(xv, dtype=np.float64))
    xl = np.atleast_2d(np.asarray(xl, dtype=np.float64))
    if xv.shape[1] != model.spec.dim_vision or xl.shape[1] != model.spec.dim_language:
        raise ConfigError(
            f"feature pair has dims ({xv.shape[1]}, {xl.shape[1]}), "
            f"model expects ({model.spec.dim_vision}, {model.spec.dim_language})"
        )
    if xv.shape[0] != xl.shape[0]:
        raise ConfigError("vision and language blocks disagree on the example count")
    return np.hstack([xv, xl])


def _forward(model: Model, x: np.ndarray, dropout_mask: np.ndarray | None = None):
    """Returns (probs, hidden_activation or None). Mask, when given, is pre-scaled."""
    p = model.params
    if model.spec.kind == "logreg":
        return softmax(x @ p["W"] + p["b"]), None
    hidden = np.tanh(x @ p["W1"] + p["b1"])
    dropped = hidden if dropout_mask is None else hidden * dropout_mask
    return softmax(dropped @ p["W2"] + p["b2"]), hidden


def _proba(model: Model, x: np.ndarray) -> np.ndarray:
    return _forward(model, x)[0]


def predict_proba(model: Model, xv: np.ndarray, xl: np.ndarray) -> np.ndarray:
    """Class probabilities with dropout disabled. 1-D inputs give a 1-D output."""
    single = np.asarray(xv).ndim == 1
    probs = _proba(model, _check_pair(model, xv, xl))
    return probs[0] if single else probs


def _dropout_keep_mask(rng: np.random.Generator, shape: tuple[int, int], rate: float) -> np.ndarray:
    # Inverted dropout: surviving units are scaled so expectations match.
    return (rng.random(shape) >= rate).astype(np.float64) / (1.0 - rate)


def mc_dropout_proba(
    model: Model,
    xv: np.ndarray,
    xl: np.ndarray,
    k: int,
    rng_seed: int,
    example_ids=None,
) -> np.ndarray:
    """``k`` stochastic forward passes with independent seeded dropout masks.

    Returns an array of shape (k, n, C). Each example's mask stream is keyed
    by its id (row position by default), so scoring a subset of a pool yields
    the same passes as scoring the whole pool.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    x = _check_pair(model, xv, xl)
    n = x.shape[0]
    spec = model.spec
    if spec.kind == "logreg" or spec.dropout_rate == 0.0:
        probs = _proba(model, x)
        return np.repeat(probs[None, :, :], k, axis=0)
    if example_ids is None:
        ids = np.arange(n)
    else:
        ids = np.asarray(example_ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ConfigError("example_ids must match the number of rows")
    rows = int(ids.max()) + 1 if n else 0
    out = np.empty((k, n, spec.num_classes))
    for j in range(k):
        mask = _dropout_keep_mask(
            derive_rng(rng_seed, "mask", j), (rows, spec.hidden_dim), spec.dropout_rate
        )[ids]
        out[j] = _forward(model, x, dropout_mask=mask)[0]
    return out


def hidden_representation(model: Model, xv: np.ndarray, xl: np.ndarray, space: str) -> np.ndarray:
    """Representation used by diversity-based selection.

    ``vision``/``language`` return the raw subspace features; ``fused`` returns
    the MLP's penultimate activation (for logreg, the concatenated input).
    """
    if space not in REPRESENTATION_SPACES:
        raise ConfigError(f"unknown representation space {space!r}")
    x = _check_pair(model, xv, xl)
    dv = model.spec.dim_vision
    if space == "vision":
        return x[:, :dv]
    if space == "language":
        return x[:, dv:]
    if model.spec.kind == "logreg":
        return x
    return np.tanh(x @ model.params["W1"] + model.params["b1"])


def _onehot(y: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((len(y), c))
    out[np.arange(len(y)), y] = 1.0
    return out


def cross_entropy(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    probs = _proba(model, x)
    gold = probs[np.arange(len(y)), y]
    return float(-np.log(np.maximum(gold, 1e-300)).mean())


def loss_gradients(
    model: Model, x: np.ndarray, y: np.ndarray, dropout_mask: np.ndarray | None = None
) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean cross-entropy (no regularization term)."""
    p = model.params
    probs, hidden = _forward(model, x, dropout_mask=dropout_mask)
    dlogits = (probs - _onehot(y, model.spec.num_classes)) / len(y)
    if model.spec.kind == "logreg":
        return {"W": x.T @ dlogits, "b": dlogits.sum(axis=0)}
    dropped = hidden if dropout_mask is None else hidden * dropout_mask
    d_dropped = dlogits @ p["W2"].T
    d_hidden = d_dropped if dropout_mask is None else d_dropped * dropout_mask
    dz = d_hidden * (1.0 - hidden**2)
    return {
        "W1": x.T @ dz,
        "b1": dz.sum(axis=0),
        "W2": dropped.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }


def train(
    model: Model,
    dataset: Dataset,
    subset,
    cfg: TrainConfig,
    watch=None,
) -> TrainResult:
    """Minibatch SGD over ``subset``; the input model is left untouched.

    When ``watch`` is given, an end-of-epoch snapshot (dropout disabled)
    records the gold-label probability for every watched example.
    """
    cfg.validate()
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ConfigError("training subset must be non-empty")
    if subset.min() < 0 or subset.max() >= dataset.num_examples:
        raise ConfigError("training subset indices out of range")
    trained = model.copy()
    spec = trained.spec
    x = dataset.features(subset)
    y = dataset.labels[subset]
    n = len(subset)

    watch_idx = None
    if watch is not None:
        watch_idx = np.asarray(watch, dtype=np.int64)
        gold_conf = np.empty((len(watch_idx), cfg.epochs))
        correct = np.empty((len(watch_idx), cfg.epochs), dtype=bool)
        xw = dataset.features(watch_idx)
        yw = dataset.labels[watch_idx]

    shuffle_rng = derive_rng(cfg.rng_seed, "shuffle")
    dropout_rng = derive_rng(cfg.rng_seed, "dropout")
    use_dropout = spec.kind == "mlp" and spec.dropout_rate > 0.0
    weight_keys = ("W",) if spec.kind == "logreg" else ("W1", "W2")
    epoch_loss = np.empty(cfg.epochs)

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            rows = order[start : start + cfg.minibatch_size]
            mask = None
            if use_dropout:
                mask = _dropout_keep_mask(
                    dropout_rng, (len(rows), spec.hidden_dim), spec.dropout_rate
                )
            grads = loss_gradients(trained, x[rows], y[rows], dropout_mask=mask)
            for key, grad in grads.items():
                if cfg.l2_penalty and key in weight_keys:
                    grad = grad + cfg.l2_penalty * trained.params[key]
                trained.params[key] -= cfg.learning_rate * grad
        epoch_loss[epoch] = cross_entropy(trained, x, y)
        if not np.isfinite(epoch_loss[epoch]):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        if watch_idx is not None:
            probs = _proba(trained, xw)
            gold_conf[:, epoch] = probs[np.arange(len(watch_idx)), yw]
            correct[:, epoch] = probs.argmax(axis=1) == yw

    dynamics = None
    if watch_idx is not None:
        dynamics = TrainingDynamics(indices=watch_idx, gold_confidence=gold_conf, correct=correct)
    return TrainResult(model=trained, dynamics=dynamics, epoch_loss=epoch_loss)


def accuracy(model: Model, xv: np.ndarray, xl: np.ndarray, y: np.ndarray) -> float:
    probs = predict_proba(model, xv, xl)
    return float((probs.argmax(axis=1) == np.asarray(y)).mean())


def gradient_check(
    model: Model,
    xv: np.ndarray,
    xl: np.ndarray,
    y,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between analytic and central finite-difference gradients.

    Dropout is disabled during the check; the loss is the unregularized mean
    cross-entropy on the given example(s).
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be > 0")
    x = _check_pair(model, xv, xl)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    work = model.copy()
    analytic = loss_gradients(work, x, y)
    worst = 0.0
    for key, grad in analytic.items():
        tensor = work.params[key]
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = tensor[idx]
            tensor[idx] = original + epsilon
            plus = cross_entropy(work, x, y)
            tensor[idx] = original - epsilon
            minus = cross_entropy(work, x, y)
            tensor[idx] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            denom = max(abs(grad[idx]) + abs(numeric), 1e-8)
            worst = max(worst, abs(grad[idx] - numeric) / denom)
    return worst


def save_model(model: Model, path) -> None:
    """Checkpoint as JSON: spec plus parameter tensors, lossless for float64."""
    payload = {
        "spec": asdict(model.spec),
        "params": {k: v.tolist() for k, v in model.params.items()},
    }
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def load_model(path) -> Model:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    spec = ModelSpec(**payload["spec"])
    spec.validate()
    params = {k: np.asarray(v, dtype=np.float64) for k, v in payload["params"].items()}
    model = Model(spec=spec, params=params)
    expected = {k: v.shape for k, v in init_model(spec).params.items()}
    actual = {k: v.shape for k, v in params.items()}
    if expected != actual:
        raise ConfigError(f"checkpoint parameter shapes {actual} do not match spec {expected}")
    return model

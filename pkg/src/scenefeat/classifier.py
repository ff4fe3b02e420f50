"""Fusion classifier over feature bundles.

A small feed-forward network trained with plain SGD on softmax
cross-entropy: semantic blocks pass through two hidden ReLU layers, and an
optional external global embedding enters through its own linear branch
whose class logits are concatenated into the fusion layer. Two-step
training first fits that global branch alone (a linear probe), then
freezes it and trains the semantic and fusion parameters.

Inputs are standardized per dimension with statistics fit on the training
set only; the model stores those statistics and standardizes internally,
so it always expects raw bundles (the ``standardized`` provenance flag
guards against double application).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fileio
from .rng import Rng
from .types import ConfigError, FeatureBundle, SchemaError, TrainingError

MODEL_SCHEMA = "scenefeat.model/1"

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 150
    batch_size: int = 32
    seed: int = 0
    hidden1: int = 256
    hidden2: int = 64
    two_step: bool = False
    feature_parts: tuple[str, ...] = ("shmf", "ssf", "sfv", "sfm")

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("learning rate, epochs, and batch size must be positive")
        if self.hidden1 < 1 or self.hidden2 < 1:
            raise ConfigError("hidden layer widths must be >= 1")


@dataclass
class ClassifierModel:
    """Weights, standardization statistics, and shape metadata."""

    parts: tuple[str, ...]
    classes: int
    input_dim: int
    semantic_dim: int
    global_dim: int
    mean: np.ndarray
    std: np.ndarray
    weights: dict[str, np.ndarray]
    config: TrainConfig
    class_names: Optional[tuple[str, ...]] = None

    @property
    def hidden1(self) -> int:
        return self.weights["W1"].shape[1]

    @property
    def hidden2(self) -> int:
        return self.weights["W2"].shape[1]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # (C, C) counts, rows = true class
    per_class_recall: np.ndarray  # (C,)
    samples: int


def build_bundle(
    shmf=None,
    ssf=None,
    sfv=None,
    sfm=None,
    global_vec=None,
    seg_categories: Optional[int] = None,
    obj_categories: Optional[int] = None,
    bins: Optional[int] = None,
    global_dim: Optional[int] = None,
) -> FeatureBundle:
    """Assemble a FeatureBundle, checking each block against the configuration.

    Accepts raw arrays or the feature matrix wrappers; shape mismatches name
    the offending block.
    """
    shmf = getattr(shmf, "rows", shmf)
    ssf = getattr(ssf, "rows", ssf)
    sfv = getattr(sfv, "counts", sfv)
    sfm = getattr(sfm, "bins", sfm)
    bundle = FeatureBundle(shmf=shmf, ssf=ssf, sfv=sfv, sfm=sfm, global_vec=global_vec)
    expected = {
        "shmf": None if seg_categories is None else (seg_categories, 7),
        "ssf": None if seg_categories is None else (seg_categories, 5),
        "sfv": None if obj_categories is None else (obj_categories,),
        "sfm": None
        if obj_categories is None or bins is None
        else (obj_categories, obj_categories, bins),
        "global": None if global_dim is None else (global_dim,),
    }
    for name, shape in expected.items():
        arr = bundle.block(name)
        if arr is not None and shape is not None and arr.shape != shape:
            raise ConfigError(
                f"{name} block has shape {tuple(arr.shape)}, configuration "
                f"implies {shape}"
            )
    return bundle


# ---------------------------------------------------------------------------
# Forward / backward


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(weights: dict[str, np.ndarray], xs: np.ndarray, semantic_dim: int,
             global_dim: int):
    sem = xs[:, :semantic_dim]
    z1 = sem @ weights["W1"] + weights["b1"]
    a1 = np.maximum(z1, 0.0)
    if global_dim > 0:
        glob = xs[:, semantic_dim:]
        gz = glob @ weights["Wg"] + weights["bg"]
        fused = np.concatenate([a1, gz], axis=1)
    else:
        glob = None
        gz = None
        fused = a1
    z2 = fused @ weights["W2"] + weights["b2"]
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ weights["W3"] + weights["b3"]
    return {"sem": sem, "glob": glob, "z1": z1, "a1": a1, "gz": gz,
            "fused": fused, "z2": z2, "a2": a2, "logits": logits}


def loss_and_gradients(
    weights: dict[str, np.ndarray],
    xs: np.ndarray,
    labels: np.ndarray,
    semantic_dim: int,
    global_dim: int,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its gradient for every weight tensor.

    ``xs`` must already be standardized. This is the function the
    finite-difference gradient check exercises.
    """
    batch = xs.shape[0]
    state = _forward(weights, xs, semantic_dim, global_dim)
    logits = state["logits"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -float(log_probs[np.arange(batch), labels].mean())
    probs = np.exp(log_probs)
    delta3 = probs.copy()
    delta3[np.arange(batch), labels] -= 1.0
    delta3 /= batch
    grads: dict[str, np.ndarray] = {}
    grads["W3"] = state["a2"].T @ delta3
    grads["b3"] = delta3.sum(axis=0)
    delta2 = (delta3 @ weights["W3"].T) * (state["z2"] > 0.0)
    grads["W2"] = state["fused"].T @ delta2
    grads["b2"] = delta2.sum(axis=0)
    dfused = delta2 @ weights["W2"].T
    h1 = weights["W1"].shape[1]
    delta1 = dfused[:, :h1] * (state["z1"] > 0.0)
    grads["W1"] = state["sem"].T @ delta1
    grads["b1"] = delta1.sum(axis=0)
    if global_dim > 0:
        dgz = dfused[:, h1:]
        grads["Wg"] = state["glob"].T @ dgz
        grads["bg"] = dgz.sum(axis=0)
    return loss, grads


def _probe_loss_and_gradients(wg: np.ndarray, bg: np.ndarray, glob: np.ndarray,
                              labels: np.ndarray):
    batch = glob.shape[0]
    probs = _softmax(glob @ wg + bg)
    delta = probs.copy()
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch
    return glob.T @ delta, delta.sum(axis=0)


# ---------------------------------------------------------------------------
# Training


def _collect_matrix(
    dataset: Sequence[tuple[FeatureBundle, int]],
    parts: Sequence[str],
) -> tuple[np.ndarray, np.ndarray, int]:
    if not dataset:
        raise TrainingError("empty dataset")
    vectors = []
    labels = []
    width = None
    for idx, (bundle, label) in enumerate(dataset):
        if bundle.standardized:
            raise TrainingError(
                f"sample {idx} is already standardized; the model expects raw bundles"
            )
        try:
            vec = bundle.flatten(parts)
        except ConfigError as exc:
            raise TrainingError(f"sample {idx}: {exc}") from None
        if width is None:
            width = vec.size
        elif vec.size != width:
            raise TrainingError(
                f"sample {idx} flattens to {vec.size} values, previous samples "
                f"to {width} (shape drift)"
            )
        vectors.append(vec)
        labels.append(int(label))
    x = np.stack(vectors)
    y = np.array(labels, dtype=np.int64)
    if y.min() < 0:
        raise TrainingError("class labels must be non-negative integers")
    classes = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise TrainingError("training needs at least 2 distinct classes")
    return x, y, classes


def _epoch_sgd(weights, xs, y, trainable, config, rng, semantic_dim, global_dim):
    order = rng.shuffle_index(xs.shape[0])
    for start in range(0, xs.shape[0], config.batch_size):
        batch_idx = order[start : start + config.batch_size]
        _, grads = loss_and_gradients(weights, xs[batch_idx], y[batch_idx],
                                      semantic_dim, global_dim)
        for name in trainable:
            weights[name] -= config.learning_rate * grads[name]


def train(
    dataset: Sequence[tuple[FeatureBundle, int]],
    config: TrainConfig = TrainConfig(),
    class_names: Optional[Sequence[str]] = None,
) -> ClassifierModel:
    """Fit the fusion classifier; deterministic under config.seed.

    With ``two_step`` set and a global block present, the global branch is
    fit first as a linear probe and stays frozen while the semantic pathway
    and fusion layers train.
    """
    parts = tuple(config.feature_parts)
    x, y, classes = _collect_matrix(dataset, parts)
    sample = dataset[0][0]
    global_dim = 0
    if "global" in parts:
        global_dim = int(sample.block("global").shape[0])
    semantic_dim = x.shape[1] - global_dim
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    # dimensions that never vary in training get unit scale: flooring them
    # at epsilon would blow up the first unseen value by 1e8
    std = np.where(std < STD_FLOOR, 1.0, std)
    xs = (x - mean) / std
    rng = Rng(config.seed)
    h1, h2 = config.hidden1, config.hidden2
    fused_dim = h1 + (classes if global_dim > 0 else 0)
    weights: dict[str, np.ndarray] = {
        "W1": rng.normal_array(semantic_dim * h1,
                               math.sqrt(2.0 / max(semantic_dim, 1))).reshape(semantic_dim, h1),
        "b1": np.zeros(h1),
        "W2": rng.normal_array(fused_dim * h2,
                               math.sqrt(2.0 / fused_dim)).reshape(fused_dim, h2),
        "b2": np.zeros(h2),
        "W3": np.zeros((h2, classes)),  # zero output layer: untrained model is uniform
        "b3": np.zeros(classes),
    }
    if global_dim > 0:
        weights["Wg"] = np.zeros((global_dim, classes))
        weights["bg"] = np.zeros(classes)
    glob = xs[:, semantic_dim:]
    if config.two_step and global_dim > 0:
        for _ in range(config.epochs):
            order = rng.shuffle_index(xs.shape[0])
            for start in range(0, xs.shape[0], config.batch_size):
                idx = order[start : start + config.batch_size]
                gw, gb = _probe_loss_and_gradients(weights["Wg"], weights["bg"],
                                                   glob[idx], y[idx])
                weights["Wg"] -= config.learning_rate * gw
                weights["bg"] -= config.learning_rate * gb
        trainable = ("W1", "b1", "W2", "b2", "W3", "b3")  # global branch frozen
    else:
        trainable = tuple(weights.keys())
    for _ in range(config.epochs):
        _epoch_sgd(weights, xs, y, trainable, config, rng, semantic_dim, global_dim)
    return ClassifierModel(
        parts=parts,
        classes=classes,
        input_dim=x.shape[1],
        semantic_dim=semantic_dim,
        global_dim=global_dim,
        mean=mean,
        std=std,
        weights=weights,
        config=config,
        class_names=None if class_names is None else tuple(class_names),
    )


def _standardize_input(model: ClassifierModel, bundle: FeatureBundle) -> np.ndarray:
    if bundle.standardized:
        raise ConfigError(
            "bundle is flagged standardized; the model standardizes internally "
            "and expects raw features"
        )
    vec = bundle.flatten(model.parts)
    if vec.size != model.input_dim:
        raise ConfigError(
            f"bundle flattens to {vec.size} values, model expects {model.input_dim}"
        )
    return (vec - model.mean) / model.std


def predict(model: ClassifierModel, bundle: FeatureBundle) -> tuple[int, np.ndarray]:
    """Class index (lowest index wins ties) and the probability vector."""
    xs = _standardize_input(model, bundle)[None, :]
    state = _forward(model.weights, xs, model.semantic_dim, model.global_dim)
    probs = _softmax(state["logits"])[0]
    return int(np.argmax(probs)), probs


def evaluate(model: ClassifierModel, dataset: Sequence[tuple[FeatureBundle, int]]) -> EvalReport:
    """Accuracy, confusion matrix (rows = true class), and per-class recall."""
    if not dataset:
        raise TrainingError("empty evaluation dataset")
    confusion = np.zeros((model.classes, model.classes), dtype=np.int64)
    for bundle, label in dataset:
        label = int(label)
        if not 0 <= label < model.classes:
            raise TrainingError(f"label {label} outside the model's {model.classes} classes")
        predicted, _ = predict(model, bundle)
        confusion[label, predicted] += 1
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / total
    row_sums = confusion.sum(axis=1)
    recall = np.divide(
        np.diag(confusion).astype(np.float64),
        row_sums,
        out=np.zeros(model.classes),
        where=row_sums > 0,
    )
    confusion.setflags(write=False)
    recall.setflags(write=False)
    return EvalReport(accuracy=accuracy, confusion=confusion,
                      per_class_recall=recall, samples=total)


def format_eval_report(report: EvalReport, class_names: Optional[Sequence[str]] = None) -> str:
    """Stable text layout: accuracy line, confusion matrix, recall lines."""
    c = report.confusion.shape[0]
    names = list(class_names) if class_names else [f"class_{k}" for k in range(c)]
    width = max(len(n) for n in names)
    cell = max(6, max(len(str(int(v))) for v in report.confusion.ravel()))
    lines = [
        f"accuracy: {report.accuracy:.4f} ({int(np.trace(report.confusion))}/{report.samples})",
        "confusion matrix (rows = true, cols = predicted):",
        " " * (width + 2) + " ".join(n[:cell].rjust(cell) for n in names),
    ]
    for k in range(c):
        row = " ".join(str(int(v)).rjust(cell) for v in report.confusion[k])
        lines.append(f"{names[k].rjust(width)}  {row}")
    lines.append("per-class recall:")
    for k in range(c):
        lines.append(f"{names[k].rjust(width)}  {report.per_class_recall[k]:.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model document


def write_model(model: ClassifierModel, path) -> None:
    doc = {
        "schema": MODEL_SCHEMA,
        "classes": model.classes,
        "class_names": None if model.class_names is None else list(model.class_names),
        "parts": list(model.parts),
        "dims": {
            "input": model.input_dim,
            "semantic": model.semantic_dim,
            "global": model.global_dim,
            "hidden1": model.hidden1,
            "hidden2": model.hidden2,
        },
        "standardization": {
            "mean": fileio.encode_float_array(model.mean),
            "std": fileio.encode_float_array(model.std),
        },
        "weights": {
            name: {"shape": list(arr.shape), "values": fileio.encode_float_array(arr)}
            for name, arr in sorted(model.weights.items())
        },
        "training": {
            "learning_rate": fileio.encode_float(model.config.learning_rate),
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "seed": model.config.seed,
            "hidden1": model.config.hidden1,
            "hidden2": model.config.hidden2,
            "two_step": model.config.two_step,
            "feature_parts": list(model.config.feature_parts),
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_model(path) -> ClassifierModel:
    path = Path(path)
    doc = fileio._load_json(path, MODEL_SCHEMA)
    dims = doc.get("dims", {})
    std_doc = doc.get("standardization", {})
    weights = {}
    for name, block in doc.get("weights", {}).items():
        shape = block.get("shape")
        values = fileio.decode_float_array(block.get("values", []), f"{path}: weights.{name}")
        if not isinstance(shape, list) or values.size != int(np.prod(shape)):
            raise SchemaError(f"{path}: weights.{name} shape/values mismatch")
        weights[name] = values.reshape(shape)
    training = doc.get("training", {})
    config = TrainConfig(
        learning_rate=fileio.decode_float(training["learning_rate"], "training.learning_rate")
        if isinstance(training.get("learning_rate"), str)
        else float(training.get("learning_rate", 0.05)),
        epochs=int(training.get("epochs", 1)),
        batch_size=int(training.get("batch_size", 32)),
        seed=int(training.get("seed", 0)),
        hidden1=int(training.get("hidden1", dims.get("hidden1", 256))),
        hidden2=int(training.get("hidden2", dims.get("hidden2", 64))),
        two_step=bool(training.get("two_step", False)),
        feature_parts=tuple(training.get("feature_parts", ("shmf", "ssf", "sfv", "sfm"))),
    )
    mean = fileio.decode_float_array(std_doc.get("mean", []), f"{path}: standardization.mean")
    std = fileio.decode_float_array(std_doc.get("std", []), f"{path}: standardization.std")
    if mean.size != int(dims.get("input", mean.size)) or std.size != mean.size:
        raise SchemaError(f"{path}: standardization length does not match input dim")
    if (std <= 0).any():
        raise SchemaError(f"{path}: standardization std must be positive")
    names = doc.get("class_names")
    return ClassifierModel(
        parts=tuple(doc.get("parts", ())),
        classes=int(doc["classes"]),
        input_dim=int(dims["input"]),
        semantic_dim=int(dims["semantic"]),
        global_dim=int(dims["global"]),
        mean=mean,
        std=std,
        weights=weights,
        config=config,
        class_names=None if names is None else tuple(names),
    )

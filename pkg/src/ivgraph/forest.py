"""Random-forest classifier built from scratch on numpy.

Binary classification only. Trees are grown on bootstrap samples with Gini
impurity over a per-node random feature subset; thresholds sit at midpoints
between consecutive sorted unique feature values. Everything is a pure
function of the seed, and each tree derives its own generator from
(global seed, tree index) so training order never matters.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureMatrix

__all__ = [
    "ForestParams",
    "ForestModel",
    "Metrics",
    "train_forest",
    "predict",
    "evaluate",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: str | int = "sqrt"  # "sqrt", "all", or a fixed count
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if isinstance(self.features_per_split, str):
            if self.features_per_split not in ("sqrt", "all"):
                raise ValueError(f"features_per_split must be 'sqrt', 'all' or an int, got {self.features_per_split!r}")
        elif self.features_per_split < 1:
            raise ValueError(f"features_per_split must be >= 1, got {self.features_per_split}")

    def resolve_k(self, n_features: int) -> int:
        if self.features_per_split == "all":
            return n_features
        if self.features_per_split == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        k = int(self.features_per_split)
        if k > n_features:
            raise ValueError(f"features_per_split {k} exceeds feature count {n_features}")
        return k

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
        }


@dataclass
class ForestModel:
    """Trained forest: nested-dict trees plus the sorted class label pair."""

    trees: list[dict]
    class_labels: tuple[str, str]
    n_features: int
    params: ForestParams

    def __post_init__(self) -> None:
        if list(self.class_labels) != sorted(self.class_labels):
            raise ValueError("class_labels must be sorted ascending")


@dataclass(frozen=True)
class Metrics:
    """Binary confusion counts and the derived scores.

    Precision, recall and F1 fall back to 0.0 when their denominator is 0.
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    positive_label: str

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "positive_label": self.positive_label,
        }


def _gini_pair(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    frac = pos / total
    return 1.0 - frac**2 - (1.0 - frac) ** 2


def _majority(y: np.ndarray) -> int:
    # Tie goes to class index 0 = lexicographically smaller label.
    ones = int(y.sum())
    zeros = y.size - ones
    return 1 if ones > zeros else 0


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, feats: np.ndarray):
    """Best (cost, feature, threshold) over midpoint candidates, or None."""
    best: tuple[float, int, float] | None = None
    n = idx.size
    for f in feats:
        values = X[idx, f]
        order = np.argsort(values, kind="stable")
        v_sorted = values[order]
        y_sorted = y[idx][order]
        cuts = np.nonzero(v_sorted[1:] != v_sorted[:-1])[0]
        if cuts.size == 0:
            continue
        cum_pos = np.cumsum(y_sorted)
        left_n = cuts + 1
        left_pos = cum_pos[cuts]
        right_n = n - left_n
        right_pos = cum_pos[-1] - left_pos
        cost = (left_n * _gini_pair(left_pos, left_n) + right_n * _gini_pair(right_pos, right_n)) / n
        j = int(np.argmin(cost))
        if best is None or cost[j] < best[0]:
            threshold = (v_sorted[cuts[j]] + v_sorted[cuts[j] + 1]) / 2.0
            best = (float(cost[j]), int(f), float(threshold))
    return best


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    depth: int,
    params: ForestParams,
    k_features: int,
    rng: np.random.Generator,
) -> dict:
    node_y = y[idx]
    if (
        node_y.size < params.min_samples_split
        or (params.max_depth is not None and depth >= params.max_depth)
        or node_y.min() == node_y.max()
    ):
        return {"label": _majority(node_y)}
    feats = rng.choice(X.shape[1], size=k_features, replace=False)
    best = _best_split(X, y, idx, feats)
    if best is None:
        return {"label": _majority(node_y)}
    _, feature, threshold = best
    left_mask = X[idx, feature] <= threshold
    left_idx = idx[left_mask]
    right_idx = idx[~left_mask]
    if left_idx.size == 0 or right_idx.size == 0:
        # Degenerate midpoint (floating-point collapse); stop here.
        return {"label": _majority(node_y)}
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _grow_tree(X, y, left_idx, depth + 1, params, k_features, rng),
        "right": _grow_tree(X, y, right_idx, depth + 1, params, k_features, rng),
    }


def _coerce_rows(rows) -> np.ndarray:
    if isinstance(rows, FeatureMatrix):
        return np.asarray(rows.values, dtype=float)
    return np.asarray(rows, dtype=float)


def train_forest(train: FeatureMatrix, params: ForestParams = ForestParams()) -> ForestModel:
    """Fit a forest on a labeled feature matrix with exactly two classes."""
    if train.labels is None:
        raise ValueError("training data must be labeled")
    if train.n_docs < 2:
        raise ValueError("training data must have at least 2 rows")
    class_labels = tuple(sorted(set(train.labels)))
    if len(class_labels) != 2:
        raise ValueError(f"binary classification requires exactly 2 classes, got {len(class_labels)}")
    X = np.asarray(train.values, dtype=float)
    y = np.array([class_labels.index(lbl) for lbl in train.labels], dtype=np.int64)
    k_features = params.resolve_k(X.shape[1])
    n = X.shape[0]
    trees: list[dict] = []
    for tree_index in range(params.n_trees):
        rng = np.random.default_rng([params.seed, tree_index])
        sample = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X, y, np.asarray(sample), 0, params, k_features, rng))
    return ForestModel(trees=trees, class_labels=class_labels, n_features=X.shape[1], params=params)


def _tree_decide(tree: dict, row: np.ndarray) -> int:
    node = tree
    while "label" not in node:
        node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
    return node["label"]


def predict(model: ForestModel, rows) -> list[str]:
    """Majority vote across trees; ties go to the lexicographically smaller label."""
    X = _coerce_rows(rows)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected rows with {model.n_features} features, got shape {X.shape}")
    out: list[str] = []
    n_trees = len(model.trees)
    for row in X:
        ones = sum(_tree_decide(tree, row) for tree in model.trees)
        out.append(model.class_labels[1] if ones > n_trees - ones else model.class_labels[0])
    return out


def evaluate(y_true: Sequence[str], y_pred: Sequence[str], positive_label: str) -> Metrics:
    """Accuracy / precision / recall / F1 against the given positive label."""
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if not y_true:
        raise ValueError("cannot evaluate empty label lists")
    observed = set(y_true) | set(y_pred)
    if positive_label not in observed:
        raise ValueError(f"positive label {positive_label!r} not among observed labels {sorted(observed)}")
    tp = fp = tn = fn = 0
    for truth, pred in zip(y_true, y_pred):
        if pred == positive_label:
            if truth == positive_label:
                tp += 1
            else:
                fp += 1
        else:
            if truth == positive_label:
                fn += 1
            else:
                tn += 1
    total = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp, fp=fp, tn=tn, fn=fn,
        positive_label=positive_label,
    )


def save_model(model: ForestModel, dest) -> None:
    """Persist a forest as versioned JSON."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "class_labels": list(model.class_labels),
        "n_features": model.n_features,
        "params": model.params.to_dict(),
        "trees": model.trees,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        dest.write(text)


def load_model(source) -> ForestModel:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    else:
        payload = json.load(source)
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    params = ForestParams(
        n_trees=payload["params"]["n_trees"],
        max_depth=payload["params"]["max_depth"],
        min_samples_split=payload["params"]["min_samples_split"],
        features_per_split=payload["params"]["features_per_split"],
        seed=payload["params"]["seed"],
    )
    return ForestModel(
        trees=payload["trees"],
        class_labels=tuple(payload["class_labels"]),
        n_features=payload["n_features"],
        params=params,
    )

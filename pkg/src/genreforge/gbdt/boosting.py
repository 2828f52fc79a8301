"""Stagewise additive boosting over regression trees.

Two modes:
  * regression — squared-error boosting in its literal stagewise form:
    F_0 = mean(y), each round fits a tree to the residuals y - F and steps
    by a golden-section line search over (0, 2] (or a fixed learning rate).
  * classification — multiclass softmax cross-entropy: base scores are log
    class priors, each round fits one tree per class to y_k - p_k with
    Newton leaf values sum(g)/(sum(h) + lambda), h = p_k (1 - p_k), and
    predictions are softmax(base + learning_rate * accumulated trees).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..errors import SchemaError, ShapeMismatch
from ..nn.layers import softmax
from .trees import (
    BinnedMatrix,
    GbdtConfig,
    RegressionTree,
    bin_matrix,
    fit_tree_binned,
    fit_tree_exact,
)

MFCC_SEGMENT_SHAPE = (130, 13)


def tabularize_mfcc(segment) -> np.ndarray:
    """Row-major flatten of one 130 x 13 MFCC matrix: (i, j) -> 13*i + j."""
    matrix = np.asarray(getattr(segment, "matrix", segment), dtype=np.float64)
    if matrix.shape != MFCC_SEGMENT_SHAPE:
        raise ShapeMismatch(f"expected {MFCC_SEGMENT_SHAPE}, got {matrix.shape}")
    return matrix.reshape(-1)


def tabularize_batch(matrices: np.ndarray) -> np.ndarray:
    """(n, 130, 13) stack -> (n, 1690) table, row-major per segment."""
    matrices = np.asarray(matrices, dtype=np.float64)
    if matrices.ndim != 3 or matrices.shape[1:] != MFCC_SEGMENT_SHAPE:
        raise ShapeMismatch(f"expected (n, 130, 13), got {matrices.shape}")
    return matrices.reshape(len(matrices), -1)


def neg_gradient(labels, current_scores, loss: str):
    """Negative loss gradient at the current scores.

    mse: y - F (the residual). softmax_ce: onehot(y) - softmax(scores),
    one column per class.
    """
    if loss == "mse":
        return np.asarray(labels, dtype=np.float64) - np.asarray(current_scores, dtype=np.float64)
    if loss == "softmax_ce":
        scores = np.asarray(current_scores, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        probs = softmax(scores)
        onehot = np.zeros_like(probs)
        onehot[np.arange(len(labels)), labels] = 1.0
        return onehot - probs
    raise ValueError(f"unknown loss {loss!r}")


def _golden_section_min(fn, lo: float, hi: float, iters: int = 72) -> float:
    """Deterministic golden-section minimizer on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


@dataclass
class GbmRegressor:
    """Additive model F(x) = base + sum_m gamma_m * tree_m(x)."""

    base: float
    trees: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    config: GbdtConfig = GbdtConfig(mode="regression")
    train_mse: list = field(default_factory=list)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.full(len(X), self.base)
        for tree, gamma in zip(self.trees, self.gammas):
            out += gamma * tree.predict(X)
        return out


def fit_gbm_regression(X, y, config: GbdtConfig, round_callback=None) -> GbmRegressor:
    """Squared-error stagewise boosting with per-round step-size search.

    With line_search the step is the golden-section minimizer of the
    training MSE along the fitted tree (the optimum is interior, so the
    training MSE never increases); otherwise the fixed learning_rate.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if config.mode != "regression":
        raise ValueError("fit_gbm_regression requires mode='regression'")
    model = GbmRegressor(base=float(y.mean()), config=config)
    current = np.full(len(y), model.base)
    rows = np.arange(len(y), dtype=np.int64)
    hess = np.ones(len(y))
    binned = bin_matrix(X, config.n_bins) if config.split_method == "hist" else None
    for round_index in range(config.n_rounds):
        residual = neg_gradient(y, current, "mse")
        increment = np.zeros(len(y))
        if config.split_method == "hist":
            tree = fit_tree_binned(
                binned, residual, hess, rows,
                config.max_depth, config.min_samples_leaf, 0.0, out_pred=increment,
            )
        else:
            tree = fit_tree_exact(
                X, residual, hess, rows,
                config.max_depth, config.min_samples_leaf, 0.0, out_pred=increment,
            )
        if config.line_search:
            gamma = _golden_section_min(
                lambda s: float(np.mean((residual - s * increment) ** 2)), 1e-9, 2.0
            )
        else:
            gamma = config.learning_rate
        current = current + gamma * increment
        model.trees.append(tree)
        model.gammas.append(float(gamma))
        mse = float(np.mean((y - current) ** 2))
        model.train_mse.append(mse)
        if round_callback is not None:
            round_callback(round_index + 1, mse)
    return model


@dataclass
class BoostedClassifier:
    """Per-round, per-class trees plus log-prior base scores."""

    base_scores: np.ndarray  # (K,)
    trees: list  # rounds x K nested lists of RegressionTree
    config: GbdtConfig
    n_classes: int
    n_features: int
    train_ce: list = field(default_factory=list)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeMismatch(
                f"expected (n, {self.n_features}) features, got {X.shape}"
            )
        scores = np.tile(self.base_scores, (len(X), 1))
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                scores[:, k] += self.config.learning_rate * tree.predict(X)
        return scores

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


def fit_boosted(X, y, config: GbdtConfig, round_callback=None) -> BoostedClassifier:
    """Multiclass softmax boosting: one tree per class per round.

    K = 1 degenerates to a constant predictor (probability one for the
    single class) without fitting any trees.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if config.mode != "classification":
        raise ValueError("fit_boosted requires mode='classification'")
    if len(X) != len(y):
        raise ShapeMismatch(f"X has {len(X)} rows but y has {len(y)}")
    n = len(y)
    n_classes = int(y.max()) + 1 if n else 1
    priors = np.bincount(y, minlength=n_classes) / n
    base = np.log(np.maximum(priors, 1e-12))
    model = BoostedClassifier(
        base_scores=base,
        trees=[],
        config=config,
        n_classes=n_classes,
        n_features=X.shape[1],
    )
    if n_classes == 1:
        return model

    scores = np.tile(base, (n, 1))
    rows = np.arange(n, dtype=np.int64)
    onehot = np.zeros((n, n_classes))
    onehot[rows, y] = 1.0
    binned = bin_matrix(X, config.n_bins) if config.split_method == "hist" else None
    for round_index in range(config.n_rounds):
        probs = softmax(scores)
        grads = onehot - probs
        hessians = probs * (1.0 - probs)
        round_trees = []
        for k in range(n_classes):
            increment = np.zeros(n)
            if config.split_method == "hist":
                tree = fit_tree_binned(
                    binned, grads[:, k], hessians[:, k], rows,
                    config.max_depth, config.min_samples_leaf, config.lam,
                    out_pred=increment,
                )
            else:
                tree = fit_tree_exact(
                    X, grads[:, k], hessians[:, k], rows,
                    config.max_depth, config.min_samples_leaf, config.lam,
                    out_pred=increment,
                )
            scores[:, k] += config.learning_rate * increment
            round_trees.append(tree)
        model.trees.append(round_trees)
        log_probs = scores - np.log(np.exp(scores - scores.max(axis=1, keepdims=True)).sum(axis=1, keepdims=True)) - scores.max(axis=1, keepdims=True)
        ce = float(-log_probs[rows, y].mean())
        model.train_ce.append(ce)
        if round_callback is not None:
            round_callback(round_index + 1, ce)
    return model


def predict_proba_gbdt(model: BoostedClassifier, X) -> np.ndarray:
    """Probability rows (sum to 1 within 1e-9) for a fitted classifier."""
    return model.predict_proba(X)


# ---------------------------------------------------------------------------
# persistence: JSON document, round-trips the float64 values exactly


def classifier_to_dict(model: BoostedClassifier, extra: dict | None = None) -> dict:
    doc = {
        "format": "gbdt-classifier",
        "version": 1,
        "config": asdict(model.config),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "base_scores": model.base_scores.tolist(),
        "trees": [[tree.to_dict() for tree in round_trees] for round_trees in model.trees],
        "train_ce": list(model.train_ce),
    }
    if extra:
        doc.update(extra)
    return doc


def classifier_from_dict(doc: dict) -> BoostedClassifier:
    try:
        config = GbdtConfig(**doc["config"])
        return BoostedClassifier(
            base_scores=np.asarray(doc["base_scores"], dtype=np.float64),
            trees=[
                [RegressionTree.from_dict(t) for t in round_trees]
                for round_trees in doc["trees"]
            ],
            config=config,
            n_classes=int(doc["n_classes"]),
            n_features=int(doc["n_features"]),
            train_ce=list(doc.get("train_ce", [])),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed gbdt model document: {exc}") from exc


def save_classifier(model: BoostedClassifier, path, extra: dict | None = None) -> None:
    doc = classifier_to_dict(model, extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_classifier(path) -> tuple[BoostedClassifier, dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return classifier_from_dict(doc), doc

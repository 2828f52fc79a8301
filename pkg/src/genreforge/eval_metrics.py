"""Dataset splitting and the evaluation surface: accuracy, one-vs-rest AUC,
row-normalized confusion matrices, and learning-curve logs.

AUC is the macro-averaged one-vs-rest Mann-Whitney rank statistic with ties
counted 0.5; the method string is embedded in every serialized report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyInput, InvalidFractions, LengthMismatch, ShapeMismatch

AUC_METHOD = "macro one-vs-rest (Mann-Whitney rank statistic, ties counted 0.5)"


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    val: np.ndarray
    seed: int
    fractions: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "train": self.train.tolist(),
            "test": self.test.tolist(),
            "val": self.val.tolist(),
            "seed": self.seed,
            "fractions": list(self.fractions),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitIndices":
        return cls(
            train=np.asarray(doc["train"], dtype=np.int64),
            test=np.asarray(doc["test"], dtype=np.int64),
            val=np.asarray(doc["val"], dtype=np.int64),
            seed=int(doc["seed"]),
            fractions=tuple(doc["fractions"]),
        )

    def partition(self, name: str) -> np.ndarray:
        try:
            return getattr(self, name)
        except AttributeError:
            raise InvalidFractions(f"unknown partition {name!r}") from None


@dataclass
class EvalReport:
    accuracy: float
    auc_per_class: list  # float per class, None where degenerate
    auc_macro: float
    confusion: np.ndarray  # (K, K) row-normalized
    n_samples: int
    zero_support_rows: list = field(default_factory=list)
    degenerate_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc_per_class": self.auc_per_class,
            "auc_macro": self.auc_macro,
            "auc_method": AUC_METHOD,
            "confusion": [list(row) for row in self.confusion.tolist()],
            "n_samples": self.n_samples,
            "zero_support_rows": self.zero_support_rows,
            "degenerate_classes": self.degenerate_classes,
        }


def _largest_remainder(total: int, fractions) -> list[int]:
    quotas = [total * f for f in fractions]
    base = [int(np.floor(q)) for q in quotas]
    short = total - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def stratified_split(labels, fractions=(0.80, 0.16, 0.04), seed: int = 0) -> SplitIndices:
    """Per-class shuffle + largest-remainder rounding into train/test/val.

    Per-class partition counts deviate from the exact per-class quota by
    less than one item.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise InvalidFractions(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidFractions(f"fractions sum to {sum(fractions)}, expected 1")
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInput("cannot split an empty label list")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for cls in np.unique(labels):
        indices = np.nonzero(labels == cls)[0]
        shuffled = rng.permutation(indices)
        counts = _largest_remainder(len(indices), fractions)
        offset = 0
        for p, count in enumerate(counts):
            parts[p].extend(shuffled[offset : offset + count].tolist())
            offset += count
    train, test, val = (np.asarray(sorted(p), dtype=np.int64) for p in parts)
    return SplitIndices(train=train, test=test, val=val, seed=seed, fractions=fractions)


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise EmptyInput("accuracy of zero samples is undefined")
    if predictions.shape != labels.shape:
        raise ShapeMismatch(f"{predictions.shape} vs {labels.shape}")
    return float((predictions == labels).mean())


def confusion_counts(predictions, labels, n_classes: int) -> np.ndarray:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return counts


def confusion_proportional(predictions, labels, n_classes: int) -> np.ndarray:
    """counts[i][j] = #{true i, predicted j}, rows normalized to sum to 1.

    Rows with zero support are emitted as all zeros (flagged by the caller
    via `zero_support_rows`).
    """
    counts = confusion_counts(predictions, labels, n_classes)
    support = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, support, out=np.zeros((n_classes, n_classes)), where=support > 0)


def zero_support_rows(labels, n_classes: int) -> list[int]:
    support = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes)
    return [int(k) for k in range(n_classes) if support[k] == 0]


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied groups assigned their average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values))
    start = 0
    while start < len(values):
        stop = start
        while stop + 1 < len(values) and sorted_vals[stop + 1] == sorted_vals[start]:
            stop += 1
        ranks[order[start : stop + 1]] = (start + stop) / 2.0 + 1.0
        start = stop + 1
    return ranks


def binary_auc(scores, positives) -> float:
    """Mann-Whitney AUC of scores against a boolean positive mask."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EmptyInput("AUC needs both positive and negative samples")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_auc_ovr(score_rows, labels) -> tuple[list, float, list]:
    """One-vs-rest AUC of each probability column.

    Returns (per-class AUCs with None for degenerate classes, their
    unweighted mean over supported classes, degenerate class ids). A class
    is degenerate when it has no positives or no negatives in `labels`.
    """
    score_rows = np.asarray(score_rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if score_rows.ndim != 2 or len(score_rows) != len(labels):
        raise ShapeMismatch(f"scores {score_rows.shape} vs labels {labels.shape}")
    per_class = []
    degenerate = []
    for k in range(score_rows.shape[1]):
        positives = labels == k
        if positives.all() or not positives.any():
            per_class.append(None)
            degenerate.append(k)
            continue
        per_class.append(binary_auc(score_rows[:, k], positives))
    supported = [a for a in per_class if a is not None]
    if not supported:
        raise EmptyInput("no class has both positives and negatives")
    return per_class, float(np.mean(supported)), degenerate


def evaluate_predictions(score_rows, labels, n_classes: int) -> EvalReport:
    """Assemble the full report from probability rows and true labels."""
    score_rows = np.asarray(score_rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    predicted = score_rows.argmax(axis=1)
    per_class, macro, degenerate = roc_auc_ovr(score_rows, labels)
    return EvalReport(
        accuracy=accuracy(predicted, labels),
        auc_per_class=per_class,
        auc_macro=macro,
        confusion=confusion_proportional(predicted, labels, n_classes),
        n_samples=len(labels),
        zero_support_rows=zero_support_rows(labels, n_classes),
        degenerate_classes=degenerate,
    )


# ---------------------------------------------------------------------------
# curve logs and serialization

CURVE_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def log_curves(history) -> list[tuple]:
    """One (epoch, train_loss, train_acc, val_loss, val_acc) row per epoch."""
    series = (history.train_loss, history.train_acc, history.val_loss, history.val_acc)
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise LengthMismatch(f"history series lengths differ: {sorted(lengths)}")
    if lengths.pop() != history.stopped_epoch:
        raise LengthMismatch("history length does not equal stopped_epoch")
    return [
        (epoch + 1, *(s[epoch] for s in series))
        for epoch in range(history.stopped_epoch)
    ]


def format_sig9(value: float) -> str:
    """9-significant-digit float formatting used in CSV output."""
    return format(float(value), ".9g")


def write_curves_csv(history, path) -> None:
    rows = log_curves(history)
    lines = [",".join(CURVE_HEADER)]
    for row in rows:
        lines.append(",".join([str(row[0])] + [format_sig9(v) for v in row[1:]]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_confusion_csv(matrix: np.ndarray, path, genres=None) -> None:
    lines = []
    if genres is not None:
        lines.append(",".join(["true\\pred"] + list(genres)))
    for i, row in enumerate(np.asarray(matrix)):
        prefix = [genres[i]] if genres is not None else []
        lines.append(",".join(prefix + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_confusion_ppm(matrix: np.ndarray, path, cell: int = 32) -> None:
    """Binary P6 heatmap, one cell x cell block per matrix entry,
    grayscale-mapped from [0, 1]."""
    matrix = np.asarray(matrix, dtype=np.float64)
    gray = np.clip(np.rint(matrix * 255.0), 0, 255).astype(np.uint8)
    big = np.repeat(np.repeat(gray, cell, axis=0), cell, axis=1)
    pixels = np.repeat(big[:, :, None], 3, axis=2)
    header = f"P6\n{big.shape[1]} {big.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def write_report_json(report: EvalReport, path, extra: dict | None = None) -> None:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1))

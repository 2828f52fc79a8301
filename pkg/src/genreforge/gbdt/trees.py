"""Greedy CART regression trees with histogram or exact split search.

Splits maximize the squared-error reduction of the fitted targets,
GL^2/CL + GR^2/CR - G^2/C. Leaf values are target means, or Newton steps
sum(g)/(sum(h) + lambda) when hessians are supplied. Ties break toward the
lowest feature index, then the lowest threshold (scan order + strictly
greater comparisons). Degenerate nodes (all rows identical, or nothing
admissible) become leaves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch

# Guards float noise: constant targets produce gains within rounding of zero
# and must yield a single leaf.
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class GbdtConfig:
    n_rounds: int = 1000
    learning_rate: float = 0.3
    max_depth: int = 6
    min_samples_leaf: int = 1
    n_bins: int = 256
    seed: int = 0
    mode: str = "classification"  # or "regression"
    lam: float = 1.0  # L2 leaf regularization for Newton leaf values
    split_method: str = "hist"  # or "exact"
    line_search: bool = False  # regression mode: golden-section step size

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError(f"n_rounds must be >= 0, got {self.n_rounds}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.n_bins < 2:
            raise ValueError(f"n_bins must be >= 2, got {self.n_bins}")
        if self.mode not in ("regression", "classification"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.split_method not in ("hist", "exact"):
            raise ValueError(f"unknown split_method {self.split_method!r}")


@dataclass(frozen=True)
class RegressionTree:
    """Node arrays in preorder; feature == -1 marks a leaf."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64, split sends x[feature] <= threshold left
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64, meaningful at leaves

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def leaf_indices(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                return idx
            nodes = idx[active]
            go_left = X[active, feat[active]] <= self.threshold[nodes]
            idx[active] = np.where(go_left, self.left[nodes], self.right[nodes])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_indices(np.asarray(X, dtype=np.float64))]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int32),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int32),
            right=np.asarray(doc["right"], dtype=np.int32),
            value=np.asarray(doc["value"], dtype=np.float64),
        )


@dataclass(frozen=True)
class BinnedMatrix:
    """Quantile-binned feature matrix shared across boosting rounds."""

    codes: np.ndarray  # (n, d) unsigned bin codes
    boundaries: tuple  # per-feature ascending edge values (thresholds)
    n_bins: np.ndarray  # int64 per feature: len(boundaries) + 1
    max_bins: int
    n_features: int


def bin_matrix(X: np.ndarray, n_bins: int) -> BinnedMatrix:
    """Quantile binning; boundary b separates codes <= b from codes > b,
    and code(x) <= b exactly when x <= boundary value b."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    boundaries = []
    counts = np.empty(d, dtype=np.int64)
    dtype = np.uint8 if n_bins <= 256 else np.uint16
    codes = np.empty((n, d), dtype=dtype)
    for j in range(d):
        col = X[:, j]
        edges = np.unique(np.quantile(col, qs)) if len(qs) else np.empty(0)
        edges = edges[edges < col.max()] if edges.size else edges
        boundaries.append(edges)
        counts[j] = len(edges) + 1
        codes[:, j] = np.searchsorted(edges, col, side="left").astype(dtype)
    return BinnedMatrix(
        codes=codes,
        boundaries=tuple(boundaries),
        n_bins=counts,
        max_bins=int(counts.max()),
        n_features=d,
    )


class _TreeBuilder:
    def __init__(self, max_depth: int, min_samples_leaf: int, lam: float):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.lam = lam
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def leaf_value(self, g_sum: float, h_sum: float) -> float:
        return g_sum / (h_sum + self.lam)

    def finish(self) -> RegressionTree:
        return RegressionTree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )


def _min_gain(g_sum: float, count: int) -> float:
    return _GAIN_EPS * max(1.0, abs(g_sum * g_sum / count))


def fit_tree_binned(
    binned: BinnedMatrix,
    grad: np.ndarray,
    hess: np.ndarray,
    rows: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    lam: float,
    out_pred: np.ndarray | None = None,
) -> RegressionTree:
    """Histogram-based greedy fit over the given row subset."""
    from . import _kernels  # deferred: numba JIT only when actually fitting

    builder = _TreeBuilder(max_depth, min_samples_leaf, lam)
    codes = binned.codes
    max_bins = binned.max_bins
    n_bins = binned.n_bins

    def grow(rows, hists, g_sum, h_sum, count, depth):
        node = builder.add_node()
        if depth >= max_depth or count < 2 * min_samples_leaf:
            split = (-1,)
        else:
            split = _kernels.best_split_scan(
                hists[0], hists[1], hists[2], n_bins,
                g_sum, count, min_samples_leaf, _min_gain(g_sum, count),
            )
        if split[0] < 0:
            builder.value[node] = builder.leaf_value(g_sum, h_sum)
            if out_pred is not None:
                out_pred[rows] = builder.value[node]
            return node
        feat, boundary, _, left_g, left_h, left_c = split
        builder.feature[node] = feat
        builder.threshold[node] = float(binned.boundaries[feat][boundary])
        mask = codes[rows, feat] <= boundary
        left_rows = rows[mask]
        right_rows = rows[~mask]
        right_g = g_sum - left_g
        right_h = h_sum - left_h
        right_c = count - left_c
        # Histogram subtraction: materialize the smaller child, derive the other.
        if left_c <= right_c:
            small = _kernels.build_histograms(codes, left_rows, grad, hess, max_bins)
            big = (hists[0] - small[0], hists[1] - small[1], hists[2] - small[2])
            left_hists, right_hists = small, big
        else:
            small = _kernels.build_histograms(codes, right_rows, grad, hess, max_bins)
            big = (hists[0] - small[0], hists[1] - small[1], hists[2] - small[2])
            left_hists, right_hists = big, small
        hists = None  # free the parent before recursing
        builder.left[node] = grow(left_rows, left_hists, left_g, left_h, left_c, depth + 1)
        builder.right[node] = grow(right_rows, right_hists, right_g, right_h, right_c, depth + 1)
        return node

    rows = np.asarray(rows, dtype=np.int64)
    root_hists = _kernels.build_histograms(codes, rows, grad, hess, max_bins)
    grow(
        rows,
        root_hists,
        float(grad[rows].sum()),
        float(hess[rows].sum()),
        len(rows),
        0,
    )
    return builder.finish()


def _best_split_exact(X, grad, rows, min_samples_leaf, min_gain):
    """Exhaustive scan over midpoints of consecutive distinct values."""
    count = len(rows)
    g_node = grad[rows]
    g_sum = float(g_node.sum())
    parent_score = g_sum * g_sum / count
    best = None
    best_gain = min_gain
    for j in range(X.shape[1]):
        x = X[rows, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cg = np.cumsum(g_node[order])
        sizes = np.arange(1, count)
        valid = xs[:-1] < xs[1:]
        valid &= (sizes >= min_samples_leaf) & (count - sizes >= min_samples_leaf)
        if not valid.any():
            continue
        gl = cg[:-1]
        gr = g_sum - gl
        gains = np.where(
            valid,
            gl * gl / sizes + gr * gr / (count - sizes) - parent_score,
            -np.inf,
        )
        pos = int(np.argmax(gains))  # first max: lowest threshold within feature
        if gains[pos] > best_gain:
            best_gain = float(gains[pos])
            best = (j, float((xs[pos] + xs[pos + 1]) / 2.0))
    return best


def fit_tree_exact(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    rows: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    lam: float,
    out_pred: np.ndarray | None = None,
) -> RegressionTree:
    """Exact greedy fit considering every midpoint threshold."""
    builder = _TreeBuilder(max_depth, min_samples_leaf, lam)

    def grow(rows, depth):
        node = builder.add_node()
        g_sum = float(grad[rows].sum())
        h_sum = float(hess[rows].sum())
        count = len(rows)
        split = None
        if depth < max_depth and count >= 2 * min_samples_leaf:
            split = _best_split_exact(X, grad, rows, min_samples_leaf, _min_gain(g_sum, count))
        if split is None:
            builder.value[node] = builder.leaf_value(g_sum, h_sum)
            if out_pred is not None:
                out_pred[rows] = builder.value[node]
            return node
        feat, threshold = split
        builder.feature[node] = feat
        builder.threshold[node] = threshold
        mask = X[rows, feat] <= threshold
        builder.left[node] = grow(rows[mask], depth + 1)
        builder.right[node] = grow(rows[~mask], depth + 1)
        return node

    X = np.asarray(X, dtype=np.float64)
    grow(np.asarray(rows, dtype=np.int64), 0)
    return builder.finish()


def fit_regression_tree(
    X: np.ndarray,
    targets: np.ndarray,
    hessians: np.ndarray | None = None,
    config: GbdtConfig = GbdtConfig(),
) -> RegressionTree:
    """Fit one tree to targets.

    Without hessians, leaves hold the plain target mean. With hessians,
    leaves hold the Newton step sum(g)/(sum(h) + lambda).
    """
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or len(targets) != len(X):
        raise ShapeMismatch(f"X {X.shape} and targets {targets.shape} disagree")
    if hessians is None:
        hess = np.ones(len(X))
        lam = 0.0
    else:
        hess = np.asarray(hessians, dtype=np.float64)
        lam = config.lam
    rows = np.arange(len(X), dtype=np.int64)
    if config.split_method == "exact":
        return fit_tree_exact(
            X, targets, hess, rows, config.max_depth, config.min_samples_leaf, lam
        )
    binned = bin_matrix(X, config.n_bins)
    return fit_tree_binned(
        binned, targets, hess, rows, config.max_depth, config.min_samples_leaf, lam
    )

"""Layer specifications and their forward/backward implementations.

Six layer kinds: Conv2D, MaxPool2D, BatchNorm, Dropout, Flatten, Dense.
Activations are ReLU(x) = max(0, x) and a numerically stable softmax.
All math runs in float64 with channels-last layout (N, H, W, C).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams, ShapeMismatch

# ---------------------------------------------------------------------------
# activations and loss


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis (max-subtracted exponentials)."""
    x = np.asarray(x, dtype=np.float64)
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(pred, label) -> float:
    """-ln p[label] for one probability row, clamped at p >= 1e-12."""
    pred = np.asarray(pred, dtype=np.float64)
    return float(-np.log(max(float(pred[int(label)]), 1e-12)))


def batch_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean -ln p[label] over probability rows."""
    rows = np.arange(len(labels))
    picked = np.clip(probs[rows, labels], 1e-12, None)
    return float(-np.log(picked).mean())


# ---------------------------------------------------------------------------
# layer specs


def _pair(value) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    pair = tuple(int(v) for v in value)
    if len(pair) != 2:
        raise InvalidParams(f"expected an int or a pair, got {value!r}")
    return pair


@dataclass(frozen=True)
class Conv2DSpec:
    filters: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: str = "valid"
    activation: str = "relu"
    kind: str = "conv2d"

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        object.__setattr__(self, "stride", _pair(self.stride))
        if self.filters < 1 or min(self.kernel) < 1 or min(self.stride) < 1:
            raise InvalidParams(f"non-positive Conv2D dimensions: {self}")
        if self.padding not in ("valid", "same"):
            raise InvalidParams(f"unknown padding {self.padding!r}")
        if self.activation not in ("relu", "none"):
            raise InvalidParams(f"unsupported conv activation {self.activation!r}")


@dataclass(frozen=True)
class MaxPool2DSpec:
    pool: tuple[int, int]
    stride: tuple[int, int] | None = None
    padding: str = "valid"
    kind: str = "maxpool2d"

    def __post_init__(self):
        object.__setattr__(self, "pool", _pair(self.pool))
        stride = self.pool if self.stride is None else _pair(self.stride)
        object.__setattr__(self, "stride", stride)
        if min(self.pool) < 1 or min(stride) < 1:
            raise InvalidParams(f"non-positive MaxPool2D dimensions: {self}")
        if self.padding not in ("valid", "same"):
            raise InvalidParams(f"unknown padding {self.padding!r}")


@dataclass(frozen=True)
class BatchNormSpec:
    momentum: float = 0.99
    epsilon: float = 1e-3
    kind: str = "batchnorm"

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidParams(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epsilon <= 0.0:
            raise InvalidParams(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class DropoutSpec:
    rate: float
    kind: str = "dropout"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise InvalidParams(f"dropout rate must be in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class FlattenSpec:
    kind: str = "flatten"


@dataclass(frozen=True)
class DenseSpec:
    units: int
    activation: str = "none"
    kind: str = "dense"

    def __post_init__(self):
        if self.units < 1:
            raise InvalidParams(f"units must be >= 1, got {self.units}")
        if self.activation not in ("relu", "softmax", "none"):
            raise InvalidParams(f"unknown activation {self.activation!r}")


LayerSpec = (
    Conv2DSpec | MaxPool2DSpec | BatchNormSpec | DropoutSpec | FlattenSpec | DenseSpec
)

# ---------------------------------------------------------------------------
# shape and parameter-count inference (closed forms, no allocation)


def _out_dim(size: int, window: int, stride: int, padding: str) -> int:
    if padding == "same":
        return -(-size // stride)  # ceil
    if size < window:
        raise ShapeMismatch(f"window {window} larger than input {size} with valid padding")
    return (size - window) // stride + 1


def infer_output_shape(spec: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    if isinstance(spec, Conv2DSpec):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"Conv2D needs an H x W x C input, got {in_shape}")
        h = _out_dim(in_shape[0], spec.kernel[0], spec.stride[0], spec.padding)
        w = _out_dim(in_shape[1], spec.kernel[1], spec.stride[1], spec.padding)
        return (h, w, spec.filters)
    if isinstance(spec, MaxPool2DSpec):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"MaxPool2D needs an H x W x C input, got {in_shape}")
        h = _out_dim(in_shape[0], spec.pool[0], spec.stride[0], spec.padding)
        w = _out_dim(in_shape[1], spec.pool[1], spec.stride[1], spec.padding)
        return (h, w, in_shape[2])
    if isinstance(spec, (BatchNormSpec, DropoutSpec)):
        return in_shape
    if isinstance(spec, FlattenSpec):
        size = 1
        for dim in in_shape:
            size *= dim
        return (size,)
    if isinstance(spec, DenseSpec):
        if len(in_shape) != 1:
            raise ShapeMismatch(f"Dense needs a flat input, got {in_shape}")
        return (spec.units,)
    raise InvalidParams(f"unknown layer spec {spec!r}")


def layer_param_count(spec: LayerSpec, in_shape: tuple[int, ...]) -> int:
    if isinstance(spec, Conv2DSpec):
        kh, kw = spec.kernel
        return kh * kw * in_shape[2] * spec.filters + spec.filters
    if isinstance(spec, BatchNormSpec):
        return 4 * in_shape[-1]
    if isinstance(spec, DenseSpec):
        return in_shape[0] * spec.units + spec.units
    return 0


# ---------------------------------------------------------------------------
# runtime layers


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _pad_amounts(size: int, window: int, stride: int) -> tuple[int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + window - size, 0)
    return total // 2, total - total // 2


class ConvLayer:
    def __init__(self, spec: Conv2DSpec, in_shape, rng: np.random.Generator | None = None):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = infer_output_shape(spec, self.in_shape)
        kh, kw = spec.kernel
        c = self.in_shape[2]
        fan_in = kh * kw * c
        if rng is None:
            rng = np.random.default_rng(0)
        self.params = {
            "W": _he_uniform(rng, (kh, kw, c, spec.filters), fan_in),
            "b": np.zeros(spec.filters),
        }
        self.trainable = ("W", "b")
        self._cache = None

    def _pad(self, x: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
        if self.spec.padding == "valid":
            return x, (0, 0)
        (ph0, ph1) = _pad_amounts(x.shape[1], self.spec.kernel[0], self.spec.stride[0])
        (pw0, pw1) = _pad_amounts(x.shape[2], self.spec.kernel[1], self.spec.stride[1])
        padded = np.pad(x, ((0, 0), (ph0, ph1), (pw0, pw1), (0, 0)))
        return padded, (ph0, pw0)

    def _im2col(self, xp: np.ndarray) -> np.ndarray:
        kh, kw = self.spec.kernel
        sh, sw = self.spec.stride
        oh, ow, _ = self.out_shape
        n, _, _, c = xp.shape
        cols = np.empty((n, oh, ow, kh, kw, c))
        for i in range(kh):
            for j in range(kw):
                cols[:, :, :, i, j, :] = xp[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :]
        return cols.reshape(n * oh * ow, kh * kw * c)

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        if x.shape[1:] != self.in_shape:
            raise ShapeMismatch(f"Conv2D expected {self.in_shape}, got {x.shape[1:]}")
        xp, _ = self._pad(x)
        cols = self._im2col(xp)
        kh, kw = self.spec.kernel
        w_mat = self.params["W"].reshape(kh * kw * self.in_shape[2], self.spec.filters)
        pre = cols @ w_mat + self.params["b"]
        pre = pre.reshape((x.shape[0],) + self.out_shape)
        out = relu(pre) if self.spec.activation == "relu" else pre
        if training:
            self._cache = (x.shape, xp.shape, cols, pre)
        return out

    def backward(self, dy: np.ndarray):
        x_shape, xp_shape, cols, pre = self._cache
        if self.spec.activation == "relu":
            dy = dy * (pre > 0.0)
        kh, kw = self.spec.kernel
        sh, sw = self.spec.stride
        oh, ow, f = self.out_shape
        c = self.in_shape[2]
        dy_mat = dy.reshape(-1, f)
        w_mat = self.params["W"].reshape(kh * kw * c, f)
        grads = {
            "W": (cols.T @ dy_mat).reshape(self.params["W"].shape),
            "b": dy_mat.sum(axis=0),
        }
        dcols = (dy_mat @ w_mat.T).reshape(x_shape[0], oh, ow, kh, kw, c)
        dxp = np.zeros(xp_shape)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :] += dcols[:, :, :, i, j, :]
        if self.spec.padding == "same":
            ph0, _ = _pad_amounts(x_shape[1], kh, sh)
            pw0, _ = _pad_amounts(x_shape[2], kw, sw)
            dx = dxp[:, ph0 : ph0 + x_shape[1], pw0 : pw0 + x_shape[2], :]
        else:
            dx = dxp
        return dx, grads


class MaxPoolLayer:
    def __init__(self, spec: MaxPool2DSpec, in_shape, rng=None):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = infer_output_shape(spec, self.in_shape)
        self.params = {}
        self.trainable = ()
        self._cache = None

    def _pad(self, x: np.ndarray) -> np.ndarray:
        if self.spec.padding == "valid":
            return x
        ph0, ph1 = _pad_amounts(x.shape[1], self.spec.pool[0], self.spec.stride[0])
        pw0, pw1 = _pad_amounts(x.shape[2], self.spec.pool[1], self.spec.stride[1])
        return np.pad(
            x, ((0, 0), (ph0, ph1), (pw0, pw1), (0, 0)), constant_values=-np.inf
        )

    def _windows(self, xp: np.ndarray) -> np.ndarray:
        ph, pw = self.spec.pool
        sh, sw = self.spec.stride
        oh, ow, _ = self.out_shape
        stacked = np.empty((ph * pw,) + (xp.shape[0], oh, ow, xp.shape[3]))
        for i in range(ph):
            for j in range(pw):
                stacked[i * pw + j] = xp[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :]
        return stacked

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        if x.shape[1:] != self.in_shape:
            raise ShapeMismatch(f"MaxPool2D expected {self.in_shape}, got {x.shape[1:]}")
        xp = self._pad(x)
        stacked = self._windows(xp)
        winner = np.argmax(stacked, axis=0)  # first max wins ties, deterministic
        out = np.take_along_axis(stacked, winner[None], axis=0)[0]
        if training:
            self._cache = (x.shape, xp.shape, winner)
        return out

    def backward(self, dy: np.ndarray):
        x_shape, xp_shape, winner = self._cache
        ph, pw = self.spec.pool
        sh, sw = self.spec.stride
        oh, ow, _ = self.out_shape
        dxp = np.zeros(xp_shape)
        for i in range(ph):
            for j in range(pw):
                view = dxp[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :]
                view += dy * (winner == i * pw + j)
        if self.spec.padding == "same":
            ph0, _ = _pad_amounts(x_shape[1], ph, sh)
            pw0, _ = _pad_amounts(x_shape[2], pw, sw)
            dx = dxp[:, ph0 : ph0 + x_shape[1], pw0 : pw0 + x_shape[2], :]
        else:
            dx = dxp
        return dx, {}


class BatchNormLayer:
    """Per-channel batch normalization over all non-channel axes.

    Stores gamma, beta, moving_mean, moving_var (4C parameters, 2C trainable).
    Train mode normalizes with biased batch statistics and updates the moving
    averages; infer mode uses the stored statistics.
    """

    def __init__(self, spec: BatchNormSpec, in_shape, rng=None):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = self.in_shape
        channels = self.in_shape[-1]
        self.params = {
            "gamma": np.ones(channels),
            "beta": np.zeros(channels),
            "moving_mean": np.zeros(channels),
            "moving_var": np.ones(channels),
        }
        self.trainable = ("gamma", "beta")
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        if x.shape[1:] != self.in_shape:
            raise ShapeMismatch(f"BatchNorm expected {self.in_shape}, got {x.shape[1:]}")
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            momentum = self.spec.momentum
            self.params["moving_mean"] = momentum * self.params["moving_mean"] + (1 - momentum) * mean
            self.params["moving_var"] = momentum * self.params["moving_var"] + (1 - momentum) * var
        else:
            mean = self.params["moving_mean"]
            var = self.params["moving_var"]
        inv_std = 1.0 / np.sqrt(var + self.spec.epsilon)
        xhat = (x - mean) * inv_std
        out = self.params["gamma"] * xhat + self.params["beta"]
        if training:
            self._cache = (xhat, inv_std, axes)
        return out

    def backward(self, dy: np.ndarray):
        xhat, inv_std, axes = self._cache
        grads = {
            "gamma": (dy * xhat).sum(axis=axes),
            "beta": dy.sum(axis=axes),
        }
        dxhat = dy * self.params["gamma"]
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
        )
        return dx, grads


class DropoutLayer:
    """Inverted dropout: train mode zeroes with probability rate and scales
    survivors by 1/(1-rate); infer mode is the identity."""

    def __init__(self, spec: DropoutSpec, in_shape, rng=None):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = self.in_shape
        self.params = {}
        self.trainable = ()
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        if not training or self.spec.rate == 0.0:
            if training:
                self._cache = None
            return x
        if rng is None:
            raise InvalidParams("dropout in train mode needs an rng")
        keep = 1.0 - self.spec.rate
        mask = (rng.random(x.shape) < keep) / keep
        self._cache = mask
        return x * mask

    def backward(self, dy: np.ndarray):
        if self._cache is None:
            return dy, {}
        return dy * self._cache, {}


class FlattenLayer:
    def __init__(self, spec: FlattenSpec, in_shape, rng=None):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = infer_output_shape(spec, self.in_shape)
        self.params = {}
        self.trainable = ()

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray):
        return dy.reshape((-1,) + self.in_shape), {}


class DenseLayer:
    """Affine map with optional activation.

    A softmax Dense returns logits while training (the loss consumes logits
    and backpropagates (p - y)/N directly) and probabilities at inference.
    """

    def __init__(self, spec: DenseSpec, in_shape, rng=None):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = infer_output_shape(spec, self.in_shape)
        fan_in = self.in_shape[0]
        if rng is None:
            rng = np.random.default_rng(0)
        self.params = {
            "W": _he_uniform(rng, (fan_in, spec.units), fan_in),
            "b": np.zeros(spec.units),
        }
        self.trainable = ("W", "b")
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        if x.shape[1:] != self.in_shape:
            raise ShapeMismatch(f"Dense expected {self.in_shape}, got {x.shape[1:]}")
        pre = x @ self.params["W"] + self.params["b"]
        if training:
            self._cache = (x, pre)
        if self.spec.activation == "relu":
            return relu(pre)
        if self.spec.activation == "softmax":
            return pre if training else softmax(pre)
        return pre

    def backward(self, dy: np.ndarray):
        x, pre = self._cache
        if self.spec.activation == "relu":
            dy = dy * (pre > 0.0)
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads


_LAYER_CLASSES = {
    Conv2DSpec: ConvLayer,
    MaxPool2DSpec: MaxPoolLayer,
    BatchNormSpec: BatchNormLayer,
    DropoutSpec: DropoutLayer,
    FlattenSpec: FlattenLayer,
    DenseSpec: DenseLayer,
}


def make_layer(spec: LayerSpec, in_shape, rng=None):
    return _LAYER_CLASSES[type(spec)](spec, in_shape, rng)


# ---------------------------------------------------------------------------
# functional forms mirroring the single-sample operation contracts


def _batched(x: np.ndarray, want_ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == want_ndim - 1:
        return x[None], True
    if x.ndim == want_ndim:
        return x, False
    raise ShapeMismatch(f"expected {want_ndim - 1}-D or {want_ndim}-D input, got {x.ndim}-D")


def conv2d(x: np.ndarray, spec: Conv2DSpec, weights: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Cross-correlation of one H x W x C input (or a batch) with given (W, b)."""
    xb, squeeze = _batched(x, 4)
    layer = ConvLayer(spec, xb.shape[1:])
    w, b = weights
    if layer.params["W"].shape != np.shape(w):
        raise ShapeMismatch(
            f"weights {np.shape(w)} do not fit kernel {layer.params['W'].shape}"
        )
    layer.params["W"] = np.asarray(w, dtype=np.float64)
    layer.params["b"] = np.asarray(b, dtype=np.float64)
    out = layer.forward(xb)
    return out[0] if squeeze else out


def maxpool2d(x: np.ndarray, spec: MaxPool2DSpec) -> np.ndarray:
    xb, squeeze = _batched(x, 4)
    out = MaxPoolLayer(spec, xb.shape[1:]).forward(xb)
    return out[0] if squeeze else out


def batchnorm(x: np.ndarray, mode: str, state: dict, spec: BatchNormSpec = BatchNormSpec()):
    """Normalize a batch; state maps gamma/beta/moving_mean/moving_var to
    per-channel vectors and is updated in train mode."""
    x = np.asarray(x, dtype=np.float64)
    layer = BatchNormLayer(spec, x.shape[1:])
    layer.params.update({k: np.asarray(v, dtype=np.float64) for k, v in state.items()})
    out = layer.forward(x, training=(mode == "train"))
    state.update(layer.params)
    return out


def dropout(x: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None = None):
    x = np.asarray(x, dtype=np.float64)
    layer = DropoutLayer(DropoutSpec(rate), x.shape[1:])
    return layer.forward(x[None], training=(mode == "train"), rng=rng)[0]


def dense(x: np.ndarray, units: int, weights: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Affine map of one input vector (or a batch of rows)."""
    xb, squeeze = _batched(x, 2)
    layer = DenseLayer(DenseSpec(units), xb.shape[1:])
    w, b = weights
    if layer.params["W"].shape != np.shape(w):
        raise ShapeMismatch(f"weights {np.shape(w)} do not fit {layer.params['W'].shape}")
    layer.params["W"] = np.asarray(w, dtype=np.float64)
    layer.params["b"] = np.asarray(b, dtype=np.float64)
    out = layer.forward(xb)
    return out[0] if squeeze else out

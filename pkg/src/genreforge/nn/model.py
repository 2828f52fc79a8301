"""Model graph description, shape/parameter inference, the runtime network,
and weight serialization.

Serialized form: magic "GNW1", a little-endian uint32 manifest length, a JSON
manifest (layer list, shapes, hyperparameters, seed, history), then every
parameter array as little-endian float32 in declaration order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..errors import DataShapeMismatch, SchemaError, ShapeMismatch
from .layers import (
    BatchNormSpec,
    Conv2DSpec,
    DenseSpec,
    DropoutSpec,
    FlattenSpec,
    LayerSpec,
    MaxPool2DSpec,
    infer_output_shape,
    layer_param_count,
    make_layer,
    softmax,
)

_MAGIC = b"GNW1"

_SPEC_KINDS = {
    "conv2d": Conv2DSpec,
    "maxpool2d": MaxPool2DSpec,
    "batchnorm": BatchNormSpec,
    "dropout": DropoutSpec,
    "flatten": FlattenSpec,
    "dense": DenseSpec,
}


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        for i, spec in enumerate(self.layers):
            if isinstance(spec, DenseSpec) and spec.activation == "softmax":
                if i != len(self.layers) - 1:
                    raise ShapeMismatch("softmax is only supported on the final layer")
        infer_shapes(self)  # raises ShapeMismatch on inconsistent chains


def infer_shapes(spec: ModelSpec) -> list[tuple[int, ...]]:
    """Output shape after every layer, in order."""
    shapes = []
    current = spec.input_shape
    for layer in spec.layers:
        current = infer_output_shape(layer, current)
        shapes.append(current)
    return shapes


def count_params(spec: ModelSpec) -> tuple[list[int], int]:
    """Per-layer parameter counts and their total."""
    counts = []
    current = spec.input_shape
    for layer in spec.layers:
        counts.append(layer_param_count(layer, current))
        current = infer_output_shape(layer, current)
    return counts, sum(counts)


def summarize(spec: ModelSpec) -> list[tuple[str, tuple[int, ...], int]]:
    """(kind, output shape, parameter count) per layer, like a layer table."""
    shapes = infer_shapes(spec)
    counts, _ = count_params(spec)
    return [
        (layer.kind, shape, count)
        for layer, shape, count in zip(spec.layers, shapes, counts)
    ]


class Network:
    """A runtime instantiation of a ModelSpec with He-uniform seeded init.

    Forward in training mode caches activations for backward; inference mode
    caches nothing and is a pure function of (weights, input).
    """

    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.layers = []
        current = spec.input_shape
        for layer_spec in spec.layers:
            layer = make_layer(layer_spec, current, rng)
            self.layers.append(layer)
            current = layer.out_shape
        self.output_shape = current

    # -- parameter access ---------------------------------------------------

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """All state arrays as (qualified name, array), declaration order."""
        items = []
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                items.append((f"layer{i}/{name}", value))
        return items

    def trainable_names(self) -> list[str]:
        names = []
        for i, layer in enumerate(self.layers):
            for name in layer.trainable:
                names.append(f"layer{i}/{name}")
        return names

    def get_param(self, qualified: str) -> np.ndarray:
        idx, name = qualified.split("/")
        return self.layers[int(idx.removeprefix("layer"))].params[name]

    def set_param(self, qualified: str, value: np.ndarray) -> None:
        idx, name = qualified.split("/")
        layer = self.layers[int(idx.removeprefix("layer"))]
        if layer.params[name].shape != value.shape:
            raise ShapeMismatch(f"{qualified}: {value.shape} != {layer.params[name].shape}")
        layer.params[name] = np.asarray(value, dtype=np.float64)

    def state_copy(self) -> dict:
        return {name: value.copy() for name, value in self.param_items()}

    def load_state(self, state: dict) -> None:
        for name, value in state.items():
            self.set_param(name, value)

    # -- execution ------------------------------------------------------------

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.spec.input_shape:
            raise DataShapeMismatch(
                f"model expects {self.spec.input_shape} inputs, got {x.shape[1:]}"
            )
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, dy: np.ndarray) -> dict:
        """Backpropagate from the output gradient; returns qualified grads."""
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            dy, layer_grads = self.layers[i].backward(dy)
            for name, grad in layer_grads.items():
                grads[f"layer{i}/{name}"] = grad
        return grads

    def predict_proba(self, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Probability rows (each sums to 1) in inference mode."""
        x = np.asarray(x, dtype=np.float64)
        chunks = []
        for start in range(0, len(x), batch_size):
            out = self.forward(x[start : start + batch_size], training=False)
            if not (self.spec.layers and isinstance(self.spec.layers[-1], DenseSpec)
                    and self.spec.layers[-1].activation == "softmax"):
                out = softmax(out)
            chunks.append(out)
        return np.concatenate(chunks, axis=0)


# ---------------------------------------------------------------------------
# serialization


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "input_shape": list(spec.input_shape),
        "layers": [asdict(layer) for layer in spec.layers],
    }


def spec_from_dict(doc: dict) -> ModelSpec:
    layers = []
    for entry in doc["layers"]:
        entry = dict(entry)
        kind = entry.pop("kind")
        cls = _SPEC_KINDS.get(kind)
        if cls is None:
            raise SchemaError(f"unknown layer kind {kind!r}")
        for key in ("kernel", "stride", "pool"):
            if key in entry and entry[key] is not None:
                entry[key] = tuple(entry[key])
        layers.append(cls(**entry))
    return ModelSpec(input_shape=tuple(doc["input_shape"]), layers=tuple(layers))


def save_network(net: Network, path, extra: dict | None = None) -> None:
    """Write magic + manifest + float32 blob. `extra` lands in the manifest
    (training history, split indices, run metadata)."""
    items = net.param_items()
    manifest = {
        "format": "GNW1",
        "version": 1,
        "seed": net.seed,
        "model": spec_to_dict(net.spec),
        "arrays": [{"name": name, "shape": list(value.shape)} for name, value in items],
    }
    if extra:
        manifest.update(extra)
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    blob = b"".join(value.astype("<f4").tobytes() for _, value in items)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(manifest_bytes)))
        fh.write(manifest_bytes)
        fh.write(blob)


def load_network(path) -> tuple[Network, dict]:
    """Rebuild a Network from a GNW1 file; returns (network, manifest)."""
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise SchemaError(f"{path}: not a GNW1 weight file")
    (manifest_len,) = struct.unpack_from("<I", raw, 4)
    start = 8
    try:
        manifest = json.loads(raw[start : start + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: bad manifest ({exc})") from exc
    net = Network(spec_from_dict(manifest["model"]), seed=manifest.get("seed", 0))
    offset = start + manifest_len
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise SchemaError(f"{path}: weight blob truncated at {entry['name']}")
        value = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        net.set_param(entry["name"], value.astype(np.float64))
        offset = end
    if offset != len(raw):
        raise SchemaError(f"{path}: {len(raw) - offset} trailing bytes after weights")
    return net, manifest

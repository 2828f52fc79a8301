"""Mini-batch Adam training with validation-based early stopping.

Fully deterministic given the seed: one generator drives shuffling and
dropout masks, batches are visited in shuffled order, and the best-validation
weights are restored at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import DataShapeMismatch, InvalidParams
from .layers import batch_cross_entropy, softmax
from .model import Network


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 200
    early_stop_patience: int = 10
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidParams(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidParams(f"batch_size must be >= 1, got {self.batch_size}")
        if self.early_stop_patience < 0:
            raise InvalidParams(f"patience must be >= 0, got {self.early_stop_patience}")
        if self.max_epochs < 1:
            raise InvalidParams(f"max_epochs must be >= 1, got {self.max_epochs}")


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    stopped_epoch: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, names, config: TrainConfig):
        self.config = config
        self.m = {n: None for n in names}
        self.v = {n: None for n in names}
        self.t = 0

    def step(self, net: Network, grads: dict) -> None:
        cfg = self.config
        self.t += 1
        bias1 = 1.0 - cfg.adam_beta1**self.t
        bias2 = 1.0 - cfg.adam_beta2**self.t
        for name in self.m:
            grad = grads[name]
            if self.m[name] is None:
                self.m[name] = np.zeros_like(grad)
                self.v[name] = np.zeros_like(grad)
            self.m[name] = cfg.adam_beta1 * self.m[name] + (1 - cfg.adam_beta1) * grad
            self.v[name] = cfg.adam_beta2 * self.v[name] + (1 - cfg.adam_beta2) * grad**2
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            update = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
            net.set_param(name, net.get_param(name) - update)


def softmax_ce_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy from logits and its gradient (p - y)/N."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    n = len(labels)
    rows = np.arange(n)
    loss = float(-log_probs[rows, labels].mean())
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return loss, dlogits / n


def evaluate_loss_acc(net: Network, x: np.ndarray, y: np.ndarray, batch_size: int) -> tuple[float, float]:
    probs = net.predict_proba(x, batch_size=batch_size)
    loss = batch_cross_entropy(probs, y)
    acc = float((probs.argmax(axis=1) == y).mean())
    return loss, acc


def train(
    net: Network,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig,
    epoch_callback=None,
) -> History:
    """Train in place; returns the per-epoch History.

    Stops once validation loss has failed to improve for max(1, patience)
    consecutive epochs (patience 0 stops at the first epoch without
    improvement) and restores the best-validation weights.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if x_train.shape[1:] != net.spec.input_shape:
        raise DataShapeMismatch(
            f"training data {x_train.shape[1:]} does not match model input "
            f"{net.spec.input_shape}"
        )
    if len(x_train) != len(y_train) or len(x_val) != len(y_val):
        raise DataShapeMismatch("data and labels differ in length")

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(net.trainable_names(), config)
    history = History()
    best_val = np.inf
    best_state = net.state_copy()
    wait = 0
    stop_after = max(1, config.early_stop_patience)

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(x_train))
        loss_sum = 0.0
        correct = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            logits = net.forward(x_train[batch], training=True, rng=rng)
            loss, dlogits = softmax_ce_loss(logits, y_train[batch])
            grads = net.backward(dlogits)
            optimizer.step(net, grads)
            loss_sum += loss * len(batch)
            correct += int((logits.argmax(axis=1) == y_train[batch]).sum())
        train_loss = loss_sum / len(order)
        train_acc = correct / len(order)
        val_loss, val_acc = evaluate_loss_acc(net, x_val, y_val, config.batch_size)

        history.train_loss.append(train_loss)
        history.train_acc.append(train_acc)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        history.stopped_epoch = epoch + 1
        if epoch_callback is not None:
            epoch_callback(epoch + 1, train_loss, train_acc, val_loss, val_acc)

        if val_loss < best_val:
            best_val = val_loss
            best_state = net.state_copy()
            wait = 0
        else:
            wait += 1
            if wait >= stop_after:
                break

    net.load_state(best_state)
    return history


def predict_proba(net: Network, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Inference-mode probability rows; rows sum to 1 within 1e-9."""
    return net.predict_proba(x, batch_size=batch_size)


__all__ = [
    "Adam",
    "History",
    "TrainConfig",
    "evaluate_loss_acc",
    "predict_proba",
    "softmax",
    "softmax_ce_loss",
    "train",
]

"""Dense feed-forward classifiers over the autodiff tensor core.

A :class:`Model` is a stack of linear layers with relu between them and an
identity output layer.  Parameters are ``Tensor`` leaves with
``requires_grad=True``; inference never mutates them.

Checkpoint layout (binary, little-endian), versioned by magic string:

    bytes 0..7    magic ``b"MLPCKPT1"``
    bytes 8..71   config hash, 64 ascii hex chars (zeros when unknown)
    uint32        number of layer dims, L
    uint32 * L    layer dims (input, hidden..., classes)
    float64 blocks, per layer: weight row-major (fan_in*fan_out), bias (fan_out)
"""

from __future__ import annotations

import struct

import numpy as np

from . import tensor as tc
from .tensor import Tensor

__all__ = [
    "Model",
    "mlp_init",
    "classify",
    "loss_and_input_grad",
    "loss_and_param_grads",
    "batch_loss",
    "save_model",
    "load_model",
    "CheckpointError",
]

CHECKPOINT_MAGIC = b"MLPCKPT1"
_NULL_HASH = "0" * 64


class CheckpointError(ValueError):
    """Raised for malformed checkpoint files."""


class Model:
    """Dense relu classifier: ``logits = Wn(...relu(W1 x + b1)...) + bn``."""

    def __init__(self, layer_dims: list[int], weights: list[Tensor], biases: list[Tensor]):
        self.layer_dims = list(layer_dims)
        self.weights = weights
        self.biases = biases

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def logits(self, x: Tensor, *, trainable: bool = False) -> Tensor:
        """Forward pass to logits.

        With ``trainable=False`` the parameters enter the graph as detached
        constants, so backward only reaches the input.  This keeps attack
        passes pure with respect to the parameters.
        """
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not trainable:
                w, b = w.detach(), b.detach()
            h = tc.add(tc.matmul(h, w), b)
            if i != last:
                h = tc.relu(h)
        return h

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax labels; ties go to the lowest class index."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise tc.ShapeError(
                f"predict: batch shape {x.shape} does not match input dim {self.input_dim}"
            )
        z = self.logits(Tensor._from_array(x)).data
        return np.argmax(z, axis=1)

    def copy(self) -> "Model":
        ws = [Tensor(w.data, requires_grad=True) for w in self.weights]
        bs = [Tensor(b.data, requires_grad=True) for b in self.biases]
        return Model(self.layer_dims, ws, bs)


def mlp_init(layer_dims: list[int], seed: int) -> Model:
    """Deterministic uniform(+-sqrt(6/fan_in)) weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError(f"mlp_init: need at least input and output dims, got {dims}")
    if any(d <= 0 for d in dims):
        raise ValueError(f"mlp_init: all layer dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                              requires_grad=True))
        biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
    return Model(dims, weights, biases)


def classify(model, batch: np.ndarray) -> np.ndarray:
    """Predicted labels for a batch.  Any object with ``predict`` works."""
    return model.predict(batch)


def batch_loss(model: Model, x: np.ndarray, y: np.ndarray, *, trainable: bool = False):
    """Mean softmax cross-entropy tensor for a batch, plus the input leaf."""
    x_t = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    loss = tc.softmax_cross_entropy(model.logits(x_t, trainable=trainable), y)
    return loss, x_t


def loss_and_input_grad(model: Model, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient w.r.t. the inputs.

    Parameters are treated as constants; the model is left untouched.
    """
    loss, x_t = batch_loss(model, x, y, trainable=False)
    loss.backward()
    return loss.item(), x_t.grad


def loss_and_param_grads(model: Model, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean batch loss and gradients for every parameter, in parameter order."""
    loss, _ = batch_loss(model, x, y, trainable=True)
    loss.backward()
    return loss.item(), [p.grad for p in model.parameters()]


def save_model(model: Model, path, config_hash: str | None = None) -> None:
    """Write the checkpoint format documented in the module docstring."""
    h = config_hash or _NULL_HASH
    if len(h) != 64:
        raise ValueError(f"save_model: config hash must be 64 hex chars, got {len(h)}")
    dims = model.layer_dims
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(h.encode("ascii"))
        f.write(struct.pack("<I", len(dims)))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(model.weights, model.biases):
            f.write(np.ascontiguousarray(w.data, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b.data, dtype="<f8").tobytes())


def load_model(path) -> tuple[Model, str]:
    """Read a checkpoint; returns the model and the embedded config hash."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 64 + 4:
        raise CheckpointError(f"checkpoint truncated: {len(blob)} bytes")
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic: {blob[:8]!r}")
    off = len(CHECKPOINT_MAGIC)
    config_hash = blob[off : off + 64].decode("ascii")
    off += 64
    (n_dims,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) < off + 4 * n_dims:
        raise CheckpointError("checkpoint truncated in dims header")
    dims = list(struct.unpack_from(f"<{n_dims}I", blob, off))
    off += 4 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        need = 8 * (fan_in * fan_out + fan_out)
        if len(blob) < off + need:
            raise CheckpointError("checkpoint truncated in parameter blocks")
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=off)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(Tensor(w.reshape(fan_in, fan_out), requires_grad=True))
        biases.append(Tensor(b, requires_grad=True))
    if off != len(blob):
        raise CheckpointError(f"checkpoint has {len(blob) - off} trailing bytes")
    return Model(dims, weights, biases), config_hash

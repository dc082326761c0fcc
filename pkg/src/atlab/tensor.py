"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is deliberately small: matmul, broadcast add, subtract,
elementwise multiply, relu, sign, clamp, sum/mean reductions, and a fused
softmax cross-entropy.  That is enough to express dense feed-forward
classifiers and input-gradient attacks while keeping the backward rules
auditable.

Gradient conventions:
  * relu passes gradient only where the input is strictly positive
    (subgradient 0 at the kink).
  * clamp passes gradient on the closed interval [lo, hi] and blocks it
    outside.
  * sign has zero gradient everywhere.

``backward`` assigns fresh ``grad`` buffers on every call; gradients never
accumulate across calls, so no zeroing step is needed between iterations.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "add",
    "sub",
    "mul",
    "matmul",
    "relu",
    "sign",
    "clamp",
    "tsum",
    "tmean",
    "softmax_cross_entropy",
    "backward",
]


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an operation."""


def _as_array(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    return arr


class Tensor:
    """Immutable float64 array plus optional gradient slot.

    ``data`` is read-only after construction.  ``grad`` is the single
    mutable slot and is populated by :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = _as_array(data)
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._op: str | None = None

    @classmethod
    def _from_array(cls, arr: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Wrap an array without copying.  Caller must not mutate it."""
        t = cls.__new__(cls)
        if not isinstance(arr, np.ndarray):
            arr = np.asarray(arr, dtype=np.float64)
        arr.flags.writeable = False
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        t._parents = ()
        t._backward_fn = None
        t._op = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has shape {self.shape}, expected a scalar")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Same data, no gradient tracking and no tape history."""
        return Tensor._from_array(self.data, requires_grad=False)

    def backward(self) -> None:
        backward(self)

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _coerce(other))

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def _coerce(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(out_data: np.ndarray, parents: tuple[Tensor, ...], op: str, backward_fn) -> Tensor:
    """Build the result tensor, recording history only when a parent needs grad."""
    needs = any(p.requires_grad for p in parents)
    out = Tensor._from_array(out_data, requires_grad=needs)
    if needs:
        out._parents = parents
        out._backward_fn = backward_fn
        out._op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` by summing broadcast axes."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# primitive operations -----------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g, acc):
        acc(a, _unbroadcast(g, a.shape))
        acc(b, _unbroadcast(g, b.shape))

    return _make(out, (a, b), "add", bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g, acc):
        acc(a, _unbroadcast(g, a.shape))
        acc(b, _unbroadcast(-g, b.shape))

    return _make(out, (a, b), "sub", bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g, acc):
        acc(a, _unbroadcast(g * b.data, a.shape))
        acc(b, _unbroadcast(g * a.data, b.shape))

    return _make(out, (a, b), "mul", bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} not conformable")
    out = a.data @ b.data

    def bwd(g, acc):
        acc(a, g @ b.data.T)
        acc(b, a.data.T @ g)

    return _make(out, (a, b), "matmul", bwd)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def bwd(g, acc):
        acc(x, g * (x.data > 0.0))

    return _make(out, (x,), "relu", bwd)


def sign(x: Tensor) -> Tensor:
    out = np.sign(x.data)

    def bwd(g, acc):
        acc(x, np.zeros_like(x.data))

    return _make(out, (x,), "sign", bwd)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    if not lo <= hi:
        raise ValueError(f"clamp: lo={lo} exceeds hi={hi}")
    out = np.clip(x.data, lo, hi)

    def bwd(g, acc):
        acc(x, g * ((x.data >= lo) & (x.data <= hi)))

    return _make(out, (x,), "clamp", bwd)


def tsum(x: Tensor) -> Tensor:
    out = x.data.sum()

    def bwd(g, acc):
        acc(x, np.full_like(x.data, float(g)))

    return _make(np.asarray(out), (x,), "sum", bwd)


def tmean(x: Tensor) -> Tensor:
    out = x.data.mean()
    n = x.data.size

    def bwd(g, acc):
        acc(x, np.full_like(x.data, float(g) / n))

    return _make(np.asarray(out), (x,), "mean", bwd)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of a logits batch, log-sum-exp stabilized.

    ``logits`` is (n, C); ``labels`` is an int array of n class indices in
    [0, C).  Returns a scalar tensor.
    """
    z = logits.data
    if z.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: logits must be 2-D, got {logits.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != z.shape[0]:
        raise ShapeError(
            f"softmax_cross_entropy: labels shape {labels.shape} does not match "
            f"logits {logits.shape}"
        )
    n, c = z.shape
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(
            f"softmax_cross_entropy: label out of range [0, {c}): "
            f"min={labels.min()}, max={labels.max()}"
        )
    idx = labels.astype(np.intp)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + zmax
    nll = lse[:, 0] - z[np.arange(n), idx]
    out = np.asarray(nll.mean())

    def bwd(g, acc):
        probs = np.exp(shifted - (lse - zmax))
        probs[np.arange(n), idx] -= 1.0
        acc(logits, (float(g) / n) * probs)

    return _make(out, (logits,), "softmax_cross_entropy", bwd)


# backward machinery --------------------------------------------------------

class Tape:
    """Topologically ordered list of the recorded ops reaching a root tensor.

    Every node's parents appear before it; the backward replay visits each
    node exactly once, in reverse.
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad tensor reaching ``loss``.

    Raises if the loss is not scalar or was not produced by a recorded
    operation.  Grad buffers are freshly assigned: calling backward twice
    does not accumulate.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._backward_fn is None:
        raise ValueError("backward: tensor is a leaf, not on any tape")

    tape = Tape.trace(loss)
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    def acc(t: Tensor, g: np.ndarray) -> None:
        key = id(t)
        if key in adjoint:
            adjoint[key] = adjoint[key] + g
        else:
            adjoint[key] = np.array(g, dtype=np.float64, copy=True)

    for node in reversed(tape.nodes):
        g = adjoint.get(id(node))
        if g is None:
            continue
        if node._backward_fn is not None:
            node._backward_fn(g, acc)

    for node in tape.nodes:
        if node.requires_grad:
            node.grad = adjoint.get(id(node))

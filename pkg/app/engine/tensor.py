"""
Dense reverse-mode autodiff.

Tensors are float64 matrices. While a Tape is active on the current thread,
every op whose inputs require gradients appends a record holding its
vector-Jacobian product; records are therefore in topological order and
backward walks them once in reverse.
"""
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from app.errors import DimensionError, NumericalError, ParameterError

_local = threading.local()


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim > 2:
            raise DimensionError("tensor", arr.shape, "(rows, cols)")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError("item", self.shape, (1, 1))
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], tuple[Optional[np.ndarray], ...]]


class Tape:
    """Ordered record of differentiable ops for one thread"""

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    @staticmethod
    def current() -> Optional["Tape"]:
        stack = getattr(_local, "stack", None)
        return stack[-1] if stack else None

    def __len__(self) -> int:
        return len(self.records)


def _emit(name: str, data: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NumericalError(f"{name} produced non-finite values")
    needs_grad = any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = needs_grad
    out.grad = None
    out.name = None
    tape = Tape.current()
    if needs_grad and tape is not None:
        tape.records.append(_Record(out, tuple(inputs), vjp))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """
    Reverse sweep from a scalar loss. Sets .grad on every tensor that requires
    gradients and returns those gradients keyed by tensor.
    """
    if loss.shape != (1, 1):
        raise DimensionError("backward", loss.shape, (1, 1))

    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    reached: dict[int, Tensor] = {id(loss): loss}
    for record in reversed(tape.records):
        g = grads.get(id(record.out))
        if g is None:
            continue
        for inp, gi in zip(record.inputs, record.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
                reached[key] = inp

    result: dict[Tensor, np.ndarray] = {}
    for key, tensor in reached.items():
        if tensor.requires_grad:
            tensor.grad = grads[key]
            result[tensor] = grads[key]
    return result


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    if b.shape == a.shape or b.shape == (1, 1) or (b.shape[0] == 1 and b.shape[1] == a.shape[1]):
        return
    raise DimensionError(op, a.shape, b.shape)


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == (1, 1):
        return g.sum(keepdims=True)
    return g.sum(axis=0, keepdims=True)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)
    return _emit("matmul", a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b; b may be a full matrix, a (1, cols) row or a (1, 1) scalar"""
    _broadcast_shape("add", a, b)
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, _unbroadcast(g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise a * b with the same broadcasting as add"""
    _broadcast_shape("mul", a, b)
    return _emit(
        "mul", a.data * b.data, (a, b),
        lambda g: (g * b.data, _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _emit("scale", a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0
    return _emit("relu", np.where(positive, a.data, 0.0), (a,), lambda g: (g * positive,))


def sum_all(a: Tensor) -> Tensor:
    return _emit("sum", a.data.sum(keepdims=True), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def row_mask_select(a: Tensor, rows: np.ndarray) -> Tensor:
    rows = np.asarray(rows, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, rows, g)
        return (out,)

    return _emit("row_mask_select", a.data[rows], (a,), vjp)


def masked_row_scatter(base: Tensor, rows: np.ndarray, updates: Tensor) -> Tensor:
    """Copy of base with rows replaced by updates; the other rows pass through unchanged"""
    rows = np.asarray(rows, dtype=np.int64)
    if updates.shape != (rows.size, base.shape[1]):
        raise DimensionError("masked_row_scatter", base.shape, updates.shape)
    out = base.data.copy()
    out[rows] = updates.data

    def vjp(g):
        g_base = g.copy()
        g_base[rows] = 0.0
        return g_base, g[rows]

    return _emit("masked_row_scatter", out, (base, updates), vjp)


def aggregate(h: Tensor, src: np.ndarray, dst: np.ndarray, weights: np.ndarray, num_out: int) -> Tensor:
    """out[dst[k]] += weights[k] * h[src[k]]: weighted gather-sum along an edge list"""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)[:, None]
    if not src.shape == dst.shape == w.shape[:1]:
        raise DimensionError("aggregate", src.shape, dst.shape)
    out = np.zeros((num_out, h.shape[1]))
    np.add.at(out, dst, w * h.data[src])

    def vjp(g):
        g_h = np.zeros_like(h.data)
        np.add.at(g_h, src, w * g[dst])
        return (g_h,)

    return _emit("aggregate", out, (h,), vjp)


def segment_mean(a: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Row means per segment id; empty segments give zero rows"""
    segments = np.asarray(segments, dtype=np.int64)
    if segments.shape != (a.shape[0],):
        raise DimensionError("segment_mean", a.shape, segments.shape)
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64)
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    out = np.zeros((num_segments, a.shape[1]))
    np.add.at(out, segments, a.data)
    out *= inv[:, None]
    return _emit("segment_mean", out, (a,), lambda g: ((g * inv[:, None])[segments],))


def mean_pool_rows(a: Tensor) -> Tensor:
    return segment_mean(a, np.zeros(a.shape[0], dtype=np.int64), 1)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | int) -> Tensor:
    """Zero entries with probability rate and rescale survivors by 1/(1 - rate)"""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"Dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _emit("dropout", a.data * keep, (a,), lambda g: (g * keep,))


def log_softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    soft = np.exp(out)
    return _emit("log_softmax", out, (a,), lambda g: (g - soft * g.sum(axis=1, keepdims=True),))


def nll_loss(log_probs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer targets"""
    targets = np.asarray(targets, dtype=np.int64)
    rows = log_probs.shape[0]
    if targets.shape != (rows,):
        raise DimensionError("nll_loss", log_probs.shape, targets.shape)
    picked = log_probs.data[np.arange(rows), targets]

    def vjp(g):
        out = np.zeros_like(log_probs.data)
        out[np.arange(rows), targets] = -g[0, 0] / rows
        return (out,)

    return _emit("nll_loss", np.array([[-picked.mean()]]), (log_probs,), vjp)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, name: Optional[str] = None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(rows: int, cols: int, requires_grad: bool = True, name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=requires_grad, name=name)

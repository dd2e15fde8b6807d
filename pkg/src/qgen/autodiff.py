"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Tensors wrap numpy arrays (0-, 1- or 2-dimensional) and record the ops that
produced them so that `backward` on a scalar loss fills the `grad` buffer of
every tensor created with `requires_grad=True`.  Gradients accumulate
additively; callers zero them between optimization steps.

Broadcasting in the arithmetic ops is restricted to: equal shapes, scalar vs
tensor, and row-vector (n,) against matrix (m, n).
"""

from __future__ import annotations

import io
import itertools
import json
import zipfile
from contextlib import contextmanager
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

_DTYPE = np.float64
_GRAD_ENABLED = True
_SEQ = itertools.count()


class TensorError(ValueError):
    """Raised on shape/domain violations in tensor operations."""


def set_default_dtype(dtype) -> None:
    """Set the dtype used for all subsequently created tensors.

    float64 is the default (and what the test suite assumes); float32 can be
    selected for faster training.
    """
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise TensorError(f"unsupported dtype {dtype}")
    _DTYPE = dtype.type


def default_dtype():
    return _DTYPE


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A dense array plus the bookkeeping needed for reverse-mode autodiff.

    `_seq` is a global creation counter: parents always carry a smaller
    sequence number than their outputs, so walking reachable nodes in
    decreasing `_seq` order is a reverse topological traversal of the
    computation graph and visits each node exactly once.
    """

    __slots__ = ("data", "grad", "requires_grad", "_op", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DTYPE)
        if self.data.ndim > 2:
            raise TensorError(f"only 0/1/2-d tensors supported, got shape {self.data.shape}")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._op = "leaf"
        self._parents: tuple = ()
        self._backward: Optional[Callable[[], None]] = None
        self._seq = next(_SEQ)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph.

        Repeated calls without zeroing accumulate into `grad`: each pass
        computes a fresh d(loss)/d(tensor) and adds it to what was there.
        """
        if self.data.size != 1:
            raise TensorError(f"backward requires a scalar loss, got shape {self.shape}")
        nodes = []
        seen = {id(self)}
        stack = [self]
        while stack:
            t = stack.pop()
            nodes.append(t)
            for p in t._parents:
                if id(p) not in seen:
                    seen.add(id(p))
                    stack.append(p)
        nodes.sort(key=lambda t: t._seq, reverse=True)
        # stash pre-existing grads so this pass propagates only its own seed
        stashed = {}
        for t in nodes:
            if t.grad is not None:
                stashed[id(t)] = t.grad
                t.grad = None
        self._accumulate(np.ones_like(self.data))
        for t in nodes:
            if t._backward is not None and t.grad is not None:
                t._backward()
        for t in nodes:
            prior = stashed.get(id(t))
            if prior is not None:
                t.grad = prior if t.grad is None else t.grad + prior

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], op: str) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._op = op
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape` by summing expanded axes."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape == b.shape:
        return
    if a.size == 1 or b.size == 1:
        return
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return
    if b.ndim == 2 and a.ndim == 1 and b.shape[1] == a.shape[0]:
        return
    raise TensorError(f"{op}: shapes {a.shape} and {b.shape} are not broadcastable here")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "add")
    out = _node(a.data + b.data, (a, b), "add")

    def bw():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out._backward = bw
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")
    out = _node(a.data - b.data, (a, b), "sub")

    def bw():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    out._backward = bw
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")
    out = _node(a.data * b.data, (a, b), "mul")

    def bw():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    out._backward = bw
    return out


def neg(a) -> Tensor:
    a = _as_tensor(a)
    out = _node(-a.data, (a,), "neg")

    def bw():
        if a.requires_grad:
            a._accumulate(-out.grad)

    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for (m,k)x(k,n), (k,)x(k,n), (m,k)x(k,) and (k,)x(k,)."""
    a, b = _as_tensor(a), _as_tensor(b)
    ka = a.shape[-1] if a.ndim else None
    kb = b.shape[0] if b.ndim else None
    if a.ndim == 0 or b.ndim == 0 or ka != kb:
        raise TensorError(f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")
    out = _node(a.data @ b.data, (a, b), "matmul")

    def bw():
        g = out.grad
        if a.ndim == 2 and b.ndim == 2:
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        elif a.ndim == 1 and b.ndim == 2:
            if a.requires_grad:
                a._accumulate(b.data @ g)
            if b.requires_grad:
                b._accumulate(np.outer(a.data, g))
        elif a.ndim == 2 and b.ndim == 1:
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        else:  # dot product of two vectors
            if a.requires_grad:
                a._accumulate(g * b.data)
            if b.requires_grad:
                b._accumulate(g * a.data)

    out._backward = bw
    return out


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise TensorError(f"transpose expects a 2-d tensor, got shape {a.shape}")
    out = _node(a.data.T.copy(), (a,), "transpose")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad.T)

    out._backward = bw
    return out


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)
    out = _node(y, (a,), "tanh")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad * (1.0 - y * y))

    out._backward = bw
    return out


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # split by sign to avoid overflow in exp
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _node(y, (a,), "sigmoid")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad * y * (1.0 - y))

    out._backward = bw
    return out


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = _node(np.maximum(a.data, 0.0), (a,), "relu")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad * (a.data > 0))

    out._backward = bw
    return out


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        y = np.exp(a.data)
    if not np.isfinite(y).all():
        raise TensorError("exp overflow: input outside the supported domain")
    out = _node(y, (a,), "exp")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad * y)

    out._backward = bw
    return out


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise TensorError("log of non-positive value")
    out = _node(np.log(a.data), (a,), "log")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad / a.data)

    out._backward = bw
    return out


def maximum(a, b) -> Tensor:
    """Elementwise max; ties route the gradient to the first argument."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "maximum")
    take_a = a.data >= b.data
    out = _node(np.where(take_a, a.data, b.data), (a, b), "maximum")

    def bw():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.shape))

    out._backward = bw
    return out


def clamp_min(a, floor: float) -> Tensor:
    """max(a, floor); gradient flows only where a > floor."""
    a = _as_tensor(a)
    keep = a.data > floor
    out = _node(np.maximum(a.data, floor), (a,), "clamp_min")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad * keep)

    out._backward = bw
    return out


def softmax(a, mask: Optional[np.ndarray] = None) -> Tensor:
    """Stable softmax over the last axis; masked entries are exactly 0.

    `mask` is a boolean array (True = keep) matching `a`.  Raises if every
    entry of a row is masked.
    """
    a = _as_tensor(a)
    x = a.data.astype(_DTYPE, copy=True)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise TensorError(f"softmax mask shape {mask.shape} != input shape {x.shape}")
        if not mask.any(axis=-1).all():
            raise TensorError("softmax: all entries masked")
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    y = e / e.sum(axis=-1, keepdims=True)
    out = _node(y, (a,), "softmax")

    def bw():
        if a.requires_grad:
            g = out.grad
            inner = (g * y).sum(axis=-1, keepdims=True)
            a._accumulate(y * (g - inner))

    out._backward = bw
    return out


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise TensorError("concat of empty list")
    out = _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, "concat")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw():
        g = out.grad
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    out._backward = bw
    return out


def slice_(a: Tensor, key) -> Tensor:
    """Basic (integer/slice) indexing with gradient scatter on backward."""
    a = _as_tensor(a)
    out = _node(a.data[key].copy(), (a,), "slice")

    def bw():
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g[key] += out.grad
            a._accumulate(g)

    out._backward = bw
    return out


def gather_rows(table: Tensor, ids) -> Tensor:
    """Select rows `ids` from a 2-d table; backward scatters additively."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise TensorError("gather_rows expects a 2-d table")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise TensorError(f"gather_rows: id out of range for table with {table.shape[0]} rows")
    out = _node(table.data[ids], (table,), "gather")

    def bw():
        if table.requires_grad:
            g = np.zeros_like(table.data)
            np.add.at(g, ids, out.grad)
            table._accumulate(g)

    out._backward = bw
    return out


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    out = _node(a.data.reshape(shape), (a,), "reshape")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad.reshape(a.shape))

    out._backward = bw
    return out


def sum_(a: Tensor, axis: Optional[int] = None) -> Tensor:
    a = _as_tensor(a)
    out = _node(a.data.sum(axis=axis), (a,), "sum")

    def bw():
        if a.requires_grad:
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    out._backward = bw
    return out


def mean_(a: Tensor) -> Tensor:
    n = _as_tensor(a).size
    return mul(sum_(a), 1.0 / n)


def stack_scalars(scalars: Sequence[Tensor]) -> Tensor:
    """Stack 0-d tensors into a vector (used for per-step loss reduction)."""
    return concat([reshape(s, (1,)) for s in scalars], axis=0)


def dropout(a: Tensor, p: float, mode: str, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: scale survivors by 1/(1-p) in train mode, identity in eval."""
    if not 0.0 <= p < 1.0:
        raise TensorError(f"dropout rate must be in [0, 1), got {p}")
    a = _as_tensor(a)
    if mode == "eval" or p == 0.0:
        return a
    if mode != "train":
        raise TensorError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    out = _node(a.data * keep, (a,), "dropout")

    def bw():
        if a.requires_grad:
            a._accumulate(out.grad * keep)

    out._backward = bw
    return out


CHECKPOINT_FORMAT_VERSION = 1


class ParamStore:
    """Named map of trainable tensors with lossless checkpoint round-trips."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise TensorError(f"duplicate parameter name {name!r}")
        t = data if isinstance(data, Tensor) else Tensor(data)
        t.requires_grad = True
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self._params.items():
            if name not in arrays:
                raise TensorError(f"checkpoint missing parameter {name!r}")
            if arrays[name].shape != t.data.shape:
                raise TensorError(f"checkpoint shape mismatch for {name!r}")
            t.data = arrays[name].astype(t.data.dtype, copy=True)

    def save(self, path, meta: Optional[dict] = None) -> None:
        """Write an .npz-style zip: one .npy per parameter plus a JSON meta entry."""
        header = dict(meta or {})
        header["format_version"] = CHECKPOINT_FORMAT_VERSION
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("meta.json", json.dumps(header, sort_keys=True))
            for name, t in self._params.items():
                buf = io.BytesIO()
                np.save(buf, t.data, allow_pickle=False)
                zf.writestr(f"params/{name}.npy", buf.getvalue())

    @staticmethod
    def read(path) -> tuple[dict[str, np.ndarray], dict]:
        """Return (arrays, meta) from a checkpoint written by `save`."""
        arrays: dict[str, np.ndarray] = {}
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read("meta.json").decode("utf-8"))
            if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
                raise TensorError(f"unsupported checkpoint format version {meta.get('format_version')}")
            for entry in zf.namelist():
                if entry.startswith("params/") and entry.endswith(".npy"):
                    arrays[entry[len("params/"):-len(".npy")]] = np.load(
                        io.BytesIO(zf.read(entry)), allow_pickle=False
                    )
        return arrays, meta


def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    x = x.astype(np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return g

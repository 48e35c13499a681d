"""Minimal 2-D tensor library with reverse-mode automatic differentiation.

Every value is a dense row-major float64 matrix.  Ops build the graph
eagerly: each result carries a closure that routes its gradient to the
parents.  ``backward`` walks the graph once in reverse topological order,
so gradient accumulation is deterministic (same graph, same bits).

Only rank-2 tensors exist; batching is an outer Python loop by design.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class VocabularyError(IndexError):
    """A token id falls outside the embedding table."""


class DegenerateBatchError(ValueError):
    """Every target position was marked ignored; the loss is undefined."""


class UsageError(RuntimeError):
    """The autodiff API was called outside its contract."""


class FormatError(ValueError):
    """A serialized tensor file is corrupt or has the wrong version."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise DimensionError(f"only 2-D tensors are supported, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def item(self):
        if self.data.shape != (1, 1):
            raise UsageError(f"item() needs a 1x1 tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable node that requires gradients.

    Gradients of nodes inside this graph are reset first; accumulation
    across samples (batching) is the caller's job.
    """
    if loss.data.shape != (1, 1):
        raise UsageError(f"backward root must be scalar (1x1), got {loss.data.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in topo:
        node.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return Tensor(out, _parents=(a, b), _backward_fn=bw)


def transpose(x: Tensor) -> Tensor:
    def bw(g):
        if x.requires_grad:
            _accum(x, g.T)

    return Tensor(x.data.T, _parents=(x,), _backward_fn=bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a 1xN row vector broadcast over rows."""
    if a.shape == b.shape:
        def bw(g):
            if a.requires_grad:
                _accum(a, g)
            if b.requires_grad:
                _accum(b, g)
    elif b.shape == (1, a.cols):
        def bw(g):
            if a.requires_grad:
                _accum(a, g)
            if b.requires_grad:
                _accum(b, g.sum(axis=0, keepdims=True))
    else:
        raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")
    return Tensor(a.data + b.data, _parents=(a, b), _backward_fn=bw)


def scale(x: Tensor, s: float) -> Tensor:
    def bw(g):
        if x.requires_grad:
            _accum(x, g * s)

    return Tensor(x.data * s, _parents=(x,), _backward_fn=bw)


def mul_const(x: Tensor, arr: np.ndarray) -> Tensor:
    """Elementwise multiply by a fixed (non-differentiated) array."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape != x.shape:
        raise DimensionError(f"mul_const shape mismatch: {x.shape} * {arr.shape}")

    def bw(g):
        if x.requires_grad:
            _accum(x, g * arr)

    return Tensor(x.data * arr, _parents=(x,), _backward_fn=bw)


def concat_cols(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise UsageError("concat_cols needs at least one part")
    rows = parts[0].rows
    if any(p.rows != rows for p in parts):
        raise DimensionError(
            f"concat_cols row mismatch: {[p.shape for p in parts]}")
    widths = [p.cols for p in parts]
    offsets = np.cumsum([0] + widths)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                _accum(p, g[:, lo:hi])

    out = np.concatenate([p.data for p in parts], axis=1)
    return Tensor(out, _parents=tuple(parts), _backward_fn=bw)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= x.rows):
        raise DimensionError(f"slice_rows [{start}:{stop}] out of range for {x.shape}")

    def bw(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[start:stop] = g
            _accum(x, full)

    return Tensor(x.data[start:stop].copy(), _parents=(x,), _backward_fn=bw)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def bw(g):
        if x.requires_grad:
            _accum(x, g * (x.data > 0))

    return Tensor(out, _parents=(x,), _backward_fn=bw)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bw(g):
        if x.requires_grad:
            _accum(x, g * (1.0 - out * out))

    return Tensor(out, _parents=(x,), _backward_fn=bw)


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "tanh":
        return tanh(x)
    raise UsageError(f"unknown activation kind: {kind!r}")


def softmax_rows(x: Tensor, scale_factor: float = 1.0, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax of ``scale_factor * x + mask``, max-subtracted for stability.

    ``mask`` is an additive constant (0 / -inf) and gets no gradient.
    """
    if scale_factor <= 0:
        raise UsageError(f"softmax scale must be positive, got {scale_factor}")
    z = x.data * scale_factor
    if mask is not None:
        z = z + mask
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        if x.requires_grad:
            dz = out * (g - (g * out).sum(axis=1, keepdims=True))
            _accum(x, dz * scale_factor)

    return Tensor(out, _parents=(x,), _backward_fn=bw)


def layer_norm_rows(x: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = (x.data - mu) * inv

    def bw(g):
        if x.requires_grad:
            gm = g - g.mean(axis=1, keepdims=True)
            proj = (g * out).mean(axis=1, keepdims=True)
            _accum(x, inv * (gm - out * proj))

    return Tensor(out, _parents=(x,), _backward_fn=bw)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise UsageError("embedding ids must be a flat sequence")
    if ids.size and (ids.min() < 0 or ids.max() >= table.rows):
        raise VocabularyError(
            f"token id out of range: table has {table.rows} rows, ids span "
            f"[{ids.min()}, {ids.max()}]")
    out = table.data[ids]

    def bw(g):
        if table.requires_grad:
            dt = np.zeros_like(table.data)
            np.add.at(dt, ids, g)
            _accum(table, dt)

    return Tensor(out, _parents=(table,), _backward_fn=bw)


def take_flat_pad(x: Tensor, idx: np.ndarray, out_shape: tuple[int, int]) -> Tensor:
    """Gather flattened entries at ``idx`` (row-major), place them at the
    front of a zeroed ``out_shape`` matrix.  Linear, hence differentiable."""
    idx = np.asarray(idx, dtype=np.int64)
    flat = x.data.ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= flat.size):
        raise DimensionError(f"gather index out of range for {x.shape}")
    out = np.zeros(out_shape)
    out.ravel()[: idx.size] = flat[idx]

    def bw(g):
        if x.requires_grad:
            gx = np.zeros(flat.size)
            gx[idx] = g.ravel()[: idx.size]
            _accum(x, gx.reshape(x.shape))

    return Tensor(out, _parents=(x,), _backward_fn=bw)


def sum_all(x: Tensor) -> Tensor:
    def bw(g):
        if x.requires_grad:
            _accum(x, np.full_like(x.data, g[0, 0]))

    return Tensor(np.array([[x.data.sum()]]), _parents=(x,), _backward_fn=bw)


def cross_entropy_logits(logits: Tensor, targets, ignore_id: int) -> Tensor:
    """Mean over non-ignored positions of -log softmax(logits)[target]."""
    t = np.asarray(targets, dtype=np.int64)
    if t.ndim != 1 or t.size != logits.rows:
        raise DimensionError(
            f"targets length {t.size} != logits rows {logits.rows}")
    keep = t != ignore_id
    n = int(keep.sum())
    if n == 0:
        raise DegenerateBatchError("all target positions are ignored")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.nonzero(keep)[0]
    loss = -logp[rows, t[rows]].sum() / n

    def bw(g):
        if logits.requires_grad:
            p = np.exp(logp)
            d = p.copy()
            d[rows, t[rows]] -= 1.0
            d[~keep] = 0.0
            _accum(logits, d * (g[0, 0] / n))

    return Tensor(np.array([[loss]]), _parents=(logits,), _backward_fn=bw)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    """Adaptive-moment (Adam) optimizer state, keyed by parameter name."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
                   state: OptimizerState) -> None:
    """One bias-corrected adaptive-moment update, in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise DimensionError(
                f"gradient shape {g.shape} != parameter {name} shape {p.data.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


# ---------------------------------------------------------------------------
# serialization

MAGIC = b"SJSCC"
FORMAT_VERSION = 1


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Versioned little-endian binary: magic, version, count, then per tensor
    name length+bytes, rows, cols, float64 row-major data."""
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        if arr.ndim != 2:
            raise DimensionError(f"tensor {name!r} is not 2-D: shape {arr.shape}")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<II", arr.shape[0], arr.shape[1]))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    off = len(MAGIC)

    def take(n):
        nonlocal off
        if off + n > len(raw):
            raise FormatError(f"{path}: truncated file")
        piece = raw[off: off + n]
        off += n
        return piece

    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    (count,) = struct.unpack("<I", take(4))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        rows, cols = struct.unpack("<II", take(8))
        data = np.frombuffer(take(rows * cols * 8), dtype="<f8").reshape(rows, cols)
        out[name] = data.astype(np.float64)
    if off != len(raw):
        raise FormatError(f"{path}: trailing bytes after last tensor")
    return out

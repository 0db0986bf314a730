"""The op catalog recorded on tapes.

Fixed to what the recurrent cells, the reader, and the loss actually use:
matmul, add/sub/mul/div (with numpy broadcasting), sigmoid, tanh, softmax,
concat and slicing on the last axis, time indexing/stacking, reshape,
embedding lookup, per-row memory gather/scatter, inverted dropout,
cross-entropy from probabilities, and sum/mean reductions.

Every op takes and returns ``Tensor`` nodes from one tape; python floats
are accepted where a scalar constant reads better than a const node.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .errors import InvalidShape
from .tape import Tensor

Scalar = Union[int, float]


def _tape_of(*tensors: Tensor):
    tape = None
    for t in tensors:
        if isinstance(t, Tensor):
            if tape is None:
                tape = t.tape
            elif t.tape is not tape:
                raise ValueError("operands live on different tapes")
    if tape is None:
        raise ValueError("at least one operand must be a Tensor")
    return tape


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    tape = _tape_of(a, b)
    av = a.data if isinstance(a, Tensor) else float(a)
    bv = b.data if isinstance(b, Tensor) else float(b)
    out = av + bv
    parents = tuple(t for t in (a, b) if isinstance(t, Tensor))

    def backward(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g, a.data.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(g, b.data.shape))
        return grads

    return tape.record(np.asarray(out), parents, backward)


def sub(a, b) -> Tensor:
    tape = _tape_of(a, b)
    av = a.data if isinstance(a, Tensor) else float(a)
    bv = b.data if isinstance(b, Tensor) else float(b)
    out = av - bv
    parents = tuple(t for t in (a, b) if isinstance(t, Tensor))

    def backward(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g, a.data.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(-g, b.data.shape))
        return grads

    return tape.record(np.asarray(out), parents, backward)


def mul(a, b) -> Tensor:
    tape = _tape_of(a, b)
    av = a.data if isinstance(a, Tensor) else float(a)
    bv = b.data if isinstance(b, Tensor) else float(b)
    out = av * bv
    parents = tuple(t for t in (a, b) if isinstance(t, Tensor))

    def backward(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g * bv, a.data.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(g * av, b.data.shape))
        return grads

    return tape.record(np.asarray(out), parents, backward)


def div(a, b) -> Tensor:
    tape = _tape_of(a, b)
    av = a.data if isinstance(a, Tensor) else float(a)
    bv = b.data if isinstance(b, Tensor) else float(b)
    out = av / bv
    parents = tuple(t for t in (a, b) if isinstance(t, Tensor))

    def backward(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g / bv, a.data.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(-g * av / (bv * bv), b.data.shape))
        return grads

    return tape.record(np.asarray(out), parents, backward)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    tape = _tape_of(a, b)
    av, bv = a.data, b.data
    out = np.matmul(av, bv)

    def backward(g):
        if av.ndim == 1 and bv.ndim == 1:
            ga = g * bv
            gb = g * av
        elif av.ndim == 1:  # (n,) @ (n,k) -> (k,)
            ga = bv @ g
            gb = np.outer(av, g)
        elif bv.ndim == 1:  # (m,n) @ (n,) -> (m,)
            ga = np.outer(g, bv)
            gb = g @ av
        else:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(bv, -1, -2)), av.shape)
            gb = _unbroadcast(np.matmul(np.swapaxes(av, -1, -2), g), bv.shape)
        return ga, gb

    return tape.record(out, (a, b), backward)


def transpose_last2(x: Tensor) -> Tensor:
    if x.ndim < 2:
        raise InvalidShape("transpose_last2 needs at least 2 axes")
    out = np.swapaxes(x.data, -1, -2)

    def backward(g):
        return (np.swapaxes(g, -1, -2),)

    return x.tape.record(np.ascontiguousarray(out), (x,), backward)


# ---------------------------------------------------------------------------
# nonlinearities


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid_stable(np.asarray(x.data, dtype=np.float64))

    def backward(g):
        return (g * s * (1.0 - s),)

    return x.tape.record(s, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - t * t),)

    return x.tape.record(t, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``."""
    if x.data.size == 0:
        raise InvalidShape("softmax of an empty tensor")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return x.tape.record(s, (x,), backward)


# ---------------------------------------------------------------------------
# shaping


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    tape = _tape_of(*tensors)
    sizes = [t.data.shape[-1] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=-1)
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return [g[..., offsets[i] : offsets[i + 1]] for i in range(len(sizes))]

    return tape.record(out, tuple(tensors), backward)


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    out = np.ascontiguousarray(x.data[..., start:stop])

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[..., start:stop] = g
        return (gx,)

    return x.tape.record(out, (x,), backward)


def index_axis1(x: Tensor, i: int) -> Tensor:
    """Select index ``i`` along axis 1 (e.g. one time step of (B, T, d))."""
    out = np.ascontiguousarray(x.data[:, i])

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[:, i] = g
        return (gx,)

    return x.tape.record(out, (x,), backward)


def stack_axis1(tensors: Sequence[Tensor]) -> Tensor:
    """Stack T tensors of shape (B, d) into (B, T, d)."""
    tape = _tape_of(*tensors)
    out = np.stack([t.data for t in tensors], axis=1)

    def backward(g):
        return [np.ascontiguousarray(g[:, j]) for j in range(len(tensors))]

    return tape.record(out, tuple(tensors), backward)


def stack_last(tensors: Sequence[Tensor]) -> Tensor:
    """Stack scalars/vectors along a new trailing axis."""
    tape = _tape_of(*tensors)
    out = np.stack([t.data for t in tensors], axis=-1)

    def backward(g):
        # g[..., j] is 0-d when stacking scalars; copy() keeps that shape
        # where ascontiguousarray would promote it to (1,).
        return [g[..., j].copy() for j in range(len(tensors))]

    return tape.record(out, tuple(tensors), backward)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    out = x.data.reshape(shape)

    def backward(g):
        return (g.reshape(x.data.shape),)

    return x.tape.record(out, (x,), backward)


# ---------------------------------------------------------------------------
# lookups and memory addressing


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: ids of any shape against a (V, d) table."""
    ids = np.asarray(ids)
    out = table.data[ids]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return table.tape.record(out, (table,), backward)


def gather_rows(mem: Tensor, ids: np.ndarray) -> Tensor:
    """Per-batch-row lookup: mem (B, R, d), ids (B,) -> (B, d)."""
    ids = np.asarray(ids)
    rows = np.arange(mem.data.shape[0])
    out = np.ascontiguousarray(mem.data[rows, ids])

    def backward(g):
        gm = np.zeros_like(mem.data)
        # (b, ids[b]) pairs are unique, so buffered fancy add is exact
        gm[rows, ids] += g
        return (gm,)

    return mem.tape.record(out, (mem,), backward)


def scatter_rows(mem: Tensor, ids: np.ndarray, values: Tensor, write_mask: np.ndarray) -> Tensor:
    """Copy of mem with row ids[b] of batch entry b replaced by values[b].

    Rows where ``write_mask[b]`` is False keep the old content and route
    the adjoint back to the old memory instead of the new value.
    """
    ids = np.asarray(ids)
    mask = np.asarray(write_mask, dtype=bool)
    rows = np.arange(mem.data.shape[0])[mask]
    sel = ids[mask]
    out = mem.data.copy()
    out[rows, sel] = values.data[mask]

    def backward(g):
        gm = g.copy()
        gm[rows, sel] = 0.0
        gv = np.zeros_like(values.data)
        gv[mask] = g[rows, sel]
        return gm, gv

    return mem.tape.record(out, (mem, values), backward)


# ---------------------------------------------------------------------------
# regularisation and loss


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a seeded mask; rate 0 is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = x.data * mask

    def backward(g):
        return (g * mask,)

    return x.tape.record(out, (x,), backward)


_CE_CLIP = 1e-12


def cross_entropy(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Per-example -log p[target] from probabilities over the last axis."""
    targets = np.asarray(targets)
    p_t = np.take_along_axis(probs.data, targets[..., None], axis=-1)[..., 0]
    clipped = np.maximum(p_t, _CE_CLIP)
    out = -np.log(clipped)

    def backward(g):
        gp = np.zeros_like(probs.data)
        np.put_along_axis(gp, targets[..., None], (-g / clipped)[..., None], axis=-1)
        return (gp,)

    return probs.tape.record(out, (probs,), backward)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())

    def backward(g):
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return x.tape.record(out, (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.asarray(x.data.mean())

    def backward(g):
        return (np.broadcast_to(g / n, x.data.shape).copy(),)

    return x.tape.record(out, (x,), backward)


def sum_axis(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return x.tape.record(out, (x,), backward)

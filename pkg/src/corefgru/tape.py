"""Dense float64 tensors with reverse-mode differentiation.

The model here is deliberately small: a ``Tensor`` wraps a numpy float64
array; a ``Tape`` records every tensor produced by an op, in creation
order, which is by construction a topological order of the graph.
``Tape.backward`` walks that list once in reverse, accumulating adjoints
into each node and, for parameter leaves, into the shared ``Parameters``
registry.

Parameters are immutable during a forward/backward pass and may be shared
read-only across tapes; gradient accumulation is additive and the caller
zeroes accumulators between optimizer steps.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidShape, UnsupportedOp


def as_f64(data) -> np.ndarray:
    """Coerce to a C-contiguous float64 array, rejecting non-finite values.

    Preserves 0-d inputs (ascontiguousarray would promote them to (1,)).
    """
    arr = np.asarray(data, dtype=np.float64)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    if not np.all(np.isfinite(arr)):
        raise InvalidShape("tensor values must be finite")
    return arr


class Tensor:
    """One node of a recorded computation.

    Leaf tensors (parameters and constants) have no parents.  Op outputs
    carry a closure that maps the output adjoint to parent adjoints.
    """

    __slots__ = ("data", "tape", "parents", "backward_fn", "param_name", "grad")

    def __init__(
        self,
        data: np.ndarray,
        tape: "Tape",
        parents: Sequence["Tensor"] = (),
        backward_fn: Optional[Callable[[np.ndarray], Sequence[np.ndarray]]] = None,
        param_name: Optional[str] = None,
    ):
        self.data = data
        self.tape = tape
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.param_name = param_name
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, param={self.param_name!r})"

    # Operator sugar; the functions live in ops.py.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


class Parameters:
    """Named trainable tensors plus additive gradient accumulators."""

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> np.ndarray:
        if name in self._values:
            raise ValueError(f"parameter {name!r} already registered")
        arr = as_f64(value)
        self._values[name] = arr
        self._grads[name] = np.zeros_like(arr)
        return arr

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def value(self, name: str) -> np.ndarray:
        return self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def set_value(self, name: str, value) -> None:
        arr = as_f64(value)
        if arr is value:
            arr = arr.copy()  # never alias caller storage
        if arr.shape != self._values[name].shape:
            raise InvalidShape(f"shape mismatch for parameter {name!r}")
        self._values[name] = arr

    def names(self) -> list[str]:
        return list(self._values)

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        self._grads[name] += grad

    def total_size(self) -> int:
        return sum(v.size for v in self._values.values())

    def clone_values(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self._values.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            self.set_value(name, arr)

    def global_grad_norm(self) -> float:
        total = 0.0
        for g in self._grads.values():
            total += float(np.dot(g.ravel(), g.ravel()))
        return float(np.sqrt(total))


class Tape:
    """Ordered record of one forward computation.

    A tape is single-threaded.  ``debug=True`` checks every op output for
    NaN/Inf, which is the mode the unit tests run in.
    """

    def __init__(self, params: Optional[Parameters] = None, debug: bool = False):
        self.params = params if params is not None else Parameters()
        self.debug = debug
        self.nodes: list[Tensor] = []
        self._param_nodes: dict[str, Tensor] = {}

    def record(self, value: np.ndarray, parents=(), backward_fn=None) -> Tensor:
        if self.debug and not np.all(np.isfinite(value)):
            raise InvalidShape("op produced non-finite values")
        node = Tensor(value, self, parents, backward_fn)
        self.nodes.append(node)
        return node

    def const(self, data) -> Tensor:
        """A leaf that takes part in the graph but receives no gradient."""
        node = Tensor(as_f64(data), self)
        self.nodes.append(node)
        return node

    def param(self, name: str) -> Tensor:
        """The leaf node for a registered parameter (one per tape)."""
        node = self._param_nodes.get(name)
        if node is None:
            node = Tensor(self.params.value(name), self, param_name=name)
            self.nodes.append(node)
            self._param_nodes[name] = node
        return node

    def nbytes(self) -> int:
        """Bytes held by every value recorded on this tape."""
        return sum(n.data.nbytes for n in self.nodes)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(param) into the parameter registry.

        Parameters that do not participate in ``loss`` keep their current
        (zero-initialised) accumulator untouched.
        """
        if loss.tape is not self:
            raise ValueError("loss was recorded on a different tape")
        if loss.data.shape != ():
            raise InvalidShape("backward requires a scalar loss")
        loss.grad = np.ones((), dtype=np.float64)
        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            if node.parents:
                if node.backward_fn is None:
                    raise UnsupportedOp("recorded op has no adjoint")
                parent_grads = node.backward_fn(node.grad)
                for parent, pg in zip(node.parents, parent_grads):
                    if pg is None:
                        continue
                    if parent.grad is None:
                        parent.grad = np.zeros_like(parent.data)
                    parent.grad += pg
            if node.param_name is not None:
                self.params.accumulate(node.param_name, node.grad)

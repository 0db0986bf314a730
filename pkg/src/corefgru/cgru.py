"""The coreference-biased GRU cell and its execution modes.

A step blends the sequential hidden state with the hidden state of the
token's most recent coreferent antecedent before the usual GRU gating:

    m = concat(alpha * h_prev[:d/2], (1 - alpha) * h_ante[d/2:])
    r = sigmoid(x W_r + m U_r + b_r)
    z = sigmoid(x W_z + m U_z + b_z)
    h~ = tanh(x W_h + r * (m U_h) + b_h)
    h = (1 - z) * m + z * h~

``alpha`` weighs sequential against coreferent recency and is forced to 1
when the token has no antecedent, so the layer degrades to a GRU whose
coreferent half of ``m`` is zero.  The same cell can be driven three ways:
by explicit antecedent indices (``run_direction``), by a per-cluster memory
matrix (``run_memory_mode``), or batched over padded sequences with a
gather/scatter memory (``unroll_batched``); all three agree under the
antecedent convention used by :mod:`corefgru.coref`.

Weight matrices are stored input-major, i.e. ``W_r`` has shape
``(d_in, d)`` and is applied as ``x @ W_r``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np

from . import ops
from .coref import NULL, AntecedentMap
from .errors import InvalidShape, OrderViolation, RangeError
from .ops import _sigmoid_stable
from .tape import Parameters, Tape, Tensor

ALPHA_MODES = ("two_key", "single_key", "one")


@dataclass
class CGRUParams:
    """All trainable tensors of one coref-GRU cell."""

    W_r: np.ndarray
    W_z: np.ndarray
    W_h: np.ndarray
    U_r: np.ndarray
    U_z: np.ndarray
    U_h: np.ndarray
    b_r: np.ndarray
    b_z: np.ndarray
    b_h: np.ndarray
    k1: np.ndarray
    k2: np.ndarray

    def __post_init__(self):
        d_in, d = self.W_r.shape
        if d % 2 != 0:
            raise InvalidShape("hidden size must be even (state is split in half)")
        for name in ("W_z", "W_h"):
            if getattr(self, name).shape != (d_in, d):
                raise InvalidShape(f"{name} must have shape ({d_in}, {d})")
        for name in ("U_r", "U_z", "U_h"):
            if getattr(self, name).shape != (d, d):
                raise InvalidShape(f"{name} must have shape ({d}, {d})")
        for name in ("b_r", "b_z", "b_h"):
            if getattr(self, name).shape != (d,):
                raise InvalidShape(f"{name} must have shape ({d},)")
        for name in ("k1", "k2"):
            if getattr(self, name).shape != (d_in,):
                raise InvalidShape(f"{name} must have shape ({d_in},)")

    @property
    def d_in(self) -> int:
        return self.W_r.shape[0]

    @property
    def d(self) -> int:
        return self.W_r.shape[1]

    def size(self) -> int:
        return sum(getattr(self, f.name).size for f in fields(self))


@dataclass
class GRUParams:
    """A plain GRU cell: the same gates applied to h_prev, no key vectors."""

    W_r: np.ndarray
    W_z: np.ndarray
    W_h: np.ndarray
    U_r: np.ndarray
    U_z: np.ndarray
    U_h: np.ndarray
    b_r: np.ndarray
    b_z: np.ndarray
    b_h: np.ndarray

    @property
    def d_in(self) -> int:
        return self.W_r.shape[0]

    @property
    def d(self) -> int:
        return self.W_r.shape[1]

    def size(self) -> int:
        return sum(getattr(self, f.name).size for f in fields(self))


@dataclass
class StepInput:
    """One cell step: input vector, sequential state, optional antecedent state."""

    x: np.ndarray
    h_prev: np.ndarray
    h_ante: Optional[np.ndarray] = None


def glorot_uniform(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    if len(shape) == 1:
        fan_in, fan_out = shape[0], 1
    else:
        fan_in, fan_out = shape
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def init_cgru_params(rng: np.random.Generator, d_in: int, d: int) -> CGRUParams:
    return CGRUParams(
        W_r=glorot_uniform(rng, (d_in, d)),
        W_z=glorot_uniform(rng, (d_in, d)),
        W_h=glorot_uniform(rng, (d_in, d)),
        U_r=glorot_uniform(rng, (d, d)),
        U_z=glorot_uniform(rng, (d, d)),
        U_h=glorot_uniform(rng, (d, d)),
        b_r=np.zeros(d),
        b_z=np.zeros(d),
        b_h=np.zeros(d),
        k1=glorot_uniform(rng, (d_in,)),
        k2=glorot_uniform(rng, (d_in,)),
    )


def init_gru_params(rng: np.random.Generator, d_in: int, d: int) -> GRUParams:
    return GRUParams(
        W_r=glorot_uniform(rng, (d_in, d)),
        W_z=glorot_uniform(rng, (d_in, d)),
        W_h=glorot_uniform(rng, (d_in, d)),
        U_r=glorot_uniform(rng, (d, d)),
        U_z=glorot_uniform(rng, (d, d)),
        U_h=glorot_uniform(rng, (d, d)),
        b_r=np.zeros(d),
        b_z=np.zeros(d),
        b_h=np.zeros(d),
    )


def register_cell(registry: Parameters, prefix: str, cell) -> None:
    for f in fields(cell):
        registry.add(f"{prefix}.{f.name}", getattr(cell, f.name))


def cell_nodes(tape: Tape, prefix: str, with_keys: bool) -> dict[str, Tensor]:
    names = [f.name for f in fields(CGRUParams if with_keys else GRUParams)]
    return {n: tape.param(f"{prefix}.{n}") for n in names}


# ---------------------------------------------------------------------------
# node-level cell math (shared by every execution mode, single and batched)


def alpha_node(p: dict[str, Tensor], x: Tensor, mode: str) -> Tensor:
    """Key-addressed weight of the sequential state, in (0, 1)."""
    a1 = ops.matmul(x, p["k1"])
    if mode == "single_key":
        return ops.sigmoid(a1)
    a2 = ops.matmul(x, p["k2"])
    pair = ops.stack_last([a1, a2])
    return ops.slice_last(ops.softmax(pair, axis=-1), 0, 1)


def blend_nodes(alpha, h_prev: Tensor, h_ante: Tensor, d: int) -> Tensor:
    """m = concat(alpha * first half of h_prev, (1-alpha) * second half of h_ante)."""
    half = d // 2
    seq = ops.mul(alpha, ops.slice_last(h_prev, 0, half))
    cor = ops.mul(ops.sub(1.0, alpha), ops.slice_last(h_ante, half, d))
    return ops.concat([seq, cor])


def gate_nodes(p: dict[str, Tensor], x: Tensor, m: Tensor) -> Tensor:
    r = ops.sigmoid(ops.add(ops.add(ops.matmul(x, p["W_r"]), ops.matmul(m, p["U_r"])), p["b_r"]))
    z = ops.sigmoid(ops.add(ops.add(ops.matmul(x, p["W_z"]), ops.matmul(m, p["U_z"])), p["b_z"]))
    h_tilde = ops.tanh(
        ops.add(ops.add(ops.matmul(x, p["W_h"]), ops.mul(r, ops.matmul(m, p["U_h"]))), p["b_h"])
    )
    return ops.add(ops.mul(ops.sub(1.0, z), m), ops.mul(z, h_tilde))


def cgru_step_nodes(
    p: dict[str, Tensor],
    x: Tensor,
    h_prev: Tensor,
    h_ante: Optional[Tensor],
    d: int,
    alpha_mode: str = "two_key",
) -> Tensor:
    """One recorded cell step; ``h_ante=None`` forces alpha to exactly 1."""
    tape = x.tape
    if h_ante is None:
        alpha = tape.const(np.float64(1.0))
        h_ante = tape.const(np.zeros(d))
    elif alpha_mode == "one":
        alpha = tape.const(np.float64(1.0))
    else:
        alpha = alpha_node(p, x, alpha_mode)
    m = blend_nodes(alpha, h_prev, h_ante, d)
    return gate_nodes(p, x, m)


def gru_step_nodes(p: dict[str, Tensor], x: Tensor, h_prev: Tensor) -> Tensor:
    return gate_nodes(p, x, h_prev)


# ---------------------------------------------------------------------------
# value-level public surface


def compute_alpha(x: np.ndarray, k1: np.ndarray, k2: np.ndarray, antecedent_present: bool) -> float:
    """Weight of the sequential state; exactly 1 without an antecedent."""
    x, k1, k2 = np.asarray(x, float), np.asarray(k1, float), np.asarray(k2, float)
    if x.shape != k1.shape or x.shape != k2.shape:
        raise InvalidShape("x and key vectors must share a shape")
    if not antecedent_present:
        return 1.0
    logits = np.array([x @ k1, x @ k2])
    shifted = np.exp(logits - logits.max())
    return float(shifted[0] / shifted.sum())


def _single_cell_setup(params) -> tuple[Tape, dict[str, Tensor]]:
    registry = Parameters()
    register_cell(registry, "cell", params)
    tape = Tape(registry)
    return tape, cell_nodes(tape, "cell", isinstance(params, CGRUParams))


def cell_step(params: CGRUParams, step: StepInput, alpha_mode: str = "two_key") -> np.ndarray:
    """Evaluate one coref-GRU step on plain arrays."""
    tape, p = _single_cell_setup(params)
    x = tape.const(step.x)
    h_prev = tape.const(step.h_prev)
    h_ante = tape.const(step.h_ante) if step.h_ante is not None else None
    return cgru_step_nodes(p, x, h_prev, h_ante, params.d, alpha_mode).data


def gru_cell_step(params: GRUParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """Evaluate one plain GRU step on plain arrays (the parity baseline)."""
    tape, p = _single_cell_setup(params)
    return gru_step_nodes(p, tape.const(x), tape.const(h_prev)).data


def unroll_nodes(
    tape: Tape,
    p: dict[str, Tensor],
    x_nodes: Sequence[Tensor],
    ante: np.ndarray,
    order: Sequence[int],
    d: int,
    alpha_mode: str = "two_key",
) -> list[Tensor]:
    """Unroll a direction by explicit antecedent indices.

    ``ante[t]`` must already be processed when ``t`` comes up in ``order``;
    a violation raises OrderViolation.  Returns states in token order.
    """
    n = len(x_nodes)
    states: list[Optional[Tensor]] = [None] * n
    h = tape.const(np.zeros(d))
    for t in order:
        a = int(ante[t])
        if a == NULL:
            h_ante = None
        else:
            if a < 0 or a >= n or states[a] is None:
                raise OrderViolation(f"antecedent {a} of token {t} not yet processed")
            h_ante = states[a]
        h = cgru_step_nodes(p, x_nodes[t], h, h_ante, d, alpha_mode)
        states[t] = h
    return states  # type: ignore[return-value]


def run_direction(
    params: CGRUParams,
    inputs: Sequence[np.ndarray],
    ante: np.ndarray,
    order: Optional[Sequence[int]] = None,
    alpha_mode: str = "two_key",
) -> np.ndarray:
    """Process a sequence in ``order`` (default left-to-right) with h_0 = 0."""
    tape, p = _single_cell_setup(params)
    x_nodes = [tape.const(x) for x in inputs]
    if order is None:
        order = range(len(x_nodes))
    states = unroll_nodes(tape, p, x_nodes, ante, order, params.d, alpha_mode)
    return np.stack([s.data for s in states])


def run_bidirectional(
    fwd: CGRUParams,
    bwd: CGRUParams,
    inputs: Sequence[np.ndarray],
    antemap: AntecedentMap,
    alpha_mode: str = "two_key",
) -> np.ndarray:
    """Concatenate forward and reverse-direction states per token (width 2d)."""
    n = len(inputs)
    f = run_direction(fwd, inputs, antemap.forward, range(n), alpha_mode)
    b = run_direction(bwd, inputs, antemap.backward, range(n - 1, -1, -1), alpha_mode)
    return np.concatenate([f, b], axis=-1)


def run_memory_mode(
    params: CGRUParams,
    inputs: Sequence[np.ndarray],
    cluster_of: np.ndarray,
    direction: str = "forward",
    num_clusters: Optional[int] = None,
    alpha_mode: str = "two_key",
) -> np.ndarray:
    """Drive the cell through a per-cluster memory instead of token indices.

    Row c of the memory always holds the state of the most recently
    processed token of cluster c; tokens outside every cluster neither read
    nor write.  Output matches ``run_direction`` on the antecedent map the
    cluster assignment induces.
    """
    cluster_of = np.asarray(cluster_of)
    n_clusters = num_clusters if num_clusters is not None else int(cluster_of.max()) + 1
    active = cluster_of[cluster_of != NULL]
    if active.size and int(active.max()) >= n_clusters:
        raise RangeError("cluster id out of range")
    tape, p = _single_cell_setup(params)
    x_nodes = [tape.const(x) for x in inputs]
    n = len(x_nodes)
    order = range(n) if direction == "forward" else range(n - 1, -1, -1)
    memory: dict[int, Tensor] = {}
    states: list[Optional[Tensor]] = [None] * n
    h = tape.const(np.zeros(params.d))
    for t in order:
        cid = int(cluster_of[t])
        h_ante = memory.get(cid) if cid != NULL else None
        h = cgru_step_nodes(p, x_nodes[t], h, h_ante, params.d, alpha_mode)
        if cid != NULL:
            memory[cid] = h
        states[t] = h
    return np.stack([s.data for s in states])


def null_coref_reference(params: CGRUParams, inputs: Sequence[np.ndarray]) -> np.ndarray:
    """Plain-numpy recurrence with alpha fixed at 1 and the coreferent half zeroed.

    Used to pin down what the cell must reduce to when no token has an
    antecedent.
    """
    d = params.d
    half = d // 2
    h = np.zeros(d)
    out = []
    for x in inputs:
        m = np.concatenate([1.0 * h[:half], np.zeros(half)])
        r = _sigmoid_stable(x @ params.W_r + m @ params.U_r + params.b_r)
        z = _sigmoid_stable(x @ params.W_z + m @ params.U_z + params.b_z)
        h_tilde = np.tanh(x @ params.W_h + r * (m @ params.U_h) + params.b_h)
        h = (1.0 - z) * m + z * h_tilde
        out.append(h)
    return np.stack(out)


# ---------------------------------------------------------------------------
# batched execution over padded sequences


@dataclass
class DirectionPlan:
    """Slot-addressed traversal of a padded batch in one direction.

    Row 0 of the memory is reserved and never written, so slot 0 reads as
    the zero state; cluster c maps to row c + 1.  ``mode='position'`` gives
    every token its own row, which represents arbitrary (e.g. randomized)
    antecedent links at the cost of memory growing with T instead of C.
    """

    order: np.ndarray
    read_slot: np.ndarray
    present: np.ndarray
    write_slot: np.ndarray
    write_mask: np.ndarray
    seq_mask: np.ndarray
    n_rows: int


def direction_plans(
    maps: Sequence[AntecedentMap],
    lengths: Sequence[int],
    t_max: int,
    mode: str = "cluster",
) -> tuple[DirectionPlan, DirectionPlan]:
    """Build forward and backward traversal plans for a padded batch."""
    b = len(maps)
    seq_mask = np.zeros((b, t_max))
    for i, n in enumerate(lengths):
        seq_mask[i, :n] = 1.0

    def make(direction: str) -> DirectionPlan:
        read_slot = np.zeros((b, t_max), dtype=np.int64)
        present = np.zeros((b, t_max))
        write_slot = np.zeros((b, t_max), dtype=np.int64)
        write_mask = np.zeros((b, t_max), dtype=bool)
        n_rows = 1
        for i, m in enumerate(maps):
            n = lengths[i]
            ante = m.forward if direction == "forward" else m.backward
            if mode == "cluster":
                cl = m.cluster_of
                linked = ante[:n] != NULL
                read_slot[i, :n] = np.where(linked, cl[:n] + 1, 0)
                present[i, :n] = linked
                in_cluster = cl[:n] != NULL
                write_slot[i, :n] = np.where(in_cluster, cl[:n] + 1, 0)
                write_mask[i, :n] = in_cluster
                n_rows = max(n_rows, m.num_clusters() + 1)
            elif mode == "position":
                linked = ante[:n] != NULL
                read_slot[i, :n] = np.where(linked, ante[:n] + 1, 0)
                present[i, :n] = linked
                write_slot[i, :n] = np.arange(n) + 1
                write_mask[i, :n] = True
                n_rows = t_max + 1
            else:
                raise ValueError(f"unknown plan mode {mode!r}")
        order = np.arange(t_max) if direction == "forward" else np.arange(t_max - 1, -1, -1)
        return DirectionPlan(order, read_slot, present, write_slot, write_mask, seq_mask, n_rows)

    return make("forward"), make("backward")


def unroll_batched(
    tape: Tape,
    p: dict[str, Tensor],
    x_node: Tensor,
    plan: DirectionPlan,
    d: int,
    alpha_mode: str = "two_key",
) -> Tensor:
    """Coref-GRU over (B, T, d_in) input following a DirectionPlan; returns (B, T, d)."""
    b, t_max = plan.seq_mask.shape
    mem = tape.const(np.zeros((b, plan.n_rows, d)))
    h = tape.const(np.zeros((b, d)))
    states: list[Optional[Tensor]] = [None] * t_max
    for t in plan.order:
        x_t = ops.index_axis1(x_node, int(t))
        h_ante = ops.gather_rows(mem, plan.read_slot[:, t])
        if alpha_mode == "one":
            alpha = tape.const(np.ones((b, 1)))
        else:
            pres = plan.present[:, t][:, None]
            raw = alpha_node(p, x_t, alpha_mode)
            alpha = ops.add(ops.mul(raw, tape.const(pres)), tape.const(1.0 - pres))
        m = blend_nodes(alpha, h, h_ante, d)
        h_new = gate_nodes(p, x_t, m)
        smask = plan.seq_mask[:, t][:, None]
        h = ops.add(ops.mul(h_new, tape.const(smask)), ops.mul(h, tape.const(1.0 - smask)))
        mem = ops.scatter_rows(mem, plan.write_slot[:, t], h, plan.write_mask[:, t])
        states[t] = h
    return ops.stack_axis1(states)  # type: ignore[arg-type]


def unroll_batched_gru(
    tape: Tape,
    p: dict[str, Tensor],
    x_node: Tensor,
    order: np.ndarray,
    seq_mask: np.ndarray,
    d: int,
) -> Tensor:
    """Plain GRU over (B, T, d_in) input; returns (B, T, d)."""
    b, t_max = seq_mask.shape
    h = tape.const(np.zeros((b, d)))
    states: list[Optional[Tensor]] = [None] * t_max
    for t in order:
        x_t = ops.index_axis1(x_node, int(t))
        h_new = gru_step_nodes(p, x_t, h)
        smask = seq_mask[:, t][:, None]
        h = ops.add(ops.mul(h_new, tape.const(smask)), ops.mul(h, tape.const(1.0 - smask)))
        states[t] = h
    return ops.stack_axis1(states)  # type: ignore[arg-type]

"""Gated-attention reader over coref-GRU (or plain GRU) layers.

The passage runs through K stacked bidirectional recurrent layers.  Between
consecutive layers each token state is gated by a soft attention over the
question's token encodings (elementwise product with its attention-weighted
question vector); there is no gate after the last layer.  The question is
encoded once by a single bidirectional plain-GRU layer, which also supplies
a fixed summary vector (final forward state next to final backward state).

Two answer heads:

* ``attention_sum`` scores every passage token against the projected
  question summary, softmaxes over the passage, sums the weights landing on
  each candidate's mention start positions, and renormalizes over
  candidates.
* ``classify`` applies an affine map to the question summary concatenated
  with the mean passage state and softmaxes over a fixed label set.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import ops
from .cgru import (
    CGRUParams,
    DirectionPlan,
    GRUParams,
    cell_nodes,
    direction_plans,
    init_cgru_params,
    init_gru_params,
    register_cell,
    unroll_batched,
    unroll_batched_gru,
)
from .coref import (
    NULL,
    AntecedentMap,
    CorefClusters,
    antecedents_from_membership,
    cap_clusters,
    corrupt_annotations,
    normalize_clusters,
    token_membership,
)
from .data import RCInstance
from .errors import LabelError, MissingMention, RangeError
from .tape import Parameters, Tape, Tensor

PAD = "<pad>"
UNK = "<unk>"

NEG_BIG = -1e30  # additive mask value; swamps any finite score


@dataclass
class Vocab:
    tokens: list[str]

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, toks: Sequence[str]) -> np.ndarray:
        unk = self.index[UNK]
        return np.array([self.index.get(t, unk) for t in toks], dtype=np.int64)


def build_vocab(instances: Sequence[RCInstance]) -> Vocab:
    seen = set()
    for inst in instances:
        seen.update(inst.passage_tokens)
        seen.update(inst.question_tokens)
        seen.add(inst.answer)
        for c in inst.candidates:
            seen.add(c.text)
    return Vocab([PAD, UNK] + sorted(seen))


def build_labels(instances: Sequence[RCInstance]) -> list[str]:
    """Fixed label inventory for the classification head."""
    return sorted({inst.answer for inst in instances})


@dataclass
class ReaderConfig:
    d: int = 32                 # hidden size per direction
    k_layers: int = 2
    emb_dim: int = 32
    dropout: float = 0.0
    recurrence: str = "cgru"    # "cgru" | "gru"
    alpha_mode: str = "two_key"
    query_feature: bool = True
    cluster_onehot: bool = False  # append a c_max-wide one-hot of the token's cluster
    c_max: int = 8              # cap on clusters per passage (0 = uncapped)
    answer_head: str = "attention_sum"  # | "classify"

    def __post_init__(self):
        if self.recurrence not in ("cgru", "gru"):
            raise ValueError(f"unknown recurrence {self.recurrence!r}")
        if self.answer_head not in ("attention_sum", "classify"):
            raise ValueError(f"unknown answer head {self.answer_head!r}")
        if self.cluster_onehot and self.c_max < 1:
            raise RangeError("cluster_onehot needs c_max >= 1")

    @property
    def n_features(self) -> int:
        return (1 if self.query_feature else 0) + (self.c_max if self.cluster_onehot else 0)

    @property
    def d_in0(self) -> int:
        return self.emb_dim + self.n_features

    def layer_d_in(self, layer: int) -> int:
        return self.d_in0 if layer == 0 else 2 * self.d


def init_reader_params(
    cfg: ReaderConfig, vocab_size: int, rng: np.random.Generator, n_labels: int = 0
) -> Parameters:
    """Seeded initialization; the draw order is fixed so runs reproduce."""
    from .cgru import glorot_uniform

    reg = Parameters()
    reg.add("embed", glorot_uniform(rng, (vocab_size, cfg.emb_dim)))
    for direction in ("fwd", "bwd"):
        register_cell(reg, f"question.{direction}", init_gru_params(rng, cfg.d_in0, cfg.d))
    for layer in range(cfg.k_layers):
        d_in = cfg.layer_d_in(layer)
        for direction in ("fwd", "bwd"):
            if cfg.recurrence == "cgru":
                cell = init_cgru_params(rng, d_in, cfg.d)
            else:
                cell = init_gru_params(rng, d_in, cfg.d)
            register_cell(reg, f"layer{layer}.{direction}", cell)
    if cfg.answer_head == "attention_sum":
        reg.add("head.W", glorot_uniform(rng, (2 * cfg.d, 2 * cfg.d)))
    else:
        if n_labels < 1:
            raise LabelError("classification head needs at least one label")
        reg.add("head.W", glorot_uniform(rng, (4 * cfg.d, n_labels)))
        reg.add("head.b", np.zeros(n_labels))
    return reg


# ---------------------------------------------------------------------------
# batching


@dataclass
class CorruptionSpec:
    """Annotation corruption applied when batches are built."""

    mode: str          # "remove-fraction" | "randomize"
    fraction: float = 1.0
    seed: int = 0


@dataclass
class Batch:
    p_ids: np.ndarray            # (B, Tp) int64
    p_feats: Optional[np.ndarray]  # (B, Tp, F) or None
    p_mask: np.ndarray           # (B, Tp) 1/0
    lengths: np.ndarray          # (B,)
    q_ids: np.ndarray            # (B, Tq)
    q_feats: Optional[np.ndarray]
    q_mask: np.ndarray
    fwd_plan: Optional[DirectionPlan]
    bwd_plan: Optional[DirectionPlan]
    agg: np.ndarray              # (B, nc, Tp) candidate start-position indicator
    cand_mask: np.ndarray        # (B, nc) 1/0 candidate is scoreable
    targets: np.ndarray          # (B,) candidate index of the answer
    candidate_texts: list[list[str]]
    answers: list[str]
    label_targets: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.p_ids.shape[0]


def instance_antecedents(
    inst: RCInstance, c_max: int = 0, corruption: Optional[CorruptionSpec] = None
) -> tuple[AntecedentMap, CorefClusters]:
    """Normalized (and optionally capped, corrupted) antecedent structure."""
    n = len(inst.passage_tokens)
    clusters = normalize_clusters(CorefClusters.from_spans(inst.clusters), n)
    if c_max > 0:
        clusters = cap_clusters(clusters, c_max)
    membership = token_membership(clusters, n)
    amap = antecedents_from_membership(membership)
    if corruption is not None:
        # salt by instance id so one batch does not share a removal pattern
        salt = zlib.crc32(inst.id.encode("utf-8"))
        amap = corrupt_annotations(
            amap, corruption.mode, corruption.fraction, [corruption.seed, salt]
        )
    return amap, clusters


def make_batch(
    instances: Sequence[RCInstance],
    vocab: Vocab,
    cfg: ReaderConfig,
    corruption: Optional[CorruptionSpec] = None,
    labels: Optional[dict[str, int]] = None,
) -> Batch:
    b = len(instances)
    lengths = np.array([len(i.passage_tokens) for i in instances], dtype=np.int64)
    t_p = int(lengths.max())
    t_q = max(len(i.question_tokens) for i in instances)
    nc = max(len(i.candidates) for i in instances)
    n_feat = cfg.n_features

    p_ids = np.zeros((b, t_p), dtype=np.int64)
    q_ids = np.zeros((b, t_q), dtype=np.int64)
    p_mask = np.zeros((b, t_p))
    q_mask = np.zeros((b, t_q))
    p_feats = np.zeros((b, t_p, n_feat)) if n_feat else None
    q_feats = np.zeros((b, t_q, n_feat)) if n_feat else None
    agg = np.zeros((b, nc, t_p))
    cand_mask = np.zeros((b, nc))
    targets = np.zeros(b, dtype=np.int64)
    label_targets = np.zeros(b, dtype=np.int64) if labels is not None else None

    maps = []
    for i, inst in enumerate(instances):
        n = len(inst.passage_tokens)
        p_ids[i, :n] = vocab.encode(inst.passage_tokens)
        p_mask[i, :n] = 1.0
        q = vocab.encode(inst.question_tokens)
        q_ids[i, : len(q)] = q
        q_mask[i, : len(q)] = 1.0

        amap, clusters = instance_antecedents(inst, cfg.c_max, corruption)
        maps.append(amap)

        if n_feat:
            col = 0
            if cfg.query_feature:
                in_q = set(inst.question_tokens)
                for t, tok in enumerate(inst.passage_tokens):
                    if tok in in_q:
                        p_feats[i, t, col] = 1.0
                q_feats[i, : len(q), col] = 1.0
                col += 1
            if cfg.cluster_onehot:
                membership = token_membership(clusters, n)
                for t, cid in enumerate(membership):
                    if cid != NULL:
                        p_feats[i, t, col + cid] = 1.0

        target = None
        for c_idx, cand in enumerate(inst.candidates):
            starts = [s for s, _ in cand.positions if 0 <= s < n]
            if starts:
                cand_mask[i, c_idx] = 1.0
                for s in starts:
                    agg[i, c_idx, s] = 1.0
            if cand.text == inst.answer and target is None:
                target = c_idx
        if target is None:
            raise LabelError(f"instance {inst.id}: answer {inst.answer!r} not among candidates")
        if cand_mask[i, target] == 0.0:
            raise MissingMention(
                f"instance {inst.id}: answer candidate has no passage mention"
            )
        targets[i] = target
        if labels is not None:
            if inst.answer not in labels:
                raise LabelError(f"instance {inst.id}: answer {inst.answer!r} not in label set")
            label_targets[i] = labels[inst.answer]

    if cfg.recurrence == "cgru":
        plan_mode = "position" if corruption is not None and corruption.mode == "randomize" else "cluster"
        fwd_plan, bwd_plan = direction_plans(maps, lengths.tolist(), t_p, mode=plan_mode)
    else:
        fwd_plan = bwd_plan = None

    return Batch(
        p_ids=p_ids,
        p_feats=p_feats,
        p_mask=p_mask,
        lengths=lengths,
        q_ids=q_ids,
        q_feats=q_feats,
        q_mask=q_mask,
        fwd_plan=fwd_plan,
        bwd_plan=bwd_plan,
        agg=agg,
        cand_mask=cand_mask,
        targets=targets,
        candidate_texts=[[c.text for c in inst.candidates] for inst in instances],
        answers=[inst.answer for inst in instances],
        label_targets=label_targets,
    )


# ---------------------------------------------------------------------------
# forward graph


def gated_attention(p: Tensor, q: Tensor, q_mask: Optional[np.ndarray] = None) -> Tensor:
    """Gate token states by their attention-weighted question vectors.

    ``p``: (..., T, w), ``q``: (..., Tq, w); returns p * (softmax(p q^T) q).
    """
    scores = ops.matmul(p, ops.transpose_last2(q))
    if q_mask is not None:
        pad = (1.0 - q_mask)[..., None, :] * NEG_BIG
        scores = ops.add(scores, p.tape.const(pad))
    attn = ops.softmax(scores, axis=-1)
    return ops.mul(p, ops.matmul(attn, q))


def attention_sum_answer(
    token_probs: np.ndarray, candidates: Sequence, n_tokens: Optional[int] = None
) -> np.ndarray:
    """Aggregate a token-level distribution into candidate probabilities.

    Sums the probability mass at each candidate's mention start positions,
    then renormalizes.  A candidate with no in-range mention raises
    MissingMention; the batched model path instead drops such candidates
    before scoring.
    """
    token_probs = np.asarray(token_probs, dtype=float)
    n = n_tokens if n_tokens is not None else token_probs.shape[-1]
    raw = np.zeros(len(candidates))
    for i, cand in enumerate(candidates):
        starts = [s for s, _ in cand.positions if 0 <= s < n]
        if not starts:
            raise MissingMention(f"candidate {cand.text!r} has no mention in the passage")
        raw[i] = token_probs[starts].sum()
    return raw / raw.sum()


def _encode_question(tape: Tape, cfg: ReaderConfig, batch: Batch) -> tuple[Tensor, Tensor]:
    """One bidirectional plain-GRU pass; returns (per-token (B,Tq,2d), summary (B,2d))."""
    emb = ops.embedding(tape.param("embed"), batch.q_ids)
    x = ops.concat([emb, tape.const(batch.q_feats)]) if batch.q_feats is not None else emb
    t_q = batch.q_ids.shape[1]
    fwd = unroll_batched_gru(
        tape, cell_nodes(tape, "question.fwd", False), x, np.arange(t_q), batch.q_mask, cfg.d
    )
    bwd = unroll_batched_gru(
        tape,
        cell_nodes(tape, "question.bwd", False),
        x,
        np.arange(t_q - 1, -1, -1),
        batch.q_mask,
        cfg.d,
    )
    per_token = ops.concat([fwd, bwd])
    # masked carry leaves the final forward state at the last index and the
    # final backward state at index 0
    summary = ops.concat([ops.index_axis1(fwd, t_q - 1), ops.index_axis1(bwd, 0)])
    return per_token, summary


def _encode_passage(
    tape: Tape,
    cfg: ReaderConfig,
    batch: Batch,
    q_tokens: Tensor,
    train: bool,
    drop_rng: Optional[np.random.Generator],
) -> Tensor:
    emb = ops.embedding(tape.param("embed"), batch.p_ids)
    x = ops.concat([emb, tape.const(batch.p_feats)]) if batch.p_feats is not None else emb
    t_p = batch.p_ids.shape[1]
    for layer in range(cfg.k_layers):
        if cfg.recurrence == "cgru":
            fwd = unroll_batched(
                tape,
                cell_nodes(tape, f"layer{layer}.fwd", True),
                x,
                batch.fwd_plan,
                cfg.d,
                cfg.alpha_mode,
            )
            bwd = unroll_batched(
                tape,
                cell_nodes(tape, f"layer{layer}.bwd", True),
                x,
                batch.bwd_plan,
                cfg.d,
                cfg.alpha_mode,
            )
        else:
            fwd = unroll_batched_gru(
                tape,
                cell_nodes(tape, f"layer{layer}.fwd", False),
                x,
                np.arange(t_p),
                batch.p_mask,
                cfg.d,
            )
            bwd = unroll_batched_gru(
                tape,
                cell_nodes(tape, f"layer{layer}.bwd", False),
                x,
                np.arange(t_p - 1, -1, -1),
                batch.p_mask,
                cfg.d,
            )
        states = ops.concat([fwd, bwd])
        if layer < cfg.k_layers - 1:
            x = gated_attention(states, q_tokens, batch.q_mask)
            if train and cfg.dropout > 0.0:
                x = ops.dropout(x, cfg.dropout, drop_rng)
        else:
            x = states
    return x


def reader_forward(
    tape: Tape,
    cfg: ReaderConfig,
    batch: Batch,
    train: bool = False,
    drop_rng: Optional[np.random.Generator] = None,
) -> tuple[Tensor, Tensor]:
    """Build the full graph; returns (mean loss scalar, candidate/label probs)."""
    q_tokens, q_summary = _encode_question(tape, cfg, batch)
    passage = _encode_passage(tape, cfg, batch, q_tokens, train, drop_rng)
    b = batch.size

    if cfg.answer_head == "attention_sum":
        proj = ops.matmul(q_summary, tape.param("head.W"))  # (B, 2d)
        scores = ops.sum_axis(
            ops.mul(passage, ops.reshape(proj, (b, 1, 2 * cfg.d))), axis=-1
        )  # (B, Tp)
        scores = ops.add(scores, tape.const((1.0 - batch.p_mask) * NEG_BIG))
        token_attn = ops.softmax(scores, axis=-1)
        raw = ops.reshape(
            ops.matmul(tape.const(batch.agg), ops.reshape(token_attn, (*token_attn.shape, 1))),
            batch.cand_mask.shape,
        )  # (B, nc): mass on each candidate's mention starts
        probs = ops.div(raw, ops.sum_axis(raw, axis=-1, keepdims=True))
        loss = ops.mean_all(ops.cross_entropy(probs, batch.targets))
        return loss, probs

    masked = ops.mul(passage, tape.const(batch.p_mask[:, :, None]))
    mean_p = ops.div(
        ops.sum_axis(masked, axis=1), tape.const(batch.lengths[:, None].astype(float))
    )
    feats = ops.concat([q_summary, mean_p])
    logits = ops.add(ops.matmul(feats, tape.param("head.W")), tape.param("head.b"))
    probs = ops.softmax(logits, axis=-1)
    loss = ops.mean_all(ops.cross_entropy(probs, batch.label_targets))
    return loss, probs


def predict_batch(params: Parameters, cfg: ReaderConfig, batch: Batch) -> dict:
    """Evaluation pass: per-instance loss, predictions, correctness."""
    tape = Tape(params)
    q_tokens, q_summary = _encode_question(tape, cfg, batch)
    passage = _encode_passage(tape, cfg, batch, q_tokens, train=False, drop_rng=None)
    b = batch.size
    if cfg.answer_head == "attention_sum":
        proj = ops.matmul(q_summary, tape.param("head.W"))
        scores = ops.sum_axis(ops.mul(passage, ops.reshape(proj, (b, 1, 2 * cfg.d))), axis=-1)
        scores = ops.add(scores, tape.const((1.0 - batch.p_mask) * NEG_BIG))
        token_attn = ops.softmax(scores, axis=-1)
        raw = ops.reshape(
            ops.matmul(tape.const(batch.agg), ops.reshape(token_attn, (*token_attn.shape, 1))),
            batch.cand_mask.shape,
        )
        probs = (raw.data / raw.data.sum(axis=-1, keepdims=True)) * batch.cand_mask
        losses = -np.log(
            np.maximum(probs[np.arange(b), batch.targets], 1e-12)
        )
        pred_idx = probs.argmax(axis=-1)
        preds = [batch.candidate_texts[i][pred_idx[i]] for i in range(b)]
    else:
        masked = passage.data * batch.p_mask[:, :, None]
        mean_p = masked.sum(axis=1) / batch.lengths[:, None]
        feats = np.concatenate([q_summary.data, mean_p], axis=-1)
        logits = feats @ params.value("head.W") + params.value("head.b")
        shifted = np.exp(logits - logits.max(axis=-1, keepdims=True))
        probs = shifted / shifted.sum(axis=-1, keepdims=True)
        losses = -np.log(np.maximum(probs[np.arange(b), batch.label_targets], 1e-12))
        preds = [None] * b  # resolved by the caller through its label list
        pred_idx = probs.argmax(axis=-1)
    return {
        "probs": probs,
        "losses": losses,
        "pred_index": pred_idx,
        "predictions": preds,
    }

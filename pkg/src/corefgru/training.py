"""Training, evaluation, and annotation-ablation runs.

SGD with classical momentum, a global gradient-norm clip, and a step
learning-rate schedule that halves every ``lr_halving_interval`` updates.
Everything that draws randomness (init, shuffling, dropout) runs off seeds
derived from the config seed, so two runs with the same config and data
produce identical metric histories (wall times aside) and identical
weights.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .data import RCInstance
from .errors import DivergenceError, LabelError
from .reader import (
    Batch,
    CorruptionSpec,
    ReaderConfig,
    Vocab,
    build_labels,
    build_vocab,
    init_reader_params,
    make_batch,
    predict_batch,
    reader_forward,
)
from .tape import Parameters, Tape


@dataclass
class TrainConfig:
    # model
    d: int = 32
    k_layers: int = 2
    emb_dim: int = 32
    dropout: float = 0.0
    recurrence: str = "cgru"
    alpha_mode: str = "two_key"
    query_feature: bool = True
    cluster_onehot: bool = False
    c_max: int = 8
    answer_head: str = "attention_sum"
    # optimization
    lr: float = 0.3
    momentum: float = 0.9
    clip_norm: float = 10.0
    lr_halving_interval: int = 0  # updates per halving; 0 keeps lr constant
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    eval_batch_size: int = 64

    def reader(self) -> ReaderConfig:
        return ReaderConfig(
            d=self.d,
            k_layers=self.k_layers,
            emb_dim=self.emb_dim,
            dropout=self.dropout,
            recurrence=self.recurrence,
            alpha_mode=self.alpha_mode,
            query_feature=self.query_feature,
            cluster_onehot=self.cluster_onehot,
            c_max=self.c_max,
            answer_head=self.answer_head,
        )

    @classmethod
    def from_mapping(cls, m: dict[str, str]) -> "TrainConfig":
        def to_bool(s: str) -> bool:
            low = s.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {s!r}")

        by_type = {"bool": to_bool, "int": int, "float": float, "str": str}
        casts = {f.name: by_type[f.type] for f in fields(cls)}
        kwargs = {}
        for key, value in m.items():
            if key not in casts:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = casts[key](value)
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v).lower() if isinstance(v, bool) else str(v)
        return out


@dataclass
class MetricsRow:
    setting: str
    update: int
    split: str
    accuracy: float
    mean_loss: float
    exp_neg_loss: float
    wall_time_s: float


METRICS_COLUMNS = ("setting", "update", "split", "accuracy", "mean_loss", "exp_neg_loss", "wall_time_s")


def write_metrics_csv(path: Union[str, Path], rows: Sequence[MetricsRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.setting,
                    r.update,
                    r.split,
                    f"{r.accuracy:.6f}",
                    f"{r.mean_loss:.6f}",
                    f"{r.exp_neg_loss:.6f}",
                    f"{r.wall_time_s:.3f}",
                ]
            )


def _batched(items: Sequence, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def evaluate(
    params: Parameters,
    cfg: ReaderConfig,
    instances: Sequence[RCInstance],
    vocab: Vocab,
    labels: Optional[list[str]] = None,
    batch_size: int = 64,
    corruption: Optional[CorruptionSpec] = None,
) -> tuple[float, float]:
    """(accuracy, mean loss) over ``instances``."""
    label_index = {l: i for i, l in enumerate(labels)} if labels is not None else None
    n_correct = 0
    loss_sum = 0.0
    for chunk in _batched(list(instances), batch_size):
        batch = make_batch(chunk, vocab, cfg, corruption=corruption, labels=label_index)
        out = predict_batch(params, cfg, batch)
        loss_sum += float(out["losses"].sum())
        if cfg.answer_head == "attention_sum":
            preds = out["predictions"]
        else:
            preds = [labels[i] for i in out["pred_index"]]
        n_correct += sum(p == a for p, a in zip(preds, batch.answers))
    n = len(instances)
    return n_correct / n, loss_sum / n


@dataclass
class TrainResult:
    params: Parameters
    vocab: Vocab
    labels: Optional[list[str]]
    best_dev_accuracy: float
    best_update: int
    history: list[MetricsRow] = field(default_factory=list)


def learning_rate(lr0: float, update: int, halving_interval: int) -> float:
    if halving_interval <= 0:
        return lr0
    return lr0 * 0.5 ** (update // halving_interval)


def train(
    cfg: TrainConfig,
    train_insts: Sequence[RCInstance],
    dev_insts: Sequence[RCInstance],
    setting: str = "default",
    corruption: Optional[CorruptionSpec] = None,
    log=None,
) -> TrainResult:
    rcfg = cfg.reader()
    vocab = build_vocab(train_insts)
    labels = build_labels(train_insts) if cfg.answer_head == "classify" else None
    label_index = {l: i for i, l in enumerate(labels)} if labels is not None else None

    init_rng = np.random.default_rng(cfg.seed)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    drop_rng = np.random.default_rng([cfg.seed, 2])
    params = init_reader_params(rcfg, len(vocab), init_rng, len(labels) if labels else 0)
    velocity = {name: np.zeros_like(params.value(name)) for name in params.names()}

    history: list[MetricsRow] = []
    best_acc = -1.0
    best_update = 0
    best_values = params.clone_values()
    update = 0
    t0 = time.perf_counter()
    train_list = list(train_insts)

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_list))
        for chunk_ids in _batched(order, cfg.batch_size):
            chunk = [train_list[int(i)] for i in chunk_ids]
            batch = make_batch(chunk, vocab, rcfg, corruption=corruption, labels=label_index)
            tape = Tape(params)
            loss, _ = reader_forward(tape, rcfg, batch, train=True, drop_rng=drop_rng)
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                raise DivergenceError(update, f"non-finite loss at update {update}")
            params.zero_grads()
            tape.backward(loss)
            norm = params.global_grad_norm()
            if not np.isfinite(norm):
                raise DivergenceError(update, f"non-finite gradient at update {update}")
            scale = cfg.clip_norm / norm if cfg.clip_norm > 0 and norm > cfg.clip_norm else 1.0
            lr = learning_rate(cfg.lr, update, cfg.lr_halving_interval)
            for name in params.names():
                v = velocity[name]
                v *= cfg.momentum
                v += scale * params.grad(name)
                params.set_value(name, params.value(name) - lr * v)
            update += 1

        dev_acc, dev_loss = evaluate(
            params, rcfg, dev_insts, vocab, labels, cfg.eval_batch_size, corruption
        )
        row = MetricsRow(
            setting=setting,
            update=update,
            split="dev",
            accuracy=dev_acc,
            mean_loss=dev_loss,
            exp_neg_loss=float(np.exp(-dev_loss)),
            wall_time_s=time.perf_counter() - t0,
        )
        history.append(row)
        if log is not None:
            log(f"[{setting}] epoch {epoch + 1}/{cfg.epochs} update {update} "
                f"dev_acc {dev_acc:.3f} dev_loss {dev_loss:.4f}")
        if dev_acc > best_acc:
            best_acc = dev_acc
            best_update = update
            best_values = params.clone_values()

    params.load_values(best_values)
    return TrainResult(
        params=params,
        vocab=vocab,
        labels=labels,
        best_dev_accuracy=best_acc,
        best_update=best_update,
        history=history,
    )


# ---------------------------------------------------------------------------
# ablations


def ablation_settings(mode: str, cfg: TrainConfig) -> list[tuple[str, TrainConfig, Optional[CorruptionSpec]]]:
    """(setting name, config, corruption) triples an ablation mode expands to."""
    base = cfg.to_mapping()

    def variant(**overrides) -> TrainConfig:
        m = dict(base)
        m.update({k: str(v).lower() if isinstance(v, bool) else str(v) for k, v in overrides.items()})
        return TrainConfig.from_mapping(m)

    if mode == "remove":
        return [
            (f"remove-{f:g}", variant(), CorruptionSpec("remove-fraction", f, cfg.seed) if f > 0 else None)
            for f in (0.0, 0.5, 1.0)
        ]
    if mode == "randomize":
        return [("randomize", variant(), CorruptionSpec("randomize", 1.0, cfg.seed))]
    if mode == "onehot":
        return [("gru-onehot", variant(recurrence="gru", cluster_onehot=True), None)]
    if mode == "gru":
        return [("gru", variant(recurrence="gru"), None)]
    raise ValueError(f"unknown ablation mode {mode!r}")


def run_ablation(
    cfg: TrainConfig,
    mode: str,
    train_insts: Sequence[RCInstance],
    dev_insts: Sequence[RCInstance],
    test_insts: Sequence[RCInstance],
    log=None,
) -> list[dict]:
    rows = []
    for setting, scfg, corruption in ablation_settings(mode, cfg):
        result = train(scfg, train_insts, dev_insts, setting=setting, corruption=corruption, log=log)
        test_acc, _ = evaluate(
            result.params,
            scfg.reader(),
            test_insts,
            result.vocab,
            result.labels,
            scfg.eval_batch_size,
            corruption,
        )
        rows.append(
            {
                "setting": setting,
                "dev_accuracy": result.best_dev_accuracy,
                "test_accuracy": test_acc,
            }
        )
        if log is not None:
            log(f"[{setting}] dev {result.best_dev_accuracy:.3f} test {test_acc:.3f}")
    return rows


def write_ablation_csv(path: Union[str, Path], rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(("setting", "dev_accuracy", "test_accuracy"))
        for r in rows:
            w.writerow([r["setting"], f"{r['dev_accuracy']:.6f}", f"{r['test_accuracy']:.6f}"])

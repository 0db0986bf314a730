"""Command line entry points.

Subcommands: ``gen`` (synthesize task data), ``annotate`` (exact-match
coreference clusters), ``train``, ``eval``, ``ablate`` (annotation-quality
and architecture ablations), and ``gradcheck`` (finite-difference audit of
the full model's gradients).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .coref import TokenizedDocument, cap_clusters, exact_match_annotator, filter_clusters
from .data import read_config, read_jsonl, write_jsonl
from .errors import CorefGRUError
from .gradcheck import grad_check
from .reader import Vocab, build_vocab, init_reader_params, make_batch, reader_forward
from .taskgen import GenSpec, generate
from .tape import Tape
from .training import (
    TrainConfig,
    evaluate,
    run_ablation,
    train,
    write_ablation_csv,
    write_metrics_csv,
)


def cmd_gen(args) -> int:
    mapping = read_config(args.spec)
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    spec = GenSpec.from_mapping(mapping)
    instances = generate(spec, args.n)
    write_jsonl(args.out, instances)
    print(f"wrote {len(instances)} instances to {args.out}")
    return 0


def cmd_annotate(args) -> int:
    instances = read_jsonl(getattr(args, "in"))
    fixed_lexicon = None
    if args.lexicon:
        fixed_lexicon = {
            line.strip().lower()
            for line in Path(args.lexicon).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
    for inst in instances:
        doc = TokenizedDocument(inst.passage_tokens)
        lexicon = fixed_lexicon
        if lexicon is None:
            lexicon = {c.text.lower() for c in inst.candidates}
            if inst.head_entity:
                lexicon.add(inst.head_entity.lower())
        clusters = exact_match_annotator(doc, lexicon)
        if args.filter_candidates:
            clusters = filter_clusters(
                clusters, doc, {c.text.lower() for c in inst.candidates}, inst.head_entity
            )
        if args.cap:
            clusters = cap_clusters(clusters, args.cap)
        inst.clusters = clusters.to_spans()
    write_jsonl(args.out, instances)
    print(f"annotated {len(instances)} instances into {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig.from_mapping(read_config(args.config))
    train_insts = read_jsonl(args.train)
    dev_insts = read_jsonl(args.dev)
    result = train(cfg, train_insts, dev_insts, setting=cfg.recurrence, log=print)
    save_checkpoint(args.out, result.params, cfg.to_mapping(), result.vocab.tokens, result.labels)
    metrics_path = str(args.out) + ".metrics.csv"
    write_metrics_csv(metrics_path, result.history)
    print(
        f"best dev accuracy {result.best_dev_accuracy:.4f} at update {result.best_update}; "
        f"checkpoint {args.out}, metrics {metrics_path}"
    )
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    cfg = TrainConfig.from_mapping(ckpt.config)
    instances = read_jsonl(args.data)
    acc, loss = evaluate(
        ckpt.params, cfg.reader(), instances, Vocab(ckpt.vocab), ckpt.labels, cfg.eval_batch_size
    )
    print(f"n={len(instances)} accuracy={acc:.4f} mean_loss={loss:.4f} exp_neg_loss={np.exp(-loss):.4f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = TrainConfig.from_mapping(read_config(args.config))
    data_dir = Path(args.data_dir)
    splits = {}
    for name in ("train", "dev", "test"):
        path = data_dir / f"{name}.jsonl"
        if not path.exists():
            raise FileNotFoundError(f"expected {path}")
        splits[name] = read_jsonl(path)
    rows = run_ablation(cfg, args.mode, splits["train"], splits["dev"], splits["test"], log=print)
    out = data_dir / f"ablation-{args.mode}.csv"
    write_ablation_csv(out, rows)
    for r in rows:
        print(f"{r['setting']}: dev {r['dev_accuracy']:.4f} test {r['test_accuracy']:.4f}")
    print(f"wrote {out}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = TrainConfig.from_mapping(read_config(args.config))
    rcfg = cfg.reader()
    spec = GenSpec(task="two-facts", num_statements=3, num_people=2, num_locations=3,
                   num_objects=1, seed=cfg.seed)
    instances = generate(spec, 4)
    vocab = build_vocab(instances)
    params = init_reader_params(rcfg, len(vocab), np.random.default_rng(cfg.seed))
    batch = make_batch(instances, vocab, rcfg)

    def build_loss(tape: Tape):
        loss, _ = reader_forward(tape, rcfg, batch)
        return loss

    report = grad_check(params, build_loss, eps=args.eps, tol=args.tol,
                        max_coords=args.max_coords or None)
    print(report.format())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corefgru", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic task instances")
    p.add_argument("--spec", required=True, help="key=value generation spec file")
    p.add_argument("--n", type=int, required=True, help="number of instances")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("annotate", help="add exact-match coreference clusters")
    p.add_argument("--in", required=True, help="input JSONL path")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--lexicon", default=None, help="entity lexicon file, one entry per line")
    p.add_argument("--cap", type=int, default=0, help="keep at most this many clusters")
    p.add_argument(
        "--filter-candidates",
        action="store_true",
        help="drop clusters not tied to a candidate or the head entity",
    )
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train a reader")
    p.add_argument("--config", required=True, help="key=value training config file")
    p.add_argument("--train", required=True, help="training JSONL path")
    p.add_argument("--dev", required=True, help="dev JSONL path")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="JSONL path to score")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run an ablation suite")
    p.add_argument("--config", required=True, help="key=value training config file")
    p.add_argument("--mode", required=True, choices=("remove", "randomize", "onehot", "gru"))
    p.add_argument("--data-dir", required=True, help="directory with train/dev/test.jsonl")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference audit of model gradients")
    p.add_argument("--config", required=True, help="key=value training config file")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-coords", type=int, default=300, help="coordinate budget (0 = all)")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorefGRUError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

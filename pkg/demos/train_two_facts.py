#!/usr/bin/env python3
"""Train the coreference-biased reader against a plain-GRU baseline.

Generates a small two-facts dataset where pronouns frequently hide the
actor's name, trains both recurrences under identical budgets, and prints
the dev-accuracy trajectories side by side.  A few minutes on a laptop CPU
with the default sizes; shrink --n-train/--epochs for a quicker look.

    python3 demos/train_two_facts.py --n-train 300 --epochs 8
"""

import argparse

from corefgru.taskgen import GenSpec, generate
from corefgru.training import TrainConfig, train


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n-train", type=int, default=300)
    p.add_argument("--n-dev", type=int, default=100)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--pronoun-rate", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=7)
    return p


def main():
    args = make_parser().parse_args()
    spec = dict(task="two-facts", num_statements=12, num_people=4,
                num_locations=6, num_objects=3, pronoun_rate=args.pronoun_rate)
    train_insts = generate(GenSpec(**spec, seed=101), args.n_train)
    dev_insts = generate(GenSpec(**spec, seed=202), args.n_dev)

    histories = {}
    for recurrence in ("cgru", "gru"):
        cfg = TrainConfig(d=args.d, k_layers=2, emb_dim=args.d, c_max=4,
                          recurrence=recurrence, lr=0.3, batch_size=32,
                          epochs=args.epochs, seed=args.seed)
        result = train(cfg, train_insts, dev_insts, setting=recurrence, log=print)
        histories[recurrence] = result
        print(f"{recurrence}: best dev accuracy {result.best_dev_accuracy:.3f}\n")

    print("epoch   cgru    gru")
    rows = zip(histories["cgru"].history, histories["gru"].history)
    for epoch, (c, g) in enumerate(rows, start=1):
        print(f"{epoch:5d}   {c.accuracy:.3f}   {g.accuracy:.3f}")
    gap = histories["cgru"].best_dev_accuracy - histories["gru"].best_dev_accuracy
    print(f"\ncoreference links are worth {gap:+.3f} accuracy on this task")


if __name__ == "__main__":
    main()

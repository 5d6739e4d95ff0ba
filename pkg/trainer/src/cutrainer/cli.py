"""Command line: train a detector / evaluate a weights file."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .evaluate import evaluate
from .model import export_weights
from .train import TrainConfig, train


def cmd_train(args):
    config = TrainConfig(dropout=args.dropout, batch=args.batch, lr=args.lr,
                         split=args.split, epochs=args.epochs,
                         patience=args.patience, monitor=args.monitor,
                         seed=args.seed)
    result = train(args.data, config)
    export_weights(result.model, args.out)
    recalls = result.val_recall_at_f01
    print(f"wrote {args.out}; validation recall@F=0.1: "
          f"start={recalls['start']:.4f} tail={recalls['tail']:.4f}")


def cmd_evaluate(args):
    table = evaluate(args.weights, args.data,
                     np.linspace(0.0, 1.0, args.points))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow(["label", "threshold", "false_alarm", "recall"])
    for row in table:
        writer.writerow([row.label, f"{row.threshold:.6g}",
                         f"{row.false_alarm:.6g}", f"{row.recall:.6g}"])
    if args.out:
        out.close()
        print(f"wrote {args.out}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cutrainer", description="Boundary-detection CNN trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--batch", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--monitor", choices=["recall", "loss"], default="recall")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="ROC table for a weights file")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()

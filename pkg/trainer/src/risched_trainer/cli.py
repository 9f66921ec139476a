"""Trainer command line: train one stage, export weights (and fixtures)."""

from __future__ import annotations

import argparse
import sys

from .fixtures import write_fixture_bundle
from .scenario import load_scenario
from .train import train_ris_gnn, train_scheduling_gnn
from .weights import export_weights


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risched-train",
                                     description="train the scheduling / RIS graph networks")
    parser.add_argument("--config", required=True, help="scenario file (shared format)")
    parser.add_argument("--stage", choices=("scheduling", "ris"), required=True)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--samples-per-epoch", type=int, default=10_000)
    parser.add_argument("--batch-size", type=int, default=500)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="weight file to write")
    parser.add_argument("--fixtures", help="optional directory for golden fixtures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.config)
        kwargs = dict(epochs=args.epochs, lr=args.lr,
                      samples_per_epoch=args.samples_per_epoch,
                      batch_size=args.batch_size, hidden=args.hidden,
                      seed=args.seed)
        if args.stage == "scheduling":
            result = train_scheduling_gnn(sc, **kwargs)
        else:
            result = train_ris_gnn(sc, **kwargs)
        export_weights(result.net, result.norm_mean, result.norm_scale, args.out)
        print(f"holdout loss {result.holdout_before:.6g} -> {result.holdout_after:.6g}")
        print(f"weights -> {args.out}")
        if args.fixtures:
            paths = write_fixture_bundle(args.fixtures, result.net, result.norm_mean,
                                         result.norm_scale, sc, seed=args.seed)
            print(f"fixtures -> {paths['outputs']}")
        return 0
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

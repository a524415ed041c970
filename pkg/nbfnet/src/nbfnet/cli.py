"""nbfnet command line: train on exported beam tensors, emit (G, R) tensors."""

from __future__ import annotations

import argparse
import sys

from .model import NetConfig
from .train import TrainConfig, emit_tensors, load_checkpoint, train_toy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbfnet",
        description="Causal neural beam-weight estimator over NBF1 tensors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="overfit exported utterances")
    p.add_argument("--export-dir", required=True,
                   help="directory with export_manifest.json")
    p.add_argument("--out", required=True, help="checkpoint/log directory")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("emit", help="write (G, R) tensors for a dataset")
    p.add_argument("--export-dir", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit)
    return parser


def cmd_train(args) -> int:
    from .train import load_export

    num_beams, _ = load_export(args.export_dir)
    net_cfg = NetConfig(num_beams=num_beams, width=args.width)
    train_cfg = TrainConfig(steps=args.steps, seed=args.seed)
    _, log = train_toy(args.export_dir, args.out, net_cfg, train_cfg)
    first, last = log["entries"][0], log["entries"][-1]
    print(f"trained {args.steps} steps: loss {first['loss']:.4f} -> "
          f"{last['loss']:.4f}; wrote {args.out}/checkpoint.pt")
    return 0


def cmd_emit(args) -> int:
    model = load_checkpoint(args.checkpoint)
    written = emit_tensors(model, args.export_dir, args.out)
    print(f"emitted (G, R) tensors for {len(written)} utterances to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI surface: report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

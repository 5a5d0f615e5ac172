"""Sidecar command line: serve the encoder endpoint or fine-tune on pairs."""
from __future__ import annotations

import argparse
import sys

from .server import serve
from .training import finetune_bi, finetune_cross

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linkforge-sidecar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve token/pair embeddings over HTTP")
    p.add_argument("--model", required=True, help="model directory or tiny:<seed>[:dim]")
    p.add_argument("--port", type=int, default=8191)
    p.add_argument("--max-length", type=int, default=128, dest="max_length")

    p = sub.add_parser("finetune-bi", help="contrastive fine-tuning on a pairs file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("finetune-cross", help="pair-classification fine-tuning")
    p.add_argument("--pairs", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            serve(args.model, args.port, max_length=args.max_length)
            return 0
        if args.command == "finetune-bi":
            out, losses = finetune_bi(
                args.pairs, args.corpus, args.model, args.out,
                gamma=args.gamma, epochs=args.epochs, lr=args.lr, seed=args.seed,
            )
            print(f"saved fine-tuned model to {out} "
                  f"(first loss {losses[0]:.4f}, last loss {losses[-1]:.4f})")
            return 0
        if args.command == "finetune-cross":
            out, losses = finetune_cross(
                args.pairs, args.corpus, args.model, args.out,
                epochs=args.epochs, lr=args.lr, seed=args.seed,
            )
            print(f"saved fine-tuned model and head.json to {out} "
                  f"(first loss {losses[0]:.4f}, last loss {losses[-1]:.4f})")
            return 0
        raise AssertionError(f"unhandled command {args.command}")
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

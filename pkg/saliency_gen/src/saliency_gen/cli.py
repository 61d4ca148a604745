"""CLI: infer saliency FSEQ files and manage weight files."""

from __future__ import annotations

import argparse
import logging
import sys

from .fseq import FseqError
from .infer import ModelLoadError, infer_saliency
from .model import init_weights_file

logger = logging.getLogger("saliency_gen")


def cmd_infer(args) -> int:
    count = infer_saliency(args.frames, args.weights, args.out,
                           batch_size=args.batch_size)
    logger.info("wrote %s (%d maps)", args.out, count)
    return 0


def cmd_init_weights(args) -> int:
    init_weights_file(args.out, seed=args.seed)
    logger.info("wrote %s (seed %d)", args.out, args.seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saliency-gen",
        description="Visual-attention maps for FSEQ frame sequences")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="frames FSEQ -> saliency FSEQ")
    p.add_argument("--frames", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=8)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("init-weights",
                       help="write a reproducible random-init weight file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init_weights)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FseqError, ModelLoadError, OSError) as exc:
        logger.error("%s", exc)
        return 2
    except Exception:  # noqa: BLE001
        logger.exception("internal error")
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Trainer command line: `train` and `predict`."""

import argparse
import sys

from phasorloc.errors import FormatError, ValidationError

from .config import ToyNetConfig, read_train_config
from .predict import predict
from .train import train


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phasorloc-trainer",
        description="toy-scale training harness for complex-domain targets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train")
    p.add_argument("--data", required=True,
                   help="dataset dir from `phasorloc simulate` (frames/ + config.txt)")
    p.add_argument("--maps", required=True,
                   help="target dir from `phasorloc encode`")
    p.add_argument("--config", help="train.* key = value file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--upsample-mode", dest="upsample_mode",
                   choices=["bilinear", "nearest"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frames", required=True, help="directory of frame grids")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            cfg = read_train_config(args.config) if args.config else ToyNetConfig()
            if args.epochs is not None:
                cfg.epochs = args.epochs
            if args.seed is not None:
                cfg.seed = args.seed
            if args.upsample_mode is not None:
                cfg.upsample_mode = args.upsample_mode
            path = train(args.data, args.maps, cfg, args.out)
            print(f"checkpoint -> {path}")
        else:
            written = predict(args.checkpoint, args.frames, args.out)
            print(f"wrote {len(written)} map pairs -> {args.out}")
        return 0
    except (ValidationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

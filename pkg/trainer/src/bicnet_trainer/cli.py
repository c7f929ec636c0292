"""Command line: dataset generation, training, and MC-dropout inference."""

from __future__ import annotations

import argparse
import sys

from .datagen import FAMILIES, generate_dataset
from .infer import infer_directory
from .model import load_model
from .train import TrainConfig, train


def cmd_data(args) -> None:
    seeds = range(args.start_seed, args.start_seed + args.scenes)
    n = generate_dataset(
        args.out,
        family=args.family,
        scene_seeds=seeds,
        views_per_scene=args.views,
        image_size=args.image_size,
        threads=args.threads,
    )
    print(f"wrote {n} images to {args.out}")


def cmd_train(args) -> None:
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config.seed = args.seed
    _, curve = train(args.data_dir, args.out, config, loss_curve_path=args.loss_curve)
    print(f"epochs: {len(curve)}  first loss: {curve[0]:.4f}  last loss: {curve[-1]:.4f}")


def cmd_infer(args) -> None:
    model = load_model(args.model)
    names = infer_directory(
        model, args.images_dir, args.out_dir, passes=args.passes, seed=args.seed
    )
    print(f"wrote {len(names)} prediction stacks to {args.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bicnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("data", help="generate a dataset via the labeling toolkit")
    p.add_argument("--out", required=True)
    p.add_argument("--family", choices=sorted(FAMILIES), default="train")
    p.add_argument("--scenes", type=int, default=25)
    p.add_argument("--views", type=int, default=20)
    p.add_argument("--start-seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=96)
    p.add_argument("--threads", type=int, default=2)
    p.set_defaults(func=cmd_data)

    p = sub.add_parser("train", help="train the toy network")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--config", help="TrainConfig JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--loss-curve", help="write the loss curve JSON here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="MC-dropout inference writing prediction stacks")
    p.add_argument("--model", required=True)
    p.add_argument("--images-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--passes", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_infer)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Adapter CLI: run a detector over an image directory, emit prediction files."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .backends import available_models
from .config import AdapterConfig, AdapterError
from .runner import run_inference
from .validate import validate_output


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodadapter",
        description="Run an open-vocabulary detector and emit oodeval prediction files",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_run = subparsers.add_parser("run", help="run inference over an image directory")
    p_run.add_argument("--model", required=True, choices=available_models())
    p_run.add_argument(
        "--prompts", required=True, help="semicolon-separated prompt texts"
    )
    p_run.add_argument("--images", required=True, help="image directory")
    p_run.add_argument("--out", required=True, help="prediction file to write")
    p_run.add_argument("--checkpoint", default="", help="checkpoint reference")
    p_run.add_argument("--device", default="cpu")
    p_run.add_argument("--score-floor", type=float, default=0.05)
    p_run.add_argument(
        "--tta", default="", help="comma-separated transforms (hflip,rot90cw,rot90ccw)"
    )
    p_run.add_argument(
        "--roi-prompt",
        default="",
        help='prompt emitted under the reserved stream id "roi" (e.g. "road")',
    )
    p_run.set_defaults(func=cmd_run)

    p_validate = subparsers.add_parser(
        "validate", help="check an emission against the toolkit's loader"
    )
    p_validate.add_argument("prediction_file")
    p_validate.add_argument("--images", default=None, help="companion image-record file")
    p_validate.set_defaults(func=cmd_validate)

    return parser


def cmd_run(args: argparse.Namespace) -> int:
    prompts = tuple(p.strip() for p in args.prompts.split(";") if p.strip())
    config = AdapterConfig(
        model=args.model,
        prompts=prompts,
        checkpoint=args.checkpoint,
        device=args.device,
        score_floor=args.score_floor,
        tta=tuple(t for t in args.tta.split(",") if t.strip()),
        roi_prompt=args.roi_prompt,
    )
    result = run_inference(config, args.images, args.out)
    print(f"wrote {result.predictions}")
    print(f"wrote {result.image_records}")
    for kind, path in result.tta_predictions.items():
        print(f"wrote {path} ({kind})")
    print(f"wrote {result.manifest}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    code = validate_output(args.prediction_file, args.images)
    print("ok" if code == 0 else f"rejected (exit {code})")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AdapterError as exc:
        print(f"adapter error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

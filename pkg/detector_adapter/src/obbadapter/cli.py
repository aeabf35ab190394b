"""Command-line entry point: detect vehicles in one image, write JSON."""

from __future__ import annotations

import argparse
import sys

from .adapter import AdapterConfig, detect_image, write_detection_file
from .backends import CLASSICAL_MODEL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detect",
        description="Run an oriented-box vehicle detector over image tiles "
                    "and write canonical detection JSON.")
    parser.add_argument("--image", required=True, help="input image path")
    parser.add_argument("--model", required=True,
                        help=f"detector checkpoint path, or '{CLASSICAL_MODEL}' "
                             "for the built-in threshold detector")
    parser.add_argument("--out", required=True, help="output JSON path")
    parser.add_argument("--tile", type=int, default=1024)
    parser.add_argument("--overlap", type=int, default=200)
    parser.add_argument("--min-conf", type=float, default=0.1)
    parser.add_argument("--category", action="append", default=None,
                        help="vehicle category name (repeatable; default "
                             "small-vehicle)")
    parser.add_argument("--image-id", default=None,
                        help="image id for the document (default: file stem)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            model_path=args.model,
            tile_size=args.tile,
            overlap=args.overlap,
            min_conf=args.min_conf,
            category_names=tuple(args.category or ("small-vehicle",)),
        )
        document = detect_image(args.image, config, image_id=args.image_id)
        write_detection_file(document, args.out)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{len(document['detections'])} detections written to {args.out}",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

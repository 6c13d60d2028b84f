"""Command-line entry point for the contextual embedding exporter."""

import argparse
import logging
import sys

from .corpusio import CorpusReadError
from .export import ExportConfig, ExportError, export


def build_parser():
    parser = argparse.ArgumentParser(
        prog="keyfuse-export",
        description="Export token-aligned contextual vectors from a transformer encoder.",
    )
    parser.add_argument("--corpus", required=True, help="corpus path")
    parser.add_argument("--format", default="jsonl", choices=("jsonl", "inspec"))
    parser.add_argument("--model", required=True,
                        help="encoder model id or local directory")
    parser.add_argument("--layer", default="last",
                        help="'last' (default), 'avg', or a hidden-state index")
    parser.add_argument("--pooling", default="mean", choices=("mean", "first"))
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExportConfig(
            corpus_path=args.corpus,
            corpus_format=args.format,
            model=args.model,
            layer=args.layer,
            pooling=args.pooling,
            batch_size=args.batch_size,
            max_length=args.max_length,
            out_path=args.out,
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        export(config)
    except CorpusReadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

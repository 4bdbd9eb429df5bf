"""Command-line entry point: raw dump in, corpus directory out.

Reads a JSON-lines metadata file (optionally resolving image names
against an image directory and taking pairs from a TSV), extracts both
modalities, and writes the corpus files plus ``featurizer_manifest.json``
into the output directory. Logs go to stderr. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .assemble import SPLIT_NAMES, featurize
from .records import FeaturizerError, read_records


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def read_pairs_file(path: str | Path) -> list[tuple[str, str, str]]:
    """Parse head/tail/split TSV rows; split names are validated later."""
    pairs: list[tuple[str, str, str]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FeaturizerError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            pairs.append((fields[0], fields[1], fields[2]))
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tnfc-featurizer",
        description="Extract per-item visual and textual feature files from a raw dump.",
    )
    parser.add_argument("--metadata", required=True, help="JSON-lines item metadata")
    parser.add_argument("--images", help="directory image names are relative to")
    parser.add_argument("--pairs", help=f"TSV of head/tail/split ({'/'.join(SPLIT_NAMES)})")
    parser.add_argument("--out", required=True, help="output corpus directory")
    parser.add_argument("--min-word-length", type=int, default=None)
    parser.add_argument("--min-item-frequency", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        _log("error: --threads must be >= 1")
        return 2
    for flag in ("min_word_length", "min_item_frequency"):
        value = getattr(args, flag)
        if value is not None and value < 1:
            _log(f"error: --{flag.replace('_', '-')} must be >= 1")
            return 2

    try:
        records = read_records(args.metadata, args.images)
        pairs = read_pairs_file(args.pairs) if args.pairs else []
        kwargs = {}
        if args.min_word_length is not None:
            kwargs["min_word_length"] = args.min_word_length
        if args.min_item_frequency is not None:
            kwargs["min_item_frequency"] = args.min_item_frequency
        summary = featurize(records, args.out, pairs, threads=args.threads, **kwargs)
    except (FeaturizerError, OSError) as exc:
        _log(f"error: {exc}")
        return 1

    _log(
        f"wrote {summary['items']} items to {args.out}: "
        f"visual {summary['visual']['dim']}-D ({summary['visual']['skipped']} skipped), "
        f"textual {summary['textual']['dim']}-D ({summary['textual']['skipped']} skipped)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

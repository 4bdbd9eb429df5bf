"""Assemble a complete corpus directory from raw records.

``write_manifest`` emits the two text files the training side loads —
``items.jsonl`` (one object per item with its category and feature row
indices) and ``pairs.tsv`` (head, tail, split) — with row indices equal
to record order, matching the feature files row for row. ``featurize``
runs both extractors and the manifest writer together and records the
run's settings (including the text-filter thresholds) in
``featurizer_manifest.json``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .records import FeaturizerError, RawItemRecord, validate_records
from .textual import (
    DEFAULT_MIN_ITEM_FREQUENCY,
    DEFAULT_MIN_WORD_LENGTH,
    extract_textual,
)
from .visual import extract_visual

ITEMS_FILENAME = "items.jsonl"
PAIRS_FILENAME = "pairs.tsv"
MANIFEST_FILENAME = "featurizer_manifest.json"
SPLIT_NAMES = ("train", "val", "test")

MODALITIES = ("visual", "textual")


def feature_filename(modality: str) -> str:
    return f"features_{modality}.tnfc"


def write_manifest(
    records: list[RawItemRecord],
    output_dir: str | Path,
    pairs: list[tuple[str, str, str]] = (),
) -> None:
    """Write ``items.jsonl`` and ``pairs.tsv`` for the given records.

    Every item references its row (the record index) in both modality
    files; failed modalities hold zero rows there, keeping indices dense.
    Pairs must connect known item ids and use train/val/test splits.
    """
    validate_records(records)
    output_dir = Path(output_dir)
    known = {record.item_id for record in records}
    for head, tail, split in pairs:
        for item_id in (head, tail):
            if item_id not in known:
                raise FeaturizerError(f"pair references unknown item '{item_id}'")
        if split not in SPLIT_NAMES:
            raise FeaturizerError(
                f"pair ({head}, {tail}) has unknown split '{split}'"
            )

    with open(output_dir / ITEMS_FILENAME, "w") as fh:
        for i, record in enumerate(records):
            fh.write(
                json.dumps(
                    {
                        "item_id": record.item_id,
                        "category_id": record.category_id,
                        "features": {m: i for m in MODALITIES},
                    }
                )
                + "\n"
            )
    with open(output_dir / PAIRS_FILENAME, "w") as fh:
        for head, tail, split in pairs:
            fh.write(f"{head}\t{tail}\t{split}\n")


def featurize(
    records: list[RawItemRecord],
    output_dir: str | Path,
    pairs: list[tuple[str, str, str]] = (),
    min_word_length: int = DEFAULT_MIN_WORD_LENGTH,
    min_item_frequency: int = DEFAULT_MIN_ITEM_FREQUENCY,
    threads: int = 1,
) -> dict:
    """Run both extractors and write a complete corpus directory.

    Returns the run summary that is also written to
    ``featurizer_manifest.json``: per-modality dimensions, row counts,
    skip counts and sidecar names, plus the text-filter thresholds.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    visual = extract_visual(records, output_dir / feature_filename("visual"), threads)
    textual = extract_textual(
        records,
        output_dir / feature_filename("textual"),
        min_word_length,
        min_item_frequency,
    )
    write_manifest(records, output_dir, pairs)

    summary = {
        "items": len(records),
        "pairs": len(pairs),
        "visual": {
            "file": visual.path.name,
            "dim": visual.dim,
            "rows": visual.n_rows,
            "skipped": len(visual.skipped),
            "skip_file": visual.skip_path.name,
        },
        "textual": {
            "file": textual.path.name,
            "dim": textual.dim,
            "rows": textual.n_rows,
            "skipped": len(textual.skipped),
            "skip_file": textual.skip_path.name,
            "min_word_length": min_word_length,
            "min_item_frequency": min_item_frequency,
        },
    }
    with open(output_dir / MANIFEST_FILENAME, "w") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary

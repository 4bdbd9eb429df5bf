"""Textual features: mean of fixed per-word vectors over a filtered vocabulary.

Titles are lowercased and split on non-alphanumerics. The vocabulary
keeps a word only when it is long enough (``min_word_length``,
default 3 characters) and appears in enough distinct items
(``min_item_frequency``, default 5) — rarer and shorter words carry
more noise than signal. An item's row is the mean of the vectors of its
in-vocabulary tokens; items whose text is missing or entirely filtered
get an all-zero row plus a sidecar skip line.

Each word's 300-dimensional vector is derived deterministically from a
hash of the word — the stand-in for a publicly distributed pretrained
word-vector table, which cannot be bundled here. Like such a table, the
map from word to vector is fixed, identical across runs, and never
trained.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

from .records import FeaturizerError, RawItemRecord, validate_records
from .tnfc import write_feature_file
from .visual import ExtractionResult, _write_skip_file

TEXT_DIM = 300
DEFAULT_MIN_WORD_LENGTH = 3
DEFAULT_MIN_ITEM_FREQUENCY = 5

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics; drops empty tokens."""
    return _TOKEN.findall(text.lower())


def word_vector(word: str) -> np.ndarray:
    """The fixed 300-D vector for one word, scaled to roughly unit norm."""
    digest = hashlib.sha256(word.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(TEXT_DIM) / np.sqrt(TEXT_DIM)).astype(np.float32)


def build_vocabulary(
    records: list[RawItemRecord],
    min_word_length: int = DEFAULT_MIN_WORD_LENGTH,
    min_item_frequency: int = DEFAULT_MIN_ITEM_FREQUENCY,
) -> set[str]:
    """Words long enough and present in enough distinct items' texts."""
    item_frequency: dict[str, int] = {}
    for record in records:
        if record.text is None:
            continue
        for word in set(tokenize(record.text)):
            item_frequency[word] = item_frequency.get(word, 0) + 1
    return {
        word
        for word, freq in item_frequency.items()
        if len(word) >= min_word_length and freq >= min_item_frequency
    }


def extract_textual(
    records: list[RawItemRecord],
    output_path: str | Path,
    min_word_length: int = DEFAULT_MIN_WORD_LENGTH,
    min_item_frequency: int = DEFAULT_MIN_ITEM_FREQUENCY,
) -> ExtractionResult:
    """Write one textual feature row per record, in record order.

    Fails when no record carries any text at all; otherwise items with
    missing or fully filtered text get an all-zero row and a sidecar
    skip line.
    """
    validate_records(records)
    if not records:
        raise FeaturizerError("no records to extract textual features from")
    if all(record.text is None for record in records):
        raise FeaturizerError("no record carries text; nothing to extract")
    output_path = Path(output_path)

    vocabulary = build_vocabulary(records, min_word_length, min_item_frequency)
    rows = np.zeros((len(records), TEXT_DIM), dtype=np.float32)
    skipped: list[tuple[str, str]] = []
    for i, record in enumerate(records):
        if record.text is None:
            skipped.append((record.item_id, "no text"))
            continue
        tokens = [t for t in tokenize(record.text) if t in vocabulary]
        if not tokens:
            skipped.append((record.item_id, "all words filtered"))
            continue
        rows[i] = np.mean([word_vector(t) for t in tokens], axis=0).astype(np.float32)

    write_feature_file(output_path, rows)
    result = ExtractionResult(output_path, len(records), TEXT_DIM, skipped)
    _write_skip_file(result)
    return result

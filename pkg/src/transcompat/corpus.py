"""Data model and file ingestion for item-pair compatibility corpora.

A corpus directory holds three kinds of files:

* ``items.jsonl`` - one JSON object per line: ``item_id``, ``category_id``,
  and ``features`` (modality name -> row index into that modality's table).
* ``pairs.tsv`` - tab-separated ``head_id``, ``tail_id``, ``split`` with
  split one of ``train``/``val``/``test``.
* ``features_<modality>.tnfc`` - binary matrix, one per modality: magic
  ``TNFC``, u32 version (1), u64 row count, u32 dim, then row-major
  little-endian float32 values.

All invariants are checked at load time; a loaded :class:`Corpus` is
immutable by convention and safe for concurrent reads.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"TNFC"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIQI")

SPLIT_NAMES = ("train", "val", "test")
ITEMS_FILENAME = "items.jsonl"
PAIRS_FILENAME = "pairs.tsv"


class CorpusError(Exception):
    """A corpus file is missing, malformed, or violates an invariant."""


def feature_filename(modality: str) -> str:
    return f"features_{modality}.tnfc"


def unordered(a: str, b: str) -> tuple[str, str]:
    """Canonical key for an item or category pair, ignoring direction."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Item:
    item_id: str
    category_id: str
    feature_row: dict[str, int]


@dataclass
class FeatureTable:
    modality: str
    dim: int
    rows: np.ndarray  # (n_rows, dim) float32


@dataclass
class PairSet:
    split: str
    pairs: list[tuple[str, str]]


@dataclass(eq=False)
class Corpus:
    items: dict[str, Item]  # insertion order == file order
    categories: list[str]  # sorted registry
    features: dict[str, FeatureTable]
    splits: dict[str, PairSet]
    warnings: list[str] = field(default_factory=list)

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(self.features.keys())

    @cached_property
    def items_by_category(self) -> dict[str, list[str]]:
        by_cat: dict[str, list[str]] = {c: [] for c in self.categories}
        for item in self.items.values():
            by_cat[item.category_id].append(item.item_id)
        return by_cat

    @cached_property
    def positive_keys(self) -> frozenset[tuple[str, str]]:
        """Unordered (item, item) keys of every positive pair, all splits."""
        keys = set()
        for ps in self.splits.values():
            for h, t in ps.pairs:
                keys.add(unordered(h, t))
        return frozenset(keys)

    @cached_property
    def partners(self) -> dict[str, frozenset[str]]:
        """item_id -> items it forms a positive pair with (any split)."""
        acc: dict[str, set[str]] = {}
        for ps in self.splits.values():
            for h, t in ps.pairs:
                acc.setdefault(h, set()).add(t)
                acc.setdefault(t, set()).add(h)
        return {k: frozenset(v) for k, v in acc.items()}

    @cached_property
    def train_category_pairs(self) -> frozenset[tuple[str, str]]:
        """Unordered category pairs observed in training positives."""
        keys = set()
        for h, t in self.splits["train"].pairs:
            keys.add(unordered(self.items[h].category_id, self.items[t].category_id))
        return frozenset(keys)

    @cached_property
    def complementary_categories(self) -> dict[str, tuple[str, ...]]:
        """category -> sorted categories it co-occurs with in training."""
        acc: dict[str, set[str]] = {c: set() for c in self.categories}
        for a, b in self.train_category_pairs:
            acc[a].add(b)
            acc[b].add(a)
        return {c: tuple(sorted(v)) for c, v in acc.items()}

    def feature_vector(self, item_id: str, modality: str) -> np.ndarray:
        item = self.items[item_id]
        return self.features[modality].rows[item.feature_row[modality]]


def write_feature_file(path: str | Path, rows: np.ndarray) -> None:
    """Write a dense float32 matrix in the TNFC binary format."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {rows.shape}")
    header = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, rows.shape[0], rows.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes())


def read_feature_file(path: str | Path) -> np.ndarray:
    """Read a TNFC file, validating magic, version, and body size."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CorpusError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n_rows, dim = _HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise CorpusError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise CorpusError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise CorpusError(f"{path}: header declares dim=0")
    body = raw[_HEADER.size :]
    expected = n_rows * dim * 4
    if len(body) != expected:
        raise CorpusError(
            f"{path}: dimension mismatch: header declares {n_rows} rows x dim {dim} "
            f"({expected} bytes) but body has {len(body)} bytes"
        )
    rows = np.frombuffer(body, dtype="<f4").reshape(n_rows, dim)
    bad = ~np.isfinite(rows)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise CorpusError(f"{path}: non-finite value at row {r}, column {c}")
    return rows.copy()


def _load_items(path: Path) -> dict[str, Item]:
    items: dict[str, Item] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                item_id = rec["item_id"]
                category_id = rec["category_id"]
                feature_row = rec["features"]
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing key {exc}") from exc
            if not isinstance(item_id, str) or not isinstance(category_id, str):
                raise CorpusError(f"{path}:{lineno}: item_id and category_id must be strings")
            if not isinstance(feature_row, dict) or not feature_row:
                raise CorpusError(f"{path}:{lineno}: 'features' must be a non-empty object")
            for m, idx in feature_row.items():
                if not isinstance(idx, int) or idx < 0:
                    raise CorpusError(
                        f"{path}:{lineno}: feature row index for '{m}' must be a non-negative integer"
                    )
            if item_id in items:
                raise CorpusError(f"{path}:{lineno}: duplicate item_id '{item_id}'")
            items[item_id] = Item(item_id, category_id, dict(feature_row))
    if not items:
        raise CorpusError(f"{path}: no items")
    return items


def _load_pairs(
    path: Path, items: dict[str, Item]
) -> tuple[dict[str, PairSet], list[str]]:
    splits = {name: PairSet(name, []) for name in SPLIT_NAMES}
    seen: dict[tuple[str, str], str] = {}  # unordered key -> split
    warnings: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise CorpusError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(fields)}")
            head, tail, split = fields
            if split not in SPLIT_NAMES:
                raise CorpusError(f"{path}:{lineno}: unknown split '{split}'")
            for ref in (head, tail):
                if ref not in items:
                    raise CorpusError(f"{path}:{lineno}: unknown item_id '{ref}'")
            if items[head].category_id == items[tail].category_id:
                raise CorpusError(
                    f"{path}:{lineno}: pair ({head}, {tail}) joins two items of "
                    f"category '{items[head].category_id}'; pairs must cross categories"
                )
            key = unordered(head, tail)
            if key in seen:
                if seen[key] == split:
                    msg = f"{path}:{lineno}: duplicate pair ({head}, {tail}) in split '{split}', dropped"
                    warnings.append(msg)
                    logger.warning(msg)
                    continue
                raise CorpusError(
                    f"{path}:{lineno}: pair ({head}, {tail}) appears in both "
                    f"'{seen[key]}' and '{split}'; splits must be disjoint"
                )
            seen[key] = split
            splits[split].pairs.append((head, tail))
    return splits, warnings


def load_corpus(directory: str | Path) -> Corpus:
    """Load and fully validate a corpus directory.

    Raises :class:`CorpusError` naming the offending file and record for
    any missing file, malformed record, dangling reference, or non-finite
    feature value. Duplicate pairs within a split are dropped with a
    warning recorded on the returned corpus.
    """
    directory = Path(directory)
    items_path = directory / ITEMS_FILENAME
    pairs_path = directory / PAIRS_FILENAME
    for p in (items_path, pairs_path):
        if not p.is_file():
            raise CorpusError(f"missing file: {p}")

    items = _load_items(items_path)

    modalities = sorted({m for item in items.values() for m in item.feature_row})
    features: dict[str, FeatureTable] = {}
    for m in modalities:
        fpath = directory / feature_filename(m)
        if not fpath.is_file():
            raise CorpusError(f"missing file: {fpath} (modality '{m}' referenced by items)")
        rows = read_feature_file(fpath)
        features[m] = FeatureTable(m, rows.shape[1], rows)

    for item in items.values():
        for m, idx in item.feature_row.items():
            n = features[m].rows.shape[0]
            if idx >= n:
                raise CorpusError(
                    f"{items_path}: item '{item.item_id}' references row {idx} of "
                    f"modality '{m}' but the table has {n} rows"
                )

    splits, warnings = _load_pairs(pairs_path, items)
    categories = sorted({item.category_id for item in items.values()})
    return Corpus(items=items, categories=categories, features=features, splits=splits, warnings=warnings)


def split_pairs(
    all_pairs: list[tuple[str, str]],
    fractions: tuple[float, float, float],
    seed: int,
) -> dict[str, PairSet]:
    """Deterministically shuffle and partition pairs into train/val/test.

    Sizes follow the largest-remainder rule so they are exact when the
    fractions divide evenly. The same (pairs, fractions, seed) always
    produces the same partition.
    """
    if len(fractions) != len(SPLIT_NAMES):
        raise ValueError(f"need {len(SPLIT_NAMES)} fractions, got {len(fractions)}")
    for f in fractions:
        if not (0.0 <= f <= 1.0):
            raise ValueError(f"fraction {f} outside [0, 1]")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

    n = len(all_pairs)
    exact = [n * f for f in fractions]
    counts = [int(e) for e in exact]
    remainder = n - sum(counts)
    by_frac = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in range(remainder):
        counts[by_frac[i]] += 1

    perm = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF).permutation(n)
    shuffled = [all_pairs[i] for i in perm]
    out: dict[str, PairSet] = {}
    start = 0
    for name, count in zip(SPLIT_NAMES, counts):
        out[name] = PairSet(name, shuffled[start : start + count])
        start += count
    return out


def write_pairs_file(path: str | Path, splits: dict[str, PairSet]) -> None:
    lines = []
    for name in SPLIT_NAMES:
        for head, tail in splits[name].pairs:
            lines.append(f"{head}\t{tail}\t{name}\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.writelines(lines)


def write_items_file(path: str | Path, items: list[Item]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for item in items:
            rec = {
                "item_id": item.item_id,
                "category_id": item.category_id,
                "features": item.feature_row,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

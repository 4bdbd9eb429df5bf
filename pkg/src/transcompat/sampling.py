"""Negative sampling for training tuples and evaluation candidate sets.

Training consumes five-tuples ``(head, tail, neg_head, neg_tail)`` with
exactly one side corrupted: the corrupted item is drawn from categories the
fixed item actually relates to, so the corrupted pair has a well-defined
relation of its own (possibly a different one than the positive). A
candidate is rejected if it equals the item it replaces or if the corrupted
pair is itself a known positive in any split; after ``max_attempts``
rejections the slot is skipped and counted.

Evaluation uses per-query candidate sets: the gold tail plus ``n``
sampled negatives. The per-query stream is seeded from (seed, query id,
gold id) alone, so candidate sets are frozen across models and runs and a
score comparison between models sees identical candidates. ``open`` mode
draws negatives from every category the query's category relates to;
``known-target`` mode only from the gold item's category. An item's known
partners (any split) are never offered as negatives. Candidate sets can be
exported to and re-read from a JSON-lines file byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, unordered
from .relations import RelationTable
from .utils import rng_for, stable_u64

EVAL_MODES = ("open", "known-target")


@dataclass(frozen=True)
class FiveTuple:
    head: str
    tail: str
    neg_head: str
    neg_tail: str

    @property
    def corrupted_side(self) -> str:
        return "tail" if self.neg_head == self.head else "head"


@dataclass(frozen=True)
class CandidateSet:
    query_id: str
    gold_id: str
    negative_ids: tuple[str, ...]
    shortfall: int = 0

    @property
    def candidates(self) -> tuple[str, ...]:
        """Gold first, then negatives; scoring keeps this order."""
        return (self.gold_id,) + self.negative_ids


def _pool(corpus: Corpus, table: RelationTable, category: str) -> list[str]:
    """Items eligible to corrupt a pair whose fixed side has ``category``."""
    out: list[str] = []
    for cat in table.complements(category):
        out.extend(corpus.items_by_category.get(cat, []))
    return out


def sample_five_tuples(
    pairs: list[tuple[str, str]],
    corpus: Corpus,
    table: RelationTable,
    seed: int,
    epoch: int = 0,
    negatives_per_side: int = 1,
    max_attempts: int = 100,
) -> tuple[list[FiveTuple], int]:
    """Corrupt each positive on the tail side then the head side.

    Returns the tuples in deterministic order plus the count of slots
    skipped after ``max_attempts`` rejected draws. The stream depends only
    on (seed, epoch), so successive epochs see fresh negatives while a rerun
    reproduces them exactly.
    """
    rng = rng_for(seed, "tuples", epoch)
    out: list[FiveTuple] = []
    skipped = 0
    pools: dict[str, list[str]] = {}

    def pool_for(category: str) -> list[str]:
        if category not in pools:
            pools[category] = _pool(corpus, table, category)
        return pools[category]

    for head, tail in pairs:
        for side in ("tail", "head"):
            fixed, replaced = (head, tail) if side == "tail" else (tail, head)
            pool = pool_for(corpus.items[fixed].category_id)
            for _ in range(negatives_per_side):
                candidate = None
                if pool:
                    for _ in range(max_attempts):
                        pick = pool[int(rng.integers(len(pool)))]
                        if pick == replaced:
                            continue
                        if unordered(fixed, pick) in corpus.positive_keys:
                            continue
                        candidate = pick
                        break
                if candidate is None:
                    skipped += 1
                    continue
                if side == "tail":
                    out.append(FiveTuple(head, tail, head, candidate))
                else:
                    out.append(FiveTuple(head, tail, candidate, tail))
    return out, skipped


def sample_eval_candidates(
    corpus: Corpus,
    table: RelationTable,
    query_id: str,
    gold_id: str,
    n_negatives: int,
    mode: str = "open",
    seed: int = 0,
) -> CandidateSet:
    """Frozen candidate set for one query; independent of any model state."""
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}, got '{mode}'")
    if n_negatives < 1:
        raise ValueError("n_negatives must be positive")
    query_cat = corpus.items[query_id].category_id
    if mode == "open":
        categories = table.complements(query_cat)
    else:
        categories = (corpus.items[gold_id].category_id,)
    partners = corpus.partners.get(query_id, frozenset())
    eligible: list[str] = []
    for cat in categories:
        for item_id in corpus.items_by_category.get(cat, []):
            if item_id == gold_id or item_id == query_id or item_id in partners:
                continue
            eligible.append(item_id)

    rng = rng_for(seed, "eval", stable_u64(query_id), stable_u64(gold_id))
    if len(eligible) >= n_negatives:
        idx = rng.choice(len(eligible), size=n_negatives, replace=False)
        negatives = tuple(eligible[i] for i in idx)
        shortfall = 0
    else:
        idx = rng.permutation(len(eligible))
        negatives = tuple(eligible[i] for i in idx)
        shortfall = n_negatives - len(eligible)
    return CandidateSet(query_id, gold_id, negatives, shortfall)


def build_eval_candidates(
    corpus: Corpus,
    table: RelationTable,
    split: str,
    n_negatives: int,
    mode: str = "open",
    seed: int = 0,
) -> list[CandidateSet]:
    """One candidate set per (head, tail) pair of the split, head as query."""
    return [
        sample_eval_candidates(corpus, table, head, tail, n_negatives, mode, seed)
        for head, tail in corpus.splits[split].pairs
    ]


def write_candidates_file(path: str | Path, sets: list[CandidateSet]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for cs in sets:
            rec = {
                "query_id": cs.query_id,
                "gold_id": cs.gold_id,
                "negative_ids": list(cs.negative_ids),
                "shortfall": cs.shortfall,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_candidates_file(path: str | Path) -> list[CandidateSet]:
    out: list[CandidateSet] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(
                CandidateSet(
                    rec["query_id"],
                    rec["gold_id"],
                    tuple(rec["negative_ids"]),
                    int(rec.get("shortfall", 0)),
                )
            )
    return out

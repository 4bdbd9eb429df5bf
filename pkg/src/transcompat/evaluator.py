"""Ranking metrics over frozen candidate sets and the evaluation report.

For each query the model scores the gold item and its sampled negatives;
if the scores were rolled into a ranked list the metrics are:

* AUC: fraction of negatives scored strictly below the gold item. Ties
  count as failures, so a constant scorer earns 0, not 0.5.
* Hit@K: whether fewer than K negatives score at or above the gold item,
  i.e. the gold item makes the top K under the most pessimistic tie
  ordering.

Queries whose (query category, gold category) pair carries no relation are
skipped and counted, as are queries whose candidate set has no negatives.
The skip rule depends only on the category pair, so every model kind
evaluated on the same corpus sees the same query population.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, unordered
from .models import Model, embed_items, scores_from_embeddings
from .sampling import CandidateSet
from .utils import atomic_write_json

DEFAULT_KS = (5, 10, 20, 40)


@dataclass(frozen=True)
class EvalConfig:
    ks: tuple[int, ...] = DEFAULT_KS
    mode: str = "open"
    part: str = "all"
    split: str = "test"

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(self.ks))
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValueError("ks must be a non-empty list of positive cutoffs")


def auc_from_scores(gold_score: float, negative_scores: np.ndarray) -> float:
    """Fraction of negatives strictly below the gold score; ties score zero."""
    negative_scores = np.asarray(negative_scores)
    if negative_scores.size == 0:
        raise ValueError("AUC needs at least one negative")
    return float(np.mean(negative_scores < gold_score))


def hit_from_scores(gold_score: float, negative_scores: np.ndarray, k: int) -> bool:
    """Gold in the top K under pessimistic ties: fewer than K negatives at or above it."""
    negative_scores = np.asarray(negative_scores)
    return int(np.sum(negative_scores >= gold_score)) < k


@dataclass
class EvalReport:
    model: str
    split: str
    mode: str
    part: str
    ks: tuple[int, ...]
    n_queries: int
    n_skipped_unknown_relation: int
    n_skipped_no_negatives: int
    auc: float | None
    hits: dict[int, float] = field(default_factory=dict)
    status: str = "ok"

    @property
    def auc_pct(self) -> float | None:
        return None if self.auc is None else 100.0 * self.auc

    @property
    def hits_pct(self) -> dict[int, float]:
        return {k: 100.0 * v for k, v in self.hits.items()}

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "split": self.split,
            "mode": self.mode,
            "part": self.part,
            "ks": list(self.ks),
            "n_queries": self.n_queries,
            "n_skipped_unknown_relation": self.n_skipped_unknown_relation,
            "n_skipped_no_negatives": self.n_skipped_no_negatives,
            "auc": self.auc,
            "auc_pct": self.auc_pct,
            "hits": {str(k): v for k, v in self.hits.items()},
            "hits_pct": {str(k): v for k, v in self.hits_pct.items()},
            "status": self.status,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "EvalReport":
        return cls(
            model=data["model"],
            split=data["split"],
            mode=data["mode"],
            part=data["part"],
            ks=tuple(data["ks"]),
            n_queries=data["n_queries"],
            n_skipped_unknown_relation=data["n_skipped_unknown_relation"],
            n_skipped_no_negatives=data["n_skipped_no_negatives"],
            auc=data["auc"],
            hits={int(k): v for k, v in data["hits"].items()},
            status=data["status"],
        )


def write_report(report: EvalReport, path: str | Path) -> None:
    atomic_write_json(Path(path), report.to_json_dict())


def read_report(path: str | Path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return EvalReport.from_json_dict(json.load(fh))


def filter_candidates_by_relations(
    candidate_sets: list[CandidateSet],
    corpus: Corpus,
    relations: list[tuple[str, str]],
) -> list[CandidateSet]:
    """Keep only queries whose (query, gold) category pair is in ``relations``."""
    wanted = {unordered(a, b) for a, b in relations}
    return [
        cs
        for cs in candidate_sets
        if unordered(
            corpus.items[cs.query_id].category_id, corpus.items[cs.gold_id].category_id
        )
        in wanted
    ]


def evaluate(
    model: Model,
    corpus: Corpus,
    candidate_sets: list[CandidateSet],
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Score every candidate set and aggregate AUC and Hit@K.

    Embeds the whole corpus once, then scores each query against its frozen
    candidates. Returns a report with ``status="empty"`` (and ``auc=None``)
    when no query survives the skip rules.
    """
    item_ids = list(corpus.items)
    row_of = {item_id: i for i, item_id in enumerate(item_ids)}
    embeddings = embed_items(model, corpus, item_ids)

    aucs: list[float] = []
    hit_counts = {k: 0 for k in config.ks}
    skipped_unknown = 0
    skipped_empty = 0
    for cs in candidate_sets:
        query_cat = corpus.items[cs.query_id].category_id
        gold_cat = corpus.items[cs.gold_id].category_id
        if (query_cat, gold_cat) not in model.table:
            skipped_unknown += 1
            continue
        if not cs.negative_ids:
            skipped_empty += 1
            continue
        scores = scores_from_embeddings(
            model, corpus, embeddings, row_of, cs.query_id, cs.candidates, config.part
        )
        gold_score, negative_scores = scores[0], scores[1:]
        aucs.append(auc_from_scores(gold_score, negative_scores))
        for k in config.ks:
            hit_counts[k] += hit_from_scores(gold_score, negative_scores, k)

    n = len(aucs)
    return EvalReport(
        model=model.config.model,
        split=config.split,
        mode=config.mode,
        part=config.part,
        ks=config.ks,
        n_queries=n,
        n_skipped_unknown_relation=skipped_unknown,
        n_skipped_no_negatives=skipped_empty,
        auc=float(np.mean(aucs)) if n else None,
        hits={k: hit_counts[k] / n for k in config.ks} if n else {},
        status="ok" if n else "empty",
    )

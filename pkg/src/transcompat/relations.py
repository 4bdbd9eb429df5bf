"""Category-pair relation registry and vector storage.

Every unordered category pair that appears in training positives owns one
relation. The registry maps a *directed* lookup ``(head_cat, tail_cat)`` to
a row in a dense parameter matrix plus a sign:

* ``tied`` (default): one row per unordered pair; the reverse direction is
  the negated vector, so the two directions share parameters and
  ``r(a->b) == -r(b->a)`` holds exactly.
* ``untied``: two rows per unordered pair, one per direction, no sign flip.
* ``unsigned``: one row per unordered pair used as-is in both directions,
  for direction-free quantities such as per-pair gating masks.

Rows are ordered by sorted canonical pair so the layout is reproducible
from the category names alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import unordered
from .utils import rng_for

MODES = ("tied", "untied", "unsigned")


class UnknownRelationError(Exception):
    """Lookup of a category pair that carries no relation."""


@dataclass(frozen=True)
class RelationRef:
    row: int
    sign: float


class RelationTable:
    """Directed lookup over the relation rows for a fixed set of category pairs."""

    def __init__(self, pairs, mode: str = "tied"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
        canonical = sorted({unordered(a, b) for a, b in pairs})
        if not canonical:
            raise ValueError("relation table needs at least one category pair")
        for a, b in canonical:
            if a == b:
                raise ValueError(f"category '{a}' cannot relate to itself")
        self.mode = mode
        self.pairs = tuple(canonical)
        self._index = {pair: i for i, pair in enumerate(canonical)}

    @property
    def n_rows(self) -> int:
        return len(self.pairs) * (2 if self.mode == "untied" else 1)

    def __contains__(self, pair) -> bool:
        return unordered(*pair) in self._index

    def lookup(self, head_cat: str, tail_cat: str) -> RelationRef:
        key = unordered(head_cat, tail_cat)
        idx = self._index.get(key)
        if idx is None:
            raise UnknownRelationError(
                f"no relation between categories '{head_cat}' and '{tail_cat}'"
            )
        forward = (head_cat, tail_cat) == key
        if self.mode == "untied":
            return RelationRef(2 * idx + (0 if forward else 1), 1.0)
        if self.mode == "unsigned":
            return RelationRef(idx, 1.0)
        return RelationRef(idx, 1.0 if forward else -1.0)

    def complements(self, category: str) -> tuple[str, ...]:
        """Categories related to ``category``, sorted; empty if it has none."""
        out = set()
        for a, b in self.pairs:
            if a == category:
                out.add(b)
            elif b == category:
                out.add(a)
        return tuple(sorted(out))

    def directed_pair_of_row(self, row: int) -> tuple[str, str]:
        """The (head_cat, tail_cat) direction a row encodes."""
        if not 0 <= row < self.n_rows:
            raise IndexError(f"row {row} outside [0, {self.n_rows})")
        if self.mode == "untied":
            a, b = self.pairs[row // 2]
            return (a, b) if row % 2 == 0 else (b, a)
        return self.pairs[row]

    @classmethod
    def from_corpus(cls, corpus, mode: str = "tied") -> "RelationTable":
        """Relations for exactly the category pairs seen in training positives."""
        return cls(corpus.train_category_pairs, mode)


def init_relation_vectors(table: RelationTable, dim: int, seed: int = 0) -> np.ndarray:
    """Unit-norm random rows; training leaves their norms unconstrained after this."""
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = rng_for(seed, "relations", table.mode)
    rows = rng.standard_normal((table.n_rows, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def init_mask_vectors(table: RelationTable, dim: int) -> np.ndarray:
    """All-ones gating masks: start as plain distance, specialize during training."""
    if dim < 1:
        raise ValueError("dim must be positive")
    return np.ones((table.n_rows, dim))


def relation_vector(matrix: np.ndarray, table: RelationTable, head_cat: str, tail_cat: str) -> np.ndarray:
    ref = table.lookup(head_cat, tail_cat)
    return ref.sign * matrix[ref.row]

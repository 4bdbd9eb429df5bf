"""Distance and compatibility scores between embedded items.

The translation distance between a head item ``x`` and tail item ``y``
under relation vector ``r`` is the squared residual ``||x + r - y||^2``.
Expanding the square splits it into three interpretable terms::

    d = (||x||^2 + ||y||^2 + ||r||^2)   norm term
        - 2 * (x . y)                   global affinity, category-free
        - 2 * ((y - x) . r)             category-specific translation fit

:func:`dist_breakdown` computes the total directly from the residual and
the three terms independently, so the identity ``total == sum of terms``
is a checkable invariant rather than a tautology. Compatibility scores
are negated distances (higher is better).

Also here: plain squared Euclidean distance, inner-product score, and the
masked distance ``||(x - y) * w||^2`` used by gated-mask models. All
functions accept single vectors or row-aligned batches and never mutate
their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoreBreakdown:
    total: float
    norm_term: float
    global_term: float
    category_term: float

    @property
    def recomposed(self) -> float:
        """Sum of the three expansion terms; equals ``total`` up to rounding."""
        return self.norm_term + self.global_term + self.category_term


def dist_translation(x: np.ndarray, y: np.ndarray, r: np.ndarray) -> np.ndarray | float:
    """Squared residual ||x + r - y||^2, elementwise over rows for batches."""
    residual = np.asarray(x) + np.asarray(r) - np.asarray(y)
    return np.sum(np.square(residual), axis=-1)


def dist_breakdown(x: np.ndarray, y: np.ndarray, r: np.ndarray) -> ScoreBreakdown:
    """Decomposed translation distance for a single (head, tail, relation)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    total = float(np.sum(np.square(x + r - y)))
    norm_term = float(x @ x + y @ y + r @ r)
    global_term = -2.0 * float(x @ y)
    category_term = -2.0 * float((y - x) @ r)
    return ScoreBreakdown(total, norm_term, global_term, category_term)


def score_translation(x: np.ndarray, y: np.ndarray, r: np.ndarray) -> np.ndarray | float:
    return -dist_translation(x, y, r)


def dist_euclid(x: np.ndarray, y: np.ndarray) -> np.ndarray | float:
    return np.sum(np.square(np.asarray(x) - np.asarray(y)), axis=-1)


def score_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray | float:
    return np.sum(np.asarray(x) * np.asarray(y), axis=-1)


def dist_masked(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray | float:
    """Gated squared distance ||(x - y) * w||^2."""
    diff = (np.asarray(x) - np.asarray(y)) * np.asarray(w)
    return np.sum(np.square(diff), axis=-1)


PARTS = ("all", "global", "category")


def score_part(x: np.ndarray, y: np.ndarray, r: np.ndarray, part: str) -> np.ndarray | float:
    """Compatibility score from the full distance or one expansion term.

    ``all`` negates the full distance; ``global`` keeps only the
    category-free affinity ``2 * (x . y)``; ``category`` keeps only the
    translation fit ``2 * ((y - x) . r)``. Each is the negated
    corresponding term of the expansion, so rankings from parts are
    comparable ablations of the full score.
    """
    if part == "all":
        return -dist_translation(x, y, r)
    if part == "global":
        return 2.0 * score_inner(x, y)
    if part == "category":
        return 2.0 * np.sum((np.asarray(y) - np.asarray(x)) * np.asarray(r), axis=-1)
    raise ValueError(f"part must be one of {PARTS}, got '{part}'")

"""Synthetic corpus generator with planted translation structure.

The generator builds a small world whose ground truth is known exactly, so
training and evaluation can be verified at desk scale:

* Items live in a latent space, with every cluster center on a common
  sphere around the origin. For every complementary category pair a
  ground-truth translation vector maps head clusters onto tail clusters
  exactly (plus optional noise), so every positive pair satisfies
  ``g(tail) = g(head) + rho + eps`` with ``||eps||`` on the order of
  ``noise_sigma``. Because both ends of each translation sit on the shell,
  normalizing embeddings to unit norm preserves the geometry up to scale.
* The first category heads two relations with non-parallel translations
  (``rho01`` and ``rho02 = rho01 + rho12 + delta1``). Clusters come in
  blocks of four (base, base + delta1, base + delta2, base + delta3), and
  the (0, 2) pairing is shifted inside each block, so the translation
  triangle does not close and ``rho02`` is strictly longer than any
  single step or offset. Under plain proximity, a dozen clusters from the
  same and neighboring blocks outrank an item's true (0, 2) partner;
  only the delta1 axis, which no distractor shares, identifies it.
* Block bases spread on a circle whose plane is orthogonal to every
  translation and offset, so a symmetric embedding cannot null the
  planted directions without collapsing each block's clusters onto each
  other.
* Raw features per modality are fixed random orthonormal lifts of the
  latent positions, one lift per modality, scaled so feature norms are
  roughly one. An isometric lift keeps the planted geometry undistorted
  in every modality and under encoder input dropout.

Output is a corpus directory loadable by :func:`transcompat.corpus.load_corpus`
plus ``synth_config.json`` (config echo and derived structure) and
``ground_truth.npz`` (latents, cluster ids, translations) for verification.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    ITEMS_FILENAME,
    PAIRS_FILENAME,
    Item,
    feature_filename,
    split_pairs,
    write_feature_file,
    write_items_file,
    write_pairs_file,
)
from .utils import rng_for

SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
MODALITIES = ("visual", "textual")

# Latent geometry: block offsets are comparable to a translation step and
# noise is smaller still. delta1 shifts the (0, 2) targets past every
# cluster of their own block; delta2 and delta3 add decoy clusters in
# between. The circle radius keeps blocks farther apart than any
# within-block distance, so collapsing planted axes to dodge the decoys
# costs an encoder accuracy on the aligned relations. The second aligned
# leg and delta1 are sized so that a (0, 2) target's proximity deficit
# against its block-mates stays below what a unit-norm relation vector
# can repay: hinge training leaves relation vectors near their unit
# initialization, so they act as scoring directions rather than literal
# displacements, and oversized legs would hand proximity-only scoring
# the win in open retrieval.
_TRANSLATION_NORM = 1.0
_SECOND_LEG_NORM = 0.4
_DELTA1_NORM = 1.5
_DELTA2_NORM = 0.6
_DELTA3_NORM = 1.0
_BASE_RADIUS = 1.7
_BLOCK = 4
_TARGET_CLUSTER_SIZE = 12
_MAX_CLUSTERS = 28

CONFIG_FILENAME = "synth_config.json"
GROUND_TRUTH_FILENAME = "ground_truth.npz"


@dataclass(frozen=True)
class SynthConfig:
    num_categories: int = 4
    items_per_category: int = 200
    latent_dim: int = 8
    feature_dim: int = 32
    noise_sigma: float = 0.05
    pairs_per_relation: int = 600
    seed: int = 0

    def validate(self) -> None:
        if self.num_categories < 3:
            raise ValueError("num_categories must be >= 3 (the planted one-to-many construction needs three categories)")
        if self.items_per_category < 2 * _BLOCK:
            raise ValueError("items_per_category must be >= 8 (two blocks of four clusters)")
        if self.latent_dim < self.num_categories + 4:
            raise ValueError(
                "latent_dim must be >= num_categories + 4 (one axis per aligned "
                "translation, three block offsets, two spread directions)"
            )
        if self.latent_dim > self.feature_dim:
            raise ValueError("latent_dim must not exceed feature_dim")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.pairs_per_relation < 1:
            raise ValueError("pairs_per_relation must be >= 1")


def _category_names(k: int) -> list[str]:
    return [f"c{i:02d}" for i in range(k)]


def _relation_layout(k: int) -> list[tuple[int, int]]:
    """Category-index pairs that carry a relation.

    The triangle (0,1), (1,2), (0,2) embeds the one-to-many construction;
    remaining categories hang off it as a chain.
    """
    relations = [(0, 1), (1, 2), (0, 2)]
    relations.extend((i, i + 1) for i in range(2, k - 1))
    return relations


def _cluster_sizes(n_items: int, n_clusters: int) -> np.ndarray:
    return np.bincount(np.arange(n_items) % n_clusters, minlength=n_clusters)


def _pairing(relation: tuple[int, int], n_clusters: int) -> list[tuple[int, int]]:
    """Aligned cluster pairing, except the shifted (0, 2) relation."""
    if relation == (0, 2):
        return [(k, k + 1) for k in range(0, n_clusters - 1, _BLOCK)]
    return [(k, k) for k in range(n_clusters)]


def _capacity(relation: tuple[int, int], n_clusters: int, sizes: np.ndarray) -> int:
    return int(sum(sizes[ka] * sizes[kb] for ka, kb in _pairing(relation, n_clusters)))


def _choose_cluster_count(config: SynthConfig, relations: list[tuple[int, int]]) -> int:
    blocks = config.items_per_category // (_BLOCK * _TARGET_CLUSTER_SIZE)
    n = min(_MAX_CLUSTERS, max(2 * _BLOCK, _BLOCK * blocks))
    while n >= 2 * _BLOCK:
        sizes = _cluster_sizes(config.items_per_category, n)
        if all(_capacity(rel, n, sizes) >= config.pairs_per_relation for rel in relations):
            return n
        n -= _BLOCK
    raise ValueError(
        f"pairs_per_relation={config.pairs_per_relation} exceeds the distinct-pair "
        f"capacity for items_per_category={config.items_per_category}"
    )


def generate_synthetic(config: SynthConfig, out_dir: str | Path) -> Path:
    """Generate a planted-translation corpus directory. Deterministic per config."""
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cats = _category_names(config.num_categories)
    rel_idx = _relation_layout(config.num_categories)
    n_clusters = _choose_cluster_count(config, rel_idx)

    rng = rng_for(config.seed, "synth")

    # Directions from a random orthonormal frame: one axis per aligned
    # translation (categories form a chain), one per block offset, and two
    # for spreading the block bases on a circle.
    k = config.num_categories
    frame = np.linalg.qr(rng.standard_normal((config.latent_dim, config.latent_dim)))[0]
    aligned = [frame[:, i] * _TRANSLATION_NORM for i in range(k - 1)]
    aligned[1] = frame[:, 1] * _SECOND_LEG_NORM
    delta1 = frame[:, k - 1] * _DELTA1_NORM
    delta2 = frame[:, k] * _DELTA2_NORM
    delta3 = frame[:, k + 1] * _DELTA3_NORM
    spread = frame[:, k + 2 : k + 4]

    # rho(0,2) is rho(0,1) + rho(1,2) + delta1, so the shifted cluster pairing
    # below satisfies it exactly, and it is strictly longer than any
    # combination of aligned steps, offsets, and circle chords: under plain
    # proximity the true (0, 2) partner trails clusters from its own block
    # and from neighboring blocks, none of which move along the delta1 axis.
    rho: dict[tuple[int, int], np.ndarray] = {(0, 1): aligned[0], (1, 2): aligned[1]}
    rho[(0, 2)] = aligned[0] + aligned[1] + delta1
    for a, b in rel_idx:
        if (a, b) not in rho and b >= 3:
            rho[(a, b)] = aligned[a]

    # Cluster centers all satisfy ||center|| = shell_radius exactly: block
    # bases combine a fixed in-plane point (one coordinate per translation or
    # offset axis) with a spread direction orthogonal to every planted vector.
    # Since tail = head + rho holds with both ends on the shell, normalizing
    # embeddings to unit norm preserves the planted geometry up to scale.
    in_plane = -0.5 * (sum(aligned) + delta1 + delta2 + delta3)
    n_blocks = n_clusters // _BLOCK
    centers = np.zeros((k, n_clusters, config.latent_dim))
    for bi in range(n_blocks):
        theta = 2.0 * np.pi * bi / n_blocks
        base = in_plane + _BASE_RADIUS * (spread @ np.array([np.cos(theta), np.sin(theta)]))
        centers[0, _BLOCK * bi] = base
        centers[0, _BLOCK * bi + 1] = base + delta1
        centers[0, _BLOCK * bi + 2] = base + delta2
        centers[0, _BLOCK * bi + 3] = base + delta3
    for ci in range(1, k):
        centers[ci] = centers[ci - 1] + aligned[ci - 1]

    # Items: round-robin cluster assignment, latent = center + jitter. Jitter
    # is scaled so the residual of a positive pair has norm ~ noise_sigma.
    n_items = config.num_categories * config.items_per_category
    jitter_std = config.noise_sigma / np.sqrt(2.0 * config.latent_dim)
    latents = np.zeros((n_items, config.latent_dim))
    cluster_ids = np.zeros(n_items, dtype=np.int64)
    item_ids: list[str] = []
    items: list[Item] = []
    index_of: dict[tuple[int, int], list[int]] = {}  # (cat, cluster) -> item indices
    for ci, cat in enumerate(cats):
        for j in range(config.items_per_category):
            k = j % n_clusters
            idx = len(item_ids)
            latents[idx] = centers[ci, k] + rng.standard_normal(config.latent_dim) * jitter_std
            cluster_ids[idx] = k
            item_id = f"{cat}_{j:04d}"
            item_ids.append(item_id)
            items.append(Item(item_id, cat, {m: idx for m in MODALITIES}))
            index_of.setdefault((ci, k), []).append(idx)

    # Positive pairs: enumerate every admissible pair of each relation in a
    # fixed order, shuffle, keep the first pairs_per_relation.
    all_pairs: list[tuple[str, str]] = []
    for rel in rel_idx:
        a, b = rel
        admissible: list[tuple[int, int]] = []
        for ka, kb in _pairing(rel, n_clusters):
            for xi in index_of.get((a, ka), []):
                for yi in index_of.get((b, kb), []):
                    admissible.append((xi, yi))
        if len(admissible) < config.pairs_per_relation:
            raise ValueError(
                f"relation {cats[a]}-{cats[b]}: only {len(admissible)} admissible pairs "
                f"for pairs_per_relation={config.pairs_per_relation}"
            )
        order = rng.permutation(len(admissible))[: config.pairs_per_relation]
        all_pairs.extend((item_ids[admissible[i][0]], item_ids[admissible[i][1]]) for i in order)

    splits = split_pairs(all_pairs, SPLIT_FRACTIONS, config.seed)

    # Features: a fixed random orthonormal lift of the latents per modality,
    # scaled so feature norms are roughly one. An isometric lift keeps the
    # planted geometry undistorted in every modality and under input dropout.
    shell_radius = float(np.sqrt(in_plane @ in_plane + _BASE_RADIUS**2))
    for m in MODALITIES:
        gauss = rng.standard_normal((config.feature_dim, config.latent_dim))
        lift = np.linalg.qr(gauss)[0] / shell_radius
        write_feature_file(out_dir / feature_filename(m), (latents @ lift.T).astype(np.float32))

    write_items_file(out_dir / ITEMS_FILENAME, items)
    write_pairs_file(out_dir / PAIRS_FILENAME, splits)

    relation_names = [[cats[a], cats[b]] for a, b in rel_idx]
    echo = {
        "config": dataclasses.asdict(config),
        "categories": cats,
        "relations": relation_names,
        "n_clusters": n_clusters,
        "split_fractions": list(SPLIT_FRACTIONS),
        "modalities": list(MODALITIES),
        "one_to_many": {
            "head_category": cats[0],
            "relation_pairs": [[cats[0], cats[1]], [cats[0], cats[2]]],
        },
    }
    with open(out_dir / CONFIG_FILENAME, "w", encoding="utf-8", newline="") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(out_dir / GROUND_TRUTH_FILENAME, "wb") as fh:
        np.savez(
            fh,
            item_ids=np.array(item_ids),
            categories=np.array([item.category_id for item in items]),
            latents=latents,
            cluster_ids=cluster_ids,
            relation_pairs=np.array(relation_names),
            translations=np.stack([rho[rel] for rel in rel_idx]),
        )
    return out_dir


def load_ground_truth(corpus_dir: str | Path) -> dict[str, np.ndarray]:
    with np.load(Path(corpus_dir) / GROUND_TRUTH_FILENAME) as data:
        return {k: data[k] for k in data.files}


def load_synth_config(corpus_dir: str | Path) -> dict:
    with open(Path(corpus_dir) / CONFIG_FILENAME, encoding="utf-8") as fh:
        return json.load(fh)

"""Model assembly, item embedding, candidate scoring, and checkpoints.

A model bundles per-modality encoders with whatever pair-level parameters
its kind needs:

* ``transnfcm`` - translation model: fused item embeddings plus one learned
  relation vector per category pair; score is the negated squared residual
  ``||x + r - y||^2``.
* ``trinet``    - margin-ranking metric baseline: same encoders, score is
  the negated squared Euclidean distance, no relation parameters.
* ``sianet``    - contrastive metric baseline: same scoring as ``trinet``
  but trained with the contrastive loss.
* ``bpr``       - ranking baseline on inner-product scores.
* ``csn``       - gated metric: per category pair a learned mask ``w``
  gates the distance ``||(x - y) * w||^2``.

Item embeddings are the concatenation of per-modality unit embeddings in
the order fixed by ``TrainConfig.modalities``. All in-memory parameters are
float64; checkpoints store float32.

Checkpoint layout (``.tnfm``): magic ``TNFM``, u32 version, u64 metadata
length, UTF-8 JSON metadata (config, input dims, relation pairs, parameter
names and shapes), then each parameter's row-major little-endian float32
bytes in metadata order. Writes of identical models are byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .encoder import encode, init_encoder_params
from .relations import RelationTable, init_mask_vectors, init_relation_vectors
from .scoring import dist_masked, dist_euclid, score_inner, score_part
from .utils import atomic_write_bytes

MODEL_KINDS = ("transnfcm", "trinet", "sianet", "bpr", "csn")

CHECKPOINT_MAGIC = b"TNFM"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIQ")


class CheckpointError(Exception):
    """A checkpoint file is malformed or from an unsupported version."""


@dataclass(frozen=True)
class TrainConfig:
    model: str = "transnfcm"
    modalities: tuple[str, ...] = ("visual", "textual")
    embed_dim: int = 128
    hidden_dim: int | None = None
    epochs: int = 30
    batch_size: int = 128
    lr: float = 0.001
    lr_drop_every: int = 10
    lr_drop_factor: float = 10.0
    momentum: float = 0.9
    margin: float = 1.0
    dropout: float = 0.5
    encoder_lr_scale: float = 1.0
    negatives_per_side: int = 1
    untied_relations: bool = False
    mask_l1: float = 5e-4
    val_negatives: int = 100
    val_mode: str = "open"
    keep_best: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(self.modalities))
        if self.model not in MODEL_KINDS:
            raise ValueError(
                f"unsupported model '{self.model}': implemented kinds are "
                f"{', '.join(MODEL_KINDS)}; other comparison baselines are out of scope"
            )
        if not self.modalities or len(set(self.modalities)) != len(self.modalities):
            raise ValueError("modalities must be a non-empty list of distinct names")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be positive")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive when set")
        if self.epochs < 0 or self.batch_size < 1 or self.negatives_per_side < 1:
            raise ValueError("epochs must be >= 0; batch_size and negatives_per_side >= 1")
        if self.lr <= 0 or self.lr_drop_every < 1 or self.lr_drop_factor < 1:
            raise ValueError("lr must be > 0, lr_drop_every >= 1, lr_drop_factor >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.mask_l1 < 0 or self.val_negatives < 1:
            raise ValueError("mask_l1 must be >= 0 and val_negatives >= 1")


@dataclass
class Model:
    config: TrainConfig
    input_dims: dict[str, int]
    table: RelationTable
    params: dict[str, np.ndarray]

    @property
    def fused_dim(self) -> int:
        return self.config.embed_dim * len(self.config.modalities)


def relation_mode_for(config: TrainConfig) -> str:
    if config.model == "csn":
        return "unsigned"
    return "untied" if config.untied_relations else "tied"


def build_model(corpus: Corpus, config: TrainConfig) -> Model:
    """Fresh model for a corpus: encoders for each configured modality plus
    relation vectors or masks for every training category pair."""
    missing = [m for m in config.modalities if m not in corpus.features]
    if missing:
        raise ValueError(f"corpus has no features for modalities {missing}")
    input_dims = {m: corpus.features[m].dim for m in config.modalities}
    params = init_encoder_params(input_dims, config.embed_dim, config.hidden_dim, config.seed)
    table = RelationTable.from_corpus(corpus, relation_mode_for(config))
    fused = config.embed_dim * len(config.modalities)
    if config.model == "transnfcm":
        params["rel.R"] = init_relation_vectors(table, fused, config.seed)
    elif config.model == "csn":
        params["mask.M"] = init_mask_vectors(table, fused)
    return Model(config, input_dims, table, params)


def embed_items(model: Model, corpus: Corpus, item_ids: list[str]) -> np.ndarray:
    """Evaluation-time fused embeddings, one batched encode per modality."""
    parts = []
    for modality in model.config.modalities:
        rows = np.stack(
            [corpus.feature_vector(i, modality) for i in item_ids]
        ) if item_ids else np.zeros((0, model.input_dims[modality]), dtype=np.float32)
        parts.append(encode(model.params, modality, rows).units)
    return np.concatenate(parts, axis=1)


def scores_from_embeddings(
    model: Model,
    corpus: Corpus,
    embeddings: np.ndarray,
    row_of: dict[str, int],
    query_id: str,
    candidate_ids: list[str] | tuple[str, ...],
    part: str = "all",
) -> np.ndarray:
    """Compatibility scores of the query against each candidate (higher is better)."""
    if part != "all" and model.config.model != "transnfcm":
        raise ValueError(f"score part '{part}' only applies to the translation model")
    x = embeddings[row_of[query_id]]
    Y = embeddings[[row_of[c] for c in candidate_ids]]
    kind = model.config.model
    if kind in ("trinet", "sianet"):
        return -np.asarray(dist_euclid(x, Y), dtype=np.float64).reshape(-1)
    if kind == "bpr":
        return np.asarray(score_inner(x, Y), dtype=np.float64).reshape(-1)

    query_cat = corpus.items[query_id].category_id
    refs = [model.table.lookup(query_cat, corpus.items[c].category_id) for c in candidate_ids]
    rows = np.array([ref.row for ref in refs], dtype=np.intp)
    signs = np.array([ref.sign for ref in refs])
    if kind == "csn":
        W = model.params["mask.M"][rows]
        return -np.asarray(dist_masked(x, Y, W), dtype=np.float64).reshape(-1)
    R = signs[:, None] * model.params["rel.R"][rows]
    return np.asarray(score_part(x, Y, R, part), dtype=np.float64).reshape(-1)


def model_scores(
    model: Model,
    corpus: Corpus,
    query_id: str,
    candidate_ids: list[str] | tuple[str, ...],
    part: str = "all",
) -> np.ndarray:
    ids = [query_id] + [c for c in candidate_ids if c != query_id]
    row_of = {item_id: i for i, item_id in enumerate(ids)}
    embeddings = embed_items(model, corpus, ids)
    return scores_from_embeddings(model, corpus, embeddings, row_of, query_id, candidate_ids, part)


def _config_to_json(config: TrainConfig) -> dict:
    out = dataclasses.asdict(config)
    out["modalities"] = list(config.modalities)
    return out


def _config_from_json(data: dict) -> TrainConfig:
    data = dict(data)
    data["modalities"] = tuple(data["modalities"])
    return TrainConfig(**data)


def save_model(model: Model, path: str | Path) -> None:
    """Serialize to the TNFM checkpoint format (float32 parameter storage)."""
    names = sorted(model.params)
    meta = {
        "config": _config_to_json(model.config),
        "input_dims": dict(sorted(model.input_dims.items())),
        "relation_mode": model.table.mode,
        "relation_pairs": [list(p) for p in model.table.pairs],
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blobs = [np.ascontiguousarray(model.params[n], dtype="<f4").tobytes() for n in names]
    payload = _CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(meta_bytes))
    atomic_write_bytes(Path(path), payload + meta_bytes + b"".join(blobs))


def load_model(path: str | Path) -> Model:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, meta_len = _CKPT_HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    body = raw[_CKPT_HEADER.size :]
    if len(body) < meta_len:
        raise CheckpointError(f"{path}: metadata truncated")
    try:
        meta = json.loads(body[:meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: invalid metadata: {exc}") from exc

    config = _config_from_json(meta["config"])
    table = RelationTable([tuple(p) for p in meta["relation_pairs"]], meta["relation_mode"])
    params: dict[str, np.ndarray] = {}
    offset = meta_len
    for entry in meta["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 4
        if end > len(body):
            raise CheckpointError(f"{path}: parameter '{entry['name']}' extends past end of file")
        params[entry["name"]] = (
            np.frombuffer(body[offset:end], dtype="<f4").reshape(shape).astype(np.float64)
        )
        offset = end
    if offset != len(body):
        raise CheckpointError(f"{path}: {len(body) - offset} trailing bytes after parameters")
    return Model(config, {k: int(v) for k, v in meta["input_dims"].items()}, table, params)

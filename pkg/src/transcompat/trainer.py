"""Mini-batch training with hand-derived gradients and momentum SGD.

Each step consumes a batch of five-tuples. Items in the batch are encoded
once (an item appearing in several tuples shares its embedding and, when
dropout is on, its dropout mask), per-tuple losses and embedding gradients
are computed in closed form, and gradients flow back through the encoders
analytically. The batch loss is the mean over tuples; tuples whose hinge
is inactive contribute zero gradient.

Losses by model kind (``d`` are squared distances, higher score = lower d):

* ``transnfcm``: hinge ``[d_pos - d_neg + margin]_+`` on translation
  residuals, with the corrupted side using the corrupted pair's own
  relation vector.
* ``trinet``:    same hinge on plain squared Euclidean distance.
* ``sianet``:    contrastive ``d_pos + [margin - sqrt(d_neg)]_+^2``.
* ``bpr``:       ``softplus(-(s_pos - s_neg))`` on inner-product scores.
* ``csn``:       hinge on mask-gated distances plus an L1 penalty on each
  mask occurrence.

The optimizer is SGD with momentum: ``v = momentum * v - lr * g`` then
``p += v``. The learning rate decays stepwise, ``lr = base / factor^(epoch
// every)``, and encoder parameters can run at a scaled rate. Everything
is float64 and seeded, so identical (corpus, config, seed) runs produce
bit-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .corpus import Corpus
from .encoder import encode, encode_backward, make_dropout_masks
from .evaluator import EvalConfig, evaluate
from .models import Model, TrainConfig, build_model
from .sampling import FiveTuple, build_eval_candidates, sample_five_tuples
from .utils import rng_for


def lr_at(epoch: int, base: float, drop_every: int = 10, factor: float = 10.0) -> float:
    """Stepwise decay: the base rate divided by ``factor`` every ``drop_every`` epochs."""
    return base / factor ** (epoch // drop_every)


def sgd_momentum_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    lr: float,
    momentum: float,
    lr_scale: dict[str, float] | None = None,
) -> None:
    """In-place ``v = momentum v - lr g; p += v`` for every parameter with a gradient."""
    for name, g in grads.items():
        rate = lr * (lr_scale.get(name, 1.0) if lr_scale else 1.0)
        v = velocity[name]
        v *= momentum
        v -= rate * g
        params[name] += v


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def batch_loss_and_grads(
    model: Model,
    corpus: Corpus,
    batch: list[FiveTuple],
    dropout_masks: dict[str, np.ndarray] | None = None,
    want_grads: bool = True,
) -> tuple[float, float, dict[str, np.ndarray]]:
    """Mean loss, active-tuple fraction, and parameter gradients for one batch.

    ``dropout_masks`` maps modality to a (n_unique_items, input_dim) keep
    mask aligned with the batch's first-occurrence item order; omit it for
    evaluation-mode forward passes and finite-difference checks.
    """
    if not batch:
        raise ValueError("batch must contain at least one tuple")
    config = model.config
    kind = config.model

    ids: list[str] = []
    index: dict[str, int] = {}
    for t in batch:
        for item_id in (t.head, t.tail, t.neg_head, t.neg_tail):
            if item_id not in index:
                index[item_id] = len(ids)
                ids.append(item_id)
    ih = np.array([index[t.head] for t in batch], dtype=np.intp)
    it = np.array([index[t.tail] for t in batch], dtype=np.intp)
    inh = np.array([index[t.neg_head] for t in batch], dtype=np.intp)
    int_ = np.array([index[t.neg_tail] for t in batch], dtype=np.intp)

    caches = {}
    parts = []
    for modality in config.modalities:
        feats = np.stack([corpus.feature_vector(i, modality) for i in ids])
        masks = dropout_masks.get(modality) if dropout_masks else None
        result = encode(model.params, modality, feats, masks, config.dropout if masks is not None else 0.0)
        caches[modality] = result.cache
        parts.append(result.units)
    E = np.concatenate(parts, axis=1)

    X, Y, XN, YN = E[ih], E[it], E[inh], E[int_]
    B = len(batch)
    grads: dict[str, np.ndarray] = {}
    gX = gY = gXN = gYN = None

    if kind == "transnfcm":
        R = model.params["rel.R"]
        pos_refs = [model.table.lookup(corpus.items[t.head].category_id, corpus.items[t.tail].category_id) for t in batch]
        neg_refs = [model.table.lookup(corpus.items[t.neg_head].category_id, corpus.items[t.neg_tail].category_id) for t in batch]
        pos_rows = np.array([r.row for r in pos_refs], dtype=np.intp)
        neg_rows = np.array([r.row for r in neg_refs], dtype=np.intp)
        pos_signs = np.array([r.sign for r in pos_refs])
        neg_signs = np.array([r.sign for r in neg_refs])
        delta_pos = X + pos_signs[:, None] * R[pos_rows] - Y
        delta_neg = XN + neg_signs[:, None] * R[neg_rows] - YN
        d_pos = np.sum(np.square(delta_pos), axis=1)
        d_neg = np.sum(np.square(delta_neg), axis=1)
        viol = d_pos - d_neg + config.margin
        loss = float(np.mean(np.maximum(viol, 0.0)))
        active = viol > 0
        if want_grads:
            w = active / B
            gX = 2.0 * delta_pos * w[:, None]
            gY = -gX
            gXN = -2.0 * delta_neg * w[:, None]
            gYN = -gXN
            g_rel = np.zeros_like(R)
            np.add.at(g_rel, pos_rows, (pos_signs * 2.0 / B * active)[:, None] * delta_pos * 1.0)
            np.add.at(g_rel, neg_rows, (neg_signs * -2.0 / B * active)[:, None] * delta_neg * 1.0)
            grads["rel.R"] = g_rel
        active_fraction = float(np.mean(active))

    elif kind == "trinet":
        delta_pos = X - Y
        delta_neg = XN - YN
        d_pos = np.sum(np.square(delta_pos), axis=1)
        d_neg = np.sum(np.square(delta_neg), axis=1)
        viol = d_pos - d_neg + config.margin
        loss = float(np.mean(np.maximum(viol, 0.0)))
        active = viol > 0
        if want_grads:
            w = active / B
            gX = 2.0 * delta_pos * w[:, None]
            gY = -gX
            gXN = -2.0 * delta_neg * w[:, None]
            gYN = -gXN
        active_fraction = float(np.mean(active))

    elif kind == "sianet":
        delta_pos = X - Y
        delta_neg = XN - YN
        d_pos = np.sum(np.square(delta_pos), axis=1)
        d_neg = np.sum(np.square(delta_neg), axis=1)
        s = np.sqrt(d_neg)
        gap = np.maximum(config.margin - s, 0.0)
        loss = float(np.mean(d_pos + np.square(gap)))
        active = gap > 0
        if want_grads:
            gX = 2.0 * delta_pos / B
            gY = -gX
            coef = np.zeros(B)
            safe = s > 1e-12
            coef[safe] = -gap[safe] / s[safe] / B
            gXN = 2.0 * delta_neg * coef[:, None]
            gYN = -gXN
        active_fraction = float(np.mean(active))

    elif kind == "bpr":
        t = np.sum(X * Y, axis=1) - np.sum(XN * YN, axis=1)
        loss = float(np.mean(np.logaddexp(0.0, -t)))
        sig = _sigmoid(-t)
        if want_grads:
            coef = (-sig / B)[:, None]
            gX = coef * Y
            gY = coef * X
            gXN = -coef * YN
            gYN = -coef * XN
        active_fraction = float(np.mean(sig > 0.5))

    elif kind == "csn":
        M = model.params["mask.M"]
        pos_rows = np.array(
            [model.table.lookup(corpus.items[t.head].category_id, corpus.items[t.tail].category_id).row for t in batch],
            dtype=np.intp,
        )
        neg_rows = np.array(
            [model.table.lookup(corpus.items[t.neg_head].category_id, corpus.items[t.neg_tail].category_id).row for t in batch],
            dtype=np.intp,
        )
        Wp, Wn = M[pos_rows], M[neg_rows]
        delta_pos = X - Y
        delta_neg = XN - YN
        d_pos = np.sum(np.square(delta_pos * Wp), axis=1)
        d_neg = np.sum(np.square(delta_neg * Wn), axis=1)
        viol = d_pos - d_neg + config.margin
        penalty = config.mask_l1 * (np.sum(np.abs(Wp), axis=1) + np.sum(np.abs(Wn), axis=1))
        loss = float(np.mean(np.maximum(viol, 0.0) + penalty))
        active = viol > 0
        if want_grads:
            w = active / B
            gX = 2.0 * delta_pos * np.square(Wp) * w[:, None]
            gY = -gX
            gXN = -2.0 * delta_neg * np.square(Wn) * w[:, None]
            gYN = -gXN
            g_mask = np.zeros_like(M)
            np.add.at(g_mask, pos_rows, 2.0 * Wp * np.square(delta_pos) * w[:, None])
            np.add.at(g_mask, neg_rows, -2.0 * Wn * np.square(delta_neg) * w[:, None])
            np.add.at(g_mask, pos_rows, config.mask_l1 / B * np.sign(Wp))
            np.add.at(g_mask, neg_rows, config.mask_l1 / B * np.sign(Wn))
            grads["mask.M"] = g_mask
        active_fraction = float(np.mean(active))

    else:  # pragma: no cover - TrainConfig validates the kind
        raise ValueError(f"unknown model kind '{kind}'")

    if not want_grads:
        return loss, active_fraction, {}

    G_E = np.zeros_like(E)
    np.add.at(G_E, ih, gX)
    np.add.at(G_E, it, gY)
    np.add.at(G_E, inh, gXN)
    np.add.at(G_E, int_, gYN)

    offset = 0
    for modality in config.modalities:
        chunk = G_E[:, offset : offset + config.embed_dim]
        grads.update(encode_backward(model.params, caches[modality], chunk))
        offset += config.embed_dim
    return loss, active_fraction, grads


def tuple_gradients(
    model: Model, corpus: Corpus, five_tuple: FiveTuple
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and full parameter gradients for a single tuple (no dropout)."""
    loss, _, grads = batch_loss_and_grads(model, corpus, [five_tuple])
    return loss, grads


@dataclass
class TrainResult:
    model: Model
    history: list[dict]
    best_epoch: int | None
    best_val_auc: float | None


def train_epoch(
    model: Model,
    corpus: Corpus,
    velocity: dict[str, np.ndarray],
    epoch: int,
) -> dict:
    """One pass over freshly corrupted tuples; returns the epoch's stats."""
    config = model.config
    tuples, skipped = sample_five_tuples(
        corpus.splits["train"].pairs,
        corpus,
        model.table,
        seed=config.seed,
        epoch=epoch,
        negatives_per_side=config.negatives_per_side,
    )
    lr = lr_at(epoch, config.lr, config.lr_drop_every, config.lr_drop_factor)
    lr_scale = {
        name: config.encoder_lr_scale
        for name in model.params
        if not name.startswith(("rel.", "mask."))
    }
    losses: list[float] = []
    actives: list[float] = []
    for start in range(0, len(tuples), config.batch_size):
        batch = tuples[start : start + config.batch_size]
        masks = None
        if config.dropout > 0.0:
            n_unique = len({i for t in batch for i in (t.head, t.tail, t.neg_head, t.neg_tail)})
            masks = {}
            for modality in config.modalities:
                rng = rng_for(config.seed, "dropout", epoch, start, modality)
                masks[modality] = make_dropout_masks(
                    rng, (n_unique, model.input_dims[modality]), config.dropout
                )
        loss, active, grads = batch_loss_and_grads(model, corpus, batch, masks)
        sgd_momentum_step(model.params, grads, velocity, lr, config.momentum, lr_scale)
        losses.append(loss * len(batch))
        actives.append(active * len(batch))
    n = max(len(tuples), 1)
    return {
        "epoch": epoch,
        "lr": lr,
        "tuples": len(tuples),
        "skipped_slots": skipped,
        "loss": float(np.sum(losses) / n),
        "active_fraction": float(np.sum(actives) / n),
    }


def train(
    corpus: Corpus,
    config: TrainConfig,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train a fresh model; per-epoch validation AUC decides the kept weights.

    Validation candidates are frozen once up front from (seed, query, gold)
    so every epoch, model kind, and rerun ranks against identical sets.
    With ``keep_best`` the returned model carries the parameters of the
    best validation epoch; otherwise the final epoch's. ``on_epoch`` is
    called with each epoch's stats row as it completes.
    """
    model = build_model(corpus, config)
    velocity = {name: np.zeros_like(p) for name, p in model.params.items()}

    val_sets = build_eval_candidates(
        corpus, model.table, "val", config.val_negatives, config.val_mode, config.seed
    ) if corpus.splits["val"].pairs else []
    val_config = EvalConfig(ks=(10,), mode=config.val_mode, split="val")

    history: list[dict] = []
    best_epoch: int | None = None
    best_auc = -np.inf
    best_params: dict[str, np.ndarray] | None = None

    for epoch in range(config.epochs):
        stats = train_epoch(model, corpus, velocity, epoch)
        if val_sets:
            report = evaluate(model, corpus, val_sets, val_config)
            stats["val_auc"] = report.auc
            if report.auc is not None and report.auc > best_auc:
                best_auc = report.auc
                best_epoch = epoch
                best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            stats["val_auc"] = None
        history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)

    if config.keep_best and best_params is not None:
        model.params = best_params
    return TrainResult(
        model,
        history,
        best_epoch,
        None if best_epoch is None else float(best_auc),
    )

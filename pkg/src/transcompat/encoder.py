"""Per-modality feature encoders with unit normalization and manual backward.

Each modality owns a small network mapping raw features to an embedding on
the unit sphere::

    f_tilde = dropout(f)                    inverted dropout, train time only
    z       = W0 @ f_tilde + b0             (affine form)
    z       = W1 @ relu(W0 @ f_tilde + b0) + b1   (one hidden layer)
    u       = z / ||z||

Parameters live in a flat ``{name: float64 array}`` dict with keys
``<modality>.W0``, ``<modality>.b0`` and, when a hidden layer is configured,
``<modality>.W1``, ``<modality>.b1``. The presence of ``.W1`` is what selects
the hidden-layer form; no separate switch is stored.

Gradients are computed in closed form. For the normalization step, with
``u = z / ||z||``, the pullback of a gradient ``g_u`` is::

    g_z = (g_u - (u . g_u) u) / ||z||

which is tangent to the sphere at ``u`` by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .utils import rng_for

DEGENERATE_NORM = 1e-12


class DegenerateEmbeddingError(Exception):
    """The pre-normalization embedding has (numerically) zero norm."""


@dataclass
class EncodeResult:
    units: np.ndarray  # (batch, embed_dim), rows unit norm
    cache: dict  # intermediates consumed by encode_backward


def init_encoder_params(
    input_dims: dict[str, int],
    embed_dim: int,
    hidden_dim: int | None = None,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Fresh float64 parameters, weights U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero."""
    if embed_dim < 1:
        raise ValueError("embed_dim must be positive")
    params: dict[str, np.ndarray] = {}
    for modality in sorted(input_dims):
        d_in = input_dims[modality]
        if d_in < 1:
            raise ValueError(f"input dim for '{modality}' must be positive")
        rng = rng_for(seed, "encoder", modality)
        widths = [d_in, embed_dim] if hidden_dim is None else [d_in, hidden_dim, embed_dim]
        for layer in range(len(widths) - 1):
            fan_in, fan_out = widths[layer], widths[layer + 1]
            bound = 1.0 / np.sqrt(fan_in)
            params[f"{modality}.W{layer}"] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            params[f"{modality}.b{layer}"] = np.zeros(fan_out)
    return params


def encoder_modalities(params: dict[str, np.ndarray]) -> tuple[str, ...]:
    return tuple(sorted({name.split(".", 1)[0] for name in params}))


def make_dropout_masks(rng: np.random.Generator, shape: tuple[int, ...], rate: float) -> np.ndarray:
    """0/1 keep masks; entry is kept with probability 1 - rate."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    return (rng.random(shape) >= rate).astype(np.float64)


def encode(
    params: dict[str, np.ndarray],
    modality: str,
    features: np.ndarray,
    dropout_masks: np.ndarray | None = None,
    dropout_rate: float = 0.0,
) -> EncodeResult:
    """Encode a batch of raw feature rows (or a single row) for one modality.

    ``dropout_masks`` must match the feature shape when given; entries are 0
    (drop) or 1 (keep), and kept values are rescaled by 1/(1 - rate) so the
    expected pre-activation matches evaluation time. Raises
    :class:`DegenerateEmbeddingError` if any row's pre-normalization
    embedding has norm below 1e-12.
    """
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    if single:
        features = features[None, :]
        if dropout_masks is not None:
            dropout_masks = np.asarray(dropout_masks, dtype=np.float64)[None, :]

    if dropout_masks is None:
        f_tilde = features
    else:
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout rate {dropout_rate} outside [0, 1)")
        if dropout_masks.shape != features.shape:
            raise ValueError(
                f"dropout mask shape {dropout_masks.shape} != feature shape {features.shape}"
            )
        f_tilde = features * dropout_masks / (1.0 - dropout_rate)

    w0, b0 = params[f"{modality}.W0"], params[f"{modality}.b0"]
    hidden = f"{modality}.W1" in params
    if hidden:
        pre = f_tilde @ w0.T + b0
        h = np.maximum(pre, 0.0)
        z = h @ params[f"{modality}.W1"].T + params[f"{modality}.b1"]
    else:
        pre = h = None
        z = f_tilde @ w0.T + b0

    norms = np.linalg.norm(z, axis=1)
    bad = np.flatnonzero(norms < DEGENERATE_NORM)
    if bad.size:
        raise DegenerateEmbeddingError(
            f"modality '{modality}': embedding norm {norms[bad[0]]:.3e} below "
            f"{DEGENERATE_NORM:g} at batch row {bad[0]}"
        )
    units = z / norms[:, None]
    cache = {
        "modality": modality,
        "f_tilde": f_tilde,
        "pre": pre,
        "h": h,
        "norms": norms,
        "units": units,
        "single": single,
    }
    return EncodeResult(units[0] if single else units, cache)


def encode_backward(
    params: dict[str, np.ndarray],
    cache: dict,
    grad_units: np.ndarray,
) -> dict[str, np.ndarray]:
    """Parameter gradients, summed over the batch, for given embedding gradients."""
    grad_units = np.asarray(grad_units, dtype=np.float64)
    if cache["single"]:
        grad_units = grad_units[None, :]
    modality = cache["modality"]
    units, norms, f_tilde = cache["units"], cache["norms"], cache["f_tilde"]

    # Pullback through u = z / ||z||: project out the radial component.
    radial = np.sum(units * grad_units, axis=1, keepdims=True)
    g_z = (grad_units - radial * units) / norms[:, None]

    grads: dict[str, np.ndarray] = {}
    if cache["h"] is not None:
        h, pre = cache["h"], cache["pre"]
        grads[f"{modality}.W1"] = g_z.T @ h
        grads[f"{modality}.b1"] = g_z.sum(axis=0)
        g_h = g_z @ params[f"{modality}.W1"]
        g_pre = g_h * (pre > 0.0)
        grads[f"{modality}.W0"] = g_pre.T @ f_tilde
        grads[f"{modality}.b0"] = g_pre.sum(axis=0)
    else:
        grads[f"{modality}.W0"] = g_z.T @ f_tilde
        grads[f"{modality}.b0"] = g_z.sum(axis=0)
    return grads


def fuse(parts: list[np.ndarray] | tuple[np.ndarray, ...]) -> np.ndarray:
    """Concatenate per-modality unit embeddings into one item vector.

    The result has norm sqrt(len(parts)); callers fix the modality order
    once (the model stores it) so fused coordinates are comparable.
    """
    if not parts:
        raise ValueError("fuse needs at least one part")
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts], axis=-1)

"""Visual features: penultimate activations of a frozen image network.

The network is a small convolutional stack whose weights are generated
once from a fixed seed and never trained — the stand-in for a shipped
pretrained classifier, since this package cannot bundle real pretrained
weights. What matters downstream is what a pretrained extractor
guarantees: a fixed, deterministic map from image bytes to a feature
vector, identical across runs. Images are decoded with Pillow, resized
to a fixed resolution, and pushed through three stride-2 ReLU
convolutions, global average pooling, and a final linear layer whose
output is the feature row.

Items whose image is missing or undecodable get an all-zero row so that
row indices stay dense, and are listed in a sidecar skip file next to
the output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .records import FeaturizerError, RawItemRecord, validate_records
from .tnfc import write_feature_file

IMAGE_SIZE = 64
VISUAL_DIM = 128
_WEIGHT_SEED = 416923

_CHANNELS = (3, 16, 32, 64)


def _frozen_weights() -> dict[str, np.ndarray]:
    """The fixed network parameters, regenerated identically every call."""
    rng = np.random.default_rng(np.random.SeedSequence(_WEIGHT_SEED))
    weights: dict[str, np.ndarray] = {}
    for layer, (cin, cout) in enumerate(zip(_CHANNELS, _CHANNELS[1:])):
        fan_in = 9 * cin
        weights[f"conv{layer}.w"] = (
            rng.standard_normal((3, 3, cin, cout)) * np.sqrt(2.0 / fan_in)
        ).astype(np.float32)
        weights[f"conv{layer}.b"] = (rng.standard_normal(cout) * 0.1).astype(np.float32)
    pooled = _CHANNELS[-1]
    weights["fc.w"] = (
        rng.standard_normal((pooled, VISUAL_DIM)) * np.sqrt(1.0 / pooled)
    ).astype(np.float32)
    weights["fc.b"] = (rng.standard_normal(VISUAL_DIM) * 0.1).astype(np.float32)
    return weights


_WEIGHTS: dict[str, np.ndarray] | None = None


def _weights() -> dict[str, np.ndarray]:
    global _WEIGHTS
    if _WEIGHTS is None:
        _WEIGHTS = _frozen_weights()
    return _WEIGHTS


def _conv_relu(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 2) -> np.ndarray:
    """3x3 convolution (padding 1) + ReLU on an HWC float32 array."""
    h, width, cin = x.shape
    kh, kw, _, cout = w.shape
    pad = kh // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (width + 2 * pad - kw) // stride + 1
    cols = np.empty((oh, ow, kh * kw * cin), dtype=np.float32)
    for i in range(oh):
        for j in range(ow):
            patch = xp[i * stride : i * stride + kh, j * stride : j * stride + kw, :]
            cols[i, j] = patch.reshape(-1)
    out = cols @ w.reshape(-1, cout) + b
    return np.maximum(out, np.float32(0.0))


def decode_image(path: str | Path) -> np.ndarray:
    """Decode and resize an image to a float32 HWC array in [0, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float32) / np.float32(255.0)


def image_features(image: np.ndarray) -> np.ndarray:
    """Map one decoded image to its feature row (the penultimate layer)."""
    weights = _weights()
    x = np.ascontiguousarray(image, dtype=np.float32)
    for layer in range(len(_CHANNELS) - 1):
        x = _conv_relu(x, weights[f"conv{layer}.w"], weights[f"conv{layer}.b"])
    pooled = x.reshape(-1, x.shape[-1]).mean(axis=0)
    return (pooled @ weights["fc.w"] + weights["fc.b"]).astype(np.float32)


@dataclass
class ExtractionResult:
    path: Path
    n_rows: int
    dim: int
    skipped: list[tuple[str, str]]  # (item_id, reason), in row order

    @property
    def skip_path(self) -> Path:
        return self.path.with_suffix(".skipped.tsv")


def _write_skip_file(result: ExtractionResult) -> None:
    with open(result.skip_path, "w") as fh:
        for item_id, reason in result.skipped:
            fh.write(f"{item_id}\t{reason}\n")


def _features_for(record: RawItemRecord) -> tuple[np.ndarray | None, str | None]:
    if record.image_path is None:
        return None, "no image"
    try:
        image = decode_image(record.image_path)
    except (OSError, ValueError) as exc:
        return None, f"unreadable image: {exc}"
    return image_features(image), None


def extract_visual(
    records: list[RawItemRecord], output_path: str | Path, threads: int = 1
) -> ExtractionResult:
    """Write one visual feature row per record, in record order.

    Failed items (missing or undecodable image) get an all-zero row and a
    line in the sidecar skip file; extraction fails outright when the
    record list is empty or no image decodes at all. Work is spread over
    ``threads`` workers; rows are assembled in record order regardless of
    completion order.
    """
    validate_records(records)
    if not records:
        raise FeaturizerError("no records to extract visual features from")
    output_path = Path(output_path)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_features_for, records))
    else:
        outcomes = [_features_for(record) for record in records]

    rows = np.zeros((len(records), VISUAL_DIM), dtype=np.float32)
    skipped: list[tuple[str, str]] = []
    successes = 0
    for i, (record, (features, reason)) in enumerate(zip(records, outcomes)):
        if features is None:
            skipped.append((record.item_id, reason))
        else:
            rows[i] = features
            successes += 1
    if successes == 0:
        raise FeaturizerError("no image could be processed; not writing an all-zero feature file")

    write_feature_file(output_path, rows)
    result = ExtractionResult(output_path, len(records), VISUAL_DIM, skipped)
    _write_skip_file(result)
    return result

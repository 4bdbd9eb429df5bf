"""Seed derivation, hashing, and atomic file helpers shared across modules."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np


def stable_u64(text: str) -> int:
    """Map a string to a stable 64-bit integer (process-independent)."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, *tags: int | str) -> np.random.Generator:
    """Derive an independent, reproducible RNG stream from a base seed.

    Every random decision in the library flows from one user-facing seed,
    fanned out by component tags so streams never alias.
    """
    entropy: list[int] = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for tag in tags:
        entropy.append(stable_u64(tag) if isinstance(tag, str) else int(tag) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(entropy)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write a file such that readers never observe a partial write."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path: str | Path, obj: object) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

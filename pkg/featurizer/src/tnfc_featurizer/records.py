"""Raw dataset records: metadata parsing and validation.

A record describes one catalog item: its id, its category, and the raw
assets it carries — an image file path, a title/description text, or
both. Every record must bring at least one modality; ids must be unique
because they double as the dense row index into the feature files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class FeaturizerError(Exception):
    """A raw input is missing, malformed, or violates an invariant."""


@dataclass(frozen=True)
class RawItemRecord:
    item_id: str
    category_id: str
    image_path: str | None = None
    text: str | None = None


def validate_records(records: list[RawItemRecord]) -> None:
    """Check id uniqueness and the at-least-one-modality invariant."""
    seen: set[str] = set()
    for record in records:
        if record.item_id in seen:
            raise FeaturizerError(f"duplicate item_id '{record.item_id}'")
        seen.add(record.item_id)
        if record.image_path is None and record.text is None:
            raise FeaturizerError(
                f"item '{record.item_id}' has neither an image nor a text"
            )


def read_records(
    metadata_path: str | Path, image_dir: str | Path | None = None
) -> list[RawItemRecord]:
    """Parse a JSON-lines metadata file into validated records.

    Each line carries ``item_id`` and ``category_id`` plus optional
    ``image`` (a file name, resolved against ``image_dir`` when given)
    and ``text`` fields. Record order defines the feature row order.
    """
    metadata_path = Path(metadata_path)
    records: list[RawItemRecord] = []
    with open(metadata_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FeaturizerError(
                    f"{metadata_path}:{lineno}: invalid JSON: {exc}"
                ) from exc
            if not isinstance(obj, dict):
                raise FeaturizerError(
                    f"{metadata_path}:{lineno}: expected an object per line"
                )
            for key in ("item_id", "category_id"):
                if not isinstance(obj.get(key), str) or not obj.get(key):
                    raise FeaturizerError(
                        f"{metadata_path}:{lineno}: missing or non-string '{key}'"
                    )
            image = obj.get("image")
            if image is not None:
                if not isinstance(image, str):
                    raise FeaturizerError(
                        f"{metadata_path}:{lineno}: 'image' must be a string"
                    )
                if image_dir is not None:
                    image = str(Path(image_dir) / image)
            text = obj.get("text")
            if text is not None and not isinstance(text, str):
                raise FeaturizerError(
                    f"{metadata_path}:{lineno}: 'text' must be a string"
                )
            records.append(
                RawItemRecord(
                    item_id=obj["item_id"],
                    category_id=obj["category_id"],
                    image_path=image,
                    text=text,
                )
            )
    validate_records(records)
    return records

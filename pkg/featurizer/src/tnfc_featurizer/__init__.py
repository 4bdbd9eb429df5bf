"""Offline feature extraction for compatibility-model corpora.

Turns raw dataset dumps (an image directory plus a JSON-lines metadata
file) into the three files the training side consumes: binary ``TNFC``
feature matrices per modality, ``items.jsonl``, and ``pairs.tsv``. The
file formats are the only contract with the training package; nothing is
imported from it.
"""

from .records import FeaturizerError, RawItemRecord, read_records, validate_records
from .tnfc import read_feature_file, write_feature_file
from .visual import VISUAL_DIM, decode_image, extract_visual, image_features
from .textual import (
    TEXT_DIM,
    build_vocabulary,
    extract_textual,
    tokenize,
    word_vector,
)
from .assemble import featurize, write_manifest

__all__ = [
    "FeaturizerError",
    "RawItemRecord",
    "read_records",
    "validate_records",
    "read_feature_file",
    "write_feature_file",
    "VISUAL_DIM",
    "decode_image",
    "extract_visual",
    "image_features",
    "TEXT_DIM",
    "build_vocabulary",
    "extract_textual",
    "tokenize",
    "word_vector",
    "featurize",
    "write_manifest",
]

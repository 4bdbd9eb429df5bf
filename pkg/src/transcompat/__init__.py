"""Translation-based item compatibility: encoders, relation vectors, training, evaluation."""

from .corpus import Corpus, CorpusError, load_corpus, read_feature_file, write_feature_file
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusError",
    "SynthConfig",
    "generate_synthetic",
    "load_corpus",
    "read_feature_file",
    "write_feature_file",
    "__version__",
]

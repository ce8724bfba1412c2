"""Batch analytics for hashtag-annotated post corpora."""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusFormatError,
    PostRecord,
    QuarterBucket,
    bucket_share_series,
    load_corpus,
    save_corpus,
    top_k_hashtags,
)
from .embedding import (
    EmbeddingTable,
    TrainConfig,
    Vocabulary,
    build_vocab,
    cosine_distance,
    nearest_neighbors,
    train,
)
from .synth import SyntheticSpec, SynthesisError, demo_spec, generate_synthetic

__all__ = [
    "Corpus",
    "CorpusFormatError",
    "PostRecord",
    "QuarterBucket",
    "bucket_share_series",
    "load_corpus",
    "save_corpus",
    "top_k_hashtags",
    "EmbeddingTable",
    "TrainConfig",
    "Vocabulary",
    "build_vocab",
    "cosine_distance",
    "nearest_neighbors",
    "train",
    "SyntheticSpec",
    "SynthesisError",
    "demo_spec",
    "generate_synthetic",
    "__version__",
]

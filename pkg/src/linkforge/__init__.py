"""linkforge: entity linking via a heuristic string cascade, contextual
embedding matching, and a hybrid of the two, plus evaluation and synonym
discovery utilities."""

from .corpus import Corpus, Entity, MentionRecord, ingest_jsonl, split_entities, split_reference_query
from .ctxlink import Candidate, LinkResult, ReferenceIndex, build_reference_index, link_bi, link_cross
from .embed import (
    CrossHead,
    EncoderPort,
    MentionEmbedding,
    StubEncoder,
    TokenEmbeddingSeq,
    bce_loss,
    cosine_distance,
    cross_probability,
    max_margin_loss,
    pool_mention,
    sample_pairs,
    stub_encoder,
)
from .evalkit import average_precision, detect_nouns, discover_synonyms, evaluate_top1, time_linkers
from .fuzzy import DeleteIndex, HeuristicOutcome, build_index, dl_distance, heuristic_link
from .hybrid import HybridConfig, link_hybrid
from .normalize import CascadeOutput, NormalizerConfig, cascade

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CascadeOutput",
    "Corpus",
    "CrossHead",
    "DeleteIndex",
    "EncoderPort",
    "Entity",
    "HeuristicOutcome",
    "HybridConfig",
    "LinkResult",
    "MentionEmbedding",
    "MentionRecord",
    "NormalizerConfig",
    "ReferenceIndex",
    "StubEncoder",
    "TokenEmbeddingSeq",
    "average_precision",
    "bce_loss",
    "build_index",
    "build_reference_index",
    "cascade",
    "cosine_distance",
    "cross_probability",
    "detect_nouns",
    "discover_synonyms",
    "dl_distance",
    "evaluate_top1",
    "heuristic_link",
    "ingest_jsonl",
    "link_bi",
    "link_cross",
    "link_hybrid",
    "max_margin_loss",
    "pool_mention",
    "sample_pairs",
    "split_entities",
    "split_reference_query",
    "stub_encoder",
    "time_linkers",
]

"""Encoder abstraction, mention pooling, losses, and pair sampling.

The contextual linkers consume encoders through :class:`EncoderPort`;
everything here is dimension-agnostic (the dimension is whatever the
encoder reports). Training itself lives in the sidecar; this module only
exports pair samples and provides the loss arithmetic used to verify it.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .corpus import Corpus, MentionRecord

__all__ = [
    "CrossHead",
    "EncoderPort",
    "MentionEmbedding",
    "PairSample",
    "StubEncoder",
    "TokenEmbeddingSeq",
    "bce_loss",
    "cosine_distance",
    "cross_probability",
    "max_margin_loss",
    "pool_mention",
    "read_pairs_jsonl",
    "sample_pairs",
    "stub_encoder",
    "write_pairs_jsonl",
]

_BCE_EPS = 1e-7


@dataclass(frozen=True, eq=False)
class TokenEmbeddingSeq:
    """Per-token vectors for one sentence plus their character spans."""

    vectors: np.ndarray  # shape (n_tokens, dim)
    token_char_spans: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a (n_tokens, dim) array")
        if len(self.vectors) != len(self.token_char_spans):
            raise ValueError("one char span per token vector is required")

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class MentionEmbedding:
    """Pooled dense vector for one mention in context."""

    vector: np.ndarray
    entity_id: str | None = None
    record_ref: str | None = None


@dataclass(frozen=True)
class PairSample:
    """A labeled sentence pair for contrastive / cross-encoder training."""

    left: str
    right: str
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.left == self.right:
            raise ValueError("a pair must join two distinct records")


@dataclass(frozen=True, eq=False)
class CrossHead:
    """Linear head reducing a pair embedding to a match probability."""

    weights: np.ndarray
    bias: float

    @classmethod
    def seeded(cls, dimension: int, seed: int) -> "CrossHead":
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(dimension)
        return cls(weights=w / np.linalg.norm(w), bias=0.0)


class EncoderPort(Protocol):
    """What the contextual linkers need from an encoder."""

    @property
    def dimension(self) -> int: ...

    @property
    def supports_pair_encoding(self) -> bool: ...

    def encode(self, sentence: str, span: tuple[int, int]) -> TokenEmbeddingSeq: ...

    def encode_pair(
        self,
        sentence_a: str,
        span_a: tuple[int, int],
        sentence_b: str,
        span_b: tuple[int, int],
    ) -> np.ndarray: ...


def _spans_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def pool_mention(seq: TokenEmbeddingSeq, span: tuple[int, int]) -> MentionEmbedding:
    """Mean of all token vectors whose character span overlaps the mention span."""
    rows = [i for i, tok_span in enumerate(seq.token_char_spans) if _spans_overlap(tok_span, span)]
    if not rows:
        raise ValueError(
            f"no token overlaps mention span {span}; token spans: {seq.token_char_spans}"
        )
    return MentionEmbedding(vector=seq.vectors[rows].mean(axis=0))


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v), in [0, 2]. Raises on zero vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance is undefined for zero vectors")
    # rounding can push the result a few ulps outside [0, 2]
    return float(min(max(1.0 - np.dot(u, v) / (nu * nv), 0.0), 2.0))


def max_margin_loss(dist: float, y: int, margin: float = 0.5) -> float:
    """Contrastive loss: y * dist^2 + (1 - y) * max(margin - dist, 0)^2."""
    if dist < 0:
        raise ValueError(f"distance must be non-negative, got {dist}")
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    if y == 1:
        return dist * dist
    hinge = max(margin - dist, 0.0)
    return hinge * hinge


def cross_probability(pair_vec: np.ndarray, head: CrossHead) -> float:
    """Logistic sigmoid of weights . pair_vec + bias."""
    pair_vec = np.asarray(pair_vec, dtype=float)
    if pair_vec.shape != head.weights.shape:
        raise ValueError(
            f"dimension mismatch: pair vector {pair_vec.shape} vs head {head.weights.shape}"
        )
    z = float(np.dot(head.weights, pair_vec) + head.bias)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def bce_loss(p: float, y: int) -> float:
    """Binary cross entropy; p is clamped to [1e-7, 1 - 1e-7] first."""
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    p = min(max(p, _BCE_EPS), 1.0 - _BCE_EPS)
    return -(y * math.log(p) + (1 - y) * math.log(1.0 - p))


def sample_pairs(
    corpus: Corpus, negatives_per_positive: int = 1, seed: int = 0
) -> list[PairSample]:
    """Emit every within-entity record pair as positive plus sampled negatives.

    Negatives are drawn uniformly (without replacement where possible)
    from cross-entity record pairs, ``negatives_per_positive`` per
    positive; labels are correct by construction and the output is a
    deterministic function of the seed.
    """
    if negatives_per_positive < 0:
        raise ValueError("negatives_per_positive must be >= 0")
    by_entity: dict[str, list[MentionRecord]] = {}
    for rec in corpus.records:
        by_entity.setdefault(rec.entity_id, []).append(rec)
    if len(by_entity) < 2 and negatives_per_positive > 0:
        raise ValueError("need records from at least 2 entities to sample negatives")

    positives: list[PairSample] = []
    for entity_id in sorted(by_entity):
        records = sorted(by_entity[entity_id], key=lambda r: r.record_id)
        if len(records) < 2:
            warnings.warn(f"entity {entity_id!r} has one record; no positive pairs", stacklevel=2)
            continue
        for i in range(len(records)):
            for j in range(i + 1, len(records)):
                positives.append(
                    PairSample(left=records[i].record_id, right=records[j].record_id, label=1)
                )

    n_negatives = negatives_per_positive * len(positives)
    negatives: list[PairSample] = []
    if n_negatives:
        all_records = sorted(corpus.records, key=lambda r: r.record_id)
        cross_pairs = [
            (a.record_id, b.record_id)
            for i, a in enumerate(all_records)
            for b in all_records[i + 1 :]
            if a.entity_id != b.entity_id
        ]
        if not cross_pairs:
            raise ValueError("no cross-entity record pairs available for negatives")
        rng = np.random.default_rng(seed)
        if n_negatives <= len(cross_pairs):
            chosen = rng.choice(len(cross_pairs), size=n_negatives, replace=False)
        else:
            chosen = rng.choice(len(cross_pairs), size=n_negatives, replace=True)
        negatives = [
            PairSample(left=cross_pairs[i][0], right=cross_pairs[i][1], label=0)
            for i in sorted(int(i) for i in chosen)
        ]
    return positives + negatives


def write_pairs_jsonl(pairs: Iterable[PairSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for pair in pairs:
            obj = {"left_record": pair.left, "right_record": pair.right, "label": pair.label}
            handle.write(json.dumps(obj, sort_keys=True) + "\n")


def read_pairs_jsonl(path: str | Path) -> list[PairSample]:
    out = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                PairSample(left=obj["left_record"], right=obj["right_record"], label=int(obj["label"]))
            )
    return out


# ---------------------------------------------------------------------------
# Deterministic stub encoder
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\S+")


class StubEncoder:
    """Deterministic, context-free test encoder.

    Tokenizes on whitespace; every token string maps to a fixed unit
    vector derived by seeded hashing, so identical tokens embed
    identically in any sentence. ``encode_pair`` returns the mean of the
    two pooled mention vectors.
    """

    def __init__(self, seed: int = 0, dimension: int = 64) -> None:
        self.seed = seed
        self._dimension = dimension
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def supports_pair_encoding(self) -> bool:
        return True

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                f"{self.seed}\x1f{token}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.standard_normal(self._dimension)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec

    def encode(self, sentence: str, span: tuple[int, int]) -> TokenEmbeddingSeq:
        matches = list(_TOKEN_RE.finditer(sentence))
        if not matches:
            raise ValueError("cannot encode an empty sentence")
        vectors = np.stack([self._token_vector(m.group(0)) for m in matches])
        spans = tuple((m.start(), m.end()) for m in matches)
        return TokenEmbeddingSeq(vectors=vectors, token_char_spans=spans)

    def encode_pair(
        self,
        sentence_a: str,
        span_a: tuple[int, int],
        sentence_b: str,
        span_b: tuple[int, int],
    ) -> np.ndarray:
        pooled_a = pool_mention(self.encode(sentence_a, span_a), span_a).vector
        pooled_b = pool_mention(self.encode(sentence_b, span_b), span_b).vector
        return (pooled_a + pooled_b) / 2.0


def stub_encoder(seed: int = 0, dimension: int = 64) -> StubEncoder:
    """Factory for the deterministic stub encoder."""
    return StubEncoder(seed=seed, dimension=dimension)

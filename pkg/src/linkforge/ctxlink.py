"""Contextual linking: reference-embedding index and Bi-/Cross-Encoder inference.

The Bi-Encoder pools a query mention, retrieves the nearest reference
mention embeddings by cosine distance, and ranks entities by their
closest reference. The Cross-Encoder scores (query, reference) pairs
jointly through the encoder's pair mode and ranks entities by their best
pair probability.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ann import DEFAULT_ANN_PARAMS, AnnForest
from .corpus import Corpus, MentionRecord, ROLE_REFERENCE
from .embed import CrossHead, EncoderPort, cross_probability, pool_mention

__all__ = [
    "Candidate",
    "LinkError",
    "LinkResult",
    "ReferenceIndex",
    "build_reference_index",
    "deserialize_index",
    "link_bi",
    "link_cross",
    "serialize_index",
]

INDEX_FORMAT = "linkforge-ref-index"
INDEX_VERSION = 1

METHOD_HEURISTIC = "heuristic"
METHOD_BI = "bi"
METHOD_CROSS = "cross"
_METHODS = (METHOD_HEURISTIC, METHOD_BI, METHOD_CROSS)

# methods whose scores are distances (ascending rank); cross ranks by
# descending probability
_ASCENDING = {METHOD_HEURISTIC: True, METHOD_BI: True, METHOD_CROSS: False}


class LinkError(RuntimeError):
    """Linking failed; carries any best-effort candidates gathered so far."""

    def __init__(self, message: str, tie_entity_ids: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.tie_entity_ids = tie_entity_ids


@dataclass(frozen=True)
class Candidate:
    """One ranked entity with its score and provenance."""

    entity_id: str
    score: float
    method: str
    record_ref: str | None = None

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class LinkResult:
    """Ranked, entity-deduplicated linking candidates (best first)."""

    ranked: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        ids = [c.entity_id for c in self.ranked]
        if len(ids) != len(set(ids)):
            raise ValueError("entities must be distinct within a LinkResult")
        methods = {c.method for c in self.ranked}
        if len(methods) > 1:
            raise ValueError(f"mixed methods in one LinkResult: {sorted(methods)}")
        if self.ranked:
            scores = [c.score for c in self.ranked]
            if _ASCENDING[self.ranked[0].method]:
                ok = all(a <= b for a, b in zip(scores, scores[1:]))
            else:
                ok = all(a >= b for a, b in zip(scores, scores[1:]))
            if not ok:
                raise ValueError("scores must be monotone in rank")

    @property
    def top(self) -> Candidate | None:
        return self.ranked[0] if self.ranked else None

    def to_obj(self) -> dict:
        return {
            "ranked": [
                {
                    "entity_id": c.entity_id,
                    "score": c.score,
                    "method": c.method,
                    "record_ref": c.record_ref,
                }
                for c in self.ranked
            ]
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "LinkResult":
        return cls(
            ranked=tuple(
                Candidate(
                    entity_id=c["entity_id"],
                    score=c["score"],
                    method=c["method"],
                    record_ref=c.get("record_ref"),
                )
                for c in obj["ranked"]
            )
        )


@dataclass(frozen=True, eq=False)
class ReferenceIndex:
    """Pooled mention embeddings of all reference records.

    ``mode`` is "exact" (full scan) or "approximate" (ANN forest);
    ``unlinkable`` lists entities with no usable reference record.
    Immutable after build; concurrent queries are safe.
    """

    entity_ids: tuple[str, ...]
    record_refs: tuple[str, ...]
    vectors: np.ndarray  # (n, dim), unnormalized pooled embeddings
    mode: str
    ann_params: dict = field(default_factory=dict)
    unlinkable: tuple[str, ...] = ()
    forest: AnnForest | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "approximate"):
            raise ValueError(f"mode must be exact or approximate, got {self.mode!r}")
        if len(self.entity_ids) != len(self.record_refs) or len(self.entity_ids) != len(self.vectors):
            raise ValueError("entity_ids, record_refs, and vectors must align")

    def __len__(self) -> int:
        return len(self.entity_ids)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1]) if len(self.vectors) else 0

    def _prepared(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
        """Cached query-time layout: unit vectors plus per-entity entry segments.

        Returns (unit_matrix, perm, segment_starts, entity_ids_by_segment)
        where ``perm`` lists entry indices grouped by entity (entities in
        sorted-id order, entries in ascending index order within a group).
        """
        cache = getattr(self, "_cache", None)
        if cache is None:
            norms = np.linalg.norm(self.vectors, axis=1)
            if np.any(norms == 0):
                raise ValueError("reference index contains a zero vector")
            unit = self.vectors / norms[:, None]
            by_entity = sorted(set(self.entity_ids))
            order = {eid: k for k, eid in enumerate(by_entity)}
            ent_ord = np.array([order[eid] for eid in self.entity_ids], dtype=np.int64)
            perm = np.lexsort((np.arange(len(ent_ord)), ent_ord))
            starts = np.searchsorted(ent_ord[perm], np.arange(len(by_entity)))
            cache = (unit, perm, starts, by_entity)
            object.__setattr__(self, "_cache", cache)
        return cache


def build_reference_index(
    corpus: Corpus,
    encoder: EncoderPort,
    mode: str = "exact",
    ann_params: dict | None = None,
) -> ReferenceIndex:
    """Embed every reference record of the corpus into an index.

    Records the encoder fails on are skipped with a warning and entity
    coverage is re-checked; entities left without entries are reported as
    unlinkable. Approximate mode builds the ANN forest with a recorded
    seed so rebuilds are bit-identical.
    """
    entity_ids: list[str] = []
    record_refs: list[str] = []
    rows: list[np.ndarray] = []
    for rec in corpus.records:
        if rec.role != ROLE_REFERENCE:
            continue
        try:
            pooled = pool_mention(encoder.encode(rec.sentence, rec.span), rec.span)
        except Exception as exc:  # noqa: BLE001 - encoder failures must not kill the build
            warnings.warn(f"skipping record {rec.record_id}: {exc}", stacklevel=2)
            continue
        entity_ids.append(rec.entity_id)
        record_refs.append(rec.record_id)
        rows.append(pooled.vector)

    covered = set(entity_ids)
    unlinkable = tuple(sorted(set(corpus.entities) - covered))
    vectors = np.stack(rows) if rows else np.zeros((0, encoder.dimension))

    forest = None
    params: dict = {}
    if mode == "approximate":
        params = dict(DEFAULT_ANN_PARAMS)
        params.setdefault("seed", 0)
        if ann_params:
            params.update(ann_params)
        forest = AnnForest(
            trees=params["trees"],
            leaf_size=params["leaf_size"],
            search_k=params["search_k"],
            seed=params["seed"],
        )
        if len(vectors):
            forest.build(vectors)
    return ReferenceIndex(
        entity_ids=tuple(entity_ids),
        record_refs=tuple(record_refs),
        vectors=vectors,
        mode=mode,
        ann_params=params,
        unlinkable=unlinkable,
        forest=forest,
    )


def _rank_by_entity_min(
    entity_ids: Sequence[str],
    record_refs: Sequence[str],
    distances: np.ndarray,
    top_k: int,
) -> LinkResult:
    best: dict[str, tuple[float, str]] = {}
    for entity_id, ref, dist in zip(entity_ids, record_refs, distances):
        d = float(dist)
        prev = best.get(entity_id)
        if prev is None or d < prev[0]:
            best[entity_id] = (d, ref)
    ranked = sorted(best.items(), key=lambda item: (item[1][0], item[0]))[:top_k]
    return LinkResult(
        ranked=tuple(
            Candidate(entity_id=eid, score=dist, method=METHOD_BI, record_ref=ref)
            for eid, (dist, ref) in ranked
        )
    )


def link_bi(
    sentence: str,
    span: tuple[int, int],
    index: ReferenceIndex,
    encoder: EncoderPort,
    top_k: int = 10,
) -> LinkResult:
    """Rank entities by the cosine distance of their closest reference mention.

    Exact mode scans every entry; approximate mode asks the ANN forest for
    enough nearest entries to cover ``top_k`` entities. Ties break toward
    the smaller entity id.
    """
    if len(index) == 0:
        raise LinkError("reference index is empty")
    pooled = pool_mention(encoder.encode(sentence, span), span).vector
    if index.mode == "exact":
        try:
            unit, perm, starts, by_entity = index._prepared()
        except ValueError as exc:
            raise LinkError(str(exc)) from exc
        qnorm = np.linalg.norm(pooled)
        if qnorm == 0:
            raise LinkError("query mention pooled to a zero vector")
        distances = np.clip(1.0 - unit @ (pooled / qnorm), 0.0, 2.0)
        grouped = distances[perm]
        entity_min = np.minimum.reduceat(grouped, starts)
        # stable sort ties break by ordinal, i.e. by entity id
        best = np.argsort(entity_min, kind="stable")[:top_k]
        ends = np.append(starts[1:], len(perm))
        ranked = []
        for ord_ in best:
            segment = grouped[starts[ord_] : ends[ord_]]
            entry = perm[starts[ord_] + int(np.argmin(segment))]
            ranked.append(
                Candidate(
                    entity_id=by_entity[ord_],
                    score=float(distances[entry]),
                    method=METHOD_BI,
                    record_ref=index.record_refs[entry],
                )
            )
        return LinkResult(ranked=tuple(ranked))
    assert index.forest is not None
    hits = index.forest.query(pooled, top_k=max(top_k * 8, 64))
    rows = [i for i, _ in hits]
    dists = np.array([d for _, d in hits])
    return _rank_by_entity_min(
        [index.entity_ids[i] for i in rows],
        [index.record_refs[i] for i in rows],
        dists,
        top_k,
    )


def link_cross(
    sentence: str,
    span: tuple[int, int],
    candidates: Sequence[MentionRecord],
    encoder: EncoderPort,
    head: CrossHead,
) -> LinkResult:
    """Rank candidate records' entities by pair probability (descending).

    Each (query, candidate) pair is jointly encoded; per entity the
    highest-probability reference wins. Ties break toward the smaller
    entity id.
    """
    if not candidates:
        raise LinkError("cross-encoder needs a non-empty candidate list")
    if not encoder.supports_pair_encoding:
        raise LinkError("encoder does not support pair encoding; use the Bi-Encoder instead")
    best: dict[str, tuple[float, str]] = {}
    for rec in candidates:
        pair_vec = encoder.encode_pair(sentence, span, rec.sentence, rec.span)
        prob = cross_probability(pair_vec, head)
        prev = best.get(rec.entity_id)
        if prev is None or prob > prev[0]:
            best[rec.entity_id] = (prob, rec.record_id)
    ranked = sorted(best.items(), key=lambda item: (-item[1][0], item[0]))
    return LinkResult(
        ranked=tuple(
            Candidate(entity_id=eid, score=prob, method=METHOD_CROSS, record_ref=ref)
            for eid, (prob, ref) in ranked
        )
    )


def serialize_index(index: ReferenceIndex, path: str | Path) -> None:
    """Write the index as canonical versioned JSON (bit-stable for a fixed build)."""
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "mode": index.mode,
        "ann_params": index.ann_params,
        "unlinkable": list(index.unlinkable),
        "entity_ids": list(index.entity_ids),
        "record_refs": list(index.record_refs),
        "vectors": [[float(x) for x in row] for row in index.vectors],
        "forest": index.forest.to_payload()["forest"] if index.forest is not None else None,
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def deserialize_index(path: str | Path) -> ReferenceIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
    if payload.get("version") != INDEX_VERSION:
        raise ValueError(
            f"{path}: unsupported index version {payload.get('version')} (expected {INDEX_VERSION})"
        )
    vectors = np.array(payload["vectors"], dtype=np.float64)
    if vectors.size == 0:
        vectors = vectors.reshape(0, 0)
    forest = None
    if payload["forest"] is not None:
        forest = AnnForest.from_payload(
            {"params": {**DEFAULT_ANN_PARAMS, "seed": 0, **payload["ann_params"]}, "forest": payload["forest"]},
            vectors,
        )
    return ReferenceIndex(
        entity_ids=tuple(payload["entity_ids"]),
        record_refs=tuple(payload["record_refs"]),
        vectors=vectors,
        mode=payload["mode"],
        ann_params=payload["ann_params"],
        unlinkable=tuple(payload["unlinkable"]),
        forest=forest,
    )

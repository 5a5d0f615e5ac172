"""Entity/mention dataset loading, validation, and splitting.

Corpora are read from JSONL (one mention record per line, optionally a
separate entities file for zero-mention entities), validated against the
span/surface contract, and partitioned into disjoint-entity splits and
per-entity reference/query roles.
"""
from __future__ import annotations

import hashlib
import json
import math
import unicodedata
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Corpus",
    "Entity",
    "IngestReport",
    "MentionRecord",
    "ingest_jsonl",
    "iter_queries",
    "split_entities",
    "split_reference_query",
    "unlinkable_entities",
    "write_jsonl",
]

ROLE_REFERENCE = "reference"
ROLE_QUERY = "query"
_ROLES = (ROLE_REFERENCE, ROLE_QUERY)


@dataclass(frozen=True)
class Entity:
    """A linkable target with an opaque id and a canonical name."""

    id: str
    canonical_name: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("entity id must be non-empty")
        if not self.canonical_name:
            raise ValueError(f"entity {self.id!r}: canonical_name must be non-empty")


@dataclass(frozen=True)
class MentionRecord:
    """One sentence containing one mention span of one entity.

    ``span`` is a half-open character offset pair into the NFC-normalized
    sentence; ``sentence[span]`` equals ``surface`` exactly.
    """

    entity_id: str
    surface: str
    sentence: str
    span: tuple[int, int]
    role: str | None = None

    def __post_init__(self) -> None:
        start, end = self.span
        if not (0 <= start < end <= len(self.sentence)):
            raise ValueError(f"span {self.span} out of bounds for sentence of length {len(self.sentence)}")
        if self.sentence[start:end] != self.surface:
            raise ValueError(f"sentence[{start}:{end}] does not equal surface {self.surface!r}")
        if self.role is not None and self.role not in _ROLES:
            raise ValueError(f"role must be one of {_ROLES}, got {self.role!r}")

    @property
    def record_id(self) -> str:
        """Stable content-derived identifier (survives JSONL round-trips)."""
        key = "\x1f".join((self.entity_id, self.sentence, str(self.span[0]), str(self.span[1])))
        return hashlib.blake2b(key.encode("utf-8"), digest_size=6).hexdigest()


@dataclass(frozen=True)
class IngestReport:
    """What ingestion skipped: rejected lines (with reasons) and duplicates."""

    rejected: tuple[tuple[int, str], ...] = ()
    duplicates: int = 0


@dataclass(frozen=True)
class Corpus:
    """Immutable set of entities plus their mention records."""

    entities: Mapping[str, Entity]
    records: tuple[MentionRecord, ...]
    split_tag: str = "unsplit"
    ingest_report: IngestReport = field(default=IngestReport(), compare=False)

    def __post_init__(self) -> None:
        for rec in self.records:
            if rec.entity_id not in self.entities:
                raise ValueError(f"record references unknown entity {rec.entity_id!r}")

    def records_for(self, entity_id: str, role: str | None = None) -> tuple[MentionRecord, ...]:
        return tuple(
            r for r in self.records if r.entity_id == entity_id and (role is None or r.role == role)
        )

    def by_record_id(self) -> dict[str, MentionRecord]:
        return {r.record_id: r for r in self.records}


def _nfc(s: str) -> str:
    return unicodedata.normalize("NFC", s)


def _record_from_obj(obj: dict) -> tuple[Entity, MentionRecord]:
    for key in ("entity_id", "canonical_name", "surface", "sentence", "span_start", "span_end"):
        if key not in obj:
            raise ValueError(f"missing key {key!r}")
    sentence = _nfc(str(obj["sentence"]))
    surface = _nfc(str(obj["surface"]))
    span = (int(obj["span_start"]), int(obj["span_end"]))
    role = obj.get("role")
    if role is not None:
        role = str(role)
    entity = Entity(id=str(obj["entity_id"]), canonical_name=_nfc(str(obj["canonical_name"])))
    record = MentionRecord(
        entity_id=entity.id, surface=surface, sentence=sentence, span=span, role=role
    )
    return entity, record


def ingest_jsonl(path: str | Path, entities_path: str | Path | None = None) -> Corpus:
    """Load and validate a corpus from JSONL.

    Each line is one JSON object with keys entity_id, canonical_name,
    surface, sentence, span_start, span_end, and optional role. Malformed
    or contract-violating lines are recorded in the attached report and
    skipped; duplicate (entity_id, sentence, span) records are
    deduplicated. ``entities_path`` optionally supplies additional
    zero-mention entities as {id, canonical_name} lines.
    """
    entities: dict[str, Entity] = {}
    records: list[MentionRecord] = []
    seen: set[tuple[str, str, tuple[int, int]]] = set()
    rejected: list[tuple[int, str]] = []
    duplicates = 0

    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entity, record = _record_from_obj(obj)
            except (ValueError, TypeError) as exc:
                rejected.append((lineno, str(exc)))
                continue
            known = entities.get(entity.id)
            if known is not None and known.canonical_name != entity.canonical_name:
                rejected.append(
                    (lineno, f"entity {entity.id!r}: conflicting canonical_name {entity.canonical_name!r}")
                )
                continue
            key = (record.entity_id, record.sentence, record.span)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            entities.setdefault(entity.id, entity)
            records.append(record)

    if entities_path is not None:
        with Path(entities_path).open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    entity = Entity(id=str(obj["id"]), canonical_name=_nfc(str(obj["canonical_name"])))
                except (KeyError, ValueError, TypeError) as exc:
                    rejected.append((lineno, f"entities file: {exc}"))
                    continue
                known = entities.get(entity.id)
                if known is not None and known.canonical_name != entity.canonical_name:
                    rejected.append(
                        (lineno, f"entities file: entity {entity.id!r} conflicting canonical_name")
                    )
                    continue
                entities.setdefault(entity.id, entity)

    return Corpus(
        entities=entities,
        records=tuple(records),
        ingest_report=IngestReport(rejected=tuple(rejected), duplicates=duplicates),
    )


def write_jsonl(corpus: Corpus, path: str | Path, entities_path: str | Path | None = None) -> None:
    """Write a corpus back to JSONL; inverse of :func:`ingest_jsonl`.

    Zero-mention entities only survive a round trip when ``entities_path``
    is given.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for rec in corpus.records:
            obj = {
                "entity_id": rec.entity_id,
                "canonical_name": corpus.entities[rec.entity_id].canonical_name,
                "surface": rec.surface,
                "sentence": rec.sentence,
                "span_start": rec.span[0],
                "span_end": rec.span[1],
            }
            if rec.role is not None:
                obj["role"] = rec.role
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
    if entities_path is not None:
        with Path(entities_path).open("w", encoding="utf-8") as handle:
            for entity_id in sorted(corpus.entities):
                entity = corpus.entities[entity_id]
                obj = {"id": entity.id, "canonical_name": entity.canonical_name}
                handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _stable_entity_seed(seed: int, entity_id: str) -> np.random.Generator:
    digest = hashlib.blake2b(entity_id.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng([seed, int.from_bytes(digest, "big")])


def _split_sizes(total: int, fractions: tuple[float, float, float]) -> list[int]:
    # largest-remainder allocation, then guarantee every split >= 1
    raw = [total * f for f in fractions]
    sizes = [math.floor(x) for x in raw]
    remainders = sorted(range(3), key=lambda i: (raw[i] - sizes[i], -i), reverse=True)
    for i in range(total - sum(sizes)):
        sizes[remainders[i % 3]] += 1
    for i in range(3):
        while sizes[i] == 0:
            donor = max(range(3), key=lambda j: sizes[j])
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


def split_entities(
    corpus: Corpus, fractions: tuple[float, float, float], seed: int
) -> tuple[Corpus, Corpus, Corpus]:
    """Partition a corpus into train/validation/test with disjoint entity sets.

    Every record follows its entity; the assignment is a deterministic
    function of ``seed``.
    """
    if len(fractions) != 3:
        raise ValueError("exactly three fractions are required")
    if any(f <= 0 for f in fractions):
        raise ValueError(f"fractions must all be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(corpus.entities)
    if n < 3:
        raise ValueError(f"need at least 3 entities to make 3 splits, have {n}")

    entity_ids = sorted(corpus.entities)
    rng = np.random.default_rng(seed)
    rng.shuffle(entity_ids)
    sizes = _split_sizes(n, tuple(fractions))

    out: list[Corpus] = []
    offset = 0
    for size, tag in zip(sizes, ("train", "validation", "test")):
        chosen = set(entity_ids[offset : offset + size])
        offset += size
        out.append(
            Corpus(
                entities={eid: corpus.entities[eid] for eid in sorted(chosen)},
                records=tuple(r for r in corpus.records if r.entity_id in chosen),
                split_tag=tag,
            )
        )
    return out[0], out[1], out[2]


def split_reference_query(
    corpus: Corpus, ref_fraction: float, seed: int, force: bool = False
) -> Corpus:
    """Tag each entity's records as reference/query in a fixed proportion.

    Per entity, ``ceil(ref_fraction * n)`` records become references
    (rounding always favors the reference side) and the rest queries,
    deterministically per seed. Refuses to overwrite pre-assigned roles
    unless ``force`` is set; single-record entities become all-reference
    with a warning.
    """
    if not 0.0 < ref_fraction < 1.0:
        raise ValueError(f"ref_fraction must be in (0, 1), got {ref_fraction}")
    if not force and any(r.role is not None for r in corpus.records):
        raise ValueError("corpus already has assigned roles; pass force=True to re-split")

    by_entity: dict[str, list[int]] = {}
    for idx, rec in enumerate(corpus.records):
        by_entity.setdefault(rec.entity_id, []).append(idx)

    roles: dict[int, str] = {}
    for entity_id in sorted(by_entity):
        indices = by_entity[entity_id]
        if len(indices) < 2:
            warnings.warn(
                f"entity {entity_id!r} has {len(indices)} record(s); all tagged reference",
                stacklevel=2,
            )
            for idx in indices:
                roles[idx] = ROLE_REFERENCE
            continue
        order = sorted(indices, key=lambda i: corpus.records[i].record_id)
        _stable_entity_seed(seed, entity_id).shuffle(order)
        n_ref = math.ceil(ref_fraction * len(order))
        for pos, idx in enumerate(order):
            roles[idx] = ROLE_REFERENCE if pos < n_ref else ROLE_QUERY

    new_records = tuple(
        MentionRecord(
            entity_id=r.entity_id,
            surface=r.surface,
            sentence=r.sentence,
            span=r.span,
            role=roles[i],
        )
        for i, r in enumerate(corpus.records)
    )
    return Corpus(entities=dict(corpus.entities), records=new_records, split_tag=corpus.split_tag)


def unlinkable_entities(corpus: Corpus) -> tuple[str, ...]:
    """Entity ids with no reference-role record (cannot be linked contextually)."""
    covered = {r.entity_id for r in corpus.records if r.role == ROLE_REFERENCE}
    return tuple(sorted(set(corpus.entities) - covered))


def iter_queries(corpus: Corpus) -> Iterable[MentionRecord]:
    return (r for r in corpus.records if r.role == ROLE_QUERY)

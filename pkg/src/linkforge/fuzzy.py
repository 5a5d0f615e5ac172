"""Edit-distance search over normalization-cascade variants.

Provides the optimal-string-alignment Damerau-Levenshtein distance, a
delete-neighborhood index over every entity's per-stage cascade variants,
and the heuristic linker that scores a mention as the minimum same-stage
distance across the cascade.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Entity
from .normalize import STAGE_COUNT, NormalizerConfig, cascade

__all__ = [
    "DeleteIndex",
    "HeuristicOutcome",
    "VariantKey",
    "build_index",
    "dl_distance",
    "heuristic_candidates",
    "heuristic_link",
    "load_index",
    "save_index",
]

INDEX_FORMAT = "linkforge-fuzzy-index"
INDEX_VERSION = 1


def dl_distance(a: str, b: str, max_dist: int | None = None) -> int:
    """Optimal-string-alignment Damerau-Levenshtein distance.

    Counts insertions, deletions, substitutions, and adjacent
    transpositions, with no substring edited twice. When ``max_dist`` is
    given the computation may stop early; the result is then only
    guaranteed to be exact when it is <= max_dist (larger values mean
    "beyond the bound").
    """
    if a == b:
        return 0
    len_a, len_b = len(a), len(b)
    if len_a > len_b:
        a, b, len_a, len_b = b, a, len_b, len_a
    if max_dist is not None and len_b - len_a > max_dist:
        return max_dist + 1
    if len_a == 0:
        return len_b

    prev2 = [0] * (len_b + 1)
    prev = list(range(len_b + 1))
    cur = [0] * (len_b + 1)
    for i in range(1, len_a + 1):
        cur[0] = i
        ca = a[i - 1]
        row_min = cur[0]
        for j in range(1, len_b + 1):
            cb = b[j - 1]
            cost = prev[j - 1] if ca == cb else prev[j - 1] + 1
            cost = min(cost, prev[j] + 1, cur[j - 1] + 1)
            if i > 1 and j > 1 and ca == b[j - 2] and cb == a[i - 2]:
                cost = min(cost, prev2[j - 2] + 1)
            cur[j] = cost
            if cost < row_min:
                row_min = cost
        if max_dist is not None and row_min > max_dist:
            return max_dist + 1
        prev2, prev, cur = prev, cur, prev2
    return prev[len_b]


def _deletes(s: str, max_edit: int) -> set[str]:
    """All strings reachable from ``s`` by up to ``max_edit`` single-character deletions."""
    out = {s}
    frontier = {s}
    for _ in range(max_edit):
        nxt = set()
        for word in frontier:
            for i in range(len(word)):
                nxt.add(word[:i] + word[i + 1 :])
        nxt -= out
        out |= nxt
        frontier = nxt
    return out


@dataclass(frozen=True)
class VariantKey:
    """One normalized variant of one entity at one cascade stage."""

    text: str
    entity_id: str
    stage: int

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("variant text must be non-empty")
        if not 0 <= self.stage < STAGE_COUNT:
            raise ValueError(f"stage must be in [0, {STAGE_COUNT}), got {self.stage}")


@dataclass(frozen=True)
class HeuristicOutcome:
    """Result of heuristic linking: Unique, Tie, or None.

    ``kind`` is "unique" (one entity strictly closest), "tie" (several
    entities share the minimal distance), or "none" (nothing within the
    index radius). ``entity_ids`` is sorted; ``stage`` is the smallest
    stage achieving the minimal distance for the unique entity.
    """

    kind: str
    entity_ids: tuple[str, ...] = ()
    distance: int | None = None
    stage: int | None = None

    @property
    def is_unique(self) -> bool:
        return self.kind == "unique"


class DeleteIndex:
    """Delete-neighborhood (SymSpell-style) index over cascade variants.

    Every variant string is indexed under all of its deletion variants up
    to ``max_edit`` deletions; lookups generate the query's deletion
    variants, intersect buckets, and post-filter by true edit distance.
    Buckets are segregated by cascade stage so comparisons stay strictly
    same-stage. Immutable after build.
    """

    def __init__(self, max_edit: int) -> None:
        if max_edit not in (0, 1, 2, 3):
            raise ValueError(f"max_edit must be in 0..3, got {max_edit}")
        self.max_edit = max_edit
        self._variants: list[VariantKey] = []
        self._by_key: dict[tuple[str, str, int], int] = {}
        self._buckets: dict[tuple[int, str], list[int]] = {}
        self._entity_ids: set[str] = set()

    def __len__(self) -> int:
        return len(self._variants)

    @property
    def entity_ids(self) -> frozenset[str]:
        return frozenset(self._entity_ids)

    @property
    def variants(self) -> tuple[VariantKey, ...]:
        return tuple(self._variants)

    def _add(self, key: VariantKey) -> None:
        ident = (key.text, key.entity_id, key.stage)
        if ident in self._by_key:
            return
        idx = len(self._variants)
        self._variants.append(key)
        self._by_key[ident] = idx
        self._entity_ids.add(key.entity_id)
        for variant in _deletes(key.text, self.max_edit):
            self._buckets.setdefault((key.stage, variant), []).append(idx)

    def lookup(self, query: str, stage: int) -> dict[str, int]:
        """Entities whose stage-``stage`` variant is within ``max_edit`` of ``query``.

        Returns entity_id -> exact distance (minimum over that entity's
        matching variants at this stage).
        """
        candidates: set[int] = set()
        for variant in _deletes(query, self.max_edit):
            candidates.update(self._buckets.get((stage, variant), ()))
        out: dict[str, int] = {}
        for idx in candidates:
            key = self._variants[idx]
            dist = dl_distance(query, key.text, max_dist=self.max_edit)
            if dist <= self.max_edit:
                prev = out.get(key.entity_id)
                if prev is None or dist < prev:
                    out[key.entity_id] = dist
        return out


def build_index(
    entities: Iterable[Entity], config: NormalizerConfig, max_edit: int = 2
) -> DeleteIndex:
    """Index every entity's cascade stages 0..7 under their deletion variants.

    Stage 7 contributes every member of the abbreviation set. Duplicate
    identical variants are merged; build order does not affect lookups.
    """
    index = DeleteIndex(max_edit)
    for entity in sorted(entities, key=lambda e: e.id):
        out = cascade(entity.canonical_name, config)
        for stage in range(STAGE_COUNT - 1):
            text = out.stages[stage]
            if text:
                index._add(VariantKey(text=text, entity_id=entity.id, stage=stage))
        for text in sorted(out.abbreviations):
            if text:
                index._add(VariantKey(text=text, entity_id=entity.id, stage=STAGE_COUNT - 1))
    return index


def _mention_stage_queries(mention: str, config: NormalizerConfig) -> list[tuple[int, str]]:
    out = cascade(mention, config)
    queries = [(stage, out.stages[stage]) for stage in range(STAGE_COUNT - 1)]
    queries.extend((STAGE_COUNT - 1, text) for text in sorted(out.abbreviations))
    return [(stage, text) for stage, text in queries if text]


def heuristic_candidates(
    mention: str, index: DeleteIndex, config: NormalizerConfig
) -> list[tuple[str, int, int]]:
    """All entities within the index radius of the mention's cascade.

    For each stage t the mention's stage-t form is matched against
    entities' stage-t variants only; an entity's distance is the minimum
    across stages (with the smallest achieving stage kept for
    provenance). Sorted by (distance, entity_id).
    """
    best: dict[str, tuple[int, int]] = {}
    for stage, text in _mention_stage_queries(mention, config):
        for entity_id, dist in index.lookup(text, stage).items():
            prev = best.get(entity_id)
            if prev is None or (dist, stage) < prev:
                best[entity_id] = (dist, stage)
    ranked = [(entity_id, dist, stage) for entity_id, (dist, stage) in best.items()]
    ranked.sort(key=lambda item: (item[1], item[0]))
    return ranked


def heuristic_link(
    mention: str, index: DeleteIndex, config: NormalizerConfig
) -> HeuristicOutcome:
    """Link a mention by minimum same-stage cascade distance.

    Returns Unique when exactly one entity attains the minimal distance,
    Tie when several do, and None when no entity lies within the index
    radius.
    """
    ranked = heuristic_candidates(mention, index, config)
    if not ranked:
        return HeuristicOutcome(kind="none")
    min_dist = ranked[0][1]
    at_min = [item for item in ranked if item[1] == min_dist]
    if len(at_min) == 1:
        entity_id, dist, stage = at_min[0]
        return HeuristicOutcome(kind="unique", entity_ids=(entity_id,), distance=dist, stage=stage)
    return HeuristicOutcome(
        kind="tie", entity_ids=tuple(e for e, _, _ in at_min), distance=min_dist
    )


def save_index(index: DeleteIndex, path: str | Path) -> None:
    """Persist the index as versioned JSON (variants only; buckets are rebuilt on load)."""
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "max_edit": index.max_edit,
        "variants": [[k.text, k.entity_id, k.stage] for k in index.variants],
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_index(path: str | Path) -> DeleteIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
    if payload.get("version") != INDEX_VERSION:
        raise ValueError(
            f"{path}: unsupported index version {payload.get('version')} (expected {INDEX_VERSION})"
        )
    index = DeleteIndex(payload["max_edit"])
    for text, entity_id, stage in payload["variants"]:
        index._add(VariantKey(text=text, entity_id=entity_id, stage=stage))
    return index

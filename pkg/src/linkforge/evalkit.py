"""Evaluation: top-1 accuracy, latency comparison, and synonym discovery.

Linkers are plain callables taking a query MentionRecord and returning a
LinkResult, so every linking method (and test double) evaluates through
the same harness.
"""
from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .corpus import Corpus, Entity, MentionRecord, ROLE_REFERENCE
from .ctxlink import LinkResult, METHOD_CROSS
from .normalize import NormalizerConfig

__all__ = [
    "EvalReport",
    "LatencyComparison",
    "LatencySummary",
    "SynonymSuggestion",
    "TaggerPort",
    "average_precision",
    "detect_nouns",
    "discover_synonyms",
    "evaluate_top1",
    "render_accuracy_table",
    "time_linkers",
]

Linker = Callable[[MentionRecord], LinkResult]

JUDGMENT_MATCH = "match"
JUDGMENT_NON_MATCH = "non-match"
JUDGMENT_MAYBE = "maybe"
_JUDGMENTS = (JUDGMENT_MATCH, JUDGMENT_NON_MATCH, JUDGMENT_MAYBE)


@dataclass(frozen=True)
class LatencySummary:
    """Per-query wall-clock statistics, in seconds."""

    mean_s: float
    median_s: float
    min_s: float
    max_s: float
    samples: int

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "LatencySummary":
        return cls(
            mean_s=statistics.fmean(samples),
            median_s=statistics.median(samples),
            min_s=min(samples),
            max_s=max(samples),
            samples=len(samples),
        )


@dataclass(frozen=True)
class EvalReport:
    """Top-1 accuracy with a per-method breakdown of rank-1 provenance."""

    top1_accuracy: float
    query_count: int
    excluded_count: int
    per_method: Mapping[str, dict]
    latency: LatencySummary | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.top1_accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")
        if sum(m["count"] for m in self.per_method.values()) != self.query_count:
            raise ValueError("per-method counts must sum to the query count")

    def to_obj(self) -> dict:
        obj = {
            "top1_accuracy": self.top1_accuracy,
            "query_count": self.query_count,
            "excluded_count": self.excluded_count,
            "per_method": dict(self.per_method),
        }
        if self.latency is not None:
            obj["latency"] = vars(self.latency)
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=2)


def evaluate_top1(
    linker: Linker,
    queries: Iterable[MentionRecord],
    linkable_entities: frozenset[str] | set[str] | None = None,
) -> EvalReport:
    """Fraction of queries whose rank-1 entity equals the gold entity.

    Queries whose gold entity is not in ``linkable_entities`` (when given)
    are excluded and counted separately. The rank-1 method tag of each
    answer feeds the per-method breakdown; empty results count under
    "none".
    """
    counts: dict[str, dict] = {}
    correct_total = 0
    evaluated = 0
    excluded = 0
    samples: list[float] = []
    for query in queries:
        if linkable_entities is not None and query.entity_id not in linkable_entities:
            excluded += 1
            continue
        start = time.perf_counter()
        result = linker(query)
        samples.append(time.perf_counter() - start)
        evaluated += 1
        top = result.top
        method = top.method if top is not None else "none"
        bucket = counts.setdefault(method, {"count": 0, "correct": 0})
        bucket["count"] += 1
        if top is not None and top.entity_id == query.entity_id:
            bucket["correct"] += 1
            correct_total += 1
    for bucket in counts.values():
        bucket["accuracy"] = bucket["correct"] / bucket["count"]
    return EvalReport(
        top1_accuracy=correct_total / evaluated if evaluated else 0.0,
        query_count=evaluated,
        excluded_count=excluded,
        per_method=counts,
        latency=LatencySummary.from_samples(samples) if samples else None,
    )


def render_accuracy_table(reports: Mapping[str, EvalReport]) -> str:
    """Plain-text accuracy table, one row per linking method."""
    name_width = max([len(name) for name in reports] + [len("Classifier")])
    lines = [f"{'Classifier'.ljust(name_width)} | Top1 Accuracy [%]"]
    lines.append("-" * len(lines[0]))
    for name, report in reports.items():
        lines.append(f"{name.ljust(name_width)} | {100.0 * report.top1_accuracy:.2f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Synonym discovery
# ---------------------------------------------------------------------------


class TaggerPort(Protocol):
    """Part-of-speech tagging surface: noun detection only."""

    def nouns(self, sentence: str) -> list[tuple[str, tuple[int, int]]]: ...


class CapitalizationTagger:
    """Default noun detector for German text.

    Nouns are taken to be sentence-internal tokens starting with an
    uppercase letter (German capitalizes all nouns; the sentence-initial
    token is skipped because its capitalization is uninformative), minus
    stopwords.
    """

    def __init__(self, stopwords: frozenset[str] | None = None) -> None:
        if stopwords is None:
            stopwords = NormalizerConfig.default("de").stopword_list
        self._stopwords = stopwords

    def nouns(self, sentence: str) -> list[tuple[str, tuple[int, int]]]:
        out = []
        pos = 0
        first = True
        for raw in sentence.split():
            start = sentence.index(raw, pos)
            pos = start + len(raw)
            token = raw.strip(".,;:!?()[]{}\"'&/")
            if not token:
                continue
            if first:
                first = False
                continue
            if not token[0].isupper():
                continue
            if token.casefold() in self._stopwords:
                continue
            tok_start = start + raw.index(token)
            out.append((token, (tok_start, tok_start + len(token))))
        return out


def detect_nouns(
    sentence: str, tagger: TaggerPort | None = None
) -> list[tuple[str, tuple[int, int]]]:
    """Noun surfaces and spans in a sentence, via the given or default tagger."""
    if tagger is None:
        tagger = CapitalizationTagger()
    return tagger.nouns(sentence)


@dataclass(frozen=True)
class SynonymSuggestion:
    """A noun the linker mapped to the query entity, with its distance."""

    noun: str
    distance: float
    record_ref: str
    known: bool = False
    judgment: str | None = None

    def __post_init__(self) -> None:
        if self.distance < 0:
            raise ValueError("distance must be >= 0")
        if self.judgment is not None and self.judgment not in _JUDGMENTS:
            raise ValueError(f"judgment must be one of {_JUDGMENTS}")


ContextLinker = Callable[[str, str, tuple[int, int]], LinkResult]


def _top_distance(result: LinkResult) -> float | None:
    top = result.top
    if top is None:
        return None
    if top.method == METHOD_CROSS:
        return 1.0 - top.score
    return top.score


def discover_synonyms(
    query_entity: Entity,
    corpus: Corpus,
    linker: ContextLinker,
    tagger: TaggerPort | None = None,
) -> list[SynonymSuggestion]:
    """Mine corpus nouns whose rank-1 link target is the query entity.

    Every detected noun in every corpus sentence is linked in its context;
    hits are deduplicated by casefolded noun (keeping the minimal
    distance) and sorted ascending by distance, ties by casefolded noun.
    Nouns already registered for the entity (canonical name or reference
    surfaces) are flagged known rather than dropped.
    """
    known = {query_entity.canonical_name.casefold()}
    for rec in corpus.records:
        if rec.entity_id == query_entity.id and rec.role == ROLE_REFERENCE:
            known.add(rec.surface.casefold())

    best: dict[str, tuple[float, str, str]] = {}
    for rec in corpus.records:
        for noun, span in detect_nouns(rec.sentence, tagger):
            result = linker(noun, rec.sentence, span)
            top = result.top
            if top is None or top.entity_id != query_entity.id:
                continue
            distance = _top_distance(result)
            assert distance is not None
            key = noun.casefold()
            candidate = (distance, noun, rec.record_id)
            if key not in best or candidate < best[key]:
                best[key] = candidate
    suggestions = [
        SynonymSuggestion(
            noun=noun, distance=dist, record_ref=ref, known=noun.casefold() in known
        )
        for dist, noun, ref in best.values()
    ]
    suggestions.sort(key=lambda s: (s.distance, s.noun.casefold()))
    return suggestions


def average_precision(
    suggestions: Sequence[SynonymSuggestion], maybe_is_relevant: bool = False
) -> float:
    """Mean of precision-at-rank over the relevant ranks of a judged list.

    Unjudged entries are not allowed; zero relevant items yields 0.
    """
    judged = [s.judgment for s in suggestions]
    if not judged or any(j is None for j in judged):
        raise ValueError("average_precision requires every suggestion to carry a judgment")
    relevant = {JUDGMENT_MATCH, JUDGMENT_MAYBE} if maybe_is_relevant else {JUDGMENT_MATCH}
    hits = 0
    precision_sum = 0.0
    for rank, judgment in enumerate(judged, start=1):
        if judgment in relevant:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / hits if hits else 0.0


# ---------------------------------------------------------------------------
# Latency comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyComparison:
    """Bi vs Cross per-query wall time and their ratio (medians)."""

    bi: LatencySummary
    cross: LatencySummary
    speed_ratio: float  # median cross time / median bi time

    def to_obj(self) -> dict:
        return {"bi": vars(self.bi), "cross": vars(self.cross), "speed_ratio": self.speed_ratio}


def time_linkers(
    bi_linker: Linker,
    cross_linker: Linker,
    queries: Sequence[MentionRecord],
    repetitions: int = 3,
    warmup: int = 1,
) -> LatencyComparison:
    """Measure per-query wall time of both linkers over the same queries.

    Only the query phase is timed (indexes must be built beforehand);
    warm-up passes are excluded and the reported ratio uses medians on a
    monotonic clock.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")

    def run(linker: Linker) -> LatencySummary:
        for _ in range(warmup):
            for query in queries:
                linker(query)
        samples = []
        for _ in range(repetitions):
            for query in queries:
                start = time.perf_counter()
                linker(query)
                samples.append(time.perf_counter() - start)
        return LatencySummary.from_samples(samples)

    bi = run(bi_linker)
    cross = run(cross_linker)
    return LatencyComparison(bi=bi, cross=cross, speed_ratio=cross.median_s / bi.median_s)

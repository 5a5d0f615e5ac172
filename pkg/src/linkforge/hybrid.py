"""Hybrid linking: heuristic first, contextual fallback.

The heuristic linker answers when it finds exactly one closest entity;
when it finds none, or several at the same distance, the contextual
linker (Bi- or Cross-Encoder) is applied instead. The fallback searches
the full entity set; the heuristic tie set is discarded.
"""
from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus
from .ctxlink import (
    Candidate,
    LinkError,
    LinkResult,
    METHOD_BI,
    METHOD_CROSS,
    METHOD_HEURISTIC,
    ReferenceIndex,
    link_bi,
    link_cross,
)
from .embed import CrossHead, EncoderPort
from .fuzzy import DeleteIndex, heuristic_candidates
from .normalize import NormalizerConfig

__all__ = ["HybridConfig", "heuristic_result", "link_hybrid"]


@dataclass(frozen=True)
class HybridConfig:
    """Knobs for the hybrid cascade.

    ``contextual_method`` picks the fallback linker. For the
    cross-encoder, candidates come from the top ``rerank_k`` Bi-Encoder
    entities unless ``cross_all_references`` asks for the exhaustive
    pairwise comparison.
    """

    contextual_method: str = METHOD_BI
    top_k: int = 10
    cross_head: CrossHead | None = None
    rerank_k: int = 64
    cross_all_references: bool = False
    # restricting the fallback to the heuristic tie set is a variant, not
    # the default: by default the tie set is discarded entirely
    restrict_to_ties: bool = False

    def __post_init__(self) -> None:
        if self.contextual_method not in (METHOD_BI, METHOD_CROSS):
            raise ValueError(f"contextual_method must be bi or cross, got {self.contextual_method!r}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.contextual_method == METHOD_CROSS and self.cross_head is None:
            raise ValueError("cross-encoder fallback requires a cross_head")


def heuristic_result(mention: str, fuzzy_index: DeleteIndex, config: NormalizerConfig, top_k: int = 10) -> LinkResult:
    """Full ranked heuristic candidates as a LinkResult (may be empty)."""
    ranked = heuristic_candidates(mention, fuzzy_index, config)[:top_k]
    return LinkResult(
        ranked=tuple(
            Candidate(entity_id=eid, score=float(dist), method=METHOD_HEURISTIC)
            for eid, dist, _stage in ranked
        )
    )


def cross_candidate_records(
    corpus: Corpus,
    sentence: str,
    span: tuple[int, int],
    ref_index: ReferenceIndex,
    encoder: EncoderPort,
    config: HybridConfig,
):
    """Reference records the cross-encoder should score for one query."""
    by_id = corpus.by_record_id()
    if config.cross_all_references:
        return [by_id[ref] for ref in ref_index.record_refs]
    shortlist = link_bi(sentence, span, ref_index, encoder, top_k=config.rerank_k)
    keep = {c.entity_id for c in shortlist.ranked}
    return [
        by_id[ref]
        for ref, eid in zip(ref_index.record_refs, ref_index.entity_ids)
        if eid in keep
    ]


def link_hybrid(
    mention: str,
    sentence: str,
    span: tuple[int, int],
    fuzzy_index: DeleteIndex,
    ref_index: ReferenceIndex,
    encoder: EncoderPort,
    config: HybridConfig,
    normalizer: NormalizerConfig,
    corpus: Corpus | None = None,
) -> LinkResult:
    """Heuristic answer when unique, contextual answer otherwise.

    ``corpus`` is only needed for the cross-encoder fallback (it supplies
    the candidate reference records). When the contextual fallback fails,
    the raised :class:`LinkError` carries the heuristic tie set.
    """
    ranked = heuristic_candidates(mention, fuzzy_index, normalizer)
    if ranked:
        min_dist = ranked[0][1]
        at_min = [item for item in ranked if item[1] == min_dist]
        if len(at_min) == 1:
            return LinkResult(
                ranked=tuple(
                    Candidate(entity_id=eid, score=float(dist), method=METHOD_HEURISTIC)
                    for eid, dist, _stage in ranked[: config.top_k]
                )
            )
        tie_ids = tuple(eid for eid, _, _ in at_min)
    else:
        tie_ids = ()

    keep = set(tie_ids) if (config.restrict_to_ties and tie_ids) else None
    try:
        if config.contextual_method == METHOD_BI:
            result = link_bi(
                sentence, span, ref_index, encoder,
                top_k=config.top_k if keep is None else len(ref_index),
            )
            if keep is not None:
                result = LinkResult(
                    ranked=tuple(c for c in result.ranked if c.entity_id in keep)[: config.top_k]
                )
            return result
        if corpus is None:
            raise LinkError("cross-encoder fallback requires the reference corpus")
        assert config.cross_head is not None
        candidates = cross_candidate_records(corpus, sentence, span, ref_index, encoder, config)
        if keep is not None:
            candidates = [rec for rec in candidates if rec.entity_id in keep] or candidates
        result = link_cross(sentence, span, candidates, encoder, config.cross_head)
        return LinkResult(ranked=result.ranked[: config.top_k])
    except LinkError as exc:
        raise LinkError(str(exc), tie_entity_ids=tie_ids) from exc
    except Exception as exc:  # noqa: BLE001 - surface encoder failures with tie context
        raise LinkError(f"contextual fallback failed: {exc}", tie_entity_ids=tie_ids) from exc

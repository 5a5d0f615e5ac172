"""String normalization cascade used by the heuristic linker.

Seven transforms are applied in a fixed order, each consuming the output
of its predecessor: punctuation removal, corporate-form stripping,
lowercasing, stemming, stopword removal, token sorting, and abbreviation
generation. The composed per-stage outputs feed the fuzzy index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import permutations
from typing import Mapping

from .stemming import stem_word

__all__ = [
    "CascadeOutput",
    "CompoundLexicon",
    "NormalizerConfig",
    "abbreviate",
    "cascade",
    "compound_split",
    "lowercase",
    "remove_punctuation",
    "remove_stopwords",
    "sort_tokens",
    "stem",
    "strip_corporate_forms",
]

STAGE_COUNT = 8  # raw input plus seven transforms


def _read_data(name: str) -> str:
    return resources.files("linkforge").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def _parse_wordlist(text: str) -> frozenset[str]:
    return frozenset(
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    )


@dataclass(frozen=True)
class CompoundLexicon:
    """Boundary-score table for compound splitting.

    ``end`` scores a character bigram as a plausible left-part ending,
    ``begin`` as a plausible right-part onset; a candidate boundary's
    score is the sum of both sides.
    """

    end: Mapping[str, float]
    begin: Mapping[str, float]

    @classmethod
    def from_tsv(cls, text: str) -> "CompoundLexicon":
        end: dict[str, float] = {}
        begin: dict[str, float] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"compound score table line {lineno}: expected 3 columns")
            kind, bigram, score = parts
            table = {"end": end, "begin": begin}.get(kind)
            if table is None:
                raise ValueError(f"compound score table line {lineno}: unknown kind {kind!r}")
            table[bigram] = float(score)
        return cls(end=end, begin=begin)


@dataclass(frozen=True)
class NormalizerConfig:
    """Resources and knobs for the normalization cascade."""

    stopword_list: frozenset[str]
    corporate_suffixes: frozenset[str]
    stemmer_language: str = "de"
    compound_lexicon: CompoundLexicon = field(default_factory=lambda: CompoundLexicon({}, {}))
    compound_threshold: float = 1.2
    compound_min_part: int = 3
    abbrev_permute_limit: int = 4

    def __post_init__(self) -> None:
        if not self.stopword_list:
            raise ValueError("stopword_list must not be empty")
        if not self.corporate_suffixes:
            raise ValueError("corporate_suffixes must not be empty")

    @classmethod
    def default(cls, language: str = "de") -> "NormalizerConfig":
        """Config backed by the packaged resource files.

        ``language`` selects the stopword list and stemmer ("de" or "en");
        the compound table is German-oriented and shared by both.
        """
        return _default_config(language)


@lru_cache(maxsize=None)
def _default_config(language: str) -> NormalizerConfig:
    if language not in ("de", "en"):
        raise ValueError(f"unsupported language: {language!r}")
    return NormalizerConfig(
        stopword_list=_parse_wordlist(_read_data(f"stopwords_{language}.txt")),
        corporate_suffixes=_parse_wordlist(_read_data("corporate_suffixes.txt")),
        stemmer_language=language,
        compound_lexicon=CompoundLexicon.from_tsv(_read_data("compound_scores.tsv")),
    )


# ---------------------------------------------------------------------------
# Stage transforms f1..f7
# ---------------------------------------------------------------------------


def remove_punctuation(s: str) -> str:
    """Drop all non-alphanumeric characters; whitespace collapses to single spaces.

    Characters adjacent across removed punctuation merge ("AC/DC" -> "ACDC"),
    but tokens separated by whitespace never do.
    """
    kept = []
    for ch in s:
        if ch.isalnum():
            kept.append(ch)
        elif ch.isspace():
            kept.append(" ")
    return " ".join("".join(kept).split())


def strip_corporate_forms(s: str, config: NormalizerConfig) -> str:
    """Iteratively remove trailing corporate-form tokens ("AG", "GmbH", ...).

    A single remaining token is never stripped, so non-empty input cannot
    become empty.
    """
    tokens = s.split()
    while len(tokens) >= 2 and tokens[-1].casefold() in config.corporate_suffixes:
        tokens.pop()
    return " ".join(tokens)


def lowercase(s: str) -> str:
    return s.lower()


def stem(s: str, config: NormalizerConfig) -> str:
    """Replace each whitespace token by its stem for the configured language."""
    return " ".join(stem_word(tok, config.stemmer_language) for tok in s.split())


def remove_stopwords(s: str, config: NormalizerConfig) -> str:
    """Remove tokens on the stopword list (case-insensitive), keeping order."""
    return " ".join(tok for tok in s.split() if tok.casefold() not in config.stopword_list)


def sort_tokens(s: str) -> str:
    """Sort whitespace tokens by raw codepoint sequence (locale-independent)."""
    return " ".join(sorted(s.split()))


def compound_split(token: str, config: NormalizerConfig) -> list[str]:
    """Split a single token at its best-scoring compound boundary.

    Each boundary scores ``end(left[-2:]) + begin(right[:2])`` from the
    lexicon; the split happens at the highest-scoring boundary at or above
    the threshold (ties resolved toward the rightmost boundary). Returns
    ``[token]`` when nothing qualifies.
    """
    if any(ch.isspace() for ch in token):
        raise ValueError("compound_split expects a single token")
    lo = max(config.compound_min_part, 2)
    best_score = 0.0
    best_pos = None
    for i in range(lo, len(token) - lo + 1):
        score = config.compound_lexicon.end.get(token[i - 2 : i], 0.0)
        score += config.compound_lexicon.begin.get(token[i : i + 2], 0.0)
        if score >= config.compound_threshold and score >= best_score:
            best_score = score
            best_pos = i
    if best_pos is None:
        return [token]
    return [token[:best_pos], token[best_pos:]]


def abbreviate(s: str, config: NormalizerConfig) -> set[str]:
    """Generate acronym candidates for every contiguous token n-gram (n >= 2).

    Tokens are compound-split first, then the parts' initials are
    concatenated. For n-grams of up to ``abbrev_permute_limit`` parts the
    initials of every part permutation are emitted as well, so acronyms
    survive the token-sorting stage (a sorted name still yields the
    natural-order acronym). The input itself is always a member.
    """
    out = {s}
    tokens = s.split()
    for n in range(2, len(tokens) + 1):
        for i in range(len(tokens) - n + 1):
            parts = [p for tok in tokens[i : i + n] for p in compound_split(tok, config)]
            out.add("".join(p[0] for p in parts))
            if len(parts) <= config.abbrev_permute_limit:
                for perm in permutations(parts):
                    out.add("".join(p[0] for p in perm))
    return out


# ---------------------------------------------------------------------------
# Composed cascade
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CascadeOutput:
    """Per-stage outputs of the cascade for one input string.

    ``stages[0]`` is the raw input; ``stages[t]`` is transform t applied to
    ``stages[t-1]``. ``stages[7]`` holds the canonical abbreviation (the
    shortest member, ties lexicographic) while ``abbreviations`` retains
    the full stage-7 set for indexing.
    """

    stages: tuple[str, ...]
    abbreviations: frozenset[str]

    def __post_init__(self) -> None:
        if len(self.stages) != STAGE_COUNT:
            raise ValueError(f"cascade must have exactly {STAGE_COUNT} stages")


def cascade(s: str, config: NormalizerConfig) -> CascadeOutput:
    """Apply transforms 1..7, each to the output of its predecessor.

    A stage that would map a non-empty string to the empty string (e.g.
    stopword removal of an all-stopword name) returns its input unchanged
    instead; an empty key would otherwise match everything.
    """
    transforms = (
        remove_punctuation,
        lambda t: strip_corporate_forms(t, config),
        lowercase,
        lambda t: stem(t, config),
        lambda t: remove_stopwords(t, config),
        sort_tokens,
    )
    stages = [s]
    current = s
    for transform in transforms:
        nxt = transform(current)
        if current and not nxt:
            nxt = current
        stages.append(nxt)
        current = nxt
    abbrevs = frozenset(abbreviate(current, config))
    canonical = min(abbrevs, key=lambda a: (len(a), a))
    stages.append(canonical)
    return CascadeOutput(stages=tuple(stages), abbreviations=abbrevs)

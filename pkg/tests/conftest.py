"""Shared fixture helpers for the test suite."""
from __future__ import annotations

import numpy as np

from linkforge.corpus import Corpus, Entity, MentionRecord


def make_record(
    entity_id: str,
    surface: str,
    sentence: str | None = None,
    role: str | None = None,
) -> MentionRecord:
    """Build a valid record, deriving the span from the surface position."""
    if sentence is None:
        sentence = f"Kontext um {surface} herum."
    start = sentence.index(surface)
    return MentionRecord(
        entity_id=entity_id,
        surface=surface,
        sentence=sentence,
        span=(start, start + len(surface)),
        role=role,
    )


def make_corpus(records: list[MentionRecord], names: dict[str, str] | None = None) -> Corpus:
    """Corpus over the given records; canonical names default to the entity id."""
    names = names or {}
    entities = {
        r.entity_id: Entity(id=r.entity_id, canonical_name=names.get(r.entity_id, r.entity_id))
        for r in records
    }
    return Corpus(entities=entities, records=tuple(records))


def osa_oracle(a: str, b: str) -> int:
    """Textbook full-matrix optimal-string-alignment recurrence.

    Kept deliberately naive (no banding, no early exit, no length swap) to
    stay independent of the production implementation.
    """
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d[i][j] = min(d[i][j], d[i - 2][j - 2] + 1)
    return d[m][n]


def osa_oracle_batch(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Same full-matrix recurrence, evaluated for many pairs at once.

    ``left`` is (n, la) and ``right`` (n, lb), rows holding character codes
    of equal-length strings; returns the n distances. Used where the plain
    oracle would dominate the runtime; it shares no code with the
    production implementation.
    """
    n, la = left.shape
    lb = right.shape[1]
    prev2 = np.zeros((lb + 1, n), dtype=np.int32)
    prev = np.repeat(np.arange(lb + 1, dtype=np.int32)[:, None], n, axis=1)
    for i in range(1, la + 1):
        cur = np.empty_like(prev)
        cur[0] = i
        for j in range(1, lb + 1):
            eq = left[:, i - 1] == right[:, j - 1]
            cost = np.where(eq, prev[j - 1], prev[j - 1] + 1)
            cost = np.minimum(cost, prev[j] + 1)
            cost = np.minimum(cost, cur[j - 1] + 1)
            if i > 1 and j > 1:
                swap = (left[:, i - 1] == right[:, j - 2]) & (left[:, i - 2] == right[:, j - 1])
                cost = np.where(swap, np.minimum(cost, prev2[j - 2] + 1), cost)
            cur[j] = cost
        prev2, prev = prev, cur
    return prev[lb]

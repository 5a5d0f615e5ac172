"""Shared toy corpus/pairs fixtures for the sidecar tests."""
from __future__ import annotations

import itertools
import json
from pathlib import Path

from linkforge_sidecar.training import PairExample, _record_id

SENTENCES = {
    "L": [
        "am ventil tropft das leck stark",
        "das leck wurde gestern entdeckt",
        "wieder ein leck im system gefunden",
        "techniker meldet leck an der pumpe",
    ],
    "F": [
        "der flansch sitzt locker am rohr",
        "ein flansch muss getauscht werden",
        "der alte flansch zeigt starke riefen",
        "monteur prüft flansch an der leitung",
    ],
}
MENTIONS = {"L": "leck", "F": "flansch"}


def build_toy_corpus(tmp_path: Path) -> tuple[Path, dict]:
    """Two-entity corpus file; returns (path, records keyed by (entity, i))."""
    corpus_path = tmp_path / "corpus.jsonl"
    records = {}
    with corpus_path.open("w", encoding="utf-8") as handle:
        for eid, sentences in SENTENCES.items():
            word = MENTIONS[eid]
            for i, sentence in enumerate(sentences):
                start = sentence.index(word)
                end = start + len(word)
                records[(eid, i)] = (_record_id(eid, sentence, start, end), sentence, (start, end))
                handle.write(json.dumps({
                    "entity_id": eid,
                    "canonical_name": word.capitalize(),
                    "surface": word,
                    "sentence": sentence,
                    "span_start": start,
                    "span_end": end,
                }, ensure_ascii=False) + "\n")
    return corpus_path, records


def build_train_pairs(tmp_path: Path, records: dict) -> Path:
    """Pairs over records 0..2 of each entity; record 3 stays held out."""
    pairs_path = tmp_path / "pairs.jsonl"
    with pairs_path.open("w", encoding="utf-8") as handle:
        for eid in SENTENCES:
            for i, j in itertools.combinations(range(3), 2):
                handle.write(json.dumps({
                    "left_record": records[(eid, i)][0],
                    "right_record": records[(eid, j)][0],
                    "label": 1,
                }) + "\n")
        for i in range(3):
            for j in range(3):
                if (i + j) % 2 == 0:
                    handle.write(json.dumps({
                        "left_record": records[("L", i)][0],
                        "right_record": records[("F", j)][0],
                        "label": 0,
                    }) + "\n")
    return pairs_path


def held_out_pairs(records: dict) -> tuple[list[PairExample], list[PairExample]]:
    positives, negatives = [], []
    for eid, other in (("L", "F"), ("F", "L")):
        _, sentence3, span3 = records[(eid, 3)]
        for i in range(3):
            _, sentence_same, span_same = records[(eid, i)]
            positives.append(PairExample(sentence3, span3, sentence_same, span_same, 1))
            _, sentence_other, span_other = records[(other, i)]
            negatives.append(PairExample(sentence3, span3, sentence_other, span_other, 0))
    return positives, negatives

"""Fine-tuning on exported pair files.

Consumes the linking toolkit's file formats: a corpus JSONL (entity_id,
sentence, span_start, span_end per line; record ids are the 6-byte blake2b
hex of "entity_id\\x1fsentence\\x1fstart\\x1fend") and a pairs JSONL
({left_record, right_record, label}). The Bi-Encoder trains a Siamese
objective pulling positive mention pairs together (squared distance) and
pushing negatives beyond the margin; the Cross-Encoder trains a scalar
head on the classifier token with binary cross entropy.
"""
from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import torch

from .model import SidecarEncoder, save_head

__all__ = [
    "PairExample",
    "finetune_bi",
    "finetune_cross",
    "load_pair_examples",
    "mention_distance",
]


def _disable_dropout(model: torch.nn.Module) -> None:
    # keeps the training forward identical to inference, so reported
    # per-step losses are exact functions of the current weights
    for module in model.modules():
        if isinstance(module, torch.nn.Dropout):
            module.p = 0.0


@dataclass(frozen=True)
class PairExample:
    """One resolved training pair: both sentences, spans, and the label."""

    text_a: str
    span_a: tuple[int, int]
    text_b: str
    span_b: tuple[int, int]
    label: int


def _record_id(entity_id: str, sentence: str, start: int, end: int) -> str:
    key = "\x1f".join((entity_id, sentence, str(start), str(end)))
    return hashlib.blake2b(key.encode("utf-8"), digest_size=6).hexdigest()


def _load_corpus_records(corpus_path: str | Path) -> dict[str, tuple[str, tuple[int, int]]]:
    records = {}
    with Path(corpus_path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            sentence = unicodedata.normalize("NFC", str(obj["sentence"]))
            start, end = int(obj["span_start"]), int(obj["span_end"])
            rid = _record_id(str(obj["entity_id"]), sentence, start, end)
            records[rid] = (sentence, (start, end))
    return records


def load_pair_examples(pairs_path: str | Path, corpus_path: str | Path) -> list[PairExample]:
    """Resolve a pairs file against its corpus; unknown record ids fail loudly."""
    records = _load_corpus_records(corpus_path)
    examples = []
    with Path(pairs_path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                text_a, span_a = records[obj["left_record"]]
                text_b, span_b = records[obj["right_record"]]
            except KeyError as exc:
                raise ValueError(f"{pairs_path}:{lineno}: unknown record id {exc}") from None
            examples.append(
                PairExample(
                    text_a=text_a, span_a=span_a, text_b=text_b, span_b=span_b,
                    label=int(obj["label"]),
                )
            )
    if not examples:
        raise ValueError(f"{pairs_path}: no pairs found")
    return examples


def mention_distance(encoder: SidecarEncoder, example: PairExample) -> float:
    """Cosine distance between the two pooled mention embeddings."""
    with torch.no_grad():
        a = encoder.pooled_mention(example.text_a, example.span_a)
        b = encoder.pooled_mention(example.text_b, example.span_b)
        return float(1.0 - torch.nn.functional.cosine_similarity(a, b, dim=0))


def finetune_bi(
    pairs_file: str | Path,
    corpus_file: str | Path,
    model_path: str,
    out_dir: str | Path,
    gamma: float = 0.5,
    epochs: int = 3,
    lr: float = 0.05,
    seed: int = 0,
) -> tuple[Path, list[float]]:
    """Siamese contrastive fine-tuning of the mention encoder.

    Per pair the loss is ``y * d^2 + (1 - y) * max(gamma - d, 0)^2`` over
    the cosine distance of the pooled mention embeddings; weights update
    with plain SGD. Returns the saved model directory and the per-step
    loss log (loss is recorded before each update).
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    examples = load_pair_examples(pairs_file, corpus_file)
    encoder = SidecarEncoder.from_spec(model_path)
    torch.manual_seed(seed)
    encoder.model.train()
    _disable_dropout(encoder.model)
    optimizer = torch.optim.SGD(encoder.model.parameters(), lr=lr)
    losses: list[float] = []
    for _epoch in range(epochs):
        for example in examples:
            optimizer.zero_grad()
            a = encoder.pooled_mention(example.text_a, example.span_a)
            b = encoder.pooled_mention(example.text_b, example.span_b)
            dist = 1.0 - torch.nn.functional.cosine_similarity(a, b, dim=0)
            if example.label == 1:
                loss = dist.pow(2)
            else:
                loss = torch.clamp(gamma - dist, min=0.0).pow(2)
            losses.append(float(loss.detach()))
            loss.backward()
            optimizer.step()
    encoder.model.eval()
    return encoder.save(out_dir), losses


def finetune_cross(
    pairs_file: str | Path,
    corpus_file: str | Path,
    model_path: str,
    out_dir: str | Path,
    epochs: int = 3,
    lr: float = 0.05,
    seed: int = 0,
) -> tuple[Path, list[float]]:
    """Cross-encoder fine-tuning: classifier-token embedding to a scalar.

    Mention markers are added to the tokenizer vocabulary first (pair mode
    reports ``markers: true`` afterwards). The head starts at zero, so the
    first step scores every pair at probability 0.5; the head weights and
    bias are saved next to the model as head.json. Returns the model
    directory and the per-step loss log.
    """
    examples = load_pair_examples(pairs_file, corpus_file)
    encoder = SidecarEncoder.from_spec(model_path)
    encoder.add_markers()
    torch.manual_seed(seed)
    head = torch.nn.Linear(encoder.dimension, 1)
    torch.nn.init.zeros_(head.weight)
    torch.nn.init.zeros_(head.bias)
    encoder.model.train()
    _disable_dropout(encoder.model)
    optimizer = torch.optim.SGD(
        list(encoder.model.parameters()) + list(head.parameters()), lr=lr
    )
    eps = 1e-7
    losses: list[float] = []
    for _epoch in range(epochs):
        for example in examples:
            optimizer.zero_grad()
            vec, _markers, _truncated = encoder._forward_pair(
                example.text_a, example.span_a, example.text_b, example.span_b
            )
            prob = torch.sigmoid(head(vec)).squeeze().clamp(eps, 1.0 - eps)
            target = torch.tensor(float(example.label))
            loss = -(target * torch.log(prob) + (1.0 - target) * torch.log(1.0 - prob))
            losses.append(float(loss.detach()))
            loss.backward()
            optimizer.step()
    encoder.model.eval()
    saved = encoder.save(out_dir)
    save_head(
        saved / "head.json",
        head.weight.detach().numpy().reshape(-1),
        float(head.bias.detach()),
    )
    return saved, losses

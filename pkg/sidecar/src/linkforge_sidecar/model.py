"""Transformer encoder wrapper: single-sentence token embeddings and joint
pair embeddings, with optional mention markers.

Models are either a directory saved by ``save`` / fine-tuning (loadable via
transformers ``from_pretrained``) or a synthetic spec ``tiny:<seed>[:dim]``
that builds a small randomly initialized BERT with a character-level
WordPiece tokenizer. The tiny model needs no downloads, is fully
deterministic for a given seed, and trains in seconds on CPU, which is what
the protocol and fine-tuning tests run against.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

__all__ = ["SidecarEncoder", "MARKER_BEGIN", "MARKER_END"]

MARKER_BEGIN = "[BEG]"
MARKER_END = "[END]"

_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789äöüß"


def _build_char_tokenizer() -> PreTrainedTokenizerFast:
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "[MASK]": 4}
    for ch in _CHARS:
        vocab[ch] = len(vocab)
    for ch in _CHARS:
        vocab["##" + ch] = len(vocab)
    backend = Tokenizer(WordPiece(vocab, unk_token="[UNK]", max_input_chars_per_word=200))
    backend.normalizer = BertNormalizer(lowercase=True)
    backend.pre_tokenizer = BertPreTokenizer()
    backend.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


class SidecarEncoder:
    """One loaded model plus its tokenizer, exposing the two encode modes."""

    def __init__(
        self,
        model: BertModel,
        tokenizer: PreTrainedTokenizerFast,
        spec: str,
        max_length: int = 128,
    ) -> None:
        self.model = model
        self.tokenizer = tokenizer
        self.spec = spec
        self.max_length = max_length
        self.model.eval()

    # -- construction -------------------------------------------------------

    @classmethod
    def from_spec(cls, spec: str, max_length: int = 128) -> "SidecarEncoder":
        """Load ``tiny:<seed>[:dim]`` or a saved model directory."""
        if spec.startswith("tiny:"):
            parts = spec.split(":")
            seed = int(parts[1])
            dim = int(parts[2]) if len(parts) > 2 else 64
            tokenizer = _build_char_tokenizer()
            torch.manual_seed(seed)
            config = BertConfig(
                vocab_size=len(tokenizer),
                hidden_size=dim,
                num_hidden_layers=2,
                num_attention_heads=2,
                intermediate_size=dim * 2,
                max_position_embeddings=max_length * 2,
            )
            return cls(BertModel(config), tokenizer, spec, max_length)
        path = Path(spec)
        if not path.is_dir():
            raise FileNotFoundError(f"model directory not found: {spec}")
        tokenizer = PreTrainedTokenizerFast.from_pretrained(path)
        model = BertModel.from_pretrained(path)
        return cls(model, tokenizer, spec, max_length)

    def save(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(out_dir)
        self.tokenizer.save_pretrained(out_dir)
        return out_dir

    # -- properties ---------------------------------------------------------

    @property
    def dimension(self) -> int:
        return int(self.model.config.hidden_size)

    @property
    def has_markers(self) -> bool:
        vocab = self.tokenizer.get_vocab()
        return MARKER_BEGIN in vocab and MARKER_END in vocab

    def add_markers(self) -> None:
        """Register mention marker tokens (done at fine-tuning start)."""
        if self.has_markers:
            return
        self.tokenizer.add_special_tokens({"additional_special_tokens": [MARKER_BEGIN, MARKER_END]})
        self.model.resize_token_embeddings(len(self.tokenizer))

    # -- encoding -----------------------------------------------------------

    def encode_single(
        self, text: str, span: tuple[int, int]
    ) -> tuple[np.ndarray, list[tuple[int, int]], bool]:
        """Per-token embeddings and char spans, special positions excluded."""
        vectors, spans, truncated = self._forward_single(text)
        return vectors.detach().numpy(), spans, truncated

    def _forward_single(self, text: str) -> tuple[torch.Tensor, list[tuple[int, int]], bool]:
        full = self.tokenizer(text, add_special_tokens=True)
        enc = self.tokenizer(
            text,
            return_offsets_mapping=True,
            return_special_tokens_mask=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )
        truncated = len(full["input_ids"]) > enc["input_ids"].shape[1]
        hidden = self.model(
            input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]
        ).last_hidden_state[0]
        keep = enc["special_tokens_mask"][0] == 0
        offsets = enc["offset_mapping"][0]
        spans = [
            (int(start), int(end))
            for (start, end), keep_row in zip(offsets.tolist(), keep.tolist())
            if keep_row
        ]
        return hidden[keep], spans, truncated

    def pooled_mention(self, text: str, span: tuple[int, int]) -> torch.Tensor:
        """Mean of token embeddings overlapping the mention span (differentiable)."""
        hidden, spans, _ = self._forward_single(text)
        rows = [
            i for i, (start, end) in enumerate(spans) if start < span[1] and span[0] < end
        ]
        if not rows:
            raise ValueError(f"no token overlaps span {span} in {text!r}")
        return hidden[rows].mean(dim=0)

    def _marked_ids(self, text: str, span: tuple[int, int]) -> list[int]:
        enc = self.tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
        ids = list(enc["input_ids"])
        offsets = enc["offset_mapping"]
        if not self.has_markers:
            return ids
        overlap = [
            i for i, (start, end) in enumerate(offsets) if start < span[1] and span[0] < end
        ]
        if not overlap:
            return ids
        vocab = self.tokenizer.get_vocab()
        first, last = overlap[0], overlap[-1]
        return (
            ids[:first]
            + [vocab[MARKER_BEGIN]]
            + ids[first : last + 1]
            + [vocab[MARKER_END]]
            + ids[last + 1 :]
        )

    def encode_pair(
        self,
        text_a: str,
        span_a: tuple[int, int],
        text_b: str,
        span_b: tuple[int, int],
    ) -> tuple[np.ndarray, bool, bool]:
        """Classifier-token embedding of the jointly encoded pair.

        Mentions are wrapped in marker tokens when the model has them
        (after fine-tuning); returns (vector, markers_used, truncated).
        """
        vector, markers, truncated = self._forward_pair(text_a, span_a, text_b, span_b)
        return vector.detach().numpy(), markers, truncated

    def _forward_pair(
        self,
        text_a: str,
        span_a: tuple[int, int],
        text_b: str,
        span_b: tuple[int, int],
    ) -> tuple[torch.Tensor, bool, bool]:
        ids_a = self._marked_ids(text_a, span_a)
        ids_b = self._marked_ids(text_b, span_b)
        budget = self.max_length - 3
        truncated = len(ids_a) + len(ids_b) > budget
        if truncated:
            half = budget // 2
            ids_a = ids_a[:half]
            ids_b = ids_b[: budget - len(ids_a)]
        vocab = self.tokenizer.get_vocab()
        cls_id, sep_id = vocab["[CLS]"], vocab["[SEP]"]
        input_ids = [cls_id] + ids_a + [sep_id] + ids_b + [sep_id]
        type_ids = [0] * (len(ids_a) + 2) + [1] * (len(ids_b) + 1)
        hidden = self.model(
            input_ids=torch.tensor([input_ids]),
            token_type_ids=torch.tensor([type_ids]),
            attention_mask=torch.ones(1, len(input_ids), dtype=torch.long),
        ).last_hidden_state[0]
        return hidden[0], self.has_markers, truncated


def save_head(path: str | Path, weights: np.ndarray, bias: float) -> None:
    """Cross-encoder head in the JSON layout the linking CLI consumes."""
    obj = {
        "dimension": int(len(weights)),
        "weights": [float(x) for x in weights],
        "bias": float(bias),
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")

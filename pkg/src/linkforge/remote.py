"""HTTP client for an external encoder endpoint.

Protocol: ``GET <base>/handshake`` returns ``{"dimension": int,
"supports_pair_encoding": bool, ...}``; ``POST <base>/encode`` accepts
``{"id", "mode": "single"|"pair", "texts": [...], "spans": [[start, end],
...]}`` and returns per-token vectors with character spans (single mode)
or one pair vector (pair mode). Everything is JSON over UTF-8.
"""
from __future__ import annotations

import itertools

import numpy as np
import requests

from .embed import TokenEmbeddingSeq

__all__ = ["RemoteEncoder"]


class RemoteEncoder:
    """EncoderPort implementation backed by an HTTP endpoint."""

    def __init__(self, base_url: str, timeout: float = 60.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._ids = itertools.count()
        handshake = self._get("/handshake")
        self._dimension = int(handshake["dimension"])
        self._supports_pair = bool(handshake["supports_pair_encoding"])

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def supports_pair_encoding(self) -> bool:
        return self._supports_pair

    def _get(self, path: str) -> dict:
        response = requests.get(self.base_url + path, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def _post(self, path: str, payload: dict) -> dict:
        response = requests.post(self.base_url + path, json=payload, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def encode(self, sentence: str, span: tuple[int, int]) -> TokenEmbeddingSeq:
        payload = {
            "id": str(next(self._ids)),
            "mode": "single",
            "texts": [sentence],
            "spans": [[span[0], span[1]]],
        }
        obj = self._post("/encode", payload)
        vectors = np.array(obj["vectors"], dtype=np.float64)
        spans = tuple((int(s), int(e)) for s, e in obj["token_spans"])
        return TokenEmbeddingSeq(vectors=vectors, token_char_spans=spans)

    def encode_pair(
        self,
        sentence_a: str,
        span_a: tuple[int, int],
        sentence_b: str,
        span_b: tuple[int, int],
    ) -> np.ndarray:
        if not self._supports_pair:
            raise RuntimeError("endpoint does not support pair encoding")
        payload = {
            "id": str(next(self._ids)),
            "mode": "pair",
            "texts": [sentence_a, sentence_b],
            "spans": [[span_a[0], span_a[1]], [span_b[0], span_b[1]]],
        }
        obj = self._post("/encode", payload)
        return np.array(obj["vector"], dtype=np.float64)

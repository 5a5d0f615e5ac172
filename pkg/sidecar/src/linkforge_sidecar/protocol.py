"""Wire protocol: request validation and JSON schemas.

One GET handshake plus one POST encode endpoint, JSON over UTF-8. The
schemas double as the conformance-test contract.
"""
from __future__ import annotations

from typing import Any

__all__ = [
    "ENCODE_REQUEST_SCHEMA",
    "HANDSHAKE_SCHEMA",
    "PAIR_RESPONSE_SCHEMA",
    "SINGLE_RESPONSE_SCHEMA",
    "RequestError",
    "parse_encode_request",
]

_SPAN_SCHEMA = {
    "type": "array",
    "items": {"type": "integer", "minimum": 0},
    "minItems": 2,
    "maxItems": 2,
}

HANDSHAKE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["dimension", "supports_pair_encoding", "markers", "model"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "supports_pair_encoding": {"type": "boolean"},
        "markers": {"type": "boolean"},
        "model": {"type": "string"},
    },
}

ENCODE_REQUEST_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["id", "mode", "texts", "spans"],
    "properties": {
        "id": {"type": "string"},
        "mode": {"enum": ["single", "pair"]},
        "texts": {"type": "array", "items": {"type": "string"}, "minItems": 1, "maxItems": 2},
        "spans": {"type": "array", "items": _SPAN_SCHEMA, "minItems": 1, "maxItems": 2},
    },
}

SINGLE_RESPONSE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["id", "dimension", "vectors", "token_spans", "truncated"],
    "properties": {
        "id": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "vectors": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
        },
        "token_spans": {"type": "array", "items": _SPAN_SCHEMA},
        "truncated": {"type": "boolean"},
    },
}

PAIR_RESPONSE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["id", "dimension", "vector", "markers", "truncated"],
    "properties": {
        "id": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "vector": {"type": "array", "items": {"type": "number"}},
        "markers": {"type": "boolean"},
        "truncated": {"type": "boolean"},
    },
}


class RequestError(ValueError):
    """Malformed encode request; maps to HTTP 400."""


def parse_encode_request(obj: Any) -> tuple[str, str, list[str], list[tuple[int, int]]]:
    """Check an encode request and return (id, mode, texts, spans)."""
    if not isinstance(obj, dict):
        raise RequestError("request body must be a JSON object")
    for key in ("id", "mode", "texts", "spans"):
        if key not in obj:
            raise RequestError(f"missing key {key!r}")
    mode = obj["mode"]
    if mode not in ("single", "pair"):
        raise RequestError(f"mode must be single or pair, got {mode!r}")
    texts = obj["texts"]
    spans = obj["spans"]
    expected = 1 if mode == "single" else 2
    if not isinstance(texts, list) or len(texts) != expected:
        raise RequestError(f"{mode} mode needs exactly {expected} text(s)")
    if not isinstance(spans, list) or len(spans) != expected:
        raise RequestError(f"{mode} mode needs exactly {expected} span(s)")
    out_spans = []
    for text, span in zip(texts, spans):
        if not isinstance(text, str) or not text.strip():
            raise RequestError("texts must be non-empty strings")
        if not isinstance(span, (list, tuple)) or len(span) != 2:
            raise RequestError("spans must be [start, end] pairs")
        start, end = span
        if not (isinstance(start, int) and isinstance(end, int)):
            raise RequestError("span offsets must be integers")
        if not (0 <= start < end <= len(text)):
            raise RequestError(f"span [{start}, {end}) out of bounds for text of length {len(text)}")
        out_spans.append((start, end))
    return str(obj["id"]), mode, list(texts), out_spans

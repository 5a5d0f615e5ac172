"""JSON-over-HTTP encoder endpoint.

``GET /handshake`` reports dimension and capabilities; ``POST /encode``
serves single (per-token) and pair (classifier-token) embeddings. Requests
are handled concurrently; model inference is serialized behind a lock so
responses are independent of interleaving.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .model import SidecarEncoder
from .protocol import RequestError, parse_encode_request

__all__ = ["make_server", "serve"]


def _handler_for(encoder: SidecarEncoder) -> type[BaseHTTPRequestHandler]:
    lock = threading.Lock()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _send(self, obj, status=200) -> None:
            body = json.dumps(obj, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self) -> None:
            if self.path.rstrip("/") == "/handshake" or self.path == "/handshake":
                self._send({
                    "dimension": encoder.dimension,
                    "supports_pair_encoding": True,
                    "markers": encoder.has_markers,
                    "model": encoder.spec,
                })
            else:
                self._send({"error": f"unknown path {self.path}"}, status=404)

        def do_POST(self) -> None:
            if self.path != "/encode":
                self._send({"error": f"unknown path {self.path}"}, status=404)
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                obj = json.loads(self.rfile.read(length))
                request_id, mode, texts, spans = parse_encode_request(obj)
            except (RequestError, json.JSONDecodeError, ValueError) as exc:
                self._send({"error": str(exc)}, status=400)
                return
            try:
                with lock:
                    if mode == "single":
                        vectors, token_spans, truncated = encoder.encode_single(texts[0], spans[0])
                        self._send({
                            "id": request_id,
                            "dimension": encoder.dimension,
                            "vectors": [[float(x) for x in row] for row in vectors],
                            "token_spans": [[s, e] for s, e in token_spans],
                            "truncated": truncated,
                        })
                    else:
                        vector, markers, truncated = encoder.encode_pair(
                            texts[0], spans[0], texts[1], spans[1]
                        )
                        self._send({
                            "id": request_id,
                            "dimension": encoder.dimension,
                            "vector": [float(x) for x in vector],
                            "markers": markers,
                            "truncated": truncated,
                        })
            except ValueError as exc:
                self._send({"error": str(exc)}, status=400)

    return Handler


def make_server(model_spec: str, port: int = 0, max_length: int = 128) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    encoder = SidecarEncoder.from_spec(model_spec, max_length=max_length)
    return ThreadingHTTPServer(("127.0.0.1", port), _handler_for(encoder))


def serve(model_spec: str, port: int, max_length: int = 128) -> None:
    """Run the endpoint until interrupted."""
    server = make_server(model_spec, port=port, max_length=max_length)
    host, bound_port = server.server_address[:2]
    print(f"serving {model_spec} on http://{host}:{bound_port} "
          f"(handshake: GET /handshake, encode: POST /encode)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()

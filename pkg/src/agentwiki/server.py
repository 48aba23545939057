"""Read-only tool server exposing ``wiki_search`` and ``wiki_read``.

One JSON protocol over two transports. Request: ``{"tool": ..., "args": {...}}``.
Search response: ``{"hits": [{path, score, title, aliases, tags, summary}]}``.
Read response: ``{"results": [{path, kind, text} | {path, error}]}``. Protocol
errors travel in the body (``{"error", "message"}``); over HTTP they still get
status 200, with non-200 reserved for transport faults. Both transports encode
through the same function, so equal requests produce byte-identical bodies.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import codec
from .model import WikiSnapshot, try_parse_path
from .search import SearchIndex, search

log = logging.getLogger(__name__)

MAX_READ_PATHS = 20


def encode_body(obj: dict) -> bytes:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def protocol_error(code: str, message: str) -> dict:
    return {"error": code, "message": message}


def handle_wiki_search(args: dict, index: SearchIndex) -> dict:
    query = args.get("query")
    limit = args.get("limit", 10)
    if not isinstance(query, str):
        return protocol_error("bad_args", "wiki_search needs a string 'query'")
    if not isinstance(limit, int) or isinstance(limit, bool) or limit < 1:
        return protocol_error("bad_args", "'limit' must be a positive integer")
    hits = search(index, query, limit)
    return {
        "hits": [
            {
                "path": str(h.path),
                "score": h.score,
                "title": h.title,
                "aliases": list(h.aliases),
                "tags": list(h.tags),
                "summary": h.summary,
            }
            for h in hits
        ]
    }


def _read_one(raw: str, snapshot: WikiSnapshot) -> dict:
    name = raw.strip()
    if name == "index.md" or name == "index":
        return {
            "path": raw,
            "kind": "index",
            "text": codec.render_global_index(snapshot.global_index),
        }
    if name.endswith("/_index.md") or name.endswith("/_index"):
        directory = name.removesuffix("/_index.md").removesuffix("/_index")
        index = snapshot.indices.get(directory)
        if index is None:
            return {"path": raw, "error": "not_found"}
        return {"path": raw, "kind": "index", "text": codec.render_index(index)}
    path = try_parse_path(name.removesuffix(".md"))
    if path is None:
        return {"path": raw, "error": "invalid_path"}
    page = snapshot.pages.get(path)
    if page is not None:
        return {"path": raw, "kind": "page", "text": codec.render_page(page)}
    record = snapshot.sources.get(path)
    if record is not None:
        return {"path": raw, "kind": "source", "text": record.text}
    return {"path": raw, "error": "not_found"}


def handle_wiki_read(args: dict, snapshot: WikiSnapshot) -> dict:
    paths = args.get("paths")
    if (
        not isinstance(paths, list)
        or not paths
        or len(paths) > MAX_READ_PATHS
        or not all(isinstance(p, str) for p in paths)
    ):
        return protocol_error(
            "bad_args", f"wiki_read needs 1..{MAX_READ_PATHS} string paths"
        )
    return {"results": [_read_one(p, snapshot) for p in paths]}


class ToolService:
    """Holds the served (snapshot, index) pair; a new compile result replaces
    the pair atomically between requests, never mid-request."""

    def __init__(self, snapshot: WikiSnapshot, index: SearchIndex) -> None:
        if index.revision != snapshot.revision:
            raise ValueError(
                f"index revision {index.revision} != snapshot revision {snapshot.revision}"
            )
        self._pair = (snapshot, index)
        self._swap_lock = threading.Lock()

    def swap(self, snapshot: WikiSnapshot, index: SearchIndex) -> None:
        if index.revision != snapshot.revision:
            raise ValueError("snapshot and index revisions differ")
        with self._swap_lock:
            self._pair = (snapshot, index)

    def handle(self, request: dict) -> dict:
        snapshot, index = self._pair
        if not isinstance(request, dict):
            return protocol_error("bad_request", "request must be a JSON object")
        tool = request.get("tool")
        args = request.get("args", {})
        if not isinstance(args, dict):
            return protocol_error("bad_args", "'args' must be an object")
        if tool == "wiki_search":
            return handle_wiki_search(args, index)
        if tool == "wiki_read":
            return handle_wiki_read(args, snapshot)
        return protocol_error("unknown_tool", f"no such tool: {tool!r}")


def serve_stdio(service: ToolService, stdin=None, stdout=None) -> None:
    """Line-delimited JSON over standard streams; runs until EOF. A malformed
    line yields one error response and the loop keeps going."""
    import sys

    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            body = protocol_error("bad_json", f"unparsable request line: {exc}")
        else:
            body = service.handle(request)
        stdout.write(encode_body(body).decode("utf-8") + "\n")
        stdout.flush()


def make_http_server(service: ToolService, host: str, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802 (stdlib naming)
            if self.path != "/tool":
                self.send_error(404)
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                request = json.loads(raw)
            except (ValueError, json.JSONDecodeError) as exc:
                body = encode_body(protocol_error("bad_json", str(exc)))
            else:
                body = encode_body(service.handle(request))
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt: str, *args) -> None:
            log.debug("http: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_http(service: ToolService, host: str, port: int) -> None:
    server = make_http_server(service, host, port)
    log.info("serving on http://%s:%d/tool", host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()

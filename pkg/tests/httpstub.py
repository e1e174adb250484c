"""Minimal scriptable HTTP catalog stub with a request log for assertions."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse


def paged_dataset(items):
    """Behavior serving slices of *items* by limit/offset (query ignored)."""

    def behave(index, params):
        offset = int(params.get("offset", "0"))
        limit = int(params.get("limit", "10"))
        return 200, items[offset : offset + limit]

    return behave


def fail_then(status: int, failures: int, then):
    """Behavior answering *status* for the first *failures* requests."""

    def behave(index, params):
        if index < failures:
            return status, {"error": "try later"}
        return then(index, params)

    return behave


class _Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        parsed = urlparse(self.path)
        params = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        entry = {
            "time": time.monotonic(),
            "path": parsed.path,
            "params": params,
            "headers": {k.lower(): v for k, v in self.headers.items()},
        }
        server = self.server
        with server.lock:
            index = len(server.log)
            server.log.append(entry)
        status, payload = server.behavior(index, params)
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


class StubCatalogServer:
    """Context manager running the stub on an ephemeral localhost port."""

    def __init__(self, behavior=None):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.server.log = []
        self.server.lock = threading.Lock()
        self.server.behavior = behavior or paged_dataset([])
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    @property
    def log(self):
        return self.server.log

    def set_behavior(self, behavior):
        self.server.behavior = behavior

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
        return False

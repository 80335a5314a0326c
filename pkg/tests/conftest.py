"""Shared fixtures: a local HTTP server for crawler and provider tests."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class LocalHttpServer:
    """Tiny fixture server: static GET routes, canned/callable POST routes.

    ``request_log`` records every request as (method, path); POST bodies
    are parsed as JSON and appended to ``post_bodies``.
    """

    def __init__(self):
        self.routes: dict[str, tuple[int, str, bytes]] = {}
        self.post_handlers: dict[str, object] = {}
        self.request_log: list[tuple[str, str]] = []
        self.post_bodies: list[dict] = []
        self._lock = threading.Lock()

        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                with server._lock:
                    server.request_log.append(("GET", self.path))
                route = server.routes.get(self.path)
                if route is None:
                    self.send_response(404)
                    self.end_headers()
                    self.wfile.write(b"not found")
                    return
                status, content_type, body = route
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with server._lock:
                    server.request_log.append(("POST", self.path))
                    server.post_bodies.append(payload)
                handler = server.post_handlers.get(self.path)
                if handler is None:
                    self.send_response(404)
                    self.end_headers()
                    return
                response = handler(payload) if callable(handler) else handler
                status = 200
                if isinstance(response, tuple):
                    status, response = response
                body = json.dumps(response).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        self.base_url = f"http://127.0.0.1:{self._httpd.server_address[1]}"

    def add_page(self, path: str, html: str, status: int = 200) -> None:
        self.routes[path] = (status, "text/html; charset=utf-8", html.encode("utf-8"))

    def add_text(self, path: str, text: str, status: int = 200) -> None:
        self.routes[path] = (status, "text/plain", text.encode("utf-8"))

    def add_raw(self, path: str, body: bytes, content_type: str, status: int = 200) -> None:
        self.routes[path] = (status, content_type, body)

    def crawl_paths(self) -> list[str]:
        """GET paths in request order, robots.txt probes excluded."""
        return [
            p for (m, p) in self.request_log if m == "GET" and p != "/robots.txt"
        ]

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture
def http_server():
    server = LocalHttpServer()
    yield server
    server.shutdown()

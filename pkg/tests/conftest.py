"""Pytest fixtures: local mock HTTP services for the wire clients."""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


@dataclass
class RecordedRequest:
    method: str
    path: str
    headers: dict
    body: bytes

    @property
    def json(self):
        return json.loads(self.body)

    @property
    def multipart_filename(self) -> str | None:
        match = re.search(rb'filename="([^"]+)"', self.body)
        return match.group(1).decode("utf-8") if match else None


def json_response(payload, status: int = 200):
    return status, "application/json", json.dumps(payload, ensure_ascii=False).encode("utf-8")


def chat_response(text: str, status: int = 200):
    return json_response({"choices": [{"message": {"content": text}}]}, status)


class MockService:
    """Tiny programmable HTTP server; records every request it sees."""

    def __init__(self) -> None:
        self.requests: list[RecordedRequest] = []
        self.responder = lambda req: (404, "text/plain", b"no responder installed")
        service = self

        class Handler(BaseHTTPRequestHandler):
            def _serve(self):
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                request = RecordedRequest(
                    method=self.command, path=self.path,
                    headers=dict(self.headers), body=body,
                )
                service.requests.append(request)
                status, content_type, payload = service.responder(request)
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            do_POST = _serve
            do_GET = _serve

            def log_message(self, *args):  # keep test output quiet
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def make_service():
    services: list[MockService] = []

    def factory() -> MockService:
        service = MockService()
        services.append(service)
        return service

    yield factory
    for service in services:
        service.stop()


@pytest.fixture
def mock_service(make_service):
    return make_service()

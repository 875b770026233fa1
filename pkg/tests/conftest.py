from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

import pytest
import uvicorn

from cwskernel import Kernel, KernelConfig
from cwskernel.envelope import decode_envelope, encode_envelope
from cwskernel.nlp.services import DATA_DIR, Resources


@pytest.fixture(scope="session")
def resources() -> Resources:
    return Resources.from_dir(DATA_DIR)


@pytest.fixture
def kernel(resources) -> Kernel:
    return Kernel(KernelConfig(vectors=str(DATA_DIR / "demo.vec")), resources=resources)


@pytest.fixture
def client(kernel):
    from fastapi.testclient import TestClient

    from cwskernel.api.app import create_app

    with TestClient(create_app(kernel)) as c:
        yield c


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


Behaviour = Callable[[bytes], tuple[int, bytes]]


def echo_with(**fields) -> Behaviour:
    """Stub service: decode the envelope, set ``fields`` in attrs, echo it back."""

    def behave(body: bytes) -> tuple[int, bytes]:
        env = decode_envelope(body)
        env.attrs.update(fields)
        return 200, encode_envelope(env)

    return behave


@dataclass
class StubServer:
    behaviour: Behaviour
    healthy: bool = True
    delay: float = 0.0
    calls: int = 0
    params: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def start(self) -> str:
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, body: bytes) -> None:
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path.endswith("/health") and stub.healthy:
                    self._send(200, b'{"status":"ok"}')
                else:
                    self._send(503, b'{"status":"down"}')

            def do_POST(self):
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                with stub._lock:
                    stub.calls += 1
                    stub.params.append(self.headers.get("X-CWS-Params"))
                if stub.delay:
                    time.sleep(stub.delay)
                self._send(*stub.behaviour(body))

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        threading.Thread(target=self.server.serve_forever, args=(0.05,), daemon=True).start()
        return f"http://127.0.0.1:{self.server.server_address[1]}"

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_factory():
    started: list[StubServer] = []

    def make(behaviour: Behaviour, **kw) -> tuple[StubServer, str]:
        stub = StubServer(behaviour, **kw)
        url = stub.start()
        started.append(stub)
        return stub, url

    yield make
    for stub in started:
        stub.stop()


@pytest.fixture
def dead_url() -> str:
    """A URL on a port nothing listens on."""
    return f"http://127.0.0.1:{free_port()}"


@pytest.fixture
def live_server(resources):
    """A real kernel over uvicorn on a free port; yields (kernel, base URL)."""
    from cwskernel.api.app import create_app

    kernel = Kernel(KernelConfig(vectors=str(DATA_DIR / "demo.vec")), resources=resources)
    port = free_port()
    server = uvicorn.Server(uvicorn.Config(create_app(kernel), host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.02)
    yield kernel, f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def json_body(doc) -> bytes:
    return json.dumps(doc, ensure_ascii=False).encode("utf-8")

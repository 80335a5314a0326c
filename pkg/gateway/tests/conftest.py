from __future__ import annotations

import socket
import threading
import time

import pytest
import uvicorn

from model_gateway.app import GatewayConfig, create_app


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def live_gateway():
    """A real uvicorn server on a free port, torn down after the test."""
    config = GatewayConfig(port=_free_port())
    app = create_app(config)
    server = uvicorn.Server(
        uvicorn.Config(app, host=config.host, port=config.port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started and time.time() < deadline:
        time.sleep(0.02)
    assert server.started, "gateway did not start within 10s"
    yield f"http://{config.host}:{config.port}", config
    server.should_exit = True
    thread.join(timeout=5)

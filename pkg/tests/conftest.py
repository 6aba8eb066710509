from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from coordbench import Graph


class MockChatServer:
    """Local stand-in for an OpenAI-style chat-completion endpoint.

    reply is either a string or a callable taking the parsed request body.
    usage=None omits the usage block; fail_first returns HTTP 500 for that
    many requests before answering normally.
    """

    def __init__(self, reply="FINAL: yes", usage=(100, 20), fail_first=0):
        self.reply = reply
        self.usage = usage
        self.fail_first = fail_first
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 - http.server API
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.requests.append(body)
                    n_seen = len(outer.requests)
                if n_seen <= outer.fail_first:
                    self.send_response(500)
                    self.end_headers()
                    self.wfile.write(b"boom")
                    return
                text = outer.reply(body) if callable(outer.reply) else outer.reply
                payload = {"choices": [{"message": {"role": "assistant", "content": text}}]}
                if outer.usage is not None:
                    payload["usage"] = {
                        "prompt_tokens": outer.usage[0],
                        "completion_tokens": outer.usage[1],
                    }
                data = json.dumps(payload).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):  # keep test output clean
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def mock_chat():
    servers = []

    def start(**kwargs) -> MockChatServer:
        server = MockChatServer(**kwargs)
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.close()


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def cycle_graph(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])

import http.server
import threading

import pytest

from malfam.errors import NetworkFailureError, RateLimitedError, ReportNotFoundError
from malfam.fetch import RateLimiter, fetch_static_report


class _Handler(http.server.BaseHTTPRequestHandler):
    limited_hits = {}

    def do_GET(self):
        if self.path.startswith("/ok/"):
            body = b'{"scans": {}}'
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif self.path.startswith("/unknown/"):
            self.send_response(204)
            self.end_headers()
        elif self.path.startswith("/limited/"):
            hits = self.limited_hits.setdefault(self.path, 0)
            self.limited_hits[self.path] = hits + 1
            if hits == 0:
                self.send_response(429)
                self.send_header("Retry-After", "0")
                self.end_headers()
            else:
                body = b"late"
                self.send_response(200)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
        else:
            self.send_response(429)
            self.send_header("Retry-After", "0")
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def server():
    srv = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()


class TestDirectorySource:
    def test_file_present(self, tmp_path):
        (tmp_path / "ab12.json").write_bytes(b'{"scans": {}}')
        assert fetch_static_report("ab12", tmp_path) == b'{"scans": {}}'

    def test_corpus_layout(self, tmp_path):
        nested = tmp_path / "reports" / "static"
        nested.mkdir(parents=True)
        (nested / "cd34.json").write_bytes(b"{}")
        assert fetch_static_report("cd34", tmp_path) == b"{}"

    def test_absent(self, tmp_path):
        with pytest.raises(ReportNotFoundError):
            fetch_static_report("nope", tmp_path)


class TestHttpSource:
    def test_ok(self, server):
        assert fetch_static_report("h1", f"{server}/ok") == b'{"scans": {}}'

    def test_204_means_unknown_hash(self, server):
        with pytest.raises(ReportNotFoundError):
            fetch_static_report("h2", f"{server}/unknown")

    def test_retry_after_honored(self, server):
        assert fetch_static_report("h3", f"{server}/limited") == b"late"

    def test_persistent_429_raises(self, server):
        with pytest.raises(RateLimitedError):
            fetch_static_report("h4", f"{server}/always", max_retries=2)

    def test_connection_refused(self):
        with pytest.raises(NetworkFailureError):
            fetch_static_report("h5", "http://127.0.0.1:9", timeout=1, max_retries=0)


def test_rate_limiter_spacing():
    import time
    limiter = RateLimiter(min_interval_s=0.02)
    start = time.monotonic()
    for _ in range(3):
        limiter.wait()
    assert time.monotonic() - start >= 0.04

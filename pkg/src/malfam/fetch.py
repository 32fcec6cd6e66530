"""Client for pulling static report bytes from a directory tree or HTTP service.

The HTTP side expects an API key in the MALFAM_VT_API_KEY environment
variable and treats a 204 response as "hash unknown to the service".
Workers may share one client; requests serialize through a common
minimum-interval rate limiter.
"""

import os
import threading
import time
from pathlib import Path

import requests

from .errors import NetworkFailureError, RateLimitedError, ReportNotFoundError

API_KEY_ENV = "MALFAM_VT_API_KEY"


class RateLimiter:
    """Thread-safe minimum spacing between consecutive requests."""

    def __init__(self, min_interval_s=0.0):
        self.min_interval_s = min_interval_s
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def wait(self):
        if self.min_interval_s <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self.min_interval_s
        if delay > 0:
            time.sleep(delay)


def fetch_static_report(sample_id, source, *, limiter=None, session=None,
                        timeout=30.0, max_retries=3):
    """Return raw report bytes for ``sample_id`` from ``source``.

    ``source`` is either a directory (the report is ``<sample_id>.json``,
    looked up directly and under ``reports/static/``) or an HTTP(S) base URL
    queried as ``<source>/<sample_id>``.
    """
    if str(source).startswith(("http://", "https://")):
        return _fetch_http(sample_id, str(source).rstrip("/"), limiter, session,
                           timeout, max_retries)
    root = Path(source)
    for candidate in (root / f"{sample_id}.json",
                      root / "reports" / "static" / f"{sample_id}.json"):
        if candidate.is_file():
            return candidate.read_bytes()
    raise ReportNotFoundError(f"no report file for {sample_id} under {root}")


def _fetch_http(sample_id, base_url, limiter, session, timeout, max_retries):
    http = session or requests
    headers = {}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["x-apikey"] = api_key
    url = f"{base_url}/{sample_id}"
    retry_after = None
    for _ in range(max_retries + 1):
        if limiter is not None:
            limiter.wait()
        try:
            resp = http.get(url, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            raise NetworkFailureError(f"GET {url} failed: {exc}") from exc
        if resp.status_code == 200:
            return resp.content
        if resp.status_code in (204, 404):
            raise ReportNotFoundError(f"{sample_id} unknown to {base_url} "
                                      f"(status {resp.status_code})")
        if resp.status_code == 429:
            retry_after = _retry_after_seconds(resp)
            time.sleep(retry_after)
            continue
        raise NetworkFailureError(f"GET {url} returned status {resp.status_code}")
    raise RateLimitedError(f"{base_url} kept rate-limiting after {max_retries} retries",
                           retry_after=retry_after)


def _retry_after_seconds(resp):
    try:
        return max(0.0, float(resp.headers.get("Retry-After", 1)))
    except (TypeError, ValueError):
        return 1.0

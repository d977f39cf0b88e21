"""HTTP plumbing: request counting, retries with backoff, rate limiting and
an offline transport that serves fixtures from a directory."""

from __future__ import annotations

import logging
import re
import time
import urllib.parse
from pathlib import Path
from typing import Callable

import httpx

from .errors import OfflineMiss

logger = logging.getLogger(__name__)

RETRIES = 3
BACKOFF_BASE_S = 1.0
TIMEOUT_S = 60.0


class RequestCounter:
    """httpx request hook; counts every request that reaches a transport."""

    def __init__(self) -> None:
        self.count = 0
        self.urls: list[str] = []

    def __call__(self, request: httpx.Request) -> None:
        self.count += 1
        self.urls.append(str(request.url))


def make_client(transport: httpx.BaseTransport | None = None,
                counter: RequestCounter | None = None) -> httpx.Client:
    hooks = {"request": [counter]} if counter is not None else {}
    return httpx.Client(transport=transport, timeout=TIMEOUT_S, event_hooks=hooks,
                        follow_redirects=True)


class Throttle:
    """Enforces a minimum spacing between successive calls to ``wait``."""

    def __init__(self, delay_ms: int, sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic):
        self.delay_s = max(delay_ms, 0) / 1000.0
        self._sleep = sleep
        self._clock = clock
        self._last: float | None = None

    def wait(self) -> None:
        if self._last is not None and self.delay_s > 0:
            remaining = self.delay_s - (self._clock() - self._last)
            if remaining > 0:
                self._sleep(remaining)
        self._last = self._clock()


class RetryExhausted(Exception):
    def __init__(self, url: str, last: BaseException | httpx.Response):
        self.url = url
        self.last = last
        detail = f"HTTP {last.status_code}" if isinstance(last, httpx.Response) else repr(last)
        super().__init__(f"{url}: giving up after retries ({detail})")


def send_with_retry(client: httpx.Client, method: str, url: str, *,
                    retries: int = RETRIES, backoff_s: float = BACKOFF_BASE_S,
                    sleep: Callable[[float], None] = time.sleep,
                    **kwargs) -> httpx.Response:
    """Send a request, retrying 5xx, 429 and transport errors with exponential
    backoff. Other 4xx responses are returned to the caller unretried.

    ``OfflineMiss`` is never retried.
    """
    last: BaseException | httpx.Response | None = None
    for attempt in range(retries + 1):
        try:
            resp = client.request(method, url, **kwargs)
        except OfflineMiss:
            raise
        except httpx.TransportError as exc:
            last = exc
        else:
            if resp.status_code < 500 and resp.status_code != 429:
                return resp
            last = resp
        if attempt < retries:
            delay = backoff_s * (2 ** attempt)
            logger.warning("%s %s failed (attempt %d/%d), retrying in %.1fs",
                           method, url, attempt + 1, retries + 1, delay)
            sleep(delay)
    raise RetryExhausted(url, last)


def keyword_slug(keyword: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", keyword.casefold()).strip("-") or "_"


class OfflineTransport(httpx.BaseTransport):
    """Serves arXiv feeds and PDFs from a fixture directory; refuses everything else.

    Layout::

        <root>/feeds/<keyword-slug>.xml   Atom feed for a search keyword
        <root>/pdfs/<arxiv_id>.pdf         full text (``/`` in legacy ids -> ``_``)

    A missing feed or PDF yields HTTP 404. Any other URL raises ``OfflineMiss``.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        url = request.url
        if self.root is None:
            raise OfflineMiss(f"offline: no fixture for {url}")
        if url.path.endswith("/api/query"):
            query = urllib.parse.parse_qs(url.query.decode())
            term = query.get("search_query", [""])[0]
            m = re.fullmatch(r'all:"(.*)"', term)
            keyword = m.group(1) if m else term
            path = self.root / "feeds" / f"{keyword_slug(keyword)}.xml"
        elif "/pdf/" in url.path:
            ident = url.path.split("/pdf/", 1)[1]
            ident = re.sub(r"v\d+$", "", ident.removesuffix(".pdf"))
            path = self.root / "pdfs" / f"{ident.replace('/', '_')}.pdf"
        else:
            raise OfflineMiss(f"offline: no fixture route for {url}")
        if not path.is_file():
            return httpx.Response(404, request=request)
        return httpx.Response(200, content=path.read_bytes(), request=request)

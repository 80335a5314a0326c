"""Greedy BFS crawler with keyword gating and quality filters.

URLs pass a case-insensitive substring gate (at least one include
keyword, no exclude keyword, seeds exempt from the include rule) before
they ever enter the frontier; fetched pages are dropped from the output
when shorter than ``min_content_chars`` or carrying a banned title, but
their links are still expanded. Fetching is sequential, so BFS order is
(depth, discovery order) and per-host politeness holds trivially.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from urllib.parse import urldefrag, urljoin, urlsplit, urlunsplit
from urllib.robotparser import RobotFileParser
from html.parser import HTMLParser

import requests

from .errors import DataError
from .ingest import CATEGORIES, Document, make_document

_TEXT_TAGS = frozenset({"h2", "h3", "h4", "p", "div", "span", "article"})
_BLOCK_TAGS = frozenset({"h2", "h3", "h4", "p", "div", "article"})
_SKIP_TAGS = frozenset({"script", "style"})

DEFAULT_BANNED_TITLES = ("Page not found",)


@dataclass(frozen=True)
class CrawlSpec:
    seeds: tuple[str, ...]
    include_keywords: tuple[str, ...] = ()
    exclude_keywords: tuple[str, ...] = ()
    max_pages: int = 100
    max_depth: int = 3
    per_host_delay_ms: int = 0
    min_content_chars: int = 200
    banned_titles: tuple[str, ...] = DEFAULT_BANNED_TITLES
    category: str = "other"
    respect_robots: bool = True
    timeout: float = 20.0
    user_agent: str = "ragqa-crawler/0.1"

    def __post_init__(self) -> None:
        if not self.seeds:
            raise DataError("crawl spec needs at least one seed URL")
        if self.max_pages < 1:
            raise DataError("max_pages must be >= 1")
        if self.max_depth < 0:
            raise DataError("max_depth must be >= 0")
        if self.min_content_chars < 0:
            raise DataError("min_content_chars must be >= 0")
        if self.category not in CATEGORIES:
            raise DataError(f"unknown category {self.category!r}")


@dataclass
class CrawlReport:
    visited_count: int = 0
    emitted_count: int = 0
    skipped_short: int = 0
    skipped_banned_title: int = 0
    skipped_keyword: int = 0
    skipped_duplicate: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "visited_count": self.visited_count,
            "emitted_count": self.emitted_count,
            "skipped_short": self.skipped_short,
            "skipped_banned_title": self.skipped_banned_title,
            "skipped_keyword": self.skipped_keyword,
            "skipped_duplicate": self.skipped_duplicate,
            "errors": [list(e) for e in self.errors],
        }


def canonical_url(url: str) -> str:
    """Lowercase scheme/host, drop the fragment and any trailing slash."""
    parts = urlsplit(url)
    return urlunsplit(
        (parts.scheme.lower(), parts.netloc.lower(), parts.path.rstrip("/"), parts.query, "")
    )


def _gate(url: str, spec: CrawlSpec, visited: set[str]) -> str:
    """Classify a candidate URL: 'ok', 'duplicate' or 'keyword'."""
    if canonical_url(url) in visited:
        return "duplicate"
    lowered = url.lower()
    if any(kw.lower() in lowered for kw in spec.exclude_keywords):
        return "keyword"
    if canonical_url(url) in {canonical_url(s) for s in spec.seeds}:
        return "ok"
    if any(kw.lower() in lowered for kw in spec.include_keywords):
        return "ok"
    return "keyword"


def should_visit(url: str, spec: CrawlSpec, visited: set[str]) -> bool:
    """True iff the URL passes dedup and both keyword gates."""
    return _gate(url, spec, visited) == "ok"


class _PageParser(HTMLParser):
    """Event parser: text inside qualifying tags, emitted once per node."""

    def __init__(self, base_url: str):
        super().__init__(convert_charrefs=True)
        self.base_url = base_url
        self.pieces: list[str] = []
        self.links: list[str] = []
        self.title_parts: list[str] = []
        self._skip_depth = 0
        self._capture_depth = 0
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        if tag in _TEXT_TAGS:
            self._capture_depth += 1
        if tag in _BLOCK_TAGS or tag == "br":
            self.pieces.append("\n")
        if tag == "title":
            self._in_title = True
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.links.append(urljoin(self.base_url, value))

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS and self._skip_depth:
            self._skip_depth -= 1
        if tag in _TEXT_TAGS and self._capture_depth:
            self._capture_depth -= 1
        if tag in _BLOCK_TAGS:
            self.pieces.append("\n")
        if tag == "title":
            self._in_title = False

    def handle_data(self, data):
        if self._in_title:
            self.title_parts.append(data)
        elif self._skip_depth == 0 and self._capture_depth > 0:
            self.pieces.append(data)


def extract_text(html: bytes, base_url: str) -> tuple[str, str, list[str]]:
    """Best-effort extraction of (title, content, links) from a page.

    Content is the document-order text of h2/h3/h4/p/div/span/article
    elements, script/style excluded, block boundaries as newlines.
    """
    parser = _PageParser(base_url)
    parser.feed(html.decode("utf-8", errors="replace"))
    parser.close()
    lines = [" ".join(line.split()) for line in "".join(parser.pieces).split("\n")]
    content = "\n".join(line for line in lines if line)
    title = "".join(parser.title_parts).strip()
    return title, content, parser.links


class _RobotsCache:
    def __init__(self, user_agent: str, timeout: float, enabled: bool = True):
        self.user_agent = user_agent
        self.timeout = timeout
        self.enabled = enabled
        self._parsers: dict[str, RobotFileParser] = {}

    def allowed(self, url: str) -> bool:
        if not self.enabled:
            return True
        parts = urlsplit(url)
        root = f"{parts.scheme}://{parts.netloc}"
        parser = self._parsers.get(root)
        if parser is None:
            parser = RobotFileParser()
            parser.allow_all = True
            try:
                resp = requests.get(
                    f"{root}/robots.txt",
                    timeout=self.timeout,
                    headers={"User-Agent": self.user_agent},
                )
                if resp.status_code == 200:
                    parser.allow_all = False
                    parser.parse(resp.text.splitlines())
            except requests.RequestException:
                pass  # unreachable robots.txt: crawl permitted
            self._parsers[root] = parser
        return parser.can_fetch(self.user_agent, url)


def _polite_wait(url: str, last_fetch: dict[str, float], delay_ms: int) -> None:
    if delay_ms <= 0:
        return
    host = urlsplit(url).netloc.lower()
    now = time.monotonic()
    ready_at = last_fetch.get(host, 0.0) + delay_ms / 1000.0
    if ready_at > now:
        time.sleep(ready_at - now)
    last_fetch[host] = time.monotonic()


def crawl(spec: CrawlSpec) -> tuple[list[Document], CrawlReport]:
    """BFS from the seeds until max_pages or the frontier empties.

    The visited set is keyed by canonical URL and populated at enqueue
    time, so no URL is ever fetched twice. visited_count counts fetch
    attempts (HTTP failures included); robots-blocked URLs are recorded
    in the error list without being fetched.
    """
    report = CrawlReport()
    visited: set[str] = set()
    frontier: deque[tuple[str, int]] = deque()
    for seed in spec.seeds:
        verdict = _gate(seed, spec, visited)
        if verdict == "ok":
            visited.add(canonical_url(seed))
            frontier.append((urldefrag(seed)[0], 0))
        elif verdict == "duplicate":
            report.skipped_duplicate += 1
        else:
            report.skipped_keyword += 1

    robots = _RobotsCache(spec.user_agent, spec.timeout, enabled=spec.respect_robots)
    last_fetch: dict[str, float] = {}
    documents: list[Document] = []

    while frontier and report.visited_count < spec.max_pages:
        url, depth = frontier.popleft()
        if not robots.allowed(url):
            report.errors.append((url, "blocked by robots.txt"))
            continue
        _polite_wait(url, last_fetch, spec.per_host_delay_ms)
        report.visited_count += 1
        try:
            resp = requests.get(
                url, timeout=spec.timeout, headers={"User-Agent": spec.user_agent}
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            report.errors.append((url, str(exc)))
            continue
        content_type = resp.headers.get("Content-Type", "")
        if content_type and "html" not in content_type and "text" not in content_type:
            report.errors.append((url, f"unsupported content type {content_type!r}"))
            continue

        title, content, links = extract_text(resp.content, url)
        if title in spec.banned_titles:
            report.skipped_banned_title += 1
        elif not content or len(content) < spec.min_content_chars:
            report.skipped_short += 1
        else:
            documents.append(
                make_document(
                    source=url,
                    title=title,
                    content=content,
                    category=spec.category,
                    fetched_at=int(time.time()),
                )
            )
            report.emitted_count += 1

        if depth >= spec.max_depth:
            continue
        for link in links:
            if urlsplit(link).scheme not in ("http", "https"):
                continue  # off-scheme links dropped silently
            verdict = _gate(link, spec, visited)
            if verdict == "ok":
                visited.add(canonical_url(link))
                frontier.append((urldefrag(link)[0], depth + 1))
            elif verdict == "duplicate":
                report.skipped_duplicate += 1
            else:
                report.skipped_keyword += 1

    return documents, report

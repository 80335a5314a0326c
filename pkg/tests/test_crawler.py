from __future__ import annotations

import pytest

from ragqa.crawler import CrawlSpec, canonical_url, crawl, extract_text, should_visit
from ragqa.errors import DataError

LONG_BODY = "city festival history " * 20  # comfortably over 200 chars


def _page(title: str, body: str, links: tuple[str, ...] = ()) -> str:
    anchors = "".join(f'<a href="{href}">link</a>' for href in links)
    return (
        f"<html><head><title>{title}</title></head>"
        f"<body><p>{body}</p>{anchors}</body></html>"
    )


def _fixture_site(server) -> None:
    server.add_page(
        "/start",
        _page(
            "Start",
            LONG_BODY,
            (
                "/fixture-b",
                "/fixture-c",
                "/fixture-short",
                "/fixture-notfound",
                "/instagram-feed",
                "mailto:someone@example.com",
            ),
        ),
    )
    server.add_page(
        "/fixture-b", _page("B", LONG_BODY, ("/fixture-d", "/start", "/fixture-c"))
    )
    server.add_page("/fixture-c", _page("C", LONG_BODY))
    server.add_page("/fixture-d", _page("D", LONG_BODY))
    server.add_page("/fixture-short", _page("Short", "x" * 150))
    server.add_page("/fixture-notfound", _page("Page not found", LONG_BODY))
    server.add_page("/instagram-feed", _page("Feed", LONG_BODY))


def _spec(server, **kwargs) -> CrawlSpec:
    defaults = dict(
        seeds=(f"{server.base_url}/start",),
        include_keywords=("fixture",),
        exclude_keywords=("instagram",),
        max_pages=20,
        max_depth=3,
        min_content_chars=200,
    )
    defaults.update(kwargs)
    return CrawlSpec(**defaults)


class TestCanonicalUrl:
    def test_lowercases_scheme_and_host(self):
        assert canonical_url("HTTP://Example.COM/Path") == "http://example.com/Path"

    def test_strips_fragment_and_trailing_slash(self):
        assert canonical_url("http://a.com/x/#frag") == "http://a.com/x"
        assert canonical_url("http://a.com/x") == canonical_url("http://a.com/x/")


class TestShouldVisit:
    SPEC = CrawlSpec(
        seeds=("http://site.test/",),
        include_keywords=("picklesburgh",),
        exclude_keywords=("instagram",),
    )

    def test_include_keyword_admits(self):
        assert should_visit("http://site.test/picklesburgh-2024", self.SPEC, set())

    def test_exclude_keyword_rejects(self):
        spec = CrawlSpec(
            seeds=("http://site.test/",),
            include_keywords=("picklesburgh", "instagram"),
            exclude_keywords=("instagram",),
        )
        assert not should_visit("http://site.test/instagram-picklesburgh", spec, set())

    def test_visited_rejects(self):
        url = "http://site.test/picklesburgh"
        assert not should_visit(url, self.SPEC, {canonical_url(url)})

    def test_seed_exempt_from_include_gate(self):
        assert should_visit("http://site.test/", self.SPEC, set())

    def test_non_seed_without_include_rejected(self):
        assert not should_visit("http://site.test/other-page", self.SPEC, set())

    def test_matching_is_case_insensitive(self):
        assert should_visit("http://site.test/PICKLESBURGH", self.SPEC, set())


class TestExtractText:
    def test_paragraph(self):
        title, content, links = extract_text(b"<p>hello</p>", "http://x.test/")
        assert (title, content, links) == ("", "hello", [])

    def test_script_excluded_blocks_newline_separated(self):
        _, content, _ = extract_text(
            b"<div><p>a</p><script>x()</script><p>b</p></div>", "http://x.test/"
        )
        assert content == "a\nb"

    def test_style_excluded(self):
        _, content, _ = extract_text(
            b"<div>keep<style>p{color:red}</style></div>", "http://x.test/"
        )
        assert content == "keep"

    def test_nested_qualifying_text_emitted_once(self):
        _, content, _ = extract_text(
            b"<div>outer <span>inner</span> tail</div>", "http://x.test/"
        )
        assert content == "outer inner tail"

    def test_heading_tags_captured(self):
        _, content, _ = extract_text(
            b"<h2>Head</h2><article>Body text</article>", "http://x.test/"
        )
        assert content == "Head\nBody text"

    def test_title_extracted_and_trimmed(self):
        title, _, _ = extract_text(
            b"<head><title> Page not found </title></head><body><p>x</p></body>",
            "http://x.test/",
        )
        assert title == "Page not found"

    def test_links_absolutized(self):
        _, _, links = extract_text(
            b'<p><a href="/rel">r</a><a href="http://other.test/abs">a</a></p>',
            "http://x.test/dir/",
        )
        assert links == ["http://x.test/rel", "http://other.test/abs"]

    def test_entities_decoded(self):
        _, content, _ = extract_text(b"<p>fish &amp; chips</p>", "http://x.test/")
        assert content == "fish & chips"

    def test_malformed_html_never_raises(self):
        _, content, _ = extract_text(b"<div><p>ok<<</div >>", "http://x.test/")
        assert "ok" in content


class TestCrawl:
    def test_bfs_emission_order_and_filters(self, http_server):
        _fixture_site(http_server)
        documents, report = crawl(_spec(http_server))

        paths = [doc.source.rsplit("/", 1)[-1] for doc in documents]
        assert paths == ["start", "fixture-b", "fixture-c", "fixture-d"]

        assert report.emitted_count == 4
        assert report.visited_count == 6
        assert report.skipped_short == 1
        assert report.skipped_banned_title == 1
        assert report.skipped_keyword == 1  # instagram link; mailto dropped silently
        assert report.skipped_duplicate == 2  # /start and /fixture-c seen again from b
        assert report.errors == []

        fetched = http_server.crawl_paths()
        assert len(fetched) == len(set(fetched))  # no URL fetched twice

        assert all(doc.category == "other" for doc in documents)
        assert all(doc.fetched_at > 0 for doc in documents)
        assert documents[0].title == "Start"

    def test_max_pages_budget(self, http_server):
        _fixture_site(http_server)
        documents, report = crawl(_spec(http_server, max_pages=1))
        assert report.visited_count == 1
        assert [d.source.rsplit("/", 1)[-1] for d in documents] == ["start"]
        assert http_server.crawl_paths() == ["/start"]

    def test_max_depth_zero_fetches_only_seeds(self, http_server):
        _fixture_site(http_server)
        _, report = crawl(_spec(http_server, max_depth=0))
        assert report.visited_count == 1
        assert http_server.crawl_paths() == ["/start"]

    def test_http_error_recorded_and_crawl_continues(self, http_server):
        _fixture_site(http_server)
        http_server.add_page("/fixture-b", "boom", status=500)
        documents, report = crawl(_spec(http_server))
        assert any("fixture-b" in url for url, _ in report.errors)
        paths = [doc.source.rsplit("/", 1)[-1] for doc in documents]
        assert paths == ["start", "fixture-c"]  # d is unreachable without b

    def test_robots_disallow_blocks_without_fetch(self, http_server):
        _fixture_site(http_server)
        http_server.add_text("/robots.txt", "User-agent: *\nDisallow: /fixture-d\n")
        _, report = crawl(_spec(http_server))
        assert "/fixture-d" not in http_server.crawl_paths()
        assert any(reason == "blocked by robots.txt" for _, reason in report.errors)

    def test_no_robots_override(self, http_server):
        _fixture_site(http_server)
        http_server.add_text("/robots.txt", "User-agent: *\nDisallow: /fixture-d\n")
        _, report = crawl(_spec(http_server, respect_robots=False))
        assert "/fixture-d" in http_server.crawl_paths()

    def test_depths_nondecreasing(self, http_server):
        _fixture_site(http_server)
        crawl(_spec(http_server))
        order = http_server.crawl_paths()
        depth = {"/start": 0}
        for path in ("/fixture-b", "/fixture-c", "/fixture-short", "/fixture-notfound"):
            depth[path] = 1
        depth["/fixture-d"] = 2
        depths = [depth[p] for p in order]
        assert depths == sorted(depths)

    def test_non_html_content_type_skipped_with_reason(self, http_server):
        _fixture_site(http_server)
        http_server.add_page(
            "/start",
            _page("Start", LONG_BODY, ("/fixture-b", "/fixture-report.pdf")),
        )
        http_server.add_raw(
            "/fixture-report.pdf", b"%PDF-1.4 garbage", "application/pdf"
        )
        documents, report = crawl(_spec(http_server))
        assert all("report.pdf" not in d.source for d in documents)
        assert any("unsupported content type" in reason for _, reason in report.errors)

    def test_empty_seeds_rejected(self):
        with pytest.raises(DataError):
            CrawlSpec(seeds=())

    def test_invalid_category_rejected(self):
        with pytest.raises(DataError):
            CrawlSpec(seeds=("http://a",), category="bogus")

"""Shared fixtures: canned HTTP exchanges, fake transports, stub LLM tables."""

from __future__ import annotations

import json
import time
from pathlib import Path

import pytest

from litmetrics.retrieval import (
    ARXIV_API_URL,
    S2_API_URL,
    S2_PAGE_SIZE,
    FixtureTransport,
    TransportResponse,
    request_key,
)

# ---------------------------------------------------------------------------
# canned exchange builders
# ---------------------------------------------------------------------------


def atom_feed(entries: list[dict]) -> str:
    """Minimal arXiv Atom feed body."""
    parts = ['<?xml version="1.0" encoding="UTF-8"?>']
    parts.append('<feed xmlns="http://www.w3.org/2005/Atom">')
    for e in entries:
        authors = "".join(
            f"<author><name>{name}</name></author>" for name in e.get("authors", ["A. Author"])
        )
        parts.append(
            "<entry>"
            f"<id>http://arxiv.org/abs/{e['arxiv_id']}</id>"
            f"<title>{e['title']}</title>"
            f"<summary>{e['abstract']}</summary>"
            f"<published>{e['published']}T00:00:00Z</published>"
            f"{authors}"
            "</entry>"
        )
    parts.append("</feed>")
    return "".join(parts)


def arxiv_exchange(query: str, limit: int, entries: list[dict]) -> dict:
    return {
        "request": {
            "method": "GET",
            "url": ARXIV_API_URL,
            "params": {
                "search_query": query,
                "start": "0",
                "max_results": str(limit),
                "sortBy": "relevance",
            },
        },
        "response": {"status": 200, "body": atom_feed(entries)},
    }


def s2_search_exchange(
    query: str,
    fields: str,
    data: list[dict],
    offset: int = 0,
    limit: int = S2_PAGE_SIZE,
    extra: dict | None = None,
    next_offset: int | None = None,
) -> dict:
    params = {
        "query": query,
        "offset": str(offset),
        "limit": str(limit),
        "fields": fields,
    }
    if extra:
        params.update({k: str(v) for k, v in extra.items()})
    body = {"total": len(data), "offset": offset, "data": data}
    if next_offset is not None:
        body["next"] = next_offset
    return {
        "request": {"method": "GET", "url": f"{S2_API_URL}/paper/search", "params": params},
        "response": {"status": 200, "body": json.dumps(body)},
    }


def s2_citations_exchange(
    paper_id: str, citing_dates: list[str | None], offset: int = 0
) -> dict:
    data = [{"citingPaper": {"publicationDate": d}} for d in citing_dates]
    return {
        "request": {
            "method": "GET",
            "url": f"{S2_API_URL}/paper/{paper_id}/citations",
            "params": {
                "fields": "publicationDate",
                "offset": str(offset),
                "limit": str(S2_PAGE_SIZE),
            },
        },
        "response": {"status": 200, "body": json.dumps({"offset": offset, "data": data})},
    }


def s2_paper_exchange(paper_id: str, paper: dict, fields: str | None = None) -> dict:
    from litmetrics.retrieval import S2_PAPER_FIELDS

    return {
        "request": {
            "method": "GET",
            "url": f"{S2_API_URL}/paper/{paper_id}",
            "params": {"fields": fields or S2_PAPER_FIELDS},
        },
        "response": {"status": 200, "body": json.dumps(paper)},
    }


def s2_references_exchange(paper_id: str, refs: list[dict], offset: int = 0) -> dict:
    data = [{"citedPaper": r} for r in refs]
    return {
        "request": {
            "method": "GET",
            "url": f"{S2_API_URL}/paper/{paper_id}/references",
            "params": {
                "fields": "paperId,externalIds,title,publicationDate,citationCount",
                "offset": str(offset),
                "limit": str(S2_PAGE_SIZE),
            },
        },
        "response": {"status": 200, "body": json.dumps({"offset": offset, "data": data})},
    }


def write_fixture_dir(path: Path, exchanges: list[dict], name: str = "recorded.ndjson") -> Path:
    path.mkdir(parents=True, exist_ok=True)
    with open(path / name, "w", encoding="utf-8") as fh:
        for pair in exchanges:
            fh.write(json.dumps(pair, ensure_ascii=False) + "\n")
    return path


# ---------------------------------------------------------------------------
# counting transports
# ---------------------------------------------------------------------------


class CountingTransport:
    """Delegates to an inner transport while recording timestamps and keys."""

    def __init__(self, inner):
        self.inner = inner
        self.calls: list[tuple[float, str]] = []

    @property
    def count(self) -> int:
        return len(self.calls)

    def request(self, method, url, params, headers, body=None):
        self.calls.append((time.monotonic(), request_key(method, url, params, body)))
        return self.inner.request(method, url, params, headers, body)


class FlakyTransport:
    """Fails a fixed number of times before delegating; used for retry tests."""

    def __init__(self, inner, failures: int = 0, status: int | None = None):
        from litmetrics.errors import NetworkError

        self.inner = inner
        self.failures = failures
        self.status = status
        self.attempts = 0
        self._error_cls = NetworkError

    def request(self, method, url, params, headers, body=None):
        self.attempts += 1
        if self.attempts <= self.failures:
            if self.status is not None:
                return TransportResponse(status=self.status, body="")
            raise self._error_cls("synthetic connection failure")
        return self.inner.request(method, url, params, headers, body)


@pytest.fixture
def fixture_transport_factory(tmp_path):
    """Build a FixtureTransport from a list of canned exchanges."""

    def build(exchanges: list[dict]) -> FixtureTransport:
        d = write_fixture_dir(tmp_path / "transport", exchanges)
        return FixtureTransport(d)

    return build

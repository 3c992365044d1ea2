"""External evidence for fact checking: web search hits and encyclopedia summaries.

Two backend families exist for each evidence kind: a live HTTP backend and a
fixture backend reading canned results from a directory. Fixtures are the
first-class path for tests and offline runs; a query maps to a file named
after its normalized form.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import quote

import requests

from .errors import AllQueriesFailedError

log = logging.getLogger(__name__)


class ClueSource(str, Enum):
    SEARCH = "search"
    ENCYCLOPEDIA = "encyclopedia"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class Clue:
    """One piece of retrieved evidence with its provenance."""

    source: ClueSource
    query: str
    title: str
    snippet: str
    url: str | None = None

    def __post_init__(self):
        if not self.snippet.strip():
            raise ValueError("clue snippet must be non-empty")

    @property
    def chars(self) -> int:
        return len(self.title) + len(self.snippet)


@dataclass(frozen=True)
class EvidenceSet:
    """Deduplicated clues for one news item; total_chars is derived."""

    item_id: str
    clues: tuple[Clue, ...] = ()
    total_chars: int = field(init=False, default=0)

    def __post_init__(self):
        unique: list[Clue] = []
        seen: set[tuple[str, str]] = set()
        for clue in self.clues:
            key = (clue.title, clue.snippet)
            if key not in seen:
                seen.add(key)
                unique.append(clue)
        object.__setattr__(self, "clues", tuple(unique))
        object.__setattr__(self, "total_chars", sum(c.chars for c in unique))


@dataclass(frozen=True)
class EvidenceConfig:
    results_per_query: int = 3
    max_encyclopedia: int = 2
    char_budget: int = 6000
    max_content_entities: int = 5

    def __post_init__(self):
        if self.results_per_query < 0 or self.max_encyclopedia < 0:
            raise ValueError("result caps must be non-negative")
        if self.char_budget <= 0:
            raise ValueError("char_budget must be positive")


def normalize_query(query: str) -> str:
    """Filesystem-safe fixture name: casefold, non-alphanumerics to underscores."""
    slug = re.sub(r"[^0-9a-z一-鿿]+", "_", query.strip().casefold()).strip("_")
    return slug[:100] or "empty"


# ---------------------------------------------------------------- backends


class SearchBackend:
    source = ClueSource.SEARCH

    def search(self, query: str) -> list[dict]:
        """Return hit dicts {"title", "snippet", "url"}; raise on transport failure."""
        raise NotImplementedError


class EncyclopediaBackend:
    source = ClueSource.ENCYCLOPEDIA

    def summary(self, title: str) -> dict | None:
        """Return {"title", "summary"} or None when there is no entry."""
        raise NotImplementedError


class FixtureSearchBackend(SearchBackend):
    """Reads hits from ``<dir>/<normalized query>.json`` (a JSON array)."""

    source = ClueSource.FIXTURE

    def __init__(self, directory: str | os.PathLike):
        self.directory = str(directory)

    def search(self, query: str) -> list[dict]:
        path = os.path.join(self.directory, normalize_query(query) + ".json")
        if not os.path.exists(path):
            return []
        with open(path, encoding="utf-8") as fh:
            hits = json.load(fh)
        if not isinstance(hits, list):
            raise ValueError(f"{path}: expected a JSON array of hits")
        return hits


class FixtureEncyclopediaBackend(EncyclopediaBackend):
    """Reads summaries from ``<dir>/<normalized title>.json``."""

    source = ClueSource.FIXTURE

    def __init__(self, directory: str | os.PathLike):
        self.directory = str(directory)

    def summary(self, title: str) -> dict | None:
        path = os.path.join(self.directory, normalize_query(title) + ".json")
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            entry = json.load(fh)
        return {"title": entry.get("title", title), "summary": entry["summary"]}


class HTTPSearchBackend(SearchBackend):
    """GET ``{endpoint}?q=<query>`` expecting ``{"results": [{title, snippet, url}]}``."""

    def __init__(self, endpoint: str, credential_env: str = "", timeout: float = 20.0):
        self.endpoint = endpoint
        self.credential_env = credential_env
        self.timeout = timeout

    def search(self, query: str) -> list[dict]:
        headers = {}
        if self.credential_env:
            token = os.environ.get(self.credential_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        resp = requests.get(self.endpoint, params={"q": query}, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        return resp.json().get("results", [])


class HTTPEncyclopediaBackend(EncyclopediaBackend):
    """GET ``{base}/{title}`` against a page-summary REST endpoint."""

    def __init__(self, base_url: str, timeout: float = 20.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def summary(self, title: str) -> dict | None:
        resp = requests.get(f"{self.base_url}/{quote(title)}", timeout=self.timeout)
        if resp.status_code == 404:
            return None
        resp.raise_for_status()
        body = resp.json()
        text = body.get("extract") or body.get("summary")
        if not text:
            return None
        return {"title": body.get("title", title), "summary": text}


@dataclass
class Retriever:
    """Bundle of the two evidence backends; either side may be absent."""

    search_backend: SearchBackend | None = None
    encyclopedia_backend: EncyclopediaBackend | None = None

    @classmethod
    def from_fixtures(cls, search_dir: str | None, wiki_dir: str | None) -> "Retriever":
        return cls(
            search_backend=FixtureSearchBackend(search_dir) if search_dir else None,
            encyclopedia_backend=FixtureEncyclopediaBackend(wiki_dir) if wiki_dir else None,
        )


# ---------------------------------------------------------------- operations


def search(queries: list[str], backend: SearchBackend, per_query: int = 3) -> list[Clue]:
    """Run every query, keeping at most per_query hits each, in query order.

    A failing query is logged and contributes nothing; only when every query
    raises is AllQueriesFailedError raised. No queries at all is an empty result.
    """
    clues: list[Clue] = []
    failures = 0
    for query in queries:
        try:
            hits = backend.search(query)
        except Exception as exc:
            failures += 1
            log.warning("search failed for %r: %s", query, exc)
            continue
        for hit in hits[:per_query]:
            snippet = str(hit.get("snippet", "")).strip()
            if not snippet:
                continue
            clues.append(
                Clue(
                    source=backend.source,
                    query=query,
                    title=str(hit.get("title", "")),
                    snippet=snippet,
                    url=hit.get("url"),
                )
            )
    if queries and failures == len(queries):
        raise AllQueriesFailedError(f"all {failures} search queries failed")
    return clues


_CAP_SPAN = re.compile(r"\b[A-Z][\w'-]*(?:[ ]+[A-Z][\w'-]*)+")
_CAP_WORD = re.compile(r"\b[A-Z][\w'-]*\b")
_QUESTION_WORDS = {
    "a", "an", "are", "can", "could", "did", "do", "does", "has", "have", "how",
    "if", "is", "it", "the", "this", "was", "were", "what", "when", "where",
    "which", "who", "why", "will", "would", "yes", "no",
}


def _trim_span(span: str) -> str:
    """Drop sentence/question openers that capitalization glued onto an entity."""
    words = span.split()
    while words and words[0].casefold() in _QUESTION_WORDS:
        words.pop(0)
    return " ".join(words)


def lookup_titles(questions: list[str], content: str, cap: int = 5) -> list[str]:
    """Pick encyclopedia lookup titles.

    Capitalized spans in the fact questions come first (single words allowed,
    question-opener words dropped); when the questions yield nothing, fall back
    to the first `cap` capitalized multiword spans of the news content.
    """
    titles: list[str] = []
    seen: set[str] = set()

    def add(span: str) -> None:
        key = span.casefold()
        if span and key not in seen and key not in _QUESTION_WORDS:
            seen.add(key)
            titles.append(span)

    for question in questions:
        for match in _CAP_SPAN.finditer(question):
            add(_trim_span(match.group()))
        for match in _CAP_WORD.finditer(question):
            if not any(match.group().casefold() in t.casefold() for t in titles):
                add(match.group())
    if titles:
        return titles
    for match in _CAP_SPAN.finditer(content):
        span = _trim_span(match.group())
        if " " in span:
            add(span)
        if len(titles) >= cap:
            break
    return titles[:cap]


def encyclopedia_lookup(
    titles: list[str], backend: EncyclopediaBackend, max_entries: int = 2
) -> list[Clue]:
    """Fetch summaries for the first titles that resolve, up to max_entries."""
    clues: list[Clue] = []
    for title in titles:
        if len(clues) >= max_entries:
            break
        try:
            entry = backend.summary(title)
        except Exception as exc:
            log.warning("encyclopedia lookup failed for %r: %s", title, exc)
            continue
        if entry is None:
            continue
        summary = str(entry["summary"]).strip()
        if not summary:
            continue
        clues.append(Clue(source=backend.source, query=title, title=str(entry["title"]), snippet=summary))
    return clues


def assemble(
    item_id: str,
    encyclopedia_clues: list[Clue],
    search_clues: list[Clue],
    char_budget: int = 6000,
) -> EvidenceSet:
    """Order encyclopedia entries first, dedupe, and cut on clue boundaries.

    A clue that would push the running total past char_budget is dropped along
    with everything after it, so no clue is ever truncated mid-snippet.
    """
    candidate = EvidenceSet(item_id=item_id, clues=tuple(encyclopedia_clues) + tuple(search_clues))
    kept: list[Clue] = []
    total = 0
    for clue in candidate.clues:
        if total + clue.chars > char_budget:
            break
        kept.append(clue)
        total += clue.chars
    if len(kept) < len(candidate.clues):
        log.warning(
            "evidence for %s trimmed to %d of %d clues (budget %d chars)",
            item_id, len(kept), len(candidate.clues), char_budget,
        )
    return EvidenceSet(item_id=item_id, clues=tuple(kept))


NO_EVIDENCE_MARKER = "No external evidence found."


def render_evidence(evidence: EvidenceSet) -> str:
    """Serialize clues for a prompt, each line carrying its source attribution."""
    if not evidence.clues:
        return NO_EVIDENCE_MARKER
    lines = []
    for i, clue in enumerate(evidence.clues, 1):
        suffix = f" ({clue.url})" if clue.url else ""
        lines.append(f"{i}. [{clue.source.value}] {clue.title}: {clue.snippet}{suffix}")
    return "\n".join(lines)


def gather_evidence(
    item_id: str,
    content: str,
    questions: list[str],
    retriever: Retriever,
    config: EvidenceConfig = EvidenceConfig(),
) -> EvidenceSet:
    """Full evidence pass for one item: encyclopedia summaries, then search hits."""
    encyclopedia_clues: list[Clue] = []
    if retriever.encyclopedia_backend is not None:
        titles = lookup_titles(questions, content, cap=config.max_content_entities)
        encyclopedia_clues = encyclopedia_lookup(
            titles, retriever.encyclopedia_backend, max_entries=config.max_encyclopedia
        )
    search_clues: list[Clue] = []
    if retriever.search_backend is not None and questions:
        try:
            search_clues = search(questions, retriever.search_backend, per_query=config.results_per_query)
        except AllQueriesFailedError:
            log.warning("search unavailable for %s; continuing with encyclopedia evidence only", item_id)
    return assemble(item_id, encyclopedia_clues, search_clues, char_budget=config.char_budget)

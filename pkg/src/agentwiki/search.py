"""Lexical, field-weighted search over a snapshot.

Scoring is deliberately simple and auditable: tokens are case-folded and
split on non-alphanumeric characters, and each query token occurrence adds a
fixed weight per field it appears in (name 8, alias 6, tag 4, summary 2,
content 1) -- presence only, no tf-idf, no stemming. The query-time agent
compensates for imperfect ranking by reading and re-searching.

Knowledge pages and source digests are indexed; directory indices are not
(they are reached through ``wiki_read``), and neither are full articles.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import DIGESTS_DIR, SlugPath, WikiSnapshot

FIELD_WEIGHTS = {"name": 8, "alias": 6, "tag": 4, "summary": 2, "content": 1}
FIELDS = tuple(FIELD_WEIGHTS)

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(text.casefold()) if t]


@dataclass(frozen=True)
class DocMeta:
    title: str
    aliases: tuple[str, ...]
    tags: tuple[str, ...]
    summary: str
    content: str


@dataclass(frozen=True)
class SearchIndex:
    postings: dict[str, dict[str, frozenset[SlugPath]]]
    meta: dict[SlugPath, DocMeta]
    revision: int


@dataclass(frozen=True)
class SearchHit:
    path: SlugPath
    score: int
    matched_fields: frozenset[str]
    snippet: str
    title: str
    aliases: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    summary: str = ""


def doc_fields(snapshot: WikiSnapshot) -> dict[SlugPath, dict[str, str]]:
    """Raw field text per indexed document; shared with the brute-force oracle
    used in tests so both sides score the same surface."""
    docs: dict[SlugPath, dict[str, str]] = {}
    for path, page in snapshot.pages.items():
        content_bits = list(page.key_facts)
        content_bits += [e.note for e in page.related_pages]
        content_bits += [e.note for e in page.related_sources]
        docs[path] = {
            "name": f"{page.title} {path.slug}",
            "alias": " ".join(page.frontmatter.aliases),
            "tag": " ".join(page.frontmatter.tags),
            "summary": page.summary,
            "content": " ".join(content_bits),
        }
    for path, record in snapshot.sources.items():
        if record.kind != "digest":
            continue
        docs[path] = {
            "name": path.slug,
            "alias": "",
            "tag": "",
            "summary": "",
            "content": record.text,
        }
    return docs


def build_index(snapshot: WikiSnapshot) -> SearchIndex:
    """Deterministic for a given snapshot; rebuilt whole per revision."""
    postings: dict[str, dict[str, set[SlugPath]]] = {f: {} for f in FIELDS}
    meta: dict[SlugPath, DocMeta] = {}

    for path in sorted(snapshot.pages):
        page = snapshot.pages[path]
        meta[path] = DocMeta(
            title=page.title,
            aliases=page.frontmatter.aliases,
            tags=page.frontmatter.tags,
            summary=page.summary,
            content=" ".join(page.key_facts),
        )
    for path in sorted(snapshot.sources):
        record = snapshot.sources[path]
        if record.kind == "digest":
            meta[path] = DocMeta(
                title=path.slug, aliases=(), tags=(), summary="", content=record.text
            )

    for path, fields_text in doc_fields(snapshot).items():
        for field_name, text in fields_text.items():
            for token in set(tokenize(text)):
                postings[field_name].setdefault(token, set()).add(path)

    frozen = {
        f: {tok: frozenset(paths) for tok, paths in field_map.items()}
        for f, field_map in postings.items()
    }
    return SearchIndex(postings=frozen, meta=meta, revision=snapshot.revision)


def search(index: SearchIndex, query: str, limit: int = 10) -> list[SearchHit]:
    """Top hits for the query, sorted by (score desc, path asc).

    Each query token occurrence contributes independently, so a token repeated
    in the query counts repeatedly; an empty query returns no hits.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    tokens = tokenize(query)
    if not tokens:
        return []

    scores: dict[SlugPath, int] = {}
    matched: dict[SlugPath, set[str]] = {}
    for token in tokens:
        for field_name in FIELDS:
            for path in index.postings[field_name].get(token, ()):
                scores[path] = scores.get(path, 0) + FIELD_WEIGHTS[field_name]
                matched.setdefault(path, set()).add(field_name)

    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    hits: list[SearchHit] = []
    for path, score in ranked[:limit]:
        doc = index.meta[path]
        snippet = doc.summary or doc.content[:160]
        hits.append(
            SearchHit(
                path=path,
                score=score,
                matched_fields=frozenset(matched[path]),
                snippet=snippet,
                title=doc.title,
                aliases=doc.aliases,
                tags=doc.tags,
                summary=doc.summary,
            )
        )
    return hits

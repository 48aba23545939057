"""The index-time compilation loop.

Each passage is folded into the wiki in one pass: select relevant existing
pages, ask the port for full-file updates (with the ledger's open constraint
rules injected into the prompt), validate structurally and content-wise,
record findings in the error book, auto-fix what code can fix, and apply.
Every ``N`` articles (and every ``revalidate_every_batches`` batches) the
LLM periodic fix and a verify-and-close pass run as maintenance.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .codec import (
    FrontmatterError,
    parse_global_index,
    parse_index,
    parse_page,
    render_global_index,
    render_index,
    render_page,
)
from .errorbook import ErrorBook, active_constraints, record_errors, verify_and_close
from .llm import LlmPort
from .model import (
    ARTICLES_DIR,
    DIGESTS_DIR,
    GlobalIndex,
    Passage,
    SlugPath,
    SourceRecord,
    UpdateSet,
    WikiSnapshot,
    slugify,
    try_parse_path,
)
from .repair import code_auto_fix, finalize, llm_periodic_fix, parse_file_blocks
from .search import SearchIndex, build_index
from .snapshot import apply_updates, UpdateError
from .validation import ContentSamplingConfig, validate_content, validate_structural

log = logging.getLogger(__name__)

Batch = list[Passage]


class CorpusError(ValueError):
    """The corpus file is malformed (bad JSON line or duplicate id)."""


class MalformedLlmOutput(RuntimeError):
    """The compile reply held no usable file blocks, even after a retry."""


@dataclass(frozen=True)
class CompilerConfig:
    k: int = 5
    batch_size: int = 5
    periodic_fix_every_n_articles: int = 25
    revalidate_every_batches: int = 10
    constraint_cap: int = 30
    compile_retry: int = 1
    index_digest_budget: int = 32_000
    sampling: ContentSamplingConfig = ContentSamplingConfig()

    def __post_init__(self) -> None:
        for name in (
            "k",
            "batch_size",
            "periodic_fix_every_n_articles",
            "revalidate_every_batches",
            "constraint_cap",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class CompileState:
    snapshot: WikiSnapshot
    book: ErrorBook
    index: SearchIndex
    articles_since_fix: int = 0
    batches_done: int = 0

    @classmethod
    def fresh(cls, snapshot: WikiSnapshot | None = None, book: ErrorBook | None = None):
        snapshot = snapshot or WikiSnapshot()
        return cls(snapshot=snapshot, book=book or ErrorBook(), index=build_index(snapshot))


def ingest_corpus(path: Path | str, batch_size: int) -> list[Batch]:
    """Read a line-delimited JSON corpus ({id, title, text} per line) into
    batches, preserving order. Malformed lines and duplicate ids are fatal."""
    passages: list[Passage] = []
    seen: set[str] = set()
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            passage = Passage(
                source_id=str(raw["id"]), title=str(raw["title"]), text=str(raw["text"])
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"line {lineno}: {exc}") from exc
        if passage.source_id in seen:
            raise CorpusError(f"line {lineno}: duplicate id {passage.source_id!r}")
        seen.add(passage.source_id)
        passages.append(passage)
    return [passages[i : i + batch_size] for i in range(0, len(passages), batch_size)]


# ---------------------------------------------------------------------------
# per-passage steps

_PATH_TOKEN_RE = re.compile(r"[A-Za-z0-9_/-]+/[A-Za-z0-9._-]+")


def _index_digest(snapshot: WikiSnapshot, budget: int) -> str:
    """Serialized directory indices for the selection prompt; falls back to
    entry lines only when the full form exceeds the size budget."""
    full = "\n".join(
        f"### {d}/_index.md\n{render_index(snapshot.indices[d])}"
        for d in sorted(snapshot.indices)
    )
    if len(full) <= budget:
        return full
    lines = []
    for d in sorted(snapshot.indices):
        lines.append(f"### {d}/_index.md")
        for section in snapshot.indices[d].sections:
            for entry in section.entries:
                lines.append(f"- [[{entry.link}]]")
    return "\n".join(lines)


def select_pages(
    passage: Passage, state: CompileState, llm: LlmPort, config: CompilerConfig
) -> list[SlugPath]:
    """Ask the port which existing pages the passage touches; keep at most k
    that really exist. An empty wiki short-circuits to no selection."""
    if not state.snapshot.pages:
        return []
    reply = llm.complete(
        prompts.select_pages(
            render_global_index(state.snapshot.global_index),
            _index_digest(state.snapshot, config.index_digest_budget),
            f"{passage.title}\n{passage.text}",
        )
    )
    out: list[SlugPath] = []
    for token in _PATH_TOKEN_RE.findall(reply):
        path = try_parse_path(token.removesuffix(".md"))
        if path is not None and path in state.snapshot.pages and path not in out:
            out.append(path)
        if len(out) == config.k:
            break
    if not out:
        log.info("selection for %s produced no valid existing paths", passage.source_id)
    return out


def _digest_slug(passage: Passage, snapshot: WikiSnapshot) -> str:
    base = slugify(passage.title or passage.source_id).lower()
    path = SlugPath(DIGESTS_DIR, base)
    existing = snapshot.sources.get(path)
    if existing is not None and existing.source_id != passage.source_id:
        return f"{base}-{slugify(passage.source_id).lower()}"
    return base


_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


def _fallback_digest(text: str) -> str:
    sentences = _SENTENCE_RE.split(text.strip())
    return " ".join(sentences[:3]).strip()


def compile_wiki_pages(
    passage: Passage,
    selected_texts: list[tuple[str, str]],
    constraints: list[str],
    llm: LlmPort,
    config: CompilerConfig,
    digest_slug: str,
) -> UpdateSet:
    """One compile call: parse the reply's file blocks into an update set and
    append the passage's digest and verbatim article records.

    A reply with no usable blocks is retried once, then raises
    MalformedLlmOutput and the passage is skipped by the caller.
    """
    updates: UpdateSet | None = None
    for attempt in range(config.compile_retry + 1):
        reply = llm.complete(
            prompts.compile_updates(
                passage.title, passage.text, digest_slug, selected_texts, constraints
            )
        )
        updates = _parse_compile_reply(reply)
        if updates is not None:
            break
        log.warning(
            "compile reply for %s unusable (attempt %d)", passage.source_id, attempt + 1
        )
    if updates is None:
        raise MalformedLlmOutput(f"no usable file blocks for passage {passage.source_id}")

    digest_text = llm.complete(prompts.digest_passage(passage.title, passage.text)).strip()
    if not digest_text:
        digest_text = _fallback_digest(passage.text)
    written = {t for t in updates.touched()}
    digest_path = SlugPath(DIGESTS_DIR, digest_slug)
    if digest_path.render() not in written:
        updates.source_writes.append(
            SourceRecord("digest", digest_path, passage.source_id, digest_text)
        )
    article_path = SlugPath(ARTICLES_DIR, digest_slug)
    if article_path.render() not in written:
        updates.source_writes.append(
            SourceRecord("article", article_path, passage.source_id, passage.text)
        )
    return updates


def _parse_compile_reply(reply: str) -> UpdateSet | None:
    blocks = parse_file_blocks(reply)
    if not blocks:
        return None
    updates = UpdateSet()
    usable = 0
    for raw_path, content in blocks:
        name = raw_path.strip()
        try:
            if name == "index.md":
                updates.global_edit = parse_global_index(content)
                usable += 1
            elif name.endswith("/_index.md"):
                directory = name.removesuffix("/_index.md")
                updates.index_edits.append((directory, parse_index(content, directory)))
                usable += 1
            elif name.startswith(("sources/digests/", "sources/articles/")):
                path = SlugPath.parse(name.removesuffix(".md"))
                kind = "digest" if path.directory == DIGESTS_DIR else "article"
                updates.source_writes.append(
                    SourceRecord(kind, path, path.slug, content.strip("\n"))
                )
                usable += 1
            else:
                path = try_parse_path(name.removesuffix(".md"))
                if path is None:
                    log.warning("compile block has unusable path %r", name)
                    continue
                updates.page_writes.append((path, parse_page(content, path)))
                usable += 1
        except (FrontmatterError, ValueError) as exc:
            log.warning("compile block %r dropped: %s", name, exc)
    return updates if usable else None


def compile_batch(
    state: CompileState,
    batch: Batch,
    llm: LlmPort,
    config: CompilerConfig = CompilerConfig(),
    log_event=None,
) -> CompileState:
    """Run the per-passage loop over one batch, then periodic maintenance.

    Per-passage failures are logged and skipped; the state always advances.
    The search index is rebuilt to the new snapshot revision before returning.
    """
    batch_no = state.batches_done + 1
    for passage in batch:
        event = {"event": "passage", "id": passage.source_id, "batch": batch_no}
        try:
            selected = select_pages(passage, state, llm, config)
            constraints = active_constraints(state.book, config.constraint_cap)
            selected_texts = [
                (str(p), render_page(state.snapshot.pages[p])) for p in selected
            ]
            digest_slug = _digest_slug(passage, state.snapshot)
            updates = compile_wiki_pages(
                passage, selected_texts, constraints, llm, config, digest_slug
            )
            structural = validate_structural(
                state.snapshot, updates, set(selected), batch_no
            )
            content = validate_content(
                state.snapshot, updates, llm, config.sampling, batch_no
            )
            errors = structural + content
            fixed_count = 0
            if errors:
                state.book = record_errors(state.book, errors, batch_no, llm)
                updates, outcome = code_auto_fix(state.snapshot, updates, structural)
                fixed_count = len(outcome.fixed)
            state.snapshot = apply_updates(state.snapshot, updates)
            state.articles_since_fix += 1
            event.update(
                selected=[str(p) for p in selected],
                errors=len(errors),
                fixed=fixed_count,
                skipped=False,
            )
        except (MalformedLlmOutput, UpdateError, FrontmatterError) as exc:
            log.warning("passage %s skipped: %s", passage.source_id, exc)
            event.update(skipped=True, reason=str(exc))
        if log_event:
            log_event(event)

    state.batches_done = batch_no
    due = (
        state.articles_since_fix >= config.periodic_fix_every_n_articles
        or batch_no % config.revalidate_every_batches == 0
    )
    if due:
        state.book.batch_counter = batch_no
        fix_updates = llm_periodic_fix(state.snapshot, state.book, llm, log_event)
        if not fix_updates.is_empty():
            state.snapshot = apply_updates(state.snapshot, fix_updates)
        state.book = verify_and_close(state.book, state.snapshot, llm, config.sampling)
        state.articles_since_fix = 0
        if log_event:
            log_event({"event": "maintenance", "batch": batch_no})

    state.index = build_index(state.snapshot)
    return state


def compile_corpus(
    state: CompileState,
    corpus_path: Path | str,
    llm: LlmPort,
    config: CompilerConfig = CompilerConfig(),
    log_event=None,
    run_finalize: bool = True,
) -> CompileState:
    """Ingest, compile every batch, and finalize."""
    for batch in ingest_corpus(corpus_path, config.batch_size):
        state = compile_batch(state, batch, llm, config, log_event)
    if run_finalize:
        state.snapshot, state.book = finalize(state.snapshot, state.book, llm, log_event)
        state.index = build_index(state.snapshot)
    return state

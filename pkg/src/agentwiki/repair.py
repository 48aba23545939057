"""Two-layer repair.

Layer 1 (``code_auto_fix``) is a deterministic pass over structural findings:
it rewrites or demotes dangling links, canonicalizes or removes bad source
citations, reconciles directory indices with the file tree, and strips
unauthorized page writes. Layer 2 (``llm_periodic_fix``) asks the port to
rewrite pages affected by open semantic entries. ``finalize`` alternates the
two layers for up to three rounds and then runs a verify-and-close pass.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace

from . import prompts
from .codec import WIKILINK_RE, FrontmatterError, parse_page, render_page
from .errorbook import ErrorBook, record_errors, verify_and_close
from .llm import LlmPort, PortUnavailable, UnscriptedRequest
from .model import (
    DIGESTS_DIR,
    DirectoryIndex,
    IndexEntry,
    IndexSection,
    LinkEntry,
    ParseNote,
    SlugPath,
    UpdateSet,
    WikiPage,
    WikiSnapshot,
    try_parse_path,
)
from .snapshot import apply_updates, union_view
from .validation import (
    CONTENT_TYPES,
    ErrorType,
    ValidationError,
    validate_structural,
)

log = logging.getLogger(__name__)

AUTO_FIXABLE = frozenset(
    {
        ErrorType.DANGLING_LINK,
        ErrorType.MALFORMED_REF,
        ErrorType.INDEX_INCONSISTENCY,
        ErrorType.UNSEEN_OVERWRITE,
    }
)
LAYER2_TYPES = frozenset({ErrorType.INCOMPLETE_PAGE}) | CONTENT_TYPES

RECONCILED_SECTION = "Unsorted"


@dataclass
class RepairOutcome:
    fixed: list[ValidationError] = field(default_factory=list)
    residual: list[ValidationError] = field(default_factory=list)
    updates_applied: UpdateSet = field(default_factory=UpdateSet)


def _resolve_elsewhere(target: SlugPath, union: WikiSnapshot) -> SlugPath | None:
    """The unique same-slug page in another directory, if exactly one exists."""
    candidates = [
        p
        for p in union.pages
        if p.slug == target.slug and p.directory != target.directory
    ]
    if len(candidates) == 1:
        return candidates[0]
    return None


def _fix_text_links(text: str, union: WikiSnapshot) -> str:
    """Rewrite uniquely-relocatable dangling links; demote the rest to plain text."""
    resolvable = union.resolvable()

    def fix(match: re.Match) -> str:
        inner, label = match.group(1), match.group(2)
        display = label if label is not None else inner.rsplit("/", 1)[-1]
        target = try_parse_path(inner)
        if target is None:
            return display
        if target in resolvable:
            return match.group(0)
        relocated = _resolve_elsewhere(target, union)
        if relocated is not None:
            if label is not None:
                return f"[[{relocated}|{label}]]"
            return f"[[{relocated}]]"
        return display

    return WIKILINK_RE.sub(fix, text)


def _fix_page_links(page: WikiPage, union: WikiSnapshot) -> WikiPage:
    resolvable = union.resolvable()
    summary = _fix_text_links(page.summary, union)
    facts = tuple(_fix_text_links(f, union) for f in page.key_facts)

    related_pages: list[LinkEntry] = []
    for entry in page.related_pages:
        if entry.target in resolvable:
            related_pages.append(replace(entry, note=_fix_text_links(entry.note, union)))
            continue
        relocated = _resolve_elsewhere(entry.target, union)
        if relocated is not None:
            related_pages.append(LinkEntry(relocated, _fix_text_links(entry.note, union)))
        # else: entry dropped; the plain-text information lives in the note log

    related_sources: list[LinkEntry] = []
    for entry in page.related_sources:
        if entry.target.directory == DIGESTS_DIR and entry.target in resolvable:
            related_sources.append(replace(entry, note=_fix_text_links(entry.note, union)))
    return replace(
        page,
        summary=summary,
        key_facts=facts,
        related_pages=tuple(related_pages),
        related_sources=tuple(related_sources),
    )


def _fix_source_refs(page: WikiPage, union: WikiSnapshot) -> WikiPage:
    """Canonicalize wrong-directory citations whose slug resolves to a digest;
    drop the rest, leaving a note. Unparsable-entry notes are consumed."""
    entries: list[LinkEntry] = []
    notes = list(page.parse_notes)
    for entry in page.related_sources:
        if entry.target.directory == DIGESTS_DIR:
            entries.append(entry)
            continue
        canonical = SlugPath(DIGESTS_DIR, entry.target.slug)
        if canonical in union.sources:
            entries.append(replace(entry, target=canonical))
        else:
            notes.append(
                ParseNote(
                    "removed_malformed_ref",
                    section="Related Sources",
                    detail=str(entry.target),
                )
            )
    notes = [
        n
        if not (n.kind == "unparsable_entry" and n.section == "Related Sources")
        else replace(n, kind="removed_malformed_ref")
        for n in notes
    ]
    return replace(page, related_sources=tuple(entries), parse_notes=tuple(notes))


def _entry_from_page(page: WikiPage) -> IndexEntry:
    tags = tuple(re.sub(r"\s+", "-", t) for t in page.frontmatter.tags)
    return IndexEntry(
        link=page.path,
        aliases=page.frontmatter.aliases,
        summary=page.summary,
        tags=tags,
    )


def _reconcile_index(
    directory: str, index: DirectoryIndex | None, union: WikiSnapshot
) -> DirectoryIndex:
    """Make the index agree with the file tree: drop stale entries, append
    missing pages (metadata taken from their frontmatter)."""
    dir_pages = {p for p in union.pages if p.directory == directory}
    sections: list[IndexSection] = []
    listed: set[SlugPath] = set()
    for section in index.sections if index is not None else ():
        kept = tuple(e for e in section.entries if e.link in dir_pages)
        listed.update(e.link for e in kept)
        if kept or section.heading != RECONCILED_SECTION:
            sections.append(IndexSection(section.heading, kept))
    missing = sorted(dir_pages - listed)
    if missing:
        extra = tuple(_entry_from_page(union.pages[p]) for p in missing)
        for i, section in enumerate(sections):
            if section.heading == RECONCILED_SECTION:
                sections[i] = IndexSection(RECONCILED_SECTION, section.entries + extra)
                break
        else:
            sections.append(IndexSection(RECONCILED_SECTION, extra))
    return DirectoryIndex(directory=directory, sections=tuple(sections))


def code_auto_fix(
    snapshot: WikiSnapshot,
    updates: UpdateSet,
    errors: list[ValidationError],
) -> tuple[UpdateSet, RepairOutcome]:
    """Layer-1 deterministic fixes; returns the repaired update set.

    Pages repaired in place in the snapshot become page writes of the result,
    so re-validation must treat the returned update set as authorized.
    Incomplete pages and both content-level types are returned as residual.
    """
    fixed: list[ValidationError] = []
    residual: list[ValidationError] = []

    page_writes = {path: page for path, page in updates.page_writes}
    unseen = [e for e in errors if e.error_type is ErrorType.UNSEEN_OVERWRITE]
    for err in unseen:
        if err.path in page_writes:
            del page_writes[err.path]
        fixed.append(err)

    stripped = UpdateSet(
        page_writes=[(p, page_writes[p]) for p, _ in updates.page_writes if p in page_writes],
        index_edits=list(updates.index_edits),
        source_writes=list(updates.source_writes),
        global_edit=updates.global_edit,
        deletions=list(updates.deletions),
    )
    union = union_view(snapshot, stripped)

    link_errors = [
        e
        for e in errors
        if e.error_type in (ErrorType.DANGLING_LINK, ErrorType.MALFORMED_REF)
        and e.path in union.pages
    ]
    touched: dict[SlugPath, WikiPage] = {}
    for err in link_errors:
        page = touched.get(err.path, union.pages[err.path])
        page = _fix_source_refs(page, union)
        page = _fix_page_links(page, union)
        touched[err.path] = page
        fixed.append(err)
    for err in (
        e
        for e in errors
        if e.error_type in (ErrorType.DANGLING_LINK, ErrorType.MALFORMED_REF)
        and e.path not in union.pages
    ):
        # Page vanished (e.g. its unauthorized write was stripped); nothing to fix.
        fixed.append(err)

    for path, page in touched.items():
        if page != union.pages[path] or path in page_writes:
            page_writes[path] = page

    index_errors = [e for e in errors if e.error_type is ErrorType.INDEX_INCONSISTENCY]
    index_edits = {d: idx for d, idx in stripped.index_edits}
    if index_errors:
        union_after_links = union_view(
            snapshot,
            UpdateSet(
                page_writes=list(page_writes.items()),
                index_edits=list(index_edits.items()),
                source_writes=list(stripped.source_writes),
                global_edit=stripped.global_edit,
                deletions=list(stripped.deletions),
            ),
        )
        for directory in sorted({e.path.directory for e in index_errors}):
            index_edits[directory] = _reconcile_index(
                directory, union_after_links.indices.get(directory), union_after_links
            )
        fixed.extend(index_errors)

    for err in errors:
        if err.error_type not in AUTO_FIXABLE:
            residual.append(err)

    result = UpdateSet(
        page_writes=sorted(page_writes.items(), key=lambda kv: kv[0]),
        index_edits=sorted(index_edits.items()),
        source_writes=list(stripped.source_writes),
        global_edit=stripped.global_edit,
        deletions=list(stripped.deletions),
    )
    return result, RepairOutcome(fixed=fixed, residual=residual, updates_applied=result)


# ---------------------------------------------------------------------------
# layer 2

def parse_file_blocks(text: str) -> list[tuple[str, str]]:
    """Split an ``=== FILE: path ===`` envelope into (path, content) blocks."""
    blocks: list[tuple[str, str]] = []
    current_path: str | None = None
    current_lines: list[str] = []
    marker = re.compile(r"^===\s*FILE:\s*(\S+)\s*===\s*$")
    for line in text.split("\n"):
        match = marker.match(line.strip())
        if match:
            if current_path is not None:
                blocks.append((current_path, "\n".join(current_lines).strip("\n") + "\n"))
            current_path = match.group(1)
            current_lines = []
        elif current_path is not None:
            current_lines.append(line)
    if current_path is not None:
        blocks.append((current_path, "\n".join(current_lines).strip("\n") + "\n"))
    return blocks


def _parse_fix_reply(reply: str, default_path: SlugPath) -> list[tuple[SlugPath, WikiPage]]:
    blocks = parse_file_blocks(reply)
    if not blocks and reply.lstrip().startswith("---"):
        blocks = [(str(default_path), reply.strip("\n") + "\n")]
    out: list[tuple[SlugPath, WikiPage]] = []
    for raw_path, content in blocks:
        path = try_parse_path(raw_path.removesuffix(".md"))
        if path is None or path.slug == "_index":
            continue
        try:
            out.append((path, parse_page(content, path)))
        except FrontmatterError:
            continue
    return out


def llm_periodic_fix(
    snapshot: WikiSnapshot,
    book: ErrorBook,
    llm: LlmPort,
    log_event=None,
) -> UpdateSet:
    """Layer-2 pass: one port call per page affected by open semantic entries.

    The reply must contain a parsable page (envelope or bare markup); anything
    else skips that page and is logged. New pages in the reply are accepted,
    since missing pages are this layer's to create.
    """
    entries = [e for e in book.open_entries() if e.error_type in LAYER2_TYPES]
    by_page: dict[SlugPath, list] = {}
    for entry in entries:
        for path in entry.affected_paths:
            if path in snapshot.pages:
                by_page.setdefault(path, []).append(entry)

    writes: dict[SlugPath, WikiPage] = {}
    for path in sorted(by_page):
        page = snapshot.pages[path]
        digests = [
            snapshot.sources[e.target].text
            for e in page.related_sources
            if e.target in snapshot.sources
        ]
        constraints = [e.constraint_rule for e in by_page[path]]
        try:
            reply = llm.complete(
                prompts.periodic_fix(str(path), render_page(page), digests, constraints)
            )
        except PortUnavailable as exc:
            log.warning("periodic fix call failed for %s: %s", path, exc)
            if log_event:
                log_event({"event": "fix_skip", "path": str(path), "reason": str(exc)})
            continue
        parsed = _parse_fix_reply(reply, path)
        if not parsed:
            log.warning("periodic fix reply for %s had no parsable page", path)
            if log_event:
                log_event({"event": "fix_skip", "path": str(path), "reason": "unparsable reply"})
            continue
        for new_path, new_page in parsed:
            writes[new_path] = new_page
            if log_event:
                log_event(
                    {
                        "event": "fix_write",
                        "path": str(new_path),
                        "created": new_path not in snapshot.pages,
                    }
                )
    return UpdateSet(page_writes=sorted(writes.items(), key=lambda kv: kv[0]))


def finalize(
    snapshot: WikiSnapshot,
    book: ErrorBook,
    llm: LlmPort,
    log_event=None,
    rounds: int = 3,
) -> tuple[WikiSnapshot, ErrorBook]:
    """Alternate code fix and LLM fix for at most ``rounds`` rounds, exiting
    early on a clean round, then verify-and-close the ledger."""
    for round_no in range(1, rounds + 1):
        errors = validate_structural(snapshot, UpdateSet(), frozenset())
        if errors:
            book = record_errors(book, errors, book.batch_counter + 1, llm)
            updates, outcome = code_auto_fix(snapshot, UpdateSet(), errors)
            if not updates.is_empty():
                snapshot = apply_updates(snapshot, updates)
            if log_event:
                log_event(
                    {
                        "event": "finalize_round",
                        "round": round_no,
                        "errors": len(errors),
                        "auto_fixed": len(outcome.fixed),
                    }
                )
        fix_updates = UpdateSet()
        if any(e.error_type in LAYER2_TYPES for e in book.open_entries()):
            fix_updates = llm_periodic_fix(snapshot, book, llm, log_event)
            if not fix_updates.is_empty():
                snapshot = apply_updates(snapshot, fix_updates)
        book = verify_and_close(book, snapshot, llm)
        if not errors and fix_updates.is_empty():
            break
    return snapshot, book

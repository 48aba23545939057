"""Detection of the seven defect categories.

Five structural checks are pure functions over (snapshot, updates, selected):
dangling links, incomplete pages, malformed source refs, unseen overwrites,
and index/filesystem inconsistencies. The two content-level checks (facts not
entailed by their cited digests, contradictions between linked pages) ask the
LLM port and treat anything but a clean verdict token as "unknown".
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

from . import prompts
from .llm import LlmPort
from .model import DIGESTS_DIR, SlugPath, UpdateSet, WikiPage, WikiSnapshot
from .codec import iter_link_tokens
from .snapshot import union_view

log = logging.getLogger(__name__)


class ErrorType(enum.Enum):
    DANGLING_LINK = "dangling_link"
    INCOMPLETE_PAGE = "incomplete_page"
    MALFORMED_REF = "malformed_ref"
    UNSEEN_OVERWRITE = "unseen_overwrite"
    INDEX_INCONSISTENCY = "index_inconsistency"
    UNSUPPORTED_FACT = "unsupported_fact"
    CROSS_PAGE_CONTRADICTION = "cross_page_contradiction"


STRUCTURAL_TYPES = frozenset(
    {
        ErrorType.DANGLING_LINK,
        ErrorType.INCOMPLETE_PAGE,
        ErrorType.MALFORMED_REF,
        ErrorType.UNSEEN_OVERWRITE,
        ErrorType.INDEX_INCONSISTENCY,
    }
)
CONTENT_TYPES = frozenset(
    {ErrorType.UNSUPPORTED_FACT, ErrorType.CROSS_PAGE_CONTRADICTION}
)

DISPLAY_NAMES = {
    ErrorType.DANGLING_LINK: "Dangling Links",
    ErrorType.INCOMPLETE_PAGE: "Incomplete Pages",
    ErrorType.MALFORMED_REF: "Malformed Refs",
    ErrorType.UNSEEN_OVERWRITE: "Unseen Overwrite",
    ErrorType.INDEX_INCONSISTENCY: "Index Inconsistency",
    ErrorType.UNSUPPORTED_FACT: "Unsupported Facts",
    ErrorType.CROSS_PAGE_CONTRADICTION: "Cross-Page Contradictions",
}


@dataclass(frozen=True)
class Locus:
    section: str
    item: int | None = None
    text: str = ""

    def sort_key(self) -> tuple:
        return (self.section, self.item if self.item is not None else -1, self.text)


@dataclass
class ValidationError:
    error_type: ErrorType
    path: SlugPath
    detail: str
    locus: Locus | None = None
    batch_no: int = 0

    def sort_key(self) -> tuple:
        locus_key = self.locus.sort_key() if self.locus else ("", -1, "")
        return (str(self.path), self.error_type.value, locus_key, self.detail)


@dataclass(frozen=True)
class ContentSamplingConfig:
    """How much content to check per written page. ``facts_per_page=None``
    verifies every fact; pairs are taken from the page's related links in
    order, so the sample is deterministic."""

    facts_per_page: int | None = None
    pairs_per_page: int = 1


def _page_text_fields(page: WikiPage) -> list[tuple[str, int | None, str]]:
    """(section, item index, text) for every free-text field that may hold links."""
    fields: list[tuple[str, int | None, str]] = [("summary", None, page.summary)]
    for i, fact in enumerate(page.key_facts):
        fields.append(("Key Facts", i, fact))
    for i, entry in enumerate(page.related_pages):
        fields.append(("Related Pages", i, entry.note))
    for i, entry in enumerate(page.related_sources):
        fields.append(("Related Sources", i, entry.note))
    return fields


def _missing_parts(page: WikiPage) -> list[str]:
    missing = []
    if not page.title.strip():
        missing.append("title")
    if not page.summary.strip():
        missing.append("summary")
    if not page.key_facts:
        missing.append("key facts")
    if not page.related_sources:
        missing.append("related sources")
    return missing


def validate_structural(
    snapshot: WikiSnapshot,
    updates: UpdateSet | None = None,
    selected: set[SlugPath] | frozenset[SlugPath] = frozenset(),
    batch_no: int = 0,
) -> list[ValidationError]:
    """Structural findings over the union of snapshot and updates.

    Pure and order-stable: equal inputs give an identical error list.
    """
    updates = updates or UpdateSet()
    union = union_view(snapshot, updates)
    resolvable = union.resolvable()
    errors: list[ValidationError] = []

    for path, _ in updates.page_writes:
        if path in snapshot.pages and path not in selected:
            errors.append(
                ValidationError(
                    ErrorType.UNSEEN_OVERWRITE,
                    path,
                    f"page {path} was modified without being selected",
                )
            )

    for path in sorted(union.pages):
        page = union.pages[path]

        missing = _missing_parts(page)
        if missing:
            errors.append(
                ValidationError(
                    ErrorType.INCOMPLETE_PAGE,
                    path,
                    "page is missing: " + ", ".join(missing),
                    Locus("page", None, ",".join(missing)),
                )
            )

        for i, entry in enumerate(page.related_sources):
            if entry.target.directory != DIGESTS_DIR:
                errors.append(
                    ValidationError(
                        ErrorType.MALFORMED_REF,
                        path,
                        f"source citation must be [[{DIGESTS_DIR}/<slug>]], "
                        f"got [[{entry.target}]]",
                        Locus("Related Sources", i, str(entry.target)),
                    )
                )
        for note in page.parse_notes:
            if note.kind == "unparsable_entry" and note.section == "Related Sources":
                errors.append(
                    ValidationError(
                        ErrorType.MALFORMED_REF,
                        path,
                        f"unparsable source citation: {note.detail}",
                        Locus("Related Sources", None, note.detail),
                    )
                )

        for i, entry in enumerate(page.related_pages):
            if entry.target not in resolvable:
                errors.append(
                    ValidationError(
                        ErrorType.DANGLING_LINK,
                        path,
                        f"link target [[{entry.target}]] does not exist",
                        Locus("Related Pages", i, str(entry.target)),
                    )
                )
        for i, entry in enumerate(page.related_sources):
            if entry.target.directory == DIGESTS_DIR and entry.target not in resolvable:
                errors.append(
                    ValidationError(
                        ErrorType.DANGLING_LINK,
                        path,
                        f"source citation [[{entry.target}]] does not exist",
                        Locus("Related Sources", i, str(entry.target)),
                    )
                )
        for section, item, text in _page_text_fields(page):
            for token, _label, target in iter_link_tokens(text):
                if target is None:
                    errors.append(
                        ValidationError(
                            ErrorType.DANGLING_LINK,
                            path,
                            f"link {token} is not directory-qualified",
                            Locus(section, item, token),
                        )
                    )
                elif target not in resolvable:
                    errors.append(
                        ValidationError(
                            ErrorType.DANGLING_LINK,
                            path,
                            f"link target [[{target}]] does not exist",
                            Locus(section, item, token),
                        )
                    )

    knowledge_dirs = sorted(
        {p.directory for p in union.pages} | set(union.indices)
    )
    for directory in knowledge_dirs:
        index = union.indices.get(directory)
        dir_pages = {p for p in union.pages if p.directory == directory}
        listed = index.links() if index is not None else set()
        for ghost in sorted(listed - dir_pages):
            errors.append(
                ValidationError(
                    ErrorType.INDEX_INCONSISTENCY,
                    ghost,
                    f"{directory}/_index.md lists [[{ghost}]] but no such file exists",
                    Locus("index", None, str(ghost)),
                )
            )
        for unlisted in sorted(dir_pages - listed):
            detail = (
                f"page {unlisted} is not listed in {directory}/_index.md"
                if index is not None
                else f"page {unlisted} has no directory index at all"
            )
            errors.append(
                ValidationError(
                    ErrorType.INDEX_INCONSISTENCY,
                    unlisted,
                    detail,
                    Locus("index", None, str(unlisted)),
                )
            )

    for err in errors:
        err.batch_no = batch_no
    errors.sort(key=lambda e: e.sort_key())
    return errors


# ---------------------------------------------------------------------------
# content-level checks

def _first_verdict(text: str, positive: str, negative: str) -> str:
    """First non-empty line decides; anything else is 'unknown'."""
    for line in text.splitlines():
        token = line.strip().upper().rstrip(".")
        if not token:
            continue
        if token == positive:
            return "positive"
        if token == negative:
            return "negative"
        return "unknown"
    return "unknown"


def cited_digest_texts(page: WikiPage, union: WikiSnapshot) -> list[str]:
    texts = []
    for entry in page.related_sources:
        record = union.sources.get(entry.target)
        if record is not None:
            texts.append(record.text)
    return texts


def check_page_facts(
    page: WikiPage,
    union: WikiSnapshot,
    llm: LlmPort,
    sampling: ContentSamplingConfig,
) -> list[ValidationError]:
    digests = cited_digest_texts(page, union)
    if not digests:
        return []
    facts = page.key_facts
    if sampling.facts_per_page is not None:
        facts = facts[: sampling.facts_per_page]
    errors = []
    for i, fact in enumerate(facts):
        verdict = _first_verdict(
            llm.complete(prompts.verify_fact(fact, digests)),
            "ENTAILED",
            "NOT_ENTAILED",
        )
        if verdict == "negative":
            errors.append(
                ValidationError(
                    ErrorType.UNSUPPORTED_FACT,
                    page.path,
                    f"fact not supported by cited digests: {fact}",
                    Locus("Key Facts", i, fact),
                )
            )
        elif verdict == "unknown":
            log.warning("unparsable entailment verdict for %s fact %d", page.path, i)
    return errors


def check_linked_pairs(
    page: WikiPage,
    union: WikiSnapshot,
    llm: LlmPort,
    sampling: ContentSamplingConfig,
) -> list[ValidationError]:
    partners = [
        union.pages[e.target]
        for e in page.related_pages
        if e.target in union.pages
    ][: sampling.pairs_per_page]
    errors = []
    for partner in partners:
        verdict = _first_verdict(
            llm.complete(
                prompts.check_consistency(
                    str(page.path),
                    list(page.key_facts),
                    str(partner.path),
                    list(partner.key_facts),
                )
            ),
            "CONSISTENT",
            "CONTRADICTION",
        )
        if verdict == "negative":
            first, second = sorted([page.path, partner.path], key=str)
            errors.append(
                ValidationError(
                    ErrorType.CROSS_PAGE_CONTRADICTION,
                    first,
                    f"linked pages {first} and {second} state conflicting facts",
                    Locus("pair", None, f"{first} vs {second}"),
                )
            )
        elif verdict == "unknown":
            log.warning(
                "unparsable consistency verdict for %s vs %s", page.path, partner.path
            )
    return errors


def validate_content(
    snapshot: WikiSnapshot,
    updates: UpdateSet,
    llm: LlmPort,
    sampling: ContentSamplingConfig = ContentSamplingConfig(),
    batch_no: int = 0,
) -> list[ValidationError]:
    """Content findings for the pages written by ``updates``.

    Port failures propagate to the caller; unparsable verdicts are logged and
    produce no error. Output is sorted by (path, locus) regardless of call
    order so concurrency in the port never changes results.
    """
    union = union_view(snapshot, updates)
    errors: list[ValidationError] = []
    for path, _ in updates.page_writes:
        page = union.pages.get(path)
        if page is None:
            continue
        errors.extend(check_page_facts(page, union, llm, sampling))
        errors.extend(check_linked_pairs(page, union, llm, sampling))
    for err in errors:
        err.batch_no = batch_no
    errors.sort(key=lambda e: e.sort_key())
    return errors

"""The persistent self-correction ledger.

Each entry tracks one recurring defect pattern through five stages: discover
(validators hand findings to ``record_errors``), attribute (the port names a
root cause), constrain (the port mints a reusable rule), inject (compilation
prompts receive ``active_constraints``), and verify & close (``verify_and_close``
re-checks the affected pages and closes entries that no longer recur).

Entries are deduplicated by a signature of (error type, directory, section
kind) rather than by exact path, because the ledger targets cross-batch
patterns, not individual instances. Closure is empirical and revocable: a
closed entry whose signature recurs is reopened.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import prompts
from .llm import LlmPort, PortUnavailable, UnscriptedRequest
from .model import SlugPath, UpdateSet, WikiSnapshot
from .validation import (
    CONTENT_TYPES,
    DISPLAY_NAMES,
    ContentSamplingConfig,
    ErrorType,
    ValidationError,
    check_linked_pairs,
    check_page_facts,
    validate_structural,
)

log = logging.getLogger(__name__)

UNATTRIBUTED = "unattributed"

VERIFICATION_METHODS = {
    ErrorType.DANGLING_LINK: "link targets re-resolved against the file tree",
    ErrorType.INCOMPLETE_PAGE: "required-section completeness check",
    ErrorType.MALFORMED_REF: "citation format regex check",
    ErrorType.UNSEEN_OVERWRITE: "write set compared against the selected pages",
    ErrorType.INDEX_INCONSISTENCY: "two-way diff of index entries and files",
    ErrorType.UNSUPPORTED_FACT: "fact entailment re-checked against cited digests",
    ErrorType.CROSS_PAGE_CONTRADICTION: "paired consistency re-check across linked pages",
}

FALLBACK_CONSTRAINTS = {
    ErrorType.DANGLING_LINK: (
        "Never emit a wikilink whose target page or digest does not already "
        "exist in this update or in the wiki."
    ),
    ErrorType.INCOMPLETE_PAGE: (
        "Every page must carry a title, a summary blockquote, at least one "
        "key fact, and at least one related source."
    ),
    ErrorType.MALFORMED_REF: (
        "Cite sources only as [[sources/digests/<slug>]], nothing else."
    ),
    ErrorType.UNSEEN_OVERWRITE: (
        "Only modify pages that were selected for this passage; create new "
        "pages instead of rewriting unselected ones."
    ),
    ErrorType.INDEX_INCONSISTENCY: (
        "When adding or removing a page, update its directory _index.md in "
        "the same response."
    ),
    ErrorType.UNSUPPORTED_FACT: (
        "State only facts that the cited source digests support verbatim or "
        "by direct paraphrase."
    ),
    ErrorType.CROSS_PAGE_CONTRADICTION: (
        "Before writing an attribute shared with a linked page, keep it "
        "consistent with what that page already states."
    ),
}


def signature_of(error: ValidationError) -> str:
    section = error.locus.section if error.locus else "page"
    return f"{error.path.directory}:{section.lower().replace(' ', '_')}"


def entry_id(error_type: ErrorType, signature: str) -> str:
    return hashlib.sha256(f"{error_type.value}|{signature}".encode()).hexdigest()[:12]


@dataclass
class ErrorBookEntry:
    id: str
    error_type: ErrorType
    signature: str
    phenomenon: str
    root_cause: str
    constraint_rule: str
    verification_method: str
    status: str = "open"  # open | closed
    occurrences: int = 1
    first_seen_batch: int = 0
    last_seen_batch: int = 0
    affected_paths: list[SlugPath] = field(default_factory=list)


@dataclass
class ErrorBook:
    entries: list[ErrorBookEntry] = field(default_factory=list)
    batch_counter: int = 0

    def by_id(self, eid: str) -> ErrorBookEntry | None:
        for entry in self.entries:
            if entry.id == eid:
                return entry
        return None

    def open_entries(self) -> list[ErrorBookEntry]:
        return [e for e in self.entries if e.status == "open"]


def _attribute(
    entry_type: ErrorType, phenomenon: str, examples: list[str], llm: LlmPort | None
) -> tuple[str, str]:
    """Ask the port for a root cause and constraint rule; fall back to the
    per-type default rule when the port fails or the reply has no verdict lines."""
    if llm is None:
        return UNATTRIBUTED, FALLBACK_CONSTRAINTS[entry_type]
    try:
        reply = llm.complete(
            prompts.attribute_error(DISPLAY_NAMES[entry_type], phenomenon, examples)
        )
    except (PortUnavailable, UnscriptedRequest) as exc:
        log.warning("attribution failed for %s: %s", entry_type.value, exc)
        return UNATTRIBUTED, FALLBACK_CONSTRAINTS[entry_type]
    root_cause = ""
    constraint = ""
    for line in reply.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith("ROOT_CAUSE:"):
            root_cause = stripped[len("ROOT_CAUSE:"):].strip()
        elif stripped.upper().startswith("CONSTRAINT:"):
            constraint = stripped[len("CONSTRAINT:"):].strip()
    if not root_cause or not constraint:
        log.warning("unparsable attribution reply for %s", entry_type.value)
        return UNATTRIBUTED, FALLBACK_CONSTRAINTS[entry_type]
    return root_cause, constraint


def record_errors(
    book: ErrorBook,
    errors: list[ValidationError],
    batch_no: int,
    llm: LlmPort | None = None,
) -> ErrorBook:
    """Fold a batch's findings into the ledger.

    Existing entries gain occurrences and are reopened if they had been
    closed; new (type, signature) groups are attributed through the port.
    Entries left unattributed by an earlier port failure are retried here.
    """
    book.batch_counter = batch_no
    groups: dict[tuple[ErrorType, str], list[ValidationError]] = {}
    for error in errors:
        groups.setdefault((error.error_type, signature_of(error)), []).append(error)

    for (etype, signature), group in sorted(
        groups.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
    ):
        eid = entry_id(etype, signature)
        entry = book.by_id(eid)
        paths = []
        for err in group:
            if err.path not in paths:
                paths.append(err.path)
        if entry is None:
            root_cause, constraint = _attribute(
                etype, group[0].detail, [e.detail for e in group], llm
            )
            book.entries.append(
                ErrorBookEntry(
                    id=eid,
                    error_type=etype,
                    signature=signature,
                    phenomenon=group[0].detail,
                    root_cause=root_cause,
                    constraint_rule=constraint,
                    verification_method=VERIFICATION_METHODS[etype],
                    occurrences=len(group),
                    first_seen_batch=batch_no,
                    last_seen_batch=batch_no,
                    affected_paths=paths,
                )
            )
            continue
        entry.occurrences += len(group)
        entry.last_seen_batch = batch_no
        if entry.status == "closed":
            entry.status = "open"
        for path in paths:
            if path not in entry.affected_paths:
                entry.affected_paths.append(path)
        del entry.affected_paths[100:]
        if entry.root_cause == UNATTRIBUTED:
            root_cause, constraint = _attribute(
                etype, entry.phenomenon, [e.detail for e in group], llm
            )
            if root_cause != UNATTRIBUTED:
                entry.root_cause = root_cause
                entry.constraint_rule = constraint
    return book


def active_constraints(book: ErrorBook, cap: int = 30) -> list[str]:
    """Open entries' rules, most persistent first, truncated to the prompt cap."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    ranked = sorted(
        book.open_entries(),
        key=lambda e: (-e.occurrences, -e.last_seen_batch, e.id),
    )
    return [e.constraint_rule for e in ranked[:cap]]


def verify_and_close(
    book: ErrorBook,
    snapshot: WikiSnapshot,
    llm: LlmPort | None = None,
    sampling: ContentSamplingConfig = ContentSamplingConfig(),
) -> ErrorBook:
    """Re-run each open entry's matching validator on its affected paths.

    No recurrence closes the entry; recurrence keeps it open and refreshes
    ``last_seen_batch``. Occurrences never change here. A port failure during
    a content re-check leaves the entry open.
    """
    structural = validate_structural(snapshot, UpdateSet(), frozenset())
    by_key: dict[tuple[ErrorType, str], list[ValidationError]] = {}
    for err in structural:
        by_key.setdefault((err.error_type, signature_of(err)), []).append(err)

    for entry in book.open_entries():
        affected = set(entry.affected_paths)
        if entry.error_type in CONTENT_TYPES:
            if llm is None:
                log.warning("no port available to re-verify %s; left open", entry.id)
                continue
            pages = [snapshot.pages[p] for p in entry.affected_paths if p in snapshot.pages]
            try:
                recurred = False
                for page in pages:
                    if entry.error_type is ErrorType.UNSUPPORTED_FACT:
                        found = check_page_facts(page, snapshot, llm, sampling)
                    else:
                        found = check_linked_pairs(page, snapshot, llm, sampling)
                    if any(e.error_type is entry.error_type for e in found):
                        recurred = True
                        break
            except (PortUnavailable, UnscriptedRequest) as exc:
                log.warning("verify pass skipped for %s: %s", entry.id, exc)
                continue
        else:
            found = by_key.get((entry.error_type, entry.signature), [])
            recurred = any(e.path in affected for e in found)
        if recurred:
            entry.last_seen_batch = book.batch_counter
        else:
            entry.status = "closed"
    return book


# ---------------------------------------------------------------------------
# persistence

_ENTRY_KEYS = (
    "id",
    "error_type",
    "signature",
    "phenomenon",
    "root_cause",
    "constraint_rule",
    "verification_method",
    "status",
    "occurrences",
    "first_seen_batch",
    "last_seen_batch",
    "affected_paths",
)


class BookFormatError(ValueError):
    pass


def save_book(book: ErrorBook, path: Path | str) -> None:
    """Human-readable YAML with stable key order."""
    data = {
        "batch_counter": book.batch_counter,
        "entries": [
            {
                "id": e.id,
                "error_type": e.error_type.value,
                "signature": e.signature,
                "phenomenon": e.phenomenon,
                "root_cause": e.root_cause,
                "constraint_rule": e.constraint_rule,
                "verification_method": e.verification_method,
                "status": e.status,
                "occurrences": e.occurrences,
                "first_seen_batch": e.first_seen_batch,
                "last_seen_batch": e.last_seen_batch,
                "affected_paths": [str(p) for p in e.affected_paths],
            }
            for e in book.entries
        ],
    }
    Path(path).write_text(
        yaml.safe_dump(data, sort_keys=False, allow_unicode=True, width=10**6),
        encoding="utf-8",
    )


def load_book(path: Path | str) -> ErrorBook:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise BookFormatError(f"unreadable error book: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("entries", []), list):
        raise BookFormatError("error book must be a mapping with an entries list")

    entries: list[ErrorBookEntry] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(data.get("entries", [])):
        if not isinstance(raw, dict):
            raise BookFormatError(f"entry {i}: not a mapping")
        missing = [k for k in _ENTRY_KEYS if k not in raw]
        if missing:
            raise BookFormatError(f"entry {i}: missing keys {missing}")
        if raw["id"] in seen_ids:
            raise BookFormatError(f"entry {i}: duplicate id {raw['id']}")
        seen_ids.add(raw["id"])
        if raw["status"] not in ("open", "closed"):
            raise BookFormatError(f"entry {i}: bad status {raw['status']!r}")
        try:
            etype = ErrorType(raw["error_type"])
            paths = [SlugPath.parse(p) for p in raw["affected_paths"]]
            entry = ErrorBookEntry(
                id=str(raw["id"]),
                error_type=etype,
                signature=str(raw["signature"]),
                phenomenon=str(raw["phenomenon"]),
                root_cause=str(raw["root_cause"]),
                constraint_rule=str(raw["constraint_rule"]),
                verification_method=str(raw["verification_method"]),
                status=raw["status"],
                occurrences=int(raw["occurrences"]),
                first_seen_batch=int(raw["first_seen_batch"]),
                last_seen_batch=int(raw["last_seen_batch"]),
                affected_paths=paths,
            )
        except (ValueError, TypeError) as exc:
            raise BookFormatError(f"entry {i}: {exc}") from exc
        if entry.occurrences < 1 or entry.last_seen_batch < entry.first_seen_batch:
            raise BookFormatError(f"entry {i}: inconsistent counters")
        entries.append(entry)
    return ErrorBook(entries=entries, batch_counter=int(data.get("batch_counter", 0)))


# ---------------------------------------------------------------------------
# reporting

@dataclass(frozen=True)
class DistributionReport:
    """Share of recorded occurrences per defect type; percentages are exact
    (rounding happens only when formatting), so they sum to 100 on any
    non-empty book."""

    percentages: dict[ErrorType, float]
    total_occurrences: int
    empty: bool

    def format_table(self) -> str:
        width = max(len(n) for n in DISPLAY_NAMES.values())
        lines = [f"{'Error Type':<{width}}  Share"]
        for etype in ErrorType:
            lines.append(
                f"{DISPLAY_NAMES[etype]:<{width}}  {self.percentages[etype]:5.1f}%"
            )
        suffix = "  (empty book)" if self.empty else f"  ({self.total_occurrences} occurrences)"
        return "\n".join(lines) + suffix


def distribution_report(book: ErrorBook) -> DistributionReport:
    totals = {etype: 0 for etype in ErrorType}
    for entry in book.entries:
        totals[entry.error_type] += entry.occurrences
    grand = sum(totals.values())
    if grand == 0:
        return DistributionReport(
            percentages={etype: 0.0 for etype in ErrorType},
            total_occurrences=0,
            empty=True,
        )
    return DistributionReport(
        percentages={etype: totals[etype] * 100.0 / grand for etype in ErrorType},
        total_occurrences=grand,
        empty=False,
    )

"""Core data model for the wiki: paths, pages, indices, sources, snapshots.

A wiki is a tree of Markdown files: a global ``index.md``, one ``_index.md``
per knowledge directory, knowledge pages, and a ``sources/`` archive holding
paragraph digests and verbatim articles. Everything here is a plain value
object; parsing/rendering lives in ``codec`` and file I/O in ``snapshot``.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field, replace

SLUG_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
DIR_SEGMENT_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")

DIGESTS_DIR = "sources/digests"
ARTICLES_DIR = "sources/articles"
SOURCE_DIRS = (DIGESTS_DIR, ARTICLES_DIR)


class ModelError(ValueError):
    """Raised when a value object would violate its structural constraints."""


@dataclass(frozen=True, order=True)
class SlugPath:
    """A ``directory/slug`` address of one page or source record.

    The directory is one of the wiki's knowledge directories (``people``,
    ``media``, ...) or one of the two source directories. The slug carries
    no path separators and no ``.md`` suffix.
    """

    directory: str
    slug: str

    def __post_init__(self) -> None:
        segments = self.directory.split("/") if self.directory else []
        if not segments or not all(DIR_SEGMENT_RE.match(s) for s in segments):
            raise ModelError(f"invalid directory {self.directory!r}")
        if not SLUG_RE.match(self.slug):
            raise ModelError(f"invalid slug {self.slug!r}")

    def render(self) -> str:
        return f"{self.directory}/{self.slug}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "SlugPath":
        """Parse a rendered ``directory/slug`` form back into a value.

        Raises ModelError when the text has no directory qualifier or either
        part fails the allowed alphabet.
        """
        text = text.strip()
        if "/" not in text:
            raise ModelError(f"path {text!r} has no directory qualifier")
        directory, slug = text.rsplit("/", 1)
        return cls(directory, slug)


def try_parse_path(text: str) -> SlugPath | None:
    try:
        return SlugPath.parse(text)
    except ModelError:
        return None


def slugify(title: str) -> str:
    """Turn a title into a slug: whitespace becomes ``-``, the rest of the
    slug alphabet is kept as-is (case preserved), anything else is dropped."""
    out = re.sub(r"\s+", "-", title.strip())
    out = re.sub(r"[^A-Za-z0-9._-]", "", out)
    out = re.sub(r"-{2,}", "-", out).strip("-.")
    return out or "untitled"


@dataclass(frozen=True)
class ParseNote:
    """One leniency record produced while parsing messy markup.

    kind is a stable machine token (``missing_section``, ``unparsable_entry``,
    ``unknown_key``, ...); section names the page section involved, when any.
    """

    kind: str
    section: str = ""
    detail: str = ""


def _dedupe_casefold(values: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for v in values:
        key = v.casefold()
        if key not in seen:
            seen.add(key)
            out.append(v)
    return out


@dataclass(frozen=True)
class PageFrontmatter:
    page_type: str
    created: dt.date
    updated: dt.date
    aliases: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.updated < self.created:
            raise ModelError(
                f"updated {self.updated} precedes created {self.created}"
            )
        object.__setattr__(self, "aliases", tuple(_dedupe_casefold(list(self.aliases))))
        object.__setattr__(self, "tags", tuple(_dedupe_casefold(list(self.tags))))


@dataclass(frozen=True)
class LinkEntry:
    """A bulleted wikilink entry in a Related Pages / Related Sources section."""

    target: SlugPath
    note: str = ""


@dataclass(frozen=True)
class WikiPage:
    path: SlugPath
    frontmatter: PageFrontmatter
    title: str
    summary: str = ""
    key_facts: tuple[str, ...] = ()
    related_pages: tuple[LinkEntry, ...] = ()
    related_sources: tuple[LinkEntry, ...] = ()
    parse_notes: tuple[ParseNote, ...] = ()

    def with_notes(self, *notes: ParseNote) -> "WikiPage":
        return replace(self, parse_notes=self.parse_notes + tuple(notes))


@dataclass(frozen=True)
class IndexEntry:
    link: SlugPath
    aliases: tuple[str, ...] = ()
    summary: str = ""
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class IndexSection:
    heading: str
    entries: tuple[IndexEntry, ...] = ()


@dataclass(frozen=True)
class DirectoryIndex:
    """Browsable listing of one directory's pages, grouped under headings.

    ``page_count`` is always derived from the distinct entry links; the number
    written in a file on disk is never trusted.
    """

    directory: str
    sections: tuple[IndexSection, ...] = ()
    parse_notes: tuple[ParseNote, ...] = ()

    def __post_init__(self) -> None:
        for section in self.sections:
            for entry in section.entries:
                if entry.link.directory != self.directory:
                    raise ModelError(
                        f"{self.directory}/_index.md lists foreign link {entry.link}"
                    )

    @property
    def page_count(self) -> int:
        return len(self.links())

    def links(self) -> set[SlugPath]:
        return {e.link for s in self.sections for e in s.entries}


@dataclass(frozen=True)
class GlobalIndex:
    overview: str = ""
    catalog: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        names = [d for d, _ in self.catalog]
        if len(names) != len(set(names)):
            raise ModelError("duplicate directory in global catalog")


@dataclass(frozen=True)
class SourceRecord:
    kind: str  # "digest" | "article"
    path: SlugPath
    source_id: str
    text: str

    def __post_init__(self) -> None:
        expected = {"digest": DIGESTS_DIR, "article": ARTICLES_DIR}.get(self.kind)
        if expected is None:
            raise ModelError(f"unknown source kind {self.kind!r}")
        if self.path.directory != expected:
            raise ModelError(
                f"{self.kind} record must live under {expected}/, got {self.path}"
            )


@dataclass(frozen=True)
class WikiSnapshot:
    """Immutable view of the whole wiki at one revision.

    Mutation happens only through ``snapshot.apply_updates``, which returns a
    new snapshot with revision + 1; existing snapshots may be shared freely
    across threads.
    """

    pages: dict[SlugPath, WikiPage] = field(default_factory=dict)
    indices: dict[str, DirectoryIndex] = field(default_factory=dict)
    global_index: GlobalIndex = field(default_factory=GlobalIndex)
    sources: dict[SlugPath, SourceRecord] = field(default_factory=dict)
    revision: int = 0

    def __post_init__(self) -> None:
        for key, page in self.pages.items():
            if key != page.path:
                raise ModelError(f"page keyed {key} stores path {page.path}")
        for name, idx in self.indices.items():
            if name != idx.directory:
                raise ModelError(f"index keyed {name} stores directory {idx.directory}")
        for key, rec in self.sources.items():
            if key != rec.path:
                raise ModelError(f"source keyed {key} stores path {rec.path}")

    def directories(self) -> list[str]:
        """Knowledge directories present, via pages or indices (sorted)."""
        dirs = {p.directory for p in self.pages} | set(self.indices)
        return sorted(dirs)

    def resolvable(self) -> set[SlugPath]:
        """Every path a wikilink may legally point at."""
        return set(self.pages) | set(self.sources)


@dataclass
class UpdateSet:
    """One compilation step's proposed writes, edits, and deletions."""

    page_writes: list[tuple[SlugPath, WikiPage]] = field(default_factory=list)
    index_edits: list[tuple[str, DirectoryIndex]] = field(default_factory=list)
    source_writes: list[SourceRecord] = field(default_factory=list)
    global_edit: GlobalIndex | None = None
    deletions: list[SlugPath] = field(default_factory=list)

    def touched(self) -> list[str]:
        """Rendered paths of everything this update set touches.

        Raises ModelError when the same path is touched twice; apply_updates
        relies on this to reject internally inconsistent update sets.
        """
        out: list[str] = []
        for path, _ in self.page_writes:
            out.append(path.render())
        for directory, _ in self.index_edits:
            out.append(f"{directory}/_index.md")
        for rec in self.source_writes:
            out.append(rec.path.render())
        if self.global_edit is not None:
            out.append("index.md")
        for path in self.deletions:
            out.append(path.render())
        dupes = {p for p in out if out.count(p) > 1}
        if dupes:
            raise ModelError(f"update set touches paths twice: {sorted(dupes)}")
        return out

    def is_empty(self) -> bool:
        return not (
            self.page_writes
            or self.index_edits
            or self.source_writes
            or self.global_edit is not None
            or self.deletions
        )


@dataclass(frozen=True)
class Passage:
    """One raw source passage awaiting compilation."""

    source_id: str
    title: str
    text: str

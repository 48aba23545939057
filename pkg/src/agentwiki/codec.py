"""Markup codec: parse and render pages, directory indices, and the global index.

Parsing is lenient (missing sections become empty lists plus a parse note;
only an unreadable frontmatter block is fatal) while rendering is canonical
and byte-deterministic, so ``parse(render(x)) == x`` for every valid value.
"""

from __future__ import annotations

import datetime as dt
import re

import yaml

from .model import (
    DIGESTS_DIR,
    DirectoryIndex,
    GlobalIndex,
    IndexEntry,
    IndexSection,
    LinkEntry,
    ModelError,
    PageFrontmatter,
    ParseNote,
    SlugPath,
    SourceRecord,
    WikiPage,
    try_parse_path,
)

WIKILINK_RE = re.compile(r"\[\[([^\[\]|]+)(?:\|([^\[\]]*))?\]\]")

FRONTMATTER_KEYS = ("type", "created", "updated", "aliases", "tags")
SECTION_KEY_FACTS = "Key Facts"
SECTION_RELATED_PAGES = "Related Pages"
SECTION_RELATED_SOURCES = "Related Sources"
PAGE_SECTIONS = (SECTION_KEY_FACTS, SECTION_RELATED_PAGES, SECTION_RELATED_SOURCES)

_FALLBACK_DATE = dt.date(1970, 1, 1)


class FrontmatterError(ValueError):
    """The frontmatter block is missing or unreadable; the page is unusable."""


def extract_wikilinks(text: str) -> list[SlugPath]:
    """All directory-qualified ``[[dir/Slug]]`` targets, in order, duplicates kept.

    Display-text variants (``[[dir/Slug|label]]``) yield the target. Tokens
    without a directory qualifier are skipped here; validators flag them.
    """
    out: list[SlugPath] = []
    for match in WIKILINK_RE.finditer(text):
        path = try_parse_path(match.group(1))
        if path is not None:
            out.append(path)
    return out


def iter_link_tokens(text: str) -> list[tuple[str, str, SlugPath | None]]:
    """Raw ``[[...]]`` tokens: (whole token, inner label text, parsed target or None)."""
    out = []
    for match in WIKILINK_RE.finditer(text):
        label = match.group(2) if match.group(2) is not None else match.group(1)
        out.append((match.group(0), label, try_parse_path(match.group(1))))
    return out


# ---------------------------------------------------------------------------
# frontmatter

def _flow_list(values: tuple[str, ...]) -> str:
    # safe_dump with flow style gives a stable one-line [a, b] form that
    # quotes exactly when YAML needs it, so the line survives safe_load.
    dumped = yaml.safe_dump(
        list(values), default_flow_style=True, width=10**6, allow_unicode=True
    ).strip()
    return dumped


def render_frontmatter(fm: PageFrontmatter) -> str:
    lines = [
        "---",
        f"type: {fm.page_type}",
        f"created: {fm.created.isoformat()}",
        f"updated: {fm.updated.isoformat()}",
        f"aliases: {_flow_list(fm.aliases)}",
        f"tags: {_flow_list(fm.tags)}",
        "---",
    ]
    return "\n".join(lines)


def _coerce_date(value: object, key: str, notes: list[ParseNote]) -> dt.date:
    if isinstance(value, dt.date) and not isinstance(value, dt.datetime):
        return value
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value.strip())
        except ValueError:
            pass
    notes.append(ParseNote("bad_frontmatter_value", detail=f"{key}: {value!r}"))
    return _FALLBACK_DATE


def _coerce_str_list(value: object) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [str(value)]


def split_frontmatter(text: str) -> tuple[str, str]:
    """Split page text into (frontmatter yaml, body). Raises FrontmatterError."""
    if not text.startswith("---"):
        raise FrontmatterError("page does not start with a frontmatter block")
    match = re.match(r"^---[ \t]*\n(.*?)\n---[ \t]*\n?", text, re.DOTALL)
    if not match:
        raise FrontmatterError("frontmatter block is not closed")
    return match.group(1), text[match.end():]


def parse_frontmatter(block: str) -> tuple[PageFrontmatter, list[ParseNote]]:
    try:
        data = yaml.safe_load(block)
    except yaml.YAMLError as exc:
        raise FrontmatterError(f"unreadable frontmatter: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise FrontmatterError("frontmatter is not a mapping")

    notes: list[ParseNote] = []
    for key in FRONTMATTER_KEYS:
        if key not in data:
            notes.append(ParseNote("missing_key", detail=key))
    for key in data:
        if key not in FRONTMATTER_KEYS:
            notes.append(ParseNote("unknown_key", detail=f"{key}: {data[key]!r}"))

    created = _coerce_date(data.get("created", _FALLBACK_DATE), "created", notes)
    updated = _coerce_date(data.get("updated", created), "updated", notes)
    if updated < created:
        notes.append(ParseNote("bad_frontmatter_value", detail="updated precedes created"))
        updated = created
    fm = PageFrontmatter(
        page_type=str(data.get("type", "")),
        created=created,
        updated=updated,
        aliases=tuple(_coerce_str_list(data.get("aliases"))),
        tags=tuple(_coerce_str_list(data.get("tags"))),
    )
    return fm, notes


# ---------------------------------------------------------------------------
# pages

def render_page(page: WikiPage) -> str:
    """Canonical page markup; byte-identical for equal inputs."""
    lines = [render_frontmatter(page.frontmatter)]
    lines.append(f"# {page.title}".rstrip())
    lines.append(f"> {page.summary}".rstrip())
    lines.append("")
    lines.append(f"## {SECTION_KEY_FACTS}")
    for fact in page.key_facts:
        lines.append(f"- {fact}")
    lines.append("")
    lines.append(f"## {SECTION_RELATED_PAGES}")
    for entry in page.related_pages:
        lines.append(_render_link_entry(entry))
    lines.append("")
    lines.append(f"## {SECTION_RELATED_SOURCES}")
    for entry in page.related_sources:
        lines.append(_render_link_entry(entry))
    return "\n".join(lines) + "\n"


def _render_link_entry(entry: LinkEntry) -> str:
    line = f"- [[{entry.target}]]"
    if entry.note:
        line += f" -- {entry.note}"
    return line


def _gather_bullets(lines: list[str]) -> list[str]:
    """Join bullet lines with their indented continuation lines."""
    items: list[str] = []
    for line in lines:
        if line.startswith("- "):
            items.append(line[2:].strip())
        elif items and line.strip() and (line.startswith(" ") or line.startswith("\t")):
            items[-1] = items[-1] + " " + line.strip()
    return items


def _parse_link_entry(item: str, section: str, notes: list[ParseNote]) -> LinkEntry | None:
    match = WIKILINK_RE.search(item)
    if not match:
        notes.append(ParseNote("unparsable_entry", section=section, detail=item))
        return None
    target = try_parse_path(match.group(1))
    if target is None:
        notes.append(ParseNote("unparsable_entry", section=section, detail=item))
        return None
    rest = item[match.end():]
    note = ""
    if "--" in rest:
        note = rest.split("--", 1)[1].strip()
    return LinkEntry(target=target, note=note)


def parse_page(text: str, path: SlugPath) -> WikiPage:
    """Lenient parse of page markup.

    Missing sections yield empty tuples plus one parse note each; frontmatter
    keys outside the schema are preserved as notes. Only a missing or broken
    frontmatter block raises FrontmatterError.
    """
    block, body = split_frontmatter(text)
    frontmatter, notes = parse_frontmatter(block)

    title = ""
    summary_parts: list[str] = []
    sections: dict[str, list[str]] = {name: [] for name in PAGE_SECTIONS}
    seen_sections: set[str] = set()
    current: str | None = None

    for line in body.split("\n"):
        if line.startswith("## "):
            heading = line[3:].strip()
            if heading in sections:
                current = heading
                seen_sections.add(heading)
            else:
                current = None
                notes.append(ParseNote("unknown_section", section=heading))
            continue
        if line.startswith("# ") and not title:
            title = line[2:].strip()
            current = None
            continue
        if line.startswith(">") and current is None:
            summary_parts.append(line[2:] if line.startswith("> ") else line[1:])
            continue
        if current is not None:
            sections[current].append(line)

    key_facts = tuple(_gather_bullets(sections[SECTION_KEY_FACTS]))
    related_pages = tuple(
        e
        for item in _gather_bullets(sections[SECTION_RELATED_PAGES])
        if (e := _parse_link_entry(item, SECTION_RELATED_PAGES, notes)) is not None
    )
    related_sources = tuple(
        e
        for item in _gather_bullets(sections[SECTION_RELATED_SOURCES])
        if (e := _parse_link_entry(item, SECTION_RELATED_SOURCES, notes)) is not None
    )
    for name in PAGE_SECTIONS:
        if name not in seen_sections:
            notes.append(ParseNote("missing_section", section=name))
    if not title:
        notes.append(ParseNote("missing_title"))

    return WikiPage(
        path=path,
        frontmatter=frontmatter,
        title=title,
        summary=" ".join(p.strip() for p in summary_parts if p.strip()),
        key_facts=key_facts,
        related_pages=related_pages,
        related_sources=related_sources,
        parse_notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# directory indices

_TRAILING_TAGS_RE = re.compile(r"(?:\s+#[^\s#]+)+$")


def render_index(index: DirectoryIndex) -> str:
    """Canonical directory-index markup; page_count recomputed on every render."""
    lines = [f"# {index.directory.capitalize()}", f"> {index.page_count} pages"]
    for section in index.sections:
        lines.append("")
        lines.append(f"## {section.heading}")
        for entry in section.entries:
            lines.append(_render_index_entry(entry))
    return "\n".join(lines) + "\n"


def _render_index_entry(entry: IndexEntry) -> str:
    line = f"- [[{entry.link.slug}]]"
    if entry.aliases:
        line += f" ({', '.join(entry.aliases)})"
    if entry.summary:
        line += f" -- {entry.summary}"
    if entry.tags:
        line += " " + " ".join(f"#{t}" for t in entry.tags)
    return line


def _parse_index_entry(
    item: str, directory: str, notes: list[ParseNote]
) -> IndexEntry | None:
    match = WIKILINK_RE.search(item)
    if not match:
        notes.append(ParseNote("unparsable_entry", section="index", detail=item))
        return None
    raw = match.group(1).strip()
    link = try_parse_path(raw)
    if link is None:
        # Bare [[Slug]] resolves against this index's own directory.
        link = try_parse_path(f"{directory}/{raw}")
    if link is None or link.directory != directory:
        notes.append(ParseNote("unparsable_entry", section="index", detail=item))
        return None

    rest = item[match.end():].strip()
    tags: tuple[str, ...] = ()
    tag_match = _TRAILING_TAGS_RE.search(rest)
    if tag_match:
        tags = tuple(t.lstrip("#") for t in tag_match.group(0).split())
        rest = rest[: tag_match.start()].rstrip()
    elif rest.startswith("#"):
        tags = tuple(t.lstrip("#") for t in rest.split() if t.startswith("#"))
        rest = ""
    aliases: tuple[str, ...] = ()
    if rest.startswith("("):
        close = rest.find(")")
        if close != -1:
            inner = rest[1:close].strip()
            aliases = tuple(a.strip() for a in inner.split(",")) if inner else ()
            rest = rest[close + 1:].strip()
    summary = rest.split("--", 1)[1].strip() if "--" in rest else ""
    return IndexEntry(link=link, aliases=aliases, summary=summary, tags=tags)


def parse_index(text: str, directory: str) -> DirectoryIndex:
    """Lenient parse of a ``_index.md`` body; unparsable entries are skipped
    with a parse note, and the page-count line is ignored (always derived)."""
    body = text
    if text.startswith("---"):
        try:
            _, body = split_frontmatter(text)
        except FrontmatterError:
            body = text

    notes: list[ParseNote] = []
    sections: list[IndexSection] = []
    heading: str | None = None
    pending: list[str] = []

    def flush() -> None:
        nonlocal pending
        if heading is None:
            pending = []
            return
        entries = tuple(
            e
            for item in _gather_bullets(pending)
            if (e := _parse_index_entry(item, directory, notes)) is not None
        )
        sections.append(IndexSection(heading=heading, entries=entries))
        pending = []

    for line in body.split("\n"):
        if line.startswith("## "):
            flush()
            heading = line[3:].strip()
        elif line.startswith("# ") or line.startswith(">"):
            continue
        else:
            pending.append(line)
    flush()

    return DirectoryIndex(
        directory=directory, sections=tuple(sections), parse_notes=tuple(notes)
    )


# ---------------------------------------------------------------------------
# global index

GLOBAL_TITLE = "Wiki Directory Overview"
CATALOG_HEADING = "Directory Catalog"


def render_global_index(gi: GlobalIndex) -> str:
    lines = [f"# {GLOBAL_TITLE}", ""]
    lines.append(f"> {gi.overview}".rstrip())
    lines.append("")
    lines.append(f"## {CATALOG_HEADING}")
    for directory, description in gi.catalog:
        lines.append(f"- {directory}/ -- {description}")
    return "\n".join(lines) + "\n"


_CATALOG_ENTRY_RE = re.compile(r"^- ([A-Za-z0-9_/-]+)/ -- (.*)$")


def parse_global_index(text: str) -> GlobalIndex:
    overview_parts: list[str] = []
    catalog: list[tuple[str, str]] = []
    seen: set[str] = set()
    for line in text.split("\n"):
        if line.startswith(">"):
            part = line[2:] if line.startswith("> ") else line[1:]
            if part.strip():
                overview_parts.append(part.strip())
            continue
        match = _CATALOG_ENTRY_RE.match(line)
        if match and match.group(1) not in seen:
            seen.add(match.group(1))
            catalog.append((match.group(1), match.group(2).strip()))
    return GlobalIndex(overview=" ".join(overview_parts), catalog=tuple(catalog))


# ---------------------------------------------------------------------------
# source records

def render_source(record: SourceRecord) -> str:
    return f"---\nsource_id: {record.source_id}\n---\n{record.text}\n"


def parse_source(text: str, path: SlugPath) -> SourceRecord:
    kind = "digest" if path.directory == DIGESTS_DIR else "article"
    source_id = path.slug
    body = text
    if text.startswith("---"):
        try:
            block, body = split_frontmatter(text)
            data = yaml.safe_load(block) or {}
            if isinstance(data, dict) and "source_id" in data:
                source_id = str(data["source_id"])
        except (FrontmatterError, yaml.YAMLError):
            body = text
    return SourceRecord(kind=kind, path=path, source_id=source_id, text=body.strip("\n"))

"""Brute-force structural-validation oracle and corruption seeding.

The oracle re-implements the detection rules from scratch (own link regex,
own path parsing, own union construction) and reports a multiset of
(error type, path) pairs for comparison with the production validator.
"""

from __future__ import annotations

import dataclasses
import random
import re
from collections import Counter

from agentwiki.model import (
    DIGESTS_DIR,
    DirectoryIndex,
    IndexEntry,
    IndexSection,
    LinkEntry,
    SlugPath,
    UpdateSet,
    WikiSnapshot,
)

from conftest import rand_page, rand_text, rand_wiki

_LINK = re.compile(r"\[\[([^\[\]|]+)(?:\|[^\[\]]*)?\]\]")
_DIR_SEG = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")
_SLUG = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def _oracle_parse(inner: str) -> str | None:
    inner = inner.strip()
    if "/" not in inner:
        return None
    directory, slug = inner.rsplit("/", 1)
    segments = directory.split("/")
    if not segments or not all(_DIR_SEG.match(s) for s in segments):
        return None
    if not _SLUG.match(slug):
        return None
    return f"{directory}/{slug}"


def oracle_structural(
    snapshot: WikiSnapshot, updates: UpdateSet, selected: set[SlugPath]
) -> Counter:
    pages = dict(snapshot.pages)
    sources = dict(snapshot.sources)
    indices = dict(snapshot.indices)
    for path in updates.deletions:
        pages.pop(path, None)
        sources.pop(path, None)
    for path, page in updates.page_writes:
        pages[path] = page
    for record in updates.source_writes:
        sources[record.path] = record
    for directory, index in updates.index_edits:
        indices[directory] = index

    resolvable = {str(p) for p in pages} | {str(p) for p in sources}
    found: Counter = Counter()

    for path, _ in updates.page_writes:
        if path in snapshot.pages and path not in selected:
            found[("unseen_overwrite", str(path))] += 1

    for path, page in pages.items():
        incomplete = (
            not page.title.strip()
            or not page.summary.strip()
            or not page.key_facts
            or not page.related_sources
        )
        if incomplete:
            found[("incomplete_page", str(path))] += 1

        for entry in page.related_sources:
            if entry.target.directory != DIGESTS_DIR:
                found[("malformed_ref", str(path))] += 1
            elif str(entry.target) not in resolvable:
                found[("dangling_link", str(path))] += 1
        for note in page.parse_notes:
            if note.kind == "unparsable_entry" and note.section == "Related Sources":
                found[("malformed_ref", str(path))] += 1

        for entry in page.related_pages:
            if str(entry.target) not in resolvable:
                found[("dangling_link", str(path))] += 1

        texts = (
            [page.summary]
            + list(page.key_facts)
            + [e.note for e in page.related_pages]
            + [e.note for e in page.related_sources]
        )
        for text in texts:
            for match in _LINK.finditer(text):
                target = _oracle_parse(match.group(1))
                if target is None or target not in resolvable:
                    found[("dangling_link", str(path))] += 1

    for directory in {p.directory for p in pages} | set(indices):
        index = indices.get(directory)
        listed = (
            {e.link for s in index.sections for e in s.entries} if index else set()
        )
        present = {p for p in pages if p.directory == directory}
        for ghost in listed - present:
            found[("index_inconsistency", str(ghost))] += 1
        for unlisted in present - listed:
            found[("index_inconsistency", str(unlisted))] += 1
    return found


def production_multiset(errors) -> Counter:
    return Counter((e.error_type.value, str(e.path)) for e in errors)


# ---------------------------------------------------------------------------
# corruption seeding

def _pick_page(rng: random.Random, pages: dict) -> SlugPath:
    return rng.choice(sorted(pages))


def corrupt_scenario(
    rng: random.Random, max_pages: int = 50
) -> tuple[WikiSnapshot, UpdateSet, set[SlugPath]]:
    """A consistent random wiki plus seeded corruptions covering all five
    structural error types, split across the snapshot and an update set."""
    wiki = rand_wiki(rng, max_pages=max_pages)
    pages = dict(wiki.pages)
    indices = dict(wiki.indices)

    def mutate(path: SlugPath, **changes) -> None:
        pages[path] = dataclasses.replace(pages[path], **changes)

    # dangling link inside a fact
    path = _pick_page(rng, pages)
    ghost = f"{path.directory}/Ghost-{rng.randint(1, 999)}"
    mutate(path, key_facts=pages[path].key_facts + (f"see [[{ghost}]] for more",))

    # dangling related-pages entry
    path = _pick_page(rng, pages)
    mutate(
        path,
        related_pages=pages[path].related_pages
        + (LinkEntry(SlugPath(path.directory, f"Missing-{rng.randint(1, 999)}"), "gone"),),
    )

    # a bare, directory-less link
    if rng.random() < 0.5:
        path = _pick_page(rng, pages)
        mutate(path, key_facts=pages[path].key_facts + ("see [[BareSlug]]",))

    # malformed source citation (wrong directory)
    path = _pick_page(rng, pages)
    wrong_dir = rng.choice(["sources/articles", "people", "media"])
    mutate(
        path,
        related_sources=pages[path].related_sources
        + (LinkEntry(SlugPath(wrong_dir, "src-0"), "mis-cited"),),
    )

    # incomplete page
    path = _pick_page(rng, pages)
    strip = rng.choice(["key_facts", "related_sources", "summary"])
    mutate(path, **{strip: () if strip != "summary" else ""})

    # stale index entry
    directory = rng.choice(sorted(indices))
    stale = IndexEntry(link=SlugPath(directory, f"Stale-{rng.randint(1, 999)}"))
    old = indices[directory]
    indices[directory] = DirectoryIndex(
        directory=directory,
        sections=old.sections + (IndexSection("Stale Section", (stale,)),),
    )

    # unlisted page (drop one entry from some index)
    directory = rng.choice(sorted(indices))
    old = indices[directory]
    sections = []
    dropped = False
    for section in old.sections:
        if section.entries and not dropped:
            sections.append(IndexSection(section.heading, section.entries[1:]))
            dropped = True
        else:
            sections.append(section)
    indices[directory] = DirectoryIndex(directory=directory, sections=tuple(sections))

    corrupted = WikiSnapshot(
        pages=pages,
        indices=indices,
        global_index=wiki.global_index,
        sources=wiki.sources,
        revision=wiki.revision,
    )

    # updates: one authorized edit, one unseen overwrite, one new page
    updates = UpdateSet()
    selected: set[SlugPath] = set()
    existing = sorted(pages)
    authorized = rng.choice(existing)
    selected.add(authorized)
    updates.page_writes.append(
        (
            authorized,
            dataclasses.replace(
                pages[authorized],
                key_facts=pages[authorized].key_facts + (rand_text(rng),),
            ),
        )
    )
    unseen_candidates = [p for p in existing if p != authorized]
    if unseen_candidates:
        unseen = rng.choice(unseen_candidates)
        updates.page_writes.append(
            (
                unseen,
                dataclasses.replace(
                    pages[unseen], key_facts=pages[unseen].key_facts + ("tweak",)
                ),
            )
        )
    new_dir = rng.choice(sorted({p.directory for p in pages}))
    digest_pool = [p.slug for p in wiki.sources]
    new_page = rand_page(rng, new_dir, f"Brand-New-{rng.randint(1, 999)}", digest_pool=digest_pool)
    updates.page_writes.append((new_page.path, new_page))
    return corrupted, updates, selected

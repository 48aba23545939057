"""Snapshot I/O and update application.

On-disk layout: ``<root>/index.md`` (global index), ``<dir>/_index.md`` per
knowledge directory, pages as ``<dir>/<Slug>.md``, and source records under
``sources/digests/`` and ``sources/articles/``. Files that are not part of
that layout (logs, the error book, dotfiles) are left alone.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import codec
from .model import (
    ARTICLES_DIR,
    DIGESTS_DIR,
    DirectoryIndex,
    GlobalIndex,
    ModelError,
    SlugPath,
    SourceRecord,
    UpdateSet,
    WikiPage,
    WikiSnapshot,
)


class UpdateError(ValueError):
    """An UpdateSet cannot be applied to the snapshot as given."""


@dataclass
class LoadReport:
    """Files that could not be loaded, with the reason; never silently dropped."""

    skipped: list[tuple[str, str]] = field(default_factory=list)

    def add(self, path: Path | str, reason: str) -> None:
        self.skipped.append((str(path), reason))

    def ok(self) -> bool:
        return not self.skipped


def load_snapshot(root: Path | str) -> tuple[WikiSnapshot, LoadReport]:
    """Load a wiki tree. An empty or missing root yields an empty snapshot."""
    root = Path(root)
    report = LoadReport()
    pages: dict[SlugPath, WikiPage] = {}
    indices: dict[str, DirectoryIndex] = {}
    global_index = GlobalIndex()
    sources: dict[SlugPath, SourceRecord] = {}

    if not root.exists():
        return WikiSnapshot(), report

    global_file = root / "index.md"
    if global_file.is_file():
        global_index = codec.parse_global_index(global_file.read_text(encoding="utf-8"))

    for child in sorted(root.iterdir()):
        if not child.is_dir() or child.name.startswith(".") or child.name == "sources":
            continue
        directory = child.name
        for md in sorted(child.glob("*.md")):
            text = md.read_text(encoding="utf-8")
            if md.name == "_index.md":
                indices[directory] = codec.parse_index(text, directory)
                continue
            try:
                path = SlugPath(directory, md.stem)
            except ModelError as exc:
                report.add(md, str(exc))
                continue
            try:
                pages[path] = codec.parse_page(text, path)
            except codec.FrontmatterError as exc:
                report.add(md, str(exc))

    for source_dir in (DIGESTS_DIR, ARTICLES_DIR):
        folder = root / source_dir
        if not folder.is_dir():
            continue
        for md in sorted(folder.glob("*.md")):
            try:
                path = SlugPath(source_dir, md.stem)
                sources[path] = codec.parse_source(
                    md.read_text(encoding="utf-8"), path
                )
            except ModelError as exc:
                report.add(md, str(exc))

    snapshot = WikiSnapshot(
        pages=pages, indices=indices, global_index=global_index, sources=sources
    )
    return snapshot, report


def write_snapshot(root: Path | str, snapshot: WikiSnapshot) -> None:
    """Materialize the snapshot as a file tree, removing stale wiki files.

    Writes are sorted so two equal snapshots always produce byte-identical
    trees. Non-wiki files inside the root are preserved.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    expected: set[Path] = set()

    global_file = root / "index.md"
    global_file.write_text(
        codec.render_global_index(snapshot.global_index), encoding="utf-8"
    )
    expected.add(global_file)

    for directory in sorted(snapshot.indices):
        target = root / directory / "_index.md"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(codec.render_index(snapshot.indices[directory]), encoding="utf-8")
        expected.add(target)

    for path in sorted(snapshot.pages):
        target = root / path.directory / f"{path.slug}.md"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(codec.render_page(snapshot.pages[path]), encoding="utf-8")
        expected.add(target)

    for path in sorted(snapshot.sources):
        target = root / path.directory / f"{path.slug}.md"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(codec.render_source(snapshot.sources[path]), encoding="utf-8")
        expected.add(target)

    for stale in sorted(root.rglob("*.md")):
        if stale not in expected and not stale.name.startswith("."):
            stale.unlink()
    for folder in sorted(root.rglob("*"), reverse=True):
        if folder.is_dir() and not any(folder.iterdir()):
            folder.rmdir()


def tree_fingerprint(root: Path | str) -> dict[str, str]:
    """Relative path -> file text for every wiki markdown file under root."""
    root = Path(root)
    out: dict[str, str] = {}
    for md in sorted(root.rglob("*.md")):
        out[md.relative_to(root).as_posix()] = md.read_text(encoding="utf-8")
    return out


def apply_updates(snapshot: WikiSnapshot, updates: UpdateSet) -> WikiSnapshot:
    """Apply writes and deletions, returning a new snapshot at revision + 1.

    The input snapshot is never mutated. Raises UpdateError on write/delete
    conflicts, deletions of paths that do not exist, source records whose
    directory contradicts their kind, or page writes aimed at ``sources/``.
    """
    try:
        updates.touched()
    except ModelError as exc:
        raise UpdateError(str(exc)) from exc

    pages = dict(snapshot.pages)
    indices = dict(snapshot.indices)
    sources = dict(snapshot.sources)
    global_index = snapshot.global_index

    for path in updates.deletions:
        if path in pages:
            del pages[path]
        elif path in sources:
            del sources[path]
        else:
            raise UpdateError(f"cannot delete {path}: no such page or source")

    for path, page in updates.page_writes:
        if path.directory in (DIGESTS_DIR, ARTICLES_DIR):
            raise UpdateError(f"page write targets source directory: {path}")
        if path != page.path:
            raise UpdateError(f"page write keyed {path} carries path {page.path}")
        pages[path] = page

    for record in updates.source_writes:
        sources[record.path] = record

    for directory, index in updates.index_edits:
        if index.directory != directory:
            raise UpdateError(
                f"index edit keyed {directory} carries directory {index.directory}"
            )
        indices[directory] = index

    if updates.global_edit is not None:
        global_index = updates.global_edit

    return WikiSnapshot(
        pages=pages,
        indices=indices,
        global_index=global_index,
        sources=sources,
        revision=snapshot.revision + 1,
    )


def union_view(snapshot: WikiSnapshot, updates: UpdateSet) -> WikiSnapshot:
    """The snapshot as it would look after ``updates``, revision unchanged.

    Validators and the auto-fixer resolve links against this union so that a
    link to a page created in the same step is not reported dangling.
    """
    view = apply_updates(snapshot, updates)
    return WikiSnapshot(
        pages=view.pages,
        indices=view.indices,
        global_index=view.global_index,
        sources=view.sources,
        revision=snapshot.revision,
    )


def clear_tree(root: Path | str) -> None:
    """Remove a wiki tree entirely (used by tests and fresh compiles)."""
    root = Path(root)
    if root.exists():
        shutil.rmtree(root)

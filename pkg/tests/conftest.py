"""Shared fixtures: the Anhalt family wiki, the film/director wiki, and
random generators for valid pages, indices, and corrupted mini-wikis."""

from __future__ import annotations

import datetime as dt
import random

import pytest

from agentwiki.model import (
    DIGESTS_DIR,
    DirectoryIndex,
    GlobalIndex,
    IndexEntry,
    IndexSection,
    LinkEntry,
    PageFrontmatter,
    SlugPath,
    SourceRecord,
    WikiPage,
    WikiSnapshot,
)

D1 = dt.date(2024, 1, 5)
D2 = dt.date(2024, 1, 7)


def make_page(
    directory,
    slug,
    title,
    summary,
    facts,
    related_pages=(),
    related_sources=(),
    page_type=None,
    aliases=(),
    tags=(),
):
    path = SlugPath(directory, slug)
    return WikiPage(
        path=path,
        frontmatter=PageFrontmatter(
            page_type=page_type or directory,
            created=D1,
            updated=D2,
            aliases=tuple(aliases),
            tags=tuple(tags),
        ),
        title=title,
        summary=summary,
        key_facts=tuple(facts),
        related_pages=tuple(LinkEntry(SlugPath.parse(t), n) for t, n in related_pages),
        related_sources=tuple(
            LinkEntry(SlugPath(DIGESTS_DIR, s), n) for s, n in related_sources
        ),
    )


def make_digest(slug, text, source_id=None):
    return SourceRecord(
        kind="digest",
        path=SlugPath(DIGESTS_DIR, slug),
        source_id=source_id or slug,
        text=text,
    )


def index_for(snapshot_pages, directory, heading):
    """A single-section index listing every page of the directory."""
    entries = tuple(
        IndexEntry(
            link=p.path,
            aliases=p.frontmatter.aliases,
            summary=p.summary,
            tags=tuple(t.replace(" ", "-") for t in p.frontmatter.tags),
        )
        for p in sorted(snapshot_pages, key=lambda p: p.path)
        if p.path.directory == directory
    )
    return DirectoryIndex(directory=directory, sections=(IndexSection(heading, entries),))


# ---------------------------------------------------------------------------
# the Anhalt family fixture (source of the traced Q&A example)

JOHN_V = "people/John-V-Prince-of-Anhalt-Zerbst"
ERNEST_I = "people/Ernest-I-Prince-of-Anhalt-Dessau"
KARL_I = "people/Karl-I-Prince-of-Anhalt-Zerbst"


def build_anhalt_pages():
    john = make_page(
        "people",
        "John-V-Prince-of-Anhalt-Zerbst",
        "John V, Prince of Anhalt-Zerbst",
        "German prince of the House of Ascania who ruled Anhalt-Dessau and "
        "later the re-created principality of Anhalt-Zerbst from 1544",
        [
            "John V was born on 4 September 1504 in Dessau and died on "
            "4 February 1551 in Zerbst",
            "John V was the second but eldest surviving son of Ernest I, "
            "Prince of Anhalt-Dessau",
            "Mother was Margarete, daughter of Henry I, Duke of Munsterberg-Oels",
            "Great-grandson of George of Podebrady, King of Bohemia",
            "Married Margaret, daughter of Joachim I Nestor, Elector of Brandenburg",
            "Karl I, Prince of Anhalt-Zerbst was the eldest son of John V",
        ],
        related_pages=[
            (ERNEST_I, "father of John V"),
            (KARL_I, "eldest son and successor of John V"),
        ],
        related_sources=[
            ("john-v-prince-anhalt-zerbst", "Wikipedia paragraph about John V"),
            (
                "karl-i-prince-of-anhalt-zerbst",
                "Wikipedia paragraph about Karl I mentioning John V",
            ),
        ],
        aliases=[
            "John V of Anhalt-Zerbst",
            "Johann V von Anhalt-Zerbst",
            "Prince John V of Anhalt-Zerbst",
        ],
        tags=[
            "German nobility",
            "House of Ascania",
            "Prince",
            "Anhalt-Zerbst",
            "Anhalt-Dessau",
        ],
    )
    ernest = make_page(
        "people",
        "Ernest-I-Prince-of-Anhalt-Dessau",
        "Ernest I, Prince of Anhalt-Dessau",
        "German prince of the House of Ascania who ruled Anhalt-Dessau until 1516",
        [
            "Ernest I was born around 1454 in Dessau",
            "Ernest I died on 12 June 1516 in Dessau",
            "Ernest I was the father of John V, Prince of Anhalt-Zerbst",
        ],
        related_pages=[(JOHN_V, "second but eldest surviving son of Ernest I")],
        related_sources=[
            ("ernest-i-prince-of-anhalt-dessau", "Wikipedia paragraph about Ernest I")
        ],
        aliases=["Ernest I of Anhalt-Dessau", "Ernst I von Anhalt-Dessau"],
        tags=["German nobility", "House of Ascania", "Prince"],
    )
    karl = make_page(
        "people",
        "Karl-I-Prince-of-Anhalt-Zerbst",
        "Karl I, Prince of Anhalt-Zerbst",
        "German prince of the House of Ascania, eldest son of John V",
        [
            "Karl I was the eldest son of John V, Prince of Anhalt-Zerbst",
            "Karl I ruled the principality of Anhalt-Zerbst after 1551",
        ],
        related_pages=[(JOHN_V, "father of Karl I")],
        related_sources=[
            ("karl-i-prince-of-anhalt-zerbst", "Wikipedia paragraph about Karl I")
        ],
        aliases=["Karl I of Anhalt-Zerbst"],
        tags=["German nobility", "House of Ascania", "Prince"],
    )
    margarete = make_page(
        "people",
        "Margarete-of-Munsterberg",
        "Margarete of Munsterberg",
        "Daughter of Henry I, Duke of Munsterberg-Oels, and mother of John V",
        [
            "Margarete was the daughter of Henry I, Duke of Munsterberg-Oels",
            "Margarete married Ernest I, Prince of Anhalt-Dessau",
        ],
        related_pages=[(ERNEST_I, "husband of Margarete")],
        related_sources=[
            ("margarete-of-munsterberg", "Wikipedia paragraph about Margarete")
        ],
        aliases=["Margarete von Munsterberg"],
        tags=["German nobility"],
    )
    chronicle = make_page(
        "media",
        "The-Ascania-Chronicle",
        "The Ascania Chronicle",
        "Chronicle covering the princes of the House of Ascania",
        ["The Ascania Chronicle records the reigns of the Anhalt princes"],
        related_pages=[(JOHN_V, "chronicled prince")],
        related_sources=[("the-ascania-chronicle", "paragraph about the chronicle")],
        aliases=["Ascania Chronicle"],
        tags=["chronicle"],
    )
    documentary = make_page(
        "media",
        "Anhalt-Heritage",
        "Anhalt Heritage",
        "Documentary about the Anhalt principalities",
        ["Anhalt Heritage covers Dessau and Zerbst"],
        related_pages=[(KARL_I, "featured prince")],
        related_sources=[("anhalt-heritage", "paragraph about the documentary")],
        aliases=[],
        tags=["documentary"],
    )
    return [john, ernest, karl, margarete, chronicle, documentary]


@pytest.fixture
def anhalt_snapshot() -> WikiSnapshot:
    pages = build_anhalt_pages()
    digests = [
        make_digest(
            "john-v-prince-anhalt-zerbst",
            "John V (4 September 1504 - 4 February 1551) was a German prince "
            "of the House of Ascania, the second but eldest surviving son of "
            "Ernest I, Prince of Anhalt-Dessau. From 1544 he ruled the "
            "re-created principality of Anhalt-Zerbst.",
            source_id="2wiki-john-v",
        ),
        make_digest(
            "ernest-i-prince-of-anhalt-dessau",
            "Ernest I (around 1454 - 12 June 1516) ruled Anhalt-Dessau and "
            "died on 12 June 1516 in Dessau. He was the father of John V.",
            source_id="2wiki-ernest-i",
        ),
        make_digest(
            "karl-i-prince-of-anhalt-zerbst",
            "Karl I, the eldest son of John V, Prince of Anhalt-Zerbst, "
            "ruled Anhalt-Zerbst after 1551.",
            source_id="2wiki-karl-i",
        ),
        make_digest(
            "margarete-of-munsterberg",
            "Margarete, daughter of Henry I, Duke of Munsterberg-Oels, "
            "married Ernest I, Prince of Anhalt-Dessau.",
            source_id="2wiki-margarete",
        ),
        make_digest(
            "the-ascania-chronicle",
            "The Ascania Chronicle records the reigns of the Anhalt princes.",
            source_id="2wiki-chronicle",
        ),
        make_digest(
            "anhalt-heritage",
            "Anhalt Heritage is a documentary covering Dessau and Zerbst.",
            source_id="2wiki-heritage",
        ),
    ]
    indices = {
        "people": index_for(pages, "people", "German Nobility"),
        "media": index_for(pages, "media", "Chronicles and Documentaries"),
    }
    return WikiSnapshot(
        pages={p.path: p for p in pages},
        indices=indices,
        global_index=GlobalIndex(
            overview="Encyclopedic wiki of the Anhalt principalities and the "
            "House of Ascania",
            catalog=(
                ("media", "chronicles, documentaries, creative works"),
                ("people", "biographies of historical figures"),
                ("sources", "paragraph digests and original archives"),
            ),
        ),
        sources={d.path: d for d in digests},
    )


# ---------------------------------------------------------------------------
# the film/director fixture (4-hop bridge-comparison example)

GAMECOCK = "media/The-Gamecock"
MONSTER = "media/Monster-A-Go-Go"
CAMPANILE = "people/Pasquale-Festa-Campanile"
LEWIS = "people/Herschell-Gordon-Lewis"
REBANE = "people/Bill-Rebane"


@pytest.fixture
def film_snapshot() -> WikiSnapshot:
    gamecock = make_page(
        "media",
        "The-Gamecock",
        "The Gamecock",
        "1974 Italian comedy film directed by Pasquale Festa Campanile",
        ["The Gamecock was directed by Pasquale Festa Campanile"],
        related_pages=[(CAMPANILE, "director of The Gamecock")],
        related_sources=[("the-gamecock", "paragraph about the film")],
        tags=["film", "comedy"],
    )
    monster = make_page(
        "media",
        "Monster-A-Go-Go",
        "Monster A Go-Go",
        "1965 American science fiction horror film directed by Bill Rebane "
        "and Herschell Gordon Lewis",
        [
            "Monster A Go-Go was directed by Bill Rebane and Herschell Gordon Lewis",
        ],
        related_pages=[
            (REBANE, "director of Monster A Go-Go"),
            (LEWIS, "director who completed Monster A Go-Go"),
        ],
        related_sources=[("monster-a-go-go", "paragraph about the film")],
        aliases=["Monster a Go-Go"],
        tags=["film", "horror"],
    )
    campanile = make_page(
        "people",
        "Pasquale-Festa-Campanile",
        "Pasquale Festa Campanile",
        "Italian film director born on 28 July 1927",
        ["Pasquale Festa Campanile was born on 28 July 1927 in Melfi"],
        related_pages=[(GAMECOCK, "film directed by Campanile")],
        related_sources=[("pasquale-festa-campanile", "paragraph about Campanile")],
        tags=["director"],
    )
    lewis = make_page(
        "people",
        "Herschell-Gordon-Lewis",
        "Herschell Gordon Lewis",
        "American filmmaker born on 15 June 1926",
        ["Herschell Gordon Lewis was born on 15 June 1926 in Pittsburgh"],
        related_pages=[(MONSTER, "film completed by Lewis")],
        related_sources=[("herschell-gordon-lewis", "paragraph about Lewis")],
        tags=["director"],
    )
    rebane = make_page(
        "people",
        "Bill-Rebane",
        "Bill Rebane",
        "American filmmaker born on 8 April 1937",
        ["Bill Rebane was born on 8 April 1937 in Riga"],
        related_pages=[(MONSTER, "film begun by Rebane")],
        related_sources=[("bill-rebane", "paragraph about Rebane")],
        tags=["director"],
    )
    distractor = make_page(
        "media",
        "The-Mask-of-the-Gorilla",
        "The Mask of the Gorilla",
        "1958 French crime film",
        ["The Mask of the Gorilla is a 1958 French crime film"],
        related_sources=[("the-mask-of-the-gorilla", "paragraph about the film")],
        tags=["film"],
    )
    pages = [gamecock, monster, campanile, lewis, rebane, distractor]
    digests = [
        make_digest("the-gamecock", "The Gamecock is a 1974 Italian comedy film."),
        make_digest(
            "monster-a-go-go",
            "Monster A Go-Go is a 1965 film begun by Bill Rebane and completed "
            "by Herschell Gordon Lewis.",
        ),
        make_digest(
            "pasquale-festa-campanile",
            "Pasquale Festa Campanile was born on 28 July 1927.",
        ),
        make_digest(
            "herschell-gordon-lewis",
            "Herschell Gordon Lewis was born on 15 June 1926.",
        ),
        make_digest("bill-rebane", "Bill Rebane was born on 8 April 1937."),
        make_digest(
            "the-mask-of-the-gorilla", "The Mask of the Gorilla is a 1958 film."
        ),
    ]
    return WikiSnapshot(
        pages={p.path: p for p in pages},
        indices={
            "media": index_for(pages, "media", "Films"),
            "people": index_for(pages, "people", "Film Directors"),
        },
        global_index=GlobalIndex(
            overview="Films and the people who made them",
            catalog=(
                ("media", "films and creative works"),
                ("people", "biographies of directors"),
            ),
        ),
        sources={d.path: d for d in digests},
    )


# ---------------------------------------------------------------------------
# random generators (plain random.Random for seed control)

WORDS = (
    "prince duke river castle village chronicle treaty harbor "
    "mountain abbey battle crown herald march province"
).split()


def rand_word(rng: random.Random) -> str:
    return rng.choice(WORDS)


def rand_slug(rng: random.Random) -> str:
    parts = [rand_word(rng).capitalize() for _ in range(rng.randint(1, 3))]
    return "-".join(parts) + f"-{rng.randint(1, 9999)}"


def rand_text(rng: random.Random, low=3, high=10) -> str:
    return " ".join(rand_word(rng) for _ in range(rng.randint(low, high)))


def rand_page(
    rng: random.Random,
    directory: str,
    slug: str | None = None,
    link_pool: list[str] | None = None,
    digest_pool: list[str] | None = None,
) -> WikiPage:
    """A random page satisfying every model invariant; links and citations are
    drawn from the given pools so they resolve."""
    slug = slug or rand_slug(rng)
    created = dt.date(2020 + rng.randint(0, 4), rng.randint(1, 12), rng.randint(1, 28))
    updated = created + dt.timedelta(days=rng.randint(0, 400))
    n_alias = rng.randint(0, 3)
    aliases = []
    for _ in range(n_alias):
        alias = rand_text(rng, 2, 4).title()
        if alias.casefold() not in [a.casefold() for a in aliases]:
            aliases.append(alias)
    tags = list({rand_word(rng) for _ in range(rng.randint(0, 4))})

    facts = [rand_text(rng) for _ in range(rng.randint(1, 5))]
    related_pages = []
    if link_pool:
        for target in rng.sample(link_pool, min(len(link_pool), rng.randint(0, 2))):
            facts.append(f"{rand_text(rng, 1, 3)} [[{target}]] {rand_text(rng, 1, 3)}")
            related_pages.append((target, rand_text(rng, 1, 4)))
    related_sources = []
    if digest_pool:
        for dslug in rng.sample(digest_pool, min(len(digest_pool), rng.randint(1, 2))):
            related_sources.append((dslug, rand_text(rng, 1, 4)))
    else:
        related_sources.append((slug.lower(), rand_text(rng, 1, 4)))

    return make_page(
        directory,
        slug,
        title=rand_text(rng, 2, 5).title(),
        summary=rand_text(rng, 4, 12),
        facts=facts,
        related_pages=related_pages,
        related_sources=related_sources,
        aliases=aliases,
        tags=tags,
    )


def rand_wiki(rng: random.Random, max_pages: int = 50) -> WikiSnapshot:
    """A consistent random wiki: every link resolves, every cited digest
    exists, every directory index lists exactly its pages."""
    directories = rng.sample(["people", "media", "history", "geography"], rng.randint(1, 3))
    n_pages = rng.randint(2, max_pages)
    slugs = {d: [] for d in directories}
    for i in range(n_pages):
        d = rng.choice(directories)
        slugs[d].append(f"{rand_slug(rng)}-p{i}")

    digest_slugs = [f"src-{i}" for i in range(rng.randint(2, 6))]
    digests = {
        SlugPath(DIGESTS_DIR, s): make_digest(s, rand_text(rng, 8, 20))
        for s in digest_slugs
    }

    all_paths = [f"{d}/{s}" for d in directories for s in slugs[d]]
    pages = {}
    for d in directories:
        for s in slugs[d]:
            pool = [p for p in all_paths if p != f"{d}/{s}"]
            page = rand_page(rng, d, s, link_pool=pool, digest_pool=digest_slugs)
            pages[page.path] = page

    indices = {
        d: index_for(pages.values(), d, rand_text(rng, 1, 3).title())
        for d in directories
    }
    return WikiSnapshot(
        pages=pages,
        indices=indices,
        global_index=GlobalIndex(
            overview=rand_text(rng, 6, 15),
            catalog=tuple((d, rand_text(rng, 2, 5)) for d in sorted(directories)),
        ),
        sources=digests,
    )

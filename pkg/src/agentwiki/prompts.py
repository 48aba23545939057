"""Prompt builders for every pipeline stage.

Kept in one place so tests can target stages by purpose without depending on
exact wording, and so protocol tokens (verdict first-liners, directive
keywords, the file-block envelope) stay consistent across modules.
"""

from __future__ import annotations

from .llm import LlmRequest, request

FILE_BLOCK_FORMAT = (
    "Write every file you create or modify as a full replacement, one block "
    "per file, in exactly this envelope:\n"
    "=== FILE: <directory>/<Slug>.md ===\n"
    "<complete file content>\n"
    "Use `<dir>/_index.md` for a directory index and `index.md` for the "
    "global index."
)

PAGE_SCHEMA_HINT = (
    "A knowledge page is Markdown with YAML frontmatter (keys: type, created, "
    "updated, aliases, tags), then `# Title`, a one-line `> summary` "
    "blockquote, and the sections `## Key Facts`, `## Related Pages`, "
    "`## Related Sources`. Wikilinks are always directory-qualified, "
    "`[[dir/Slug]]`; every source citation is `[[sources/digests/<slug>]]`."
)


def select_pages(global_index_text: str, index_digest: str, passage_text: str) -> LlmRequest:
    user = (
        "Pick the existing wiki pages most relevant to this passage. "
        "Reply with one `directory/Slug` path per line and nothing else; "
        "reply NONE if no existing page is relevant.\n\n"
        f"## Wiki overview\n{global_index_text}\n"
        f"## Directory indices\n{index_digest}\n"
        f"## Passage\n{passage_text}"
    )
    return request("select", user)


def compile_updates(
    passage_title: str,
    passage_text: str,
    digest_slug: str,
    selected_texts: list[tuple[str, str]],
    constraints: list[str],
) -> LlmRequest:
    parts = [
        "Fold the passage below into the wiki: update the selected pages, "
        "create new pages where needed, and keep every directory `_index.md` "
        "in step with the pages it lists.",
        PAGE_SCHEMA_HINT,
        FILE_BLOCK_FORMAT,
        f"Cite this passage as [[sources/digests/{digest_slug}]].",
    ]
    if constraints:
        parts.append("Constraints:\n" + "\n".join(f"- {c}" for c in constraints))
    for path, text in selected_texts:
        parts.append(f"## Selected page {path}\n{text}")
    parts.append(f"## Passage: {passage_title}\n{passage_text}")
    return request("compile", "\n\n".join(parts))


def digest_passage(passage_title: str, passage_text: str) -> LlmRequest:
    user = (
        "Summarize this passage as a single dense paragraph that keeps every "
        "name, date, and relationship. Reply with the paragraph only.\n\n"
        f"{passage_title}\n{passage_text}"
    )
    return request("digest", user)


def attribute_error(error_type: str, phenomenon: str, examples: list[str]) -> LlmRequest:
    user = (
        "A recurring defect was detected while compiling wiki pages. "
        "Name its root cause and a reusable rule that prevents it. Reply with "
        "exactly two lines:\nROOT_CAUSE: <one sentence>\n"
        "CONSTRAINT: <one imperative sentence>\n\n"
        f"Defect type: {error_type}\nPhenomenon: {phenomenon}\n"
        + "\n".join(f"Instance: {e}" for e in examples[:5])
    )
    return request("attribute", user)


def verify_fact(fact: str, digest_texts: list[str]) -> LlmRequest:
    user = (
        "Is the fact fully supported by the source digests below? First line "
        "of your reply must be exactly ENTAILED or NOT_ENTAILED.\n\n"
        f"Fact: {fact}\n\n"
        + "\n\n".join(f"Digest:\n{t}" for t in digest_texts)
    )
    return request("verify_fact", user)


def check_consistency(
    path_a: str, facts_a: list[str], path_b: str, facts_b: list[str]
) -> LlmRequest:
    user = (
        "Do these two linked pages state conflicting attributes, dates, or "
        "relations? First line of your reply must be exactly CONSISTENT or "
        "CONTRADICTION.\n\n"
        f"Page {path_a} facts:\n" + "\n".join(f"- {f}" for f in facts_a)
        + f"\n\nPage {path_b} facts:\n" + "\n".join(f"- {f}" for f in facts_b)
    )
    return request("consistency", user)


def periodic_fix(
    page_path: str,
    page_text: str,
    digest_texts: list[str],
    constraints: list[str],
) -> LlmRequest:
    parts = [
        f"Rewrite the wiki page {page_path} so it satisfies the rules below, "
        "grounding every fact in the cited digests. Reply with the complete "
        "corrected file in the envelope:\n"
        f"=== FILE: {page_path}.md ===\n<content>",
        "Rules:\n" + "\n".join(f"- {c}" for c in constraints),
        f"## Current page\n{page_text}",
    ]
    for text in digest_texts:
        parts.append(f"## Cited digest\n{text}")
    return request("periodic_fix", "\n\n".join(parts))


AGENT_GUIDE = (
    "You answer questions by traversing a wiki with two tools. Reply with "
    "exactly one directive per turn:\n"
    '  SEARCH "<query>"        search the wiki index\n'
    "  READ <path>[, <path>]   read pages, directory indices (_index.md), or sources\n"
    "  ANSWER <final answer>   give the final answer (only after reading)\n"
    "Pick a strategy for the question: Direct access (search a known entity, "
    "then read it), Bridge queries (read a page, follow its wikilinks to the "
    "bridging entity), or Exploratory browsing (read directory indices for an "
    "overview, then read promising pages)."
)


def agent_step(question: str, context: str, note: str = "") -> LlmRequest:
    user = f"Question: {question}\n\n{context}"
    if note:
        user += f"\n\nNote: {note}"
    return request("agent_step", user, system=AGENT_GUIDE)


def final_answer(question: str, context: str, reason: str) -> LlmRequest:
    user = (
        f"Question: {question}\n\n{context}\n\n"
        f"{reason} Reply now with `ANSWER <final answer>` using the evidence "
        "gathered so far."
    )
    return request("agent_step", user, system=AGENT_GUIDE)


def sufficiency(question: str, evidence: str) -> LlmRequest:
    user = (
        "Given the evidence read so far, can the question be answered "
        "completely? First line of your reply must be exactly SUFFICIENT or "
        "INSUFFICIENT.\n\n"
        f"Question: {question}\n\nEvidence:\n{evidence}"
    )
    return request("sufficiency", user)

"""The query-time traversal loop.

The agent composes wiki_search and wiki_read calls one directive per turn,
checks evidence sufficiency after each read, and must read at least once
before answering. It stops when it answers with sufficient evidence, when the
tool-call budget is spent, or when too many consecutive searches come back
empty; in the forced cases the final answer is squeezed out of whatever
evidence the trace holds (or left empty if nothing was ever read).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .llm import LlmPort
from .server import ToolService

log = logging.getLogger(__name__)


class ParseFailure(ValueError):
    """The agent reply contained no SEARCH/READ/ANSWER directive."""


@dataclass(frozen=True)
class AgentConfig:
    t_max: int = 15
    patience: int = 3
    search_limit: int = 10

    def __post_init__(self) -> None:
        if self.t_max < 1 or self.patience < 1 or self.search_limit < 1:
            raise ValueError("t_max, patience, and search_limit must be >= 1")


@dataclass(frozen=True)
class Search:
    query: str


@dataclass(frozen=True)
class Read:
    paths: tuple[str, ...]


@dataclass(frozen=True)
class Answer:
    text: str


Directive = Search | Read | Answer


def parse_agent_reply(text: str) -> Directive:
    """First directive line wins. SEARCH takes one quoted query (bare text
    tolerated), READ takes 1..20 comma-separated paths, ANSWER takes the
    remainder of the whole message."""
    lines = text.split("\n")
    for i, line in enumerate(lines):
        stripped = line.strip()
        for keyword in ("SEARCH", "READ", "ANSWER"):
            if not stripped.startswith(keyword):
                continue
            rest = stripped[len(keyword):]
            if rest and rest[0] not in " (:\t\"'":
                continue  # e.g. READING, ANSWERS
            rest = rest.strip().strip(":").strip()
            if rest.startswith("(") and rest.endswith(")"):
                rest = rest[1:-1].strip()
            if keyword == "SEARCH":
                if rest.startswith('"') and rest.count('"') >= 2:
                    rest = rest[1 : rest.index('"', 1)]
                return Search(rest.strip().strip('"'))
            if keyword == "READ":
                paths = [p.strip().strip("[]") for p in rest.split(",")]
                paths = [p for p in paths if p]
                if not paths:
                    raise ParseFailure("READ directive carries no paths")
                return Read(tuple(paths[:20]))
            remainder = rest
            tail = "\n".join(lines[i + 1 :]).strip()
            if tail:
                remainder = f"{remainder}\n{tail}" if remainder else tail
            return Answer(remainder.strip())
    raise ParseFailure("no SEARCH/READ/ANSWER directive found")


@dataclass
class AgentStep:
    step_no: int
    action: dict
    observation: str
    consecutive_empty_searches: int


@dataclass
class AgentTrace:
    question: str
    steps: list[AgentStep] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    answer: str = ""
    termination: str = ""  # sufficient | budget_exhausted | patience_exhausted
    tool_calls_used: int = 0
    wall_time: float = 0.0

    def export(self, path: Path | str) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for step in self.steps:
                fh.write(
                    json.dumps(
                        {
                            "step": step.step_no,
                            "action": step.action,
                            "observation": step.observation,
                            "consecutive_empty_searches": step.consecutive_empty_searches,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
            fh.write(
                json.dumps(
                    {
                        "question": self.question,
                        "answer": self.answer,
                        "termination": self.termination,
                        "tool_calls_used": self.tool_calls_used,
                        "wall_time": self.wall_time,
                        "notes": self.notes,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


class ToolClient:
    """Transport-neutral access to the tool server."""

    def call(self, tool: str, args: dict) -> dict:
        raise NotImplementedError


class LocalToolClient(ToolClient):
    def __init__(self, service: ToolService) -> None:
        self.service = service

    def call(self, tool: str, args: dict) -> dict:
        return self.service.handle({"tool": tool, "args": args})


class HttpToolClient(ToolClient):
    """POSTs to /tool; one retry on transport failure, then the error surfaces."""

    def __init__(self, base_url: str, timeout: float = 30.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def call(self, tool: str, args: dict) -> dict:
        import requests

        body = {"tool": tool, "args": args}
        last_exc: Exception | None = None
        for _ in range(2):
            try:
                resp = requests.post(
                    f"{self.base_url}/tool", json=body, timeout=self.timeout
                )
                resp.raise_for_status()
                return resp.json()
            except requests.RequestException as exc:
                last_exc = exc
        raise RuntimeError(f"tool transport failed twice: {last_exc}")


def _summarize_search(response: dict) -> str:
    hits = response.get("hits", [])
    if not hits:
        return "no hits"
    return f"{len(hits)} hits: " + ", ".join(h["path"] for h in hits)


def _summarize_read(response: dict) -> str:
    parts = []
    for result in response.get("results", []):
        if "error" in result:
            parts.append(f"{result['path']}: {result['error']}")
        else:
            parts.append(f"{result['path']}: ok")
    return "; ".join(parts)


def _format_hits(response: dict) -> str:
    hits = response.get("hits", [])
    if not hits:
        return "(no hits)"
    lines = []
    for hit in hits:
        alias_part = f" ({', '.join(hit['aliases'])})" if hit.get("aliases") else ""
        summary_part = f" -- {hit['summary']}" if hit.get("summary") else ""
        lines.append(f"- {hit['path']}{alias_part}{summary_part}")
    return "\n".join(lines)


def _format_reads(response: dict) -> str:
    parts = []
    for result in response.get("results", []):
        if "error" in result:
            parts.append(f"[{result['path']}] ERROR: {result['error']}")
        else:
            parts.append(f"[{result['path']}]\n{result['text']}")
    return "\n\n".join(parts)


def answer_question(
    question: str,
    tools: ToolClient,
    llm: LlmPort,
    config: AgentConfig = AgentConfig(),
) -> tuple[str, AgentTrace]:
    """Run the traversal loop for one question.

    Guarantees regardless of port behavior: the loop terminates, at most
    ``t_max`` tool calls are spent, and a non-empty answer implies at least
    one successful wiki_read. Two consecutive non-progress turns (unparsable
    replies or rejected answers) give up and force a final answer, recorded
    as budget_exhausted.
    """
    start = time.perf_counter()
    trace = AgentTrace(question=question)
    context_parts: list[str] = []
    evidence_parts: list[str] = []
    note = ""
    consecutive_empty = 0
    non_progress = 0
    has_read = False
    answer_allowed = False

    def context() -> str:
        if not context_parts:
            return "No tool calls made yet."
        return "\n\n".join(context_parts)

    def force_answer(termination: str, reason: str) -> tuple[str, AgentTrace]:
        trace.termination = termination
        if has_read:
            reply = llm.complete(prompts.final_answer(question, context(), reason))
            try:
                directive = parse_agent_reply(reply)
                trace.answer = directive.text if isinstance(directive, Answer) else reply.strip()
            except ParseFailure:
                trace.answer = reply.strip()
        else:
            trace.answer = ""
            trace.notes.append("forced to stop with nothing read; no answer emitted")
        trace.wall_time = time.perf_counter() - start
        return trace.answer, trace

    while True:
        if trace.tool_calls_used >= config.t_max:
            return force_answer("budget_exhausted", "The tool-call budget is spent.")
        if consecutive_empty >= config.patience:
            return force_answer(
                "patience_exhausted",
                f"{consecutive_empty} consecutive searches returned nothing.",
            )

        reply = llm.complete(prompts.agent_step(question, context(), note))
        note = ""
        try:
            directive = parse_agent_reply(reply)
        except ParseFailure as exc:
            non_progress += 1
            trace.notes.append(f"unparsable reply: {exc}")
            if non_progress >= 2:
                return force_answer("budget_exhausted", "Replies stopped parsing.")
            note = (
                "Your last reply had no directive. Reply with exactly one of "
                'SEARCH "<query>", READ <paths>, or ANSWER <text>.'
            )
            continue

        if isinstance(directive, Answer):
            if not has_read:
                non_progress += 1
                trace.notes.append("answer rejected: nothing read yet")
                if non_progress >= 2:
                    return force_answer("budget_exhausted", "No progress being made.")
                note = (
                    "You must READ at least one page before answering. "
                    "Search for and read the relevant pages first."
                )
                continue
            if not answer_allowed:
                non_progress += 1
                trace.notes.append("answer rejected: evidence not judged sufficient")
                if non_progress >= 2:
                    return force_answer("budget_exhausted", "No progress being made.")
                note = (
                    "The evidence read so far was judged insufficient. Gather "
                    "more before answering."
                )
                continue
            trace.steps.append(
                AgentStep(
                    step_no=len(trace.steps) + 1,
                    action={"final_answer": directive.text},
                    observation="",
                    consecutive_empty_searches=consecutive_empty,
                )
            )
            trace.answer = directive.text
            trace.termination = "sufficient"
            trace.wall_time = time.perf_counter() - start
            return trace.answer, trace

        non_progress = 0
        if isinstance(directive, Search):
            response = tools.call(
                "wiki_search", {"query": directive.query, "limit": config.search_limit}
            )
            trace.tool_calls_used += 1
            hits = response.get("hits", [])
            consecutive_empty = 0 if hits else consecutive_empty + 1
            context_parts.append(
                f'STEP {len(trace.steps) + 1}: SEARCH "{directive.query}"\n'
                + _format_hits(response)
            )
            trace.steps.append(
                AgentStep(
                    step_no=len(trace.steps) + 1,
                    action={
                        "tool": "wiki_search",
                        "args": {"query": directive.query, "limit": config.search_limit},
                    },
                    observation=_summarize_search(response),
                    consecutive_empty_searches=consecutive_empty,
                )
            )
            continue

        response = tools.call("wiki_read", {"paths": list(directive.paths)})
        trace.tool_calls_used += 1
        results = response.get("results", [])
        got_any = any("error" not in r for r in results)
        if got_any:
            consecutive_empty = 0
            has_read = True
        text = _format_reads(response)
        context_parts.append(
            f"STEP {len(trace.steps) + 1}: READ {', '.join(directive.paths)}\n{text}"
        )
        if got_any:
            evidence_parts.append(text)
        trace.steps.append(
            AgentStep(
                step_no=len(trace.steps) + 1,
                action={"tool": "wiki_read", "args": {"paths": list(directive.paths)}},
                observation=_summarize_read(response),
                consecutive_empty_searches=consecutive_empty,
            )
        )
        if got_any:
            verdict_reply = llm.complete(
                prompts.sufficiency(question, "\n\n".join(evidence_parts))
            )
            first = next(
                (ln.strip().upper() for ln in verdict_reply.splitlines() if ln.strip()),
                "",
            )
            answer_allowed = first.startswith("SUFFICIENT")
            context_parts.append(
                f"Evidence check: {'SUFFICIENT' if answer_allowed else 'INSUFFICIENT'}"
            )

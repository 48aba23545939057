"""Single abstraction for all model calls, with three interchangeable backends.

* HttpBackend    -- live chat-completions endpoint, temperature 0.
* ScriptedBackend -- deterministic canned responses for tests and offline runs.
* ReplayBackend  -- replays a previously recorded transcript in order.

Every request/response pair is appended to the port's transcript with a
sequence number, so a full pipeline run can be re-executed byte-identically
through a ReplayBackend.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import requests

PURPOSES = (
    "select",
    "compile",
    "digest",
    "attribute",
    "verify_fact",
    "consistency",
    "periodic_fix",
    "agent_step",
    "sufficiency",
)


class PortUnavailable(RuntimeError):
    """The live backend could not complete a transport call."""


class UnscriptedRequest(RuntimeError):
    """The scripted backend has no rule left that matches this request."""


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    text: str


@dataclass(frozen=True)
class LlmRequest:
    purpose: str
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose {self.purpose!r}")
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("request needs at least one user message")

    def flat_text(self) -> str:
        return "\n".join(m.text for m in self.messages)

    def digest(self) -> str:
        return hashlib.sha256(self.flat_text().encode("utf-8")).hexdigest()[:12]


def request(purpose: str, user: str, system: str = "") -> LlmRequest:
    messages: list[Message] = []
    if system:
        messages.append(Message("system", system))
    messages.append(Message("user", user))
    return LlmRequest(purpose=purpose, messages=tuple(messages))


@dataclass
class ScriptedRule:
    """One canned response: matches on purpose plus ordered substring checks
    over the concatenated messages. Rules are tried in registration order and
    skipped once ``max_uses`` is exhausted."""

    purpose: str
    contains: tuple[str, ...] = ()
    response: str = ""
    max_uses: int | None = None
    uses: int = 0

    def matches(self, req: LlmRequest) -> bool:
        if self.purpose != req.purpose:
            return False
        if self.max_uses is not None and self.uses >= self.max_uses:
            return False
        text = req.flat_text()
        pos = 0
        for needle in self.contains:
            found = text.find(needle, pos)
            if found == -1:
                return False
            pos = found + len(needle)
        return True


class ScriptedBackend:
    def __init__(self, rules: list[ScriptedRule] | None = None) -> None:
        self.rules = list(rules or [])

    def add(
        self,
        purpose: str,
        response: str,
        contains: tuple[str, ...] | list[str] = (),
        max_uses: int | None = None,
    ) -> "ScriptedBackend":
        self.rules.append(
            ScriptedRule(
                purpose=purpose,
                contains=tuple(contains),
                response=response,
                max_uses=max_uses,
            )
        )
        return self

    def complete(self, req: LlmRequest) -> str:
        for rule in self.rules:
            if rule.matches(req):
                rule.uses += 1
                return rule.response
        raise UnscriptedRequest(
            f"no scripted rule for purpose={req.purpose} prompt_digest={req.digest()}"
        )


class HttpBackend:
    """Chat-completions style endpoint; decoding is pinned to temperature 0."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        token: str | None = None,
        timeout: float = 120.0,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.token = token
        self.timeout = timeout

    def complete(self, req: LlmRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        payload = {
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": m.role, "content": m.text} for m in req.messages],
        }
        try:
            resp = requests.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise PortUnavailable(f"live completion failed: {exc}") from exc


class ReplayBackend:
    """Feeds back recorded responses in sequence order."""

    def __init__(self, entries: list[dict]) -> None:
        self.entries = sorted(entries, key=lambda e: e["seq"])
        self._cursor = 0

    def complete(self, req: LlmRequest) -> str:
        if self._cursor >= len(self.entries):
            raise PortUnavailable("transcript exhausted")
        entry = self.entries[self._cursor]
        self._cursor += 1
        if entry["purpose"] != req.purpose:
            raise PortUnavailable(
                f"transcript out of step: recorded {entry['purpose']}, "
                f"requested {req.purpose} at seq {entry['seq']}"
            )
        return entry["response"]


@dataclass
class TranscriptEntry:
    seq: int
    purpose: str
    request: list[dict]
    response: str

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "purpose": self.purpose,
            "request": self.request,
            "response": self.response,
        }


class LlmPort:
    """Wraps a backend with an append-ordered transcript; thread-safe."""

    def __init__(self, backend, transcript_path: Path | str | None = None) -> None:
        self.backend = backend
        self.transcript: list[TranscriptEntry] = []
        self._transcript_path = Path(transcript_path) if transcript_path else None
        self._lock = threading.Lock()

    def complete(self, req: LlmRequest) -> str:
        with self._lock:
            response = self.backend.complete(req)
            entry = TranscriptEntry(
                seq=len(self.transcript),
                purpose=req.purpose,
                request=[{"role": m.role, "text": m.text} for m in req.messages],
                response=response,
            )
            self.transcript.append(entry)
            if self._transcript_path is not None:
                with self._transcript_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry.to_json(), ensure_ascii=False) + "\n")
            return response


def load_script(path: Path | str) -> ScriptedBackend:
    """Script file: JSON list of {purpose, contains?, response, max_uses?}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("script file must hold a JSON list of rules")
    backend = ScriptedBackend()
    for i, raw in enumerate(data):
        try:
            backend.add(
                purpose=raw["purpose"],
                response=raw["response"],
                contains=tuple(raw.get("contains", ())),
                max_uses=raw.get("max_uses"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"script rule {i} is malformed: {exc}") from exc
    return backend


def load_transcript(path: Path | str) -> ReplayBackend:
    entries = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            entries.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"transcript line {i + 1} is not JSON: {exc}") from exc
    return ReplayBackend(entries)

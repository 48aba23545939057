"""Corpus-level evaluation: run the agent over a QA set, score F1/EM, time
each question, and break results down by hop count and question type."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .agent import AgentTrace
from .metrics import answer_f1_em

log = logging.getLogger(__name__)


class EmptyDataset(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    gold_answer: str
    hop_label: int | None = None
    type_label: str | None = None


@dataclass
class ExampleResult:
    id: str
    answer: str
    f1: float
    em: int
    latency_seconds: float
    failed: bool = False
    error: str = ""
    trace_path: str = ""


@dataclass
class EvalSummary:
    n: int
    mean_f1: float
    mean_em: float
    mean_latency_seconds: float
    per_hop: dict[int, dict[str, float]]
    per_type: dict[str, dict[str, float]]
    records: list[ExampleResult] = field(default_factory=list)


def load_qa(path: Path | str) -> list[QAExample]:
    """Line-delimited JSON: {id, question, answer, hop?, type?} per line."""
    examples: list[QAExample] = []
    seen: set[str] = set()
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            example = QAExample(
                id=str(raw["id"]),
                question=str(raw["question"]),
                gold_answer=str(raw["answer"]),
                hop_label=int(raw["hop"]) if "hop" in raw and raw["hop"] is not None else None,
                type_label=str(raw["type"]) if raw.get("type") is not None else None,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"line {lineno}: {exc}") from exc
        if example.id in seen:
            raise DatasetError(f"line {lineno}: duplicate id {example.id!r}")
        seen.add(example.id)
        examples.append(example)
    return examples


def _group_means(
    pairs: list[tuple[object, ExampleResult]]
) -> dict[object, dict[str, float]]:
    groups: dict[object, list[ExampleResult]] = {}
    for key, result in pairs:
        groups.setdefault(key, []).append(result)
    return {
        key: {
            "n": float(len(results)),
            "f1": sum(r.f1 for r in results) / len(results),
            "em": sum(r.em for r in results) / len(results),
        }
        for key, results in groups.items()
    }


def run_eval(
    dataset_path: Path | str,
    agent_factory,
    output_path: Path | str,
    trace_dir: Path | str | None = None,
) -> EvalSummary:
    """Evaluate one agent per example.

    ``agent_factory()`` must return a callable ``question -> (answer, trace)``;
    a fresh one is made per example so no state leaks between questions. An
    agent failure scores 0 and is flagged rather than aborting the run.
    """
    examples = load_qa(dataset_path)
    if not examples:
        raise EmptyDataset(f"no examples in {dataset_path}")
    trace_dir = Path(trace_dir) if trace_dir else None
    if trace_dir:
        trace_dir.mkdir(parents=True, exist_ok=True)

    records: list[ExampleResult] = []
    for example in examples:
        started = time.perf_counter()
        try:
            ask = agent_factory()
            answer, trace = ask(example.question)
            f1, em = answer_f1_em(answer, example.gold_answer)
            result = ExampleResult(
                id=example.id,
                answer=answer,
                f1=f1,
                em=em,
                latency_seconds=time.perf_counter() - started,
            )
            if trace_dir and isinstance(trace, AgentTrace):
                trace_path = trace_dir / f"{example.id}.jsonl"
                trace.export(trace_path)
                result.trace_path = str(trace_path)
        except Exception as exc:  # noqa: BLE001 (one bad example must not kill the run)
            log.warning("example %s failed: %s", example.id, exc)
            result = ExampleResult(
                id=example.id,
                answer="",
                f1=0.0,
                em=0,
                latency_seconds=time.perf_counter() - started,
                failed=True,
                error=str(exc),
            )
        records.append(result)

    n = len(records)
    summary = EvalSummary(
        n=n,
        mean_f1=sum(r.f1 for r in records) / n,
        mean_em=sum(r.em for r in records) / n,
        mean_latency_seconds=sum(r.latency_seconds for r in records) / n,
        per_hop=_group_means(
            [
                (ex.hop_label, res)
                for ex, res in zip(examples, records)
                if ex.hop_label is not None
            ]
        ),
        per_type=_group_means(
            [
                (ex.type_label, res)
                for ex, res in zip(examples, records)
                if ex.type_label is not None
            ]
        ),
        records=records,
    )

    with Path(output_path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(
                json.dumps(
                    {
                        "id": record.id,
                        "answer": record.answer,
                        "f1": record.f1,
                        "em": record.em,
                        "latency_seconds": record.latency_seconds,
                        "failed": record.failed,
                        "error": record.error,
                        "trace_path": record.trace_path,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
        fh.write(
            json.dumps(
                {
                    "summary": {
                        "n": summary.n,
                        "mean_f1": summary.mean_f1,
                        "mean_em": summary.mean_em,
                        "mean_latency_seconds": summary.mean_latency_seconds,
                        "per_hop": {str(k): v for k, v in summary.per_hop.items()},
                        "per_type": summary.per_type,
                    }
                },
                ensure_ascii=False,
            )
            + "\n"
        )
    return summary

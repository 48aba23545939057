"""Operator command line.

Subcommands: compile, validate, repair, errorbook, serve, ask, eval. Exactly
one LLM mode is active per invocation: --llm-endpoint (live), --llm-script
(canned rules), or --llm-replay (recorded transcript); the script and replay
modes make every pipeline stage runnable without network access.

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .agent import AgentConfig, LocalToolClient, answer_question
from .compiler import (
    CompilerConfig,
    CompileState,
    CorpusError,
    compile_corpus,
)
from .errorbook import (
    BookFormatError,
    ErrorBook,
    distribution_report,
    load_book,
    save_book,
)
from .llm import (
    HttpBackend,
    LlmPort,
    PortUnavailable,
    UnscriptedRequest,
    load_script,
    load_transcript,
)
from .model import ModelError, UpdateSet
from .repair import code_auto_fix, finalize, llm_periodic_fix
from .search import build_index
from .server import ToolService, serve_http, serve_stdio
from .snapshot import apply_updates, load_snapshot, write_snapshot
from .evaluation import DatasetError, EmptyDataset, run_eval
from .validation import validate_structural

log = logging.getLogger(__name__)

DEFAULT_TOKEN_VAR = "AGENTWIKI_API_TOKEN"


class CliError(RuntimeError):
    """Operational failure reported to the operator; exits with status 1."""


def _add_llm_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--llm-endpoint", help="live chat-completions endpoint URL")
    group.add_argument("--llm-script", help="JSON file of scripted response rules")
    group.add_argument("--llm-replay", help="recorded transcript to replay")
    parser.add_argument("--model", default="default", help="model name for live calls")
    parser.add_argument(
        "--token-env",
        default=DEFAULT_TOKEN_VAR,
        help="environment variable holding the live API token",
    )
    parser.add_argument("--transcript", help="record all port traffic to this file")


def build_port(args: argparse.Namespace) -> LlmPort:
    if args.llm_script:
        backend = load_script(args.llm_script)
    elif args.llm_replay:
        backend = load_transcript(args.llm_replay)
    elif args.llm_endpoint:
        backend = HttpBackend(
            endpoint=args.llm_endpoint,
            model=args.model,
            token=os.environ.get(args.token_env),
        )
    else:
        raise CliError(
            "one of --llm-endpoint, --llm-script, or --llm-replay is required"
        )
    return LlmPort(backend, transcript_path=args.transcript)


def _load_wiki(root: str):
    snapshot, report = load_snapshot(root)
    for path, reason in report.skipped:
        print(f"warning: skipped {path}: {reason}", file=sys.stderr)
    return snapshot


def _jsonl_logger(path: Path):
    fh = path.open("a", encoding="utf-8")

    def write(event: dict) -> None:
        fh.write(json.dumps(event, ensure_ascii=False) + "\n")
        fh.flush()

    return write


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentwiki",
        description="Compile passages into a wiki knowledge base and answer "
        "questions by traversing it.",
    )
    parser.add_argument("--config", help="JSON file of default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a corpus into the wiki")
    p.add_argument("--wiki", required=True, help="wiki root directory")
    p.add_argument("--corpus", required=True, help="line-delimited JSON corpus")
    p.add_argument("--batch-size", type=int, default=5)
    p.add_argument("--k", type=int, default=5, help="max pages selected per passage")
    p.add_argument("--fix-every", type=int, default=25, help="LLM fix period (articles)")
    p.add_argument("--revalidate-every", type=int, default=10, help="verify period (batches)")
    p.add_argument("--constraint-cap", type=int, default=30)
    p.add_argument("--no-finalize", action="store_true", help="skip the finalization loop")
    _add_llm_args(p)

    p = sub.add_parser("validate", help="report structural findings, change nothing")
    p.add_argument("--wiki", required=True)

    p = sub.add_parser("repair", help="run one repair layer over the wiki")
    p.add_argument("--wiki", required=True)
    p.add_argument("--layer", choices=("code", "llm", "finalize"), required=True)
    p.add_argument("--book", help="error book path (default <wiki>/error_book.yaml)")
    _add_llm_args(p)

    p = sub.add_parser("errorbook", help="error book utilities")
    book_sub = p.add_subparsers(dest="book_command", required=True)
    rp = book_sub.add_parser("report", help="per-type distribution of recorded errors")
    rp.add_argument("--book", required=True)

    p = sub.add_parser("serve", help="serve wiki_search/wiki_read")
    p.add_argument("--wiki", required=True)
    transport = p.add_mutually_exclusive_group(required=True)
    transport.add_argument("--stdio", action="store_true")
    transport.add_argument("--http", metavar="HOST:PORT")

    p = sub.add_parser("ask", help="answer one question over the wiki")
    p.add_argument("question")
    p.add_argument("--wiki", required=True)
    p.add_argument("--trace", help="write the agent trace to this file")
    p.add_argument("--t-max", type=int, default=15)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--search-limit", type=int, default=10)
    _add_llm_args(p)

    p = sub.add_parser("eval", help="score the agent over a QA set")
    p.add_argument("--wiki", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-dir", help="write per-example traces here")
    p.add_argument("--t-max", type=int, default=15)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--search-limit", type=int, default=10)
    _add_llm_args(p)

    return parser


def _apply_config_defaults(argv: list[str], parser: argparse.ArgumentParser) -> list[str]:
    """--config FILE provides flag defaults; explicit flags still win because
    they come later on the synthesized argv."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        config_path = argv[idx + 1]
    except IndexError:
        return argv
    try:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"unreadable config file {config_path}: {exc}") from exc
    extra: list[str] = []
    for key, value in data.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        else:
            extra.extend([flag, str(value)])
    # insert defaults right after the subcommand so explicit flags override
    head = argv[: idx + 2]
    tail = argv[idx + 2 :]
    if tail and not tail[0].startswith("-"):
        return head + [tail[0]] + extra + tail[1:]
    return head + extra + tail


def _cmd_compile(args: argparse.Namespace) -> int:
    config = CompilerConfig(
        k=args.k,
        batch_size=args.batch_size,
        periodic_fix_every_n_articles=args.fix_every,
        revalidate_every_batches=args.revalidate_every,
        constraint_cap=args.constraint_cap,
    )
    port = build_port(args)
    root = Path(args.wiki)
    snapshot = _load_wiki(root)
    book_path = root / "error_book.yaml"
    book = load_book(book_path) if book_path.exists() else ErrorBook()
    state = CompileState.fresh(snapshot, book)
    root.mkdir(parents=True, exist_ok=True)
    log_event = _jsonl_logger(root / "compile.log.jsonl")
    state = compile_corpus(
        state,
        args.corpus,
        port,
        config,
        log_event=log_event,
        run_finalize=not args.no_finalize,
    )
    write_snapshot(root, state.snapshot)
    save_book(state.book, book_path)
    print(
        f"compiled: {len(state.snapshot.pages)} pages, "
        f"{len(state.snapshot.sources)} sources, "
        f"{len(state.book.entries)} error-book entries"
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    snapshot = _load_wiki(args.wiki)
    errors = validate_structural(snapshot, UpdateSet(), frozenset())
    for err in errors:
        locus = f" [{err.locus.section}]" if err.locus else ""
        print(f"{err.error_type.value}: {err.path}{locus}: {err.detail}")
    print(f"{len(errors)} errors")
    return 0 if not errors else 1


def _cmd_repair(args: argparse.Namespace) -> int:
    root = Path(args.wiki)
    snapshot = _load_wiki(root)
    book_path = Path(args.book) if args.book else root / "error_book.yaml"
    book = load_book(book_path) if book_path.exists() else ErrorBook()
    log_event = _jsonl_logger(root / "repair.log.jsonl")

    if args.layer == "code":
        errors = validate_structural(snapshot, UpdateSet(), frozenset())
        updates, outcome = code_auto_fix(snapshot, UpdateSet(), errors)
        if not updates.is_empty():
            snapshot = apply_updates(snapshot, updates)
        write_snapshot(root, snapshot)
        print(f"code fix: {len(outcome.fixed)} fixed, {len(outcome.residual)} residual")
        return 0

    port = build_port(args)
    if args.layer == "llm":
        updates = llm_periodic_fix(snapshot, book, port, log_event)
        if not updates.is_empty():
            snapshot = apply_updates(snapshot, updates)
        write_snapshot(root, snapshot)
        save_book(book, book_path)
        print(f"llm fix: {len(updates.page_writes)} pages rewritten")
        return 0

    snapshot, book = finalize(snapshot, book, port, log_event)
    write_snapshot(root, snapshot)
    save_book(book, book_path)
    print("finalize: done")
    return 0


def _cmd_errorbook(args: argparse.Namespace) -> int:
    book = load_book(args.book)
    print(distribution_report(book).format_table())
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    snapshot = _load_wiki(args.wiki)
    service = ToolService(snapshot, build_index(snapshot))
    if args.stdio:
        serve_stdio(service)
        return 0
    host, _, port_text = args.http.partition(":")
    try:
        port = int(port_text)
    except ValueError as exc:
        raise CliError(f"--http wants HOST:PORT, got {args.http!r}") from exc
    serve_http(service, host or "127.0.0.1", port)
    return 0


def _agent_config(args: argparse.Namespace) -> AgentConfig:
    return AgentConfig(
        t_max=args.t_max, patience=args.patience, search_limit=args.search_limit
    )


def _cmd_ask(args: argparse.Namespace) -> int:
    snapshot = _load_wiki(args.wiki)
    service = ToolService(snapshot, build_index(snapshot))
    port = build_port(args)
    answer, trace = answer_question(
        args.question, LocalToolClient(service), port, _agent_config(args)
    )
    if args.trace:
        trace.export(args.trace)
    print(answer)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    snapshot = _load_wiki(args.wiki)
    service = ToolService(snapshot, build_index(snapshot))
    port = build_port(args)
    config = _agent_config(args)

    def agent_factory():
        def ask(question: str):
            return answer_question(question, LocalToolClient(service), port, config)

        return ask

    summary = run_eval(args.qa, agent_factory, args.out, trace_dir=args.trace_dir)
    print(
        f"n={summary.n} mean_f1={summary.mean_f1:.3f} mean_em={summary.mean_em:.3f} "
        f"mean_latency={summary.mean_latency_seconds:.2f}s"
    )
    return 0


_COMMANDS = {
    "compile": _cmd_compile,
    "validate": _cmd_validate,
    "repair": _cmd_repair,
    "errorbook": _cmd_errorbook,
    "serve": _cmd_serve,
    "ask": _cmd_ask,
    "eval": _cmd_eval,
}


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        argv = _apply_config_defaults(list(argv), parser)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        CorpusError,
        DatasetError,
        EmptyDataset,
        BookFormatError,
        ModelError,
        PortUnavailable,
        UnscriptedRequest,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=os.environ.get("AGENTWIKI_LOG", "WARNING"))
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""agentwiki: compile passages into a validated, link-structured wiki and
answer questions by compositional traversal over it."""

from .model import (
    DirectoryIndex,
    GlobalIndex,
    Passage,
    SlugPath,
    SourceRecord,
    UpdateSet,
    WikiPage,
    WikiSnapshot,
)
from .codec import extract_wikilinks, parse_index, parse_page, render_index, render_page
from .snapshot import apply_updates, load_snapshot, write_snapshot
from .search import SearchHit, SearchIndex, build_index, search
from .validation import (
    ContentSamplingConfig,
    ErrorType,
    ValidationError,
    validate_content,
    validate_structural,
)
from .errorbook import (
    ErrorBook,
    ErrorBookEntry,
    active_constraints,
    distribution_report,
    load_book,
    record_errors,
    save_book,
    verify_and_close,
)
from .repair import RepairOutcome, code_auto_fix, finalize, llm_periodic_fix
from .compiler import CompileState, CompilerConfig, compile_batch, compile_corpus, ingest_corpus
from .llm import LlmPort, LlmRequest, ScriptedBackend
from .server import ToolService
from .agent import AgentConfig, AgentTrace, answer_question, parse_agent_reply
from .metrics import answer_f1_em, normalize_answer
from .evaluation import EvalSummary, QAExample, run_eval

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "AgentTrace",
    "CompileState",
    "CompilerConfig",
    "ContentSamplingConfig",
    "DirectoryIndex",
    "ErrorBook",
    "ErrorBookEntry",
    "ErrorType",
    "EvalSummary",
    "GlobalIndex",
    "LlmPort",
    "LlmRequest",
    "Passage",
    "QAExample",
    "RepairOutcome",
    "ScriptedBackend",
    "SearchHit",
    "SearchIndex",
    "SlugPath",
    "SourceRecord",
    "ToolService",
    "UpdateSet",
    "ValidationError",
    "WikiPage",
    "WikiSnapshot",
    "active_constraints",
    "answer_f1_em",
    "answer_question",
    "apply_updates",
    "build_index",
    "code_auto_fix",
    "compile_batch",
    "compile_corpus",
    "distribution_report",
    "extract_wikilinks",
    "finalize",
    "ingest_corpus",
    "llm_periodic_fix",
    "load_book",
    "load_snapshot",
    "normalize_answer",
    "parse_agent_reply",
    "parse_index",
    "parse_page",
    "record_errors",
    "render_index",
    "render_page",
    "run_eval",
    "save_book",
    "search",
    "validate_content",
    "validate_structural",
    "verify_and_close",
    "write_snapshot",
]

"""Pipeline variants, activity graphs and the run orchestrator.

A pipeline is a fixed sequence of document-producing activities. The full
variant runs requirement analysis, design, implementation and testing;
ablated variants drop one phase and fall back to the nearest upstream
document as context. After each document the configured reviewer roles give
feedback and the producer revises once per feedback round. Failing test
runs feed a bounded bug-fix loop.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from .agents import (
    DOCUMENT_REVIEWERS,
    Document,
    DocumentKind,
    GenerationParams,
    PromptEnvelope,
    Role,
    TaskKind,
    extract_code,
    render_feedback_prompt,
    render_prompt,
    render_revision_prompt,
)
from .corpus import TaskSpec, baseline_prompt_payload
from .errors import CodeExtractionError, GatewayError
from .gateway import Gateway, canonical_json
from .sandbox import TIME_LIMIT_EXCEEDED, ExecutionResult

logger = logging.getLogger(__name__)

#: executor contract: (code, test_script) -> ExecutionResult
Executor = Callable[[str, str], ExecutionResult]


class ProcessVariant(str, Enum):
    RAW_PROMPT = "RawPrompt"
    WATERFALL_FULL = "WaterfallFull"
    WATERFALL_NO_REQUIREMENT = "WaterfallNoRequirement"
    WATERFALL_NO_DESIGN = "WaterfallNoDesign"
    WATERFALL_NO_TESTING = "WaterfallNoTesting"


class Activity(str, Enum):
    REQUIREMENTS = "requirements"
    DESIGN = "design"
    IMPLEMENTATION = "implementation"
    TEST_DESIGN = "test_design"
    TEST_SCRIPTING = "test_scripting"
    TEST_REPORTING = "test_reporting"


class RunStatus(str, Enum):
    COMPLETED = "Completed"
    GATEWAY_FAILED = "GatewayFailed"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class ActivityNode:
    activity: Activity
    role: Role
    task_kind: TaskKind
    output_kind: DocumentKind
    context_kinds: tuple[DocumentKind, ...]


@dataclass(frozen=True)
class ActivityGraph:
    variant: ProcessVariant
    nodes: tuple[ActivityNode, ...]
    feedback_edges: dict[DocumentKind, tuple[Role, ...]]
    bugfix_cap: int = 3
    feedback_rounds: int = 1
    raw_mode: bool = False

    @property
    def document_kinds(self) -> tuple[DocumentKind, ...]:
        return tuple(node.output_kind for node in self.nodes)

    @property
    def has_testing(self) -> bool:
        return any(n.activity == Activity.TEST_SCRIPTING for n in self.nodes)


def _node(activity: Activity, task_kind: TaskKind, context: tuple[DocumentKind, ...]) -> ActivityNode:
    from .agents import ROWS

    row = ROWS[task_kind]
    return ActivityNode(
        activity=activity,
        role=row.role,
        task_kind=task_kind,
        output_kind=row.output_kind,
        context_kinds=context,
    )


def build_pipeline(
    variant: ProcessVariant, bugfix_cap: int = 3, feedback_rounds: int = 1
) -> ActivityGraph:
    """Static activity graph for a variant.

    Dropping a phase rewires the next activity to the closest remaining
    upstream document (or the bare task description when none is left), and
    dropping testing also disables the bug-fix loop.
    """
    if bugfix_cap < 0:
        raise ValueError("bugfix_cap must be non-negative")
    if feedback_rounds < 0:
        raise ValueError("feedback_rounds must be non-negative")

    if variant is ProcessVariant.RAW_PROMPT:
        return ActivityGraph(
            variant=variant,
            nodes=(_node(Activity.IMPLEMENTATION, TaskKind.IMPLEMENT_CODE, ()),),
            feedback_edges={},
            bugfix_cap=0,
            feedback_rounds=0,
            raw_mode=True,
        )

    requirements = _node(Activity.REQUIREMENTS, TaskKind.WRITE_REQUIREMENTS, ())
    testing = (
        _node(Activity.TEST_DESIGN, TaskKind.DESIGN_TESTS, ()),
        _node(
            Activity.TEST_SCRIPTING,
            TaskKind.WRITE_TEST_SCRIPT,
            (DocumentKind.TEST_CASES,),
        ),
        _node(
            Activity.TEST_REPORTING,
            TaskKind.WRITE_TEST_REPORT,
            (DocumentKind.EXECUTION_RESULTS,),
        ),
    )

    if variant is ProcessVariant.WATERFALL_FULL:
        nodes = (
            requirements,
            _node(Activity.DESIGN, TaskKind.WRITE_DESIGN, (DocumentKind.REQUIREMENT,)),
            _node(Activity.IMPLEMENTATION, TaskKind.IMPLEMENT_CODE, (DocumentKind.DESIGN,)),
            *testing,
        )
    elif variant is ProcessVariant.WATERFALL_NO_REQUIREMENT:
        nodes = (
            _node(Activity.DESIGN, TaskKind.WRITE_DESIGN, ()),
            _node(Activity.IMPLEMENTATION, TaskKind.IMPLEMENT_CODE, (DocumentKind.DESIGN,)),
            *testing,
        )
    elif variant is ProcessVariant.WATERFALL_NO_DESIGN:
        nodes = (
            requirements,
            _node(
                Activity.IMPLEMENTATION, TaskKind.IMPLEMENT_CODE, (DocumentKind.REQUIREMENT,)
            ),
            *testing,
        )
    elif variant is ProcessVariant.WATERFALL_NO_TESTING:
        nodes = (
            requirements,
            _node(Activity.DESIGN, TaskKind.WRITE_DESIGN, (DocumentKind.REQUIREMENT,)),
            _node(Activity.IMPLEMENTATION, TaskKind.IMPLEMENT_CODE, (DocumentKind.DESIGN,)),
        )
        bugfix_cap = 0
    else:
        raise ValueError(f"unknown variant {variant!r}")

    produced = {node.output_kind for node in nodes}
    feedback_edges = {
        kind: tuple(sorted(reviewers, key=lambda r: r.value))
        for kind, reviewers in DOCUMENT_REVIEWERS.items()
        if kind in produced
    }
    return ActivityGraph(
        variant=variant,
        nodes=nodes,
        feedback_edges=feedback_edges,
        bugfix_cap=bugfix_cap,
        feedback_rounds=feedback_rounds,
    )


def variant_document_kinds(variant: ProcessVariant) -> tuple[DocumentKind, ...]:
    """Document kinds a completed run of ``variant`` must deliver."""
    return build_pipeline(variant).document_kinds


# --- run records ------------------------------------------------------------

@dataclass(frozen=True)
class Exchange:
    step: str
    prompt: str
    response: str


@dataclass(frozen=True)
class RunRecord:
    task_id: str
    variant: str
    model_id: str
    status: str
    documents: dict[str, str]
    transcript: tuple[Exchange, ...]
    executions: tuple[ExecutionResult, ...] = ()
    bugfix_cycles: int = 0
    error_detail: str = ""

    def canonical_dict(self) -> dict:
        """Deterministic view of the run: timings and raw process output are
        dropped so a replayed run serializes to the same bytes.
        """
        executions = []
        for result in self.executions:
            executions.append(
                {
                    "per_test": [
                        {
                            "group": t.group,
                            "case": t.case,
                            "status": t.status,
                            "exception_type": t.exception_type,
                            "traceback": t.traceback,
                        }
                        for t in result.per_test
                    ],
                    "collection_error": (
                        {
                            "exception_type": result.collection_error.exception_type,
                            "traceback": result.collection_error.traceback,
                        }
                        if result.collection_error
                        else None
                    ),
                    "timed_out": result.timed_out,
                    "skipped": result.skipped,
                }
            )
        return {
            "task_id": self.task_id,
            "variant": self.variant,
            "model_id": self.model_id,
            "status": self.status,
            "documents": dict(self.documents),
            "transcript": [vars(e) for e in self.transcript],
            "executions": executions,
            "bugfix_cycles": self.bugfix_cycles,
            "error_detail": self.error_detail,
        }

    def canonical_bytes(self) -> bytes:
        return (canonical_json(self.canonical_dict()) + "\n").encode("utf-8")

    def full_dict(self) -> dict:
        data = self.canonical_dict()
        data["executions"] = [r.to_dict() for r in self.executions]
        return data

    @classmethod
    def from_full_dict(cls, data: dict) -> "RunRecord":
        return cls(
            task_id=data["task_id"],
            variant=data["variant"],
            model_id=data["model_id"],
            status=data["status"],
            documents=dict(data["documents"]),
            transcript=tuple(Exchange(**e) for e in data["transcript"]),
            executions=tuple(ExecutionResult.from_dict(r) for r in data["executions"]),
            bugfix_cycles=data["bugfix_cycles"],
            error_detail=data.get("error_detail", ""),
        )


DOC_FILENAMES = {
    DocumentKind.REQUIREMENT: "requirement.md",
    DocumentKind.DESIGN: "design.md",
    DocumentKind.CODE: "code.py",
    DocumentKind.TEST_CASES: "testcases.md",
    DocumentKind.TEST_SCRIPT: "testscript.py",
    DocumentKind.TEST_REPORT: "testreport.md",
}

_RUN_ID_RE = re.compile(r"[^A-Za-z0-9._-]+")


def run_identifier(task_id: str, variant: str, model_id: str) -> str:
    parts = (_RUN_ID_RE.sub("-", p) for p in (task_id, variant, model_id))
    return "__".join(parts)


def save_run(record: RunRecord, out_dir: str | Path) -> Path:
    """Persist one run: canonical record, full record and plain document files."""
    run_dir = Path(out_dir) / run_identifier(
        record.task_id, record.variant, record.model_id
    )
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "record.json").write_bytes(record.canonical_bytes())
    (run_dir / "full.json").write_text(
        json.dumps(record.full_dict(), indent=2, ensure_ascii=False), encoding="utf-8"
    )
    for kind, filename in DOC_FILENAMES.items():
        if kind.value in record.documents:
            (run_dir / filename).write_text(
                record.documents[kind.value], encoding="utf-8"
            )
    return run_dir


def load_run(run_dir: str | Path) -> RunRecord:
    data = json.loads((Path(run_dir) / "full.json").read_text(encoding="utf-8"))
    return RunRecord.from_full_dict(data)


# --- execution-result rendering for the report writer ----------------------

def format_execution_result(result: ExecutionResult) -> str:
    """Stable text form of a test run, fed to report writing as context."""
    lines: list[str] = []
    if result.timed_out:
        lines.append(f"Execution aborted: {TIME_LIMIT_EXCEEDED}.")
    if result.collection_error is not None:
        lines.append(
            f"The test suite failed to load "
            f"({result.collection_error.exception_type}):"
        )
        lines.append(result.collection_error.traceback.rstrip())
    passed = sum(t.status == "Pass" for t in result.per_test)
    failed = sum(t.status == "Fail" for t in result.per_test)
    errored = sum(t.status == "Error" for t in result.per_test)
    lines.append(f"Results: {passed} passed, {failed} failed, {errored} errored.")
    for t in result.per_test:
        if t.status == "Pass":
            continue
        suffix = f" ({t.exception_type})" if t.exception_type else ""
        lines.append(f"- {t.group}.{t.case}: {t.status}{suffix}")
        if t.traceback:
            lines.append(t.traceback.rstrip())
    return "\n".join(lines)


# --- orchestrator -----------------------------------------------------------

def run_pipeline(
    task: TaskSpec,
    graph: ActivityGraph,
    gateway: Gateway,
    params: GenerationParams,
    executor: Executor | None = None,
    model_id: str = "default",
    template_dir: str | Path | None = None,
) -> RunRecord:
    """Execute one pipeline over one task and return its run record.

    ``executor`` runs the generated test script against the generated code;
    it is required whenever the graph contains the test-scripting activity.
    Gateway failures and unusable code responses end the run early with the
    matching status while keeping the documents produced so far.
    """
    if graph.has_testing and executor is None:
        raise ValueError("graph contains test execution but no executor was given")

    docs: dict[DocumentKind, Document] = {}
    transcript: list[Exchange] = []
    executions: list[ExecutionResult] = []
    bugfix_cycles = 0

    def call(step: str, envelope: PromptEnvelope) -> str:
        response = gateway.complete(envelope, params, model_id)
        transcript.append(Exchange(step, envelope.serialize(), response.text))
        return response.text

    def store(kind: DocumentKind, content: str) -> None:
        version = docs[kind].version + 1 if kind in docs else 1
        docs[kind] = Document(kind, content, version)

    def refine(kind: DocumentKind, task_kind: TaskKind) -> None:
        reviewers = graph.feedback_edges.get(kind, ())
        if not reviewers:
            return
        for _ in range(graph.feedback_rounds):
            feedback = []
            for reviewer in reviewers:
                envelope = render_feedback_prompt(reviewer, docs[kind])
                feedback.append(
                    call(f"feedback:{kind.value}:{reviewer.slug}", envelope)
                )
            envelope = render_revision_prompt(
                task_kind, docs[kind], tuple(feedback), template_dir
            )
            text = call(f"revision:{kind.value}", envelope)
            if kind is DocumentKind.CODE:
                text = extract_code(text)
            store(kind, text)

    def produce(node: ActivityNode) -> None:
        context = tuple(docs[k] for k in node.context_kinds if k in docs)
        envelope = render_prompt(
            node.task_kind, context, task.description, template_dir
        )
        text = call(node.activity.value, envelope)
        if node.output_kind is DocumentKind.CODE:
            text = extract_code(text)
        elif node.output_kind is DocumentKind.TEST_SCRIPT:
            text = extract_code(text, require_class=False)
        store(node.output_kind, text)
        refine(node.output_kind, node.task_kind)

    def run_script() -> ExecutionResult:
        result = executor(
            docs[DocumentKind.CODE].content, docs[DocumentKind.TEST_SCRIPT].content
        )
        executions.append(result)
        if result.collection_error is not None and DocumentKind.TEST_CASES in docs:
            # the script may be at fault; regenerate it once and retry
            logger.warning(
                "task %s: test script failed to load (%s), regenerating",
                task.task_id,
                result.collection_error.exception_type,
            )
            envelope = render_prompt(
                TaskKind.WRITE_TEST_SCRIPT,
                (docs[DocumentKind.TEST_CASES],),
                task.description,
                template_dir,
            )
            text = call("test_scripting:retry", envelope)
            store(DocumentKind.TEST_SCRIPT, extract_code(text, require_class=False))
            result = executor(
                docs[DocumentKind.CODE].content,
                docs[DocumentKind.TEST_SCRIPT].content,
            )
            executions.append(result)
        return result

    def write_report(result: ExecutionResult, step: str) -> None:
        context = Document(
            DocumentKind.EXECUTION_RESULTS, format_execution_result(result)
        )
        envelope = render_prompt(
            TaskKind.WRITE_TEST_REPORT, (context,), task.description, template_dir
        )
        store(DocumentKind.TEST_REPORT, call(step, envelope))

    status = RunStatus.COMPLETED
    error_detail = ""
    try:
        if graph.raw_mode:
            envelope = PromptEnvelope.raw(baseline_prompt_payload(task))
            text = call(Activity.IMPLEMENTATION.value, envelope)
            store(DocumentKind.CODE, extract_code(text))
        else:
            for node in graph.nodes:
                if node.activity is Activity.TEST_REPORTING:
                    continue
                produce(node)

            if graph.has_testing:
                result = run_script()
                write_report(result, "test_reporting")
                while not result.passed and bugfix_cycles < graph.bugfix_cap:
                    bugfix_cycles += 1
                    envelope = render_prompt(
                        TaskKind.FIX_CODE,
                        (docs[DocumentKind.TEST_REPORT], docs[DocumentKind.CODE]),
                        task.description,
                        template_dir,
                    )
                    text = call(f"bugfix:{bugfix_cycles}", envelope)
                    store(DocumentKind.CODE, extract_code(text))
                    result = run_script()
                    write_report(result, f"test_reporting:{bugfix_cycles}")
    except GatewayError as exc:
        status = RunStatus.GATEWAY_FAILED
        error_detail = str(exc)
        logger.error("task %s: gateway failure: %s", task.task_id, exc)
    except CodeExtractionError as exc:
        status = RunStatus.UNPARSEABLE
        error_detail = str(exc)
        logger.error("task %s: unusable model output: %s", task.task_id, exc)

    return RunRecord(
        task_id=task.task_id,
        variant=graph.variant.value,
        model_id=model_id,
        status=status.value,
        documents={kind.value: doc.content for kind, doc in docs.items()},
        transcript=tuple(transcript),
        executions=tuple(executions),
        bugfix_cycles=bugfix_cycles,
        error_detail=error_detail,
    )


# --- evaluation against the reference suite ---------------------------------

def evaluate_run(
    record: RunRecord,
    task: TaskSpec,
    runner,
    timeout_s: float = 480.0,
) -> ExecutionResult | None:
    """Run the task's reference tests against a completed run's final code.

    Runs that did not complete, or completed without a code document, are
    not evaluated and yield None.
    """
    from .sandbox import ExecutionRequest, execute_tests

    if record.status != RunStatus.COMPLETED.value:
        return None
    code = record.documents.get(DocumentKind.CODE.value)
    if code is None:
        return None
    request = ExecutionRequest(code=code, tests=task.test_suite, timeout_s=timeout_s)
    return execute_tests(request, runner)


# --- experiment grid --------------------------------------------------------

@dataclass(frozen=True)
class RunDescriptor:
    task_id: str
    variant: ProcessVariant
    model_id: str

    @property
    def run_id(self) -> str:
        return run_identifier(self.task_id, self.variant.value, self.model_id)


def ablation_grid(
    task_ids: tuple[str, ...] | list[str],
    variants: tuple[ProcessVariant, ...] | list[ProcessVariant],
    model_ids: tuple[str, ...] | list[str],
) -> tuple[RunDescriptor, ...]:
    """Full cross product in stable task-major order."""
    grid = []
    for task_id in task_ids:
        for variant in variants:
            for model_id in model_ids:
                grid.append(RunDescriptor(task_id, variant, model_id))
    return tuple(grid)

"""Agent roles, pipeline documents and prompt construction.

Every generation request shares a single five-field prompt shape: Role,
Instruction, Example, Context and Question. The texts that vary per
activity live in JSON files under ``prompts/<role>/<activity>.json`` so
they can be edited or overridden without touching code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import CodeExtractionError, ConfigError, ContextMismatch

INSTRUCTION_PREFIX = "According to the Context, "
TEMPLATE_KEYS = ("task", "instruction", "example", "question")


class Role(str, Enum):
    REQUIREMENT_ENGINEER = "Requirement Engineer"
    ARCHITECT = "Architect"
    DEVELOPER = "Developer"
    TESTER = "Tester"

    @property
    def slug(self) -> str:
        return self.name.lower()


class TaskKind(str, Enum):
    WRITE_REQUIREMENTS = "write_requirements"
    WRITE_DESIGN = "write_design"
    IMPLEMENT_CODE = "implement_code"
    FIX_CODE = "fix_code"
    DESIGN_TESTS = "design_tests"
    WRITE_TEST_SCRIPT = "write_test_script"
    WRITE_TEST_REPORT = "write_test_report"


class DocumentKind(str, Enum):
    REQUIREMENT = "requirement"
    DESIGN = "design"
    CODE = "code"
    TEST_CASES = "test_cases"
    TEST_SCRIPT = "test_script"
    TEST_REPORT = "test_report"
    #: transient context fed to report writing, never persisted as a document
    EXECUTION_RESULTS = "execution_results"


PERSISTED_KINDS = (
    DocumentKind.REQUIREMENT,
    DocumentKind.DESIGN,
    DocumentKind.CODE,
    DocumentKind.TEST_CASES,
    DocumentKind.TEST_SCRIPT,
    DocumentKind.TEST_REPORT,
)

DOC_LABELS = {
    DocumentKind.REQUIREMENT: "requirements document",
    DocumentKind.DESIGN: "design document",
    DocumentKind.CODE: "code",
    DocumentKind.TEST_CASES: "test case document",
    DocumentKind.TEST_SCRIPT: "test script",
    DocumentKind.TEST_REPORT: "test report",
    DocumentKind.EXECUTION_RESULTS: "test execution results",
}

#: which roles give feedback on each produced document kind
DOCUMENT_REVIEWERS = {
    DocumentKind.REQUIREMENT: frozenset({Role.ARCHITECT, Role.TESTER}),
    DocumentKind.DESIGN: frozenset({Role.DEVELOPER, Role.TESTER}),
    DocumentKind.CODE: frozenset({Role.ARCHITECT, Role.TESTER}),
    DocumentKind.TEST_CASES: frozenset({Role.ARCHITECT, Role.DEVELOPER}),
}


@dataclass(frozen=True)
class Document:
    kind: DocumentKind
    content: str
    version: int = 1


@dataclass(frozen=True)
class TemplateRow:
    role: Role
    output_kind: DocumentKind
    context_options: tuple[tuple[DocumentKind, ...], ...]


# Context options are ordered by preference; later tuples are the fallbacks
# used when an upstream phase was removed from the pipeline.
ROWS: dict[TaskKind, TemplateRow] = {
    TaskKind.WRITE_REQUIREMENTS: TemplateRow(
        role=Role.REQUIREMENT_ENGINEER,
        output_kind=DocumentKind.REQUIREMENT,
        context_options=((),),
    ),
    TaskKind.WRITE_DESIGN: TemplateRow(
        role=Role.ARCHITECT,
        output_kind=DocumentKind.DESIGN,
        context_options=((DocumentKind.REQUIREMENT,), ()),
    ),
    TaskKind.IMPLEMENT_CODE: TemplateRow(
        role=Role.DEVELOPER,
        output_kind=DocumentKind.CODE,
        context_options=((DocumentKind.DESIGN,), (DocumentKind.REQUIREMENT,), ()),
    ),
    TaskKind.FIX_CODE: TemplateRow(
        role=Role.DEVELOPER,
        output_kind=DocumentKind.CODE,
        context_options=((DocumentKind.TEST_REPORT, DocumentKind.CODE),),
    ),
    TaskKind.DESIGN_TESTS: TemplateRow(
        role=Role.TESTER,
        output_kind=DocumentKind.TEST_CASES,
        context_options=((),),
    ),
    TaskKind.WRITE_TEST_SCRIPT: TemplateRow(
        role=Role.TESTER,
        output_kind=DocumentKind.TEST_SCRIPT,
        context_options=((DocumentKind.TEST_CASES,),),
    ),
    TaskKind.WRITE_TEST_REPORT: TemplateRow(
        role=Role.TESTER,
        output_kind=DocumentKind.TEST_REPORT,
        context_options=((DocumentKind.EXECUTION_RESULTS,),),
    ),
}


def role_for(task_kind: TaskKind) -> Role:
    return ROWS[task_kind].role


@dataclass(frozen=True)
class PromptEnvelope:
    role_text: str
    instruction_text: str
    example_text: str
    context_text: str
    question_text: str

    @property
    def is_raw(self) -> bool:
        """True for direct prompts that bypass the five-field structure."""
        return not (
            self.role_text
            or self.instruction_text
            or self.example_text
            or self.question_text
        )

    def serialize(self) -> str:
        if self.is_raw:
            return self.context_text
        return "\n\n".join(
            (
                f"Role: {self.role_text}",
                f"Instruction: {self.instruction_text}",
                f"Example: {self.example_text}",
                f"Context: {self.context_text}",
                f"Question: {self.question_text}",
            )
        )

    @classmethod
    def raw(cls, payload: str) -> "PromptEnvelope":
        return cls(
            role_text="",
            instruction_text="",
            example_text="",
            context_text=payload,
            question_text="",
        )

    def to_dict(self) -> dict:
        return {
            "role_text": self.role_text,
            "instruction_text": self.instruction_text,
            "example_text": self.example_text,
            "context_text": self.context_text,
            "question_text": self.question_text,
        }


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.8
    max_output_tokens: int = 2048
    retry_limit: int = 2
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens <= 0:
            raise ConfigError("max_output_tokens must be positive")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be non-negative")

    def wire_dict(self) -> dict:
        """Fields that influence model output, used for request fingerprints."""
        return {
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "seed": self.seed,
        }


# --- templates --------------------------------------------------------------

def load_template(task_kind: TaskKind, override_dir: str | Path | None = None) -> dict:
    """Read the template texts for an activity, preferring ``override_dir``."""
    import json

    row = ROWS[task_kind]
    name = f"{task_kind.value}.json"
    text: str | None = None
    if override_dir is not None:
        candidate = Path(override_dir) / row.role.slug / name
        if candidate.exists():
            text = candidate.read_text(encoding="utf-8")
    if text is None:
        resource = resources.files(__package__) / "prompts" / row.role.slug / name
        try:
            text = resource.read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise ConfigError(f"missing prompt template {row.role.slug}/{name}") from exc
    try:
        template = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"prompt template {name} is not valid JSON: {exc}") from exc
    for key in TEMPLATE_KEYS:
        if key not in template or not isinstance(template[key], str):
            raise ConfigError(f"prompt template {name} missing text field {key!r}")
    return template


def _role_sentence(role: Role, task_text: str) -> str:
    return f"You are a {role.value} delegated for {task_text}"


def _context_from_documents(documents: tuple[Document, ...]) -> str:
    if len(documents) == 1:
        return documents[0].content
    sections = []
    for doc in documents:
        title = DOC_LABELS[doc.kind].title()
        sections.append(f"### {title}\n{doc.content}")
    return "\n\n".join(sections)


def render_prompt(
    task_kind: TaskKind,
    documents: tuple[Document, ...] = (),
    task_payload: str = "",
    override_dir: str | Path | None = None,
) -> PromptEnvelope:
    """Build the generation prompt for one activity.

    ``documents`` must match one of the activity's declared context shapes
    (order-insensitive; rendering follows the declared order). With no
    documents the raw task payload is the context. A single document is
    passed through verbatim; several are joined as labeled sections.
    """
    row = ROWS[task_kind]
    provided = {d.kind: d for d in documents}
    if len(provided) != len(documents):
        raise ContextMismatch(
            f"{task_kind.value}: duplicate context document kinds supplied"
        )

    chosen: tuple[DocumentKind, ...] | None = None
    for option in row.context_options:
        if set(option) == set(provided):
            chosen = option
            break
    if chosen is None:
        allowed = " | ".join(
            "(" + ", ".join(k.value for k in opt) + ")" for opt in row.context_options
        )
        raise ContextMismatch(
            f"{task_kind.value}: context {sorted(k.value for k in provided)} "
            f"not among allowed shapes {allowed}"
        )

    ordered = tuple(provided[kind] for kind in chosen)
    context_text = _context_from_documents(ordered) if ordered else task_payload

    template = load_template(task_kind, override_dir)
    return PromptEnvelope(
        role_text=_role_sentence(row.role, template["task"]),
        instruction_text=INSTRUCTION_PREFIX + template["instruction"],
        example_text=template["example"],
        context_text=context_text,
        question_text=template["question"],
    )


def render_feedback_prompt(
    reviewer: Role,
    document: Document,
    upstream: tuple[Document, ...] = (),
) -> PromptEnvelope:
    """Ask ``reviewer`` to critique ``document``, optionally with upstream
    documents for reference. Only the configured reviewer roles are valid.
    """
    allowed = DOCUMENT_REVIEWERS.get(document.kind)
    if allowed is None or reviewer not in allowed:
        names = sorted(r.value for r in allowed) if allowed else []
        raise ContextMismatch(
            f"{reviewer.value} does not review {document.kind.value} documents"
            + (f" (reviewers: {', '.join(names)})" if names else "")
        )
    label = DOC_LABELS[document.kind]
    context_text = _context_from_documents((*upstream, document))
    return PromptEnvelope(
        role_text=f"You are a {reviewer.value} delegated for "
        f"reviewing the {label} and giving feedback.",
        instruction_text=INSTRUCTION_PREFIX
        + f"1) Review the {label}. 2) List concrete issues that keep it from "
        "satisfying the requirements, or reply 'No issues found.' if there are none.",
        example_text="- The pop() method never handles the empty container "
        "required by requirement 2.",
        context_text=context_text,
        question_text=f"Follow the instructions. The feedback must address "
        f"the {label} only.",
    )


def render_revision_prompt(
    task_kind: TaskKind,
    document: Document,
    feedback: tuple[str, ...],
    override_dir: str | Path | None = None,
) -> PromptEnvelope:
    """Ask the producing role to revise ``document`` against reviewer feedback."""
    if not feedback:
        raise ContextMismatch("revision needs at least one feedback text")
    row = ROWS[task_kind]
    if row.output_kind != document.kind:
        raise ContextMismatch(
            f"{task_kind.value} produces {row.output_kind.value}, "
            f"not {document.kind.value}"
        )
    label = DOC_LABELS[document.kind]
    template = load_template(task_kind, override_dir)
    sections = [f"### {label.title()}\n{document.content}"]
    for i, text in enumerate(feedback, start=1):
        sections.append(f"### Feedback {i}\n{text}")
    return PromptEnvelope(
        role_text=_role_sentence(row.role, template["task"]),
        instruction_text=INSTRUCTION_PREFIX
        + f"1) Review the feedback. 2) Revise the {label} so that every "
        "issue is resolved while keeping its overall structure.",
        example_text=template["example"],
        context_text="\n\n".join(sections),
        question_text=template["question"],
    )


# --- code extraction --------------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_+-]*[ \t]*\n(.*?)```", re.DOTALL)
_CLASS_RE = re.compile(r"^[ \t]*class\s+\w+", re.MULTILINE)


def extract_code(text: str, require_class: bool = True) -> str:
    """Pull source code out of a model response.

    Fenced blocks win over prose; with several blocks the largest one that
    holds a class definition is chosen. Unfenced responses are used whole.
    """
    blocks = [m.group(1).strip("\n") for m in _FENCE_RE.finditer(text)]
    if blocks:
        pool = [b for b in blocks if _CLASS_RE.search(b)] if require_class else blocks
        if not pool:
            raise CodeExtractionError("no fenced block contains a class definition")
        return max(pool, key=len)
    candidate = text.strip()
    if not candidate:
        raise CodeExtractionError("empty response")
    if require_class and not _CLASS_RE.search(candidate):
        raise CodeExtractionError("response contains no class definition")
    return candidate

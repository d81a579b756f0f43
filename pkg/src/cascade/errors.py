"""Exception types shared across the package."""

from __future__ import annotations


class CascadeError(Exception):
    """Base class for every error raised by this package."""


# --- corpus ---------------------------------------------------------------

class CorpusError(CascadeError):
    pass


class MissingField(CorpusError):
    def __init__(self, task_id: str, field: str):
        self.task_id = task_id
        self.field = field
        super().__init__(f"task {task_id!r}: missing field {field!r}")


class DuplicateTaskId(CorpusError):
    def __init__(self, task_id: str):
        self.task_id = task_id
        super().__init__(f"duplicate task id {task_id!r}")


class UnparsableSkeleton(CorpusError):
    def __init__(self, task_id: str, reason: str = ""):
        self.task_id = task_id
        msg = f"task {task_id!r}: skeleton does not parse as a single class"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class AmbiguousMapping(CorpusError):
    def __init__(self, group: str, candidates: list[str]):
        self.group = group
        self.candidates = candidates
        super().__init__(
            f"test group {group!r} matches several methods: {sorted(candidates)}"
        )


# --- agents ---------------------------------------------------------------

class ContextMismatch(CascadeError):
    pass


class CodeExtractionError(CascadeError):
    pass


# --- gateway --------------------------------------------------------------

class GatewayError(CascadeError):
    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        msg = f"model gateway failed at stage {stage!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class CassetteMiss(CascadeError):
    def __init__(self, fingerprint: str):
        self.fingerprint = fingerprint
        super().__init__(f"no cassette entry for fingerprint {fingerprint}")


class CorruptCassette(CascadeError):
    pass


# --- execution ------------------------------------------------------------

class RunnerProtocolError(CascadeError):
    pass


class SandboxSetupError(CascadeError):
    pass


# --- analysis -------------------------------------------------------------

class AnnotationError(CascadeError):
    """Base for taxonomy annotation problems; carries the offending line."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class UnknownSubcategory(AnnotationError):
    pass


class DuplicatePrimary(AnnotationError):
    pass


class OrphanLabel(AnnotationError):
    pass


class MissingBaseline(CascadeError):
    def __init__(self, baseline: str):
        self.baseline = baseline
        super().__init__(f"baseline variant {baseline!r} absent from the data")


# --- metrics --------------------------------------------------------------

class DomainError(CascadeError):
    pass


class MalformedIssueExport(CascadeError):
    pass


# --- cli / reporting ------------------------------------------------------

class MissingData(CascadeError):
    def __init__(self, cells: list[str]):
        self.cells = cells
        super().__init__("missing data for: " + ", ".join(cells))


class ConfigError(CascadeError):
    pass

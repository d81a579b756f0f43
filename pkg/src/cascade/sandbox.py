"""Isolated execution of generated code against a test suite.

Candidate code and tests are written into a throwaway directory and handed
to an external runner process that follows a small contract:

    <runner argv...> --code <file> --tests <file> --json <out>

The runner exits 0 whenever it could execute the suite (failing tests
included) and writes a JSON report; a nonzero exit or an unreadable report
is a runner fault, not a test verdict. Runaway processes are killed as a
group after the timeout plus a short grace period.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import RunnerProtocolError, SandboxSetupError

logger = logging.getLogger(__name__)

#: error tag recorded when a run exceeds its time budget
TIME_LIMIT_EXCEEDED = "Time Limit Exceeded"

DEFAULT_TIMEOUT_S = 480.0
KILL_GRACE_S = 5.0
STDERR_LIMIT = 10_000

VALID_STATUSES = ("Pass", "Fail", "Error")


@dataclass(frozen=True)
class RunnerHandle:
    """Command prefix of a protocol-conforming runner."""

    argv: tuple[str, ...]

    def command(self, code: Path, tests: Path, report: Path) -> list[str]:
        return [
            *self.argv,
            "--code",
            str(code),
            "--tests",
            str(tests),
            "--json",
            str(report),
        ]


@dataclass(frozen=True)
class ExecutionRequest:
    code: str
    tests: str
    timeout_s: float = DEFAULT_TIMEOUT_S


@dataclass(frozen=True)
class TestOutcome:
    group: str
    case: str
    status: str
    exception_type: str | None = None
    traceback: str | None = None
    duration_s: float = 0.0


@dataclass(frozen=True)
class CollectionError:
    exception_type: str
    traceback: str


@dataclass(frozen=True)
class ExecutionResult:
    per_test: tuple[TestOutcome, ...]
    collection_error: CollectionError | None = None
    timed_out: bool = False
    wall_time_s: float = 0.0
    runner_exit_code: int | None = None
    raw_stderr: str = ""
    skipped: int = 0

    @property
    def passed(self) -> bool:
        if self.timed_out or self.collection_error is not None:
            return False
        if not self.per_test:
            return False
        return all(t.status == "Pass" for t in self.per_test)

    def error_types(self) -> list[str]:
        """Distinct failure types, in first-seen order."""
        seen: list[str] = []
        if self.collection_error is not None:
            seen.append(self.collection_error.exception_type)
        for t in self.per_test:
            if t.status == "Pass" or t.exception_type is None:
                continue
            if t.exception_type not in seen:
                seen.append(t.exception_type)
        if self.timed_out and TIME_LIMIT_EXCEEDED not in seen:
            seen.append(TIME_LIMIT_EXCEEDED)
        return seen

    def to_dict(self) -> dict:
        return {
            "per_test": [vars(t) for t in self.per_test],
            "collection_error": (
                vars(self.collection_error) if self.collection_error else None
            ),
            "timed_out": self.timed_out,
            "wall_time_s": self.wall_time_s,
            "runner_exit_code": self.runner_exit_code,
            "raw_stderr": self.raw_stderr,
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionResult":
        ce = data.get("collection_error")
        return cls(
            per_test=tuple(TestOutcome(**t) for t in data["per_test"]),
            collection_error=CollectionError(**ce) if ce else None,
            timed_out=data["timed_out"],
            wall_time_s=data["wall_time_s"],
            runner_exit_code=data.get("runner_exit_code"),
            raw_stderr=data.get("raw_stderr", ""),
            skipped=data.get("skipped", 0),
        )


def parse_report(payload: dict, strict: bool = True) -> tuple[
    tuple[TestOutcome, ...], CollectionError | None, int
]:
    """Validate a runner report, returning outcomes, collection error, skipped."""

    def fail(reason: str):
        raise RunnerProtocolError(f"malformed runner report: {reason}")

    if not isinstance(payload, dict):
        fail("top level is not an object")
    raw_outcomes = payload.get("outcomes")
    if not isinstance(raw_outcomes, list):
        fail('"outcomes" must be a list')

    outcomes: list[TestOutcome] = []
    for entry in raw_outcomes:
        if not isinstance(entry, dict):
            fail("outcome entry is not an object")
        status = entry.get("status")
        if status not in VALID_STATUSES:
            if strict:
                fail(f"bad status {status!r}")
            continue
        try:
            outcomes.append(
                TestOutcome(
                    group=str(entry["group"]),
                    case=str(entry["case"]),
                    status=status,
                    exception_type=entry.get("exception_type"),
                    traceback=entry.get("traceback"),
                    duration_s=float(entry.get("duration_s", 0.0)),
                )
            )
        except KeyError as exc:
            fail(f"outcome entry missing {exc}")

    collection = payload.get("collection_error")
    collection_error = None
    if collection is not None:
        if not isinstance(collection, dict) or "exception_type" not in collection:
            fail('"collection_error" must carry an exception_type')
        collection_error = CollectionError(
            exception_type=str(collection["exception_type"]),
            traceback=str(collection.get("traceback", "")),
        )

    skipped = payload.get("skipped", 0)
    if not isinstance(skipped, int) or skipped < 0:
        skipped = 0
    return tuple(outcomes), collection_error, skipped


def _strip_workdir(text: str | None, workdir: Path) -> str | None:
    """Replace the throwaway directory path so stored output is stable."""
    if text is None:
        return None
    return text.replace(str(workdir), "<sandbox>")


def _scrubbed_env(workdir: Path) -> dict[str, str]:
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": str(workdir),
        "TMPDIR": str(workdir),
        "LANG": os.environ.get("LANG", "C.UTF-8"),
        "PYTHONDONTWRITEBYTECODE": "1",
        "PYTHONHASHSEED": "0",
    }
    if "VIRTUAL_ENV" in os.environ:
        env["VIRTUAL_ENV"] = os.environ["VIRTUAL_ENV"]
    return env


def _terminate_group(proc: subprocess.Popen, grace_s: float) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()
    try:
        proc.wait(timeout=grace_s)
    except subprocess.TimeoutExpired:
        logger.error("runner process %d survived SIGKILL grace period", proc.pid)


def execute_tests(
    request: ExecutionRequest,
    runner: RunnerHandle,
    keep_sandbox: bool = False,
    grace_s: float = KILL_GRACE_S,
) -> ExecutionResult:
    """Run ``request.tests`` against ``request.code`` in a fresh directory."""
    try:
        workdir = Path(tempfile.mkdtemp(prefix="cascade-exec-"))
    except OSError as exc:
        raise SandboxSetupError(f"cannot create sandbox directory: {exc}") from exc

    try:
        code_path = workdir / "code.py"
        tests_path = workdir / "tests.py"
        report_path = workdir / "report.json"
        code_path.write_text(request.code, encoding="utf-8")
        tests_path.write_text(request.tests, encoding="utf-8")

        argv = runner.command(code_path, tests_path, report_path)
        started = time.perf_counter()
        try:
            proc = subprocess.Popen(
                argv,
                cwd=workdir,
                env=_scrubbed_env(workdir),
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except OSError as exc:
            raise SandboxSetupError(f"cannot start runner {argv[0]!r}: {exc}") from exc

        timed_out = False
        try:
            _, stderr_bytes = proc.communicate(timeout=request.timeout_s)
        except subprocess.TimeoutExpired:
            timed_out = True
            _terminate_group(proc, grace_s)
            stderr_bytes = b""
        wall_time_s = time.perf_counter() - started
        stderr_text = (stderr_bytes or b"").decode("utf-8", "replace")[-STDERR_LIMIT:]
        exit_code = proc.returncode

        if timed_out:
            return ExecutionResult(
                per_test=(),
                collection_error=None,
                timed_out=True,
                wall_time_s=wall_time_s,
                runner_exit_code=exit_code,
                raw_stderr=stderr_text,
            )

        if exit_code != 0:
            raise RunnerProtocolError(
                f"runner exited {exit_code}: {stderr_text.strip()[:500]}"
            )
        if not report_path.exists():
            raise RunnerProtocolError("runner exited 0 but wrote no report")
        try:
            payload = json.loads(report_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RunnerProtocolError(f"unreadable runner report: {exc}") from exc

        outcomes, collection_error, skipped = parse_report(payload)
        outcomes = tuple(
            TestOutcome(
                group=t.group,
                case=t.case,
                status=t.status,
                exception_type=t.exception_type,
                traceback=_strip_workdir(t.traceback, workdir),
                duration_s=t.duration_s,
            )
            for t in outcomes
        )
        if collection_error is not None:
            collection_error = CollectionError(
                exception_type=collection_error.exception_type,
                traceback=_strip_workdir(collection_error.traceback, workdir) or "",
            )
        return ExecutionResult(
            per_test=outcomes,
            collection_error=collection_error,
            timed_out=False,
            wall_time_s=wall_time_s,
            runner_exit_code=exit_code,
            raw_stderr=_strip_workdir(stderr_text, workdir) or "",
            skipped=skipped,
        )
    finally:
        if keep_sandbox:
            logger.info("sandbox kept at %s", workdir)
        else:
            shutil.rmtree(workdir, ignore_errors=True)

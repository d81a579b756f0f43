"""Runner-protocol shim for Python candidates.

Imports candidate code, runs the suite's unittest groups against it, and
writes the structured JSON report. The shim stays deliberately small: the
parent harness owns timeouts and process-group cleanup, so nothing here
guards against hangs. Whatever the candidate does while loading is caught
and reported as a collection error instead of crashing the report.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
import traceback
import types
import unittest
from pathlib import Path

CANDIDATE_MODULE = "candidate"
TESTS_MODULE = "candidate_tests"

_HOLDER_CLASS_RE = re.compile(r"\(([^)]+)\)")


def qualified_name(exc_type: type[BaseException]) -> str:
    """Exception name joined to its defining module, builtins left bare."""
    module = getattr(exc_type, "__module__", None)
    if module in (None, "builtins", "__main__"):
        return exc_type.__name__
    return f"{module}.{exc_type.__name__}"


class CollectionFailure(Exception):
    """Carries a loading failure up to the report writer."""

    def __init__(self, cause: BaseException):
        super().__init__(str(cause))
        self.cause = cause


def load_module(
    path: Path, name: str, seed: dict | None = None
) -> types.ModuleType:
    """Compile and execute a file as a fresh module.

    The real filename goes into the compiled code so tracebacks point at
    the file under test. ``seed`` pre-populates the namespace, which lets
    suites reference candidate classes without importing them.
    """
    module = types.ModuleType(name)
    module.__file__ = str(path)
    if seed:
        module.__dict__.update(seed)
    sys.modules[name] = module
    try:
        source = path.read_text(encoding="utf-8")
        code = compile(source, str(path), "exec")
        exec(code, module.__dict__)
    except BaseException as exc:
        raise CollectionFailure(exc) from exc
    return module


def public_names(module: types.ModuleType) -> dict:
    return {
        name: value
        for name, value in vars(module).items()
        if not name.startswith("_")
    }


def discover_groups(
    module: types.ModuleType,
) -> list[tuple[str, type, list[str]]]:
    """Test groups in the module, lexicographic by group then case."""
    loader = unittest.TestLoader()
    groups = []
    for name, value in vars(module).items():
        if (
            isinstance(value, type)
            and issubclass(value, unittest.TestCase)
            and value is not unittest.TestCase
        ):
            cases = sorted(loader.getTestCaseNames(value))
            if cases:
                groups.append((name, value, cases))
    return sorted(groups, key=lambda group: group[0])


class RecordingResult(unittest.TestResult):
    """Collects per-test outcomes in the report's wire shape.

    Skips count separately and never become outcomes; an expected failure
    is a Pass, an unexpected success a Fail without an exception.
    """

    def __init__(self):
        super().__init__()
        self.outcomes: list[dict] = []
        self.skip_count = 0
        self._started_at = 0.0
        self._current: dict | None = None

    def startTest(self, test):
        super().startTest(test)
        self._started_at = time.perf_counter()
        self._current = None

    def stopTest(self, test):
        if self._current is not None:
            self._current["duration_s"] = time.perf_counter() - self._started_at
            self.outcomes.append(self._current)
            self._current = None
        super().stopTest(test)

    def addSuccess(self, test):
        super().addSuccess(test)
        self._record(test, "Pass")

    def addFailure(self, test, err):
        super().addFailure(test, err)
        self._record(test, "Fail", qualified_name(err[0]), self._format(err))

    def addError(self, test, err):
        super().addError(test, err)
        if not hasattr(test, "_testMethodName"):
            # class-level setup/teardown failures arrive as error holders
            # outside the startTest/stopTest bracket
            self.outcomes.append(
                {
                    "group": self._holder_group(test),
                    "case": "class",
                    "status": "Error",
                    "exception_type": qualified_name(err[0]),
                    "traceback": self._format(err),
                    "duration_s": 0.0,
                }
            )
            return
        self._record(test, "Error", qualified_name(err[0]), self._format(err))

    def addSkip(self, test, reason):
        super().addSkip(test, reason)
        self.skip_count += 1

    def addExpectedFailure(self, test, err):
        super().addExpectedFailure(test, err)
        self._record(test, "Pass")

    def addUnexpectedSuccess(self, test):
        super().addUnexpectedSuccess(test)
        self._record(test, "Fail")

    def _record(self, test, status, exception_type=None, traceback_text=None):
        self._current = {
            "group": type(test).__name__,
            "case": test._testMethodName,
            "status": status,
            "exception_type": exception_type,
            "traceback": traceback_text,
            "duration_s": 0.0,
        }

    @staticmethod
    def _format(err) -> str:
        exc_type, exc, tb = err
        return "".join(traceback.format_exception(exc_type, exc, tb))

    @staticmethod
    def _holder_group(holder) -> str:
        description = str(holder.id())
        match = _HOLDER_CLASS_RE.search(description)
        if match:
            return match.group(1).rsplit(".", 1)[-1]
        return description


def run_groups(groups: list[tuple[str, type, list[str]]]) -> RecordingResult:
    suite = unittest.TestSuite()
    for _name, cls, cases in groups:
        for case in cases:
            suite.addTest(cls(case))
    result = RecordingResult()
    suite.run(result)
    return result


def run(code_file: str | Path, tests_file: str | Path) -> dict:
    """Produce the report document for one candidate/suite pair."""
    try:
        candidate = load_module(Path(code_file), CANDIDATE_MODULE)
        tests = load_module(
            Path(tests_file), TESTS_MODULE, seed=public_names(candidate)
        )
    except CollectionFailure as failure:
        cause = failure.cause
        return {
            "outcomes": [],
            "skipped": 0,
            "collection_error": {
                "exception_type": qualified_name(type(cause)),
                "traceback": "".join(
                    traceback.format_exception(
                        type(cause), cause, cause.__traceback__
                    )
                ),
            },
        }
    result = run_groups(discover_groups(tests))
    return {"outcomes": result.outcomes, "skipped": result.skip_count}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="unirun",
        description="Run a unittest suite against candidate code and emit a JSON report.",
    )
    parser.add_argument("--code", required=True, help="Candidate source file.")
    parser.add_argument("--tests", required=True, help="Test suite source file.")
    parser.add_argument(
        "--json", dest="json_out", required=True, help="Report output path."
    )
    args = parser.parse_args(argv)

    report = run(args.code, args.tests)
    try:
        with open(args.json_out, "w", encoding="utf-8") as handle:
            json.dump(report, handle)
    except OSError as exc:
        print(f"unirun: cannot write report: {exc}", file=sys.stderr)
        return 1
    return 0

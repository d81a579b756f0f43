"""Shared fixture builders for the test suite."""

from __future__ import annotations

import json
import sys
import textwrap
from pathlib import Path

from cascade.sandbox import (
    CollectionError,
    ExecutionResult,
    RunnerHandle,
    TestOutcome,
)

CALCULATOR_SKELETON = '''\
class Calculator:
    """Simple integer arithmetic helper."""

    def __init__(self):
        self.history = []

    def add(self, a, b):
        """Return a + b and record the call."""

    def sub(self, a, b):
        """Return a - b and record the call."""
'''

CALCULATOR_DESCRIPTION = """\
Write a class Calculator that performs integer addition and subtraction.
Every successful operation is appended to a history list as a tuple of the
operation name and its result.
"""

CALCULATOR_SOLUTION = '''\
class Calculator:
    """Simple integer arithmetic helper."""

    def __init__(self):
        self.history = []

    def add(self, a, b):
        result = a + b
        self.history.append(("add", result))
        return result

    def sub(self, a, b):
        result = a - b
        self.history.append(("sub", result))
        return result
'''

CALCULATOR_TESTS = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    def test_add_small(self):
        self.assertEqual(Calculator().add(2, 3), 5)

    def test_add_negative(self):
        self.assertEqual(Calculator().add(-2, -3), -5)


class TestCalculatorSub(unittest.TestCase):
    def test_sub_small(self):
        self.assertEqual(Calculator().sub(5, 3), 2)


class TestCalculator(unittest.TestCase):
    def test_history_grows(self):
        calc = Calculator()
        calc.add(1, 1)
        calc.sub(1, 1)
        self.assertEqual(len(calc.history), 2)
"""


def make_task(
    corpus_dir: Path,
    task_id: str = "calculator",
    skeleton: str = CALCULATOR_SKELETON,
    description: str = CALCULATOR_DESCRIPTION,
    solution: str = CALCULATOR_SOLUTION,
    tests: str = CALCULATOR_TESTS,
    metadata: dict | None = None,
) -> Path:
    task_dir = corpus_dir / task_id
    task_dir.mkdir(parents=True)
    (task_dir / "skeleton.py").write_text(skeleton)
    (task_dir / "description.md").write_text(description)
    (task_dir / "solution.py").write_text(solution)
    (task_dir / "tests.py").write_text(tests)
    meta = {"task_id": task_id}
    if metadata:
        meta.update(metadata)
    (task_dir / "task.json").write_text(json.dumps(meta))
    return task_dir


def make_counting_task(corpus_dir: Path, index: int, case_count: int) -> Path:
    """A minimal valid task whose suite holds exactly ``case_count`` cases."""
    name = f"Widget{index}"
    skeleton = textwrap.dedent(
        f'''\
        class {name}:
            """Fixture class."""

            def value(self):
                """Return a constant."""
        '''
    )
    solution = textwrap.dedent(
        f"""\
        class {name}:
            def value(self):
                return {index}
        """
    )
    cases = "\n".join(
        f"    def test_case_{i:03d}(self):\n"
        f"        self.assertEqual({name}().value(), {index})"
        for i in range(case_count)
    )
    tests = f"import unittest\n\n\nclass Test{name}Value(unittest.TestCase):\n{cases}\n"
    return make_task(
        corpus_dir,
        task_id=f"widget_{index:02d}",
        skeleton=skeleton,
        description=f"Write a class {name} with a value method.",
        solution=solution,
        tests=tests,
    )


def outcome(
    group: str,
    case: str,
    status: str = "Pass",
    exception_type: str | None = None,
    traceback: str | None = None,
) -> TestOutcome:
    return TestOutcome(
        group=group,
        case=case,
        status=status,
        exception_type=exception_type,
        traceback=traceback,
    )


def result_with(
    *outcomes: TestOutcome,
    collection_error: CollectionError | None = None,
    timed_out: bool = False,
) -> ExecutionResult:
    return ExecutionResult(
        per_test=tuple(outcomes),
        collection_error=collection_error,
        timed_out=timed_out,
    )


def report_payload(
    entries: list[tuple] = (),
    collection_error: tuple[str, str] | None = None,
    skipped: int = 0,
) -> str:
    """JSON report text in the runner wire shape.

    Entries are (group, case, status) or (group, case, status, exception_type).
    """
    outcomes = []
    for entry in entries:
        group, case, status = entry[:3]
        exception_type = entry[3] if len(entry) > 3 else None
        outcomes.append(
            {
                "group": group,
                "case": case,
                "status": status,
                "exception_type": exception_type,
                "traceback": f"{exception_type}: boom" if exception_type else None,
                "duration_s": 0.01,
            }
        )
    payload: dict = {"outcomes": outcomes, "skipped": skipped}
    if collection_error is not None:
        payload["collection_error"] = {
            "exception_type": collection_error[0],
            "traceback": collection_error[1],
        }
    return json.dumps(payload)


def write_stub_runner(
    target_dir: Path,
    payload: str | None = None,
    sleep_s: float = 0.0,
    exit_code: int = 0,
) -> RunnerHandle:
    """A runner-protocol stand-in that replays canned behavior.

    ``payload`` is written verbatim to the report path (omit it to simulate
    a runner that never reports).
    """
    script = target_dir / "stub_runner.py"
    script.write_text(
        textwrap.dedent(
            f"""\
            import argparse
            import sys
            import time

            parser = argparse.ArgumentParser()
            parser.add_argument("--code", required=True)
            parser.add_argument("--tests", required=True)
            parser.add_argument("--json", dest="json_out", required=True)
            args = parser.parse_args()

            if {sleep_s!r}:
                time.sleep({sleep_s!r})
            payload = {payload!r}
            if payload is not None:
                with open(args.json_out, "w", encoding="utf-8") as handle:
                    handle.write(payload)
            sys.exit({exit_code!r})
            """
        )
    )
    return RunnerHandle((sys.executable, str(script)))

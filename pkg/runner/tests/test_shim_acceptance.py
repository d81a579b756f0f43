"""Acceptance checks for the shim running under the real harness.

Each scenario goes through the orchestrator's sandboxed execution path
with `python -m unirun` as the runner command, exactly as a configured
experiment would invoke it.
"""

import sys
import time

import pytest

from cascade.analysis import extract_errors
from cascade.metrics import aggregate_pass_at_k
from cascade.sandbox import ExecutionRequest, RunnerHandle, execute_tests

SHIM = RunnerHandle((sys.executable, "-m", "unirun"))

GROUND_TRUTH = """\
class Calculator:
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
"""

EMPTY_BODY = """\
class Calculator:
    def __init__(self):
        self.history = []

    def add(self, a, b):
        pass

    def sub(self, a, b):
        pass
"""

SUITE = """\
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

TEST_MAP = {
    "TestCalculatorAdd": "add",
    "TestCalculatorSub": "sub",
    "TestCalculator": "class",
}


@pytest.fixture(scope="module", autouse=True)
def runtime_budget():
    started = time.monotonic()
    yield
    assert time.monotonic() - started < 60.0


def execute(code: str, tests: str = SUITE):
    return execute_tests(ExecutionRequest(code=code, tests=tests), SHIM)


def test_ground_truth_scores_class_pass_at_1():
    result = execute(GROUND_TRUTH)
    assert result.passed
    rates = aggregate_pass_at_k({"calculator": [(result, TEST_MAP)]}, k=1)
    assert rates.class_rate == 1.0
    assert rates.method_rate == 1.0


def test_empty_body_class_scores_zero_with_error_records():
    result = execute(EMPTY_BODY)
    rates = aggregate_pass_at_k({"calculator": [(result, TEST_MAP)]}, k=1)
    assert rates.class_rate == 0.0
    records = extract_errors("calculator", "RawPrompt", "m1", result)
    assert len(records) > 0
    assert any(r.error_type == "AssertionError" for r in records)


def test_zero_division_reported_exactly():
    code = GROUND_TRUTH.replace("result = a + b", "result = (a + b) / 0")
    result = execute(code)
    add_outcomes = [o for o in result.per_test if o.group == "TestCalculatorAdd"]
    assert add_outcomes
    assert all(o.status == "Error" for o in add_outcomes)
    assert {o.exception_type for o in add_outcomes} == {"ZeroDivisionError"}


def test_syntax_error_suite_reports_collection_error():
    result = execute(GROUND_TRUTH, tests="class TestBroken(:\n")
    assert result.per_test == ()
    assert result.collection_error is not None
    assert result.collection_error.exception_type == "SyntaxError"

"""Unit tests for the runner shim, driven in-process through main()."""

import decimal
import json

import pytest

from unirun.shim import main, qualified_name

PASSING_CODE = """\
class Calculator:
    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b
"""

PASSING_TESTS = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    def test_add_small(self):
        self.assertEqual(Calculator().add(2, 3), 5)

    def test_add_negative(self):
        self.assertEqual(Calculator().add(-2, -3), -5)


class TestCalculatorSub(unittest.TestCase):
    def test_sub_small(self):
        self.assertEqual(Calculator().sub(5, 3), 2)

    def test_sub_zero(self):
        self.assertEqual(Calculator().sub(4, 4), 0)
"""


def run_shim(tmp_path, code, tests):
    code_file = tmp_path / "code.py"
    tests_file = tmp_path / "tests.py"
    report_file = tmp_path / "report.json"
    code_file.write_text(code, encoding="utf-8")
    tests_file.write_text(tests, encoding="utf-8")
    exit_code = main(
        [
            "--code",
            str(code_file),
            "--tests",
            str(tests_file),
            "--json",
            str(report_file),
        ]
    )
    return exit_code, json.loads(report_file.read_text(encoding="utf-8"))


class TestQualifiedName:
    def test_builtins_left_bare(self):
        assert qualified_name(ValueError) == "ValueError"
        assert qualified_name(ZeroDivisionError) == "ZeroDivisionError"

    def test_module_exceptions_qualified(self):
        assert qualified_name(decimal.InvalidOperation) == "decimal.InvalidOperation"


class TestPassingSuite:
    def test_four_passing_cases(self, tmp_path):
        exit_code, report = run_shim(tmp_path, PASSING_CODE, PASSING_TESTS)
        assert exit_code == 0
        assert len(report["outcomes"]) == 4
        assert all(o["status"] == "Pass" for o in report["outcomes"])
        assert report["skipped"] == 0
        assert "collection_error" not in report

    def test_outcomes_sorted_by_group_then_case(self, tmp_path):
        tests = """\
import unittest


class TestZulu(unittest.TestCase):
    def test_b(self):
        pass

    def test_a(self):
        pass


class TestAlpha(unittest.TestCase):
    def test_z(self):
        pass
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        assert [(o["group"], o["case"]) for o in report["outcomes"]] == [
            ("TestAlpha", "test_z"),
            ("TestZulu", "test_a"),
            ("TestZulu", "test_b"),
        ]

    def test_repeat_runs_identical(self, tmp_path):
        _, first = run_shim(tmp_path, PASSING_CODE, PASSING_TESTS)
        _, second = run_shim(tmp_path, PASSING_CODE, PASSING_TESTS)
        strip = lambda report: [
            {k: v for k, v in o.items() if k != "duration_s"}
            for o in report["outcomes"]
        ]
        assert strip(first) == strip(second)

    def test_inputs_left_untouched(self, tmp_path):
        run_shim(tmp_path, PASSING_CODE, PASSING_TESTS)
        assert (tmp_path / "code.py").read_text(encoding="utf-8") == PASSING_CODE
        assert (tmp_path / "tests.py").read_text(encoding="utf-8") == PASSING_TESTS


class TestFailuresAndErrors:
    def test_assertion_failure_is_fail(self, tmp_path):
        tests = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    def test_add_small(self):
        self.assertEqual(Calculator().add(2, 3), 99)
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        outcome = report["outcomes"][0]
        assert outcome["status"] == "Fail"
        assert outcome["exception_type"] == "AssertionError"
        assert "AssertionError" in outcome["traceback"]

    def test_runtime_exception_is_error(self, tmp_path):
        code = """\
class Calculator:
    def add(self, a, b):
        return a / 0
"""
        tests = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    def test_add_small(self):
        Calculator().add(2, 3)
"""
        _, report = run_shim(tmp_path, code, tests)
        outcome = report["outcomes"][0]
        assert outcome["status"] == "Error"
        assert outcome["exception_type"] == "ZeroDivisionError"

    def test_candidate_exception_carries_module_prefix(self, tmp_path):
        code = """\
class BoomError(Exception):
    pass


class Calculator:
    def add(self, a, b):
        raise BoomError("no")
"""
        tests = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    def test_add(self):
        Calculator().add(1, 2)
"""
        _, report = run_shim(tmp_path, code, tests)
        assert report["outcomes"][0]["exception_type"] == "candidate.BoomError"

    def test_class_level_setup_failure_reported(self, tmp_path):
        tests = """\
import unittest


class TestBroken(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        raise RuntimeError("no fixtures today")

    def test_never_runs(self):
        pass
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        assert report["outcomes"] == [
            {
                "group": "TestBroken",
                "case": "class",
                "status": "Error",
                "exception_type": "RuntimeError",
                "traceback": report["outcomes"][0]["traceback"],
                "duration_s": 0.0,
            }
        ]
        assert "no fixtures today" in report["outcomes"][0]["traceback"]


class TestSkipsAndExpectations:
    def test_skips_counted_not_reported(self, tmp_path):
        tests = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    @unittest.skip("not today")
    def test_skipped(self):
        pass

    def test_add(self):
        self.assertEqual(Calculator().add(1, 1), 2)
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        assert report["skipped"] == 1
        assert [o["case"] for o in report["outcomes"]] == ["test_add"]

    def test_expected_failure_is_pass(self, tmp_path):
        tests = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    @unittest.expectedFailure
    def test_known_bug(self):
        self.assertEqual(Calculator().add(1, 1), 3)
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        assert report["outcomes"][0]["status"] == "Pass"

    def test_unexpected_success_is_fail(self, tmp_path):
        tests = """\
import unittest


class TestCalculatorAdd(unittest.TestCase):
    @unittest.expectedFailure
    def test_fixed_bug(self):
        self.assertEqual(Calculator().add(1, 1), 2)
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        outcome = report["outcomes"][0]
        assert outcome["status"] == "Fail"
        assert outcome["exception_type"] is None


class TestCollectionErrors:
    def test_syntax_error_in_tests(self, tmp_path):
        exit_code, report = run_shim(
            tmp_path, PASSING_CODE, "class TestBroken(:\n"
        )
        assert exit_code == 0
        assert report["outcomes"] == []
        assert report["collection_error"]["exception_type"] == "SyntaxError"

    def test_syntax_error_in_code(self, tmp_path):
        exit_code, report = run_shim(tmp_path, "def broken(:\n", PASSING_TESTS)
        assert exit_code == 0
        assert report["collection_error"]["exception_type"] == "SyntaxError"

    def test_import_time_crash_in_code(self, tmp_path):
        exit_code, report = run_shim(
            tmp_path, "raise RuntimeError('boom at import')\n", PASSING_TESTS
        )
        assert exit_code == 0
        assert report["collection_error"]["exception_type"] == "RuntimeError"
        assert "boom at import" in report["collection_error"]["traceback"]

    def test_missing_code_file(self, tmp_path):
        tests_file = tmp_path / "tests.py"
        tests_file.write_text(PASSING_TESTS, encoding="utf-8")
        report_file = tmp_path / "report.json"
        exit_code = main(
            [
                "--code",
                str(tmp_path / "absent.py"),
                "--tests",
                str(tests_file),
                "--json",
                str(report_file),
            ]
        )
        assert exit_code == 0
        report = json.loads(report_file.read_text(encoding="utf-8"))
        assert report["collection_error"]["exception_type"] == "FileNotFoundError"


class TestNamespaceSeeding:
    def test_candidate_classes_visible_unqualified(self, tmp_path):
        _, report = run_shim(tmp_path, PASSING_CODE, PASSING_TESTS)
        assert all(o["status"] == "Pass" for o in report["outcomes"])

    def test_candidate_importable_by_name(self, tmp_path):
        tests = """\
import unittest

from candidate import Calculator as Imported


class TestImport(unittest.TestCase):
    def test_same_class(self):
        self.assertIs(Imported, Calculator)
"""
        _, report = run_shim(tmp_path, PASSING_CODE, tests)
        assert report["outcomes"][0]["status"] == "Pass"

    def test_private_names_not_seeded(self, tmp_path):
        code = PASSING_CODE + "\n_secret = 42\n"
        tests = """\
import unittest


class TestPrivacy(unittest.TestCase):
    def test_secret_absent(self):
        with self.assertRaises(NameError):
            _secret
"""
        _, report = run_shim(tmp_path, code, tests)
        assert report["outcomes"][0]["status"] == "Pass"


class TestReportWriting:
    def test_unwritable_report_path_is_shim_fault(self, tmp_path, capsys):
        code_file = tmp_path / "code.py"
        tests_file = tmp_path / "tests.py"
        code_file.write_text(PASSING_CODE, encoding="utf-8")
        tests_file.write_text(PASSING_TESTS, encoding="utf-8")
        exit_code = main(
            [
                "--code",
                str(code_file),
                "--tests",
                str(tests_file),
                "--json",
                str(tmp_path),
            ]
        )
        assert exit_code == 1
        assert "cannot write report" in capsys.readouterr().err

    def test_missing_arguments_rejected(self):
        with pytest.raises(SystemExit):
            main(["--code", "x.py"])

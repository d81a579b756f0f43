"""Correctness and quality metrics.

Covers the unbiased pass@k estimator, class- and method-level correctness
judgements over execution results, non-comment line counting, issue density
per 10 lines, and the signed relative-change percentages used in comparison
tables.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .errors import DomainError, MalformedIssueExport
from .sandbox import ExecutionResult

QUALITY_CATEGORIES = (
    "security",
    "reliability",
    "maintainability",
    "consistency",
    "intentionality",
    "adaptability",
    "responsibility",
)


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator: 1 - C(n-c, k) / C(n, k).

    Computed as a running product so large n does not overflow or lose
    precision through huge binomials.
    """
    if n <= 0:
        raise DomainError(f"sample count must be positive, got {n}")
    if not 0 <= c <= n:
        raise DomainError(f"correct count {c} outside [0, {n}]")
    if not 1 <= k <= n:
        raise DomainError(f"k={k} outside [1, {n}]")
    if n - c < k:
        return 1.0
    out = 1.0
    for i in range(n - c + 1, n + 1):
        out *= 1.0 - k / i
    return 1.0 - out


def class_correct(result: ExecutionResult) -> bool:
    """A sample is class-level correct when its whole suite passes cleanly."""
    if result.timed_out or result.collection_error is not None:
        return False
    if not result.per_test:
        return False
    return all(t.status == "Pass" for t in result.per_test)


def method_flags(result: ExecutionResult, test_map: dict[str, str]) -> dict[str, bool]:
    """Per-method correctness from one execution.

    A method is correct when every test group mapped to it ran and passed.
    Groups mapped to the whole-class sentinel are ignored here; a missing
    group (suite crashed before reaching it) counts against the method.
    """
    by_group: dict[str, list[str]] = {}
    for t in result.per_test:
        by_group.setdefault(t.group, []).append(t.status)

    flags: dict[str, bool] = {}
    for group, method in test_map.items():
        if method == "class":
            continue
        if result.collection_error is not None:
            ok = False
        else:
            statuses = by_group.get(group)
            ok = statuses is not None and all(s == "Pass" for s in statuses)
        flags[method] = flags.get(method, True) and ok
    return flags


@dataclass(frozen=True)
class PassRates:
    class_rate: float
    method_rate: float


def aggregate_pass_at_k(
    samples: dict[str, list[tuple[ExecutionResult, dict[str, str]]]], k: int
) -> PassRates:
    """Mean pass@k over tasks (class level) and over methods (method level).

    ``samples`` maps task_id to its n executions, each paired with the task's
    test-group map. Tasks whose map names no concrete method contribute to
    the class rate only.
    """
    class_terms: list[float] = []
    method_terms: list[float] = []
    for runs in samples.values():
        if not runs:
            continue
        n = len(runs)
        class_terms.append(pass_at_k(n, sum(class_correct(r) for r, _ in runs), k))
        per_method: dict[str, int] = {}
        for result, test_map in runs:
            for method, ok in method_flags(result, test_map).items():
                per_method[method] = per_method.get(method, 0) + int(ok)
        for correct in per_method.values():
            method_terms.append(pass_at_k(n, correct, k))
    if not class_terms:
        raise DomainError("no tasks with executions to aggregate")
    return PassRates(
        class_rate=sum(class_terms) / len(class_terms),
        method_rate=sum(method_terms) / len(method_terms) if method_terms else 0.0,
    )


# --- lines of code ----------------------------------------------------------

def count_ncloc(source: str) -> int:
    """Non-comment lines of code: blank lines, ``#`` comments and docstrings
    (any bare string expression) do not count.

    Sources that fail to parse fall back to the blank/comment rule alone.
    """
    doc_lines: set[int] = set()
    try:
        tree = ast.parse(source)
    except SyntaxError:
        tree = None
    if tree is not None:
        for node in ast.walk(tree):
            if isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant):
                if isinstance(node.value.value, str):
                    doc_lines.update(range(node.lineno, node.end_lineno + 1))

    count = 0
    for lineno, line in enumerate(source.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if lineno in doc_lines:
            continue
        count += 1
    return count


def issue_density(issue_count: int, ncloc: int) -> float:
    """Issues per 10 non-comment lines."""
    if ncloc <= 0:
        raise DomainError(f"ncloc must be positive, got {ncloc}")
    if issue_count < 0:
        raise DomainError(f"issue count must be non-negative, got {issue_count}")
    return issue_count * 10 / ncloc


def relative_change(value: float, baseline: float) -> int:
    """Signed percent change versus baseline, rounded half away from zero.

    A zero baseline reports the raw value scaled to percent, so growth from
    nothing still renders as a finite figure.
    """
    if baseline == 0:
        ratio = Decimal(str(value)) * 100
    else:
        ratio = (Decimal(str(value)) - Decimal(str(baseline))) / Decimal(str(baseline)) * 100
    return int(ratio.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def format_relative_change(percent: int) -> str:
    return f"{percent:+d}%"


# --- issue exports ----------------------------------------------------------

def import_issue_report(path: str | Path) -> dict[str, int]:
    """Read an exported static-analysis summary into per-category counts.

    The file must be a JSON object with an ``issues`` object mapping category
    names (see QUALITY_CATEGORIES) to non-negative integers. Unknown
    categories, missing structure or bad counts are rejected.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedIssueExport(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("issues"), dict):
        raise MalformedIssueExport('expected an object with an "issues" object')

    counts = {category: 0 for category in QUALITY_CATEGORIES}
    for category, value in data["issues"].items():
        key = str(category).lower()
        if key not in counts:
            raise MalformedIssueExport(f"unknown issue category {category!r}")
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise MalformedIssueExport(
                f"count for {category!r} must be a non-negative integer"
            )
        counts[key] = value
    return counts


def density_table(
    counts: dict[str, int], ncloc: int, categories: tuple[str, ...] = QUALITY_CATEGORIES
) -> dict[str, float]:
    return {cat: issue_density(counts.get(cat, 0), ncloc) for cat in categories}

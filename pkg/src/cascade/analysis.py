"""Failure analysis: error frequency tables and the failure taxonomy.

Error records come from executing final code against the reference suite;
within one (task, variant, model) cell each error type counts once. Rare
types are folded into a One-Off bucket per model so frequency tables stay
readable without losing totals. Taxonomy labels are human-written JSONL
that this module validates and rolls up.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import (
    AnnotationError,
    DuplicatePrimary,
    MissingBaseline,
    OrphanLabel,
    UnknownSubcategory,
)
from .sandbox import ExecutionResult

ONE_OFF_LABEL = "One-Off Errors"
ONE_OFF_THRESHOLD = 2


@dataclass(frozen=True)
class ErrorRecord:
    task_id: str
    variant: str
    model_id: str
    error_type: str


def extract_errors(
    task_id: str, variant: str, model_id: str, result: ExecutionResult
) -> tuple[ErrorRecord, ...]:
    """Distinct error types observed in one evaluation, as records.

    Repeats of the same exception type within the run collapse to one
    record; a timed-out run contributes the time-limit tag.
    """
    return tuple(
        ErrorRecord(task_id, variant, model_id, error_type)
        for error_type in result.error_types()
    )


@dataclass(frozen=True)
class FrequencyRow:
    error_type: str
    cells: dict[tuple[str, str], int]


@dataclass(frozen=True)
class FrequencyTable:
    variants: tuple[str, ...]
    models: tuple[str, ...]
    baseline_variant: str
    rows: tuple[FrequencyRow, ...]
    one_off: dict[tuple[str, str], int]
    totals: dict[tuple[str, str], int]

    def cell(self, error_type: str, model_id: str, variant: str) -> int:
        for row in self.rows:
            if row.error_type == error_type:
                return row.cells.get((model_id, variant), 0)
        return 0


def build_frequency_table(
    records: list[ErrorRecord] | tuple[ErrorRecord, ...],
    variants: tuple[str, ...] | list[str],
    baseline_variant: str,
    models: tuple[str, ...] | list[str] | None = None,
    one_off_threshold: int = ONE_OFF_THRESHOLD,
) -> FrequencyTable:
    """Count error records per (type, model, variant) and fold rare types.

    A type is folded into the per-model One-Off bucket when that model saw
    it at most ``one_off_threshold`` times across every variant. Folding
    moves counts, never drops them: visible rows plus the bucket always sum
    to the unfolded totals.
    """
    variants = tuple(variants)
    if baseline_variant not in variants:
        raise MissingBaseline(baseline_variant)
    if models is None:
        models = tuple(sorted({r.model_id for r in records}))
    else:
        models = tuple(models)

    distinct = {
        (r.task_id, r.variant, r.model_id, r.error_type)
        for r in records
        if r.variant in variants and r.model_id in models
    }
    counts: dict[tuple[str, str, str], int] = {}
    for _, variant, model_id, error_type in distinct:
        key = (error_type, model_id, variant)
        counts[key] = counts.get(key, 0) + 1

    error_types = sorted({key[0] for key in counts})
    per_model_total = {
        (error_type, model_id): sum(
            counts.get((error_type, model_id, v), 0) for v in variants
        )
        for error_type in error_types
        for model_id in models
    }
    absorbed = {
        (error_type, model_id)
        for (error_type, model_id), total in per_model_total.items()
        if 0 < total <= one_off_threshold
    }

    totals: dict[tuple[str, str], int] = {
        (m, v): 0 for m in models for v in variants
    }
    one_off: dict[tuple[str, str], int] = {
        (m, v): 0 for m in models for v in variants
    }
    visible: dict[str, dict[tuple[str, str], int]] = {}
    for (error_type, model_id, variant), count in counts.items():
        totals[(model_id, variant)] += count
        if (error_type, model_id) in absorbed:
            one_off[(model_id, variant)] += count
        else:
            visible.setdefault(error_type, {})[(model_id, variant)] = count

    def baseline_weight(error_type: str) -> int:
        return sum(
            visible[error_type].get((m, baseline_variant), 0) for m in models
        )

    ordered = sorted(visible, key=lambda t: (-baseline_weight(t), t))
    rows = tuple(
        FrequencyRow(error_type=t, cells=dict(visible[t])) for t in ordered
    )
    return FrequencyTable(
        variants=variants,
        models=models,
        baseline_variant=baseline_variant,
        rows=rows,
        one_off=one_off,
        totals=totals,
    )


# --- taxonomy ---------------------------------------------------------------

class Category(str, Enum):
    MISSING_CODE = "MissingCode"
    RETURN_MISMATCH = "ReturnMismatch"
    INPUT_VALIDATION = "InputValidation"
    SEMANTIC_FAILURE = "SemanticFailure"
    DATASET = "Dataset"
    ENVIRONMENT = "Environment"


class Subcategory(str, Enum):
    RENAMED_VARIABLE = "RenamedVariable"
    MISSING_VARIABLE = "MissingVariable"
    MISSING_FUNCTION = "MissingFunction"
    RENAMED_FUNCTION = "RenamedFunction"
    MISSING_CLASS = "MissingClass"
    RENAMED_CLASS = "RenamedClass"
    MISSING_IMPORT = "MissingImport"
    INCOMPLETE_IMPLEMENTATION = "IncompleteImplementation"
    ARITY_MISMATCH = "ArityMismatch"
    ORDER_MISMATCH = "OrderMismatch"
    TYPE_MISMATCH = "TypeMismatch"
    FORMAT_MISMATCH = "FormatMismatch"
    OVERRESTRICTIVE_VALIDATION = "OverrestrictiveValidation"
    FAULTY_VALIDATION = "FaultyValidation"
    MISSING_INPUT_VALIDATION = "MissingInputValidation"
    SPEC_VIOLATION = "SpecViolation"
    SIGNATURE_MISMATCH = "SignatureMismatch"
    WRONG_ALGORITHM = "WrongAlgorithm"
    WRONG_EDGE_CASE_HANDLING = "WrongEdgeCaseHandling"
    TIMEOUT = "Timeout"
    SYNTAX_ERROR = "SyntaxError"
    INTEGRATION_ERROR = "IntegrationError"
    FAULTY_SPEC = "FaultySpec"
    FAULTY_TEST = "FaultyTest"
    MISSING_IMPORT_TEST = "MissingImportTest"
    SPEC_TEST_MISMATCH = "SpecTestMismatch"
    VERSION_INCOMPATIBILITY = "VersionIncompatibility"
    UNDECLARED_DEPENDENCY = "UndeclaredDependency"
    DEPRECATED_DEPENDENCY = "DeprecatedDependency"


TAXONOMY: dict[Category, tuple[Subcategory, ...]] = {
    Category.MISSING_CODE: (
        Subcategory.RENAMED_VARIABLE,
        Subcategory.MISSING_VARIABLE,
        Subcategory.MISSING_FUNCTION,
        Subcategory.RENAMED_FUNCTION,
        Subcategory.MISSING_CLASS,
        Subcategory.RENAMED_CLASS,
        Subcategory.MISSING_IMPORT,
        Subcategory.INCOMPLETE_IMPLEMENTATION,
    ),
    Category.RETURN_MISMATCH: (
        Subcategory.ARITY_MISMATCH,
        Subcategory.ORDER_MISMATCH,
        Subcategory.TYPE_MISMATCH,
        Subcategory.FORMAT_MISMATCH,
    ),
    Category.INPUT_VALIDATION: (
        Subcategory.OVERRESTRICTIVE_VALIDATION,
        Subcategory.FAULTY_VALIDATION,
        Subcategory.MISSING_INPUT_VALIDATION,
    ),
    Category.SEMANTIC_FAILURE: (
        Subcategory.SPEC_VIOLATION,
        Subcategory.SIGNATURE_MISMATCH,
        Subcategory.WRONG_ALGORITHM,
        Subcategory.WRONG_EDGE_CASE_HANDLING,
        Subcategory.TIMEOUT,
        Subcategory.SYNTAX_ERROR,
        Subcategory.INTEGRATION_ERROR,
    ),
    Category.DATASET: (
        Subcategory.FAULTY_SPEC,
        Subcategory.FAULTY_TEST,
        Subcategory.MISSING_IMPORT_TEST,
        Subcategory.SPEC_TEST_MISMATCH,
    ),
    Category.ENVIRONMENT: (
        Subcategory.VERSION_INCOMPATIBILITY,
        Subcategory.UNDECLARED_DEPENDENCY,
        Subcategory.DEPRECATED_DEPENDENCY,
    ),
}

CATEGORY_OF: dict[Subcategory, Category] = {
    sub: cat for cat, subs in TAXONOMY.items() for sub in subs
}

_CAMEL_SPLIT = re.compile(r"(?<!^)(?=[A-Z])")


def display_label(subcategory: Subcategory) -> str:
    """Human-facing label; the test-suite import defect gets a marker suffix."""
    if subcategory is Subcategory.MISSING_IMPORT_TEST:
        return "Missing Import (Test)"
    return _CAMEL_SPLIT.sub(" ", subcategory.value)


@dataclass(frozen=True)
class TaxonomyLabel:
    task_id: str
    variant: str
    model_id: str
    category: Category
    subcategory: Subcategory
    primary: bool = True
    cross_refs: tuple[tuple[Category, Subcategory], ...] = ()

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.task_id, self.variant, self.model_id)


def _resolve_pair(raw_category: str, raw_subcategory: str, line_no: int) -> tuple[Category, Subcategory]:
    try:
        category = Category(raw_category)
    except ValueError:
        raise UnknownSubcategory(
            f"unknown category {raw_category!r}", line_no
        ) from None
    try:
        subcategory = Subcategory(raw_subcategory)
    except ValueError:
        raise UnknownSubcategory(
            f"unknown subcategory {raw_subcategory!r}", line_no
        ) from None
    if CATEGORY_OF[subcategory] is not category:
        raise UnknownSubcategory(
            f"subcategory {subcategory.value} does not belong to "
            f"category {category.value}",
            line_no,
        )
    return category, subcategory


def load_annotations(
    path: str | Path,
    failing_keys: set[tuple[str, str, str]] | None = None,
) -> tuple[TaxonomyLabel, ...]:
    """Read JSONL taxonomy labels with full validation.

    Every label must use a known category/subcategory pair, each failure key
    carries exactly one primary label, and when ``failing_keys`` is given a
    label for anything outside that set is rejected.
    """
    labels: list[TaxonomyLabel] = []
    primaries: set[tuple[str, str, str]] = set()
    with_labels: set[tuple[str, str, str]] = set()

    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"not valid JSON: {exc.msg}", line_no) from exc
        try:
            task_id = data["task_id"]
            variant = data["variant"]
            model_id = data["model_id"]
            raw_category = data["category"]
            raw_subcategory = data["subcategory"]
        except KeyError as exc:
            raise AnnotationError(f"missing field {exc}", line_no) from exc

        category, subcategory = _resolve_pair(raw_category, raw_subcategory, line_no)
        cross_refs = []
        for ref in data.get("cross_refs", []):
            cross_refs.append(
                _resolve_pair(ref.get("category", ""), ref.get("subcategory", ""), line_no)
            )

        key = (task_id, variant, model_id)
        if failing_keys is not None and key not in failing_keys:
            raise OrphanLabel(
                f"label for {key} does not match any failing run", line_no
            )
        primary = bool(data.get("primary", True))
        if primary:
            if key in primaries:
                raise DuplicatePrimary(
                    f"second primary label for {key}", line_no
                )
            primaries.add(key)
        with_labels.add(key)
        labels.append(
            TaxonomyLabel(
                task_id=task_id,
                variant=variant,
                model_id=model_id,
                category=category,
                subcategory=subcategory,
                primary=primary,
                cross_refs=tuple(cross_refs),
            )
        )

    without_primary = with_labels - primaries
    if without_primary:
        first = sorted(without_primary)[0]
        raise AnnotationError(f"no primary label for {first}")
    return tuple(labels)


@dataclass(frozen=True)
class TaxonomyMatrix:
    variants: tuple[str, ...]
    models: tuple[str, ...]
    category_counts: dict[tuple[Category, str, str], int]
    subcategory_counts: dict[tuple[Subcategory, str, str], int]
    cross_counts: dict[tuple[Subcategory, str, str], int]

    def category_cell(self, category: Category, model_id: str, variant: str) -> int:
        return self.category_counts.get((category, model_id, variant), 0)

    def subcategory_cell(
        self, subcategory: Subcategory, model_id: str, variant: str
    ) -> int:
        return self.subcategory_counts.get((subcategory, model_id, variant), 0)


def build_taxonomy_matrix(
    labels: tuple[TaxonomyLabel, ...] | list[TaxonomyLabel],
    variants: tuple[str, ...] | list[str],
    models: tuple[str, ...] | list[str] | None = None,
) -> TaxonomyMatrix:
    """Roll primary labels up into per-cell counts.

    Category cells are the sum of their subcategory cells; cross references
    are tallied separately and never feed the primary counts.
    """
    variants = tuple(variants)
    if models is None:
        models = tuple(sorted({label.model_id for label in labels}))
    else:
        models = tuple(models)

    subcategory_counts: dict[tuple[Subcategory, str, str], int] = {}
    category_counts: dict[tuple[Category, str, str], int] = {}
    cross_counts: dict[tuple[Subcategory, str, str], int] = {}
    for label in labels:
        if label.variant not in variants or label.model_id not in models:
            continue
        cell = (label.model_id, label.variant)
        if label.primary:
            sub_key = (label.subcategory, *cell)
            subcategory_counts[sub_key] = subcategory_counts.get(sub_key, 0) + 1
            cat_key = (label.category, *cell)
            category_counts[cat_key] = category_counts.get(cat_key, 0) + 1
        for _, ref_sub in label.cross_refs:
            ref_key = (ref_sub, *cell)
            cross_counts[ref_key] = cross_counts.get(ref_key, 0) + 1
    return TaxonomyMatrix(
        variants=variants,
        models=models,
        category_counts=category_counts,
        subcategory_counts=subcategory_counts,
        cross_counts=cross_counts,
    )


# --- label suggestions ------------------------------------------------------

@dataclass(frozen=True)
class LabelSuggestion:
    category: Category
    subcategory: Subcategory
    reason: str


def suggest_labels(
    result: ExecutionResult,
    class_name: str = "",
    method_names: tuple[str, ...] = (),
) -> tuple[LabelSuggestion, ...]:
    """Heuristic label candidates for one failing evaluation.

    These are hints for a human annotator, keyed off unambiguous signals
    only; nothing here is recorded without review.
    """
    suggestions: list[LabelSuggestion] = []

    def add(category: Category, subcategory: Subcategory, reason: str) -> None:
        if all(s.subcategory is not subcategory for s in suggestions):
            suggestions.append(LabelSuggestion(category, subcategory, reason))

    if result.timed_out:
        add(
            Category.SEMANTIC_FAILURE,
            Subcategory.TIMEOUT,
            "execution exceeded the time budget",
        )
    if result.collection_error is not None:
        ce = result.collection_error
        if ce.exception_type == "SyntaxError":
            add(
                Category.SEMANTIC_FAILURE,
                Subcategory.SYNTAX_ERROR,
                "suite failed to load with a SyntaxError",
            )
        if ce.exception_type in ("ImportError", "ModuleNotFoundError"):
            add(
                Category.MISSING_CODE,
                Subcategory.MISSING_IMPORT,
                "suite failed to load with a missing import",
            )

    texts = [
        (t.exception_type or "", t.traceback or "")
        for t in result.per_test
        if t.status != "Pass"
    ]
    for exception_type, traceback in texts:
        if exception_type == "NameError" and class_name and class_name in traceback:
            add(
                Category.MISSING_CODE,
                Subcategory.MISSING_CLASS,
                f"NameError mentions the expected class {class_name}",
            )
        if exception_type == "AttributeError" and any(
            f"'{m}'" in traceback for m in method_names
        ):
            add(
                Category.MISSING_CODE,
                Subcategory.MISSING_FUNCTION,
                "AttributeError names an expected method",
            )
        if exception_type == "TypeError" and "positional argument" in traceback:
            add(
                Category.SEMANTIC_FAILURE,
                Subcategory.SIGNATURE_MISMATCH,
                "TypeError reports an argument count mismatch",
            )
        if exception_type == "AssertionError":
            add(
                Category.SEMANTIC_FAILURE,
                Subcategory.SPEC_VIOLATION,
                "assertion failure against expected behavior",
            )
    return tuple(suggestions)

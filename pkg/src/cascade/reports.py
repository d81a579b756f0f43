"""Rendering of comparison, error-frequency and taxonomy tables.

Every table renders to aligned text for terminals and to CSV carrying the
same numbers, so downstream spreadsheets never disagree with what was
printed.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass

from .analysis import (
    ONE_OFF_LABEL,
    TAXONOMY,
    Category,
    FrequencyTable,
    TaxonomyMatrix,
    display_label,
)
from .errors import MissingBaseline
from .metrics import format_relative_change, relative_change

COMPARISON_HEADER = "Pass@1 (Class, Function) | Software Quality | Clean Code"

#: quality metrics whose rows disappear when no variant has any issues
OMIT_WHEN_ALL_ZERO = ("security", "responsibility")

_CAMEL_SPLIT = re.compile(r"(?<!^)(?=[A-Z])")


@dataclass(frozen=True)
class MetricSpec:
    key: str
    label: str
    higher_is_better: bool
    decimals: int


METRIC_SPECS = (
    MetricSpec("pass1_class", "Pass@1 (Class)", True, 4),
    MetricSpec("pass1_method", "Pass@1 (Function)", True, 4),
    MetricSpec("security", "Security", False, 4),
    MetricSpec("reliability", "Reliability", False, 4),
    MetricSpec("maintainability", "Maintainability", False, 4),
    MetricSpec("consistency", "Consistency", False, 4),
    MetricSpec("intentionality", "Intentionality", False, 4),
    MetricSpec("adaptability", "Adaptability", False, 4),
    MetricSpec("responsibility", "Responsibility", False, 4),
)


@dataclass(frozen=True)
class ComparisonCell:
    value: float
    percent: int | None
    direction: str


@dataclass(frozen=True)
class ComparisonRow:
    key: str
    label: str
    decimals: int
    cells: dict[str, ComparisonCell]


@dataclass(frozen=True)
class ComparisonTable:
    variants: tuple[str, ...]
    baseline_variant: str
    rows: tuple[ComparisonRow, ...]


def _direction(percent: int | None, higher_is_better: bool) -> str:
    if percent is None:
        return ""
    if percent == 0:
        return "neutral"
    improved = (percent > 0) == higher_is_better
    return "improved" if improved else "regressed"


def build_comparison(
    metrics_by_variant: dict[str, dict[str, float]], baseline_variant: str
) -> ComparisonTable:
    """Comparison rows for every metric at least one variant reports.

    The baseline column carries plain values; other columns add the signed
    percent change and whether the movement is an improvement for that
    metric's direction. All-zero rows of the optional quality metrics are
    dropped entirely.
    """
    if baseline_variant not in metrics_by_variant:
        raise MissingBaseline(baseline_variant)
    variants = tuple(metrics_by_variant)

    rows = []
    for spec in METRIC_SPECS:
        values = {
            v: m[spec.key] for v, m in metrics_by_variant.items() if spec.key in m
        }
        if not values:
            continue
        if spec.key in OMIT_WHEN_ALL_ZERO and all(x == 0 for x in values.values()):
            continue
        baseline_value = values.get(baseline_variant)
        cells = {}
        for variant in variants:
            if variant not in values:
                continue
            value = values[variant]
            if variant == baseline_variant or baseline_value is None:
                percent = None
            else:
                percent = relative_change(value, baseline_value)
            cells[variant] = ComparisonCell(
                value=value,
                percent=percent,
                direction=_direction(percent, spec.higher_is_better),
            )
        rows.append(ComparisonRow(spec.key, spec.label, spec.decimals, cells))
    return ComparisonTable(
        variants=variants, baseline_variant=baseline_variant, rows=tuple(rows)
    )


def _align(columns: list[list[str]]) -> str:
    widths = [max(len(cell) for cell in col) for col in columns]
    lines = []
    for row_idx in range(len(columns[0])):
        parts = [
            columns[col_idx][row_idx].ljust(widths[col_idx])
            for col_idx in range(len(columns))
        ]
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines)


def render_comparison_text(table: ComparisonTable) -> str:
    columns: list[list[str]] = [["Metric"]]
    for row in table.rows:
        columns[0].append(row.label)
    for variant in table.variants:
        col = [variant]
        for row in table.rows:
            cell = row.cells.get(variant)
            if cell is None:
                col.append("-")
                continue
            text = f"{cell.value:.{row.decimals}f}"
            if cell.percent is not None:
                text += f" ({format_relative_change(cell.percent)}, {cell.direction})"
            col.append(text)
        columns.append(col)
    body = _align(columns)
    return (
        f"{COMPARISON_HEADER}\n"
        f"Baseline: {table.baseline_variant}\n\n{body}\n"
    )


def render_comparison_csv(table: ComparisonTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["metric", "variant", "value", "percent_change", "direction"])
    for row in table.rows:
        for variant in table.variants:
            cell = row.cells.get(variant)
            if cell is None:
                continue
            writer.writerow(
                [
                    row.key,
                    variant,
                    f"{cell.value:.{row.decimals}f}",
                    "" if cell.percent is None else cell.percent,
                    cell.direction,
                ]
            )
    return out.getvalue()


# --- error frequency --------------------------------------------------------

def _pair_columns(models: tuple[str, ...], variants: tuple[str, ...]) -> list[tuple[str, str]]:
    return [(m, v) for m in models for v in variants]


def render_errors_text(table: FrequencyTable) -> str:
    pairs = _pair_columns(table.models, table.variants)
    columns: list[list[str]] = [["Error Type"]]
    for row in table.rows:
        columns[0].append(row.error_type)
    columns[0].append(ONE_OFF_LABEL)
    columns[0].append("Total")
    for pair in pairs:
        model, variant = pair
        col = [f"{model}/{variant}"]
        for row in table.rows:
            col.append(str(row.cells.get(pair, 0)))
        col.append(str(table.one_off.get(pair, 0)))
        col.append(str(table.totals.get(pair, 0)))
        columns.append(col)
    return _align(columns) + "\n"


def render_errors_csv(table: FrequencyTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["error_type", "model", "variant", "count"])
    pairs = _pair_columns(table.models, table.variants)
    for row in table.rows:
        for model, variant in pairs:
            writer.writerow([row.error_type, model, variant, row.cells.get((model, variant), 0)])
    for model, variant in pairs:
        writer.writerow([ONE_OFF_LABEL, model, variant, table.one_off.get((model, variant), 0)])
    for model, variant in pairs:
        writer.writerow(["Total", model, variant, table.totals.get((model, variant), 0)])
    return out.getvalue()


# --- taxonomy ---------------------------------------------------------------

def _category_label(category: Category) -> str:
    return _CAMEL_SPLIT.sub(" ", category.value)


def render_taxonomy_text(
    matrix: TaxonomyMatrix, baseline_variant: str | None = None
) -> str:
    """Six category blocks with indented subcategory rows.

    With a baseline, non-baseline cells append their percent change against
    the same row's baseline cell.
    """
    if baseline_variant is not None and baseline_variant not in matrix.variants:
        raise MissingBaseline(baseline_variant)
    pairs = _pair_columns(matrix.models, matrix.variants)

    def cell_text(count: int, baseline_count: int | None) -> str:
        if baseline_count is None:
            return str(count)
        percent = relative_change(count, baseline_count)
        return f"{count} ({format_relative_change(percent)})"

    columns: list[list[str]] = [["Failure"]]
    value_columns: list[list[str]] = [[f"{m}/{v}"] for m, v in pairs]
    for category, subcategories in TAXONOMY.items():
        columns[0].append(_category_label(category))
        for idx, (model, variant) in enumerate(pairs):
            count = matrix.category_cell(category, model, variant)
            baseline_count = None
            if baseline_variant is not None and variant != baseline_variant:
                baseline_count = matrix.category_cell(category, model, baseline_variant)
            value_columns[idx].append(cell_text(count, baseline_count))
        for subcategory in subcategories:
            columns[0].append("  " + display_label(subcategory))
            for idx, (model, variant) in enumerate(pairs):
                count = matrix.subcategory_cell(subcategory, model, variant)
                baseline_count = None
                if baseline_variant is not None and variant != baseline_variant:
                    baseline_count = matrix.subcategory_cell(
                        subcategory, model, baseline_variant
                    )
                value_columns[idx].append(cell_text(count, baseline_count))
    return _align(columns + value_columns) + "\n"


def render_taxonomy_csv(matrix: TaxonomyMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["level", "category", "subcategory", "model", "variant", "count"])
    pairs = _pair_columns(matrix.models, matrix.variants)
    for category, subcategories in TAXONOMY.items():
        for model, variant in pairs:
            writer.writerow(
                [
                    "category",
                    category.value,
                    "",
                    model,
                    variant,
                    matrix.category_cell(category, model, variant),
                ]
            )
        for subcategory in subcategories:
            for model, variant in pairs:
                writer.writerow(
                    [
                        "subcategory",
                        category.value,
                        subcategory.value,
                        model,
                        variant,
                        matrix.subcategory_cell(subcategory, model, variant),
                    ]
                )
    return out.getvalue()


def render_cross_reference_text(matrix: TaxonomyMatrix) -> str:
    """Supplemental table of secondary (cross-referenced) labels."""
    if not matrix.cross_counts:
        return "No cross-referenced labels.\n"
    pairs = _pair_columns(matrix.models, matrix.variants)
    subcategories = sorted(
        {key[0] for key in matrix.cross_counts}, key=lambda s: s.value
    )
    columns: list[list[str]] = [["Cross-Referenced"]]
    for sub in subcategories:
        columns[0].append(display_label(sub))
    for model, variant in pairs:
        col = [f"{model}/{variant}"]
        for sub in subcategories:
            col.append(str(matrix.cross_counts.get((sub, model, variant), 0)))
        columns.append(col)
    return _align(columns) + "\n"

"""Tests for table construction and text/CSV rendering."""

import csv
import io

import pytest

from cascade.analysis import (
    CATEGORY_OF,
    Category,
    ErrorRecord,
    Subcategory,
    TaxonomyLabel,
    build_frequency_table,
    build_taxonomy_matrix,
)
from cascade.errors import MissingBaseline
from cascade.reports import (
    COMPARISON_HEADER,
    build_comparison,
    render_comparison_csv,
    render_comparison_text,
    render_cross_reference_text,
    render_errors_csv,
    render_errors_text,
    render_taxonomy_csv,
    render_taxonomy_text,
)

RAW = "RawPrompt"
FULL = "WaterfallFull"


def sample_metrics():
    return {
        RAW: {
            "pass1_class": 0.3685,
            "pass1_method": 0.6853,
            "reliability": 0.35,
            "maintainability": 0.46,
            "security": 0.0,
            "responsibility": 0.05,
        },
        FULL: {
            "pass1_class": 0.6255,
            "pass1_method": 0.5478,
            "reliability": 0.21,
            "maintainability": 0.46,
            "security": 0.0,
            "responsibility": 0.02,
        },
    }


class TestBuildComparison:
    def test_header_names_the_three_metric_families(self):
        assert (
            COMPARISON_HEADER
            == "Pass@1 (Class, Function) | Software Quality | Clean Code"
        )

    def test_baseline_cells_carry_no_percent(self):
        table = build_comparison(sample_metrics(), RAW)
        cell = table.rows[0].cells[RAW]
        assert cell.percent is None
        assert cell.direction == ""

    def test_higher_is_better_improvement(self):
        table = build_comparison(sample_metrics(), RAW)
        cell = next(r for r in table.rows if r.key == "pass1_class").cells[FULL]
        assert cell.percent == 70
        assert cell.direction == "improved"

    def test_higher_is_better_regression(self):
        table = build_comparison(sample_metrics(), RAW)
        cell = next(r for r in table.rows if r.key == "pass1_method").cells[FULL]
        assert cell.percent == -20
        assert cell.direction == "regressed"

    def test_lower_is_better_improvement(self):
        table = build_comparison(sample_metrics(), RAW)
        cell = next(r for r in table.rows if r.key == "reliability").cells[FULL]
        assert cell.percent == -40
        assert cell.direction == "improved"

    def test_unchanged_value_is_neutral(self):
        table = build_comparison(sample_metrics(), RAW)
        cell = next(r for r in table.rows if r.key == "maintainability").cells[FULL]
        assert cell.percent == 0
        assert cell.direction == "neutral"

    def test_all_zero_optional_rows_dropped(self):
        table = build_comparison(sample_metrics(), RAW)
        keys = [row.key for row in table.rows]
        assert "security" not in keys
        assert "responsibility" in keys

    def test_metric_reported_by_single_variant_keeps_partial_row(self):
        metrics = sample_metrics()
        del metrics[FULL]["pass1_method"]
        table = build_comparison(metrics, RAW)
        row = next(r for r in table.rows if r.key == "pass1_method")
        assert FULL not in row.cells
        assert RAW in row.cells

    def test_unknown_baseline_rejected(self):
        with pytest.raises(MissingBaseline):
            build_comparison({FULL: {"pass1_class": 0.5}}, RAW)


class TestRenderComparison:
    def test_text_layout(self):
        text = render_comparison_text(build_comparison(sample_metrics(), RAW))
        lines = text.splitlines()
        assert lines[0] == COMPARISON_HEADER
        assert lines[1] == "Baseline: RawPrompt"
        assert "0.6255 (+70%, improved)" in text
        assert "0.5478 (-20%, regressed)" in text
        assert "0.4600 (+0%, neutral)" in text

    def test_text_marks_absent_cells(self):
        metrics = sample_metrics()
        del metrics[FULL]["pass1_method"]
        text = render_comparison_text(build_comparison(metrics, RAW))
        row_line = next(
            line for line in text.splitlines() if line.startswith("Pass@1 (Function)")
        )
        assert row_line.rstrip().endswith("-")

    def test_csv_mirrors_cells(self):
        table = build_comparison(sample_metrics(), RAW)
        rows = list(csv.reader(io.StringIO(render_comparison_csv(table))))
        assert rows[0] == ["metric", "variant", "value", "percent_change", "direction"]
        assert ["pass1_class", FULL, "0.6255", "70", "improved"] in rows
        assert ["pass1_class", RAW, "0.3685", "", ""] in rows

    def test_csv_and_text_agree_on_values(self):
        table = build_comparison(sample_metrics(), RAW)
        text = render_comparison_text(table)
        for row in csv.reader(io.StringIO(render_comparison_csv(table))):
            if row[0] == "metric":
                continue
            assert row[2] in text


@pytest.fixture
def frequency_table():
    records = [
        ErrorRecord("t1", RAW, "m1", "AssertionError"),
        ErrorRecord("t2", RAW, "m1", "AssertionError"),
        ErrorRecord("t3", RAW, "m1", "AssertionError"),
        ErrorRecord("t1", FULL, "m1", "AssertionError"),
        ErrorRecord("t1", RAW, "m1", "ValueError"),
    ]
    return build_frequency_table(records, (RAW, FULL), RAW)


class TestRenderErrors:
    def test_text_layout(self, frequency_table):
        text = render_errors_text(frequency_table)
        lines = text.splitlines()
        assert lines[0].split()[:2] == ["Error", "Type"]
        assert "m1/RawPrompt" in lines[0]
        assert lines[1].startswith("AssertionError")
        assert lines[-2].startswith("One-Off Errors")
        assert lines[-1].startswith("Total")

    def test_text_totals_include_folded_counts(self, frequency_table):
        text = render_errors_text(frequency_table)
        total_line = next(
            line for line in text.splitlines() if line.startswith("Total")
        )
        assert total_line.split()[1:] == ["4", "1"]

    def test_csv_layout(self, frequency_table):
        rows = list(csv.reader(io.StringIO(render_errors_csv(frequency_table))))
        assert rows[0] == ["error_type", "model", "variant", "count"]
        assert ["AssertionError", "m1", RAW, "3"] in rows
        assert ["One-Off Errors", "m1", RAW, "1"] in rows
        assert ["Total", "m1", FULL, "1"] in rows
        assert len(rows) == 1 + 3 * 2


def _label(task_id, variant, subcategory, primary=True, cross=()):
    return TaxonomyLabel(
        task_id=task_id,
        variant=variant,
        model_id="m1",
        category=CATEGORY_OF[subcategory],
        subcategory=subcategory,
        primary=primary,
        cross_refs=tuple((CATEGORY_OF[s], s) for s in cross),
    )


@pytest.fixture
def taxonomy_matrix():
    labels = [
        _label("t1", RAW, Subcategory.MISSING_IMPORT),
        _label("t2", RAW, Subcategory.MISSING_IMPORT),
        _label("t3", FULL, Subcategory.MISSING_IMPORT),
        _label("t4", FULL, Subcategory.MISSING_IMPORT),
        _label("t5", FULL, Subcategory.MISSING_IMPORT),
        _label("t6", FULL, Subcategory.SPEC_VIOLATION),
        _label("t7", FULL, Subcategory.SPEC_VIOLATION),
    ]
    return build_taxonomy_matrix(labels, (RAW, FULL))


class TestRenderTaxonomy:
    def test_category_blocks_with_indented_subcategories(self, taxonomy_matrix):
        text = render_taxonomy_text(taxonomy_matrix)
        lines = text.splitlines()
        category_idx = next(
            i for i, line in enumerate(lines) if line.startswith("Missing Code")
        )
        assert lines[category_idx + 1].startswith("  Renamed Variable")
        assert any(line.startswith("  Missing Import ") for line in lines)

    def test_baseline_annotates_percent_change(self, taxonomy_matrix):
        text = render_taxonomy_text(taxonomy_matrix, baseline_variant=RAW)
        import_line = next(
            line
            for line in text.splitlines()
            if line.startswith("  Missing Import ")
        )
        assert "3 (+50%)" in import_line
        violation_line = next(
            line
            for line in text.splitlines()
            if line.startswith("  Spec Violation")
        )
        assert "2 (+200%)" in violation_line

    def test_unknown_baseline_rejected(self, taxonomy_matrix):
        with pytest.raises(MissingBaseline):
            render_taxonomy_text(taxonomy_matrix, baseline_variant="NoSuchVariant")

    def test_csv_categories_sum_their_subcategories(self, taxonomy_matrix):
        rows = list(csv.reader(io.StringIO(render_taxonomy_csv(taxonomy_matrix))))
        header, body = rows[0], rows[1:]
        assert header == ["level", "category", "subcategory", "model", "variant", "count"]
        for category in Category:
            for variant in (RAW, FULL):
                category_count = sum(
                    int(r[5])
                    for r in body
                    if r[0] == "category" and r[1] == category.value and r[4] == variant
                )
                subcategory_count = sum(
                    int(r[5])
                    for r in body
                    if r[0] == "subcategory"
                    and r[1] == category.value
                    and r[4] == variant
                )
                assert category_count == subcategory_count


class TestRenderCrossReference:
    def test_empty_matrix_reports_none(self, taxonomy_matrix):
        assert (
            render_cross_reference_text(taxonomy_matrix)
            == "No cross-referenced labels.\n"
        )

    def test_secondary_labels_rendered(self):
        labels = [
            _label("t1", RAW, Subcategory.SPEC_VIOLATION),
            _label(
                "t1",
                RAW,
                Subcategory.SYNTAX_ERROR,
                primary=False,
                cross=(Subcategory.MISSING_IMPORT,),
            ),
        ]
        matrix = build_taxonomy_matrix(labels, (RAW,))
        text = render_cross_reference_text(matrix)
        assert "Missing Import" in text
        assert "m1/RawPrompt" in text

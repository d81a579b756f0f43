"""Command line entry points.

Subcommands mirror the experiment lifecycle: lint the corpus, run the
grid, evaluate final code against reference tests, analyze the failures
and render comparison reports. A replay command re-runs a grid from a
cassette and verifies the stored records byte for byte.
"""

from __future__ import annotations

import json
import logging
import re
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path

import click

from .analysis import (
    build_frequency_table,
    build_taxonomy_matrix,
    extract_errors,
    load_annotations,
)
from .config import ExperimentConfig, load_config
from .corpus import lint_corpus, load_corpus
from .errors import CascadeError, ConfigError, MissingData
from .gateway import (
    LiveGateway,
    RecordingGateway,
    ReplayGateway,
    ScriptedGateway,
)
from .manifest import open_for_resume
from .metrics import aggregate_pass_at_k, count_ncloc, density_table, import_issue_report
from .process import (
    RunStatus,
    ablation_grid,
    build_pipeline,
    evaluate_run,
    load_run,
    run_pipeline,
    save_run,
)
from .reports import (
    build_comparison,
    render_comparison_csv,
    render_comparison_text,
    render_cross_reference_text,
    render_errors_csv,
    render_errors_text,
    render_taxonomy_csv,
    render_taxonomy_text,
)
from .sandbox import ExecutionRequest, ExecutionResult, RunnerHandle, execute_tests

logger = logging.getLogger(__name__)

_CLASS_NAME_RE = re.compile(r"class\s+([A-Za-z_]\w*)")


def scripted_echo_responder(envelope, params, model_id) -> str:
    """Offline responder for plumbing runs: deterministic echoes shaped by
    the prompt's question line, with just enough structure to keep a
    pipeline moving (extractable code, a trivially passing test script).
    """
    context = envelope.context_text
    if envelope.is_raw:
        match = _CLASS_NAME_RE.search(context)
        name = match.group(1) if match else "GeneratedSolution"
        return f"```python\nclass {name}:\n    pass\n```"
    question = envelope.question_text
    if question.startswith("Follow the instructions. The feedback"):
        return "No issues found."
    if "The code must satisfy" in question:
        match = _CLASS_NAME_RE.search(context)
        name = match.group(1) if match else "GeneratedSolution"
        return f"```python\nclass {name}:\n    pass\n```"
    if "The test script must satisfy" in question:
        return (
            "```python\nimport unittest\n\n\n"
            "class TestGenerated(unittest.TestCase):\n"
            "    def test_placeholder(self):\n"
            "        self.assertTrue(True)\n```"
        )
    if "The requirements document must satisfy" in question:
        return "Requirements derived from the task:\n" + context
    if "The design document must satisfy" in question:
        return "Design derived from the context:\n" + context
    if "The test case document must satisfy" in question:
        return "Test cases derived from the context:\n" + context
    if "The test report must satisfy" in question:
        return "Test report:\n" + context
    return "Acknowledged:\n" + context


def _build_gateway(config: ExperimentConfig):
    if config.provider == "scripted":
        inner = ScriptedGateway(scripted_echo_responder)
    elif config.provider == "live":
        inner = LiveGateway()
    else:
        inner = ReplayGateway.from_file(config.cassette)
    if config.record and config.provider != "replay":
        recorder = RecordingGateway(inner, config.cassette)
        return recorder, recorder
    return inner, None


def _make_executor(config: ExperimentConfig):
    if not config.runner:
        return None
    handle = RunnerHandle(config.runner)

    def executor(code: str, tests: str) -> ExecutionResult:
        return execute_tests(
            ExecutionRequest(code=code, tests=tests, timeout_s=config.timeout_s),
            handle,
        )

    return executor


@click.group()
@click.option("--verbose", is_flag=True, help="Log progress details.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.group("corpus")
def corpus_group() -> None:
    """Corpus inspection commands."""


@corpus_group.command("lint")
@click.argument("path", type=click.Path(exists=True, file_okay=False))
def corpus_lint(path: str) -> None:
    """Validate every task directory and report per-task results."""
    try:
        results = lint_corpus(path)
    except CascadeError as exc:
        raise click.ClickException(str(exc))
    failures = 0
    for task_id, status in results:
        click.echo(f"{task_id}: {status}")
        if status != "OK":
            failures += 1
    click.echo(f"{len(results) - failures}/{len(results)} tasks valid")
    if failures:
        sys.exit(1)


@main.command("run")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option(
    "--resume", is_flag=True, help="Skip runs already completed in the output directory."
)
def run_command(config_path: str, resume: bool) -> None:
    """Execute the full task x variant x model grid."""
    try:
        config = load_config(config_path)
        corpus = load_corpus(config.corpus, strict=True)
        graphs = {
            variant: build_pipeline(variant, config.bugfix_cap, config.feedback_rounds)
            for variant in config.variants
        }
        if any(g.has_testing for g in graphs.values()) and not config.runner:
            raise ConfigError(
                "config needs a runner command for variants that execute tests"
            )
        executor = _make_executor(config)
        gateway, recorder = _build_gateway(config)
        manifest = open_for_resume(config.output_dir, config.digest, resume)
    except CascadeError as exc:
        raise click.ClickException(str(exc))

    reusable = manifest.reusable_ids(config.runs_dir) if resume else set()
    grid = ablation_grid(
        [t.task_id for t in corpus], config.variants, config.models
    )
    pending = [d for d in grid if d.run_id not in reusable]
    click.echo(
        f"{len(grid)} runs in grid, {len(grid) - len(pending)} reused, "
        f"{len(pending)} to execute"
    )

    def do_run(descriptor):
        task = corpus.task(descriptor.task_id)
        graph = graphs[descriptor.variant]
        record = run_pipeline(
            task,
            graph,
            gateway,
            config.params,
            executor=executor if graph.has_testing else None,
            model_id=descriptor.model_id,
            template_dir=config.template_dir,
        )
        save_run(record, config.runs_dir)
        return descriptor, record

    incomplete = 0
    try:
        if config.jobs == 1:
            outcomes = (do_run(d) for d in pending)
            for descriptor, record in outcomes:
                manifest.mark(descriptor, record.status)
                if record.status != RunStatus.COMPLETED.value:
                    incomplete += 1
                click.echo(f"{descriptor.run_id}: {record.status}")
        else:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                futures = [pool.submit(do_run, d) for d in pending]
                for future in as_completed(futures):
                    descriptor, record = future.result()
                    manifest.mark(descriptor, record.status)
                    if record.status != RunStatus.COMPLETED.value:
                        incomplete += 1
                    click.echo(f"{descriptor.run_id}: {record.status}")
    finally:
        if recorder is not None:
            recorder.flush()
        manifest.save(config.output_dir)
    if incomplete:
        click.echo(f"{incomplete} runs did not complete", err=True)


@main.command("evaluate")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
def evaluate_command(config_path: str) -> None:
    """Run each completed run's final code against the reference tests."""
    try:
        config = load_config(config_path)
        if not config.runner:
            raise ConfigError("evaluation needs a runner command in the config")
        corpus = load_corpus(config.corpus, strict=True)
    except CascadeError as exc:
        raise click.ClickException(str(exc))

    handle = RunnerHandle(config.runner)
    if not config.runs_dir.is_dir():
        raise click.ClickException(f"no runs directory under {config.output_dir}")
    for run_dir in sorted(config.runs_dir.iterdir()):
        if not (run_dir / "full.json").exists():
            continue
        record = load_run(run_dir)
        try:
            task = corpus.task(record.task_id)
        except KeyError:
            click.echo(f"{run_dir.name}: task {record.task_id} not in corpus", err=True)
            continue
        try:
            result = evaluate_run(record, task, handle, config.timeout_s)
        except CascadeError as exc:
            raise click.ClickException(f"{run_dir.name}: {exc}")
        if result is None:
            payload = {"evaluated": False, "reason": f"run status {record.status}"}
            click.echo(f"{run_dir.name}: not evaluated ({record.status})")
        else:
            payload = {"evaluated": True, "result": result.to_dict()}
            verdict = "pass" if result.passed else ", ".join(result.error_types()) or "fail"
            click.echo(f"{run_dir.name}: {verdict}")
        (run_dir / "eval.json").write_text(
            json.dumps(payload, indent=2), encoding="utf-8"
        )


def _load_evaluations(
    config: ExperimentConfig, corpus, models: tuple[str, ...] | None = None
):
    """Evaluation results per grid cell.

    Returns (cells, missing) where cells maps a run descriptor to the
    stored evaluation (None for runs marked not evaluated) and missing
    lists run ids without any evaluation file.
    """
    models = models or config.models
    grid = ablation_grid([t.task_id for t in corpus], config.variants, models)
    cells = {}
    missing = []
    for descriptor in grid:
        eval_path = config.runs_dir / descriptor.run_id / "eval.json"
        if not eval_path.exists():
            missing.append(descriptor.run_id)
            continue
        payload = json.loads(eval_path.read_text(encoding="utf-8"))
        if payload.get("evaluated"):
            cells[descriptor] = ExecutionResult.from_dict(payload["result"])
        else:
            cells[descriptor] = None
    return cells, missing


@main.group("analyze")
def analyze_group() -> None:
    """Failure analysis over evaluated runs."""


@analyze_group.command("errors")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option("--baseline", default="RawPrompt", show_default=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
@click.option(
    "--provenance", is_flag=True, help="List contributing run ids per error type."
)
def analyze_errors(config_path, baseline, csv_out, provenance) -> None:
    """Error frequency table with rare types folded into One-Off."""
    try:
        config = load_config(config_path)
        corpus = load_corpus(config.corpus, strict=True)
        cells, missing = _load_evaluations(config, corpus)
        if missing:
            raise MissingData(missing)
        records = []
        for descriptor, result in cells.items():
            if result is None:
                continue
            records.extend(
                extract_errors(
                    descriptor.task_id,
                    descriptor.variant.value,
                    descriptor.model_id,
                    result,
                )
            )
        table = build_frequency_table(
            records,
            [v.value for v in config.variants],
            baseline,
            config.models,
        )
    except CascadeError as exc:
        raise click.ClickException(str(exc))
    click.echo(render_errors_text(table), nl=False)
    if csv_out:
        Path(csv_out).write_text(render_errors_csv(table), encoding="utf-8")
        click.echo(f"wrote {csv_out}")
    if provenance:
        by_cell: dict[tuple[str, str, str], list[str]] = {}
        for record in records:
            key = (record.error_type, record.model_id, record.variant)
            run_id = next(
                d.run_id
                for d in cells
                if d.task_id == record.task_id
                and d.variant.value == record.variant
                and d.model_id == record.model_id
            )
            by_cell.setdefault(key, []).append(run_id)
        click.echo("\nProvenance:")
        for (error_type, model, variant), run_ids in sorted(by_cell.items()):
            click.echo(f"{error_type} [{model}/{variant}]: {', '.join(sorted(run_ids))}")


@analyze_group.command("taxonomy")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option(
    "--labels",
    "labels_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option("--baseline", default=None, help="Show percent change against this variant.")
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
@click.option("--cross", is_flag=True, help="Also print cross-referenced labels.")
def analyze_taxonomy(config_path, labels_path, baseline, csv_out, cross) -> None:
    """Roll up human taxonomy annotations into the category matrix."""
    try:
        config = load_config(config_path)
        corpus = load_corpus(config.corpus, strict=True)
        failing_keys = None
        if config.runs_dir.is_dir():
            cells, missing = _load_evaluations(config, corpus)
            if not missing:
                failing_keys = {
                    (d.task_id, d.variant.value, d.model_id)
                    for d, result in cells.items()
                    if result is None or not result.passed
                }
        labels = load_annotations(labels_path, failing_keys)
        matrix = build_taxonomy_matrix(
            labels, [v.value for v in config.variants], config.models
        )
        text = render_taxonomy_text(matrix, baseline)
    except CascadeError as exc:
        raise click.ClickException(str(exc))
    click.echo(text, nl=False)
    if cross:
        click.echo("")
        click.echo(render_cross_reference_text(matrix), nl=False)
    if csv_out:
        Path(csv_out).write_text(render_taxonomy_csv(matrix), encoding="utf-8")
        click.echo(f"wrote {csv_out}")


@main.group("report")
def report_group() -> None:
    """Rendered result tables."""


@report_group.command("comparison")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option("--baseline", default="RawPrompt", show_default=True)
@click.option(
    "--model",
    "model_id",
    default=None,
    help="Model to report on; required when the config lists several.",
)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
def report_comparison(config_path, baseline, model_id, csv_out) -> None:
    """Pass@1 and quality densities per variant, with change vs baseline."""
    try:
        config = load_config(config_path)
        corpus = load_corpus(config.corpus, strict=True)
        if model_id is None:
            if len(config.models) > 1:
                raise ConfigError(
                    "config lists several models; choose one with --model"
                )
            model_id = config.models[0]
        elif model_id not in config.models:
            raise ConfigError(f"model {model_id!r} is not in the config")

        cells, missing = _load_evaluations(config, corpus, (model_id,))
        if missing:
            raise MissingData(missing)

        metrics_by_variant: dict[str, dict[str, float]] = {}
        for variant in config.variants:
            samples: dict[str, list] = {}
            for descriptor, result in cells.items():
                if descriptor.variant is not variant:
                    continue
                task = corpus.task(descriptor.task_id)
                sample = result if result is not None else ExecutionResult(per_test=())
                samples.setdefault(descriptor.task_id, []).append(
                    (sample, task.test_map)
                )
            rates = aggregate_pass_at_k(samples, k=1)
            metrics_by_variant[variant.value] = {
                "pass1_class": rates.class_rate,
                "pass1_method": rates.method_rate,
            }
            if config.quality_dir is not None:
                issue_path = config.quality_dir / f"{variant.value}.json"
                if not issue_path.exists():
                    raise MissingData([str(issue_path)])
                counts = import_issue_report(issue_path)
                ncloc = 0
                for descriptor in cells:
                    if descriptor.variant is not variant:
                        continue
                    run_dir = config.runs_dir / descriptor.run_id
                    record = load_run(run_dir)
                    code = record.documents.get("code")
                    if code:
                        ncloc += count_ncloc(code)
                if ncloc > 0:
                    metrics_by_variant[variant.value].update(
                        density_table(counts, ncloc)
                    )
        table = build_comparison(metrics_by_variant, baseline)
    except CascadeError as exc:
        raise click.ClickException(str(exc))
    click.echo(render_comparison_text(table), nl=False)
    if csv_out:
        Path(csv_out).write_text(render_comparison_csv(table), encoding="utf-8")
        click.echo(f"wrote {csv_out}")


@main.command("replay")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option(
    "--cassette",
    "cassette_path",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Cassette to replay from; defaults to the config's cassette.",
)
def replay_command(config_path, cassette_path) -> None:
    """Re-run the grid from a cassette and verify stored records match."""
    try:
        config = load_config(config_path)
        cassette = Path(cassette_path) if cassette_path else config.cassette
        if cassette is None:
            raise ConfigError("no cassette given on the command line or in the config")
        corpus = load_corpus(config.corpus, strict=True)
        gateway = ReplayGateway.from_file(cassette)
        executor = _make_executor(config)
        graphs = {
            variant: build_pipeline(variant, config.bugfix_cap, config.feedback_rounds)
            for variant in config.variants
        }
        if any(g.has_testing for g in graphs.values()) and executor is None:
            raise ConfigError(
                "config needs a runner command for variants that execute tests"
            )
    except CascadeError as exc:
        raise click.ClickException(str(exc))

    grid = ablation_grid([t.task_id for t in corpus], config.variants, config.models)
    mismatches = 0
    for descriptor in grid:
        stored = config.runs_dir / descriptor.run_id / "record.json"
        if not stored.exists():
            click.echo(f"{descriptor.run_id}: missing stored record")
            mismatches += 1
            continue
        task = corpus.task(descriptor.task_id)
        graph = graphs[descriptor.variant]
        try:
            record = run_pipeline(
                task,
                graph,
                gateway,
                config.params,
                executor=executor if graph.has_testing else None,
                model_id=descriptor.model_id,
                template_dir=config.template_dir,
            )
        except CascadeError as exc:
            click.echo(f"{descriptor.run_id}: replay failed ({exc})")
            mismatches += 1
            continue
        if record.canonical_bytes() == stored.read_bytes():
            click.echo(f"{descriptor.run_id}: identical")
        else:
            click.echo(f"{descriptor.run_id}: differs")
            mismatches += 1
    if mismatches:
        click.echo(f"{mismatches} runs did not match", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()

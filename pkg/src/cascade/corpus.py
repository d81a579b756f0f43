"""Benchmark corpus loading, validation and indexing.

A corpus is a directory with one sub-directory per task:

    <corpus>/<task_id>/
        skeleton.py      class skeleton: imports, class, docstrings, method stubs
        description.md   natural-language task text
        solution.py      reference implementation
        tests.py         unit-test suite (one test class per "group")
        task.json        metadata: task_id, optional class_name / methods

Methods are taken from ``task.json`` when listed there, otherwise derived
from the skeleton's method definitions.
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    AmbiguousMapping,
    CorpusError,
    DuplicateTaskId,
    MissingField,
    UnparsableSkeleton,
)

logger = logging.getLogger(__name__)

TASK_FILES = {
    "skeleton": "skeleton.py",
    "description": "description.md",
    "ground_truth": "solution.py",
    "test_suite": "tests.py",
}
METADATA_FILE = "task.json"

#: test_map sentinel for groups exercising the whole class rather than one method
CLASS_SENTINEL = "class"


@dataclass(frozen=True)
class MethodDescriptor:
    name: str
    signature: str
    doc: str


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    skeleton: str
    description: str
    methods: tuple[MethodDescriptor, ...]
    ground_truth: str
    test_suite: str
    test_map: dict[str, str] = field(default_factory=dict)

    @property
    def class_name(self) -> str:
        return skeleton_class_name(self.skeleton)

    @property
    def test_group_names(self) -> list[str]:
        return test_groups(self.test_suite)

    @property
    def test_case_count(self) -> int:
        return sum(len(cases) for cases in test_cases_by_group(self.test_suite).values())

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "skeleton": self.skeleton,
            "description": self.description,
            "methods": [vars(m) for m in self.methods],
            "ground_truth": self.ground_truth,
            "test_suite": self.test_suite,
            "test_map": dict(self.test_map),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskSpec":
        return cls(
            task_id=data["task_id"],
            skeleton=data["skeleton"],
            description=data["description"],
            methods=tuple(MethodDescriptor(**m) for m in data["methods"]),
            ground_truth=data["ground_truth"],
            test_suite=data["test_suite"],
            test_map=dict(data["test_map"]),
        )


@dataclass(frozen=True)
class Corpus:
    tasks: tuple[TaskSpec, ...]
    source_path: str
    fingerprint: str

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)

    def mean_test_count(self) -> float:
        """Mean number of test cases per task, rounded to one decimal."""
        if not self.tasks:
            return 0.0
        return round(sum(t.test_case_count for t in self.tasks) / len(self.tasks), 1)

    def to_dict(self) -> dict:
        return {
            "source_path": self.source_path,
            "fingerprint": self.fingerprint,
            "tasks": [t.to_dict() for t in self.tasks],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Corpus":
        return cls(
            tasks=tuple(TaskSpec.from_dict(t) for t in data["tasks"]),
            source_path=data["source_path"],
            fingerprint=data["fingerprint"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Corpus":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- skeleton / test-suite introspection ----------------------------------

def _parse_single_class(source: str) -> ast.ClassDef:
    """Return the single top-level class of ``source`` or raise ValueError."""
    tree = ast.parse(source)
    classes = [n for n in tree.body if isinstance(n, ast.ClassDef)]
    others = [
        n
        for n in tree.body
        if not isinstance(n, (ast.ClassDef, ast.Import, ast.ImportFrom, ast.Expr))
    ]
    if len(classes) != 1:
        raise ValueError(f"expected exactly one class definition, found {len(classes)}")
    if others:
        raise ValueError("top level may only contain imports and one class")
    return classes[0]


def skeleton_class_name(skeleton: str) -> str:
    return _parse_single_class(skeleton).name


def skeleton_methods(skeleton: str) -> list[MethodDescriptor]:
    """Derive method descriptors from the skeleton (constructor excluded)."""
    cls = _parse_single_class(skeleton)
    methods = []
    for node in cls.body:
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        if node.name == "__init__":
            continue
        args = ast.unparse(node.args)
        methods.append(
            MethodDescriptor(
                name=node.name,
                signature=f"def {node.name}({args})",
                doc=ast.get_docstring(node) or "",
            )
        )
    return methods


def test_cases_by_group(test_suite: str) -> dict[str, list[str]]:
    """Map each test class (group) to its ``test_*`` method (case) names."""
    tree = ast.parse(test_suite)
    groups: dict[str, list[str]] = {}
    for node in tree.body:
        if isinstance(node, ast.ClassDef) and node.name.startswith("Test"):
            cases = [
                item.name
                for item in node.body
                if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef))
                and item.name.startswith("test")
            ]
            groups[node.name] = cases
    return groups


def test_groups(test_suite: str) -> list[str]:
    return list(test_cases_by_group(test_suite))


# --- test-group -> method mapping ------------------------------------------

def _camel(name: str) -> str:
    """snake_case -> CamelCase, used to compare method names with group suffixes."""
    return "".join(part.capitalize() for part in name.split("_") if part)


def map_tests_to_methods(task: TaskSpec) -> dict[str, str]:
    """Assign every test group to one method by the ``Test<Class><Method>`` convention.

    A group matches a method when the group name ends with the camel-cased
    method name; the longest matching suffix wins, and groups with no match
    map to the whole-class sentinel.
    """
    method_names = [m.name for m in task.methods]
    mapping: dict[str, str] = {}
    for group in task.test_group_names:
        lowered = group.lower()
        candidates: list[str] = []
        best = 0
        for name in method_names:
            suffix = _camel(name).lower()
            if suffix and lowered.endswith(suffix):
                if len(suffix) > best:
                    candidates = [name]
                    best = len(suffix)
                elif len(suffix) == best:
                    candidates.append(name)
        if len(candidates) > 1:
            raise AmbiguousMapping(group, candidates)
        mapping[group] = candidates[0] if candidates else CLASS_SENTINEL
    return mapping


def baseline_prompt_payload(task: TaskSpec) -> str:
    """The direct-prompt input: skeleton then description, nothing else."""
    return f"{task.skeleton}\n\n{task.description}"


# --- loading ----------------------------------------------------------------

def _read_task_dir(task_dir: Path) -> TaskSpec:
    meta: dict = {}
    meta_path = task_dir / METADATA_FILE
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    task_id = meta.get("task_id", task_dir.name)

    raw: dict[str, str] = {}
    for field_name, file_name in TASK_FILES.items():
        path = task_dir / file_name
        if not path.exists():
            raise MissingField(task_id, field_name)
        raw[field_name] = path.read_text(encoding="utf-8")

    try:
        derived = skeleton_methods(raw["skeleton"])
    except (SyntaxError, ValueError) as exc:
        raise UnparsableSkeleton(task_id, str(exc)) from exc

    if "methods" in meta:
        methods = tuple(
            MethodDescriptor(
                name=m["name"], signature=m.get("signature", ""), doc=m.get("doc", "")
            )
            for m in meta["methods"]
        )
        known = {m.name for m in derived}
        for m in methods:
            if m.name not in known:
                raise CorpusError(
                    f"task {task_id!r}: metadata method {m.name!r} not in skeleton"
                )
    else:
        methods = tuple(derived)

    names = [m.name for m in methods]
    if len(names) != len(set(names)):
        raise CorpusError(f"task {task_id!r}: duplicate method names")

    task = TaskSpec(
        task_id=task_id,
        skeleton=raw["skeleton"],
        description=raw["description"],
        methods=methods,
        ground_truth=raw["ground_truth"],
        test_suite=raw["test_suite"],
    )

    try:
        groups = task.test_group_names
    except SyntaxError as exc:
        raise CorpusError(f"task {task_id!r}: test suite does not parse: {exc}") from exc
    if not groups:
        raise CorpusError(f"task {task_id!r}: test suite contains no test group")

    return replace(task, test_map=map_tests_to_methods(task))


def _task_dirs(path: Path) -> list[Path]:
    return sorted(
        (d for d in path.iterdir() if d.is_dir() and not d.name.startswith(".")),
        key=lambda d: d.name,
    )


def _fingerprint(path: Path) -> str:
    digest = hashlib.sha256()
    for task_dir in _task_dirs(path):
        for file_path in sorted(task_dir.iterdir()):
            if file_path.is_file():
                digest.update(file_path.name.encode())
                digest.update(b"\x00")
                digest.update(file_path.read_bytes())
                digest.update(b"\x01")
    return digest.hexdigest()


def lint_corpus(path: str | Path) -> list[tuple[str, str]]:
    """Per-task validation outcomes as ``(task_id, "OK" | error message)``."""
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus path {root} is not a directory")
    results: list[tuple[str, str]] = []
    seen: set[str] = set()
    for task_dir in _task_dirs(root):
        try:
            task = _read_task_dir(task_dir)
            if task.task_id in seen:
                raise DuplicateTaskId(task.task_id)
            seen.add(task.task_id)
            results.append((task.task_id, "OK"))
        except CorpusError as exc:
            results.append((task_dir.name, str(exc)))
    return results


def load_corpus(path: str | Path, strict: bool = False) -> Corpus:
    """Load and validate every task under ``path``.

    Invalid tasks are skipped with a logged reason unless ``strict`` is set,
    in which case the first validation error is raised.
    """
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus path {root} is not a directory")

    tasks: list[TaskSpec] = []
    seen: set[str] = set()
    for task_dir in _task_dirs(root):
        try:
            task = _read_task_dir(task_dir)
            if task.task_id in seen:
                raise DuplicateTaskId(task.task_id)
        except CorpusError as exc:
            if strict:
                raise
            logger.warning("skipping task %s: %s", task_dir.name, exc)
            continue
        seen.add(task.task_id)
        tasks.append(task)
        logger.debug("loaded task %s (%d test cases)", task.task_id, task.test_case_count)

    corpus = Corpus(
        tasks=tuple(tasks), source_path=str(root), fingerprint=_fingerprint(root)
    )
    if corpus.tasks:
        logger.info(
            "loaded %d tasks, mean test count %.1f",
            len(corpus),
            corpus.mean_test_count(),
        )
    return corpus

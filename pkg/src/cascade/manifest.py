"""Grid bookkeeping so interrupted experiments can resume.

The manifest lives next to the run directories and remembers, per run id,
what the last attempt produced. Only runs that completed and still have
their record on disk are skipped on resume; failures are retried.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .process import RunDescriptor, RunStatus

MANIFEST_NAME = "manifest.json"


@dataclass
class Manifest:
    config_digest: str
    runs: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def load(cls, output_dir: str | Path) -> "Manifest | None":
        path = Path(output_dir) / MANIFEST_NAME
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(config_digest=data["config_digest"], runs=dict(data["runs"]))

    def save(self, output_dir: str | Path) -> None:
        path = Path(output_dir) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"config_digest": self.config_digest, "runs": self.runs}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")

    def mark(self, descriptor: RunDescriptor, status: str) -> None:
        self.runs[descriptor.run_id] = {
            "task_id": descriptor.task_id,
            "variant": descriptor.variant.value,
            "model_id": descriptor.model_id,
            "status": status,
        }

    def reusable_ids(self, runs_dir: str | Path) -> set[str]:
        """Run ids that finished and still have their canonical record."""
        runs_dir = Path(runs_dir)
        return {
            run_id
            for run_id, info in self.runs.items()
            if info.get("status") == RunStatus.COMPLETED.value
            and (runs_dir / run_id / "record.json").exists()
        }


def open_for_resume(
    output_dir: str | Path, config_digest: str, resume: bool
) -> Manifest:
    """Load or create the manifest, refusing to resume a changed config."""
    existing = Manifest.load(output_dir) if resume else None
    if existing is None:
        return Manifest(config_digest=config_digest)
    if existing.config_digest != config_digest:
        raise ConfigError(
            "config changed since the last run; refusing to resume "
            "(use a fresh output_dir or restore the original config)"
        )
    return existing

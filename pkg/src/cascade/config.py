"""Experiment configuration: YAML loading, validation and digesting.

The digest covers every setting that shapes the grid or its outputs, so a
resumed experiment can refuse to continue under a silently edited config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import yaml

from .agents import GenerationParams
from .errors import ConfigError
from .gateway import canonical_json
from .process import ProcessVariant

PROVIDERS = ("scripted", "live", "replay")

_PARAM_KEYS = {"temperature", "max_output_tokens", "retry_limit", "seed"}


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: Path
    output_dir: Path
    models: tuple[str, ...]
    variants: tuple[ProcessVariant, ...]
    digest: str
    provider: str = "scripted"
    cassette: Path | None = None
    record: bool = False
    params: GenerationParams = GenerationParams()
    feedback_rounds: int = 1
    bugfix_cap: int = 3
    timeout_s: float = 480.0
    jobs: int = 1
    runner: tuple[str, ...] = ()
    template_dir: Path | None = None
    quality_dir: Path | None = None

    @property
    def runs_dir(self) -> Path:
        return self.output_dir / "runs"


def _require(raw: dict, key: str):
    if key not in raw:
        raise ConfigError(f"config is missing required key {key!r}")
    return raw[key]


def _string_tuple(value, key: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value or not all(
        isinstance(v, str) and v for v in value
    ):
        raise ConfigError(f"{key!r} must be a non-empty list of strings")
    return tuple(value)


def _parse_variants(value) -> tuple[ProcessVariant, ...]:
    names = _string_tuple(value, "variants")
    variants = []
    for name in names:
        try:
            variants.append(ProcessVariant(name))
        except ValueError:
            valid = ", ".join(v.value for v in ProcessVariant)
            raise ConfigError(
                f"unknown variant {name!r}; valid variants: {valid}"
            ) from None
    if len(set(variants)) != len(variants):
        raise ConfigError("variants list contains duplicates")
    return tuple(variants)


def config_digest(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode("utf-8")).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a YAML experiment config.

    Relative paths are taken relative to the config file's directory.
    """
    config_path = Path(path)
    try:
        raw = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")

    known = {
        "corpus",
        "output_dir",
        "models",
        "variants",
        "provider",
        "cassette",
        "record",
        "params",
        "feedback_rounds",
        "bugfix_cap",
        "timeout_s",
        "jobs",
        "runner",
        "template_dir",
        "quality_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    base = config_path.parent

    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (base / p)

    corpus = resolve(str(_require(raw, "corpus")))
    output_dir = resolve(str(_require(raw, "output_dir")))
    models = _string_tuple(_require(raw, "models"), "models")
    if len(set(models)) != len(models):
        raise ConfigError("models list contains duplicates")
    variants = _parse_variants(_require(raw, "variants"))

    provider = raw.get("provider", "scripted")
    if provider not in PROVIDERS:
        raise ConfigError(
            f"provider must be one of {', '.join(PROVIDERS)}, got {provider!r}"
        )
    cassette = raw.get("cassette")
    record = bool(raw.get("record", False))
    if provider == "replay" and not cassette:
        raise ConfigError("replay provider needs a cassette path")
    if record and not cassette:
        raise ConfigError("recording needs a cassette path")

    params_raw = raw.get("params", {})
    if not isinstance(params_raw, dict):
        raise ConfigError('"params" must be a mapping')
    extra = set(params_raw) - _PARAM_KEYS
    if extra:
        raise ConfigError(f"unknown params keys: {', '.join(sorted(extra))}")
    params = GenerationParams(**params_raw)

    feedback_rounds = int(raw.get("feedback_rounds", 1))
    bugfix_cap = int(raw.get("bugfix_cap", 3))
    if feedback_rounds < 0 or bugfix_cap < 0:
        raise ConfigError("feedback_rounds and bugfix_cap must be non-negative")
    timeout_s = float(raw.get("timeout_s", 480.0))
    if timeout_s <= 0:
        raise ConfigError("timeout_s must be positive")
    jobs = int(raw.get("jobs", 1))
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")

    runner_raw = raw.get("runner", [])
    runner = _string_tuple(runner_raw, "runner") if runner_raw else ()

    return ExperimentConfig(
        corpus=corpus,
        output_dir=output_dir,
        models=models,
        variants=variants,
        digest=config_digest(raw),
        provider=provider,
        cassette=resolve(str(cassette)) if cassette else None,
        record=record,
        params=params,
        feedback_rounds=feedback_rounds,
        bugfix_cap=bugfix_cap,
        timeout_s=timeout_s,
        jobs=jobs,
        runner=runner,
        template_dir=resolve(str(raw["template_dir"])) if raw.get("template_dir") else None,
        quality_dir=resolve(str(raw["quality_dir"])) if raw.get("quality_dir") else None,
    )

"""Tests for experiment config loading and the resume manifest."""

import pytest
import yaml

from cascade.config import load_config
from cascade.errors import ConfigError
from cascade.manifest import Manifest, open_for_resume
from cascade.process import ProcessVariant, RunDescriptor


def base_config():
    return {
        "corpus": "corpus",
        "output_dir": "out",
        "models": ["gpt-4o", "llama-3"],
        "variants": ["RawPrompt", "WaterfallFull"],
    }


def write_config(tmp_path, overrides=None, drop=()):
    raw = base_config()
    raw.update(overrides or {})
    for key in drop:
        raw.pop(key, None)
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


class TestLoadConfig:
    def test_minimal_config(self, tmp_path):
        config = load_config(write_config(tmp_path))
        assert config.corpus == tmp_path / "corpus"
        assert config.output_dir == tmp_path / "out"
        assert config.runs_dir == tmp_path / "out" / "runs"
        assert config.models == ("gpt-4o", "llama-3")
        assert config.variants == (
            ProcessVariant.RAW_PROMPT,
            ProcessVariant.WATERFALL_FULL,
        )
        assert config.provider == "scripted"
        assert config.params.temperature == 0.8
        assert config.bugfix_cap == 3

    def test_absolute_paths_kept(self, tmp_path):
        config = load_config(
            write_config(tmp_path, {"corpus": str(tmp_path / "elsewhere")})
        )
        assert config.corpus == tmp_path / "elsewhere"

    def test_params_forwarded(self, tmp_path):
        config = load_config(
            write_config(tmp_path, {"params": {"temperature": 0.2, "seed": 7}})
        )
        assert config.params.temperature == 0.2
        assert config.params.seed == 7

    @pytest.mark.parametrize("key", ["corpus", "output_dir", "models", "variants"])
    def test_required_keys(self, tmp_path, key):
        with pytest.raises(ConfigError, match=key):
            load_config(write_config(tmp_path, drop=(key,)))

    def test_unknown_top_level_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config keys: modles"):
            load_config(write_config(tmp_path, {"modles": ["x"]}))

    def test_unknown_variant_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown variant 'Agile'"):
            load_config(write_config(tmp_path, {"variants": ["Agile"]}))

    def test_duplicate_models_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicates"):
            load_config(write_config(tmp_path, {"models": ["m1", "m1"]}))

    def test_duplicate_variants_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicates"):
            load_config(
                write_config(tmp_path, {"variants": ["RawPrompt", "RawPrompt"]})
            )

    def test_replay_needs_cassette(self, tmp_path):
        with pytest.raises(ConfigError, match="cassette"):
            load_config(write_config(tmp_path, {"provider": "replay"}))

    def test_record_needs_cassette(self, tmp_path):
        with pytest.raises(ConfigError, match="cassette"):
            load_config(write_config(tmp_path, {"record": True}))

    def test_unknown_provider_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="provider"):
            load_config(write_config(tmp_path, {"provider": "psychic"}))

    def test_unknown_params_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown params keys: top_p"):
            load_config(write_config(tmp_path, {"params": {"top_p": 0.9}}))

    def test_invalid_counts_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"bugfix_cap": -1}))
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"jobs": 0}))
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"timeout_s": 0}))

    def test_non_mapping_root_rejected(self, tmp_path):
        path = tmp_path / "experiment.yaml"
        path.write_text("- just\n- a list\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")


class TestConfigDigest:
    def test_same_content_same_digest(self, tmp_path):
        first = load_config(write_config(tmp_path))
        second = load_config(write_config(tmp_path))
        assert first.digest == second.digest

    def test_any_setting_changes_digest(self, tmp_path):
        first = load_config(write_config(tmp_path))
        second = load_config(write_config(tmp_path, {"bugfix_cap": 2}))
        assert first.digest != second.digest


def descriptor():
    return RunDescriptor("t1", ProcessVariant.WATERFALL_FULL, "m1")


class TestManifest:
    def test_save_and_load_round_trip(self, tmp_path):
        manifest = Manifest(config_digest="abc")
        manifest.mark(descriptor(), "Completed")
        manifest.save(tmp_path)
        loaded = Manifest.load(tmp_path)
        assert loaded == manifest
        assert loaded.runs[descriptor().run_id]["variant"] == "WaterfallFull"

    def test_load_missing_returns_none(self, tmp_path):
        assert Manifest.load(tmp_path) is None

    def test_reusable_requires_record_on_disk(self, tmp_path):
        manifest = Manifest(config_digest="abc")
        manifest.mark(descriptor(), "Completed")
        runs_dir = tmp_path / "runs"
        assert manifest.reusable_ids(runs_dir) == set()
        record_dir = runs_dir / descriptor().run_id
        record_dir.mkdir(parents=True)
        (record_dir / "record.json").write_text("{}", encoding="utf-8")
        assert manifest.reusable_ids(runs_dir) == {descriptor().run_id}

    def test_failed_runs_never_reusable(self, tmp_path):
        manifest = Manifest(config_digest="abc")
        manifest.mark(descriptor(), "GatewayFailed")
        record_dir = tmp_path / "runs" / descriptor().run_id
        record_dir.mkdir(parents=True)
        (record_dir / "record.json").write_text("{}", encoding="utf-8")
        assert manifest.reusable_ids(tmp_path / "runs") == set()


class TestOpenForResume:
    def test_fresh_when_nothing_saved(self, tmp_path):
        manifest = open_for_resume(tmp_path, "abc", resume=True)
        assert manifest.runs == {}

    def test_resume_keeps_existing_marks(self, tmp_path):
        manifest = Manifest(config_digest="abc")
        manifest.mark(descriptor(), "Completed")
        manifest.save(tmp_path)
        resumed = open_for_resume(tmp_path, "abc", resume=True)
        assert descriptor().run_id in resumed.runs

    def test_changed_config_refused(self, tmp_path):
        Manifest(config_digest="abc").save(tmp_path)
        with pytest.raises(ConfigError, match="refusing to resume"):
            open_for_resume(tmp_path, "different", resume=True)

    def test_no_resume_ignores_saved_state(self, tmp_path):
        manifest = Manifest(config_digest="abc")
        manifest.mark(descriptor(), "Completed")
        manifest.save(tmp_path)
        fresh = open_for_resume(tmp_path, "different", resume=False)
        assert fresh.runs == {}
        assert fresh.config_digest == "different"

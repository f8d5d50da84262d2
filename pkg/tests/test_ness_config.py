import json

import pytest

from ness_config import DEFAULT_TOLERANCES, ToleranceConfig, load_settings
from ness_errors import ConfigError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("NESS_CONFIG", "NESS_JOBS", "NESS_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def test_shipped_defaults_match_built_ins():
    settings = load_settings()
    assert settings.tolerances == DEFAULT_TOLERANCES
    assert settings.jobs == 1
    assert settings.log_level == "WARNING"


def test_defaults_file(tmp_path):
    path = tmp_path / "defaults.json"
    path.write_text(json.dumps({"ness_defaults": {"tolerances": {"bound_rtol": 1e-6}, "jobs": 3,
                                                   "log_level": "debug"}}))
    settings = load_settings(str(path))
    assert settings.tolerances.bound_rtol == 1e-6
    assert settings.tolerances.psd_rtol == DEFAULT_TOLERANCES.psd_rtol
    assert settings.jobs == 3
    assert settings.log_level == "DEBUG"


def test_missing_or_broken_file_falls_back(tmp_path):
    assert load_settings(str(tmp_path / "missing.json")).tolerances == DEFAULT_TOLERANCES
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert load_settings(str(broken)).jobs == 1


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("NESS_JOBS", "4")
    monkeypatch.setenv("NESS_LOG_LEVEL", "info")
    settings = load_settings(str(tmp_path / "missing.json"))
    assert settings.jobs == 4
    assert settings.log_level == "INFO"


def test_non_integer_jobs_ignored(tmp_path, monkeypatch):
    monkeypatch.setenv("NESS_JOBS", "many")
    assert load_settings(str(tmp_path / "missing.json")).jobs == 1


def test_config_path_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "defaults.json"
    path.write_text(json.dumps({"jobs": 2}))
    monkeypatch.setenv("NESS_CONFIG", str(path))
    assert load_settings().jobs == 2


@pytest.mark.parametrize("data", [{"made_up_rtol": 1e-3}, {"psd_rtol": "tight"}])
def test_invalid_tolerances(data):
    with pytest.raises(ConfigError):
        ToleranceConfig.from_dict(data)


def test_empty_tolerances_are_defaults():
    assert ToleranceConfig.from_dict(None) == DEFAULT_TOLERANCES
    assert ToleranceConfig.from_dict(DEFAULT_TOLERANCES.to_dict()) == DEFAULT_TOLERANCES

"""Config loading: defaults from the environment, files and overrides."""

from pathlib import Path

import pytest
import yaml

from conftest import tiny_config_dict
from drum_accompaniment import config as config_module
from drum_accompaniment.config import load_config, parse_overrides
from drum_accompaniment.errors import ConfigError


def test_run_dir_defaults_to_the_environment(monkeypatch, tmp_path):
    path = tmp_path / "no_paths.yaml"
    path.write_text(yaml.safe_dump(tiny_config_dict()))
    monkeypatch.setattr(config_module, "RUN_DIR", tmp_path / "runs")
    config = load_config(path)
    assert Path(config.paths.run_dir) == tmp_path / "runs" / "default"


def test_config_file_run_dir_wins(monkeypatch, tmp_path, tiny_config_file):
    monkeypatch.setattr(config_module, "RUN_DIR", tmp_path / "elsewhere")
    config = load_config(tiny_config_file)
    assert Path(config.paths.run_dir) == tmp_path / "run"
    config = load_config(tiny_config_file, [f"paths.run_dir={tmp_path / 'other'}"])
    assert Path(config.paths.run_dir) == tmp_path / "other"


def test_overrides_use_yaml_scalars():
    assert parse_overrides(["lm.seq_len=32", "sampling.top_k=4", "paths.run_dir=runs/x"]) == {
        "lm": {"seq_len": 32},
        "sampling": {"top_k": 4},
        "paths": {"run_dir": "runs/x"},
    }


def test_malformed_override():
    with pytest.raises(ConfigError, match="key.path=value"):
        parse_overrides(["lm.seq_len"])


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.yaml")

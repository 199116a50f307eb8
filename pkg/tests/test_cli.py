from __future__ import annotations

import json
import logging

import pytest
from typer.testing import CliRunner

from config.logger_config import set_console_level
from Interface.cli import app
from tests.helpers import write_tiny_toml

runner = CliRunner()


@pytest.fixture
def config_file(tmp_path):
    return write_tiny_toml(tmp_path / "tiny.toml")


def _invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def test_gen_data_writes_the_data_directory(config_file, tmp_path):
    out = tmp_path / "out"
    result = _invoke("gen-data", "--config", config_file, "--out", out)
    assert result.exit_code == 0, result.output
    for name in ("catalog.jsonl", "queries.jsonl", "traffic.jsonl", "relevance.jsonl", "manifest.json"):
        assert (out / "data" / name).is_file()
    verified = _invoke("verify", out / "data")
    assert verified.exit_code == 0
    assert json.loads(verified.stdout)["missing"] == []


def test_bad_config_exits_with_code_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[generator]\nn_items = -4\n", encoding="utf-8")
    result = _invoke("gen-data", "--config", bad, "--out", tmp_path / "out")
    assert result.exit_code == 2


def test_unknown_mode_exits_with_code_2(config_file, tmp_path):
    out = tmp_path / "out"
    _invoke("gen-data", "--config", config_file, "--out", out)
    result = _invoke("train", "s1", "--config", config_file, "--out", out, "--mode", "S3")
    assert result.exit_code == 2


def test_training_without_data_exits_with_code_3(config_file, tmp_path):
    result = _invoke("train", "s1", "--config", config_file, "--out", tmp_path / "empty", "--mode", "S1")
    assert result.exit_code == 3


def test_s2_before_s1_in_the_chained_mode_exits_with_code_3(config_file, tmp_path):
    out = tmp_path / "out"
    assert _invoke("gen-data", "--config", config_file, "--out", out).exit_code == 0
    result = _invoke("train", "s2", "--config", config_file, "--out", out, "--mode", "S1+S2")
    assert result.exit_code == 3
    assert "s1" in result.output


def test_eval_before_predict_exits_with_code_3(config_file, tmp_path):
    out = tmp_path / "out"
    _invoke("gen-data", "--config", config_file, "--out", out)
    result = _invoke("eval", "ctr", "--config", config_file, "--out", out, "--mode", "S1")
    assert result.exit_code == 3


def test_train_s1_reports_steps(config_file, tmp_path):
    out = tmp_path / "out"
    _invoke("gen-data", "--config", config_file, "--out", out)
    result = _invoke("train", "s1", "--config", config_file, "--out", out, "--mode", "S1")
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["steps"] > 0
    assert payload["checkpoint"].endswith("encoder_s1.ctrl")


def test_report_without_runs_exits_with_code_3(config_file, tmp_path):
    result = _invoke("report", "--config", config_file, "--out", tmp_path / "out")
    assert result.exit_code == 3


def test_verify_flags_a_tampered_file(config_file, tmp_path):
    out = tmp_path / "out"
    _invoke("gen-data", "--config", config_file, "--out", out)
    with (out / "data" / "traffic.jsonl").open("a", encoding="utf-8") as fh:
        fh.write("\n")
    result = _invoke("verify", out / "data")
    assert result.exit_code == 1
    assert json.loads(result.stdout)["mismatched"] == ["traffic.jsonl"]


@pytest.fixture
def restore_console_level():
    yield
    set_console_level(logging.INFO)


def test_verbosity_flags(config_file, tmp_path, restore_console_level):
    result = _invoke("--quiet", "gen-data", "--config", config_file, "--out", tmp_path / "out")
    assert result.exit_code == 0, result.output
    assert _invoke("-v", "-q", "gen-data", "--config", config_file).exit_code == 2

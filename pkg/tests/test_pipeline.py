from __future__ import annotations

import csv

import pytest

from App.ablation import TABLE_FILE, assemble_table, collect_reports, run_ablation
from App.manifest import read_manifest, require_valid_manifest, verify_manifest
from App.pipeline import (
    GEOMETRY_FILE,
    MODES,
    PAIRS_FILE,
    SCORES_FILE,
    data_dir,
    encode,
    evaluate_ctr,
    evaluate_search,
    generate_data,
    mode_spec,
    predict,
    run_dir,
    run_mode,
    train_ctr_stage,
    train_encoder,
)
from config.config import config_from_mapping
from Src.common.errors import AblationError, ConfigError, ProvenanceError
from Src.common.io import read_json, read_jsonl, sha256_file
from Src.dataset.storage import DataDirectory
from Src.dataset.traffic import recount_exposure, split_by_day
from Src.encoder.model import EncoderModel
from Src.evaluation.report import REPORT_FILE
from Src.model.checkpoint import Provenance
from tests.helpers import tiny_mapping


def _config(out, **overrides):
    payload = tiny_mapping(**overrides)
    payload["output_dir"] = str(out)
    return config_from_mapping(payload)


@pytest.fixture(scope="module")
def debias_run(tmp_path_factory):
    cfg = _config(tmp_path_factory.mktemp("debias") / "out")
    generate_data(cfg)
    for stage in ("s1", "s2"):
        train_encoder(cfg, "S1+S2+D", stage)
    encode(cfg, "S1+S2+D")
    directory = run_dir(cfg, "S1+S2+D")
    encoder_sha = sha256_file(directory / "encoder_s2.ctrl")
    train_ctr_stage(cfg, "S1+S2+D")
    predict(cfg, "S1+S2+D")
    evaluate_search(cfg, "S1+S2+D")
    report = evaluate_ctr(cfg, "S1+S2+D")
    return cfg, directory, encoder_sha, report


def test_unknown_mode_and_stage_are_config_errors(tiny_config):
    with pytest.raises(ConfigError):
        mode_spec("S3")
    with pytest.raises(ConfigError):
        train_encoder(tiny_config, "S1", "s2")


def test_mode_table():
    assert list(MODES) == ["ResNetC-analog", "S1", "S2", "S1+S2", "S1+S2+D"]
    assert MODES["S1+S2+D"].debias and not MODES["S1+S2"].debias
    assert MODES["S1+S2"].final_stage == "s2"


def test_generated_data_has_a_valid_manifest(tiny_config):
    target = generate_data(tiny_config)
    manifest = require_valid_manifest(target)
    assert manifest.kind == "data"
    assert {a.path for a in manifest.artifacts} >= {"catalog.jsonl", "traffic.jsonl", "config.resolved.json"}


def test_encoder_is_untouched_by_ctr_training(debias_run):
    _, directory, encoder_sha, _ = debias_run
    assert sha256_file(directory / "encoder_s2.ctrl") == encoder_sha
    chain = {entry["artifact"]: entry for entry in read_manifest(directory).provenance}
    assert chain["ctr.ctrl"]["stage"] == "ctr"
    assert chain["ctr.ctrl"]["parent_hash"] == encoder_sha
    assert chain["encoder_s2.ctrl"]["parent_hash"] == chain["encoder_s1.ctrl"]["sha256"]


def test_debias_run_writes_its_artifacts(debias_run):
    cfg, directory, _, report = debias_run
    for name in (SCORES_FILE, GEOMETRY_FILE, PAIRS_FILE, REPORT_FILE, "items_fused.vemb", "ctr_epochs.jsonl"):
        assert (directory / name).is_file(), name
    rows = read_jsonl(directory / SCORES_FILE)
    assert rows and set(rows[0]) == {"query_id", "item_id", "y", "y_hat"}
    assert all(0.0 < r["y_hat"] < 1.0 for r in rows)
    assert set(read_json(directory / GEOMETRY_FILE)) == {"pairs", "gap_s2", "gap_fused", "narrowed"}
    assert verify_manifest(directory).ok


def test_debias_report_fields(debias_run):
    cfg, _, _, report = debias_run
    assert report.mode == "S1+S2+D"
    assert 0.0 <= report.hr <= 1.0
    assert sorted(report.lr_at) == sorted(report.cr_at) == [5, 10]
    assert len(report.auc_train) == cfg.ctr.epochs
    assert report.geometry is not None
    assert report.config["impression_window"] == "whole simulation"
    assert report.config["debias_impression_window"] == "training days"
    assert report.config["k_values"] == [5, 10]


def test_mined_positives_are_rare_within_the_training_days(debias_run):
    cfg, directory, _, _ = debias_run
    data = DataDirectory(data_dir(cfg))
    train, _ = split_by_day(data.events, cfg.generator.n_days, cfg.ctr.test_days)
    seen = {it.item_id: it.impressions for it in recount_exposure(data.items, train)}
    positives = {row["positive_id"] for row in read_jsonl(directory / PAIRS_FILE)}
    assert positives
    assert all(seen[p] < cfg.debias.non_displayed_threshold for p in positives)


def test_replaced_encoder_breaks_prediction_provenance(tmp_path):
    cfg = _config(tmp_path / "out")
    generate_data(cfg)
    run_mode(cfg, "S2")
    directory = run_dir(cfg, "S2")
    model = EncoderModel.load(directory / "encoder_s2.ctrl")
    model.body.layers[0].weight.data[0, 0] += 1.0
    model.save(directory / "encoder_s2.ctrl", Provenance("s2"))
    with pytest.raises(ProvenanceError):
        predict(cfg, "S2")


def test_same_seed_gives_byte_identical_reports(tmp_path):
    outputs = []
    for name in ("a", "b"):
        cfg = _config(tmp_path / name)
        generate_data(cfg)
        run_mode(cfg, "S1")
        directory = run_dir(cfg, "S1")
        outputs.append(
            ((directory / REPORT_FILE).read_bytes(), (directory / SCORES_FILE).read_bytes())
        )
    assert outputs[0] == outputs[1]


def test_tiny_ablation_assembles_every_mode(tmp_path):
    cfg = _config(tmp_path / "out")
    path = run_ablation(cfg)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["mode", "HR"]
    assert [r[0] for r in rows[1:]] == list(MODES)
    assert path.name == TABLE_FILE
    assert require_valid_manifest(cfg.output_dir).kind == "table"
    assert len(collect_reports(cfg, ["S1", "S2"])) == 2


def test_ablation_failure_names_the_mode(tmp_path):
    cfg = _config(tmp_path / "out", s2={"negatives_per_pair": 500})
    with pytest.raises(AblationError) as info:
        run_ablation(cfg, ["S1", "S2"])
    assert info.value.mode == "S2"
    assert info.value.exit_code == 2


def test_table_from_partial_runs(tmp_path):
    cfg = _config(tmp_path / "out")
    generate_data(cfg)
    run_mode(cfg, "S1")
    path = assemble_table(cfg)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2 and lines[1].startswith("S1,")

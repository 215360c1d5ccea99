import json
import os

import pytest
from typer.testing import CliRunner

from ovavss.cli import app
from ovavss.config import get_settings

runner = CliRunner()


@pytest.fixture
def config_file(tmp_path, make_cfg):
    path = tmp_path / "cfg.json"
    path.write_text(make_cfg(tmp_path / "data").model_dump_json())
    return path


def test_gen_data_is_deterministic(tmp_path, config_file):
    for name in ("a", "b"):
        result = runner.invoke(app, ["gen-data", "--out", str(tmp_path / name), "--config", str(config_file)])
        assert result.exit_code == 0, result.output
        assert "wrote 8 samples" in result.output
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    first = sorted((tmp_path / "a" / "train").iterdir())[0]
    for f in first.iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "train" / first.name / f.name).read_bytes()


def test_gen_data_seed_changes_the_data(tmp_path, config_file):
    runner.invoke(app, ["gen-data", "--out", str(tmp_path / "a"), "--config", str(config_file)])
    runner.invoke(app, ["gen-data", "--out", str(tmp_path / "b"), "--config", str(config_file), "--seed", "99"])
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["seed"] != b["seed"]


def test_gen_data_requires_out():
    assert runner.invoke(app, ["gen-data"]).exit_code == 2


def test_bad_frame_size_exits_one(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"data": {"height": 48}}))
    result = runner.invoke(app, ["gen-data", "--out", str(tmp_path / "d"), "--config", str(path)])
    assert result.exit_code == 1
    assert "multiples of 32" in result.output


def test_dotenv_in_the_working_directory_is_loaded(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / ".env").write_text("OVAVSS_WORKERS=3\n")
    # recorded so the variable the .env file sets is removed again afterwards
    monkeypatch.setenv("OVAVSS_WORKERS", "1")
    monkeypatch.delenv("OVAVSS_WORKERS")
    get_settings.cache_clear()
    try:
        result = runner.invoke(app, ["ablate", "--suite", "nothing"])
        assert os.environ["OVAVSS_WORKERS"] == "3"
        assert get_settings().workers == 3
    finally:
        get_settings.cache_clear()
    assert result.exit_code == 2


def test_unknown_ablation_exits_one(dataset_root, config_file):
    result = runner.invoke(
        app, ["train", "--data", str(dataset_root), "--config", str(config_file), "--ablate", "heads=2"]
    )
    assert result.exit_code == 1
    assert "unknown ablation" in result.output


def test_eval_rejects_unknown_split(dataset_root, tmp_path, config_file):
    result = runner.invoke(
        app,
        ["eval", "--ckpt", str(tmp_path / "none.ckpt"), "--split", "holdout", "--data", str(dataset_root),
         "--config", str(config_file)],
    )
    assert result.exit_code == 2


def test_missing_checkpoint_exits_one(dataset_root, tmp_path, config_file):
    result = runner.invoke(
        app, ["eval", "--ckpt", str(tmp_path / "none.ckpt"), "--data", str(dataset_root), "--config", str(config_file)]
    )
    assert result.exit_code == 1
    assert "error:" in result.output


@pytest.mark.slow
def test_train_eval_predict(dataset_root, tmp_path, config_file):
    run = tmp_path / "run"
    common = ["--data", str(dataset_root), "--config", str(config_file)]
    result = runner.invoke(app, ["train", "--out", str(run), "--max-steps", "2", *common])
    assert result.exit_code == 0, result.output
    ckpt = run / "model.ckpt"
    assert ckpt.is_file()

    report = tmp_path / "report.json"
    table = tmp_path / "ablations.csv"
    result = runner.invoke(
        app,
        ["eval", "--ckpt", str(ckpt), "--split", "test", "--out", str(report), "--table", str(table),
         "--label", "full", *common],
    )
    assert result.exit_code == 0, result.output
    assert "label full | Base" in result.output
    payload = json.loads(report.read_text())
    assert payload["split"] == "test"
    assert 0.0 <= payload["harmonic"] <= 1.0
    assert table.read_text().splitlines()[0] == "label,Base,Novel,Harmonic,mIoU"

    sample = sorted((dataset_root / "val").iterdir())[0]
    pred = tmp_path / "pred"
    result = runner.invoke(app, ["predict", "--ckpt", str(ckpt), "--sample", str(sample), "--out", str(pred), *common])
    assert result.exit_code == 0, result.output
    assert (pred / "objects.json").is_file()
    assert (pred / "mask_0.pgm").is_file() and (pred / "overlay_1.ppm").is_file()


@pytest.mark.slow
def test_ablate_writes_one_row_per_ablation(dataset_root, tmp_path, config_file):
    table = tmp_path / "crop.csv"
    result = runner.invoke(
        app,
        ["ablate", "--suite", "crop", "--seed", "0", "--max-steps", "1", "--data", str(dataset_root),
         "--out", str(tmp_path / "runs"), "--table", str(table), "--config", str(config_file)],
    )
    assert result.exit_code == 0, result.output
    assert "label square_crop | Base" in result.output
    assert [line.split(",")[0] for line in table.read_text().splitlines()] == [
        "label", "square_crop", "crop_resize", "none"
    ]

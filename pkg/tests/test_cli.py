import json
import subprocess
import sys
from pathlib import Path

import pytest

import sdrforge
from conftest import make_fake_dataset
from sdrforge.cli import main

DATA = Path(__file__).parent / "data"
CONFIGS = Path(sdrforge.__file__).parent / "configs"


def _config(tmp_path, base="bounds/bounds_40.json", **over):
    cfg = json.loads((CONFIGS / base).read_text())
    cfg.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def _err_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("sdrforge: ")
    return err[0]


def test_unknown_config_key(tmp_path, capsys):
    cfg = _config(tmp_path, camera_bound=40)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    line = _err_line(capsys)
    assert "ConfigError" in line and "camera_bound" in line


def test_missing_config_is_io_error(tmp_path, capsys):
    assert main(["generate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 1
    assert "IoError" in _err_line(capsys)


def test_bad_seed_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit):
        main(["generate", "--config", "x", "--out", "y", "--seed", "-3"])


def test_evaluate_self_is_perfect(fake_dataset, tmp_path, capsys):
    root = fake_dataset(6)
    gt = json.loads((root / "annotations.json").read_text())
    pred = [{"image_id": a["image_id"], "category_id": a["category_id"], "bbox": a["bbox"], "score": 1.0}
            for a in gt["annotations"]]
    (tmp_path / "pred.json").write_text(json.dumps(pred))
    out = tmp_path / "eval.json"
    assert main(["evaluate", "--gt", str(root / "annotations.json"), "--pred", str(tmp_path / "pred.json"),
                 "--out", str(out)]) == 0
    r = json.loads(out.read_text())
    assert r["ap50"] == 1.0 and r["ap"] == 1.0
    assert "1.000" in capsys.readouterr().out


def test_evaluate_unknown_image(fake_dataset, tmp_path, capsys):
    root = fake_dataset(2)
    (tmp_path / "pred.json").write_text(json.dumps(
        [{"image_id": 99, "category_id": 1, "bbox": [0, 0, 4, 4], "score": 0.5}]))
    assert main(["evaluate", "--gt", str(root / "annotations.json"), "--pred", str(tmp_path / "pred.json"),
                 "--out", str(tmp_path / "e.json")]) == 1
    line = _err_line(capsys)
    assert "UnknownImageId" in line and "99" in line


def test_evaluate_lenient_flag(fake_dataset, tmp_path, capsys):
    root = fake_dataset(2)
    pred = [{"image_id": 0, "category_id": 1, "bbox": [0, 0, 4, 4], "score": 0.5, "extra": True}]
    (tmp_path / "pred.json").write_text(json.dumps(pred))
    args = ["evaluate", "--gt", str(root / "annotations.json"), "--pred", str(tmp_path / "pred.json"),
            "--out", str(tmp_path / "e.json")]
    assert main(args) == 1
    capsys.readouterr()
    assert main(args + ["--lenient"]) == 0


def test_evaluate_golden_fixture(tmp_path):
    out = tmp_path / "eval.json"
    assert main(["evaluate", "--gt", str(DATA / "golden_gt.json"), "--pred", str(DATA / "golden_pred.json"),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == json.loads((DATA / "golden_eval.json").read_text())


def _runs(tmp_path, per_group):
    runs = tmp_path / "runs"
    golden = json.loads((DATA / "golden_eval.json").read_text())
    for g, n in per_group.items():
        (runs / g).mkdir(parents=True)
        for k in range(n):
            r = {m: (None if v is None else min(1.0, v + 0.01 * k)) for m, v in golden.items()}
            (runs / g / f"run{k}.json").write_text(json.dumps(r))
    return runs


def test_aggregate(tmp_path, capsys):
    runs = _runs(tmp_path, {"a": 8, "b": 1})
    out = tmp_path / "table.csv"
    assert main(["aggregate", "--runs", str(runs), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "±" in printed
    rows = [line.split(",") for line in out.read_text().splitlines()]
    assert rows[0][:5] == ["group", "metric", "n", "mean", "ci_half_width"]
    a_ap = next(r for r in rows if r[:2] == ["a", "ap"])
    b_ap = next(r for r in rows if r[:2] == ["b", "ap"])
    assert a_ap[2] == "8" and float(a_ap[4]) > 0
    assert b_ap[2] == "1" and b_ap[4] == "-"
    table = json.loads((tmp_path / "table.json").read_text())
    assert len(table["a"]["ap"]["samples"]) == 8


def test_aggregate_empty(tmp_path, capsys):
    (tmp_path / "runs").mkdir()
    assert main(["aggregate", "--runs", str(tmp_path / "runs"), "--out", str(tmp_path / "t.csv")]) == 1
    assert "EmptyGroup" in _err_line(capsys)


def test_preview(tmp_path, capsys):
    from PIL import Image

    make_fake_dataset(str(tmp_path / "ds"), 5)
    out = tmp_path / "sheet.png"
    assert main(["preview", "--dataset", str(tmp_path / "ds"), "--out", str(out), "--cells", "2"]) == 0
    with Image.open(out) as im:
        assert im.size == (640, 480)
    make_fake_dataset(str(tmp_path / "empty"), 0)
    assert main(["preview", "--dataset", str(tmp_path / "empty"), "--out", str(out)]) == 1
    assert "IoError" in _err_line(capsys)


def test_augment_missing_dataset(tmp_path, capsys):
    assert main(["augment", "--dataset", str(tmp_path / "nope")]) == 1
    assert "IoError" in _err_line(capsys)


def test_augment_with_shipped_plan(fake_dataset, capsys):
    root = fake_dataset(10)
    assert main(["augment", "--dataset", str(root), "--plan", str(CONFIGS / "augment" / "noise.json")]) == 0
    assert "augmented 5 of 10" in capsys.readouterr().out


def test_generate_small_run(tmp_path, monkeypatch, capsys):
    out = tmp_path / "ds"
    monkeypatch.setenv("SDRFORGE_SEED", "11")
    assert main(["generate", "--config", str(CONFIGS / "bounds" / "bounds_40.json"), "--out", str(out),
                 "--frames", "50"]) == 0
    gt = json.loads((out / "annotations.json").read_text())
    assert len(gt["images"]) == 50
    assert [c["name"] for c in gt["categories"]] == ["drone"]
    assert gt["provenance"]["master_seed"] == 11
    with_drone = {a["image_id"] for a in gt["annotations"]}
    assert len(with_drone) >= 40

    # resume: an interrupted run re-renders only the missing frame and ends identical
    before = (out / "annotations.json").read_bytes()
    frame = sorted((out / "images").iterdir())[7]
    frame_bytes = frame.read_bytes()
    frame.unlink()
    assert main(["generate", "--config", str(CONFIGS / "bounds" / "bounds_40.json"), "--out", str(out),
                 "--frames", "50"]) == 0
    assert frame.read_bytes() == frame_bytes
    assert (out / "annotations.json").read_bytes() == before

    # the flag outranks the environment
    assert main(["generate", "--config", str(CONFIGS / "bounds" / "bounds_40.json"), "--out", str(tmp_path / "s"),
                 "--frames", "3", "--seed", "12"]) == 0
    assert main(["generate", "--config", str(CONFIGS / "bounds" / "bounds_40.json"), "--out", str(tmp_path / "t"),
                 "--frames", "3"]) == 0
    prov = [json.loads((tmp_path / d / "annotations.json").read_text())["provenance"] for d in "st"]
    assert prov[0]["master_seed"] == 12 and prov[1]["master_seed"] == 11


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sdrforge.cli", "evaluate", "--gt", str(DATA / "golden_gt.json"),
                           "--pred", str(tmp_path / "missing.json"), "--out", str(tmp_path / "e.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.startswith("sdrforge: IoError")

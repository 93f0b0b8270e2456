import json

import pytest

from sitrec.cli import main


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen-data", "--out", str(out), "--seed", "2", "--frames-per-verb", "20", "--n-verbs", "4", "--n-videos", "6", "--set", "box_size=[0.1,0.3]"]) == 0
    return out


@pytest.fixture(scope="module")
def stack(data):
    out = data.parent / "stack"
    assert main(["train", "--data", str(data), "--out", str(out), "--model", "stack", "--epochs", "1", "--set", "verb_epochs=1"]) == 0
    return out


def test_gen_data_applies_options(data):
    spec = json.loads((data / "manifest.json").read_text())["spec"]
    assert spec["box_size"] == [0.1, 0.3] and spec["n_verbs"] == 4


def test_usage_errors_exit_2(data, tmp_path, capsys):
    assert main([]) == 2
    assert main(["nonsense"]) == 2
    assert main(["gen-data", "--out", str(tmp_path), "--set", "colour=red"]) == 2
    assert main(["train", "--data", str(data), "--out", str(tmp_path / "x"), "--set", "xtf.bogus=1"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_runtime_errors_exit_1(data, tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path)]) == 1
    out = tmp_path / "xtf"
    assert main(["train", "--data", str(data), "--out", str(out), "--model", "xtf", "--epochs", "1"]) == 0
    assert main(["eval", "--checkpoint", str(out), "--setting", "top1"]) == 1
    assert "verb head" in capsys.readouterr().err


def test_eval_and_summarize(stack, tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main(["eval", "--checkpoint", str(stack), "--setting", "top5", "--out", str(report)]) == 0
    scores = json.loads(report.read_text())
    assert scores["setting"] == "top5-verb" and "verb-top5" in scores["scores"]
    capsys.readouterr()
    assert main(["summarize", "--checkpoint", str(stack), "--with-boxes", "noise:a", "noise:b"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out) == 2 and all("verb" in s for s in out)


def test_video_decode_and_report(data, tmp_path):
    ck = tmp_path / "video"
    assert main(["train", "--data", str(data), "--out", str(ck), "--model", "video", "--epochs", "1"]) == 0
    preds = tmp_path / "preds.json"
    assert main(["decode-video", "--checkpoint", str(ck), "--limit", "1", "--max-len", "20", "--out", str(preds)]) == 0
    assert len(json.loads(preds.read_text())) == 1
    rep = tmp_path / "rep.json"
    assert main(["report", "--predictions", str(preds), "--data", str(data), "--checkpoint", str(ck), "--out", str(rep)]) == 0
    assert "CIDEr" in json.loads(rep.read_text())

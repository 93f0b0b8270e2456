import numpy as np
import pytest
import torch

from sitrec.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from sitrec.config import ConfigError, TrainConfig, desk_config, from_dict, load_config, merge, parse_overrides
from sitrec.ontology import build_ontology


def test_parse_overrides_nests_and_types():
    assert parse_overrides(["xtf.layers=2", "lr=0.01", "localize=false", "model=tf"]) == {
        "xtf": {"layers": 2},
        "lr": 0.01,
        "localize": False,
        "model": "tf",
    }
    with pytest.raises(ConfigError, match="key=value"):
        parse_overrides(["lr"])


def test_merge_and_round_trip():
    cfg = merge(desk_config(), {"xtf": {"layers": 1}, "epochs": 3})
    assert cfg.xtf.layers == 1 and cfg.epochs == 3
    assert cfg.xtf.heads == desk_config().xtf.heads
    assert from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "data, match",
    [
        ({"bogus": 1}, "unknown config key"),
        ({"xtf": {"bogus": 1}}, "unknown config key"),
        ({"model": "cnn"}, "unknown model"),
        ({"loss": "hinge"}, "unknown loss"),
        ({"epochs": 0}, "positive"),
        ({"xtf": 3}, "mapping"),
    ],
)
def test_config_errors(data, match):
    with pytest.raises(ConfigError, match=match):
        merge(TrainConfig(), data)


def test_load_config_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("model: mlp\nmlp:\n  blocks: 2\n")
    cfg = load_config(path, {"epochs": 4}, desk=True)
    assert (cfg.model, cfg.mlp.blocks, cfg.epochs, cfg.d) == ("mlp", 2, 4, desk_config().d)
    assert load_config().d == TrainConfig().d


def _ckpt():
    onto = build_ontology({"v": ["a", "b"]}, ["x", "y"])
    state = {"noun": {"w": torch.arange(6, dtype=torch.float32).view(2, 3), "b": torch.zeros(2)}}
    return Checkpoint({"model": "mlp"}, onto, state, [{"epoch": 0}], {"d": 4})


def test_checkpoint_round_trip(tmp_path):
    ck = _ckpt()
    save_checkpoint(ck, tmp_path)
    loaded = load_checkpoint(tmp_path, expect_ontology=ck.ontology)
    assert loaded.digest() == ck.digest()
    assert loaded.ontology == ck.ontology and loaded.trace == ck.trace and loaded.extra == ck.extra
    assert torch.equal(loaded.state["noun"]["w"], ck.state["noun"]["w"])


def test_digest_tracks_weights():
    a, b = _ckpt(), _ckpt()
    assert a.digest() == b.digest()
    b.state["noun"]["b"][0] = 1e-7
    assert a.digest() != b.digest()


def test_checkpoint_corruption_detected(tmp_path):
    save_checkpoint(_ckpt(), tmp_path)
    arr = np.load(tmp_path / "tensors" / "noun.w.npy")
    arr[0, 0] += 1
    np.save(tmp_path / "tensors" / "noun.w.npy", arr)
    with pytest.raises(CheckpointError, match="corrupt"):
        load_checkpoint(tmp_path)


def test_checkpoint_ontology_checks(tmp_path):
    save_checkpoint(_ckpt(), tmp_path)
    with pytest.raises(CheckpointError, match="ontology mismatch"):
        load_checkpoint(tmp_path, expect_ontology=build_ontology({"v": ["a"]}, ["x"]))
    build_ontology({"v": ["b", "a"]}, ["x", "y"]).save(tmp_path / "ontology.json")
    with pytest.raises(CheckpointError, match="manifest digest"):
        load_checkpoint(tmp_path)


def test_not_a_checkpoint(tmp_path):
    with pytest.raises(CheckpointError, match="manifest"):
        load_checkpoint(tmp_path)


def test_float_fields_accept_exponent_strings():
    cfg = merge(desk_config(), parse_overrides(["lr=5e-4", "gamma=1"]))
    assert cfg.lr == 5e-4 and isinstance(cfg.gamma, float)
    with pytest.raises(ConfigError, match="number"):
        merge(desk_config(), {"lr": "fast"})

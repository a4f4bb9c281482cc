import json

import numpy as np
import pytest

from simad import io
from simad.cli import main
from simad.errors import CheckpointError, ConfigError, DataFormatError
from simad.model import ModelConfig, SimAD, score_series


# -- CSV -------------------------------------------------------------------------

def test_dataset_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3)) * 1e3
    y = (rng.random(50) < 0.2).astype(int)
    p = tmp_path / "d.csv"
    io.write_dataset(p, x, y, channels=["a", "b", "c"], timestamps=[f"t{i}" for i in range(50)])
    d = io.read_dataset(p)
    np.testing.assert_array_equal(d.values, x)
    np.testing.assert_array_equal(d.labels, y)
    assert d.channels == ["a", "b", "c"] and d.timestamps[3] == "t3"
    np.testing.assert_array_equal(io.read_labels(p), y)


def test_dataset_without_optional_columns(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x\n1.5\n2\n")
    d = io.read_dataset(p)
    assert d.labels is None and d.timestamps is None and d.values.shape == (2, 1)
    with pytest.raises(DataFormatError):
        d.require_labels(p)


@pytest.mark.parametrize("text,line,col", [
    ("a,b\n1,2\n3,oops\n", 3, 2),
    ("a,label\n1,0\n2,2\n", 3, 2),
    ("a,b\n1,2\n3\n", 3, None),
    ("a,b\n1,nan\n", 2, 2),
])
def test_dataset_errors_report_position(tmp_path, text, line, col):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataFormatError) as err:
        io.read_dataset(p)
    assert err.value.line == line and err.value.column == col
    assert str(err.value).startswith(f"{p}:{line}")


def test_scores_roundtrip(tmp_path):
    s = np.random.default_rng(1).random(20)
    p = tmp_path / "s.csv"
    io.write_scores(p, s, s / 2, s / 3)
    np.testing.assert_array_equal(io.read_scores(p), s)


# -- checkpoints -----------------------------------------------------------------

@pytest.fixture
def model():
    return SimAD(ModelConfig.tiny(), seed=3)


def test_checkpoint_roundtrip_bitwise(model, tmp_path):
    p = tmp_path / "m.ckpt"
    io.save_checkpoint(model, p)
    back = io.load_checkpoint(p)
    assert back.config == model.config
    assert back.params.keys() == model.params.keys()
    for k, v in model.params.items():
        assert back.params[k].data.tobytes() == v.data.tobytes()
    assert io.checkpoint_to_bytes(back) == p.read_bytes()


def test_every_corrupted_byte_is_detected(model):
    buf = bytearray(io.checkpoint_to_bytes(model))
    for i in range(len(buf)):
        bad = bytearray(buf)
        bad[i] ^= 0x10
        with pytest.raises(CheckpointError):
            io.checkpoint_from_bytes(bytes(bad))


def test_checkpoint_rejects_bad_magic_version_and_truncation(model):
    buf = io.checkpoint_to_bytes(model)
    with pytest.raises(CheckpointError, match="magic"):
        io.checkpoint_from_bytes(b"NOTSIMAD" + buf[8:])
    with pytest.raises(CheckpointError, match="version"):
        io.checkpoint_from_bytes(buf[:8] + (2).to_bytes(4, "little") + buf[12:])
    for cut in (4, 20, len(buf) - 1):
        with pytest.raises(CheckpointError):
            io.checkpoint_from_bytes(buf[:cut])


# -- run configs -----------------------------------------------------------------

@pytest.mark.parametrize("override", [
    "model.window_len=15",            # not a multiple of patch_len
    "model.heads=100000",             # more heads than hidden units
    "metrics.bias=\"constant:1.0\"",  # constant bias outside [0, 1)
    "metrics.threshold=\"median\"",
    "train.nope=1",
    "bogus.key=1",
])
def test_run_config_validation(override):
    with pytest.raises(ConfigError):
        io.load_run_config(overrides=[override])


def test_run_config_json_roundtrip(tmp_path):
    cfg = io.load_run_config(overrides=["train.epochs=3", "metrics.bias=ideal"])
    assert cfg.train.epochs == 3 and cfg.metrics.bias == "ideal"
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert io.load_run_config(p) == cfg
    p.write_text("{\n  \"model\": ,\n}")
    with pytest.raises(DataFormatError) as err:
        io.load_run_config(p)
    assert err.value.line == 2


# -- CLI -------------------------------------------------------------------------

def run(*argv):
    return main([str(a) for a in argv])


def test_cli_pipeline(tmp_path, capsys):
    data = tmp_path / "data.csv"
    assert run("gen-synth", "--out", data, "--length", 400, "--seed", 1) == 0
    d = io.read_dataset(data)
    assert d.values.shape == (400, 2) and d.labels.mean() == pytest.approx(0.05, abs=0.01)

    ckpt = tmp_path / "m.ckpt"
    assert run("train", "--config", "preset:tiny", "--data", data, "--rows", "0:200",
               "--out", ckpt, "--epochs", 1) == 0
    log = [json.loads(line) for line in (tmp_path / "m.ckpt.log.jsonl").read_text().splitlines()]
    assert len(log) == 4 and log[0]["iteration"] == 0

    scores = tmp_path / "s.csv"
    assert run("score", "--model", ckpt, "--data", data, "--out", scores) == 0
    s = io.read_scores(scores)
    assert s.shape == (400,)
    np.testing.assert_array_equal(s, score_series(io.load_checkpoint(ckpt), d.values)[0])

    report = tmp_path / "r.json"
    assert run("eval", "--scores", scores, "--labels", data, "--bias", "ideal", "--out", report) == 0
    r = io.read_report(report)
    assert r.bias_mode == "ideal" and r.threshold_mode == "best-f1"
    capsys.readouterr()


def test_cli_zero_epochs_writes_initialisation(tmp_path):
    data = tmp_path / "data.csv"
    io.write_dataset(data, np.random.default_rng(0).standard_normal((64, 2)))
    ckpt = tmp_path / "m.ckpt"
    assert run("train", "--config", "preset:tiny", "--data", data, "--out", ckpt, "--epochs", 0) == 0
    fresh = SimAD(ModelConfig.tiny(), seed=0)
    back = io.load_checkpoint(ckpt)
    for k, v in fresh.params.items():
        np.testing.assert_array_equal(back.params[k].data, v.data)


def test_cli_eval_bias_modes(tmp_path, capsys):
    y = np.zeros(1000, dtype=int)
    y[100:205] = 1                                 # ratio 0.105
    labels = tmp_path / "y.csv"
    io.write_labels(labels, y)
    scores = tmp_path / "s.csv"
    io.write_scores(scores, y.astype(float), y, y)
    capsys.readouterr()
    assert run("eval", "--scores", scores, "--labels", labels, "--bias", "ideal") == 0
    r = json.loads(capsys.readouterr().out)
    assert r["bias"] == pytest.approx(0.505513, abs=5e-7)
    assert r["F1"] == 1.0 and r["NAff-F1"] == 1.0
    assert run("eval", "--scores", scores, "--labels", labels, "--bias", "constant:0.5") == 0
    assert json.loads(capsys.readouterr().out)["bias"] == 0.5
    assert run("eval", "--scores", scores, "--labels", labels, "--bias", "constant:2") == 2


def test_cli_missing_file_is_usage_error(tmp_path, capsys):
    missing = tmp_path / "nope.ckpt"
    assert run("score", "--model", missing, "--data", missing, "--out", tmp_path / "s.csv") == 2
    assert str(missing) in capsys.readouterr().err


def test_cli_bad_config_and_bad_data(tmp_path, capsys):
    data = tmp_path / "data.csv"
    data.write_text("a,b\n1,x\n")
    assert run("train", "--config", "preset:tiny", "--data", data, "--out", tmp_path / "m") == 2
    assert f"{data}:2:2" in capsys.readouterr().err
    io.write_dataset(data, np.zeros((64, 2)))
    assert run("train", "--config", "preset:tiny", "--data", data, "--out", tmp_path / "m",
               "--set", "model.window_len=15") == 2
    assert run("train", "--config", "preset:nope", "--data", data, "--out", tmp_path / "m") == 2


def test_cli_corrupt_checkpoint_is_rejected(tmp_path, model, capsys):
    ckpt = tmp_path / "m.ckpt"
    buf = bytearray(io.checkpoint_to_bytes(model))
    buf[40] ^= 1
    ckpt.write_bytes(bytes(buf))
    data = tmp_path / "d.csv"
    io.write_dataset(data, np.zeros((32, 2)))
    assert run("score", "--model", ckpt, "--data", data, "--out", tmp_path / "s.csv") == 2
    assert "checksum" in capsys.readouterr().err


def test_cli_bench_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("bench-metrics", "--demo", 2, "--reps", 2, "--seed", 7, "--out", a) == 0
    assert run("bench-metrics", "--demo", 2, "--reps", 2, "--seed", 7, "--out", b) == 0
    assert a.read_text() == b.read_text()
    assert len(a.read_text().splitlines()) == 9
    assert run("bench-metrics", "--demo", 9) == 2


def test_cli_gen_demo_labels(tmp_path):
    out = tmp_path / "y.csv"
    assert run("gen-synth", "--kind", "demo:2", "--out", out) == 0
    y = io.read_labels(out)
    assert y.size == 1000 and 50 <= y.sum() <= 60
    assert run("gen-synth", "--kind", "weird", "--out", out) == 2

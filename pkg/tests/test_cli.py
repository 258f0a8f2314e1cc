import json

import numpy as np
import pytest

import cfmlab.theorems as theorems
from cfmlab import cli
from cfmlab.checkpoint import load_checkpoint
from cfmlab.config import ConfigError, RunConfig
from cfmlab.theorems import CheckRow
from cfmlab.train import CSV_COMMENT, CSV_HEADER, run_training


def tiny_config(outdir, **over):
    doc = {
        "loss": "consistency",
        "hidden": [16, 16],
        "batch": 16,
        "steps": 30,
        "eval_every": 10,
        "eval_n": 16,
        "lr": 1e-3,
        "ema_decay": 0.5,
        "seed": 3,
        "outdir": str(outdir),
    }
    doc.update(over)
    return doc


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        RunConfig.from_dict({"alhpa": 2.0})


def test_unknown_nested_keys_rejected():
    with pytest.raises(ConfigError, match="unknown p0 keys"):
        RunConfig.from_dict({"p0": {"kind": "standard-gaussian", "radius2": 1}})
    with pytest.raises(ConfigError, match="unknown coupling keys"):
        RunConfig.from_dict({"coupling": {"kind": "affine", "A": [[1]], "b": [0],
                                          "c": 1}})


def test_range_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"alpha": -1.0})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"dt": 0.6, "segments": 2})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"ema_decay": 1.5})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"loss": "wat"})


def test_distill_constraints():
    with pytest.raises(ConfigError, match="teacher"):
        RunConfig.from_dict({"loss": "distill"})
    with pytest.raises(ConfigError, match="single-segment"):
        RunConfig.from_dict({"loss": "distill", "teacher": "x.bin", "segments": 2})


def test_config_json_roundtrip(tmp_path):
    cfg = RunConfig.from_dict(tiny_config(tmp_path / "run"))
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_dict()), encoding="utf-8")
    again = RunConfig.from_json(p)
    assert again.to_dict() == cfg.to_dict()


# ---------------------------------------------------------------------------
# training runs
# ---------------------------------------------------------------------------

def test_zero_steps_run(tmp_path):
    cfg = RunConfig.from_dict(tiny_config(tmp_path / "run", steps=0))
    result = run_training(cfg, quiet=True)
    lines = (tmp_path / "run" / "metrics.csv").read_text().strip().split("\n")
    assert lines == [CSV_COMMENT, CSV_HEADER]
    ckpt = load_checkpoint(result["checkpoint"])
    assert ckpt.meta["step"] == 0
    # checkpoint equals initialization
    from cfmlab.train import build_field

    init = build_field(cfg)
    assert all(np.array_equal(a, b) for a, b in zip(ckpt.online, init.params))


def test_full_run_determinism(tmp_path):
    r1 = run_training(RunConfig.from_dict(tiny_config(tmp_path / "a")), quiet=True)
    r2 = run_training(RunConfig.from_dict(tiny_config(tmp_path / "b")), quiet=True)
    csv1 = (tmp_path / "a" / "metrics.csv").read_bytes()
    csv2 = (tmp_path / "b" / "metrics.csv").read_bytes()
    # wall_seconds differs between runs; compare everything before it
    strip = lambda blob: [line.rsplit(b",", 1)[0] for line in blob.split(b"\n")]
    assert strip(csv1) == strip(csv2)
    c1, c2 = load_checkpoint(r1["checkpoint"]), load_checkpoint(r2["checkpoint"])
    assert all(np.array_equal(a, b) for a, b in zip(c1.online, c2.online))
    assert all(np.array_equal(a, b) for a, b in zip(c1.ema, c2.ema))


def test_metrics_csv_has_documented_header(tmp_path):
    run_training(RunConfig.from_dict(tiny_config(tmp_path / "run", steps=10)),
                 quiet=True)
    lines = (tmp_path / "run" / "metrics.csv").read_text().strip().split("\n")
    assert lines[0] == "# cfmlab metrics v1"
    assert lines[1] == ("step,loss_total,loss_f,loss_v,grad_norm,w2_eval,"
                        "energy_eval,consistency_residual,wall_seconds")
    assert len(lines) == 3  # one eval row at step 10
    assert lines[2].startswith("10,")


def test_lockfile_blocks_second_writer(tmp_path):
    outdir = tmp_path / "run"
    outdir.mkdir()
    (outdir / ".lock").touch()
    with pytest.raises(RuntimeError, match="locked"):
        run_training(RunConfig.from_dict(tiny_config(outdir)), quiet=True)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_abort_saves_checkpoint_and_exits_3(tmp_path):
    cfg = tiny_config(tmp_path / "run", lr=1e40, steps=10, eval_every=5)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    code = cli.main(["train", "--config", str(cfg_path)])
    assert code == cli.EXIT_RUNTIME
    ckpt = load_checkpoint(tmp_path / "run" / "ckpt.bin")
    assert all(np.all(np.isfinite(p)) for p in ckpt.online)


# ---------------------------------------------------------------------------
# CLI: train / sample / eval / verify / distill
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("trained")
    cfg = RunConfig.from_dict(tiny_config(outdir / "run", steps=40, eval_every=20))
    result = run_training(cfg, quiet=True)
    return result["checkpoint"]


def test_cli_sample_accounting_and_determinism(trained, tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert cli.main(["sample", "--ckpt", trained, "--nfe-k", "1",
                     "--steps-per-segment", "1", "--n", "37", "--out", str(out1),
                     "--seed", "5"]) == 0
    assert cli.main(["sample", "--ckpt", trained, "--nfe-k", "1",
                     "--steps-per-segment", "1", "--n", "37", "--out", str(out2),
                     "--seed", "5"]) == 0
    a = (out1 / "samples.csv").read_bytes()
    b = (out2 / "samples.csv").read_bytes()
    assert a == b
    assert len(a.decode().strip().split("\n")) == 38  # header + 37 rows


def test_cli_sample_empty(trained, tmp_path):
    out = tmp_path / "s0"
    assert cli.main(["sample", "--ckpt", trained, "--nfe-k", "1",
                     "--steps-per-segment", "1", "--n", "0", "--out", str(out)]) == 0
    assert (out / "samples.csv").read_text() == "x0,x1\n"


def test_cli_sample_ppm(trained, tmp_path):
    out = tmp_path / "sp"
    assert cli.main(["sample", "--ckpt", trained, "--nfe-k", "2",
                     "--steps-per-segment", "1", "--n", "50", "--out", str(out),
                     "--ppm"]) == 0
    blob = (out / "samples.ppm").read_bytes()
    assert blob.startswith(b"P6\n512 512\n255\n")
    assert len(blob) == len(b"P6\n512 512\n255\n") + 512 * 512 * 3


def test_cli_eval_rows_and_determinism(trained, tmp_path):
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    for out in (out1, out2):
        assert cli.main(["eval", "--ckpt", trained, "--nfe", "2,6,8",
                         "--n", "64", "--out", str(out), "--seed", "9"]) == 0
    lines = (out1 / "eval.csv").read_text().strip().split("\n")
    assert lines[0] == "nfe,w2,energy,straightness,residual"
    assert len(lines) == 4
    assert [line.split(",")[0] for line in lines[1:]] == ["2", "6", "8"]
    assert (out1 / "eval.csv").read_bytes() == (out2 / "eval.csv").read_bytes()


def test_cli_eval_rejects_nfe_not_multiple_of_segments(tmp_path):
    outdir = tmp_path / "k2"
    cfg = RunConfig.from_dict(tiny_config(outdir, loss="multisegment", segments=2,
                                          steps=10, eval_every=10))
    ckpt = run_training(cfg, quiet=True)["checkpoint"]
    code = cli.main(["eval", "--ckpt", ckpt, "--nfe", "3", "--n", "16",
                     "--out", str(tmp_path / "e")])
    assert code == cli.EXIT_USAGE


def test_cli_verify_suite_and_exit_codes(tmp_path):
    out = tmp_path / "v"
    assert cli.main(["verify", "--suite", "theorem2", "--out", str(out)]) == 0
    lines = (out / "verify.csv").read_text().strip().split("\n")
    assert lines[0] == "check_name,parameter,residual,tolerance,pass"
    assert all(line.endswith(",true") for line in lines[1:])


def test_cli_verify_unknown_suite_is_usage_error(tmp_path, capsys):
    code = cli.main(["verify", "--suite", "nope", "--out", str(tmp_path)])
    assert code == cli.EXIT_USAGE
    assert "unknown suite" in capsys.readouterr().err


def test_cli_verify_failing_check_exits_2(tmp_path, monkeypatch):
    monkeypatch.setitem(theorems.SUITES, "alwaysfail", lambda: [
        CheckRow("synthetic", "x", 1.0, 0.5, False)])
    code = cli.main(["verify", "--suite", "alwaysfail", "--out", str(tmp_path)])
    assert code == cli.EXIT_CHECK_FAILED


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["train", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["eval", "--ckpt", "x", "--nfe", "a,b", "--n", "2",
                     "--out", str(tmp_path)]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_cli_distill_roundtrip(trained, tmp_path):
    cfg = tiny_config(tmp_path / "student", loss="distill", teacher=trained,
                      steps=10, eval_every=5)
    cfg_path = tmp_path / "distill.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    assert cli.main(["distill", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "student" / "ckpt.bin").exists()


def test_cli_train_rejects_distill_config(tmp_path, trained):
    cfg = tiny_config(tmp_path / "x", loss="distill", teacher=trained)
    cfg_path = tmp_path / "d.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    assert cli.main(["train", "--config", str(cfg_path)]) == cli.EXIT_USAGE

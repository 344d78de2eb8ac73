import json

import numpy as np
import pytest

from rmhmc.cli import ExperimentConfig, UsageError, build_model, cmd_diagnose, cmd_sample, cmd_tune, main


def test_config_file_roundtrip(tmp_path):
    cfg = ExperimentConfig(
        model="studentt",
        eps=0.31,
        steps=17,
        delta=3e-7,
        solver="newton",
        samples=123,
        seed=9,
        sweep=(1e-1, 1e-3),
        sigma_sq=100.0,
    )
    path = tmp_path / "config.ini"
    cfg.to_file(path)
    back = ExperimentConfig.from_file(path)
    assert back == cfg
    # serialize -> parse -> serialize is stable byte-for-byte
    path2 = tmp_path / "config2.ini"
    back.to_file(path2)
    assert path.read_text() == path2.read_text()


def test_unknown_model_is_usage_error():
    with pytest.raises(UsageError):
        ExperimentConfig(model="nope").resolved()


def test_defaults_follow_model_table():
    cfg = ExperimentConfig(model="banana").resolved()
    assert cfg.eps == 0.04 and cfg.steps == 20 and cfg.kappa == 8.0
    cfg = ExperimentConfig(model="funnel").resolved()
    assert cfg.eps == 0.2 and cfg.steps == 25 and cfg.kappa == 6.0
    cfg = ExperimentConfig(model="studentt").resolved()
    assert cfg.eps == 0.3 and cfg.steps == 20 and cfg.kappa == 8.0


def test_sample_writes_deterministic_outputs(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        cfg = ExperimentConfig(model="banana", samples=40, burnin=5, seed=3, out=str(out))
        assert cmd_sample(cfg) == 0
    assert (out_a / "positions.csv").read_bytes() == (out_b / "positions.csv").read_bytes()
    rows = (out_a / "positions.csv").read_text().strip().splitlines()
    assert len(rows) == 40
    assert all(len(r.split(",")) == 2 for r in rows)
    meta = json.loads((out_a / "meta.json").read_text())
    assert 0.0 <= meta["acceptance_rate"] <= 1.0


def test_sample_rejects_zero_samples(tmp_path):
    cfg = ExperimentConfig(model="banana", samples=0, out=str(tmp_path / "x"))
    with pytest.raises(UsageError):
        cmd_sample(cfg)


def test_cli_main_roundtrip(tmp_path):
    out = tmp_path / "run"
    code = main(
        [
            "sample",
            "--model",
            "gaussian",
            "--samples",
            "20",
            "--seed",
            "1",
            "--out",
            str(out),
            "--integrator",
            "leapfrog",
            "--eps",
            "0.3",
        ]
    )
    assert code == 0
    assert (out / "positions.csv").exists()


def test_cli_reports_usage_errors(tmp_path, capsys):
    code = main(["sample", "--model", "banana", "--samples", "0", "--out", str(tmp_path / "y")])
    assert code == 2
    assert "samples" in capsys.readouterr().err


def test_diagnose_requires_reference_sampler(tmp_path):
    cfg = ExperimentConfig(model="logistic", samples=10, num_points=3, out=str(tmp_path / "d"))
    with pytest.raises(UsageError):
        cmd_diagnose(cfg)


def test_diagnose_writes_long_format_table(tmp_path):
    out = tmp_path / "diag"
    cfg = ExperimentConfig(
        model="gaussian",
        dim=2,
        samples=60,
        num_points=6,
        seed=4,
        sweep=(1e-1, 1e-9),
        out=str(out),
    )
    assert cmd_diagnose(cfg) == 0
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert lines[0] == "model,delta,metric,statistic,value,seed"
    body = [line.split(",") for line in lines[1:]]
    assert {row[0] for row in body} == {"gaussian"}
    assert {float(row[1]) for row in body} == {1e-1, 1e-9}
    metrics = {row[2] for row in body}
    for name in ("are", "vpe", "l_p", "l_q", "projection_ks", "ess", "mmd2_abs", "sliced_w1", "kernel_difference", "rejection_agreement"):
        assert name in metrics
    report = json.loads((out / "report.json").read_text())
    assert report["fd_perturbation"] in (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3)
    # per-delta raw distributions serialize one value per line
    dist = (out / "are_delta_0.10000000000000001.csv").read_text().strip().splitlines()
    assert len(dist) == 6


def test_tune_writes_trace(tmp_path):
    out_a = tmp_path / "ta"
    out_b = tmp_path / "tb"
    for out in (out_a, out_b):
        cfg = ExperimentConfig(model="gaussian", dim=2, samples=25, seed=5, out=str(out))
        assert cmd_tune(cfg) == 0
    text_a = (out_a / "tuner_trace.csv").read_text()
    assert text_a == (out_b / "tuner_trace.csv").read_text()
    lines = text_a.strip().splitlines()
    assert lines[0] == "n,delta_n,delta_bar_n,L_n,L_bar_n"
    assert len(lines) == 26


def test_build_model_heart_fallback():
    cfg = ExperimentConfig(model="logistic").resolved()
    model = build_model(cfg)
    assert model.dim == 14
    assert model.X.shape == (270, 14)

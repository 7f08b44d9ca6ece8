import json

import pytest

from qkk import __version__
from qkk.cli import EXPERIMENTS, config_hash, main

TOMOGRAPHY = {"version": 1, "experiment": "tomography", "seed": 3,
              "grid": {"duration": 1.0, "n": 3072}, "n_clicks": 20000, "n_seeds": 3}
KK_TOO_WEAK = {"version": 1, "experiment": "kk", "seed": 1,
               "grid": {"t_start": 0.0, "dt": 1.0, "n": 512},
               "mode": {"spectral_width_bins": 12}, "alpha": 1.0, "shots": 200,
               "lo_to_signal": 1.5, "calibration_shots": 10000}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(path)


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_describe_every_experiment(name, capsys):
    assert main(["describe", name]) == 0
    text = capsys.readouterr().out
    assert text.startswith(f"{name}: ")
    assert "fields: version experiment" in text


def test_describe_unknown(capsys):
    assert main(["describe", "bogus"]) == 2
    assert "unknown experiment" in capsys.readouterr().err


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("bad", [
    "{not json",
    "[1, 2]",
    json.dumps({"version": 2, "experiment": "hd", "seed": 1}),
    json.dumps({"version": 1, "experiment": "teleport", "seed": 1}),
    json.dumps({"version": 1, "experiment": "hd"}),
    json.dumps({"version": 1, "experiment": "hd", "seed": 1, "grid": {"dt": 1.0, "n": 512},
                "mode": {"spectral_width_bins": 12}, "alpha": "three", "shots": 200}),
])
def test_config_errors_exit_2_without_outputs(bad, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, bad), "--out", str(out)]) == 2
    assert "config error" in capsys.readouterr().err
    assert not out.exists()


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_precondition_violation_exits_3(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, KK_TOO_WEAK), "--out", str(out)]) == 3
    assert "MinimumPhaseError" in capsys.readouterr().err
    assert not out.exists()


def test_config_hash_ignores_key_order():
    a = {"b": 1, "a": [1, 2]}
    assert config_hash(a) == config_hash(dict(reversed(list(a.items()))))


def test_reruns_are_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path, TOMOGRAPHY)
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert main(["run", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    capsys.readouterr()
    a, b = snapshot(tmp_path / "a"), snapshot(tmp_path / "b")
    assert a and a == b
    assert summary["config_hash"] == config_hash(TOMOGRAPHY)
    assert main(["run", cfg, "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert snapshot(tmp_path / "c") != a


def test_hilbert_oracle_summary(tmp_path, capsys):
    cfg = {"version": 1, "experiment": "hilbert_oracle", "seed": 1, "n": 1024, "n_signals": 3,
           "sentinel_cycles": 40}
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["experiment"] == "hilbert_oracle"
    assert summary["outputs"]


@pytest.mark.slow
def test_snr_compare_halves_dhd(tmp_path, capsys):
    cfg = {"version": 1, "experiment": "snr_compare", "seed": 9,
           "grid": {"t_start": 0.0, "dt": 1.0, "n": 512}, "mode": {"spectral_width_bins": 12},
           "alpha": [3.0, 1.0], "shots": 4000, "calibration_shots": 10000, "lo_to_signal": 10}
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["ratio_hd_dhd"] == pytest.approx(2.0, rel=0.15)

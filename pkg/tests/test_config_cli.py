import json
import os

import numpy as np
import pytest

from selfrepel.bench import run_bench
from selfrepel.cli import main
from selfrepel.config import RunConfig, parse_override
from selfrepel.errors import ConfigError
from selfrepel.integrate import read_trajectory_csv
from selfrepel.model import ModelSpec
from selfrepel.verify import read_csv, write_csv

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MINIMAL = os.path.join(ROOT, "configs", "minimal.yaml")


def write_yaml(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text)
    return str(p)


# configuration

def test_defaults_are_canonical():
    cfg = RunConfig()
    assert cfg.spec == ModelSpec(1, (1.0,))
    assert cfg.sim.representation == "reduced"


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="sim.dtt"):
        RunConfig.load(write_yaml(tmp_path, "sim:\n  dtt: 0.1\n"))
    with pytest.raises(ConfigError, match="extra"):
        RunConfig({"extra": {}})


def test_override_parsing():
    assert parse_override("sim.dt=0.005") == {"sim": {"dt": 0.005}}
    assert parse_override("model.a=[1, 0.5]") == {"model": {"a": [1, 0.5]}}
    with pytest.raises(ConfigError):
        parse_override("sim.dt")


def test_overrides_apply_after_file():
    cfg = RunConfig.load(MINIMAL, ["sim.t_end=2", "model.a=[2.0]"])
    assert cfg.sim.t_end == 2
    assert cfg.spec.a == (2.0,)


def test_invalid_model_is_config_error():
    with pytest.raises(ConfigError, match="a_k > 0"):
        RunConfig({"model": {"a": [1.0, 0.0]}})


def test_observation_times_include_analysis_times():
    cfg = RunConfig({"sim": {"t_end": 400.0},
                     "ensemble": {"observation_step": 150.0}})
    times = cfg.observation_times()
    for t in (0.0, 150.0, 300.0, 100.0, 200.0, 400.0):
        assert t in times
    assert list(times) == sorted(times)


def test_hash_ignores_output_dir():
    a = RunConfig({"output": {"dir": "x"}})
    b = RunConfig({"output": {"dir": "y"}})
    assert a.hash == b.hash
    assert a.hash != RunConfig({"sim": {"seed": 1}}).hash


# simulate

def test_simulate_minimal(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", MINIMAL, "--out", str(out)]) == 0
    header, data = read_trajectory_csv(out / "trajectory.csv")
    assert header == ["time", "x", "u1", "v1"]
    assert data.shape == (101, 4)
    man = json.loads((out / "manifest.json").read_text())
    assert {"config_hash", "seed", "versions"} <= set(man)


def test_simulate_is_byte_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--config", MINIMAL, "--seed", "99",
                     "--out", str(tmp_path / name)]) == 0
    for f in ("trajectory.csv", "trajectory.svg", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() != b""
    assert ((tmp_path / "a" / "trajectory.csv").read_bytes()
            == (tmp_path / "b" / "trajectory.csv").read_bytes())
    assert ((tmp_path / "a" / "trajectory.svg").read_bytes()
            == (tmp_path / "b" / "trajectory.svg").read_bytes())


def test_simulate_rejects_zero_coefficient(tmp_path, capsys):
    code = main(["simulate", "--config", MINIMAL, "--set", "model.a=[1, 0]",
                 "--out", str(tmp_path)])
    assert code == 2
    assert "a_k > 0" in capsys.readouterr().err


def test_simulate_unknown_key(tmp_path, capsys):
    assert main(["simulate", "--set", "sim.bogus=1", "--out", str(tmp_path)]) == 2
    assert "sim.bogus" in capsys.readouterr().err


def test_simulate_numerical_failure(tmp_path, capsys):
    code = main(["simulate", "--set", "sim.dt=5", "--set", "sim.t_end=5000",
                 "--set", "sim.representation=environment", "--out", str(tmp_path)])
    assert code == 3
    assert "t=" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2


# verify

def test_verify_invariant_passthrough(tmp_path):
    out = tmp_path / "v"
    code = main(["verify", "--suite", "invariant", "--out", str(out),
                 "--set", "analysis.invariant_source=pi_sample"])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["all_pass"] is True
    assert rep["reports"][0]["test"] == "invariant_gof"
    header, data = read_csv(out / "qq_invariant.csv")
    assert header[:2] == ["c1_theory", "c1_sample"]


def test_verify_generator_as_printed_fails(tmp_path):
    out = tmp_path / "g"
    code = main(["verify", "--suite", "generator", "--out", str(out),
                 "--set", "analysis.generator_variant=as-printed",
                 "--set", "analysis.generator_samples=200000"])
    assert code == 1
    rep = json.loads((out / "report.json").read_text())
    verdicts = {r["test"]: r["verdict"] for r in rep["reports"]}
    assert verdicts["generator_stationarity[c1^2]"] == "fail"
    assert verdicts["generator_as_printed_discrepancy[c1^2]"] == "pass"


def test_verify_small_ensemble_writes_plot_data(tmp_path):
    out = tmp_path / "s"
    args = ["verify", "--suite", "lln", "--out", str(out),
            "--set", "ensemble.n_paths=50", "--set", "sim.t_end=200",
            "--set", "ensemble.autocov_max_lag=5"]
    assert main(args) in (0, 1)
    rep = json.loads((out / "report.json").read_text())
    assert rep["reports"][0]["test"] == "lln"
    assert (out / "ensemble.json").exists()


def test_plot_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    cols = [rng.normal(size=20) * 10 ** k for k in range(-3, 4)]
    path = tmp_path / "d.csv"
    write_csv(path, ["c%d" % i for i in range(len(cols))], cols)
    header, data = read_csv(path)
    assert header == ["c%d" % i for i in range(len(cols))]
    for i, c in enumerate(cols):
        np.testing.assert_array_equal(data[:, i], c)
    # writing what was read gives the same bytes
    path2 = tmp_path / "e.csv"
    write_csv(path2, header, data.T)
    assert path.read_bytes() == path2.read_bytes()


# bench

def test_bench_report_shape():
    rep = run_bench(ModelSpec.canonical(), dt=0.01, horizons=(1.0, 2.0), repeats=1)
    assert len(rep["entries"]) == 6
    assert {e["representation"] for e in rep["entries"]} == {"history", "reduced",
                                                             "environment"}
    assert set(rep["per_step_ratios"]) == {"history", "reduced", "environment"}

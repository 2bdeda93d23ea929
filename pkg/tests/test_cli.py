"""End-to-end tests of the command-line interface."""

import json

import pytest
from click.testing import CliRunner

from offcmab.cli import cli


@pytest.fixture()
def runner():
    return CliRunner()


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture()
def cascading_instance(tmp_path):
    return _write(
        tmp_path / "inst.json",
        {"type": "cascading", "m": 6, "K": 2,
         "mu": [0.9, 0.7, 0.5, 0.3, 0.2, 0.1]},
    )


@pytest.fixture()
def cascading_config(tmp_path, cascading_instance):
    return _write(
        tmp_path / "cfg.json",
        {
            "instance": cascading_instance,
            "algorithms": [{"id": "clcb"}, {"id": "emp"}],
            "n_grid": [8, 16],
            "trials": 2,
            "base_seed": 7,
            "delta": 0.1,
            "collection": {"kind": "uniform"},
            "record_timing": False,
            "out": str(tmp_path / "res"),
        },
    )


def test_gen_dataset_jsonl(runner, tmp_path, cascading_instance):
    out = tmp_path / "ds.jsonl"
    result = runner.invoke(
        cli, ["gen-dataset", cascading_instance, "--n", "12", "--seed", "1",
              "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert len(lines) == 12
    rec = json.loads(lines[0])
    assert set(rec) == {"action", "triggered", "outcomes"}


def test_gen_dataset_ic(runner, tmp_path):
    inst = _write(
        tmp_path / "ic.json",
        {"type": "ic",
         "graph": {"nodes": 3, "edges": [[0, 1, 0.5], [1, 2, 0.5]]},
         "seed_probs": [0.5, 0.5, 0.5], "eta": None, "gamma": None},
    )
    out = tmp_path / "casc.jsonl"
    result = runner.invoke(
        cli, ["gen-dataset", inst, "--n", "5", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert len(lines) == 5
    assert isinstance(json.loads(lines[0]), list)


def test_run_writes_csv_and_json(runner, tmp_path, cascading_config):
    result = runner.invoke(cli, ["run", cascading_config])
    assert result.exit_code == 0, result.output
    csv_text = (tmp_path / "res.csv").read_text()
    assert csv_text.splitlines()[0] == "env,alg,n,trial,seed,gap,ms"
    meta = json.loads((tmp_path / "res.json").read_text())
    assert meta["config"]["base_seed"] == 7
    assert meta["dataset_hashes"]


def test_run_twice_is_byte_identical(runner, tmp_path, cascading_config):
    assert runner.invoke(cli, ["run", cascading_config]).exit_code == 0
    first = (tmp_path / "res.csv").read_bytes()
    assert runner.invoke(cli, ["run", cascading_config]).exit_code == 0
    assert (tmp_path / "res.csv").read_bytes() == first


def test_run_without_out_prints_csv(runner, tmp_path, cascading_instance):
    cfg = _write(
        tmp_path / "stdout.json",
        {"instance": cascading_instance, "algorithms": ["emp"],
         "n_grid": [8], "trials": 1, "base_seed": 0,
         "collection": {"kind": "uniform"}, "record_timing": False},
    )
    result = runner.invoke(cli, ["run", cfg])
    assert result.exit_code == 0
    assert result.output.startswith("env,alg,n,trial,seed,gap,ms")


def test_coverage_command(runner, tmp_path, cascading_instance):
    cfg = _write(
        tmp_path / "cov.json",
        {"instance": cascading_instance, "algorithms": ["clcb"],
         "n_grid": [16], "trials": 1, "base_seed": 0,
         "collection": {"kind": "uniform"}, "coverage_mc_samples": 5000},
    )
    result = runner.invoke(cli, ["coverage", cfg])
    assert result.exit_code == 0, result.output
    assert result.output.startswith("c_inf=")
    assert "bound_one=" in result.output


def test_online_command(runner, tmp_path):
    inst = _write(
        tmp_path / "cache.json",
        {"type": "cache", "m": 4, "k": 2, "p": [0.4, 0.3, 0.2, 0.1],
         "c": [0.9, 0.1, 0.8, 0.2], "noise": "none"},
    )
    cfg = _write(
        tmp_path / "on.json",
        {"instance": inst, "algorithms": [], "n_grid": [], "trials": 1,
         "base_seed": 0, "horizon": 20},
    )
    result = runner.invoke(cli, ["online", cfg])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0] == "trial,t,regret,cum_regret"
    assert len(lines) == 21


def test_gap_command(runner, tmp_path, cascading_instance):
    action = _write(tmp_path / "act.json", {"kind": "list", "members": [0, 1]})
    result = runner.invoke(cli, ["gap", cascading_instance, action])
    assert result.exit_code == 0
    assert float(result.output.strip()) == pytest.approx(0.0)


def test_config_error_exit_code_2(runner, tmp_path, cascading_instance):
    bad = _write(
        tmp_path / "bad.json",
        {"instance": cascading_instance, "algorithms": ["lfu"],
         "n_grid": [8], "trials": 1, "base_seed": 0},
    )
    result = runner.invoke(cli, ["run", bad])
    assert result.exit_code == 2
    assert "configuration error" in result.output


def test_runtime_error_exit_code_3(runner, tmp_path, cascading_instance):
    # arm id outside the instance triggers a runtime failure, not a config one
    action = _write(tmp_path / "act.json", {"kind": "list", "members": [0, 99]})
    result = runner.invoke(cli, ["gap", cascading_instance, action])
    assert result.exit_code == 3
    assert "runtime error" in result.output

import argparse
import subprocess
import sys

import pytest

from coopmcl import cli
from coopmcl.reference import scenario_document

from .conftest import write_scenario


@pytest.fixture(scope="module")
def short_path(tmp_path_factory):
    return write_scenario(tmp_path_factory.mktemp("cli"), scenario_document(n_particles=200, x_end=3.0))


def test_tick_range():
    assert cli.parse_tick_range("3:5") == range(3, 6)
    assert cli.parse_tick_range("7") == range(7, 8)
    for bad in ("5:3", "a:b", "-1:2"):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_tick_range(bad)


def test_run_with_snapshots(short_path, tmp_path, capsys):
    code = cli.main(["run", "--scenario", str(short_path), "--mode", "coop", "--seed", "3",
                     "--out", str(tmp_path), "--snapshots", "10:11"])
    assert code == cli.EXIT_OK
    assert (tmp_path / "run_coop_seed3.csv").exists()
    assert len(list(tmp_path.glob("particles_coop_seed3_*.csv"))) == 2 * 2 * 2
    assert "post_midpoint_median_error" in capsys.readouterr().out


def test_batch(short_path, tmp_path, capsys):
    assert cli.main(["batch", "--scenario", str(short_path), "--runs", "2", "--base-seed", "5", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "run_coop_seed5.csv", "run_coop_seed6.csv", "run_standalone_seed5.csv", "run_standalone_seed6.csv", "summary.csv",
    ]
    out = capsys.readouterr().out
    assert "coop: median" in out and "standalone: median" in out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fly"],
        ["run", "--scenario", "x.json"],
        ["run", "--scenario", "x.json", "--out", "o", "--mode", "solo"],
        ["run", "--scenario", "x.json", "--out", "o", "--seed", "-4"],
        ["batch", "--scenario", "x.json", "--runs", "0", "--out", "o"],
    ],
)
def test_bad_arguments_exit_2(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_missing_scenario_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--scenario", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_bad_scenario_field_exit_2(tmp_path, capsys):
    doc = scenario_document()
    doc["dt"] = -1
    path = write_scenario(tmp_path, doc)
    assert cli.main(["batch", "--scenario", str(path), "--runs", "1", "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "field 'dt'" in capsys.readouterr().err


def test_runtime_failure_exit_3(short_path, tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(cli.experiment, "run_scenario", boom)
    assert cli.main(["run", "--scenario", str(short_path), "--out", str(tmp_path)]) == cli.EXIT_RUNTIME
    assert "solver exploded" in capsys.readouterr().err
    assert cli.main(["batch", "--scenario", str(short_path), "--runs", "1", "--out", str(tmp_path)]) == cli.EXIT_RUNTIME
    assert (tmp_path / "summary.csv").exists()


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == cli.EXIT_OK


def test_module_entry_point(short_path, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "coopmcl.cli", "run", "--scenario", str(short_path), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr

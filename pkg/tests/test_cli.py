import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ppfsync.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, exit_code, main
from ppfsync.scenario import preset_path

BROKEN = Path(__file__).parent / "fixtures" / "broken"


@pytest.fixture
def runner():
    return CliRunner()


def test_exit_code_table():
    assert exit_code(False, 0) == EXIT_OK
    assert exit_code(False, 3) == EXIT_VIOLATION
    assert exit_code(True, 0) == EXIT_ABORT
    assert exit_code(True, 5) == EXIT_ABORT


def test_list_examples(runner):
    res = runner.invoke(main, ["list-examples"])
    assert res.exit_code == 0
    assert "example1" in res.output and "example2" in res.output


def test_validate_presets(runner):
    res = runner.invoke(main, ["validate", "example1", "example1_constant", "example2", "linear_demo",
                               str(preset_path("example1"))])
    assert res.exit_code == 0, res.output
    assert res.output.count(": ok") == 5


@pytest.mark.parametrize("path", sorted(BROKEN.glob("*.toml")), ids=lambda p: p.stem)
def test_validate_broken(runner, path):
    res = runner.invoke(main, ["validate", str(path)])
    assert res.exit_code == EXIT_CONFIG
    assert "INVALID" in res.output


def test_run_clean(runner, tmp_path):
    res = runner.invoke(main, ["run", "linear_demo", "--horizon", "0.5", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_OK, res.output
    for name in ("states.csv", "controls.csv", "errors.csv", "epsilon.csv", "weights.csv",
                 "events.jsonl", "report.json"):
        assert (tmp_path / name).is_file()


def test_run_transform_override(runner, tmp_path):
    res = runner.invoke(main, ["run", "--transform", "sign", "linear_demo", "--horizon", "0.2",
                               "--decimate", "1", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_OK, res.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["variant"] == "sign"
    assert report["summary"]["rows"] == 201


def test_run_env_output_root(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("PPF_SYNC_OUT", str(tmp_path))
    res = runner.invoke(main, ["run", "linear_demo", "--horizon", "0.1"])
    assert res.exit_code == EXIT_OK
    assert (tmp_path / "linear_demo" / "report.json").is_file()


def test_run_numeric_abort(runner, tmp_path):
    res = runner.invoke(main, ["run", "example1", "--horizon", "0.1", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_ABORT
    events = [json.loads(l) for l in (tmp_path / "events.jsonl").read_text().splitlines()]
    assert events[-1]["type"] == "numeric_abort"


def test_run_envelope_violation_exit(runner, tmp_path):
    # example 2 leaves the funnel near t = 0.1 s, well before it diverges
    res = runner.invoke(main, ["run", "example2", "--horizon", "0.3", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_VIOLATION, res.output


def test_run_malformed(runner):
    res = runner.invoke(main, ["run", str(BROKEN / "01_toml_syntax.toml")])
    assert res.exit_code == EXIT_CONFIG
    assert "line 39" in res.output


def test_run_bad_override(runner):
    res = runner.invoke(main, ["run", "linear_demo", "--step", "-1"])
    assert res.exit_code == EXIT_CONFIG
    assert "scenario.step" in res.output


def test_compare(runner, tmp_path):
    res = runner.invoke(main, ["compare", "linear_demo", "--horizon", "0.5", "--seed", "3",
                               "--out", str(tmp_path)])
    assert res.exit_code == EXIT_OK, res.output
    rep = json.loads((tmp_path / "compare.json").read_text())
    assert rep["sign"]["status"] == rep["erf"]["status"] == "completed"
    assert (tmp_path / "sign" / "states.csv").is_file() and (tmp_path / "erf" / "states.csv").is_file()


def test_check_gains(runner):
    res = runner.invoke(main, ["check-gains", "example1"])
    assert res.exit_code == 0
    assert "k required       1529.52" in res.output
    assert "H positive definite: yes" in res.output


def test_check_gains_unpinned(runner):
    res = runner.invoke(main, ["check-gains", str(BROKEN / "11_unpinned.toml")])
    assert res.exit_code == EXIT_CONFIG
    assert "no pinned node" in res.output


def test_check_gains_with_bounds(runner, tmp_path):
    text = preset_path("example1").read_text() + (
        "\n[bounds]\nalpha_m = 0.1\nw_m = 1.0\nf_m = 1.0\nw_ideal_m = 2.0\nsigma_max_lambda = 1.0\n")
    cfg = tmp_path / "with_bounds.toml"
    cfg.write_text(text)
    res = runner.invoke(main, ["check-gains", str(cfg)])
    assert res.exit_code == 0, res.output
    assert "||eps|| bound" in res.output

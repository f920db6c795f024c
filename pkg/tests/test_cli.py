import os

import yaml
from click.testing import CliRunner

from ctfkit.cli import main, parse_duration
from ctfkit.model import save_config
from ctfkit.synth import build_game_config


def write_inputs(tmp_path, n_challenges=8, n_chains=1):
    config_path = str(tmp_path / "game.yaml")
    save_config(build_game_config(n_challenges, n_chains), config_path)
    spec_path = str(tmp_path / "spec.yaml")
    with open(spec_path, "w") as fh:
        yaml.safe_dump({"seed": 7, "n_honest": 6, "n_colluding_pairs": 1,
                        "n_non_downloaders": 1}, fh)
    return config_path, spec_path


def test_parse_duration():
    assert parse_duration("600").total_seconds() == 600
    assert parse_duration("10m").total_seconds() == 600
    assert parse_duration("2h").total_seconds() == 7200
    assert parse_duration("45s").total_seconds() == 45


def test_validate_ok(tmp_path):
    config_path, _ = write_inputs(tmp_path)
    result = CliRunner().invoke(main, ["validate", "--config", config_path])
    assert result.exit_code == 0
    assert "ok" in result.output


def test_validate_reports_violations(tmp_path):
    config_path, _ = write_inputs(tmp_path)
    doc = yaml.safe_load(open(config_path))
    doc["chains"].append({"chain_id": "broken", "members": ["ch01", "ghost"]})
    yaml.safe_dump(doc, open(config_path, "w"))
    result = CliRunner().invoke(main, ["validate", "--config", config_path])
    assert result.exit_code == 1
    assert "ghost" in result.output


def test_synth_then_analyze(tmp_path):
    config_path, spec_path = write_inputs(tmp_path)
    runner = CliRunner()
    out = str(tmp_path / "synth")
    r = runner.invoke(main, ["synth", "--spec", spec_path,
                             "--config", config_path, "--out", out])
    assert r.exit_code == 0, r.output
    assert os.path.exists(os.path.join(out, "events.log"))
    assert os.path.exists(os.path.join(out, "ground_truth.jsonl"))

    report_dir = str(tmp_path / "reports")
    r2 = runner.invoke(main, [
        "analyze", "--log", os.path.join(out, "events.log"),
        "--config", os.path.join(out, "config_full.yaml"),
        "--out", report_dir, "--reports", "all",
    ])
    assert r2.exit_code == 0, r2.output
    for name in ("incidents.jsonl", "hint_latency.csv", "player_metrics.csv",
                 "plotdata_vicinity_sweep.csv", "plotdata_chain_deltas.csv",
                 "fig_vicinity_sweep.png", "fig_chain_deltas.png"):
        assert os.path.exists(os.path.join(report_dir, name)), name


def test_analyze_single_report_selection(tmp_path):
    config_path, spec_path = write_inputs(tmp_path)
    runner = CliRunner()
    out = str(tmp_path / "synth")
    runner.invoke(main, ["synth", "--spec", spec_path,
                         "--config", config_path, "--out", out])
    report_dir = str(tmp_path / "hints_only")
    r = runner.invoke(main, [
        "analyze", "--log", os.path.join(out, "events.log"),
        "--config", config_path, "--out", report_dir, "--reports", "hints",
    ])
    assert r.exit_code == 0
    files = set(os.listdir(report_dir))
    assert files == {"hint_latency.csv", "plotdata_hint_latency.csv",
                     "fig_hint_latency.png"}


def test_analyze_empty_log(tmp_path):
    config_path, _ = write_inputs(tmp_path)
    log_path = str(tmp_path / "empty.log")
    open(log_path, "w").close()
    report_dir = str(tmp_path / "empty_reports")
    r = CliRunner().invoke(main, ["analyze", "--log", log_path,
                                  "--config", config_path, "--out", report_dir])
    assert r.exit_code == 0, r.output
    assert "No incidents detected." in open(
        os.path.join(report_dir, "incidents.txt")).read()


def test_analyze_malformed_log_names_line(tmp_path):
    config_path, _ = write_inputs(tmp_path)
    log_path = str(tmp_path / "bad.log")
    with open(log_path, "w") as fh:
        fh.write('{"seq":1,"at":"2026-03-01T00:00:00.000Z","player":"a","kind":"login"}\n')
        fh.write("not json\n")
    r = CliRunner().invoke(main, ["analyze", "--log", log_path,
                                  "--config", config_path,
                                  "--out", str(tmp_path / "x")])
    assert r.exit_code == 1
    assert "line 2" in r.output


def test_analyze_unknown_report_rejected(tmp_path):
    config_path, spec_path = write_inputs(tmp_path)
    out = str(tmp_path / "synth")
    CliRunner().invoke(main, ["synth", "--spec", spec_path,
                              "--config", config_path, "--out", out])
    r = CliRunner().invoke(main, [
        "analyze", "--log", os.path.join(out, "events.log"),
        "--config", config_path, "--out", str(tmp_path / "y"),
        "--reports", "bogus",
    ])
    assert r.exit_code == 1
    assert "bogus" in r.output

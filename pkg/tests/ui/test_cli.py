from pathlib import Path

import pytest

from hapslink.link import EvaluationError
from hapslink.link.engine import engine as engine_module
from hapslink.ui.cli.cli import EXIT_CONFIG, EXIT_EVALUATION, EXIT_OK, build_parser, format_cell, run


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    for name in ("HAPSLINK_LOG_LEVEL", "HAPSLINK_EVENT_LOG", "HAPSLINK_MC_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("HAPSLINK_LOG_DIR", str(tmp_path / "logs"))
    # Relative paths keep console messages on one line
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def config_file(tmp_path, small_config_text):
    path = Path("s1.ini")
    path.write_text(small_config_text, encoding="utf-8")
    return path


def test_format_cell():
    assert format_cell(0.0) == "0"
    assert format_cell(0.25) == "0.25"
    assert format_cell(12.0) == "12"
    assert format_cell(1.5e-4) == "1.500000000e-04"
    assert format_cell(1e-3) == "0.001"


def test_parser_requires_paths():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["--config", "a.ini"])
    assert excinfo.value.code == 2


def test_writes_csv(tmp_path, config_file):
    output = tmp_path / "out" / "s1.csv"
    assert run(["--config", str(config_file), "--output", str(output), "--quiet"]) == EXIT_OK
    lines = output.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "avg_snr_per_hop_dB,op:closed-form,op:monte-carlo,capacity_ub:closed-form"
    assert len(lines) == 3
    assert lines[1].startswith("10,")
    assert lines[2].startswith("20,")


def test_same_seed_same_bytes(tmp_path, config_file):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for output in (first, second):
        args = ["--config", str(config_file), "--output", str(output), "--seed", "5", "--quiet"]
        assert run(args) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_no_mc_and_metric_override(tmp_path, config_file):
    output = tmp_path / "op.csv"
    args = ["--config", str(config_file), "--output", str(output), "--no-mc", "--metric", "op"]
    assert run([*args, "--quiet"]) == EXIT_OK
    assert output.read_text(encoding="utf-8").splitlines()[0] == "avg_snr_per_hop_dB,op:closed-form"


def test_summary_table_is_printed(tmp_path, config_file, capsys):
    output = tmp_path / "s1.csv"
    assert run(["--config", str(config_file), "--output", str(output), "--no-mc"]) == EXIT_OK
    assert "Wrote 2 rows" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, config_file, capsys):
    config_file.write_text(
        config_file.read_text(encoding="utf-8").replace("kind = s1", "kind = s1\ncolour = red"),
        encoding="utf-8",
    )
    output = tmp_path / "s1.csv"
    assert run(["--config", str(config_file), "--output", str(output)]) == EXIT_CONFIG
    assert "unknown key 'colour'" in capsys.readouterr().err
    assert not output.exists()


def test_missing_config_exits_2(tmp_path):
    args = ["--config", str(tmp_path / "absent.ini"), "--output", str(tmp_path / "x.csv")]
    assert run(args) == EXIT_CONFIG


def test_unknown_metric_exits_2(tmp_path, config_file):
    args = ["--config", str(config_file), "--output", str(tmp_path / "x.csv"), "--metric", "goodput"]
    assert run(args) == EXIT_CONFIG


def test_bad_environment_exits_2(tmp_path, config_file, monkeypatch):
    monkeypatch.setenv("HAPSLINK_MC_WORKERS", "0")
    args = ["--config", str(config_file), "--output", str(tmp_path / "x.csv")]
    assert run(args) == EXIT_CONFIG


def test_evaluation_failure_exits_1(tmp_path, config_file, monkeypatch, capsys):
    def failing_outage(sc, gamma_out_dB):
        raise EvaluationError("series did not converge", hop="H1-H2")

    monkeypatch.setattr(engine_module, "outage_probability", failing_outage)
    output = Path("s1.csv")
    args = ["--config", str(config_file), "--output", str(output), "--no-mc", "--quiet"]
    assert run(args) == EXIT_EVALUATION
    err = capsys.readouterr().err
    assert "H1-H2" in err
    assert "was not written" in err
    assert not output.exists()


def test_event_log(tmp_path, config_file):
    args = ["--config", str(config_file), "--output", str(tmp_path / "s1.csv"), "--no-mc", "--events"]
    assert run([*args, "--quiet"]) == EXIT_OK
    logs = list((tmp_path / "logs").glob("events_*.jsonl"))
    assert len(logs) == 1
    assert "SweepFinishedEvent" in logs[0].read_text(encoding="utf-8")

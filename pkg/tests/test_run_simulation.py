"""
Command-line entry point tests
File: tests/test_run_simulation.py
"""
import json
from pathlib import Path

import pytest

from scripts.run_simulation import EXIT_BREACH, EXIT_OK, EXIT_SCHEMA, main
from simulation.reports import REPORT_HEADER

MINIMAL = str(Path(__file__).parent.parent / "scenarios" / "minimal.json")


def test_run_prints_text_report(capsys):
    assert main(["run", "--scenario", MINIMAL]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0] == REPORT_HEADER
    assert "transfers_confirmed=1" in out


def test_run_writes_report_and_log(tmp_path):
    report, log = tmp_path / "report.bin", tmp_path / "log.json"
    code = main(["run", "--scenario", MINIMAL, "--report", "canonical", "--out", str(report), "--log", str(log)])
    assert code == EXIT_OK
    assert report.read_bytes()
    assert json.loads(log.read_text())["events"]


def test_replay_checks_digest_and_rerun(tmp_path):
    log = tmp_path / "log.json"
    main(["run", "--scenario", MINIMAL, "--out", str(tmp_path / "r.txt"), "--log", str(log)])
    assert main(["replay", "--log", str(log), "--scenario", MINIMAL]) == EXIT_OK
    assert main(["replay", "--log", str(log), "--scenario", MINIMAL, "--seed", "8"]) == EXIT_BREACH

    data = json.loads(log.read_text())
    data["events"][0]["tick"] += 1
    log.write_text(json.dumps(data))
    assert main(["replay", "--log", str(log)]) == EXIT_BREACH


def test_schema_errors_exit_one(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"cas": [{"ca_id": "ca1"}], "vasps": [{"vasp_id": "v1", "ca": "nope"}]}))
    assert main(["validate", "--scenario", str(bad)]) == EXIT_SCHEMA
    assert main(["run", "--scenario", str(tmp_path / "missing.json")]) == EXIT_SCHEMA
    assert main(["validate", "--scenario", MINIMAL]) == EXIT_OK


def test_generate_then_validate(tmp_path, capsys):
    out = tmp_path / "world.json"
    assert main(["generate", "--seed", "3", "--out", str(out), "--customers", "12", "--transfers", "8"]) == EXIT_OK
    assert main(["validate", "--scenario", str(out)]) == EXIT_OK
    assert "6 VASPs, 2 networks, 12 customers" in capsys.readouterr().out


def test_dump_commands(capsys):
    assert main(["dump-ledger", "--scenario", MINIMAL]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    assert lines[0].split(",")[3] == "25"
    assert main(["dump-routes", "--scenario", MINIMAL]) == EXIT_OK


def test_missing_command_is_an_argparse_error():
    with pytest.raises(SystemExit):
        main([])

"""Command-line interface: subcommands, exit codes, artifacts."""

import json

import pytest

from segrelab.cli import main


@pytest.fixture()
def config_file(tmp_path):
    p = tmp_path / "lab.cfg"
    p.write_text("workers = 1\noutput.dir = {}\n".format(tmp_path / "out"))
    return p


def test_cli_run(config_file, tmp_path, capsys):
    out = tmp_path / "run_out"
    code = main(["run", "--config", str(config_file), "--kappa", "100",
                 "--out", str(out)])
    assert code == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["kappa"] == 100.0
    assert rec["status"] == "stabilized"
    assert (out / "timeseries.csv").exists()
    assert (out / "figures" / "timeseries.png").exists()


def test_cli_sweep_and_extract(config_file, tmp_path, capsys):
    out = tmp_path / "sweep_out"
    code = main(["sweep", "--config", str(config_file), "--out", str(out)])
    assert code == 0
    checks = json.loads(capsys.readouterr().out)
    assert checks["segregation_rate_in_band"] is True
    assert (out / "report" / "report.json").exists()
    assert (out / "report" / "segregation.jsonl").exists()
    assert (out / "report" / "energy_audit.csv").exists()
    assert (out / "report" / "figures" / "overlap_vs_kappa.png").exists()
    assert (out / "kappa_10000" / "pair_u.snap").exists()

    code = main(["extract", "--report", str(out), "--depth", "5"])
    entries = [json.loads(line) for line in
               capsys.readouterr().out.strip().splitlines()]
    assert code == 0
    assert [e["m"] for e in entries] == [1, 2, 3, 4, 5]
    assert all(e["l2_distance"] < e["bound"] for e in entries)

    code = main(["extract", "--report", str(out), "--depth", "500"])
    assert code == 1


def test_cli_steady(config_file, capsys):
    code = main(["steady", "--config", str(config_file), "--kappa", "100"])
    assert code == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["residual_u"] <= 1e-10
    assert rec["vi_u"] <= 1e-6


def test_cli_verify(capsys):
    code = main(["verify", "--suite", "energy"])
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS]" in out
    tail = json.loads(out.strip().splitlines()[-1])
    assert tail["failed"] == 0


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])

import csv
import io
import json

import pytest

from bnls.cli import main
from bnls.io import read_field

SMALL = ["--dim", "2", "--radius", "27", "--nodes", "512"]


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_scalar_writes_field_and_report(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out, _ = run_cli(
        ["solve-scalar", *SMALL, "--lambda", "1", "--mu", "1", "--out", "u.dat", "--report", "r.json"], capsys
    )
    assert code == 0
    assert out == ""
    assert sorted(p.name for p in tmp_path.iterdir()) == ["r.json", "u.dat"]
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["passed"] is True
    assert rep["task"] == "solve-scalar"
    assert all("tolerance" in c for c in rep["checks"])
    U = read_field(tmp_path / "u.dat")
    assert U.grid.M == 512 and U.values[0] > 0


def test_report_is_reproducible_apart_from_header(tmp_path, capsys):
    reports = []
    path = tmp_path / "r.json"
    for _ in range(2):
        assert main(["spectrum", *SMALL, "--count", "3", "--report", str(path)]) == 0
        rep = json.loads(path.read_text())
        rep.pop("header")
        reports.append(rep)
    assert reports[0] == reports[1]


def test_spectrum_prints_results(capsys):
    code, out, _ = run_cli(["spectrum", "--dim", "2", "--radius", "10", "--nodes", "256", "--count", "4"], capsys)
    assert code == 0
    res = json.loads(out)
    assert len(res["alphas"]) == 4 and len(res["residuals"]) == 4


def test_sobolev_and_classify(capsys):
    code, out, _ = run_cli(["sobolev", *SMALL], capsys)
    assert code == 0
    consts = json.loads(out)
    assert consts["Lambda"] <= consts["Lambda_prime"]
    code, out, _ = run_cli(["classify", *SMALL, "--beta", "2"], capsys)
    assert code == 0
    assert "saddle" in out


@pytest.mark.parametrize("mode,beta", [("min", "3"), ("mp", "0")])
def test_solve_system(tmp_path, capsys, mode, beta):
    out_path = tmp_path / "pair.dat"
    code, out, _ = run_cli(["solve-system", *SMALL, "--beta", beta, "--mode", mode, "--out", str(out_path)], capsys)
    assert code == 0
    assert read_field(out_path).stack().shape == (2, 512)


def test_fibering_scan_csv(capsys):
    code, out, _ = run_cli(["fibering-scan", *SMALL], capsys)
    assert code == 0
    data = rows(out)
    assert set(data[0]) == {"profile", "r", "phi", "dphi"}


def test_empty_sweep_has_header(capsys):
    code, out, _ = run_cli(["sweep", *SMALL, "--axis", "beta", "--values", ""], capsys)
    assert code == 0
    assert out.startswith("value,status,")
    assert rows(out) == []


def test_beta_sweep_flips_once(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    code, _, _ = run_cli(["sweep", *SMALL, "--axis", "beta", "--values=-0.5,0,0.5,1.5,3", "--out", str(path)], capsys)
    assert code == 0
    data = rows(path.read_text())
    assert [r["status"] for r in data] == ["ok"] * 5
    verdicts = [r["verdict_u1"] for r in data]
    flips = sum(a != b for a, b in zip(verdicts, verdicts[1:]))
    assert flips == 1
    assert verdicts[0] == "strict-local-min" and verdicts[-1] == "saddle"


def test_radius_sweep_scaling_column(capsys):
    code, out, _ = run_cli(["sweep", "--dim", "2", "--nodes", "512", "--axis", "R", "--values", "10,20,40"], capsys)
    assert code == 0
    col = [float(r["alpha1_R4"]) for r in rows(out)]
    assert max(col) - min(col) < 1e-5 * min(col)


def test_invalid_dimension_exit_code(capsys):
    code, _, err = run_cli(["spectrum", "--dim", "9"], capsys)
    assert code == 2
    assert "grid.N" in err


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"params": {"gamma": 2}}))
    code, _, err = run_cli(["spectrum", "--config", str(path)], capsys)
    assert code == 2
    assert "gamma" in err


def test_decoupled_minimum_is_reported_as_semitrivial(tmp_path, capsys):
    rep_path = tmp_path / "r.json"
    code, _, _ = run_cli(["solve-system", *SMALL, "--beta", "0", "--mode", "min", "--report", str(rep_path)], capsys)
    assert code == 0
    assert json.loads(rep_path.read_text())["results"]["result"]["tag"] == "semi-trivial"


def test_failed_task_writes_partial_report(tmp_path, capsys):
    rep_path = tmp_path / "r.json"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"solver": {"max_iter": 1}}))
    code, _, _ = run_cli(["solve-scalar", *SMALL, "--config", str(cfg), "--report", str(rep_path)], capsys)
    assert code == 1
    rep = json.loads(rep_path.read_text())
    assert rep["passed"] is False
    assert rep["results"]["partial"]["converged"] is False


def test_non_admissible_system_fails(tmp_path, capsys):
    code, _, err = run_cli(["solve-system", *SMALL, "--beta", "-2"], capsys)
    assert code == 1
    assert "task failed" in err

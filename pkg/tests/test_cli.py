import csv
import io
import json
import subprocess
import sys

import pytest

from wurlab import MacScheme, default_config, evaluate_scheme
from wurlab.cli import main


def run_cli(*argv, capsys=None):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_defaults_round_trips(capsys, tmp_path):
    code, out, _ = run_cli("defaults", capsys=capsys)
    assert code == 0
    from wurlab import loads_config
    assert loads_config(out, environ={}) == default_config()


def test_analytic_matches_library(capsys):
    code, out, _ = run_cli("analytic", "--scheme", "csma_ca", "--n", "50",
                           capsys=capsys)
    assert code == 0
    values = dict(line.split(" = ") for line in out.strip().splitlines()
                  if " = " in line)
    m = evaluate_scheme(default_config(), MacScheme.CSMA_CA, n_nodes=50)
    assert float(values["alpha"]) == float("%.12g" % m.alpha)
    assert float(values["p_loss"]) == float("%.12g" % m.p_loss)
    assert values["d_a_s"].split()[0] == "%.12g" % m.d_a
    assert values["e_r_j"].split()[0] == "%.12g" % m.e_r


def test_analytic_n1_identities(capsys):
    code, out, _ = run_cli("analytic", "--scheme", "cca", "--n", "1",
                           capsys=capsys)
    assert code == 0
    assert "alpha = 0\n" in out
    assert "p_loss = 0\n" in out


def test_analytic_scm_gamma(capsys):
    code, out, _ = run_cli("analytic", "--scheme", "scm", "--n", "2",
                           capsys=capsys)
    assert code == 0
    values = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(values["gamma"]) == pytest.approx(0.3105, abs=1e-3)


def test_sweep_alpha_column_nondecreasing(capsys):
    code, out, _ = run_cli("sweep", "--schemes", "cca",
                           "--n-values", "5..100..5",
                           "--engines", "analytic", capsys=capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 20
    alphas = [float(r["alpha"]) for r in rows]
    assert all(b >= a for a, b in zip(alphas, alphas[1:]))


def test_sweep_csv_byte_identical_and_parseable(tmp_path):
    args = ["sweep", "--schemes", "cca,adp", "--n-values", "2,10",
            "--engines", "analytic,queue_sim", "--horizon", "20",
            "--seed", "7"]
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        assert main(args + ["--out", str(path)]) == 0
    a, b = paths[0].read_bytes(), paths[1].read_bytes()
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a.decode())))
    analytic_rows = [r for r in rows if r["engine"] == "analytic"]
    cfg = default_config()
    for row in analytic_rows:
        m = evaluate_scheme(cfg, MacScheme(row["scheme"]),
                            n_nodes=int(row["n"]))
        # printed precision round-trips to at least 9 significant digits
        assert float(row["p_loss"]) == pytest.approx(m.p_loss, rel=1e-9)
        if row["alpha"]:
            assert float(row["alpha"]) == pytest.approx(m.alpha, rel=1e-9,
                                                        abs=1e-15)


def test_sweep_empty_n_values_is_usage_error(capsys):
    code, _, err = run_cli("sweep", "--n-values", " ", capsys=capsys)
    assert code == 1
    assert "usage error" in err


def test_unknown_scheme_is_usage_error(capsys):
    code, _, err = run_cli("analytic", "--scheme", "aloha", capsys=capsys)
    assert code == 1


def test_bad_config_file_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("traffic.n_nodes = 0\n")
    code, _, err = run_cli("analytic", "--scheme", "cca", "--config",
                           str(path), capsys=capsys)
    assert code == 1
    assert "n_nodes" in err


def test_simulate_round_mode(capsys, tmp_path):
    log_path = tmp_path / "events.tsv"
    code, out, _ = run_cli("simulate", "--scheme", "scm", "--n", "5",
                           "--rounds", "50", "--event-log", str(log_path),
                           capsys=capsys)
    assert code == 0
    values = dict(line.split(" = ") for line in out.strip().splitlines())
    assert values["rounds"] == "50"
    assert log_path.exists()
    line = log_path.read_text().splitlines()[0]
    assert len(line.split("\t")) == 4


def test_validate_passes_on_agreeing_points(tmp_path, capsys):
    code, out, err = run_cli(
        "validate", "--schemes", "cca", "--n-values", "50",
        "--engines", "analytic,queue_sim", "--horizon", "150",
        "--out", str(tmp_path / "report.json"), capsys=capsys)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] is True
    assert report["points"][0]["metrics"]["alpha"]["ok"] is True


def test_validate_fails_with_exit_two(tmp_path, capsys):
    # an absurd tolerance forces the validation verdict to fail
    code, out, err = run_cli(
        "validate", "--schemes", "cca", "--n-values", "25",
        "--engines", "analytic,queue_sim", "--horizon", "60",
        "--alpha-tol", "1e-9", "--out", str(tmp_path / "report.json"),
        capsys=capsys)
    assert code == 2
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] is False


def test_validate_needs_two_engines(capsys):
    code, _, err = run_cli("validate", "--engines", "analytic", capsys=capsys)
    assert code == 1


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "wurlab.cli", "analytic", "--scheme", "cca",
         "--n", "2"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "alpha" in proc.stdout


def test_missing_config_file_exit_code(capsys):
    code, _, err = run_cli("analytic", "--scheme", "cca", "--config",
                           "/nonexistent/cfg.toml", capsys=capsys)
    assert code == 1
    assert "io error" in err


def test_unwritable_output_path(capsys):
    code, _, err = run_cli("sweep", "--schemes", "cca", "--n-values", "2",
                           "--out", "/nonexistent-dir/out.csv", capsys=capsys)
    assert code == 1

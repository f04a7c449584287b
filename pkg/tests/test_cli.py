import subprocess
import sys

import numpy as np
import pytest

from optsub.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from optsub.linalg import CovSpec, DataMatrix, write_cov_csv, write_data_csv


@pytest.fixture
def data_csv(tmp_path):
    X = np.random.default_rng(0).standard_normal((300, 2))
    path = tmp_path / "data.csv"
    write_data_csv(path, DataMatrix(X))
    return path


def read_indices(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "index"
    return header, [int(v) for v in body[1:]]


def test_theory(tmp_path, capsys):
    assert main(["theory", "--d-list", "2,1000", "--alpha-list", "0.1,0.01"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "d,alpha,q,m2,eff_unif,approx_var"
    row = out[1].split(",")
    assert float(row[3]) == pytest.approx(0.330259, abs=1e-6)
    assert float(out[4].split(",")[4]) >= 0.89


@pytest.mark.parametrize("method", ["dopt", "dopt-s", "iboss", "unif", "leverage"])
def test_select_methods(tmp_path, data_csv, method):
    out = tmp_path / "idx.csv"
    rc = main(["select", "--input", str(data_csv), "--method", method, "--k", "30", "--seed", "4", "--output", str(out)])
    assert rc == EXIT_OK
    header, idx = read_indices(out)
    assert header[0] == "# k_achieved=30"
    assert header[1].startswith("# elapsed_ms=")
    assert len(idx) == 30 and idx == sorted(set(idx))


def test_select_threshold_known_cov(tmp_path, data_csv):
    cov_path = tmp_path / "cov.csv"
    write_cov_csv(cov_path, CovSpec.identity(2))
    out = tmp_path / "idx.csv"
    rc = main(
        ["select", "--input", str(data_csv), "--method", "threshold", "--alpha", "0.1",
         "--cov", f"known:{cov_path}", "--output", str(out)]
    )
    assert rc == EXIT_OK
    header, idx = read_indices(out)
    assert int(header[0].split("=")[1]) == len(idx)
    assert 10 <= len(idx) <= 60


def test_select_pilot(tmp_path, data_csv):
    out = tmp_path / "idx.csv"
    assert main(["select", "--input", str(data_csv), "--method", "dopt", "--k", "20", "--cov", "pilot:0.2", "--output", str(out)]) == EXIT_OK


@pytest.mark.parametrize(
    "extra",
    [
        ["--method", "dopt"],
        ["--method", "dopt", "--k", "3", "--alpha", "0.1"],
        ["--method", "iboss", "--k", "2"],
        ["--method", "dopt", "--k", "301"],
        ["--method", "dopt", "--k", "3", "--cov", "sideways"],
        ["--method", "nonsense", "--k", "3"],
    ],
)
def test_select_input_errors(data_csv, extra):
    assert main(["select", "--input", str(data_csv)] + extra) == EXIT_INPUT


def test_select_bad_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2\n1,2\n3,oops\n")
    assert main(["select", "--input", str(bad), "--method", "dopt", "--k", "1"]) == EXIT_INPUT


def test_select_singular_is_numeric_failure(tmp_path):
    path = tmp_path / "flat.csv"
    write_data_csv(path, DataMatrix(np.column_stack([np.arange(10.0), np.arange(10.0)])))
    assert main(["select", "--input", str(path), "--method", "leverage", "--k", "3"]) == EXIT_NUMERIC


def test_simulate(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("d = 3\nk = 30\nn_list = 30, 300\nV = 3\nrho = 0.5\nrecord_timings = false\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    for name in ("records.csv", "summary.csv", "fig3.csv", "fig4.csv", "fig6.csv", "plotscript.txt"):
        assert (out / name).exists(), name
    assert (out / "summary.csv").read_text().splitlines()[0] == "method,n,V,mean_det,std_det,mean_ms,median_ms"


def test_simulate_config_error(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("d = 3\nk = 3000\nn_list = 30\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["simulate", "--config", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == EXIT_INPUT


def test_bench(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    rc = main(["bench", "--n-list", "5000,10000,20000", "--d", "5", "--k", "50", "--repeats", "2", "--output", str(out)])
    assert rc == EXIT_OK
    assert out.read_text().splitlines()[0] == "method,n,median_ms,loglog_slope"
    assert "log-log slope" in capsys.readouterr().out


def test_bench_too_few_sizes():
    assert main(["bench", "--n-list", "5000"]) == EXIT_INPUT


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "optsub.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("theory", "select", "simulate", "bench"):
        assert sub in proc.stdout

import csv
import subprocess
import sys

import numpy as np
import pytest

from chaos_splitting.cli import OUTPUT_ENV, main

SMALL = ["--N", "8", "--m", "3", "--K", "2", "--h", "2^-8"]


def read_grid(path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


def read_kv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return dict(rows[1:])


def test_solve_writes_nonzero_coefficients_only_for_first_equations(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", *SMALL, "--schemes", "trapezoidal", "-o", str(out)]) == 0
    files = sorted((out / "trapezoidal").glob("u_*.csv"))
    assert len(files) == 10
    nonzero = [f.name for f in files if np.any(read_grid(f)[:, 4])]
    assert nonzero == ["u_0000.csv", "u_0001.csv", "u_0002.csv", "u_0003.csv"]
    data = read_grid(files[0])
    assert data.shape == (64, 5)
    np.testing.assert_array_equal(data[:10, 0], [0, 1, 2, 3, 4, 5, 6, 7, 0, 1])
    summary = read_kv(out / "trapezoidal" / "summary.csv")
    assert summary["P"] == "10" and summary["active_count"] == "4" and summary["zero_tail"] == "1"


def test_variance_file_matches_coefficients(tmp_path):
    assert main(["solve", *SMALL, "--schemes", "lie", "-o", str(tmp_path)]) == 0
    coeffs = [read_grid(tmp_path / "lie" / f"u_{p:04d}.csv")[:, 4] for p in range(4)]
    var = read_grid(tmp_path / "lie" / "variance.csv")[:, 4]
    np.testing.assert_allclose(var, sum(c**2 for c in coeffs[1:]) / 3, rtol=1e-15)
    np.testing.assert_array_equal(read_grid(tmp_path / "lie" / "mean.csv")[:, 4], coeffs[0])


def test_zero_data_gives_zero_output(tmp_path):
    args = ["solve", *SMALL, "--schemes", "modified-lie", "-o", str(tmp_path),
            "--set", "field.forcing=0", "--set", "field.variance=0"]
    assert main(args) == 0
    for path in (tmp_path / "modified-lie").glob("*.csv"):
        if path.name.startswith(("u_", "mean", "variance")):
            assert not np.any(read_grid(path)[:, 4])


def test_reruns_are_bit_identical(tmp_path):
    args = ["solve", *SMALL, "--schemes", "crank-nicolson", "--set", "output.mc_samples=2000", "--seed", "7"]
    assert main([*args, "-o", str(tmp_path / "a")]) == 0
    assert main([*args, "-o", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "crank-nicolson" / "checksums.csv").read_text()
    b = (tmp_path / "b" / "crank-nicolson" / "checksums.csv").read_text()
    assert a == b and "mc_mean.csv" in a
    for name in ("mc_mean.csv", "u_0001.csv"):
        assert (tmp_path / "a" / "crank-nicolson" / name).read_bytes() == (tmp_path / "b" / "crank-nicolson" / name).read_bytes()


def test_scheme_swap_keeps_system_checksum(tmp_path):
    assert main(["solve", *SMALL, "--schemes", "lie,trapezoidal", "-o", str(tmp_path)]) == 0
    sums = {read_kv(tmp_path / s / "summary.csv")["system_sha256"] for s in ("lie", "trapezoidal")}
    assert len(sums) == 1


def test_monte_carlo_output_near_chaos_statistics(tmp_path):
    args = ["solve", *SMALL, "--schemes", "lie", "--set", "output.mc_samples=40000", "-o", str(tmp_path)]
    assert main(args) == 0
    d = tmp_path / "lie"
    var = read_grid(d / "variance.csv")[:, 4]
    mean = read_grid(d / "mean.csv")[:, 4]
    mc_mean = read_grid(d / "mc_mean.csv")[:, 4]
    assert np.all(np.abs(mc_mean - mean) <= 4 * np.sqrt(var / 40000))
    np.testing.assert_allclose(read_grid(d / "mc_variance.csv")[:, 4], var, rtol=0.05)


def test_environment_sets_output(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["kle-inspect", "--N", "6", "--m", "4"]) == 0
    rows = (tmp_path / "env" / "eigenvalues.csv").read_text().splitlines()
    assert rows[0] == "k,lambda,captured_fraction" and len(rows) == 5
    assert (tmp_path / "env" / "eigenpairs.csv").exists()
    # an explicit flag wins over the environment
    assert main(["kle-inspect", "--N", "6", "--m", "2", "-o", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "eigenpairs.csv").exists()


def test_config_file_and_set(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[grid]\nN = 6\n[chaos]\nm = 2\nK = 1\n[time]\nschemes = lie\nh = 2^-4\n")
    assert main(["solve", "-c", str(cfg), "--set", "chaos.K=2", "-o", str(tmp_path / "o")]) == 0
    assert read_kv(tmp_path / "o" / "lie" / "summary.csv")["P"] == "6"


@pytest.mark.parametrize(
    "args, code",
    [
        (["solve", "--N", "0"], 2),
        (["solve", "--set", "grid.X=1"], 2),
        (["solve", "--set", "nonsense"], 2),
        (["solve", "--h", "0.3", "--N", "4", "--m", "2"], 1),
        (["solve", "-c", "/nonexistent/config.ini"], 2),
        (["variance-study", "--N", "4", "--set", "study.m_values=5,20", "--set", "study.m_max=20"], 1),
    ],
)
def test_error_exit_codes(args, code, tmp_path, capsys):
    assert main([*args, "-o", str(tmp_path)]) == code
    assert capsys.readouterr().err


def test_study_commands(tmp_path, capsys):
    common = ["--N", "6", "--m", "8", "-o", str(tmp_path)]
    assert main(["order-study", *common, "--schemes", "modified-lie,reference", "--set", "time.h_list=2^-3,2^-4,2^-5,2^-6"]) == 0
    slopes = (tmp_path / "order_slopes.csv").read_text()
    assert "modified-lie,all," in slopes and "reference,all,,0" in slopes
    assert main(["corner-study", *common, "--h", "2^-6"]) == 0
    assert (tmp_path / "corner_error_lie.csv").exists() and (tmp_path / "corner_summary.csv").exists()
    assert main(["variance-study", *common, "--h", "2^-6", "--schemes", "cn",
                 "--set", "study.m_values=2,4", "--set", "study.m_max=8"]) == 0
    rows = (tmp_path / "variance_errors.csv").read_text().splitlines()
    assert rows[0] == "m,reference,crank-nicolson" and len(rows) == 3
    assert main(["timing", *common, "--h", "2^-3", "--set", "study.N_values=4,6", "--set", "study.repeats=1",
                 "--set", "study.kle_max_N=4"]) == 0
    assert len((tmp_path / "timing.csv").read_text().splitlines()) == 1 + 2 * 3
    assert len((tmp_path / "kle_timing.csv").read_text().splitlines()) == 2
    out = capsys.readouterr().out
    assert "slope" in out and "ratio" in out


def test_console_script_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "chaos_splitting.cli", "kle-inspect", "--N", "4", "--m", "2",
                           "-o", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "lambda" in proc.stdout

import os
import subprocess
import sys

import numpy as np
import pytest

from fwdegd.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from fwdegd.config import load_config
from fwdegd.output import fmt, read_rows

SMALL = """[grid]
n = 20

[time]
dt = 0.01
t_max = {t_max}
sample_every = 50

[protocol]
kind = {kind}

[initial]
kind = pdf_expr
expr = 1 + x^2

[output]
directory = small
"""


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_zero_horizon_writes_initial_density(tmp_path):
    cfg = write(tmp_path, SMALL.format(t_max=0, kind="logit"))
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out), "--quiet"]) == EXIT_OK
    header, rows = read_rows(out / "density.csv")
    assert header == ["t", "x", "pdf"]
    init = load_config(cfg).sim.initial_density()
    assert [r[2] for r in rows] == [fmt(p) for p in init.pdf]
    assert {r[0] for r in rows} == {fmt(0.0)}
    _, summary = read_rows(out / "summary.csv")
    assert summary[0][1] == "0"


def test_missing_grid_section(tmp_path, capsys):
    cfg = write(tmp_path, "[time]\ndt = 0.1\n")
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "[grid]" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini")]) == EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path, capsys):
    text = SMALL.format(t_max=100, kind="replicator").replace("[time]\ndt = 0.01", "[time]\ndt = 50")
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == EXIT_FAIL
    assert "step 0" in capsys.readouterr().err


def test_reruns_are_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL.format(t_max=0.6, kind="bnn"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a), "--quiet"]) == EXIT_OK
    assert main(["run", cfg, "--out", str(b), "--quiet"]) == EXIT_OK
    for name in ("density.csv", "eta.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header, rows = read_rows(a / "eta.csv")
    assert header == ["t", "eta", "E_t"] and len(rows) == 60


def test_table1_single_epsilon(tmp_path):
    text = SMALL.format(t_max=0.2, kind="logit") + "\n[table1]\nepsilons = 0.3\n"
    out = tmp_path / "o"
    assert main(["table1", write(tmp_path, text), "--out", str(out), "--quiet"]) == EXIT_OK
    header, rows = read_rows(out / "table1.csv")
    assert header == ["I", "epsilon", "average", "error", "rate"]
    assert len(rows) == 1 and rows[0][4] == ""


def test_table1_reference_override(tmp_path):
    text = SMALL.format(t_max=0.2, kind="logit") + "\n[table1]\nepsilons = 0.3, 0.2\nreference = 0.25\n"
    cfg = write(tmp_path, text)
    assert main(["table1", cfg, "--out", str(tmp_path / "a"), "--quiet"]) == EXIT_OK
    assert main(["table1", cfg, "--out", str(tmp_path / "b"), "--quiet", "--reference", "0"]) == EXIT_OK
    _, ra = read_rows(tmp_path / "a" / "table1.csv")
    _, rb = read_rows(tmp_path / "b" / "table1.csv")
    for x, y in zip(ra, rb):
        assert float(x[3]) == pytest.approx(abs(float(x[2]) - 0.25))
        assert float(y[3]) == pytest.approx(float(y[2]))
    assert ra[1][4] != ""


def test_oracle_check_passes(tmp_path, capsys):
    for kind in ("logit", "bnn"):
        cfg = write(tmp_path, SMALL.format(t_max=1, kind=kind), f"{kind}.ini")
        assert main(["oracle-check", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("ok") >= 10


def test_sweep_layout(tmp_path):
    text = SMALL.format(t_max=0.1, kind="logit") + "\n[sweep]\nparameter = hjb.epsilon\nvalues = 0.3, 0.15\n"
    out = tmp_path / "o"
    assert main(["sweep", write(tmp_path, text), "--out", str(out), "--quiet", "--jobs", "2"]) == EXIT_OK
    assert sorted(os.listdir(out)) == ["epsilon_0.15", "epsilon_0.3", "summary.csv"]
    header, rows = read_rows(out / "summary.csv")
    assert header[0] == "epsilon" and [float(r[0]) for r in rows] == [0.3, 0.15]
    assert (out / "epsilon_0.3" / "density.csv").exists()


def test_sweep_without_section(tmp_path):
    assert main(["sweep", write(tmp_path, SMALL.format(t_max=0.1, kind="logit")), "--out", str(tmp_path)]) \
        == EXIT_CONFIG


def test_out_root_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("FWDEGD_OUT_ROOT", str(tmp_path / "root"))
    assert main(["run", write(tmp_path, SMALL.format(t_max=0, kind="logit"))]) == EXIT_OK
    assert (tmp_path / "root" / "small" / "density.csv").exists()
    assert "wrote" in capsys.readouterr().out


def test_quiet_prints_nothing(tmp_path, capsys):
    main(["run", write(tmp_path, SMALL.format(t_max=0, kind="logit")), "--out", str(tmp_path / "o"), "--quiet"])
    assert capsys.readouterr().out == ""


def test_bad_jobs(tmp_path):
    assert main(["run", write(tmp_path, SMALL.format(t_max=0, kind="logit")), "--jobs", "0"]) == EXIT_CONFIG


def test_console_script(tmp_path):
    cfg = write(tmp_path, SMALL.format(t_max=0, kind="logit"))
    proc = subprocess.run([sys.executable, "-m", "fwdegd.cli", "run", cfg, "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "logit" in proc.stdout
    version = subprocess.run([sys.executable, "-m", "fwdegd.cli", "--version"], capture_output=True, text=True)
    assert version.stdout.strip().startswith("fwdegd ")


def test_2d_density_columns(tmp_path):
    text = "[grid]\nn = 4\nnz = 3\n[time]\nt_max = 0\n[utility]\nname = resource2d\n"
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, text), "--out", str(out), "--quiet"]) == EXIT_OK
    header, rows = read_rows(out / "density.csv")
    assert header == ["t", "x", "z", "pdf"] and len(rows) == 12
    np.testing.assert_allclose([float(r[3]) for r in rows], 1.0)

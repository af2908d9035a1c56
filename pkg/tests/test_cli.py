import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from whitney_dirac import cli
from whitney_dirac.spectra import EigenError


def _run(*argv):
    code, text = cli.run(list(argv))
    return code, json.loads(text) if text else None


def test_mesh_info_passes():
    code, rep = _run("mesh", "info", "--n", "2", "--m", "4")
    assert code == 0 and rep["passed"]
    assert rep["schema"] == cli.SCHEMA and rep["command"] == "mesh"
    assert all(rep["checks"].values())


def test_eig_1d_closed_form():
    code, rep = _run("eig", "--n", "1", "--m", "4", "--count", "6")
    assert code == 0 and rep["dimension"] == 8
    vals = sorted((c["value"], c["mult"]) for c in rep["eigenvalues"])
    assert [m for _, m in vals] == [2, 2, 2]
    assert np.allclose([v for v, _ in vals], [-np.sqrt(48), 0.0, np.sqrt(48)], atol=1e-10)
    assert all(c["residual"] < 1e-8 for c in rep["eigenvalues"])
    assert sum(c["mult"] for c in rep["oracle"]) >= 6


@pytest.mark.parametrize("argv", [
    ("eig", "--n", "1", "--m", "2"),
    ("mesh", "info", "--n", "4", "--m", "4"),
    ("converge", "--n", "1", "--m-list", "4,8"),
    ("converge", "--n", "1", "--m-list", "4,8,16", "--targets", ""),
    ("mollify", "--n", "1", "--eps", "0.9"),
    ("norms", "--n", "3", "--m-list", "4", "--suite", "slobodetskij"),
    ("algebra-check", "--trials", "0"),
    ("mesh", "info", "--threads", "0"),
    ("eig", "--bogus"),
])
def test_config_errors_exit_2(argv):
    code, _ = cli.run(list(argv))
    assert code == 2


def test_config_error_message_names_the_constraint():
    code, text = cli.run(["eig", "--n", "1", "--m", "2"])
    rep = json.loads(text)
    assert code == 2 and rep["error"]["kind"] == "config" and "m >= 3" in rep["error"]["message"]


def test_failed_check_exits_1(monkeypatch):
    monkeypatch.setattr(cli, "cmd_mesh", lambda args: {"checks": {"forced": False}})
    code, rep = _run("mesh", "info")
    assert code == 1 and rep["passed"] is False


def test_numerical_error_exits_1(monkeypatch):
    def boom(args):
        raise EigenError("forced")
    monkeypatch.setattr(cli, "cmd_eig", boom)
    code, rep = _run("eig")
    assert code == 1 and rep["error"]["kind"] == "numerical"


def test_converge_csv(tmp_path):
    path = tmp_path / "conv.csv"
    code, rep = _run("converge", "--n", "1", "--m-list", "8,16,32", "--targets", str(2 * np.pi), "--csv", str(path))
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert {"target", "m", "h", "error", "slope", "r2", "seed"} <= set(rows[0])
    assert len(rows) == 3
    assert float(rows[-1]["slope"]) == pytest.approx(2.0, abs=0.2)


@pytest.mark.parametrize("argv", [
    ("hodge", "--n", "2", "--m-list", "4,8", "--degree", "1"),
    ("norms", "--n", "1", "--m-list", "4,8", "--suite", "equivalence"),
    ("norms", "--n", "1", "--m-list", "4,8", "--suite", "inverse"),
    ("norms", "--n", "1", "--m-list", "4,8", "--suite", "slobodetskij"),
    ("norms", "--n", "1", "--m-list", "4,8", "--suite", "regularity"),
    ("norms", "--n", "1", "--m-list", "4,8", "--suite", "infsup"),
    ("mollify", "--n", "1", "--m-list", "4,8,16", "--suite", "projector"),
    ("mollify", "--n", "1", "--m-list", "4,8,16", "--suite", "rates"),
    ("algebra-check", "--trials", "10"),
])
def test_suites_pass(argv):
    code, rep = _run(*argv)
    assert code == 0 and rep["passed"], rep.get("checks")


def test_json_file_and_summary(tmp_path, capsys):
    path = tmp_path / "out.json"
    code = cli.main(["mesh", "info", "--n", "1", "--m", "3", "--json", str(path)])
    assert code == 0
    assert json.loads(path.read_text())["passed"]
    assert f"mesh: pass -> {path}" in capsys.readouterr().out


def test_report_has_no_nan_tokens():
    _, text = cli.run(["norms", "--n", "1", "--m-list", "4,8", "--suite", "inverse"])
    assert "NaN" not in text and "Infinity" not in text


def test_module_entry_point_is_deterministic(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        subprocess.run([sys.executable, "-m", "whitney_dirac", "eig", "--n", "2", "--m", "4", "--count", "12",
                        "--threads", "1", "--json", str(path)], check=True, capture_output=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]

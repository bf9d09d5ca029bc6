import io
import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from fbhgm.cli import (EXIT_CHECK, EXIT_EVAL, EXIT_OK, EXIT_USAGE, load_config, main,
                       read_matrix, read_points, schema)
from fbhgm.errors import ValidationError


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_normconst_uniform():
    code, text = run("normconst", "--dim", "2", "--x", "0,0,0", "--y", "0,0,0")
    assert code == EXIT_OK
    obj = json.loads(text)
    jsonschema.validate(obj, schema("normconst"))
    assert obj["value"] == pytest.approx(4 * math.pi, rel=1e-14)
    assert obj["route"] == "series"


def test_normconst_table1_row():
    code, text = run("normconst", "--dim", "4", "--x", "0.5,1,1.5,2,2.5",
                     "--y", "1.5,1.2,0.9,0.6,0.3", "--replicas", "20")
    obj = json.loads(text)
    assert code == EXIT_OK and obj["route"] == "hgm"
    assert obj["value"] == pytest.approx(189.243, rel=1e-5)
    assert obj["ci"][0] <= obj["value"] <= obj["ci"][1]


def test_normconst_figure1_interval():
    code, text = run("normconst", "--dim", "3", "--x", "1.2,2.5,3.2,3.6",
                     "--y", "2.3,5.3,4.2,0.1", "--eps", "0.2", "--replicas", "50")
    obj = json.loads(text)
    assert code == EXIT_OK
    assert 14065.6 <= obj["value"] <= 14679.6


def test_normconst_negative_values_and_matrix_file(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("1,0.5,0\n0.5,-1,0.2\n0,0.2,0.3\n")
    code, text = run("normconst", "--dim", "2", "--x", str(f), "--y", "-0.5,0.1,0.2",
                     "--replicas", "5")
    assert code == EXIT_OK
    from fbhgm.hgm import normalizing_constant
    from fbhgm.model import FullParams
    want = normalizing_constant(FullParams(read_matrix(f), [-0.5, 0.1, 0.2]))
    assert json.loads(text)["value"] == pytest.approx(want, rel=1e-6)


def test_read_matrix_symmetrises(tmp_path, caplog):
    f = tmp_path / "x.csv"
    f.write_text("1,0.4\n0.6,2\n")
    x = read_matrix(f)
    assert np.allclose(x, [[1, 0.5], [0.5, 2]])
    assert "not symmetric" in caplog.text


def test_formats():
    code, text = run("normconst", "--dim", "1", "--x", "0,0", "--y", "0,0", "--format", "csv")
    head, row = text.strip().split("\n")
    assert head.startswith("value,sd,ci,route") and row.startswith("6.2831853071795")
    code, text = run("normconst", "--dim", "1", "--x", "0,0", "--y", "0,0", "--format", "text")
    assert "route: series" in text


def test_usage_errors(capsys):
    assert run("normconst", "--dim", "2", "--x", "0,0", "--y", "0,0,0")[0] == EXIT_USAGE
    assert run("bogus")[0] == EXIT_USAGE
    assert run("normconst", "--dim", "1", "--x", "a,b", "--y", "0,0")[0] == EXIT_USAGE
    assert run("normconst", "--dim", "1", "--x", "0,0", "--y", "0,0", "--replicas", "1")[0] \
        == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_config_file(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"eps": 0.0, "replicas": 3, "ode": {"rel_tol": 1e-9},
                                "mle": {"starts": 2}}))
    cfg = load_config(good)
    assert cfg.replicas == 3 and cfg.mle_config().starts == 2
    code, text = run("normconst", "--dim", "1", "--x", "2,0", "--y", "0,0", "--config", str(good))
    assert code == EXIT_OK and json.loads(text)["sd"] == 0.0
    # flags override the file
    code, text = run("normconst", "--dim", "1", "--x", "2,0", "--y", "0,0", "--config", str(good),
                     "--eps", "1e-3")
    assert json.loads(text)["sd"] > 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epsilon": 1}))
    with pytest.raises(ValidationError):
        load_config(bad)
    bad.write_text(json.dumps({"ode": {"atol": 1}}))
    with pytest.raises(ValidationError):
        load_config(bad)
    assert run("normconst", "--dim", "1", "--x", "0,0", "--y", "0,0", "--config", str(bad))[0] \
        == EXIT_USAGE


def test_sample_files(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert run("sample", "--dim", "2", "--x", "0,0,0", "--y", "0,0,0", "--n", "100",
                   "--seed", "3", "--out", str(f))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert len(lines) == 100 and b"\r" not in a.read_bytes()
    pts = np.array([[float(v) for v in ln.split(",")] for ln in lines])
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)
    assert read_points(a).points.shape == (100, 3)


def test_sample_header_roundtrip(tmp_path):
    f = tmp_path / "h.csv"
    run("sample", "--dim", "1", "--x", "1,0", "--y", "0.5,0", "--n", "10", "--out", str(f),
        "--header")
    assert f.read_text().startswith("t1,t2\n")
    assert read_points(f).points.shape == (10, 2)


def test_sample_concentrated(capsys):
    code, _ = run("sample", "--dim", "2", "--x", "2e6,0,0", "--y", "0,0,0", "--n", "10")
    assert code == EXIT_EVAL
    assert "acceptance" in capsys.readouterr().err.lower()


def test_off_sphere_rows(tmp_path, capsys):
    f = tmp_path / "d.csv"
    f.write_text("1,0,0\n0.5,0.5,0.5\n0,1,0\n")
    assert run("mle", "--data", str(f))[0] == EXIT_USAGE
    assert "[1]" in capsys.readouterr().err


def test_mle_end_to_end(tmp_path):
    f = tmp_path / "d.csv"
    run("sample", "--dim", "2", "--x", "1.0,-0.5,0", "--y", "0.8,0.2,-0.4", "--n", "200",
        "--seed", "5", "--out", str(f))
    argv = ("mle", "--data", str(f), "--starts", "1", "--seed", "2")
    code, first = run(*argv)
    assert code == EXIT_OK
    obj = json.loads(first)
    jsonschema.validate(obj, schema("mle"))
    assert obj["status"] == "Converged" and obj["grad_norm"] <= 1e-5 * 200
    assert len(obj["x"]) == 6 and obj["x"][-1] == 0.0
    assert run(*argv)[1] == first


def test_mle_all_fail(tmp_path):
    f = tmp_path / "d.csv"
    run("sample", "--dim", "1", "--x", "1,0", "--y", "0.5,0", "--n", "50", "--out", str(f))
    assert run("mle", "--data", str(f), "--starts", "1", "--max-iters", "1")[0] == 3


def test_check_passes():
    code, text = run("check", "--dims", "1,2", "--mc-samples", "100000")
    assert code == EXIT_OK
    assert "d=1 golden matrices" in text and "FAIL" not in text


def test_check_failure_exit(monkeypatch):
    import fbhgm.checks as checks
    monkeypatch.setattr(checks, "run_checks", lambda *a, **k: [("broken", False, "")])
    assert run("check", "--dims", "1")[0] == EXIT_CHECK


def test_bench_table1_layout():
    code, text = run("bench-table1", "--replicas", "3")
    rows = text.strip().split("\n")
    assert code == EXIT_OK and rows[0] == "x11,value,sd" and len(rows) == 21
    table = {float(r.split(",")[0]): (float(r.split(",")[1]), float(r.split(",")[2]))
             for r in rows[1:]}
    assert table[2.0][0] == pytest.approx(39075.8, rel=1e-3)
    assert table[10.0][0] == pytest.approx(2.41579e20, rel=1e-4)
    assert all(0 < sd <= 1e-5 * v for v, sd in table.values())


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fbhgm", "normconst", "--dim", "1", "--x", "0,0",
                           "--y", "0,0"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["route"] == "series"

import csv
import io
import json

import pytest

from swlbm import output
from swlbm.cli import UsageError, main, normalize_config, parse_grid, run_case


def test_check_stable_and_unstable(capsys):
    assert main(["stability", "check", "--model", "d2q9-salmon", "--g", "0.009", "--e", "15",
                 "--hbar", "2", "--tau", "1.5"]) == 0
    assert "verdict: Stable" in capsys.readouterr().out
    assert main(["stability", "check", "--model", "d2q9-salmon", "--g", "80", "--e", "15",
                 "--hbar", "2", "--tau", "1.5"]) == 1


def test_check_lambda_point(capsys):
    # g = e^2/(3 hbar) = 225/6
    code = main(["stability", "check", "--model", "d2q9-lambda", "--lambda", "3", "--g", "37.5",
                 "--e", "15", "--hbar", "2", "--tau", "1.5", "--json"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "Stable"


def test_check_argument_errors(capsys):
    assert main(["stability", "check", "--model", "d2q9-salmon", "--g", "0"]) == 2
    assert main(["stability", "check", "--model", "d2q5", "--g", "1"]) == 2
    # singular symmetriser
    assert main(["stability", "check", "--model", "d2q9-salmon", "--g", "15", "--e", "5"]) == 2


def test_scan_to_stdout_flips(capsys):
    assert main(["stability", "scan", "--model", "d2q9-salmon", "--g-grid", "60,70",
                 "--e", "15", "--hbar", "2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["verdict"] for r in rows] == ["Stable", "Unstable"]


def test_scan_single_point_and_file(tmp_path):
    out = tmp_path / "map.csv"
    assert main(["stability", "scan", "--model", "d2q7", "--g-grid", "0.1:0.1:1", "--out", str(out)]) == 0
    assert len(out.read_text().strip().splitlines()) == 2
    out2 = tmp_path / "lam.csv"
    assert main(["stability", "scan", "--model", "d2q9-lambda", "--g-grid", "0.1:0.5:5",
                 "--lambda-grid", "1,2", "--out", str(out2)]) == 0
    assert len(out2.read_text().strip().splitlines()) == 11


@pytest.mark.parametrize("bad", ["1:2", "a,b", "1:2:0", "", "1:2:x"])
def test_malformed_grid(bad):
    with pytest.raises(UsageError):
        parse_grid(bad)
    assert main(["stability", "scan", "--model", "d2q7", "--g-grid", bad]) == 2


def test_parse_grid_forms():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("2, 3") == [2.0, 3.0]


def test_normalize_config():
    cfg = normalize_config({"case": "hump"})
    assert cfg["g"] == 0.009 and cfg["lattice"] == "500x50" and cfg["backend"] in ("cython", "numpy")
    for bad in ({}, {"case": "dam"}, {"case": "hump", "colour": 1}):
        with pytest.raises(UsageError):
            normalize_config(bad)


def test_usage_errors_exit_two(tmp_path):
    assert main([]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"case": "hump", "bogus": 1}))
    assert main(["sim", "run", "--config", str(cfg)]) == 2
    assert main(["sim", "run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["bench", "hump", "--lattice", "12y"]) == 2


def test_manifest_round_trip(tmp_path, capsys):
    cfg = {"case": "hump", "lattice": "125x50", "max_iterations": 40, "output_every": 20}
    first = tmp_path / "a"
    manifest, code = run_case(cfg, first)
    assert code == 1 and manifest["result"]["status"] == "max_iterations"
    assert [r["step"] for r in manifest["error_reports"]] == [20, 40]
    assert manifest["stability"]["verdict"] == "Stable"
    second = tmp_path / "b"
    assert main(["sim", "run", "--config", str(first / "manifest.json"), "--out", str(second)]) == 1
    assert (first / "snapshot.csv").read_bytes() == (second / "snapshot.csv").read_bytes()
    again = json.loads((second / "manifest.json").read_text())
    assert again["config"] == json.loads((first / "manifest.json").read_text())["config"]


def test_bench_expansion_writes_outputs(tmp_path, capsys):
    code = main(["bench", "expansion", "--g", "0.5", "--out", str(tmp_path)])
    assert code == 1
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["result"]["status"] == "diverged" and "divergence" in m["result"]
    header = (tmp_path / "snapshot.csv").read_text().splitlines()[0]
    assert header == "x,y,h,u1,u2"


def test_bench_tidal_short(tmp_path, capsys):
    cfg = {"case": "tidal", "lattice": "500x4", "t_end": 14.0}
    manifest, code = run_case(cfg, tmp_path)
    assert code == 0 and manifest["result"]["steps"] == 100
    assert manifest["result"]["depth_error"] < 1e-3
    assert (tmp_path / "profile.csv").read_text().startswith("x,h_numeric,h_analytic")


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(output.OUTPUT_ENV, str(tmp_path / "env"))
    assert output.default_output_dir() == tmp_path / "env"


def test_manifest_writes_null_for_nan(tmp_path):
    p = output.write_manifest(tmp_path / "m.json", {"a": float("nan"), "b": [1.0, float("inf")]})
    assert json.loads(p.read_text()) == {"a": None, "b": [1.0, None]}

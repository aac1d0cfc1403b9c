import csv
import json
from pathlib import Path

import numpy as np
import pytest

from gspfilter.cli import main, probe_function
from gspfilter.config import ConfigError, RunConfig, parse_phi
from gspfilter.grid import Grid
from gspfilter.io import write_array2

GOLDEN = Path(__file__).parent / "golden"

FAST_VERIFY = """
[grid]
n = 32
L = 6.0
[verify]
N = 20000
oracle_N = 20000
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("case", ["white", "deriv1", "deriv2"])
def test_filter_matches_golden(case, tmp_path):
    out = tmp_path / "out"
    code = main(["filter", "--config", str(GOLDEN / case / "config.ini"), "--out", str(out), "--quiet"])
    assert code == 0
    got, ref = _rows(out / "mse.csv"), _rows(GOLDEN / case / "mse.csv")
    assert len(got) == len(ref) == 12
    for g, r in zip(got, ref):
        assert (g["method"], g["phi"], g["noise"]) == (r["method"], r["phi"], r["noise"])
        assert np.isclose(float(g["J"]), float(r["J"]), rtol=1e-8, atol=0)
    summary = json.loads((out / "summary.json").read_text())
    golden = json.loads((GOLDEN / case / "summary.json").read_text())
    assert summary["passed"] and golden["passed"]
    assert [c["name"] for c in summary["checks"]] == [c["name"] for c in golden["checks"]]
    for m in ("wss", "commuting", "general", "douglas"):
        assert (out / f"case0_{m}.bin").exists() and (out / f"case0_{m}.json").exists()


def test_filter_rerun_is_byte_identical(tmp_path):
    cfg = GOLDEN / "deriv1" / "config.ini"
    main(["filter", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"])
    main(["filter", "--config", str(cfg), "--out", str(tmp_path / "b"), "--quiet"])
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_verify_default_passes(tmp_path, capsys):
    code = main(["verify", "--config", str(_write(tmp_path, FAST_VERIFY)), "--out", str(tmp_path / "v")])
    text = capsys.readouterr().out
    assert code == 0
    assert "FAIL" not in text and text.count("PASS") >= 6
    s = json.loads((tmp_path / "v" / "summary.json").read_text())
    assert s["passed"] is True and s["fault"] == 0.0


def test_verify_rerun_and_threads_identical(tmp_path, monkeypatch):
    cfg = str(_write(tmp_path, FAST_VERIFY))
    main(["verify", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet", "--seed", "5"])
    monkeypatch.setenv("GSP_THREADS", "3")
    main(["verify", "--config", cfg, "--out", str(tmp_path / "b"), "--quiet", "--seed", "5"])
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_verify_injected_fault_fails(tmp_path, capsys):
    code = main(["verify", "--config", str(_write(tmp_path, FAST_VERIFY)), "--out", str(tmp_path / "v"),
                 "--inject-fault", "0.01"])
    text = capsys.readouterr().out
    assert code == 1
    line = next(ln for ln in text.splitlines() if "residual orthogonality " in ln and "exact" in ln)
    assert line.startswith("FAIL")
    s = json.loads((tmp_path / "v" / "summary.json").read_text())
    assert s["passed"] is False


def test_verify_rejects_non_psd_input(tmp_path, capsys):
    g = Grid(32, 6.0)
    K = np.eye(32) / g.h
    K[0, 0] = -1.0 / g.h
    write_array2(tmp_path / "bad.bin", K, g)
    cfg = _write(tmp_path, FAST_VERIFY + f"signal = file {tmp_path / 'bad.bin'}\n")
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v"), "--quiet"])
    assert code == 2
    assert "eigenvalue" in capsys.readouterr().err


def test_decay_command(tmp_path, capsys):
    cfg = _write(tmp_path, "[decay]\nsymbols = gaussian, rough, empty\nradii = 3, 10.5\n")
    code = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "d")])
    text = capsys.readouterr().out
    assert code == 0 and "FAIL" not in text
    s = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert s["symbols"]["gaussian"]["fitted_t"] >= 4
    assert s["symbols"]["rough"]["fitted_t"] >= 4
    assert s["symbols"]["rough"]["violations"] == 0
    assert s["symbols"]["empty"]["max_entry"] == 0.0
    sweep = _rows(tmp_path / "d" / "radius_sweep.csv")
    assert [r["symbol"] for r in sweep] == ["gaussian", "gaussian", "rough", "rough", "empty", "empty"]
    converged = [r for r in sweep if float(r["tail_bound"]) < 1e-10]
    assert converged and all(float(r["max_change"]) <= 1e-10 for r in converged)
    rough = json.loads((tmp_path / "d" / "decay_rough.json").read_text())
    assert {"shells", "fitted_t", "fit_residual", "C"} <= set(rough)
    assert (tmp_path / "d" / "decay_empty_M.csv").read_text().strip() == "lambda,omega,abs"


@pytest.mark.parametrize("text", [
    "[grid]\nn = 7\n",
    "[bogus]\nx = 1\n",
    "[filter]\nmethods = wss, magic\n",
    "[filter]\nnoise = cauchy 1\n",
    "[gabor]\na = 2.0\nb = 2.0\nL2 = 10\n",
    "[run]\nseed = -3\n",
])
def test_invalid_config_exit_code(tmp_path, text):
    assert main(["filter", "--config", str(_write(tmp_path, text)), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_missing_config_file(tmp_path):
    assert main(["decay", "--config", str(tmp_path / "nope.ini"), "--quiet"]) == 2


def test_config_accessors():
    cfg = RunConfig.from_mapping({"filter": {"signal": "lebesgue 1 | lebesgue 2", "noise": "lebesgue 0.5"}})
    assert cfg.filter_cases() == [("lebesgue 1", "lebesgue 0.5"), ("lebesgue 2", "lebesgue 0.5")]
    assert cfg.methods() == ["wss", "commuting", "general", "douglas"]
    assert cfg.tau() is None and cfg.radii() == [3.0, 5.0, 7.5, 10.5]
    s = cfg.gabor_system()
    assert (s.P, s.Q) == (16, 8)
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"gabor": {"a": "1.0"}}).gabor_system()
    with pytest.raises(ConfigError):
        parse_phi("gaussian 1")


def test_probe_functions():
    g = Grid(64, 8.0)
    assert np.isclose(probe_function(g, "gaussian", (0, 1)).values[32], 1.0)
    bump = probe_function(g, "bump", (0, 2)).values
    assert bump[np.abs(g.x) >= 2].max() == 0 and bump[32] == 1.0
    mod = probe_function(g, "modulated", (0, 1, 2))
    assert np.allclose(np.abs(mod.values), np.abs(probe_function(g, "gaussian", (0, 1)).values))

import json
import subprocess
import sys

import pytest

from activemix import cli
from activemix import dispersion as disp


def _run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr()


def test_critical(capsys):
    code, out = _run(["critical", "--json"], capsys)
    d = json.loads(out.out)
    assert code == 0
    assert d["b_c"] == pytest.approx(0.6231747, abs=1e-7)
    assert d["gamma_c"] == pytest.approx(disp.gamma_from_bc(d["b_c"]))
    code, out = _run(["critical"], capsys)
    assert "gamma_c" in out.out
    assert _run(["critical", "--selfcheck"], capsys)[0] == 0


@pytest.mark.parametrize("gamma,eps,verdict,code", [(1.0, -1, "stable", 0), (2.5, -1, "unstable", 0),
                                                    (5.0, 1, "stable", 0)])
def test_dispersion(tmp_path, capsys, gamma, eps, verdict, code):
    rc, out = _run(["dispersion", "--gamma", str(gamma), "--eps", str(eps), "--out", str(tmp_path)], capsys)
    assert rc == code
    v = json.loads((tmp_path / "verdict.json").read_text())
    assert v["verdict"] == verdict
    assert (tmp_path / "curve.csv").read_text().startswith("b,reF,imF")
    assert (tmp_path / "plot_curve.py").exists()


def test_dispersion_marginal_exit_code(tmp_path, capsys):
    gc = disp.find_bc().gamma_c
    rc, _ = _run(["dispersion", "--gamma", repr(gc), "--out", str(tmp_path)], capsys)
    assert rc == 2


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_simulate_deterministic_and_fit(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"gamma": 1.0, "nu": 0.0, "swimmer_sign": -1, "dt": 0.01,
                                       "t_end": 60.0, "output_stride": 5, "seed": 7, "datum": "random"})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(["simulate", cfg, "--out", str(a)], capsys)[0] == 0
    assert _run(["simulate", cfg, "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads(a.read_text().splitlines()[0][1:])
    assert meta["seed"] == 7 and meta["config"]["lmax"] == 122
    rc, out = _run(["fit", str(a), "--channel", "u", "--window", "4", "60", "--envelope"], capsys)
    rep = json.loads(out.out)
    assert rc == 0 and rep["channel"] == "u" and rep["model"] == "power"


def test_simulate_rejects_underresolved(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"gamma": 1.0, "nu": 0.0, "swimmer_sign": -1, "lmax": 10, "t_end": 30})
    rc, out = _run(["simulate", cfg, "--out", str(tmp_path / "t.csv")], capsys)
    assert rc == 1 and "resolution floor" in out.err


def test_simulate_divergence_reports_growth(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"gamma": 6.0, "nu": 0.0, "swimmer_sign": -1, "dt": 0.05,
                                       "t_end": 300.0, "output_stride": 4})
    rc, out = _run(["simulate", cfg, "--out", str(tmp_path / "t.csv")], capsys)
    rep = json.loads(out.out)
    assert rc == 1 and rep["status"] == "diverged" and rep["growth_rate"] > 0
    root = disp.find_unstable_root(6.0)
    assert rep["growth_rate"] == pytest.approx(root.real, rel=0.05)


def test_volterra_command(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"gamma": 1.0, "nu": 0.0, "swimmer_sign": -1, "dt": 0.01,
                                       "t_end": 40.0, "output_stride": 5, "weight": {"alpha": 2.0}})
    rc, out = _run(["volterra", cfg, "--out", str(tmp_path / "u.csv")], capsys)
    rep = json.loads(out.out)
    assert rc == 0 and rep["kernel_at_zero"] == pytest.approx(-0.2, abs=1e-12)
    assert rep["ratio"] > 0


def test_sweep_aggregates(tmp_path, capsys):
    out = tmp_path / "s.json"
    rc, _ = _run(["sweep", "--nu", "1e-2", "3e-3", "1e-3", "--workers", "2", "--out", str(out)], capsys)
    rep = json.loads(out.read_text())
    assert rc == 0 and len(rep["points"]) == 3
    assert [p["nu"] for p in rep["points"]] == [1e-2, 3e-3, 1e-3]
    assert -0.6 < rep["slope_half_life_tail"] < -0.4


def test_selfcheck(capsys):
    rc, out = _run(["selfcheck"], capsys)
    assert rc == 0 and out.out.count("PASS") == 4


def test_console_module_entry():
    res = subprocess.run([sys.executable, "-m", "activemix.cli", "critical", "--json"], capture_output=True,
                         text=True, check=True)
    assert "b_c" in json.loads(res.stdout)

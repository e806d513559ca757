import json
import math
import os
import re
import subprocess
import sys

import numpy as np
import pytest

from cavitywp import __version__, _kernels
from cavitywp.cli import main
from cavitywp.dicke import critical_coupling
from cavitywp.runner import fmt, read_csv, write_csv
from conftest import CONFIG_DIR

SMALL_JC = """
model.kind = jc
model.omega = 1.0
model.g0 = 0.0
initial.field = coherent
initial.nu = 1.5
grid.n_points = 128
grid.x_max = 10
propagation.dt = 1e-3
propagation.t_final = 1.0
propagation.snapshot_stride = 50
outputs.density_every = 10
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(verb, cfg, out, *extra):
    return main([verb, "--config", cfg, "--out", str(out), *extra])


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- formats

def test_fmt_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 1e300, 12345678.9, 0.0):
        assert float(fmt(x)) == x
    assert fmt(math.nan) == ""
    assert fmt(np.float64(0.25)) == "0.25"


def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [[1.0, math.nan], [1 / 3, 2e-17]])
    assert path.read_text() == "a,b\n1,\n0.33333333333333331,2.0000000000000001e-17\n"
    header, data = read_csv(path)
    assert header == ["a", "b"]
    assert math.isnan(data[0, 1]) and data[1, 0] == 1 / 3


# -------------------------------------------------------------- propagate

def test_propagate_outputs(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_JC)
    assert run("propagate", cfg, tmp_path / "out") == 0
    man = load_json(tmp_path / "out" / "manifest.json")
    assert man["verb"] == "propagate" and man["version"] == __version__
    assert man["backend"] == _kernels.BACKEND
    assert man["config"]["model.g0"] == "0.0"
    assert man["status"] == "ok"
    jc = man["runs"]["jc"]
    assert jc["n_snapshots"] == 21
    assert jc["drift"]["norm"] < 1e-12 and jc["drift"]["excitations"] < 1e-5  # O(dt^2) splitting

    header, data = read_csv(tmp_path / "out" / "series_jc.csv")
    assert header[:3] == ["t", "norm", "inversion"] and header[-1] == "excitations"
    np.testing.assert_allclose(data[:, 0], np.arange(21) * 0.05, atol=1e-12)
    # g0 = 0 keeps the lower channel empty: its centroids are missing
    assert np.all(np.isnan(data[:, header.index("x_1")]))
    assert np.all(np.isnan(data[:, header.index("dx")]))
    np.testing.assert_allclose(data[:, header.index("inversion")], 1.0, atol=1e-12)
    text = (tmp_path / "out" / "series_jc.csv").read_text()
    assert ",," in text
    for field in re.split(r"[,\n]", text.split("\n", 1)[1]):
        if field:
            assert fmt(float(field)) == field

    dhead, dens = read_csv(tmp_path / "out" / "density_jc.csv")
    # density_every counts snapshots
    assert len(dhead) == 129 and dens.shape[0] == 3
    np.testing.assert_allclose(dens[:, 0], [0.0, 0.5, 1.0], atol=1e-12)
    np.testing.assert_allclose(dens[:, 1:].sum(axis=1) * 20 / 128, 1.0, atol=1e-12)


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_JC.replace("0.0\n", "0.3\n", 1))
    assert run("propagate", cfg, tmp_path / "a") == 0
    assert run("propagate", cfg, tmp_path / "b") == 0
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == ["density_jc.csv", "manifest.json", "series_jc.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_dt_override_and_convergence(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_JC.replace("0.0\n", "0.3\n", 1))
    assert run("propagate", cfg, tmp_path / "o", "--dt-override", "5e-4", "--check-convergence") == 0
    man = load_json(tmp_path / "o" / "manifest.json")
    assert man["config"]["propagation.dt"] == "0.0005"
    assert man["config"]["propagation.snapshot_stride"] == "100"
    conv = man["runs"]["jc"]["convergence"]
    assert conv["converged"] and conv["dt_half"] == 2.5e-4
    assert max(conv["deltas"].values()) < 1e-5


# ------------------------------------------------------------- exit codes

@pytest.mark.parametrize(
    "text",
    [
        SMALL_JC + "model.colour = red\n",
        SMALL_JC.replace("grid.n_points = 128", "grid.n_points = 127"),
    ],
)
def test_config_errors_exit_2(tmp_path, text, capsys):
    assert run("propagate", write_cfg(tmp_path, text), tmp_path / "o") == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config_and_bad_override_exit_2(tmp_path):
    assert run("propagate", str(tmp_path / "none.cfg"), tmp_path / "o") == 2
    assert run("propagate", write_cfg(tmp_path, SMALL_JC), tmp_path / "o", "--dt-override", "-1") == 2
    assert run("compare", write_cfg(tmp_path, SMALL_JC), tmp_path / "o") == 2


def test_unresolved_initial_state_exits_3(tmp_path):
    text = SMALL_JC.replace("grid.x_max = 10", "grid.x_max = 3")
    assert run("propagate", write_cfg(tmp_path, text), tmp_path / "o") == 3


def test_boundary_leak_exits_3_and_keeps_manifest(tmp_path):
    text = """
model.kind = rabi
model.omega = 0.5
model.g0 = 2.5
grid.n_points = 128
grid.x_max = 7
propagation.dt = 1e-3
propagation.t_final = 3
propagation.snapshot_stride = 10
"""
    assert run("propagate", write_cfg(tmp_path, text), tmp_path / "o") == 3
    man = load_json(tmp_path / "o" / "manifest.json")
    assert man["status"] == "invalid"
    assert "boundary" in man["runs"]["rabi"]["abort_reason"]
    _, data = read_csv(tmp_path / "o" / "series_rabi.csv")
    assert data[-1, 0] < 3.0


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_JC + "bogus.key = 1\n")
    proc = subprocess.run(
        [sys.executable, "-m", "cavitywp.cli", "propagate", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2 and "unknown key" in proc.stderr


# ------------------------------------------------------------------- verbs

def test_compare_uncoupled_models_agree(tmp_path):
    text = SMALL_JC.replace("model.kind = jc", "model.kind = rabi, jc")
    assert run("compare", write_cfg(tmp_path, text), tmp_path / "o") == 0
    rep = load_json(tmp_path / "o" / "compare.json")["report"]
    assert rep["rms_difference"] < 1e-12
    assert rep["jc_oracle_max_deviation"] < 1e-10
    header, data = read_csv(tmp_path / "o" / "compare.csv")
    assert header == ["t", "inversion_rabi", "inversion_jc", "difference", "inversion_jc_exact"]


def test_compare_jc_matches_oracle(tmp_path):
    text = SMALL_JC.replace("model.kind = jc", "model.kind = rabi, jc").replace("model.g0 = 0.0", "model.g0 = 0.2")
    text += "compare.t_max = 0.5\n"
    assert run("compare", write_cfg(tmp_path, text), tmp_path / "o") == 0
    rep = load_json(tmp_path / "o" / "compare.json")["report"]
    assert rep["jc_oracle_max_deviation"] < 1e-4
    assert rep["t_max"] == 0.5 and rep["rms_difference_to_t_max"] <= rep["max_abs_difference"]


def test_lz_sweep_rows(tmp_path):
    text = """
model.kind = rabi
model.omega = 1
model.g0 = 1
grid.n_points = 512
grid.x_max = 16
lz.omega = 0, 2
lz.g0 = 1
lz.n_bar = 0.5, 8
lz.dt = 2e-3
"""
    assert run("lz-sweep", write_cfg(tmp_path, text), tmp_path / "o") == 0
    rows = load_json(tmp_path / "o" / "lz_sweep.json")["rows"]
    assert len(rows) == 4
    skipped = [r for r in rows if "skipped" in r]
    assert {r["n_bar"] for r in skipped} == {0.5}
    assert all("does not reach" in r["skipped"] for r in skipped)
    by = {(r["omega"], r["n_bar"]): r for r in rows if "skipped" not in r}
    assert by[(0.0, 8.0)]["p_num"] < 1e-3  # packet tail past x = 0 and by[(0.0, 8.0)]["p_lz"] == 0.0
    assert by[(2.0, 8.0)]["relative_deviation"] < 0.05
    lines = (tmp_path / "o" / "lz_sweep.csv").read_text().splitlines()
    assert len(lines) == 5 and lines[0].endswith(",skipped")
    assert all(len(l.split(",")) == 9 for l in lines)


def test_revival_scan_outputs(tmp_path):
    text = """
model.kind = rabi
model.omega = 0.0
model.g0 = 0.5
initial.field = coherent
initial.nu = 1
grid.n_points = 256
grid.x_max = 12
propagation.dt = 2e-3
propagation.t_final = 13
propagation.snapshot_stride = 10
outputs.centroid_basis = rotated
revival.envelope_window = 1
"""
    assert run("revival-scan", write_cfg(tmp_path, text), tmp_path / "o") == 0
    rep = load_json(tmp_path / "o" / "revival_scan.json")["runs"]["rabi"]
    assert rep["centroid_basis"] == "rotated"
    assert rep["x_tol"] == pytest.approx(0.1 * math.sqrt(0.5))
    np.testing.assert_allclose([e["time"] for e in rep["events"]], [0, 2 * math.pi, 4 * math.pi], atol=0.03)
    header, _ = read_csv(tmp_path / "o" / "revival_rabi.csv")
    assert header == ["t", "dx", "dp", "inversion", "envelope"]


def test_dicke_spectrum(tmp_path):
    cfg = str(CONFIG_DIR / "dicke_spectrum.cfg")
    assert run("dicke-spectrum", cfg, tmp_path / "o") == 0
    rep = load_json(tmp_path / "o" / "dicke_spectrum.json")
    assert rep["critical_coupling"] == 0.5
    assert abs(rep["located_critical_coupling"] - 0.5) < 1e-4
    header, data = read_csv(tmp_path / "o" / "dicke_spectrum.csv")
    assert header == ["g0", "mu", "alpha", "beta", "eps_minus", "eps_plus"]
    assert data.shape == (201, 6)
    ph, pots = read_csv(tmp_path / "o" / "dicke_potentials.csv")
    assert len(ph) == 1 + 3 * 11 and pots.shape[0] == 241


def test_dicke_spectrum_needs_omega(tmp_path):
    assert run("dicke-spectrum", write_cfg(tmp_path, "model.kind = dicke\n"), tmp_path / "o") == 2


def test_oracle_verb_weak_coupling(tmp_path):
    assert run("oracle", str(CONFIG_DIR / "collapse_revival.cfg"), tmp_path / "o") == 0
    res = load_json(tmp_path / "o" / "oracle.json")["results"]
    assert res["jc"]["revival_time"] == pytest.approx(631.49, abs=0.01)
    assert res["jc"]["sectors"][0]["n"] == 1
    assert res["rabi"]["crossing_velocity"] == pytest.approx(9.89893, abs=1e-5)
    header, data = read_csv(tmp_path / "o" / "potentials_rabi.csv")
    assert header == ["x", "V_d_plus", "V_d_minus", "V_ad_plus", "V_ad_minus"]
    assert np.all(data[:, 4] <= data[:, 3])
    assert critical_coupling(5.0) > 0  # Dicke module is independent of this verb

import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mrrf import OpticalMedium, diagonalize
from mrrf import cli
from mrrf.spectral import NumericError

FROZEN = json.loads((Path(__file__).parent / "data" / "frozen_oracles.json").read_text())


def run_cli(tmp_path, command, text, *extra):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = tmp_path / f"{command}.csv"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    rows = list(csv.DictReader(io.StringIO(out.read_text()))) if out.exists() else None
    return code, rows, out


def test_parse_config_types_and_comments():
    v = cli.parse_config("""
        # comment
        medium.g = 0.3   # trailing
        run.l_max = 4
        run.sweep = yes
        geometry.y_list = 1, 2 3
        samples = 0 0 1 0.5 0; 1 0 2 0 0
    """)
    assert v["medium.g"] == 0.3 and v["run.l_max"] == 4 and v["run.sweep"] is True
    assert v["geometry.y_list"] == [1.0, 2.0, 3.0]
    assert v["samples"][1] == [1.0, 0.0, 2.0, 0.0, 0.0]


@pytest.mark.parametrize("text", [
    "bogus.key = 1",
    "run.l_max = four",
    "run.sweep = maybe",
    "no equals sign",
    "preset = nonexistent",
    "samples = 0 0 1",
])
def test_parse_config_rejects(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_config(text)


def test_preset_expansion_with_override():
    v = cli.parse_config("preset = tissue-on-axis\nrun.l_max = 5")
    assert v["medium.g"] == 0.98 and v["run.l_max"] == 5 and v["geometry.z"] == 6.0
    for name in cli.PRESETS:
        cfg = cli.RunConfig.from_values(cli.parse_config(f"preset = {name}"))
        assert cfg.l_max > 0


@pytest.mark.parametrize("values", [
    {"medium.g": 0.5, "run.l_max": 2},
    {"medium.g": 0.5, "medium.absorption_ratio": 0.1, "medium.mu_a": 1.0, "run.l_max": 2},
    {"medium.g": 0.5, "medium.absorption_ratio": 0.1},
    {"medium.g": 0.5, "medium.absorption_ratio": 0.1, "run.l_max": 2, "run.block_dim": 7},
    {"medium.g": 1.5, "medium.absorption_ratio": 0.1, "run.l_max": 2},
])
def test_run_config_rejects(values):
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_values(values)


def test_spectrum_closed_form(tmp_path):
    code, rows, _ = run_cli(tmp_path, "spectrum",
                            "medium.mu_a = 0.1\nmedium.mu_s = 1.0\nrun.l_max = 0\nrun.block_dim = 2\n")
    assert code == 0 and len(rows) == 1
    assert float(rows[0]["lambda"]) == pytest.approx(1 / math.sqrt(3 * 0.1 * 1.1), rel=1e-14)
    assert rows[0]["classification"] == "discrete"


def test_spectrum_classification(tmp_path):
    code, rows, _ = run_cli(tmp_path, "spectrum",
                            "medium.g = 0.5\nmedium.absorption_ratio = 0.5\nrun.l_max = 1\n"
                            "run.block_dim = 100\n")
    mu_t = OpticalMedium.from_transport_units(0.5, 0.5).mu_t
    for r in rows:
        lam = float(r["lambda"])
        assert (r["classification"] == "discrete") == (lam > 1 / mu_t)
        assert lam <= float(r["gershgorin_bound"]) * (1 + 1e-12)


def test_exit_codes(tmp_path, monkeypatch):
    assert run_cli(tmp_path, "spectrum", "bogus = 1")[0] == cli.EXIT_CONFIG
    assert cli.main(["spectrum", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG

    def boom(*a, **k):
        raise NumericError("forced")
    monkeypatch.setattr(cli, "run", boom)
    assert run_cli(tmp_path, "spectrum", "medium.g = 0.5")[0] == cli.EXIT_NUMERIC


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "mrrf.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "profile" in res.stdout


PROFILE = """medium.g = 0.5
medium.absorption_ratio = 0.5
run.l_max = 6
run.block_dim = 200
geometry.kind = on-axis
geometry.z = 3
grid.n_angles = {n}
"""


def test_profile_deterministic(tmp_path):
    _, rows, out = run_cli(tmp_path, "profile", PROFILE.format(n=13))
    first = out.read_bytes()
    _, _, out2 = run_cli(tmp_path, "profile", PROFILE.format(n=13))
    assert out2.read_bytes() == first
    assert len(rows) == 13 and list(rows[0]) == ["theta", "intensity", "l_max",
                                                 "ballistic_subtracted", "increment", "roundoff"]


def test_warm_cache_matches_cold(tmp_path):
    cache = tmp_path / "decomp.npz"
    _, _, out = run_cli(tmp_path, "profile", PROFILE.format(n=7), "--cache", str(cache))
    cold = out.read_bytes()
    assert cache.exists()
    _, _, out = run_cli(tmp_path, "profile", PROFILE.format(n=7), "--cache", str(cache))
    assert out.read_bytes() == cold


def test_grid_refinement_keeps_shared_angles(tmp_path):
    _, coarse, _ = run_cli(tmp_path, "profile", PROFILE.format(n=7))
    _, fine, _ = run_cli(tmp_path, "profile", PROFILE.format(n=13))
    for k, row in enumerate(coarse):
        assert float(fine[2 * k]["intensity"]) == pytest.approx(float(row["intensity"]), rel=1e-12)


def test_sweep_nonconvergence_flagged(tmp_path):
    text = PROFILE.format(n=9) + "run.sweep = true\nrun.tolerance = 1e-12\n"
    code, rows, _ = run_cli(tmp_path, "profile", text)
    assert code == cli.EXIT_CONVERGENCE
    assert sorted({int(r["l_max"]) for r in rows}) == list(range(1, 7))


def test_sweep_lmax_one_is_diffusion_form(tmp_path):
    text = PROFILE.format(n=19) + "run.sweep = true\n"
    _, rows, _ = run_cli(tmp_path, "profile", text)
    sel = [r for r in rows if r["l_max"] == "1"]
    th = np.array([float(r["theta"]) for r in sel])
    I = np.array([float(r["intensity"]) for r in sel])
    A = np.stack([np.ones_like(th), np.cos(th)], axis=1)
    coef, *_ = np.linalg.lstsq(A, I, rcond=None)
    assert np.max(np.abs(A @ coef - I)) < 1e-10 * np.max(np.abs(I))


def test_beta_and_alpha_scans_share_direction():
    d = diagonalize(OpticalMedium.from_transport_units(0.5, 0.5), 6, block_dim=200)
    r, sa = cli.scan_geometry("alpha", y=3.0, angles=[math.pi / 2])
    _, sb = cli.scan_geometry("beta", y=3.0, angles=[0.0, 0.7, math.pi - 0.7])
    scan = cli.ProfileScan(d, r)
    Ia = scan(sa)
    Ib = scan(sb)
    assert Ib[0] == pytest.approx(Ia[0], rel=1e-12)
    # mirror x -> -x leaves the configuration unchanged
    _, sm = cli.scan_geometry("beta", y=3.0, angles=[-0.7])
    assert scan(sm)[0] == pytest.approx(Ib[1], rel=1e-10)


def test_geometry_validation():
    with pytest.raises(cli.ConfigError):
        cli.scan_geometry("on-axis", z=0.0, angles=[0.0])
    with pytest.raises(cli.ConfigError):
        cli.scan_geometry("sideways", y=1.0, angles=[0.0])
    with pytest.raises(cli.ConfigError):
        cli.angle_grid(2, "theta")


def test_peak_position_parabola():
    grid = 2 * math.pi * np.arange(64) / 64
    for x0 in (1.0, 2.3, 6.25):
        vals = 1.0 - (np.angle(np.exp(1j * (grid - x0)))) ** 2   # exact parabola near the peak
        assert cli.peak_position(grid, vals) == pytest.approx(x0, abs=1e-12)
    assert math.isnan(cli.peak_position(grid, np.ones(64)))


def test_peak_scan_small(tmp_path):
    text = ("medium.g = 0.9\nmedium.absorption_ratio = 0.01\nrun.l_max = 8\nrun.block_dim = 200\n"
            "geometry.kind = alpha\ngeometry.y_list = 2 4\ngrid.n_angles = 360\n")
    code, rows, _ = run_cli(tmp_path, "peak-scan", text)
    assert code in (cli.EXIT_OK, cli.EXIT_CONVERGENCE)
    a = [float(r["alpha0"]) for r in rows]
    assert len(a) == 2 and all(math.pi / 2 < x < math.pi for x in a)
    assert a[1] < a[0]


def test_kappa_table_matches_frozen(tmp_path):
    ref = FROZEN["kappa_simpson"]
    text = (f"medium.g = {ref['g']}\nmedium.absorption_ratio = {ref['absorption_ratio']}\n"
            f"run.l_max = {ref['lmax']}\nrun.block_dim = {ref['block_dim']}\n"
            f"kappa.q = {ref['q']}\nkappa.phi_q = {ref['phi_q']}\nkappa.z = 0.7\n")
    code, rows, _ = run_cli(tmp_path, "kappa-table", text)
    assert code == 0
    K = np.array(ref["values"]["0.7"]["re"]) + 1j * np.array(ref["values"]["0.7"]["im"])
    from mrrf.special_functions import lm_index
    for r in rows:
        i = lm_index(int(r["l"]), int(r["m"]))
        j = lm_index(int(r["lp"]), int(r["mp"]))
        val = float(r["re"]) + 1j * float(r["im"])
        assert abs(val - K[i, j]) < 1e-8 * abs(K[i, j])


BOUNDARY = """medium.g = 0.5
medium.absorption_ratio = 0.5
run.l_max = {lmax}
boundary.kind = halfspace-external
source.theta = 0.3
source.phi = 0.2
samples = 0 0 1 0.2 0; 0.5 0 2 1.0 0.5
"""


def test_boundary_command(tmp_path):
    code, rows, _ = run_cli(tmp_path, "boundary", BOUNDARY.format(lmax=3))
    assert code == 0 and len(rows) == 2
    assert all(float(r["residual"]) < 1e-6 for r in rows)
    assert all(math.isfinite(float(r["intensity"])) for r in rows)


def test_boundary_command_rejects_even_lmax(tmp_path):
    assert run_cli(tmp_path, "boundary", BOUNDARY.format(lmax=4))[0] == cli.EXIT_CONFIG

import json

import numpy as np
import pytest

from atomchip_sta import cli
from atomchip_sta.config import CONFIG_ENV
from atomchip_sta.constants import GAUSS, MS
from atomchip_sta.io import read_csv


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.main(["--out", str(out), *argv])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_trap_tables(tmp_path):
    code, out = run(tmp_path, "trap-tables", "--samples", "24")
    assert code == 0
    header, data = read_csv(out / "trap_tables.csv")
    assert header == ["B_bias_G", "z_t_mm", "nu_x_Hz", "nu_y_Hz", "nu_z_Hz", "L3_mm", "theta_deg"]
    assert data.shape == (24, 7)
    assert (out / "trap_tables.png").stat().st_size > 0
    assert set(manifest(out)["outputs"]) >= {"trap_tables.csv", "trap_tables.json", "trap_tables.png"}


def test_design_ramp_and_si_echo(tmp_path):
    code, out = run(tmp_path, "design-ramp", "--ansatz", "poly9", "--tf-ms", "60", "--zi-mm", "0.5",
                    "--zf-mm", "1.6")
    assert code == 0
    header, data = read_csv(out / "ramp.csv")
    assert header == ["t_s", "z_a_m", "z_t_m", "omega_z_rad_s", "B_bias_G", "chi"]
    assert data[-1, 0] == pytest.approx(0.06)
    summary = json.loads((out / "ramp.json").read_text())
    assert set(summary) >= {"chi_max", "bias_start_G", "bias_end_G"}
    si = manifest(out)["inputs_si"]
    assert si["t_f_s"] == pytest.approx(60 * MS)
    assert si["z_i_m"] == pytest.approx(0.5e-3) and si["z_f_m"] == pytest.approx(1.6e-3)


def test_bias_flags_echo_in_tesla(tmp_path):
    code, out = run(tmp_path, "trap-tables", "--bias-min-G", "5", "--bias-max-G", "20", "--samples", "20")
    assert code == 0
    si = manifest(out)["inputs_si"]
    assert si["bias_min_T"] == pytest.approx(5 * GAUSS) and si["bias_max_T"] == pytest.approx(20 * GAUSS)


def test_single_worker_outputs_are_byte_identical(tmp_path):
    _, a = run(tmp_path, "simulate-classical", "--hold-ms", "20", name="a")
    _, b = run(tmp_path, "simulate-classical", "--hold-ms", "20", name="b")
    for f in ("classical.csv",):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_simulate_classical_scan_and_perturbation(tmp_path):
    code, out = run(tmp_path, "simulate-classical", "--scan-tf", "50:100:25", "--delta-bias-mG", "1",
                    "--hold-ms", "50")
    assert code == 0
    header, data = read_csv(out / "classical.csv")
    assert header == ["t_s", "z_m", "v_m_s", "z_t_m"]
    _, scan = read_csv(out / "classical_scan.csv")
    np.testing.assert_allclose(scan[:, 0], [50, 75, 100])
    summary = json.loads((out / "classical.json").read_text())
    assert summary["perturbation_residual_m"] > 0
    assert manifest(out)["inputs_si"]["delta_bias_T"] == pytest.approx(1e-7)


@pytest.mark.parametrize("scenario", ["transport", "dkc"])
def test_simulate_scaling(tmp_path, scenario):
    code, out = run(tmp_path, "simulate-scaling", "--scenario", scenario, "--hold-ms", "100")
    assert code == 0
    header, _ = read_csv(out / "scaling.csv")
    assert header == ["t_s", "lambda_x", "lambda_y", "lambda_z", "Rx_m", "Ry_m", "Rz_m"]
    assert set(json.loads((out / "scaling.json").read_text())) >= {"T_pK", "T1d_pK", "rates_um_s"}


def test_analyze_modes(tmp_path):
    code, out = run(tmp_path, "analyze-modes", "--tf-ms", "75", "--axis", "x")
    assert code == 0
    header, data = read_csv(out / "modes.csv")
    assert header == ["freq_Hz", "log_magnitude"]
    peaks = json.loads((out / "modes.json").read_text())["peaks"]
    assert peaks and all("frequency_Hz" in p for p in peaks)


def test_dkc_optimize(tmp_path):
    code, out = run(tmp_path, "dkc-optimize", "--hold-range-ms", "31:32:0.5", "--lens-range-ms", "4.6,4.8,5.0")
    assert code == 0
    header, data = read_csv(out / "dkc_map.csv")
    assert header == ["hold_ms", "lens_ms", "T_pK"] and data.shape == (9, 3)
    best = json.loads((out / "dkc_best.json").read_text())
    assert best["T_pK"] == pytest.approx(data[:, 2].min(), rel=1e-3)


def test_simulate_gpe_with_snapshot(tmp_path):
    code, out = run(tmp_path, "simulate-gpe", "--grid", "32,16,16", "--tf-ms", "75", "--snapshots", "10,50")
    assert code == 0
    header, data = read_csv(out / "gpe.csv")
    assert header == ["t_s", "Za_m", "dX_m", "dY_m", "dZ_m", "dx_m", "dy_m", "dz_m", "norm", "energy_J"]
    assert sorted(p.name for p in out.glob("snapshot_*.bin")) == ["snapshot_000.bin", "snapshot_001.bin"]


def test_reproduce_figure_runs_checks(tmp_path, capsys):
    code, out = run(tmp_path, "reproduce-figure", "fig3")
    assert code == 0
    assert "criterion 10" in capsys.readouterr().out
    checks = manifest(out)["checks"]
    assert checks and all(c["passed"] for c in checks)


def test_failing_check_sets_exit_code(tmp_path, monkeypatch):
    from atomchip_sta.acceptance import Check
    monkeypatch.setitem(cli._FIGS, "fig3", lambda r: r.check([Check(0, "forced", 1.0, "< 0", False)]))
    code, out = run(tmp_path, "reproduce-figure", "fig3")
    assert code == 1
    assert manifest(out)["checks"][0]["passed"] is False


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path, "reproduce-figure", "fig9")[0] == 2
    assert "fig9" in capsys.readouterr().err
    assert run(tmp_path, "--workers", "0", "trap-tables")[0] == 2
    assert run(tmp_path, "no-such-command")[0] == 2
    assert run(tmp_path, "simulate-gpe", "--grid", "32,32")[0] == 2


def test_config_errors(tmp_path, monkeypatch):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[chip]\nbias_G = -1\n")
    assert cli.main(["--config", str(bad), "--out", str(tmp_path / "o"), "trap-tables"]) == 2
    monkeypatch.setenv(CONFIG_ENV, str(bad))
    assert cli.main(["--out", str(tmp_path / "o"), "trap-tables"]) == 2


def test_numerical_failure_exit_code(tmp_path):
    cfg = tmp_path / "few.cfg"
    cfg.write_text("[tables]\nsamples = 10\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o"), "trap-tables"]) == 3


def test_no_plots_flag(tmp_path):
    code, out = run(tmp_path, "--no-plots", "design-ramp")
    assert code == 0 and not list(out.glob("*.png"))

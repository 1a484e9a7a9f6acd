"""End-to-end tests of the command line interface (in-process, via main)."""

import hashlib
import math

import numpy as np
import pytest

import phasekick
from phasekick.cli import ENV_CONFIG, main
from phasekick.core import KickSequence, TrapConfig
from phasekick.fringes import spin_up_thermal
from phasekick.io import read_fringe_csv, read_grid_csv, read_ring_csv, write_fringe_csv, write_ring_csv
from phasekick.synth import FringeScan, RingSample, lift_probability
from phasekick.thermometry import plan_theta_grid

VACUUM_FRINGE = """
[experiment]
kind = fringe
seed = 5
shots = 200

[state]
kind = vacuum

[fringe]
n_kicks = 1
theta_rad = 0.0
ramsey_time_s = 1e-3
detuning_points = 9
"""

HEATING = """
[experiment]
kind = heating-predict

[heating]
s_v = 1e-12
d_eff_m = 1e-3
nbar0 = 10
durations_s = 0.0, 1e-4, 2e-4
"""

TOMO_THERMAL = """
[experiment]
kind = tomography
seed = 1
shots = 500

[state]
kind = thermal
nbar = 1

[tomography]
rings = 1,2,3,4,-1,-2,-3,-4
theta_points = 32
resolution = 0.1
"""

TOMO_EXACT_FOCK = """
[experiment]
kind = tomography
shots = 0

[state]
kind = fock
n = 1

[tomography]
rings = 1,2,3,4,5,6,-1,-2,-3,-4,-5,-6
theta_points = 32
resolution = 0.12
reference = fock:1
"""

CAMPAIGN = """
[experiment]
kind = thermometry-campaign
seed = 3
shots = 50

[campaign]
nbars = 30
n_kicks = 1
ramsey_time_s = 1e-3
detuning_points = 5
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_summary_rows(path):
    lines = [l for l in path.read_text().splitlines() if l and not l.startswith("#")]
    assert lines[0].startswith("file,n_kicks,truth_nbar,nbar,")
    return [l.split(",") for l in lines[1:]]


def exact_fringe_file(path, trap, nbar, n_kicks, shots=10**9):
    """Fringe CSV whose counts are the rounded exact model expectation."""
    ramsey_time = 1e-3
    detunings = np.linspace(0.0, 2 * np.pi / ramsey_time, 9)
    scans = []
    for theta in plan_theta_grid(nbar, trap, n_kicks):
        counts = []
        for delta in detunings:
            seq = KickSequence(n_kicks, float(theta), phi=float(delta * ramsey_time))
            p = lift_probability(spin_up_thermal(nbar, trap, seq), trap, n_kicks, nbar)
            counts.append(round(float(p) * shots))
        scans.append(FringeScan(n_kicks=n_kicks, theta=float(theta),
                                detunings=detunings, ramsey_time=ramsey_time,
                                shots=shots, counts=np.array(counts)))
    write_fringe_csv(path, scans, {"truth-nbar": repr(float(nbar))})


class TestSimulate:
    def test_vacuum_fringe_follows_cosine(self, tmp_path):
        cfg = write(tmp_path, VACUUM_FRINGE)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
        meta, [scan] = read_fringe_csv(tmp_path / "fringe.csv")
        assert meta["schema"] == "fringe/1"
        assert meta["seed"] == "5"
        assert "config-sha256" in meta
        assert scan.shots == 200 and len(scan.counts) == 9
        # Zero delay means a bare Ramsey fringe in the detuning phase.
        corr = np.corrcoef(scan.counts, np.cos(scan.phis))[0, 1]
        assert corr > 0.95

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = write(tmp_path, CAMPAIGN)
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        name = "lineshape_nbar_30.csv"
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)

    def test_seed_override_changes_bytes_and_hash(self, tmp_path):
        cfg = write(tmp_path, CAMPAIGN)
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
        name = "lineshape_nbar_30.csv"
        assert sha(tmp_path / "a" / name) != sha(tmp_path / "b" / name)
        meta_a, _ = read_fringe_csv(tmp_path / "a" / name)
        meta_b, _ = read_fringe_csv(tmp_path / "b" / name)
        assert meta_a["config-sha256"] != meta_b["config-sha256"]
        assert meta_a["truth-nbar"] == "30.0"

    def test_campaign_writes_one_file_per_occupation(self, tmp_path):
        cfg = write(tmp_path, CAMPAIGN.replace("nbars = 30", "nbars = 30, 100"))
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "lineshape_nbar_30.csv").exists()
        assert (tmp_path / "lineshape_nbar_100.csv").exists()

    def test_wrong_kind_rejected(self, tmp_path):
        cfg = write(tmp_path, HEATING)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = write(tmp_path, VACUUM_FRINGE + "\n[fringe]\nwavelength = 355\n")
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_no_config_anywhere(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CONFIG, raising=False)
        assert main(["simulate", "--out", str(tmp_path)]) == 2

    def test_env_var_supplies_config(self, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_CONFIG, write(tmp_path, VACUUM_FRINGE))
        assert main(["simulate", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "fringe.csv").exists()

    def test_output_dir_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write(tmp_path, VACUUM_FRINGE + "\n[output]\ndir = results\n")
        assert main(["simulate", "--config", cfg]) == 0
        assert (tmp_path / "results" / "fringe.csv").exists()

    def test_blocked_output_dir_is_io_error(self, tmp_path):
        cfg = write(tmp_path, VACUUM_FRINGE)
        blocked = tmp_path / "blocked"
        blocked.write_text("in the way")
        assert main(["simulate", "--config", cfg, "--out", str(blocked)]) == 4


class TestFit:
    def test_exact_model_round_trip(self, tmp_path):
        path = tmp_path / "exact.csv"
        exact_fringe_file(path, TrapConfig(), nbar=1e3, n_kicks=1)
        assert main(["fit", str(path), "--out", str(tmp_path)]) == 0
        [row] = read_summary_rows(tmp_path / "fit_summary.csv")
        assert row[0] == str(path) and row[1] == "1" and row[-1] == "ok"
        assert float(row[2]) == 1e3
        assert abs(float(row[3]) - 1e3) / 1e3 < 1e-6
        assert float(row[8]) < 1e-6
        report = (tmp_path / "fit_report.txt").read_text()
        assert "nbar:" in report and "relative error" in report

    def test_trap_comes_from_config_when_given(self, tmp_path):
        # Data taken at eta = 0.1 fits to a different nbar under the
        # default eta = 0.2; passing the matching config must fix that.
        trap = TrapConfig(eta=0.1)
        path = tmp_path / "eta01.csv"
        exact_fringe_file(path, trap, nbar=1e3, n_kicks=1)
        cfg = write(tmp_path, "[trap]\nlamb_dicke = 0.1\n[experiment]\nkind = fringe\n"
                              "[state]\nkind = vacuum\n")
        assert main(["fit", str(path), "--config", cfg, "--out", str(tmp_path)]) == 0
        [row] = read_summary_rows(tmp_path / "fit_summary.csv")
        assert abs(float(row[3]) - 1e3) / 1e3 < 1e-6
        assert main(["fit", str(path), "--out", str(tmp_path)]) == 0
        [row] = read_summary_rows(tmp_path / "fit_summary.csv")
        assert abs(float(row[3]) - 1e3) / 1e3 > 0.5

    def test_empty_csv_is_schema_error(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("")
        assert main(["fit", str(bad), "--out", str(tmp_path)]) == 2

    def test_partial_failure_still_succeeds(self, tmp_path, capsys):
        good = tmp_path / "good.csv"
        exact_fringe_file(good, TrapConfig(), nbar=100.0, n_kicks=1)
        bad = tmp_path / "bad.csv"
        bad.write_text("nonsense\n")
        assert main(["fit", str(good), str(bad), "--out", str(tmp_path)]) == 0
        rows = read_summary_rows(tmp_path / "fit_summary.csv")
        assert [r[-1] for r in rows] == ["ok", "failed"]
        assert "1 of 2 file(s) failed" in capsys.readouterr().err

    def test_mixed_kick_counts_in_one_file_rejected(self, tmp_path):
        detunings = np.linspace(0.0, 2 * np.pi, 9)
        scans = [
            FringeScan(n_kicks=1, theta=6.2, detunings=detunings, ramsey_time=1.0,
                       shots=10, counts=np.full(9, 5)),
            FringeScan(n_kicks=2, theta=6.3, detunings=detunings, ramsey_time=1.0,
                       shots=10, counts=np.full(9, 5)),
        ]
        path = tmp_path / "mixed.csv"
        write_fringe_csv(path, scans)
        assert main(["fit", str(path), "--out", str(tmp_path)]) == 2


class TestTomo:
    def test_sampled_thermal_state_shows_no_negativity(self, tmp_path):
        cfg = write(tmp_path, TOMO_THERMAL)
        assert main(["tomo", "--config", cfg, "--out", str(tmp_path)]) == 0
        report = (tmp_path / "tomo_report.txt").read_text()
        assert "significant (3x):  no" in report
        meta, x, y, re, im, mask = read_grid_csv(tmp_path / "grid.csv")
        assert meta["schema"] == "grid/1"
        assert meta["resolution"] == "0.1"
        # chi(0) = 1 for every state; the origin is always sampled, and the
        # measured value sits at the hardware contrast ceiling (detection
        # and kick infidelity), pooled over all rings.
        origin = (np.abs(x) < 1e-9) & (np.abs(y) < 1e-9)
        assert origin.sum() == 1
        assert re[origin][0] == pytest.approx(0.96, abs=0.05)

    def test_exact_single_quantum_reconstruction(self, tmp_path):
        cfg = write(tmp_path, TOMO_EXACT_FOCK)
        assert main(["tomo", "--config", cfg, "--out", str(tmp_path)]) == 0
        report = (tmp_path / "tomo_report.txt").read_text()
        assert "significant (3x):  yes" in report
        min_line = next(l for l in report.splitlines() if "min Re chi" in l)
        assert float(min_line.split()[3]) == pytest.approx(-0.4463, abs=0.03)
        # This quick plan is sparse (32 delay angles, half the rings), so
        # the hull-edge interpolation error is looser than a full-density
        # reconstruction achieves.
        res_line = next(l for l in report.splitlines() if "max |Re residual|" in l)
        assert float(res_line.split()[-1]) < 0.15
        assert (tmp_path / "residuals.csv").exists()
        _, _, _, res_re, _, mask = read_grid_csv(tmp_path / "residuals.csv")
        assert np.nanmax(np.abs(res_re[mask])) < 0.15

    def test_ring_csv_inputs_without_state(self, tmp_path, ideal_cfg):
        # A phi = 0-only data set reconstructs Re chi and leaves Im empty.
        thetas = np.arange(16) * 2 * np.pi / 16
        samples = [RingSample(n_kicks=n, theta=float(t), phi=0.0, shots=200,
                              count=100)
                   for n in (1, 2, -1, -2) for t in thetas]
        data = tmp_path / "rings.csv"
        write_ring_csv(data, samples)
        cfg = write(tmp_path, "[experiment]\nkind = tomography\n"
                              "[tomography]\nresolution = 0.1\n")
        assert main(["tomo", "--config", cfg, "--out", str(tmp_path), str(data)]) == 0
        _, x, y, re, im, mask = read_grid_csv(tmp_path / "grid.csv")
        assert np.all(np.isnan(im))
        assert np.nanmax(np.abs(re[mask])) < 0.2  # chi = 0 everywhere here

    def test_no_inputs_and_no_state_rejected(self, tmp_path):
        cfg = write(tmp_path, "[experiment]\nkind = tomography\n")
        assert main(["tomo", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_wrong_kind_rejected(self, tmp_path):
        cfg = write(tmp_path, VACUUM_FRINGE)
        assert main(["tomo", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestHeating:
    def test_prediction_table(self, tmp_path):
        cfg = write(tmp_path, HEATING)
        assert main(["heating", "--config", cfg, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "heating.csv").read_text().splitlines()
        meta = {k.strip(): v.strip() for k, v in
                (l[1:].split(":", 1) for l in lines if l.startswith("#"))}
        rate = float(meta["rate-quanta-per-s"])
        assert rate == pytest.approx(3.412e7, rel=1e-3)
        body = [l for l in lines if l and not l.startswith("#")]
        assert body[0] == "duration_s,nbar"
        for row in body[1:]:
            t, nbar = (float(v) for v in row.split(","))
            assert nbar == pytest.approx(10.0 + rate * t, rel=1e-12)

    def test_wrong_kind_rejected(self, tmp_path):
        cfg = write(tmp_path, TOMO_THERMAL)
        assert main(["heating", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert phasekick.__version__ in capsys.readouterr().out

    def test_threads_option_gives_same_bytes(self, tmp_path):
        cfg = write(tmp_path, CAMPAIGN)
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "4"])
        name = "lineshape_nbar_30.csv"
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)

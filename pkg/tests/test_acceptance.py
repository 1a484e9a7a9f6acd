"""Acceptance suite: the nine headline guarantees, one test per criterion.

Each test prints a single ``criterion N: PASS (...)`` line with the
measured figure of merit, and enforces the stated runtime budget where
one applies.  These tests exercise the package end to end: closed-form
model against the truncated-Fock oracle, statistical estimator recovery,
tomographic reconstruction, planning feasibility, heating calibration,
and byte-level reproducibility of the CLI outputs.
"""

import hashlib
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from phasekick.cli import main
from phasekick.core import KickSequence, MotionalState, TrapConfig, theta_resolution
from phasekick.errors import InfeasibleError
from phasekick.fringes import (
    chi_fock,
    chi_state,
    fwhm_exact,
    fwhm_hot,
    spin_up_coherent,
    spin_up_thermal,
    thermal_envelope,
)
from phasekick.heating import NoiseDrive, heating_rate, predict_nbar
from phasekick.oracle import required_dim, run_ramsey
from phasekick.synth import DEFAULT_RING_SET, synth_fringe, synth_ring_samples
from phasekick.thermometry import extract_contrast, fit_lineshape, plan_theta_grid
from phasekick.tomography import (
    ChiSample,
    chi_from_samples,
    negativity_report,
    plan_rings,
    reconstruct_grid,
)

CFG = TrapConfig()


def synth_campaign_points(nbar, seed, n_kicks=1, shots=500):
    """One simulated thermometry campaign: fringe scan per delay angle."""
    grid = plan_theta_grid(nbar, CFG, n_kicks)
    ramsey_time = 1e-3
    detunings = np.linspace(0.0, 2.0 * math.pi / ramsey_time, 9)
    points = []
    for j, theta in enumerate(grid):
        scan = synth_fringe(MotionalState.thermal(nbar), CFG, n_kicks, float(theta),
                            detunings, ramsey_time, shots, rng_seed=[seed, j])
        points.append(extract_contrast(scan))
    return points


def test_criterion_1_oracle_matches_coherent_closed_form():
    start = time.monotonic()
    rng = np.random.default_rng(20260819)
    worst = 0.0
    for _ in range(50):
        alpha = 3.0 * math.sqrt(rng.uniform()) * np.exp(2j * math.pi * rng.uniform())
        n_kicks = int(rng.choice([-2, -1, 1, 2]))
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        phi = float(rng.choice([0.0, math.pi / 2.0]))
        seq = KickSequence(n_kicks, theta, phi)
        state = MotionalState.coherent(alpha)
        assert required_dim(state, CFG, seq) <= 256
        report = run_ramsey(state, CFG, seq)
        exact = spin_up_coherent(alpha, CFG, seq)
        worst = max(worst, abs(report.spin_up_probability - exact))
    elapsed = time.monotonic() - start
    assert worst < 1e-5
    assert elapsed < 60.0
    print(f"criterion 1: PASS (max |oracle - closed form| = {worst:.2e} "
          f"over 50 random coherent settings, {elapsed:.1f}s)")


def test_criterion_2_oracle_matches_thermal_closed_form():
    start = time.monotonic()
    thetas = np.linspace(0.0, 2.0 * math.pi, 64)
    worst = 0.0
    for nbar in (0.1, 1.0, 10.0):
        state = MotionalState.thermal(nbar)
        for n_kicks in (1, 2):
            for theta in thetas:
                seq = KickSequence(n_kicks, float(theta), 0.0)
                report = run_ramsey(state, CFG, seq)
                exact = spin_up_thermal(nbar, CFG, seq)
                worst = max(worst, abs(report.spin_up_probability - exact))
    elapsed = time.monotonic() - start
    assert worst < 1e-3
    assert elapsed < 300.0
    print(f"criterion 2: PASS (max |oracle - closed form| = {worst:.2e} over "
          f"nbar in {{0.1, 1, 10}} x N in {{1, 2}} x 64 delays, {elapsed:.1f}s)")


def test_criterion_3_thermometry_recovers_over_five_decades():
    start = time.monotonic()
    medians = {}
    for nbar in (0.5, 10.0, 1e3, 1e4):
        rel_errors = []
        for seed in range(20):
            result = fit_lineshape(synth_campaign_points(nbar, seed), CFG, 1)
            rel_errors.append(abs(result.nbar - nbar) / nbar)
        medians[nbar] = float(np.median(rel_errors))
        assert medians[nbar] < 0.10
    elapsed = time.monotonic() - start
    detail = ", ".join(f"nbar={k:g}: {v:.1%}" for k, v in medians.items())
    print(f"criterion 3: PASS (median relative error over 20 seeds at 500 "
          f"shots/point: {detail}, {elapsed:.1f}s)")


def test_criterion_4_hot_revival_width():
    nbar, n_kicks = 1e4, 1
    numeric = 2.0 * brentq(
        lambda t: thermal_envelope(nbar, n_kicks, CFG.eta, t) - 0.5, 1e-6, 0.5)
    assert numeric == pytest.approx(0.0415, rel=0.02)
    assert fwhm_hot(nbar, n_kicks, CFG.eta) == pytest.approx(numeric, rel=0.02)
    assert fwhm_exact(nbar, n_kicks, CFG.eta) == pytest.approx(numeric, rel=1e-9)
    print(f"criterion 4: PASS (numeric revival width {numeric:.5f} rad at "
          f"nbar = 1e4, approximation {fwhm_hot(nbar, n_kicks, CFG.eta):.5f} rad)")


def test_criterion_5_single_quantum_tomography():
    start = time.monotonic()
    state = MotionalState.fock(1)

    # Noiseless: evaluate the model on the full default plan and rebuild.
    plan = plan_rings(CFG)
    chis = []
    for p in plan:
        value = complex(chi_state(state, p.alpha))
        chis.append(ChiSample(alpha=p.alpha, re=value.real, re_err=1e-9,
                              im=value.imag, im_err=1e-9,
                              n_kicks=p.n_kicks, theta=p.theta))
    grid = reconstruct_grid(chis, resolution=0.05)
    X, Y = np.meshgrid(grid.x, grid.y)
    truth = np.vectorize(lambda a: chi_fock(1, a))(X + 1j * Y)
    resid = np.abs(np.where(grid.mask, grid.re - np.real(truth), 0.0))
    max_resid = float(np.nanmax(resid))
    assert max_resid <= 0.05
    report = negativity_report(grid)
    assert report.min_value == pytest.approx(-0.4463, abs=0.02)
    assert abs(report.min_alpha) ** 2 == pytest.approx(3.0, abs=0.3)

    # Same plan at 500 shots: the dip must stay significant under noise.
    theta_grid = np.arange(64) * (2.0 * math.pi / 64)
    samples = synth_ring_samples(state, CFG, DEFAULT_RING_SET, theta_grid,
                                 shots=500, seed=5)
    noisy = reconstruct_grid(chi_from_samples(samples, CFG), resolution=0.05)
    noisy_report = negativity_report(noisy)
    assert noisy_report.significant
    assert noisy_report.min_value < -3.0 * noisy_report.min_err

    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    print(f"criterion 5: PASS (noiseless max residual {max_resid:.4f}, min "
          f"{report.min_value:.4f} at |alpha|^2 = {abs(report.min_alpha)**2:.2f}; "
          f"sampled min {noisy_report.min_value:.3f} vs 3 sigma = "
          f"{3 * noisy_report.min_err:.3f}, {elapsed:.1f}s)")


def test_criterion_6_ring_geometry():
    plan = plan_rings(CFG)
    kick_counts = sorted({p.n_kicks for p in plan})
    assert kick_counts == sorted(
        [1, 2, 3, 4, 5, 6, 8, 10, -1, -2, -3, -4, -5, -6, -8, -10])
    worst = 0.0
    for p in plan:
        radius = 2.0 * abs(p.n_kicks) * CFG.eta
        center = 2j * p.n_kicks * CFG.eta
        worst = max(worst, abs(abs(p.alpha - center) - radius))
    assert worst < 1e-12
    print(f"criterion 6: PASS (all {len(plan)} planned points lie on their "
          f"kick-number circles to {worst:.1e})")


def test_criterion_7_delay_planning_and_feasibility():
    coarse_grid = plan_theta_grid(30.0, CFG, 1)
    spacing = float(coarse_grid[1] - coarse_grid[0])
    assert spacing == pytest.approx(theta_resolution(CFG), abs=1e-15)
    assert spacing == pytest.approx(0.0532, abs=2e-4)

    fine_grid = plan_theta_grid(1e7, CFG, 1)
    fine_spacing = float(fine_grid[1] - fine_grid[0])
    assert fine_spacing == pytest.approx(1e-4, abs=1e-12)

    with pytest.raises(InfeasibleError):
        plan_theta_grid(1e9, CFG, 1)
    print(f"criterion 7: PASS (coarse step {spacing * 1e3:.1f} mrad from the "
          f"pulse clock, 0.1 mrad floor feasible at nbar = 1e7, infeasible at 1e9)")


def test_criterion_8_heating_calibration_end_to_end():
    drive_unit = NoiseDrive(s_v=1e-12, d_eff=1e-3, duration=1.0)
    rate = heating_rate(CFG, drive_unit)
    assert 3.4115e7 <= rate < 3.4125e7

    duration = 1e3 / rate
    drive = NoiseDrive(s_v=1e-12, d_eff=1e-3, duration=duration)
    nbar_pred = predict_nbar(drive, CFG)
    result = fit_lineshape(synth_campaign_points(nbar_pred, seed=8), CFG, 1)
    rel = abs(result.nbar - nbar_pred) / nbar_pred
    assert rel < 0.10
    print(f"criterion 8: PASS (rate {rate:.6g} quanta/s in the hand-checked "
          f"band; predicted nbar {nbar_pred:.1f} refit to {result.nbar:.1f}, "
          f"relative error {rel:.1%})")


CAMPAIGN_INI = """
[experiment]
kind = thermometry-campaign
seed = 17
shots = 200

[campaign]
nbars = 0.5, 100
n_kicks = 1
ramsey_time_s = 1e-3
detuning_points = 9
"""


def test_criterion_9_byte_identical_reruns(tmp_path):
    config = tmp_path / "campaign.ini"
    config.write_text(CAMPAIGN_INI)
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        out.mkdir()
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        digests.append({
            name: hashlib.sha256((out / name).read_bytes()).hexdigest()
            for name in ("lineshape_nbar_0.5.csv", "lineshape_nbar_100.csv")
        })
    assert digests[0] == digests[1]
    print(f"criterion 9: PASS (two runs, {len(digests[0])} campaign files each, "
          f"sha256 digests identical)")

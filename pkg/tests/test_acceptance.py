"""Acceptance suite: one test per criterion, each reporting PASS or FAIL."""
import warnings

import numpy as np
import pytest

from conftest import record_criterion

from bosedimer import experiments as E
from bosedimer.fourier import fourier_peaks
from bosedimer.liouvillian import (adiabatic_rates, coherent_initial_blocks, evolve_blocks,
                                   spin_equivalence_check, three_mode_oracle)
from bosedimer.meanfield import integrate_mf
from bosedimer.params import ModelParams, critical_interaction


def test_c01_stationary_order_parameter():
    errors = {w: abs(E.steady_imbalance(ModelParams(omega=w)) - np.sqrt(1 - w * w))
              for w in (0.2, 0.5, 0.8)}
    worst = max(errors.values())
    assert record_criterion(1, "stationary order parameter", worst < 1e-6,
                            f"max |dN - sqrt(1-W^2)| = {worst:.2e}")


def test_c02_critical_exponent():
    d = np.logspace(-4, -2, 9)
    fit = E.critical_exponent_fit(d, E.simulate_exponent(d))
    ok = abs(fit.slope - 0.5) <= 0.02
    assert record_criterion(2, "critical exponent", ok,
                            f"slope {fit.slope:.4f} +- {fit.stderr:.1e}")


@pytest.mark.slow
def test_c03_phase_boundary():
    step = 1e-3
    details, ok = [], True
    for omega in (1.2, 1.45):
        uc = critical_interaction(omega)
        grid = np.round(np.round(uc, 3) + np.arange(-5, 6) * step, 3)
        _, estimate = E.phase_boundary_scan(omega, grid)
        good = estimate is not None and abs(estimate - uc) <= step
        ok &= good
        details.append(f"W={omega}: U_c={uc:.5f} found {estimate}")
    assert record_criterion(3, "fixed-point phase boundary", ok, "; ".join(details))


def test_c04_tc2_frequency():
    params = ModelParams(omega=0.8, u=0.25)
    traj = integrate_mf(None, params, t_end=2000.0, dt=0.1)
    peaks = fourier_peaks(traj.states[:, 1], 0.1)
    err = abs(peaks.dominant - 4 * params.u)
    assert record_criterion(4, "TC2 frequency", err <= peaks.resolution,
                            f"peak {peaks.dominant:.5f}, bin {peaks.resolution:.5f}")


def test_c05_tc1_odd_harmonics():
    traj = integrate_mf(None, ModelParams(omega=1.45), t_end=4000.0, dt=0.1)
    peaks = fourier_peaks(traj.states[:, 1], 0.1, floor=1e-12)
    f0, p0 = peaks.dominant, peaks.powers[0]
    even = max(peaks.power_near(k * f0) for k in (2, 4, 6)) / p0
    odd = peaks.power_near(3 * f0) / p0
    assert record_criterion(5, "TC1 odd harmonics", even < 1e-3,
                            f"fundamental {f0:.4f}, even/fund {even:.1e}, third/fund {odd:.1e}")


def test_c06_spin_equivalence():
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in (2, 4, 6):
        for _ in range(5):
            params = ModelParams(omega=rng.uniform(0, 2), u=rng.uniform(0, 1),
                                 kappa=rng.uniform(0.2, 2), n_th=rng.uniform(0, 1))
            worst = max(worst, spin_equivalence_check(params, n))
    assert record_criterion(6, "spin-boson spectral equivalence", worst < 1e-9,
                            f"max mismatch {worst:.1e}")


@pytest.mark.slow
def test_c07_gap_closure():
    scan = E.gap_scaling([20, 30, 40, 50], ModelParams(omega=0.8, u=0.25))
    lam = [scan.eigenvalues[n][0] for n in scan.n_values]
    # "decreases" is read as the decay rate |Re| shrinking towards zero
    monotone = all(abs(b.real) < abs(a.real) for a, b in zip(lam, lam[1:]))
    im_err = abs(abs(lam[-1].imag) - 1.0)
    detail = ", ".join(f"N={n}: {z.real:.2e}{z.imag:+.4f}i" for n, z in zip(scan.n_values, lam))
    assert record_criterion(7, "finite-size gap closure", monotone and im_err < 0.05, detail)


@pytest.mark.slow
def test_c08_finite_n_convergence():
    params = ModelParams(omega=0.8, u=0.25)
    mf = integrate_mf(None, params, t_end=20.0, dt=0.1)
    devs = []
    for n in (20, 30, 40):
        init = coherent_initial_blocks(n_total=n)
        obs = evolve_blocks(init.blocks, params.replace(n_total=n), 20.0, 0.1,
                            init.coherence_norm)
        devs.append(float(np.max(np.abs(obs.p_a - mf.states[:, 1]))))
    ok = all(b < a for a, b in zip(devs, devs[1:]))
    assert record_criterion(8, "finite-N to mean-field convergence", ok,
                            "max |dp_a| = " + ", ".join(f"{d:.3f}" for d in devs))


def test_c09_entanglement_log_growth():
    fits = {}
    for n_th in (0.0, 0.5, 1.0):
        times, eps = E.entanglement_run(ModelParams(omega=1.0, n_th=n_th), t_end=1e4)
        fits[n_th] = E.entanglement_growth_fit(times, eps)
    slopes = np.array([f.slope for f in fits.values()])
    onsets = [f.onset for f in fits.values()]
    r2 = min(f.r_squared for f in fits.values())
    spread = slopes.max() / slopes.min() - 1
    ok = r2 > 0.99 and spread < 0.05 and all(b > a for a, b in zip(onsets, onsets[1:]))
    detail = (f"slopes {np.round(slopes, 4).tolist()}, min R2 {r2:.4f}, "
              f"onsets {np.round(onsets, 3).tolist()}")
    assert record_criterion(9, "entanglement log growth", ok, detail)


@pytest.mark.slow
def test_c10_hysteresis():
    grid = np.round(np.arange(1.0, 1.6 + 1e-9, 0.01), 2)
    loop = E.hysteresis_loop(0.25, grid, settle_time=200.0)
    flat = E.hysteresis_loop(0.0, grid, settle_time=200.0)
    # one omega step times the radius tolerance of the phase classifier
    resolution = flat.step * E.SWEEP_EPS_R
    ok = loop.area > 0 and flat.area < resolution
    detail = (f"U=0.25 area {loop.area:.4f} over {loop.bistable_omegas.tolist()}; "
              f"U=0 area {flat.area:.1e} (resolution {resolution:.0e})")
    assert record_criterion(10, "hysteresis", ok, detail)


def test_c11_adiabatic_elimination():
    params = ModelParams(omega=0.8, u=0.25)
    worst = []
    for ratio in (10, 30, 100):
        g, gamma = adiabatic_rates(1.0, ratio)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = three_mode_oracle(params, g, gamma, cutoff_c=4, n=2)
        worst.append(float(res.trace_distance.max()))
    ok = worst[0] > worst[1] > worst[2] and worst[2] < worst[0] / 2
    assert record_criterion(11, "adiabatic-elimination oracle", ok,
                            "max trace distance " + ", ".join(f"{w:.2e}" for w in worst))


def test_c12_property_suites():
    import test_properties as props

    suites = [props.test_shell_conservation, props.test_pt_flow_invariance,
              props.test_covariance_symmetric_and_physical, props.test_block_trace_preservation,
              props.test_spectrum_stability, props.test_log_negativity_local_symplectic_invariance]
    failed = []
    for suite in suites:
        try:
            suite()
        except Exception as exc:  # collect every failure before reporting
            failed.append(f"{suite.__name__}: {type(exc).__name__}")
    detail = f"{len(suites) - len(failed)}/{len(suites)} suites x {props.N_EXAMPLES} instances"
    if failed:
        detail += "; " + "; ".join(failed)
    assert record_criterion(12, "property suites", not failed, detail)

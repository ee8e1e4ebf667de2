import warnings

import numpy as np
import pytest

from bosedimer import experiments as E
from bosedimer.errors import ParameterError
from bosedimer.io import read_csv
from bosedimer.meanfield import MeanFieldState
from bosedimer.params import ModelParams


def test_exponent_fit_on_closed_form():
    d = np.logspace(-6, -4, 7)
    fit = E.critical_exponent_fit(d, np.sqrt(1 - (1 - d) ** 2))
    assert fit.slope == pytest.approx(0.5, abs=1e-4)
    assert fit.omega_c == 1.0


def test_exponent_fit_constant_and_errors():
    assert E.critical_exponent_fit(np.logspace(-4, -2, 5), np.ones(5)).slope == pytest.approx(0.0)
    with pytest.raises(ParameterError):
        E.critical_exponent_fit(np.logspace(-4, -2, 4), np.ones(4))
    with pytest.raises(ParameterError):
        E.critical_exponent_fit(-np.logspace(-4, -2, 5), np.ones(5))


def test_exponent_fit_with_free_critical_point():
    omegas = 1 - np.logspace(-4, -2, 9)
    fit = E.critical_exponent_fit(None, np.sqrt(1 - omegas ** 2), fit_omega_c=True, omegas=omegas)
    assert fit.omega_c == pytest.approx(1.0, abs=1e-5)
    assert fit.slope == pytest.approx(0.5, abs=0.01)


def test_relaxed_steady_state_imbalance():
    assert E.steady_imbalance(ModelParams(omega=0.5)) == pytest.approx(np.sqrt(0.75), abs=1e-9)


def test_growth_fit_synthetic_log():
    t = np.logspace(-1, 4, 300)
    fit = E.entanglement_growth_fit(t, 0.7 * np.log(t) + 0.1)
    assert fit.slope == pytest.approx(0.7, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.onset == pytest.approx(t[np.argmax(0.7 * np.log(t) + 0.1 > 0.01)])


def test_growth_onset_ignores_early_transient():
    t = np.logspace(-1, 4, 11)
    eps = np.array([0.05, 0.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6])
    assert E.entanglement_growth_fit(t, eps).onset == pytest.approx(t[3])
    assert np.isnan(E.entanglement_growth_fit(t, np.r_[eps[:-1], 0.0], window=(1, 1e3)).onset)


def test_growth_fit_warns_on_non_monotone_window():
    t = np.logspace(2, 4, 50)
    with pytest.warns(RuntimeWarning):
        E.entanglement_growth_fit(t, np.sin(t))
    with pytest.raises(ParameterError):
        E.entanglement_growth_fit(t, t, window=(1e5, 1e6))


def test_off_critical_entanglement_saturates():
    times, eps = E.entanglement_run(ModelParams(omega=0.8), t_end=1e4, per_decade=10)
    fit = E.entanglement_growth_fit(times, eps, window=(1e3, 1e4))
    assert abs(fit.slope) < 1e-6


def test_sweep_continuity_and_csv(tmp_path):
    grid = np.array([1.3, 1.32, 1.34])
    rec = E.hysteresis_sweep(0.25, grid, "backward", settle_time=20.0)
    np.testing.assert_array_equal(rec.omegas, grid[::-1])
    np.testing.assert_array_equal(rec.initial_states[1:], rec.final_states[:-1])
    np.testing.assert_allclose(rec.initial_states[0], E.DEFAULT_INITIAL_STATE.as_array())
    header, _ = (lambda p: (p.read_text().splitlines()[0], None))(rec.to_csv(tmp_path / "s.csv"))
    assert header == "omega,direction,delta_N,delta_R_bar,label"
    with pytest.raises(ParameterError):
        E.hysteresis_sweep(0.25, grid[::-1], "forward")
    with pytest.raises(ParameterError):
        E.hysteresis_sweep(0.25, grid, "sideways")


def test_phase_diagram_examples(tmp_path):
    diagram = E.phase_diagram([1.45], [0.2, 0.3], protocol="fresh", t_end=2000, dt=0.05)
    assert diagram.label_at(1.45, 0.3) == "TC2"
    assert diagram.label_at(1.45, 0.2) == "TC3"
    stationary = E.phase_diagram([0.5], [0.0], protocol="fresh", t_end=400)
    assert stationary.label_at(0.5, 0.0) == "Stationary"
    path = diagram.to_csv(tmp_path / "pd.csv")
    assert path.read_text().splitlines()[0] == "omega,u,label,eps_avg"
    np.testing.assert_allclose(diagram.boundary([1.45, 0.9]), [0.2625, 0.0])


def test_phase_diagram_records_failures():
    diagram = E.phase_diagram([1.0], [-0.1], protocol="fresh", t_end=10)
    assert diagram.cells[0].label == "error"
    assert "non-negative" in diagram.cells[0].error


def test_phase_diagram_with_entanglement_average():
    diagram = E.phase_diagram([1.2], [0.3], protocol="fresh", t_end=400, with_eps=True,
                              eps_window=(100.0, 400.0))
    assert np.isfinite(diagram.cells[0].eps_avg) and diagram.cells[0].eps_avg >= 0


def test_gap_scaling_tc2_frequency(tmp_path):
    scan = E.gap_scaling([10, 14, 18], ModelParams(omega=0.8, u=0.25))
    dominant = scan.dominant()
    re = [lam.real for _, lam in dominant]
    assert all(abs(b) < abs(a) for a, b in zip(re, re[1:]))
    assert abs(dominant[-1][1].imag + 1.0) < 0.15
    header, data = read_csv(scan.to_csv(tmp_path / "gap.csv"))
    assert header == ["n", "re_lambda", "im_lambda", "mode_index"]
    with pytest.raises(ParameterError):
        E.gap_scaling([20, 10], ModelParams(omega=0.8))


def test_gap_scaling_tc1_odd_harmonics():
    fundamental = 0.5249
    scan = E.gap_scaling([20, 30, 40], ModelParams(omega=1.45), k=24)
    leading = [scan.eigenvalues[n][0] for n in scan.n_values]
    assert all(abs(b.real) < abs(a.real) for a, b in zip(leading, leading[1:]))
    assert abs(-leading[-1].imag - fundamental) < 0.01
    top = scan.eigenvalues[40][:6]
    assert np.min(np.abs(-top.imag - 3 * fundamental)) < 0.01
    assert np.min(np.abs(-top.imag - 2 * fundamental)) > 0.3


def test_loop_area_gating_and_width():
    rec = E.SweepRecord(0.1, "forward", np.array([1.0, 1.1, 1.2]), np.array([0.1, 0.1, 0.0]),
                        np.zeros(3), ["TC2", "TC2", "TC3"], np.zeros((3, 4)), np.zeros((3, 4)), 1.0)
    assert rec.transition() == pytest.approx(1.15)
    assert rec.flagged == []


def _late_eps(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return E.entanglement_run(params, t_end=4e3, per_decade=20)[1][-1]


def test_entanglement_peaks_at_critical_drive():
    eps = {w: _late_eps(ModelParams(omega=w)) for w in (0.8, 0.9, 1.0, 1.1, 1.2)}
    assert max(eps, key=eps.get) == 1.0


def test_entanglement_larger_on_tc2_side():
    for omega, u_tc3, u_tc2 in ((1.2, 0.1, 0.2), (1.45, 0.2, 0.3)):
        assert _late_eps(ModelParams(omega=omega, u=u_tc2)) > _late_eps(
            ModelParams(omega=omega, u=u_tc3))

import numpy as np
import pytest

from oracles import complex_mf_rhs, complex_mf_trajectory

from bosedimer.errors import InconclusiveClassification, ParameterError, SingularCoordinatesError
from bosedimer.meanfield import (DEFAULT_INITIAL_STATE, MeanFieldState, Phase, PolarState,
                                 Trajectory, classify_phase, fixed_points, integrate_mf, mf_rhs,
                                 order_parameters, polar_rhs, stable_fixed_point, to_polar)
from bosedimer.params import ModelParams


def random_shell_state(rng):
    y = rng.normal(size=4)
    return MeanFieldState.from_array(2.0 * y / np.linalg.norm(y))


def test_origin_is_an_equilibrium():
    assert np.all(mf_rhs(MeanFieldState(0, 0, 0, 0), ModelParams(omega=1.0, u=0.3)) == 0)


def test_rhs_matches_complex_amplitude_form():
    rng = np.random.default_rng(0)
    params = ModelParams(omega=1.3, u=0.21, kappa=0.7)
    for _ in range(20):
        s = random_shell_state(rng)
        da, db = complex_mf_rhs(s.alpha, s.beta, params.omega, params.u, params.kappa)
        d = mf_rhs(s, params)
        np.testing.assert_allclose(d, np.sqrt(2) * np.array([da.real, da.imag, db.real, db.imag]),
                                   atol=1e-13)


def test_fixed_point_closed_form_values():
    fp = fixed_points(ModelParams(omega=0.8, u=0.0))
    assert fp[0].r_a ** 2 == pytest.approx(1.6)
    assert fp[0].r_b ** 2 == pytest.approx(0.4)
    assert fp[0].delta_phi == pytest.approx(np.pi / 2)
    fp = fixed_points(ModelParams(omega=0.8, u=0.25))
    assert fp[0].r_a ** 2 == pytest.approx(1.8246, abs=1e-4)
    assert fp[0].r_b ** 2 == pytest.approx(0.1754, abs=1e-4)
    assert fp[0].delta_phi == pytest.approx(np.pi / 4)
    assert fp.sigma_drift == pytest.approx(-2.0)
    assert len(fixed_points(ModelParams(omega=1.45, u=0.25))) == 0


@pytest.mark.parametrize("omega,u", [(0.8, 0.0), (0.8, 0.25), (1.2, 0.1), (1.45, 0.3), (0.3, 1.0)])
def test_fixed_points_annihilate_amplitude_flow(omega, u):
    params = ModelParams(omega=omega, u=u)
    for fp in fixed_points(params):
        d = polar_rhs(fp, params)
        assert np.max(np.abs(d[:3])) < 1e-12
        assert d[3] == pytest.approx(-8 * u, abs=1e-12)
        # in the lab frame every amplitude rotates at -4U
        s = fp.to_state()
        da, db = complex_mf_rhs(s.alpha, s.beta, omega, u, 1.0)
        assert abs(da + 4j * u * s.alpha) < 1e-12 and abs(db + 4j * u * s.beta) < 1e-12


def test_stationary_fixed_point_has_zero_derivative():
    state = PolarState(np.sqrt(1.6), np.sqrt(0.4), np.pi / 2).to_state()
    assert np.linalg.norm(mf_rhs(state, ModelParams(omega=0.8))) < 1e-12


def test_stable_branch_depletes_mode_a():
    fp = stable_fixed_point(ModelParams(omega=0.8))
    assert fp.r_a ** 2 == pytest.approx(0.4)
    assert stable_fixed_point(ModelParams(omega=1.45, u=0.25)) is None


def test_polar_rhs_is_pushforward_of_cartesian_rhs():
    rng = np.random.default_rng(1)
    params = ModelParams(omega=1.1, u=0.17, kappa=1.3)
    h = 1e-6
    for _ in range(20):
        s = random_shell_state(rng)
        y = s.as_array()
        d = mf_rhs(s, params)
        fwd = to_polar(y + h * d).as_array()
        bwd = to_polar(y - h * d).as_array()
        diff = fwd - bwd
        diff[2:] = np.mod(diff[2:] + np.pi, 2 * np.pi) - np.pi
        np.testing.assert_allclose(polar_rhs(to_polar(y), params), diff / (2 * h),
                                   rtol=1e-6, atol=1e-6)


def test_polar_rhs_singular():
    with pytest.raises(SingularCoordinatesError):
        polar_rhs(PolarState(0.0, np.sqrt(2), 0.0), ModelParams(omega=1.0))


def test_shell_derivative_vanishes():
    rng = np.random.default_rng(2)
    params = ModelParams(omega=1.7, u=0.4, kappa=0.9)
    for _ in range(20):
        s = random_shell_state(rng)
        assert abs(np.dot(s.as_array(), mf_rhs(s, params))) < 1e-13


def test_integration_matches_complex_oracle():
    params = ModelParams(omega=1.2, u=0.15)
    traj = integrate_mf(None, params, t_end=30, dt=0.5)
    alpha, beta = complex_mf_trajectory(DEFAULT_INITIAL_STATE.alpha, DEFAULT_INITIAL_STATE.beta,
                                        1.2, 0.15, 1.0, traj.times)
    np.testing.assert_allclose(traj.alpha, alpha, atol=1e-7)
    np.testing.assert_allclose(traj.beta, beta, atol=1e-7)


def test_integration_rejects_off_shell_state():
    with pytest.raises(ParameterError):
        integrate_mf(MeanFieldState(1.0, 0, 0, 0), ModelParams(omega=1.0))


def test_stationary_convergence_and_imbalance():
    traj = integrate_mf(None, ModelParams(omega=0.8), t_end=400)
    delta_n, _ = order_parameters(traj.after(0.5))
    assert delta_n == pytest.approx(0.6, abs=1e-8)


def test_tc2_has_distinct_radii_and_tc1_oscillates():
    traj = integrate_mf(None, ModelParams(omega=0.8, u=0.25), t_end=400).after(0.5)
    assert np.ptp(traj.r_a) < 1e-6
    assert abs(traj.r_a.mean() - traj.r_b.mean()) > 0.5
    slope = np.polyfit(traj.times, traj.total_phase(), 1)[0]
    assert slope == pytest.approx(-2.0, abs=1e-6)
    osc = integrate_mf(None, ModelParams(omega=1.45), t_end=400).after(0.5)
    assert np.ptp(osc.p_a) > 0.5


def test_order_parameters_symmetric_state():
    state = PolarState(1.0, 1.0, 0.3).to_state()
    traj = Trajectory([0.0, 1.0], [state.as_array()] * 2)
    assert order_parameters(traj) == (0.0, 0.0)
    with pytest.raises(ValueError):
        order_parameters(Trajectory(np.empty(0), np.empty((0, 4))))


@pytest.mark.parametrize("omega,u,expected", [
    (0.8, 0.0, Phase.STATIONARY), (0.5, 0.0, Phase.STATIONARY), (0.8, 0.25, Phase.TC2),
    (1.45, 0.25, Phase.TC3), (1.45, 0.2, Phase.TC3), (1.45, 0.3, Phase.TC2), (1.45, 0.0, Phase.TC1),
])
def test_classification(omega, u, expected):
    params = ModelParams(omega=omega, u=u)
    label = classify_phase(integrate_mf(None, params, t_end=2000, dt=0.05), params)
    assert label.label is expected
    if expected is Phase.TC2:
        assert label.frequencies[0] == pytest.approx(4 * u, rel=2e-3)
        assert label.delta_r_bar > 1e-3
    if expected is Phase.TC3:
        assert label.delta_r_bar < 1e-3


def test_classification_inconclusive_when_thresholds_straddle():
    # with eps_r = 0 a quasi-periodic orbit satisfies neither the TC2 nor the TC3 rule
    params = ModelParams(omega=1.45, u=0.25)
    traj = integrate_mf(None, params, t_end=2000, dt=0.05)
    with pytest.raises(InconclusiveClassification) as info:
        classify_phase(traj, params, eps_r=0.0)
    assert info.value.diagnostics.delta_r_bar > 0


def test_trajectory_csv(tmp_path):
    from bosedimer.io import read_csv
    traj = integrate_mf(None, ModelParams(omega=1.0), t_end=2, dt=0.5)
    header, data = read_csv(traj.to_csv(tmp_path / "t.csv"))
    assert header == ["t", "x_a", "p_a", "x_b", "p_b"]
    np.testing.assert_array_equal(data[:, 1:], traj.states)
    assert traj.metadata["default_initial_state"] is True

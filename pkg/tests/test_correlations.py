import numpy as np
import pytest

from oracles import (brute_force_discord, log_negativity_invariants, random_symplectic_local,
                     two_mode_squeezed)

from bosedimer.correlations import (CorrelationReport, gaussian_discord, invariants,
                                    logarithmic_negativity, mutual_information, standard_form,
                                    symplectic_eigenvalues, time_average)
from bosedimer.errors import EmptyWindowError


def test_two_mode_squeezed_values():
    sigma = two_mode_squeezed(1.0)
    assert symplectic_eigenvalues(sigma, partial_transpose=True)[0] == pytest.approx(np.exp(-2))
    assert logarithmic_negativity(sigma) == pytest.approx(2 / np.log(2))
    assert symplectic_eigenvalues(sigma) == pytest.approx((1.0, 1.0))


def test_thermal_times_vacuum():
    assert symplectic_eigenvalues(np.diag([3.0, 3.0, 1.0, 1.0])) == pytest.approx((1.0, 3.0))
    assert logarithmic_negativity(np.diag([3.0, 3.0, 1.0, 1.0])) == 0.0


def test_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.triu(np.ones((4, 4))))
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.eye(3))


def random_state(rng):
    """Random physical two-mode covariance: thermal state under a random symplectic."""
    from scipy.linalg import expm
    j = np.kron(np.eye(2), np.array([[0, 1], [-1, 0]]))
    h = rng.normal(size=(4, 4))
    s = expm(j @ (h + h.T) * 0.3)
    nus = 1 + rng.exponential(1.0, size=2)
    return s @ np.diag([nus[0], nus[0], nus[1], nus[1]]) @ s.T


def test_log_negativity_matches_invariant_formula():
    rng = np.random.default_rng(5)
    for _ in range(30):
        sigma = random_state(rng)
        assert logarithmic_negativity(sigma) == pytest.approx(log_negativity_invariants(sigma),
                                                              abs=1e-9)


def test_standard_form_preserves_invariants():
    rng = np.random.default_rng(6)
    for _ in range(10):
        sigma = random_state(rng)
        sf = standard_form(sigma)
        np.testing.assert_allclose(invariants(sf), invariants(sigma), rtol=1e-8, atol=1e-8)
        assert sf[0, 0] == pytest.approx(sf[1, 1])
        assert sf[2, 2] == pytest.approx(sf[3, 3])
        off = sf.copy()
        for i, j in [(0, 0), (1, 1), (2, 2), (3, 3), (0, 2), (2, 0), (1, 3), (3, 1)]:
            off[i, j] = 0
        assert np.max(np.abs(off)) < 1e-8


def test_discord_matches_brute_force():
    rng = np.random.default_rng(7)
    states = [two_mode_squeezed(0.5), np.diag([3.0, 3.0, 1.0, 1.0])]
    states += [random_state(rng) for _ in range(6)]
    for sigma in states:
        d, j = gaussian_discord(sigma)
        d_ref, j_ref = brute_force_discord(sigma)
        assert d == pytest.approx(d_ref, abs=1e-6)
        assert j == pytest.approx(j_ref, abs=1e-6)


def test_pure_state_discord_is_half_the_mutual_information():
    sigma = two_mode_squeezed(1.0)
    d, j = gaussian_discord(sigma)
    assert d == pytest.approx(0.5 * mutual_information(sigma))
    assert d + j == pytest.approx(mutual_information(sigma))
    report = CorrelationReport.from_sigma(sigma)
    assert report.log_negativity == pytest.approx(2 / np.log(2))


def test_local_symplectic_invariance():
    rng = np.random.default_rng(8)
    sigma = random_state(rng)
    s = random_symplectic_local(rng)
    assert logarithmic_negativity(s @ sigma @ s.T) == pytest.approx(logarithmic_negativity(sigma),
                                                                    abs=1e-10)
    assert gaussian_discord(s @ sigma @ s.T)[0] == pytest.approx(gaussian_discord(sigma)[0],
                                                                 abs=1e-9)


def test_time_average_of_log():
    t = np.linspace(1, 100, 200001)
    avg = time_average(t, np.log(t), (1, 100))
    exact = (100 * np.log(100) - 100 + 1) / 99
    # uniform samples: the arithmetic mean is a Riemann sum of the integral
    assert avg == pytest.approx(exact, abs=1e-4)


def test_time_average_window_errors():
    t = np.arange(10.0)
    with pytest.raises(EmptyWindowError):
        time_average(t, t, (20, 30))
    with pytest.raises(EmptyWindowError):
        time_average(t, t, (3.2, 3.8))
    with pytest.raises(EmptyWindowError):
        time_average([], [], (0, 1))

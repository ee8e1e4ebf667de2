"""Gaussian fluctuations around the mean field.

The covariance matrix of the quadrature fluctuations obeys the Lyapunov
equation ``dS/dt = S (A+Q)^T + (A+Q) S + N`` where ``A`` comes from the
Hamiltonian, ``Q`` from the dissipators and ``N`` is the noise matrix.  The
matrices depend on the instantaneous mean-field state, so the covariance is
integrated jointly with the mean field.

Fluctuation operators carry canonical commutators ``[F^x, F^p] = 2i``; the
vacuum covariance is the identity.  In this normalisation the noise entering
the Lyapunov equation is ``Z + Z^T`` (twice the symmetric part of the
dissipator matrix ``Z`` returned by :func:`build_matrices`), which keeps the
steady state at ``n_th = 0`` pure.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import io
from .errors import NaNError, ParameterError, StiffnessError
from .meanfield import (DEFAULT_INITIAL_STATE, SHELL, MeanFieldState, Trajectory, _rhs,
                        shell_value)

SYMPLECTIC_FORM = np.array([[0.0, 1.0, 0.0, 0.0],
                            [-1.0, 0.0, 0.0, 0.0],
                            [0.0, 0.0, 0.0, 1.0],
                            [0.0, 0.0, -1.0, 0.0]])

# Converts the printed dissipator matrix to the identity-vacuum normalisation.
NOISE_SCALE = 2.0

_UPPER = np.triu_indices(4)


@dataclass(frozen=True)
class FluctuationMatrices:
    a_mat: np.ndarray
    q_mat: np.ndarray
    z_mat: np.ndarray

    @property
    def drift(self):
        return self.a_mat + self.q_mat

    @property
    def noise(self):
        """Symmetric noise term of the Lyapunov equation (identity-vacuum units)."""
        return NOISE_SCALE * 0.5 * (self.z_mat + self.z_mat.T).real


def build_matrices(state, params):
    """Drift ``A``, dissipative ``Q`` and complex noise ``Z`` at a mean-field state."""
    y = state.as_array() if isinstance(state, MeanFieldState) else np.asarray(state, float)
    xa, pa, xb, pb = y
    om, u, k = params.omega, params.u, params.kappa
    ea = xa * xa + pa * pa
    eb = xb * xb + pb * pb
    a_mat = np.array([
        [2 * u * xa * pa, u * (ea + 2 * pa * pa), 0.0, om / 2],
        [-u * (ea + 2 * xa * xa), -2 * u * xa * pa, -om / 2, 0.0],
        [0.0, om / 2, 2 * u * xb * pb, u * (eb + 2 * pb * pb)],
        [-om / 2, 0.0, -u * (eb + 2 * xb * xb), -2 * u * xb * pb],
    ])
    q_mat = k / 4 * np.array([
        [-eb, 0.0, -2 * xa * xb, -2 * xa * pb],
        [0.0, -eb, -2 * pa * xb, -2 * pa * pb],
        [2 * xa * xb, 2 * pa * xb, ea, 0.0],
        [2 * xa * pb, 2 * pa * pb, 0.0, ea],
    ])
    c = pa * pb - xa * xb
    s = xa * pb + xb * pa
    z_mat = k * (2 * params.n_th + 1) / 4 * np.array([
        [eb, 1j * eb, c - 1j * s, -1j * c - s],
        [-1j * eb, eb, 1j * c - s, -c + 1j * s],
        [c + 1j * s, -1j * c - s, ea, -1j * ea],
        [1j * c - s, -c - 1j * s, 1j * ea, ea],
    ])
    return FluctuationMatrices(a_mat, q_mat, z_mat)


def lyapunov_rhs(sigma, mats):
    m = mats.drift
    return sigma @ m.T + m @ sigma + mats.noise


def symmetrize(sigma):
    return 0.5 * (sigma + np.swapaxes(sigma, -1, -2))


def physicality_margin(sigma):
    """Smallest eigenvalue of ``sigma + i J`` (non-negative for a physical state)."""
    return float(np.linalg.eigvalsh(sigma + 1j * SYMPLECTIC_FORM).min())


@dataclass(frozen=True)
class CovarianceSeries:
    times: np.ndarray
    sigmas: np.ndarray
    warnings: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def upper_triangle(self):
        """Columns ``s11, s12, ..., s44`` of the upper triangle."""
        return self.sigmas[:, _UPPER[0], _UPPER[1]]

    def to_csv(self, path):
        names = [f"s{i + 1}{j + 1}" for i, j in zip(*_UPPER)]
        return io.write_columns(path, ["t", *names], [self.times, *self.upper_triangle().T])


def integrate_lyapunov(state0=None, sigma0=None, params=None, t_end=100.0, tol=1e-10,
                       dt=None, times=None, physical_tol=-1e-9, shell_tol=1e-9):
    """Jointly integrate the mean field and the covariance matrix.

    The output is sampled on a uniform grid of spacing ``dt`` unless explicit
    ``times`` are given (for instance a logarithmic grid for long runs).
    Physicality violations beyond ``physical_tol`` are recorded as warnings in
    the returned series rather than aborting the run.
    """
    if params is None:
        raise ParameterError("params are required")
    state0 = DEFAULT_INITIAL_STATE if state0 is None else state0
    y0 = state0.as_array() if isinstance(state0, MeanFieldState) else np.asarray(state0, float)
    if abs(shell_value(y0) - SHELL) > shell_tol:
        raise ParameterError("initial mean-field state is off the shell")
    sigma0 = np.eye(4) if sigma0 is None else np.asarray(sigma0, dtype=float)
    if not np.allclose(sigma0, sigma0.T, atol=1e-12):
        raise ParameterError("initial covariance is not symmetric")
    if physicality_margin(sigma0) < physical_tol:
        raise ParameterError("initial covariance violates the uncertainty relation")

    if times is None:
        dt = 0.1 if dt is None else dt
        n = int(round(t_end / dt))
        times = np.linspace(0.0, n * dt, n + 1)
    times = np.asarray(times, dtype=float)
    om, u, k = params.omega, params.u, params.kappa

    def rhs(t, z):
        y = z[:4]
        sigma = symmetrize(z[4:].reshape(4, 4))
        mats = build_matrices(y, params)
        return np.concatenate([_rhs(y, om, u, k), lyapunov_rhs(sigma, mats).ravel()])

    z0 = np.concatenate([y0, sigma0.ravel()])
    sol = solve_ivp(rhs, (0.0, times[-1]), z0, method="DOP853", t_eval=times,
                    rtol=tol, atol=tol * 1e-2)
    if not np.all(np.isfinite(sol.y)):
        raise NaNError("non-finite value in covariance integration", {"t_last": float(sol.t[-1])})
    if sol.status != 0:
        raise StiffnessError(f"integration failed: {sol.message}", {"t_last": float(sol.t[-1])})

    states = sol.y[:4].T
    sigmas = symmetrize(sol.y[4:].T.reshape(-1, 4, 4))
    notes = []
    for t, sigma in zip(sol.t, sigmas):
        margin = physicality_margin(sigma)
        if margin < physical_tol:
            notes.append({"t": float(t), "margin": margin})
    if notes:
        warnings.warn(f"covariance unphysical at {len(notes)} sampled times", RuntimeWarning)
    meta = {"params": params.to_dict(), "tol": tol, "integrator": "DOP853",
            "noise_scale": NOISE_SCALE}
    traj = Trajectory(sol.t, states, dict(meta))
    return traj, CovarianceSeries(sol.t, sigmas, notes, meta)


def log_time_grid(t_end, t_min=0.1, per_decade=50):
    """Zero followed by logarithmically spaced sample times up to ``t_end``."""
    decades = np.log10(t_end / t_min)
    n = int(np.ceil(decades * per_decade)) + 1
    return np.concatenate([[0.0], np.logspace(np.log10(t_min), np.log10(t_end), n)])

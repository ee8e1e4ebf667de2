"""Thermodynamic-limit mean-field dynamics of the dissipative dimer.

State vectors are ordered ``(x_a, p_a, x_b, p_b)`` with the complex
amplitudes ``alpha = (x_a + i p_a)/sqrt(2)`` and ``beta = (x_b + i p_b)/sqrt(2)``.
The flow conserves ``|alpha|^2 + |beta|^2``; physical trajectories live on
the shell where this equals 2.
"""
import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import io
from .errors import (InconclusiveClassification, NaNError, ParameterError,
                     SingularCoordinatesError, StiffnessError)
from .fourier import fourier_peaks, harmonically_related, harmonic_orders
from .params import ModelParams

SQRT2 = np.sqrt(2.0)
SHELL = 2.0


@dataclass(frozen=True)
class MeanFieldState:
    x_a: float
    p_a: float
    x_b: float
    p_b: float

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(*map(float, y))

    @classmethod
    def from_complex(cls, alpha, beta):
        return cls(SQRT2 * alpha.real, SQRT2 * alpha.imag, SQRT2 * beta.real, SQRT2 * beta.imag)

    def as_array(self):
        return np.array([self.x_a, self.p_a, self.x_b, self.p_b])

    @property
    def alpha(self):
        return complex(self.x_a, self.p_a) / SQRT2

    @property
    def beta(self):
        return complex(self.x_b, self.p_b) / SQRT2

    def shell(self):
        return shell_value(self.as_array())

    def to_polar(self, eps_r=0.0):
        return to_polar(self.as_array(), eps_r=eps_r)


# Generic, non-symmetric point on the shell; the symmetric manifold R_a = R_b is avoided.
DEFAULT_INITIAL_STATE = MeanFieldState.from_complex(
    np.sqrt(1.2) * np.exp(0.3j), np.sqrt(0.8) * np.exp(-0.2j))


@dataclass(frozen=True)
class PolarState:
    """Amplitudes, relative phase ``phi_b - phi_a`` and total phase ``phi_a + phi_b``."""

    r_a: float
    r_b: float
    delta_phi: float
    sigma_phi: float = 0.0

    def to_state(self):
        phi_a = 0.5 * (self.sigma_phi - self.delta_phi)
        phi_b = 0.5 * (self.sigma_phi + self.delta_phi)
        return MeanFieldState.from_complex(self.r_a * np.exp(1j * phi_a),
                                           self.r_b * np.exp(1j * phi_b))

    def as_array(self):
        return np.array([self.r_a, self.r_b, self.delta_phi, self.sigma_phi])


def _wrap(angle):
    """Map to (-pi, pi]."""
    wrapped = np.mod(angle + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def to_polar(y, eps_r=0.0):
    y = np.asarray(y, dtype=float)
    alpha = (y[0] + 1j * y[1]) / SQRT2
    beta = (y[2] + 1j * y[3]) / SQRT2
    r_a, r_b = abs(alpha), abs(beta)
    if min(r_a, r_b) < eps_r:
        raise SingularCoordinatesError(f"amplitude below {eps_r}: R_a={r_a}, R_b={r_b}")
    phi_a, phi_b = np.angle(alpha), np.angle(beta)
    return PolarState(float(r_a), float(r_b), float(_wrap(phi_b - phi_a)), float(phi_a + phi_b))


def shell_value(y):
    y = np.asarray(y, dtype=float)
    return 0.5 * np.sum(y ** 2, axis=0)


def _rhs(y, omega, u, kappa):
    xa, pa, xb, pb = y
    ea = xa * xa + pa * pa
    eb = xb * xb + pb * pb
    return np.array([
        omega * pb / 2 - kappa * xa * eb / 4 + u * pa * ea,
        -omega * xb / 2 - kappa * pa * eb / 4 - u * xa * ea,
        omega * pa / 2 + kappa * xb * ea / 4 + u * pb * eb,
        -omega * xa / 2 + kappa * pb * ea / 4 - u * xb * eb,
    ])


def mf_rhs(state, params):
    """Time derivative of ``(x_a, p_a, x_b, p_b)``."""
    y = state.as_array() if isinstance(state, MeanFieldState) else np.asarray(state, float)
    return _rhs(y, params.omega, params.u, params.kappa)


def polar_rhs(state, params, eps_r=1e-9):
    """Time derivative of ``(R_a, R_b, delta_phi, sigma_phi)``."""
    r_a, r_b, dphi = state.r_a, state.r_b, state.delta_phi
    if r_a < eps_r or r_b < eps_r:
        raise SingularCoordinatesError(f"amplitude below {eps_r}: R_a={r_a}, R_b={r_b}")
    om, u, k = params.omega, params.u, params.kappa
    coupling = om * np.cos(dphi) / (2 * r_a * r_b)
    return np.array([
        om / 2 * r_b * np.sin(dphi) - k / 2 * r_a * r_b ** 2,
        -om / 2 * r_a * np.sin(dphi) + k / 2 * r_b * r_a ** 2,
        (coupling - 2 * u) * (r_b ** 2 - r_a ** 2),
        -(coupling + 2 * u) * (r_b ** 2 + r_a ** 2),
    ])


@dataclass(frozen=True)
class FixedPoints:
    """Closed-form fixed points of ``(R_a, R_b, delta_phi)``.

    ``points`` holds the ``+`` branch (larger ``R_a``) first.  Along either
    point the total phase drifts at ``sigma_drift = -8 u``.
    """

    points: tuple
    sigma_drift: float

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def fixed_points(params):
    om, u, k = params.omega, params.u, params.kappa
    scale = 16 * u * u + k * k
    if om * om > scale:
        return FixedPoints((), -8.0 * u)
    root = np.sqrt(max(0.0, 1.0 - om * om / scale))
    dphi = float(np.arctan2(k, 4 * u))
    points = tuple(PolarState(float(np.sqrt(1 + s * root)), float(np.sqrt(1 - s * root)), dphi)
                   for s in (1.0, -1.0))
    if root == 0.0:
        points = points[:1]
    return FixedPoints(points, -8.0 * u)


def stable_fixed_point(params):
    """The attracting branch, which has the depleted mode ``a`` (smaller ``R_a``)."""
    fps = fixed_points(params)
    if not len(fps):
        return None
    return min(fps, key=lambda p: p.r_a)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[1] != 4:
            raise ValueError("states must have shape (n, 4)")
        if len(times) != len(states):
            raise ValueError("times and states differ in length")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.times)

    x_a = property(lambda self: self.states[:, 0])
    p_a = property(lambda self: self.states[:, 1])
    x_b = property(lambda self: self.states[:, 2])
    p_b = property(lambda self: self.states[:, 3])

    @property
    def alpha(self):
        return (self.states[:, 0] + 1j * self.states[:, 1]) / SQRT2

    @property
    def beta(self):
        return (self.states[:, 2] + 1j * self.states[:, 3]) / SQRT2

    @property
    def r_a(self):
        return np.abs(self.alpha)

    @property
    def r_b(self):
        return np.abs(self.beta)

    @property
    def dt(self):
        steps = np.diff(self.times)
        return float(steps.mean()) if len(steps) else float("nan")

    def shell(self):
        return shell_value(self.states.T)

    def total_phase(self):
        """Unwrapped ``phi_a + phi_b``; its slope is ``-8u`` on a limit cycle."""
        return np.unwrap(np.angle(self.alpha)) + np.unwrap(np.angle(self.beta))

    def final_state(self):
        return MeanFieldState.from_array(self.states[-1])

    def after(self, fraction):
        """Drop the leading ``fraction`` of samples (the transient)."""
        start = int(len(self) * fraction)
        return Trajectory(self.times[start:], self.states[start:], dict(self.metadata))

    def to_csv(self, path):
        return io.write_columns(path, ["t", "x_a", "p_a", "x_b", "p_b"],
                                [self.times, *self.states.T])


def _check_params(params):
    if not isinstance(params, ModelParams):
        raise ParameterError("expected ModelParams")


RTOL_FACTOR = 1e-2


def integrate_mf(state0=None, params=None, t_end=500.0, tol=1e-10, dt=0.1, shell_tol=1e-9):
    """Integrate the mean-field flow with an adaptive 8(5,3) Runge-Kutta scheme.

    The trajectory is sampled every ``dt`` from the dense output.  Raises
    :class:`StiffnessError` when the step size underflows and :class:`NaNError`
    on non-finite values.
    """
    _check_params(params)
    default = state0 is None
    state0 = DEFAULT_INITIAL_STATE if default else state0
    y0 = state0.as_array() if isinstance(state0, MeanFieldState) else np.asarray(state0, float)
    if abs(shell_value(y0) - SHELL) > shell_tol:
        raise ParameterError(f"initial state is off the shell: {shell_value(y0)} != 2")
    if t_end <= 0:
        raise ParameterError("t_end must be positive")

    om, u, k = params.omega, params.u, params.kappa

    def rhs(t, y):
        return _rhs(y, om, u, k)

    n = int(round(t_end / dt))
    t_eval = np.linspace(0.0, n * dt, n + 1)
    # local error control runs tighter than ``tol`` so the accumulated shell drift
    # stays below 10*tol*t_end even for fast nonlinear rotation
    rtol = max(tol * RTOL_FACTOR, 1e-13)
    sol = solve_ivp(rhs, (0.0, t_eval[-1]), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=rtol * 1e-2)
    if not np.all(np.isfinite(sol.y)):
        raise NaNError("non-finite state during mean-field integration",
                       {"params": params.to_dict(), "t_last": float(sol.t[-1])})
    if sol.status != 0:
        raise StiffnessError(f"integration failed: {sol.message}",
                             {"params": params.to_dict(), "t_last": float(sol.t[-1])})
    states = sol.y.T
    drift = float(np.max(np.abs(shell_value(sol.y) - SHELL)))
    metadata = {
        "params": params.to_dict(),
        "integrator": "DOP853",
        "tol": tol,
        "dt": dt,
        "t_end": float(t_eval[-1]),
        "nfev": int(sol.nfev),
        "max_shell_drift": drift,
        "default_initial_state": default,
        "initial_state": y0.tolist(),
    }
    return Trajectory(sol.t, states, metadata)


def order_parameters(traj):
    """Return ``(delta_n, delta_r_bar)`` averaged over the given trajectory.

    ``delta_n = |<R_a^2 - R_b^2>| / 2`` and
    ``delta_r_bar = |<R_a> - <R_b>| / sqrt(2)``.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    r_a, r_b = traj.r_a, traj.r_b
    delta_n = abs(np.mean(r_a ** 2 - r_b ** 2)) / 2.0
    delta_r = abs(np.mean(r_a) - np.mean(r_b)) / SQRT2
    return float(delta_n), float(delta_r)


class Phase(enum.Enum):
    STATIONARY = "Stationary"
    TC1 = "TC1"
    TC2 = "TC2"
    TC3 = "TC3"


@dataclass
class PhaseLabel:
    label: Phase
    frequencies: np.ndarray
    powers: np.ndarray
    delta_n: float
    delta_r_bar: float
    derivative_norm: float
    notes: str = ""

    def to_dict(self):
        return {
            "label": self.label.value,
            "frequencies": np.asarray(self.frequencies).tolist(),
            "relative_powers": (np.asarray(self.powers) / self.powers[0]).tolist()
            if len(self.powers) else [],
            "delta_N": self.delta_n,
            "delta_R_bar": self.delta_r_bar,
            "derivative_norm": self.derivative_norm,
            "notes": self.notes,
        }


def classify_phase(traj, params, transient=0.5, eps_fp=1e-8, eps_r=1e-3,
                   single_peak_ratio=1e-2, even_ratio=1e-3, max_denominator=8,
                   ratio_tol=1e-3, peak_floor=1e-4):
    """Label the asymptotic phase of a mean-field trajectory.

    The leading ``transient`` fraction is discarded.  Decision rules:

    * Stationary: the late-time derivative norm stays below ``eps_fp``.
    * TC2: ``u > 0``, ``delta_r_bar > eps_r`` and one dominant peak in the ``p_a`` spectrum.
    * TC1: ``u == 0``, periodic, every even harmonic below ``even_ratio``.
    * TC3: ``u > 0``, ``delta_r_bar < eps_r`` and two peaks whose frequency ratio is not
      within ``ratio_tol`` of any p/q with ``q <= max_denominator``.

    Anything else raises :class:`InconclusiveClassification`; extending the
    trajectory usually resolves it.
    """
    late = traj.after(transient)
    if len(late) < 16:
        raise ValueError("trajectory too short to classify")
    deriv = _rhs(late.states.T, params.omega, params.u, params.kappa)
    deriv_norm = float(np.max(np.linalg.norm(deriv, axis=0)))
    delta_n, delta_r = order_parameters(late)
    if deriv_norm < eps_fp:
        return PhaseLabel(Phase.STATIONARY, np.empty(0), np.empty(0), delta_n, delta_r, deriv_norm)

    peaks = fourier_peaks(late.p_a, late.dt, transient_fraction=0.0, floor=peak_floor)
    rel = peaks.relative_powers

    def result(label, notes=""):
        return PhaseLabel(label, peaks.frequencies, peaks.powers, delta_n, delta_r,
                          deriv_norm, notes)

    single = len(peaks) == 1 or (len(peaks) > 1 and rel[1] < single_peak_ratio)
    # TC2 oscillates at 4U and TC3 needs the interaction too; at U = 0 only
    # the stationary and TC1 phases exist.
    interacting = params.u > 0.0
    if interacting and delta_r > eps_r and single:
        return result(Phase.TC2)

    if delta_r < eps_r and len(peaks):
        fundamental = _fundamental(peaks)
        orders = harmonic_orders(peaks, fundamental, tol=ratio_tol * 10)
        if all(o is not None for o in orders):
            fund_power = peaks.power_near(fundamental)
            even = [p for p, o in zip(peaks.powers, orders) if o % 2 == 0]
            odd_only = fund_power > 0 and all(p < even_ratio * fund_power for p in even)
            if params.u == 0.0 and odd_only:
                return result(Phase.TC1, f"fundamental {fundamental:.6g}")
        elif interacting and _has_incommensurate_pair(peaks.frequencies, max_denominator, ratio_tol):
            return result(Phase.TC3)

    raise InconclusiveClassification(
        f"could not classify phase (delta_r_bar={delta_r:.3g}, peaks={len(peaks)}, "
        f"derivative norm={deriv_norm:.3g})", result(None))


def _fundamental(peaks):
    """Lowest significant frequency that divides the dominant one."""
    dominant = peaks.frequencies[0]
    candidates = sorted(f for f, r in zip(peaks.frequencies, peaks.relative_powers) if r > 1e-3)
    for f in candidates:
        k = dominant / f
        if abs(k - round(k)) < 1e-2:
            return f
    return dominant


def _has_incommensurate_pair(freqs, max_denominator, tol):
    freqs = list(freqs)
    for i in range(len(freqs)):
        for j in range(i + 1, len(freqs)):
            if not harmonically_related(freqs[i], freqs[j], max_denominator, tol):
                return True
    return False


def tc2_frequency(params):
    """Angular frequency of the single-harmonic limit cycle, ``4u``."""
    return 4.0 * params.u


def stationary_imbalance(omega, kappa=1.0):
    """Closed-form ``delta_n = sqrt(1 - (omega/kappa)^2)`` below the transition at ``u = 0``."""
    ratio = omega / kappa
    return float(np.sqrt(1.0 - ratio * ratio)) if ratio < 1 else 0.0

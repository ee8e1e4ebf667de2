"""Computational experiments built on the mean-field, fluctuation and block solvers."""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import io
from .correlations import correlation_series, time_average
from .errors import (BoseDimerError, InconclusiveClassification, NumericalError, ParameterError)
from .fluctuations import integrate_lyapunov, log_time_grid
from .fourier import FourierPeaks, fourier_peaks  # noqa: F401  (re-exported)
from .liouvillian import block_spectrum, build_block
from .meanfield import (DEFAULT_INITIAL_STATE, MeanFieldState, Phase, _rhs, classify_phase,
                        integrate_mf, order_parameters, stable_fixed_point)
from .params import ModelParams, critical_interaction

INCONCLUSIVE = "inconclusive"

# Chained runs hand over the exact final state; integration error lets the
# shell drift by ~1e-9 per step, so the start-of-run check is loosened.
CHAIN_SHELL_TOL = 1e-6

# Looser than the classifier default: a 100/kappa window leaves residual
# quasi-periodic modulation of order 1e-2 in delta_R_bar.
SWEEP_EPS_R = 2e-2


def _label_name(label):
    return label.value if isinstance(label, Phase) else str(label)


def classify_or_flag(traj, params, **kwargs):
    """Phase name, or ``"inconclusive"`` when no decision rule applies."""
    try:
        return _label_name(classify_phase(traj, params, **kwargs).label)
    except InconclusiveClassification:
        return INCONCLUSIVE


@dataclass
class SweepRecord:
    u: float
    direction: str
    omegas: np.ndarray
    delta_n: np.ndarray
    delta_r_bar: np.ndarray
    labels: list
    initial_states: np.ndarray
    final_states: np.ndarray
    settle_time: float
    metadata: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return [w for w, lab in zip(self.omegas, self.labels) if lab == INCONCLUSIVE]

    def rows(self):
        return [(w, self.direction, dn, dr, lab) for w, dn, dr, lab in
                zip(self.omegas, self.delta_n, self.delta_r_bar, self.labels)]

    def to_csv(self, path):
        return io.write_csv(path, ["omega", "direction", "delta_N", "delta_R_bar", "label"],
                            self.rows())

    def transition(self, label=Phase.TC2.value):
        """First grid value at which the label stops (forward) or starts being ``label``."""
        inside = np.array([lab == label for lab in self.labels])
        changes = np.nonzero(inside[1:] != inside[:-1])[0]
        if not len(changes):
            return None
        k = changes[0]
        return 0.5 * (self.omegas[k] + self.omegas[k + 1])


def hysteresis_sweep(u_fixed, omega_grid, direction="forward", settle_time=200.0,
                     transient=0.5, kappa=1.0, n_th=0.0, state0=None, dt=0.1, tol=1e-10,
                     eps_r=SWEEP_EPS_R):
    """Adiabatic sweep of ``Omega`` at fixed ``U`` with chained mean-field evolutions.

    ``omega_grid`` is given in ascending order; a backward sweep walks it in
    reverse.  Every step starts from the previous step's final state; the
    first step starts from ``state0`` (the default initial state unless
    given).  Order parameters are averaged over the part of each step left
    after discarding ``transient``.
    """
    grid = np.asarray(omega_grid, dtype=float)
    if len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ParameterError("omega_grid must be strictly increasing")
    if direction not in ("forward", "backward"):
        raise ParameterError("direction must be 'forward' or 'backward'")
    if direction == "backward":
        grid = grid[::-1]
    state = DEFAULT_INITIAL_STATE if state0 is None else state0

    dn, dr, labels, starts, ends = [], [], [], [], []
    for omega in grid:
        params = ModelParams(omega=omega, u=u_fixed, kappa=kappa, n_th=n_th)
        traj = integrate_mf(state, params, t_end=settle_time, dt=dt, tol=tol,
                            shell_tol=CHAIN_SHELL_TOL)
        late = traj.after(transient)
        delta_n, delta_r = order_parameters(late)
        dn.append(delta_n)
        dr.append(delta_r)
        labels.append(classify_or_flag(traj, params, transient=transient, eps_r=eps_r))
        starts.append(MeanFieldState.from_array(traj.states[0]).as_array())
        ends.append(traj.states[-1].copy())
        state = MeanFieldState.from_array(traj.states[-1])
    meta = {"transient": transient, "dt": dt, "tol": tol, "eps_r": eps_r,
            "kappa": kappa, "n_th": n_th, "default_initial_state": state0 is None}
    return SweepRecord(u_fixed, direction, grid, np.array(dn), np.array(dr), labels,
                       np.array(starts), np.array(ends), settle_time, meta)


@dataclass
class HysteresisLoop:
    area: float
    raw_area: float
    forward: SweepRecord
    backward: SweepRecord
    bistable_omegas: np.ndarray

    @property
    def width(self):
        if not len(self.bistable_omegas):
            return 0.0
        return float(self.bistable_omegas.max() - self.bistable_omegas.min()) + self.step

    @property
    def step(self):
        return float(np.abs(np.diff(self.forward.omegas)).min())


def hysteresis_loop(u_fixed, omega_grid, settle_time=200.0, label=Phase.TC2.value, **kwargs):
    """Forward and backward sweeps plus the enclosed ``delta_N`` area.

    ``area`` integrates ``|dN_forward - dN_backward|`` only over grid points
    where the two branches sit in different phases (``label`` versus
    anything else), which removes the quasi-periodic noise that finite
    averaging windows leave in ``delta_N``.  ``raw_area`` integrates the
    difference everywhere.
    """
    fwd = hysteresis_sweep(u_fixed, omega_grid, "forward", settle_time, **kwargs)
    bwd = hysteresis_sweep(u_fixed, omega_grid, "backward", settle_time, **kwargs)
    omegas = fwd.omegas
    dn_b = bwd.delta_n[::-1]
    lab_b = bwd.labels[::-1]
    diff = np.abs(fwd.delta_n - dn_b)
    split = np.array([(a == label) != (b == label) for a, b in zip(fwd.labels, lab_b)])
    weights = np.gradient(omegas)
    return HysteresisLoop(float(np.sum(diff * weights * split)), float(np.sum(diff * weights)),
                          fwd, bwd, omegas[split])


@dataclass
class PhaseCell:
    omega: float
    u: float
    label: str
    eps_avg: float
    delta_n: float
    delta_r_bar: float
    error: str = ""


@dataclass
class PhaseDiagram:
    cells: list
    protocol: str

    def to_csv(self, path):
        rows = [(c.omega, c.u, c.label, c.eps_avg) for c in self.cells]
        return io.write_csv(path, ["omega", "u", "label", "eps_avg"], rows)

    def label_at(self, omega, u):
        for c in self.cells:
            if np.isclose(c.omega, omega) and np.isclose(c.u, u):
                return c.label
        raise KeyError((omega, u))

    def boundary(self, omegas):
        """Closed-form ``U_c(Omega)`` overlay (NaN where ``Omega <= kappa``)."""
        out = []
        for w in np.atleast_1d(omegas):
            try:
                out.append(critical_interaction(w))
            except ParameterError:
                out.append(np.nan)
        return np.array(out)


def _run_cell(omega, u, state, t_end, dt, kappa, n_th, with_eps, eps_window, tol,
              max_extensions):
    params = ModelParams(omega=omega, u=u, kappa=kappa, n_th=n_th)
    for _ in range(max_extensions + 1):
        traj = integrate_mf(state, params, t_end=t_end, dt=dt, tol=tol,
                            shell_tol=CHAIN_SHELL_TOL)
        label = classify_or_flag(traj, params)
        state = traj.final_state()
        if label != INCONCLUSIVE:
            break
    delta_n, delta_r = order_parameters(traj.after(0.5))
    eps = np.nan
    if with_eps:
        times = log_time_grid(eps_window[1], per_decade=20)
        _, cov = integrate_lyapunov(None, None, params, times=times, tol=1e-9)
        eps = time_average(cov.times, correlation_series(cov, with_discord=False).log_negativity,
                           eps_window)
    return PhaseCell(omega, u, label, eps, delta_n, delta_r), state


def _branch_seed(omega, u, kappa):
    """State on the attracting fixed point of the amplitude flow, if it exists."""
    fp = stable_fixed_point(ModelParams(omega=omega, u=u, kappa=kappa))
    return DEFAULT_INITIAL_STATE if fp is None else fp.to_state()


def phase_diagram(omega_grid, u_grid, protocol="continuation", t_end=4000.0, dt=0.1,
                  kappa=1.0, n_th=0.0, with_eps=False, eps_window=(1000.0, 4000.0), tol=1e-10,
                  max_extensions=2):
    """Classify every ``(Omega, U)`` cell and optionally average the negativity.

    ``protocol="fresh"`` starts every cell from the default initial state.
    ``protocol="continuation"`` walks each ``Omega`` column from the largest
    ``U`` downwards, seeding the first cell on the attracting fixed point of
    the amplitude flow (when it exists) and handing each cell's final state
    to the next.  This follows the TC2 branch down to the point where it
    ceases to exist; inside the bistable window the default initial state can
    select TC3 instead.  Inconclusive cells are extended by re-running from
    their final state up to ``max_extensions`` times.  The negativity is
    always computed from the default initial state.  Per-cell failures are
    recorded in ``PhaseCell.error`` and the scan continues.
    """
    if protocol not in ("fresh", "continuation"):
        raise ParameterError("protocol must be 'fresh' or 'continuation'")
    cells = []
    u_sorted = sorted(np.asarray(u_grid, float), reverse=True)
    for omega in np.asarray(omega_grid, float):
        state = _branch_seed(omega, u_sorted[0], kappa) if protocol == "continuation" else None
        for u in u_sorted:
            start = state if protocol == "continuation" else DEFAULT_INITIAL_STATE
            try:
                cell, final = _run_cell(omega, u, start, t_end, dt, kappa, n_th, with_eps,
                                        eps_window, tol, max_extensions)
                state = final
            except BoseDimerError as exc:
                cell = PhaseCell(omega, u, "error", np.nan, np.nan, np.nan, str(exc))
                state = DEFAULT_INITIAL_STATE
            cells.append(cell)
    return PhaseDiagram(cells, protocol)


def phase_boundary_scan(omega, u_grid, t_end=4000.0, dt=0.1, label=Phase.TC2.value, **kwargs):
    """Continuation scan in ``U`` at fixed ``Omega``; returns ``(cells, U estimate)``.

    The estimate is the midpoint of the first adjacent pair (in descending
    ``U``) where the label leaves ``label``.
    """
    diagram = phase_diagram([omega], u_grid, "continuation", t_end, dt, **kwargs)
    cells = diagram.cells
    for upper, lower in zip(cells[:-1], cells[1:]):
        if upper.label == label and lower.label != label:
            return cells, 0.5 * (upper.u + lower.u)
    return cells, None


def relax_to_fixed_point(params, state0=None, t_start=200.0, t_max=2e5, deriv_tol=1e-12,
                         tol=1e-12):
    """Integrate until the mean-field derivative norm drops below ``deriv_tol``.

    The integration window doubles until convergence; slow critical slowing
    down near ``Omega = kappa`` needs long runs.  Returns the final state and
    the total integration time.
    """
    state = DEFAULT_INITIAL_STATE if state0 is None else state0
    elapsed, chunk = 0.0, t_start
    while elapsed < t_max:
        traj = integrate_mf(state, params, t_end=chunk, dt=chunk, tol=tol,
                            shell_tol=CHAIN_SHELL_TOL)
        state = traj.final_state()
        elapsed += chunk
        y = state.as_array()
        if np.linalg.norm(_rhs(y, params.omega, params.u, params.kappa)) < deriv_tol:
            return state, elapsed
        chunk *= 2
    raise NumericalError("mean field did not reach a fixed point",
                         {"elapsed": elapsed, "omega": params.omega, "u": params.u})


def steady_imbalance(params, **kwargs):
    state, _ = relax_to_fixed_point(params, **kwargs)
    return 0.5 * abs(abs(state.alpha) ** 2 - abs(state.beta) ** 2)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    intercept: float
    r_squared: float
    omega_c: float


def critical_exponent_fit(distances, delta_n, omega_c=1.0, fit_omega_c=False, omegas=None):
    """Log-log regression of ``delta_N`` against the distance ``(Omega_c - Omega)/kappa``.

    With ``fit_omega_c`` the critical point is optimised as well; this needs
    the raw ``omegas`` and ignores ``distances``.
    """
    delta_n = np.asarray(delta_n, float)
    if fit_omega_c:
        if omegas is None:
            raise ParameterError("fit_omega_c needs the omega grid")
        from scipy.optimize import minimize_scalar

        omegas = np.asarray(omegas, float)

        def residual(wc):
            x = np.log(wc - omegas)
            return stats.linregress(x, np.log(delta_n)).stderr

        lo = omegas.max() + 1e-9
        omega_c = minimize_scalar(residual, bounds=(lo, lo + 0.1), method="bounded").x
        distances = omega_c - omegas
    distances = np.asarray(distances, float)
    if len(distances) < 5:
        raise ParameterError("critical_exponent_fit needs at least 5 points")
    if np.any(distances <= 0) or np.any(delta_n <= 0):
        raise ParameterError("distances and delta_N must be positive")
    fit = stats.linregress(np.log(distances), np.log(delta_n))
    return ExponentFit(float(fit.slope), float(fit.stderr), float(fit.intercept),
                       float(fit.rvalue ** 2), float(omega_c))


def simulate_exponent(distances, u=0.0, kappa=1.0, **kwargs):
    """Steady-state ``delta_N`` from relaxed mean-field runs at ``Omega = kappa (1 - d)``."""

    return np.array([steady_imbalance(ModelParams(omega=kappa * (1 - d), u=u, kappa=kappa),
                                      **kwargs) for d in distances])


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    r_squared: float
    onset: float
    window: tuple


def entanglement_growth_fit(times, eps, window=(1e2, 1e4), onset_level=0.01):
    """Linear fit of ``eps`` against ``ln(kappa t)`` over ``window``.

    ``onset`` is the start of the sustained growth: the first sample after
    which ``eps`` stays above ``onset_level`` (NaN if it ends below).  Early
    transient entanglement that dies out again does not count.
    """
    times = np.asarray(times, float)
    eps = np.asarray(eps, float)
    mask = (times >= window[0]) & (times <= window[1]) & (times > 0)
    if mask.sum() < 3:
        raise ParameterError(f"fewer than 3 samples in window {window}")
    if np.any(np.diff(eps[mask]) < -1e-9):
        warnings.warn("entanglement is not monotone over the fit window", RuntimeWarning)
    fit = stats.linregress(np.log(times[mask]), eps[mask])
    below = np.nonzero(eps <= onset_level)[0]
    if not len(below):
        onset = float(times[0])
    elif below[-1] == len(eps) - 1:
        onset = float("nan")
    else:
        onset = float(times[below[-1] + 1])
    return GrowthFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), onset,
                     tuple(window))


def entanglement_run(params, t_end=1e4, per_decade=50, tol=1e-10, state0=None):
    """Covariance run on a logarithmic grid; returns ``(times, eps)``."""
    times = log_time_grid(t_end, per_decade=per_decade)
    _, cov = integrate_lyapunov(state0, None, params, times=times, tol=tol)
    series = correlation_series(cov, with_discord=False)
    return series.times, series.log_negativity


@dataclass
class GapScaling:
    n_values: list
    eigenvalues: dict
    errors: dict
    block_offset: int

    def dominant(self):
        """``(N, lambda)`` for the eigenvalue with largest real part per N."""
        return [(n, self.eigenvalues[n][0]) for n in self.n_values if n in self.eigenvalues]

    def rows(self, modes=4):
        out = []
        for n in self.n_values:
            for k, lam in enumerate(self.eigenvalues.get(n, [])[:modes]):
                out.append((n, lam.real, lam.imag, k))
        return out

    def to_csv(self, path, modes=4):
        return io.write_csv(path, ["n", "re_lambda", "im_lambda", "mode_index"], self.rows(modes))


def gap_scaling(n_list, params, block_offset=1, k=16, negative_frequency=True):
    """Leading eigenvalues of ``L_{N,N-offset}`` for each ``N``.

    Only eigenvalues with ``Im <= 0`` (``negative_frequency``) are kept so that
    each oscillating mode appears once; the mean field oscillates as
    ``e^{-i omega t}`` in ``<a>``.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list[:-1], n_list[1:])):
        raise ParameterError("n_list must be strictly ascending")
    eig, errors = {}, {}
    for n in n_list:
        try:
            spec = block_spectrum(build_block(params, n, n - block_offset), k=k)
            vals = spec.eigenvalues
            if negative_frequency:
                vals = vals[vals.imag <= 1e-12]
            eig[n] = vals
        except BoseDimerError as exc:
            errors[n] = str(exc)
    return GapScaling(n_list, eig, errors, block_offset)

"""Two-mode Gaussian correlation measures.

Covariance matrices use the ordering ``(x_a, p_a, x_b, p_b)`` and the
normalisation in which the vacuum is the identity, so symplectic
eigenvalues are at least 1 for physical states.
"""
from dataclasses import dataclass

import numpy as np

from . import io
from .errors import EmptyWindowError, NumericalError
from .fluctuations import SYMPLECTIC_FORM

PARTIAL_TRANSPOSE = np.diag([1.0, 1.0, 1.0, -1.0])


def _check_symmetric(sigma, tol=1e-9):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (4, 4):
        raise ValueError(f"expected a 4x4 covariance matrix, got shape {sigma.shape}")
    if np.max(np.abs(sigma - sigma.T)) > tol * max(1.0, np.max(np.abs(sigma))):
        raise ValueError("covariance matrix is not symmetric")
    return 0.5 * (sigma + sigma.T)


def symplectic_eigenvalues(sigma, partial_transpose=False):
    """Symplectic spectrum ``(nu_minus, nu_plus)`` of a two-mode covariance matrix."""
    sigma = _check_symmetric(sigma)
    if partial_transpose:
        sigma = PARTIAL_TRANSPOSE @ sigma @ PARTIAL_TRANSPOSE
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * SYMPLECTIC_FORM @ sigma)))
    # eigenvalues come in +/- pairs
    return float(moduli[0]), float(moduli[2])


def logarithmic_negativity(sigma, base=2.0):
    nu = symplectic_eigenvalues(sigma, partial_transpose=True)[0]
    if nu >= 1.0 - 1e-12:
        return 0.0
    return -np.log(nu) / np.log(base)


def _entropy_fn(x, base):
    """Von Neumann entropy of a single-mode state with symplectic eigenvalue ``x``."""
    if x <= 1.0 + 1e-12:
        return 0.0
    plus, minus = (x + 1) / 2, (x - 1) / 2
    return (plus * np.log(plus) - minus * np.log(minus)) / np.log(base)


def invariants(sigma):
    """Local symplectic invariants ``(A, B, C, D)`` = det of the a, b, ab blocks and of sigma."""
    sigma = np.asarray(sigma, dtype=float)
    return (float(np.linalg.det(sigma[:2, :2])), float(np.linalg.det(sigma[2:, 2:])),
            float(np.linalg.det(sigma[:2, 2:])), float(np.linalg.det(sigma)))


def standard_form(sigma):
    """Bring ``sigma`` to ``[[a,0,c1,0],[0,a,0,c2],[c1,0,b,0],[0,c2,0,b]]`` by local symplectics.

    Each diagonal block is first mapped to a multiple of the identity, then the
    correlation block is diagonalised with proper rotations (a reflection would
    not be symplectic), so ``c2`` may come out negative.
    """
    sigma = _check_symmetric(sigma)

    def normaliser(block):
        vals, vecs = np.linalg.eigh(block)
        inv_sqrt = vecs @ np.diag(vals ** -0.5) @ vecs.T
        return np.sqrt(np.sqrt(np.linalg.det(block))) * inv_sqrt

    s_a = normaliser(sigma[:2, :2])
    s_b = normaliser(sigma[2:, 2:])
    u, _, vt = np.linalg.svd(s_a @ sigma[:2, 2:] @ s_b.T)
    reflect = np.diag([1.0, -1.0])
    if np.linalg.det(u) < 0:
        u = u @ reflect
    if np.linalg.det(vt) < 0:
        vt = reflect @ vt
    local = np.zeros((4, 4))
    local[:2, :2] = u.T @ s_a
    local[2:, 2:] = vt @ s_b
    out = local @ sigma @ local.T
    return 0.5 * (out + out.T)


def mutual_information(sigma, base=2.0):
    a, b, _, _ = invariants(sigma)
    nu_m, nu_p = symplectic_eigenvalues(sigma)
    return (_entropy_fn(np.sqrt(a), base) + _entropy_fn(np.sqrt(b), base)
            - _entropy_fn(nu_m, base) - _entropy_fn(nu_p, base))


def min_conditional_determinant(sigma):
    """Smallest determinant of mode a's covariance after a Gaussian measurement on b.

    Closed form of the optimisation over single-mode Gaussian measurements.
    """
    a, b, c, d = invariants(sigma)
    if abs(c) < 1e-14 or b - 1.0 < 1e-14:
        return a
    if (d - a * b) ** 2 <= (1 + b) * c * c * (a + d):
        num = 2 * c * c + (b - 1) * (d - a) + 2 * abs(c) * np.sqrt(c * c + (b - 1) * (d - a))
        return num / (b - 1) ** 2
    disc = c ** 4 + (d - a * b) ** 2 - 2 * c * c * (a * b + d)
    return (a * b - c * c + d - np.sqrt(max(disc, 0.0))) / (2 * b)


def gaussian_discord(sigma, base=2.0):
    """Gaussian discord and classical correlations with measurements on mode b.

    Returns ``(discord, classical)`` with ``classical = I - discord``.
    """
    sigma = _check_symmetric(sigma)
    a, _, _, _ = invariants(sigma)
    e_min = min_conditional_determinant(sigma)
    if not np.isfinite(e_min) or e_min < 1.0 - 1e-8:
        raise NumericalError("conditional determinant below the vacuum bound",
                             {"e_min": e_min, "residual": 1.0 - e_min})
    mutual = mutual_information(sigma, base)
    classical = _entropy_fn(np.sqrt(a), base) - _entropy_fn(np.sqrt(max(e_min, 1.0)), base)
    discord = mutual - classical
    return max(discord, 0.0), max(classical, 0.0)


@dataclass(frozen=True)
class CorrelationReport:
    log_negativity: float
    discord: float
    classical: float
    nu: tuple
    nu_pt: tuple

    @classmethod
    def from_sigma(cls, sigma, base=2.0):
        discord, classical = gaussian_discord(sigma, base)
        return cls(logarithmic_negativity(sigma, base), discord, classical,
                   symplectic_eigenvalues(sigma), symplectic_eigenvalues(sigma, True))


@dataclass(frozen=True)
class CorrelationSeries:
    times: np.ndarray
    log_negativity: np.ndarray
    discord: np.ndarray
    classical: np.ndarray

    def to_csv(self, path):
        return io.write_columns(path, ["t", "eps", "discord", "classical"],
                                [self.times, self.log_negativity, self.discord, self.classical])


def correlation_series(cov_series, base=2.0, with_discord=True):
    eps, disc, clas = [], [], []
    for sigma in cov_series.sigmas:
        eps.append(logarithmic_negativity(sigma, base))
        if with_discord:
            d, j = gaussian_discord(sigma, base)
        else:
            d = j = np.nan
        disc.append(d)
        clas.append(j)
    return CorrelationSeries(np.asarray(cov_series.times), np.array(eps), np.array(disc),
                             np.array(clas))


def time_average(times, values, window):
    """Arithmetic mean of ``values`` over samples with ``window[0] <= t <= window[1]``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) == 0:
        raise EmptyWindowError("empty series")
    lo, hi = window
    if lo > hi or hi < times[0] or lo > times[-1]:
        raise EmptyWindowError(f"window {window} lies outside the span [{times[0]}, {times[-1]}]")
    mask = (times >= lo) & (times <= hi)
    if not mask.any():
        raise EmptyWindowError(f"no samples in window {window}")
    return float(values[mask].mean())


def average_report(series, window):
    """Time-averaged entanglement, discord and classical correlations."""
    return {
        "eps": time_average(series.times, series.log_negativity, window),
        "discord": time_average(series.times, series.discord, window),
        "classical": time_average(series.times, series.classical, window),
    }

"""Collective-spin form of the dimer in a fixed excitation-number sector.

With ``S+ = a^dag b``, ``S- = a b^dag`` and ``S_z = (n_a - n_b)/2`` the sector
of ``N`` excitations is a spin ``S = N/2``.  The Hamiltonian becomes
``Omega S_x + (2U/S)(S^2 + S_z^2 - S)`` and the jump operators
``sqrt(kappa (1+n)/S) S-`` and ``sqrt(kappa n/S) S+``.
"""
from dataclasses import dataclass

import numpy as np

from . import io, lindblad
from .errors import ParameterError


@dataclass(frozen=True)
class SpinParams:
    spin: float
    omega: float
    u: float
    kappa: float
    n_th: float = 0.0

    def __post_init__(self):
        if self.spin <= 0 or abs(2 * self.spin - round(2 * self.spin)) > 1e-12:
            raise ParameterError("spin must be a positive half-integer")
        if self.kappa < 0 or self.n_th < 0:
            raise ParameterError("kappa and n_th must be non-negative")

    @classmethod
    def from_model(cls, params, n):
        return cls(n / 2, params.omega, params.u, params.kappa, params.n_th)


def spin_operators(spin):
    """``(S_x, S_y, S_z, S+, S-)`` in the basis ``m = -S, ..., S``."""
    m = np.arange(-spin, spin + 1)
    s_plus = np.diag(np.sqrt(spin * (spin + 1) - m[:-1] * (m[:-1] + 1)), -1).astype(complex)
    s_minus = s_plus.conj().T
    s_x = 0.5 * (s_plus + s_minus)
    s_y = -0.5j * (s_plus - s_minus)
    return s_x, s_y, np.diag(m).astype(complex), s_plus, s_minus


def spin_hamiltonian(sp):
    s_x, _, s_z, _, _ = spin_operators(sp.spin)
    eye = np.eye(s_x.shape[0])
    s = sp.spin
    return sp.omega * s_x + 2 * sp.u / s * ((s * s - s) * eye + s_z @ s_z)


def build_spin_liouvillian(sp):
    """Dense generator on ``(2S+1)^2`` coefficients, row-major like the boson blocks."""
    _, _, _, s_plus, s_minus = spin_operators(sp.spin)
    jumps = [np.sqrt(sp.kappa * (1 + sp.n_th) / sp.spin) * s_minus]
    if sp.n_th > 0:
        jumps.append(np.sqrt(sp.kappa * sp.n_th / sp.spin) * s_plus)
    return lindblad.liouvillian(spin_hamiltonian(sp), jumps)


def spin_observables_from_bosonic(alpha, beta):
    """Mean-field magnetisation ``(m_x, m_y, m_z)`` per ``N/2`` excitations."""
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    m_plus = np.conj(alpha) * beta
    m_z = 0.5 * (np.abs(alpha) ** 2 - np.abs(beta) ** 2)
    return m_plus.real, m_plus.imag, m_z


def trajectory_magnetisation(traj):
    return spin_observables_from_bosonic(traj.alpha, traj.beta)


def write_magnetisation(path, times, m_x, m_y, m_z):
    return io.write_columns(path, ["t", "m_x", "m_y", "m_z"], [times, m_x, m_y, m_z])

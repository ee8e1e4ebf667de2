"""Dense Lindblad superoperators from explicit operator matrices.

Density matrices are vectorised row-major, ``vec(rho)[i*d + j] = rho[i, j]``,
for which ``vec(A rho B) = kron(A, B.T) vec(rho)``.  This module is
deliberately generic: it serves as an independent cross-check of the
hand-derived block matrices and powers the small three-mode model.
"""
import numpy as np


def annihilation(cutoff):
    """Truncated annihilation operator on ``cutoff + 1`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def liouvillian(hamiltonian, jumps=()):
    """Superoperator of ``-i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)``."""
    h = np.asarray(hamiltonian, dtype=complex)
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in jumps:
        op = np.asarray(op, dtype=complex)
        ldl = op.conj().T @ op
        sup += np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
    return sup


def vec(rho):
    return np.asarray(rho).reshape(-1)


def unvec(v, dim):
    return np.asarray(v).reshape(dim, dim)


def trace_distance(rho, sigma):
    eig = np.linalg.eigvalsh(0.5 * ((rho - sigma) + (rho - sigma).conj().T))
    return 0.5 * float(np.abs(eig).sum())


def two_mode_operators(cutoff):
    """``a``, ``b`` on the product Fock space with ``cutoff + 1`` levels per mode."""
    a1 = annihilation(cutoff)
    eye = np.eye(cutoff + 1)
    return np.kron(a1, eye), np.kron(eye, a1)


def dimer_operators(params, scale_n, cutoff):
    """Hamiltonian and jump operators of the dimer on a truncated two-mode space.

    ``scale_n`` is the excitation number used in the ``2u/N`` and ``2 kappa/N``
    rescaling.
    """
    a, b = two_mode_operators(cutoff)
    na, nb = a.conj().T @ a, b.conj().T @ b
    eye = np.eye(a.shape[0])
    h = (params.omega / 2 * (a.conj().T @ b + b.conj().T @ a)
         + 2 * params.u / scale_n * (na @ (na - eye) + nb @ (nb - eye)))
    rate = 2 * params.kappa / scale_n
    jumps = [np.sqrt(rate * (1 + params.n_th)) * a @ b.conj().T]
    if params.n_th > 0:
        jumps.append(np.sqrt(rate * params.n_th) * a.conj().T @ b)
    return h, jumps, a, b


def sector_basis(cutoff, n):
    """Indices in the two-mode product space of ``|N_a, N - N_a>``, ordered by ``N_a``."""
    return np.array([na * (cutoff + 1) + (n - na) for na in range(n + 1)])

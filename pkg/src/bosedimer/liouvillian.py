"""Finite-N Liouvillian in the excitation-number block decomposition.

The total excitation number is conserved by the Hamiltonian and both jump
operators, so the density matrix splits into blocks ``rho^{N,N'}`` with
coefficients indexed by the mode-a occupations ``(N_a, N'_a)``.  Block
coefficients are vectorised row-major over ``(N_a, N'_a)``.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import eigs, expm_multiply
from scipy.special import gammaln

from . import io, lindblad
from .errors import (DimensionError, EigensolverError, MissingSectorError, NumericalError,
                     ParameterError)
from .meanfield import DEFAULT_INITIAL_STATE, MeanFieldState

MAX_BLOCK_DIM = 200_000
DENSE_CAP = 1024
N_ITERATIVE = 16


@dataclass(frozen=True)
class BlockOperator:
    n: int
    n_prime: int
    matrix: sp.csr_matrix
    scale_n: int

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def shape(self):
        return (self.n + 1, self.n_prime + 1)


@dataclass
class DensityBlock:
    n: int
    n_prime: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.n + 1, self.n_prime + 1):
            raise ValueError(f"coeffs must have shape {(self.n + 1, self.n_prime + 1)}")

    def trace(self):
        if self.n != self.n_prime:
            raise ValueError("trace is defined for diagonal sectors only")
        return complex(np.trace(self.coeffs))


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    n: int
    n_prime: int
    eigenvectors: np.ndarray = None
    method: str = "dense"
    residual: float = 0.0

    def dominant(self, k=1, exclude_zero=False, tol=1e-10):
        vals = self.eigenvalues
        if exclude_zero:
            vals = vals[np.abs(vals) > tol]
        return vals[:k]

    def rows(self):
        return [(self.n, self.n_prime, lam.real, lam.imag) for lam in self.eigenvalues]


def _sort_desc_real(vals, vecs=None):
    order = np.lexsort((vals.imag, -vals.real))
    return vals[order], (None if vecs is None else vecs[:, order])


def build_block(params, n, n_prime, scale_n=None, max_dim=MAX_BLOCK_DIM):
    """Sparse generator of the ``(n, n_prime)`` coefficient block.

    ``scale_n`` is the excitation number used in the ``2u/N`` and
    ``2 kappa/N`` rescaling; it defaults to ``n``.  Blocks of one density
    matrix must share the same ``scale_n``.
    """
    if n < 0 or n_prime < 0 or int(n) != n or int(n_prime) != n_prime:
        raise ParameterError("sector labels must be non-negative integers")
    n, n_prime = int(n), int(n_prime)
    dim = (n + 1) * (n_prime + 1)
    if dim > max_dim:
        raise DimensionError(f"block dimension {dim} exceeds cap {max_dim}")
    scale = scale_n if scale_n is not None else max(n, 1)
    rate_r = 2 * params.kappa * (1 + params.n_th) / scale
    rate_l = 2 * params.kappa * params.n_th / scale
    u_s = 2 * params.u / scale
    half_om = params.omega / 2

    i, j = np.meshgrid(np.arange(n + 1), np.arange(n_prime + 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ib, jb = n - i, n_prime - j
    row = i * (n_prime + 1) + j

    def energy(na, nb):
        return na * (na - 1) + nb * (nb - 1)

    diag = (-1j * u_s * (energy(i, ib) - energy(j, jb))
            - rate_r / 2 * (i * (ib + 1) + j * (jb + 1))
            - rate_l / 2 * (ib * (i + 1) + jb * (j + 1)))
    rows, cols, vals = [row], [row], [diag]

    def couple(mask, di, dj, value):
        rows.append(row[mask])
        cols.append((i[mask] + di) * (n_prime + 1) + j[mask] + dj)
        vals.append(value[mask])

    couple(i > 0, -1, 0, -1j * half_om * np.sqrt(i * (ib + 1.0)))
    couple(i < n, 1, 0, -1j * half_om * np.sqrt(ib * (i + 1.0)))
    couple(j < n_prime, 0, 1, 1j * half_om * np.sqrt(jb * (j + 1.0)))
    couple(j > 0, 0, -1, 1j * half_om * np.sqrt(j * (jb + 1.0)))
    both_up = (i < n) & (j < n_prime)
    couple(both_up, 1, 1, rate_r * np.sqrt((i + 1.0) * ib * (j + 1.0) * jb))
    if rate_l:
        both_down = (i > 0) & (j > 0)
        couple(both_down, -1, -1, rate_l * np.sqrt((ib + 1.0) * i * (jb + 1.0) * j))

    matrix = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(dim, dim), dtype=complex)
    matrix.eliminate_zeros()
    return BlockOperator(n, n_prime, matrix, scale)


def block_spectrum(block, dense_cap=DENSE_CAP, k=N_ITERATIVE, vectors=False):
    """Eigenvalues sorted by descending real part.

    Blocks up to ``dense_cap`` are diagonalised densely; larger ones use
    shift-invert Arnoldi around the origin for the ``k`` eigenvalues closest
    to the imaginary axis.
    """
    if block.dim <= dense_cap:
        dense = block.matrix.toarray()
        if vectors:
            vals, vecs = sla.eig(dense)
        else:
            vals, vecs = sla.eigvals(dense), None
        vals, vecs = _sort_desc_real(vals, vecs)
        return SpectrumResult(vals, block.n, block.n_prime, vecs, "dense")
    try:
        vals, vecs = eigs(block.matrix.tocsc(), k=min(k, block.dim - 2), sigma=0.0,
                          which="LM", tol=1e-12)
    except Exception as exc:
        raise EigensolverError(f"iterative eigensolver failed: {exc}") from exc
    residual = float(max(np.linalg.norm(block.matrix @ vecs[:, c] - vals[c] * vecs[:, c])
                         for c in range(len(vals))))
    vals, vecs = _sort_desc_real(vals, vecs)
    return SpectrumResult(vals, block.n, block.n_prime, vecs if vectors else None,
                          "shift-invert", residual)


def steady_state(block, null_tol=1e-9):
    """Normalised steady state of a diagonal block."""
    if block.n != block.n_prime:
        raise ParameterError("steady states exist only for diagonal blocks")
    dense = block.matrix.toarray()
    _, s, vh = np.linalg.svd(dense)
    scale = max(1.0, s[0])
    nullity = int(np.sum(s < null_tol * scale))
    if nullity > 1:
        raise NumericalError(f"degenerate null space (nullity {nullity})",
                             {"singular_values": s[-4:].tolist()})
    rho = vh[-1].conj().reshape(block.n + 1, block.n + 1)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise NumericalError("steady state is not positive semidefinite")
    return DensityBlock(block.n, block.n, rho)


def coherent_amplitudes(state, n_total, n):
    """Coefficients of the product coherent state in sector ``n``, ordered by ``N_a``."""
    scale = np.sqrt(n_total / 2)
    amp_a, amp_b = state.alpha * scale, state.beta * scale
    na = np.arange(n + 1)
    log_norm = (-0.5 * (abs(amp_a) ** 2 + abs(amp_b) ** 2)
                - 0.5 * (gammaln(na + 1) + gammaln(n - na + 1)))
    return np.exp(log_norm) * amp_a ** na * amp_b ** (n - na)


@dataclass
class FiniteNInitialState:
    blocks: dict
    window: tuple
    coherence_norm: float
    metadata: dict = field(default_factory=dict)


def coherent_initial_blocks(state=None, n_total=20, width=2):
    """Product coherent state ``|alpha sqrt(N/2), beta sqrt(N/2)>`` on sectors N-width..N+width.

    The projected state is renormalised.  ``coherence_norm`` is the ratio
    between ``Tr[a rho]`` of the truncated state and the untruncated value
    ``alpha sqrt(N/2)``; the truncation keeps only ``2 width`` of the
    ``2 width + 1`` neighbouring-sector coherences, so this factor is used to
    rescale quadrature expectation values.
    """
    state = DEFAULT_INITIAL_STATE if state is None else state
    sectors = list(range(max(0, n_total - width), n_total + width + 1))
    amps = {m: coherent_amplitudes(state, n_total, m) for m in sectors}
    weights = {m: float(np.sum(np.abs(amps[m]) ** 2)) for m in sectors}
    total = sum(weights.values())
    blocks = {}
    for m in sectors:
        for mp in sectors:
            if abs(m - mp) <= 1:
                coeffs = np.outer(amps[m], amps[mp].conj()) / total
                blocks[(m, mp)] = DensityBlock(m, mp, coeffs)
    norm = sum(weights[m - 1] for m in sectors if m - 1 in weights) / total
    return FiniteNInitialState(blocks, (sectors[0], sectors[-1]), norm,
                               {"default_initial_state": state == DEFAULT_INITIAL_STATE,
                                "sector_weights": {str(k): v / total for k, v in weights.items()}})


@dataclass
class ObservableSeries:
    times: np.ndarray
    x_a: np.ndarray
    p_a: np.ndarray
    x_b: np.ndarray
    p_b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path):
        return io.write_columns(path, ["t", "x_a", "p_a", "x_b", "p_b", "n_a", "n_b"],
                                [self.times, self.x_a, self.p_a, self.x_b, self.p_b,
                                 self.n_a, self.n_b])


def evolve_block(block_op, density_block, times):
    """Coefficients of one block on a uniform time grid starting at zero."""
    v0 = density_block.coeffs.reshape(-1)
    out = expm_multiply(block_op.matrix.tocsc(), v0, start=times[0], stop=times[-1],
                        num=len(times), endpoint=True)
    return out.reshape(len(times), block_op.n + 1, block_op.n_prime + 1)


def evolve_blocks(initial, params, t_end, sample_dt, coherence_norm=1.0):
    """Evolve density blocks independently and assemble rescaled observables.

    ``initial`` maps ``(N, N')`` to :class:`DensityBlock` (or is a list of
    blocks).  Quadratures are assembled from the ``(N, N-1)`` blocks and
    divided by ``sqrt(N/2) * coherence_norm`` with ``N = params.n_total``;
    occupations come from the diagonal blocks and are divided by ``N/2``.
    """
    if params.n_total is None:
        raise ParameterError("evolve_blocks needs params.n_total")
    if isinstance(initial, dict):
        blocks = dict(initial)
    else:
        blocks = {(b.n, b.n_prime): b for b in initial}
    lower = [(m, mp) for (m, mp) in blocks if mp == m - 1]
    if not lower:
        raise MissingSectorError("no (N, N-1) blocks: quadratures unavailable")
    diag = [(m, mp) for (m, mp) in blocks if m == mp]
    if not diag:
        raise MissingSectorError("no (N, N) blocks: occupations unavailable")

    n = int(round(t_end / sample_dt))
    times = np.linspace(0.0, n * sample_dt, n + 1)
    scale_n = params.n_total

    a_exp = np.zeros(len(times), dtype=complex)
    b_exp = np.zeros(len(times), dtype=complex)
    for m, mp in lower:
        op = build_block(params, m, mp, scale_n=scale_n)
        traj = evolve_block(op, blocks[(m, mp)], times)
        na = np.arange(1, m + 1)
        # Tr[a rho] = sum sqrt(N_a) rho^{N,N-1}_{N_a, N_a-1}
        a_exp += np.einsum("k,tk->t", np.sqrt(na), traj[:, na, na - 1])
        nb_idx = np.arange(0, m)
        # Tr[b rho]: b lowers N_b at fixed N_a
        b_exp += np.einsum("k,tk->t", np.sqrt(m - nb_idx), traj[:, nb_idx, nb_idx])
    n_a = np.zeros(len(times))
    n_b = np.zeros(len(times))
    traces = {}
    for m, _ in diag:
        op = build_block(params, m, m, scale_n=scale_n)
        traj = evolve_block(op, blocks[(m, m)], times)
        pops = np.real(np.diagonal(traj, axis1=1, axis2=2))
        na = np.arange(m + 1)
        n_a += pops @ na
        n_b += pops @ (m - na)
        traces[m] = pops.sum(axis=1)

    quad_scale = np.sqrt(scale_n / 2) * coherence_norm
    x_a = np.sqrt(2) * a_exp.real / quad_scale
    p_a = np.sqrt(2) * a_exp.imag / quad_scale
    x_b = np.sqrt(2) * b_exp.real / quad_scale
    p_b = np.sqrt(2) * b_exp.imag / quad_scale
    meta = {"params": params.to_dict(), "sectors": sorted(map(list, blocks)),
            "coherence_norm": coherence_norm,
            "trace_drift": max(float(np.max(np.abs(tr - tr[0]))) for tr in traces.values())}
    return ObservableSeries(times, x_a, p_a, x_b, p_b, n_a / (scale_n / 2), n_b / (scale_n / 2),
                            meta)


def full_block_matrix(params, n, n_prime, scale_n=None):
    return build_block(params, n, n_prime, scale_n).matrix.toarray()


def match_spectra(first, second):
    """Maximum ``|lambda_1 - lambda_2|`` under the minimal-cost pairing."""
    first, second = np.asarray(first), np.asarray(second)
    if len(first) != len(second):
        raise ValueError("spectra differ in size")
    cost = np.abs(first[:, None] - second[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def spin_equivalence_check(params, n, tol=1e-9):
    """Largest eigenvalue mismatch between ``L_{N,N}`` and the spin-``N/2`` generator."""
    from .spin import SpinParams, build_spin_liouvillian
    block = build_block(params, n, n)
    boson = sla.eigvals(block.matrix.toarray())
    spin = sla.eigvals(build_spin_liouvillian(SpinParams.from_model(params, n)))
    gaps = np.abs(np.subtract.outer(boson, boson))
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < 1e-6:
        warnings.warn("near-degenerate spectrum; pairing uses optimal assignment", RuntimeWarning)
    return match_spectra(boson, spin)


@dataclass
class ThreeModeResult:
    times: np.ndarray
    trace_distance: np.ndarray
    n_a_three: np.ndarray
    n_a_effective: np.ndarray
    cutoff_population: float
    kappa_effective: float


def adiabatic_rates(kappa, ratio):
    """Coupling ``g`` and damping ``gamma`` with ``gamma/g = ratio`` and ``4 g^2/gamma = kappa``."""
    g = kappa * ratio / 4.0
    return g, ratio * g


def _sector_dimer_operators(params, n, scale_n):
    """Dimer operators restricted to the sector of ``n`` excitations (basis ordered by N_a)."""
    h, jumps, a, b = lindblad.dimer_operators(params, scale_n, n)
    idx = lindblad.sector_basis(n, n)
    return h[np.ix_(idx, idx)], [j[np.ix_(idx, idx)] for j in jumps], a, b, idx


def three_mode_oracle(params, g, gamma, cutoff_c=6, t_end=5.0, n=2, num=51, initial=None,
                      leak_tol=1e-6):
    """Compare the three-mode model with its effective two-mode master equation.

    The auxiliary mode ``c`` couples through ``g~ (a^dag b c + a b^dag c^dag)``
    with ``g~ = g / sqrt(N/2)`` and is damped at rate ``gamma`` towards a
    thermal state with occupation ``n_th``.  The effective model has
    ``kappa = 4 g^2 / gamma``; ``params.kappa`` is ignored.  Returns the trace
    distance between the reduced a-b state and the effective state.
    """
    if n > 3 or cutoff_c > 6:
        warnings.warn("three-mode oracle is intended for n <= 3 and cutoff_c <= 6")
    kappa_eff = 4 * g * g / gamma if gamma > 0 else 0.0
    eff_params = params.replace(kappa=kappa_eff if kappa_eff > 0 else 1.0)
    dim_s = n + 1
    dim_c = cutoff_c + 1

    # two-mode operators in the sector, basis |N_a> with N_b = n - N_a
    h_s, _, _, _, _ = _sector_dimer_operators(params, n, n)
    na = np.arange(n + 1)
    # a^dag b |N_a> = sqrt((N_a+1) N_b) |N_a+1>
    raise_ab = np.diag(np.sqrt((na[:-1] + 1.0) * (n - na[:-1])), -1)
    c_op = lindblad.annihilation(cutoff_c)
    eye_s, eye_c = np.eye(dim_s), np.eye(dim_c)
    g_tilde = g / np.sqrt(n / 2)
    coupling = np.kron(raise_ab, c_op) + np.kron(raise_ab.T, c_op.T)
    h3 = np.kron(h_s, eye_c) + g_tilde * coupling
    jumps3 = [np.sqrt(gamma * (1 + params.n_th)) * np.kron(eye_s, c_op)]
    if params.n_th > 0:
        jumps3.append(np.sqrt(gamma * params.n_th) * np.kron(eye_s, c_op.T))
    gen3 = lindblad.liouvillian(h3, jumps3)

    if kappa_eff > 0:
        eff_h, eff_jumps, _, _, _ = _sector_dimer_operators(eff_params, n, n)
    else:
        eff_h, eff_jumps = h_s, []
    gen_eff = lindblad.liouvillian(eff_h, eff_jumps)

    if initial is None:
        amps = coherent_amplitudes(DEFAULT_INITIAL_STATE, n, n)
        psi = amps / np.linalg.norm(amps)
        initial = np.outer(psi, psi.conj())
    occ = np.arange(dim_c)
    thermal = (params.n_th / (1 + params.n_th)) ** occ if params.n_th > 0 else (occ == 0) * 1.0
    thermal = np.diag(thermal / thermal.sum())
    rho3 = np.kron(initial, thermal)

    times = np.linspace(0.0, t_end, num)
    step3 = sla.expm(gen3 * (times[1] - times[0]))
    step_eff = sla.expm(gen_eff * (times[1] - times[0]))
    v3, veff = lindblad.vec(rho3).astype(complex), lindblad.vec(initial).astype(complex)
    dist, pop3, popeff = [], [], []
    leak = 0.0
    for _ in times:
        r3 = lindblad.unvec(v3, dim_s * dim_c).reshape(dim_s, dim_c, dim_s, dim_c)
        reduced = np.einsum("icjc->ij", r3)
        c_pops = np.real(np.einsum("icic->c", r3))
        leak = max(leak, float(c_pops[-1]))
        reff = lindblad.unvec(veff, dim_s)
        dist.append(lindblad.trace_distance(reduced, reff))
        pop3.append(float(np.real(np.trace(reduced @ np.diag(na)))))
        popeff.append(float(np.real(np.trace(reff @ np.diag(na)))))
        v3, veff = step3 @ v3, step_eff @ veff
    if leak > leak_tol:
        warnings.warn(f"mode-c population at cutoff {leak:.2e} exceeds {leak_tol:.0e}",
                      RuntimeWarning)
    return ThreeModeResult(times, np.array(dist), np.array(pop3), np.array(popeff), leak,
                           kappa_eff)


def fit_hopping_rates(times, n_a, n_total=1):
    """Fit ``d<n_a>/dt = -r_R <n_a> + r_L (N - <n_a>)`` to a relaxation curve.

    Valid for ``Omega = U = 0`` and ``N = 1``, where the populations obey a
    two-state rate equation.  Returns ``(r_R, r_L)``.
    """
    from scipy.optimize import curve_fit

    times = np.asarray(times, float)
    n_a = np.asarray(n_a, float)

    def model(t, r_r, r_l):
        total = r_r + r_l
        eq = n_total * r_l / total
        return eq + (n_a[0] - eq) * np.exp(-total * t)

    guess = (1.0, 0.1)
    (r_r, r_l), _ = curve_fit(model, times, n_a, p0=guess, bounds=(0, np.inf))
    return float(r_r), float(r_l)

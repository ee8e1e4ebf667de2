"""Driven-dissipative Bose-Hubbard dimer: mean field, Gaussian fluctuations and
finite-N Liouvillian blocks."""
__version__ = "0.1.0"

from .errors import (BoseDimerError, ConfigError, InconclusiveClassification, NumericalError,
                     ParameterError)
from .params import CONVENTIONS, ModelParams, critical_hopping, critical_interaction, derive_rates
from .meanfield import (DEFAULT_INITIAL_STATE, MeanFieldState, Phase, PolarState, Trajectory,
                        classify_phase, fixed_points, integrate_mf, order_parameters)
from .fluctuations import build_matrices, integrate_lyapunov
from .correlations import gaussian_discord, logarithmic_negativity, symplectic_eigenvalues
from .liouvillian import (block_spectrum, build_block, coherent_initial_blocks, evolve_blocks,
                          spin_equivalence_check, steady_state, three_mode_oracle)
from .fourier import fourier_peaks

__all__ = [
    "BoseDimerError", "ConfigError", "InconclusiveClassification", "NumericalError",
    "ParameterError", "CONVENTIONS", "ModelParams", "critical_hopping", "critical_interaction",
    "derive_rates", "DEFAULT_INITIAL_STATE", "MeanFieldState", "Phase", "PolarState",
    "Trajectory", "classify_phase", "fixed_points", "integrate_mf", "order_parameters",
    "build_matrices", "integrate_lyapunov", "gaussian_discord", "logarithmic_negativity",
    "symplectic_eigenvalues", "block_spectrum", "build_block", "coherent_initial_blocks",
    "evolve_blocks", "spin_equivalence_check", "steady_state", "three_mode_oracle",
    "fourier_peaks",
]

"""Model parameters, unit conventions and derived rates.

All rates are measured in units of the overall dissipation rate ``kappa``
(``kappa = 1`` by default), so ``omega`` and ``u`` are the dimensionless
ratios Omega/kappa and U/kappa when the default is kept.
"""
import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

from .errors import ConfigError, ParameterError

CONFIG_KEYS = ("omega", "u", "kappa", "n_th", "n_total")


@dataclass(frozen=True)
class Conventions:
    """Quadrature conventions used throughout the package.

    ``x = a + a^dag`` and ``p = -i (a - a^dag)`` so that ``[x, p] = 2i`` and
    the vacuum covariance matrix is the identity.  Mean-field variables are
    expectation values divided by ``sqrt(N/2)``, which puts the conserved
    shell at ``sum_alpha (x_alpha^2 + p_alpha^2) / 2 = 2``.
    """

    quad_scale: str = "x=a+a^dag,p=-i(a-a^dag)"
    hbar_free: bool = True
    vacuum_variance: float = 1.0
    shell_radius_sq: float = 2.0


CONVENTIONS = Conventions()


class Rates(NamedTuple):
    gamma_r: float
    gamma_l: float
    kappa_scaled: Optional[float]
    u_scaled: Optional[float]


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings of the dimer.

    ``n_total`` is only meaningful for finite-N computations and may be left
    as ``None`` in thermodynamic-limit code paths.
    """

    omega: float = 0.0
    u: float = 0.0
    kappa: float = 1.0
    n_th: float = 0.0
    n_total: Optional[int] = None

    def __post_init__(self):
        for name in ("omega", "u", "kappa", "n_th"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if self.omega < 0 or self.u < 0 or self.n_th < 0:
            raise ParameterError("omega, u and n_th must be non-negative")
        if self.n_total is not None:
            n = self.n_total
            if isinstance(n, bool) or int(n) != n or n < 1:
                raise ParameterError(f"n_total must be a positive integer, got {n!r}")
            object.__setattr__(self, "n_total", int(n))

    @property
    def gamma_r(self):
        return (1.0 + self.n_th) * self.kappa

    @property
    def gamma_l(self):
        return self.n_th * self.kappa

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return ModelParams(**data)

    def with_n(self, n_total):
        return self.replace(n_total=n_total)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("model parameters must be a JSON object")
        unknown = set(data) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def derive_rates(params):
    """Incoherent hopping rates and, when N is set, the finite-N rescaled rates.

    ``gamma_r = (1 + n_th) kappa`` and ``gamma_l = n_th kappa``.  For a finite
    excitation number the couplings entering the master equation are
    ``2 kappa / N`` and ``2 u / N``.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("derive_rates expects a ModelParams instance")
    if params.n_total is None:
        kappa_scaled = u_scaled = None
    else:
        kappa_scaled = 2.0 * params.kappa / params.n_total
        u_scaled = 2.0 * params.u / params.n_total
    return Rates(params.gamma_r, params.gamma_l, kappa_scaled, u_scaled)


def critical_interaction(omega, kappa=1.0):
    """Interaction strength at which the limit cycle turns quasi-periodic.

    Returns ``kappa * sqrt((omega/kappa)^2 - 1) / 4``; zero below ``omega = kappa``.
    """
    ratio = omega / kappa
    if ratio <= 1.0:
        return 0.0
    return kappa * math.sqrt(ratio * ratio - 1.0) / 4.0


def critical_hopping(u, kappa=1.0):
    """Largest ``omega`` for which the unequal-radius fixed points exist."""
    return math.sqrt(16.0 * u * u + kappa * kappa)

"""Model parameters, spatial domain and turning-rate functions."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numba
import numpy as np

LINEAR = 0
ARCTAN = 1
_RATE_KINDS = {"linear": LINEAR, "arctan": ARCTAN}

REFLECTING = 0
PERIODIC = 1
_BCS = {"reflecting": REFLECTING, "periodic": PERIODIC}


@dataclass(frozen=True)
class ModelParams:
    epsilon: float = 0.2
    tau: float = 1.0
    lambda0: float = 1.0
    b: float = 1.0
    rate_kind: str = "arctan"
    dt: float = 0.1
    rate_floor: float | None = None

    def __post_init__(self):
        for name in ("epsilon", "tau", "lambda0", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.rate_kind not in _RATE_KINDS:
            raise ValueError(f"rate_kind must be one of {sorted(_RATE_KINDS)}")
        if self.rate_floor is not None and self.rate_floor < 0:
            raise ValueError("rate_floor must be non-negative")

    @property
    def kind_code(self) -> int:
        return _RATE_KINDS[self.rate_kind]

    @property
    def floor(self) -> float:
        """Effective floor; 0 means no floor (rates must then stay positive)."""
        if self.rate_floor is not None:
            return float(self.rate_floor)
        return 0.1 * self.lambda0 if self.rate_kind == "linear" else 0.0

    @property
    def drift_coefficient(self) -> float:
        """b * tau / (1 + lambda0 * tau): A(x) = drift_coefficient * S'(x)."""
        return self.b * self.tau / (1.0 + self.lambda0 * self.tau)

    def replace(self, **kw) -> "ModelParams":
        d = asdict(self)
        d.update(kw)
        return ModelParams(**d)


@dataclass(frozen=True)
class Domain:
    length: float = 20.0
    bc: str = "reflecting"

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("domain length must be positive")
        if self.bc not in _BCS:
            raise ValueError(f"bc must be one of {sorted(_BCS)}")

    @property
    def bc_code(self) -> int:
        return _BCS[self.bc]


@numba.njit(cache=True)
def _rate(z, lam0, b, kind):
    if kind == LINEAR:
        return lam0 - b * z
    return 2.0 * lam0 * (0.5 - np.arctan(np.pi * b * z / (2.0 * lam0)) / np.pi)


@numba.njit(cache=True)
def _rate_slope(z, lam0, b, kind):
    if kind == LINEAR:
        return -b
    u = np.pi * b * z / (2.0 * lam0)
    return -b / (1.0 + u * u)


def rate(params: ModelParams, z):
    """Turning rate of the internal-state model as a function of z = S(x) - y.

    The linear kind is floored at ``params.floor``; the arctan kind lies in
    (0, 2*lambda0) and is left as is.
    """
    z = np.asarray(z, dtype=np.float64)
    if params.rate_kind == "linear":
        out = np.maximum(params.lambda0 - params.b * z, params.floor)
    else:
        lam0 = params.lambda0
        out = 2.0 * lam0 * (0.5 - np.arctan(np.pi * params.b * z / (2.0 * lam0)) / np.pi)
    return out if out.ndim else float(out)


def rate_slope(params: ModelParams, z):
    """d(rate)/dz of the unfloored rate."""
    z = np.asarray(z, dtype=np.float64)
    if params.rate_kind == "linear":
        out = np.full_like(z, -params.b)
    else:
        u = np.pi * params.b * z / (2.0 * params.lambda0)
        out = -params.b / (1.0 + u * u)
    return out if out.ndim else float(out)


def m_function(t, tau: float):
    """m(t) = t*tau - (1 - exp(-t/tau)) * tau**2."""
    t = np.asarray(t, dtype=np.float64)
    out = t * tau + np.expm1(-t / tau) * tau * tau
    return out if out.ndim else float(out)


def m_expectation(tau: float, lambda0: float) -> float:
    """Closed form of E m(theta / lambda0) for theta ~ Exp(1)."""
    return tau / (lambda0 * (1.0 + lambda0 * tau))


@numba.njit(cache=True)
def _apply_bc(x, v, L, bc):
    if bc == PERIODIC:
        x = x % L
        if x >= L:
            x = 0.0
        return x, v
    if x > L:
        return 2.0 * L - x, -v
    if x < 0.0:
        return -x, -v
    return x, v

"""N coupled (internal, control) particle pairs driven by shared streams."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field

import numba
import numpy as np

from .control import _control_advance_all, _kernel_args as _control_args
from .errors import ConfigError, raise_for_status
from .field import ChemoField, value
from .grid import InitialLaw
from .internal import _internal_advance_all, _kernel_args as _internal_args
from .model import Domain, ModelParams
from .streams import PURPOSE_INIT, _direction, _theta, _uniform, _check_seed

REINIT_MODES = ("sync", "keep")


@numba.njit(cache=True)
def _init_draws(seed, pids):
    n = pids.shape[0]
    u = np.empty(n)
    v = np.empty(n)
    th = np.empty(n)
    for i in range(n):
        u[i] = _uniform(seed, pids[i], 0, PURPOSE_INIT)
        v[i] = _direction(seed, pids[i], 0)
        th[i] = _theta(seed, pids[i], 1)
    return u, v, th


@dataclass
class ParticleArrays:
    x: np.ndarray
    v: np.ndarray
    t: np.ndarray
    n: np.ndarray
    acc: np.ndarray
    theta: np.ndarray

    def copy(self):
        return type(self)(**{k: getattr(self, k).copy() for k in self.__dataclass_fields__})


@dataclass
class InternalArrays(ParticleArrays):
    z: np.ndarray = None


@dataclass
class CouplingStats:
    count: int
    mean_abs_dx: float
    mean_sq_dx: float
    dx: np.ndarray | None = None


@dataclass
class Ensemble:
    internal: InternalArrays
    control: ParticleArrays
    particle_ids: np.ndarray
    seed: int
    params: ModelParams
    domain: Domain
    field: ChemoField
    max_jump_error: np.ndarray = dc_field(default=None)
    clip_events: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        N = self.size
        if self.max_jump_error is None:
            self.max_jump_error = np.zeros(N)
        if self.clip_events is None:
            self.clip_events = np.zeros(N, dtype=np.int64)

    @property
    def size(self) -> int:
        return self.particle_ids.shape[0]

    @property
    def t(self) -> float:
        return float(self.internal.t[0])

    def y(self) -> np.ndarray:
        """Internal variables y = S(x) - z."""
        return value(self.field, self.internal.x) - self.internal.z

    def internal_hash(self) -> str:
        h = hashlib.sha256()
        for a in (self.internal.x, self.internal.v, self.internal.z, self.internal.n,
                  self.internal.acc, self.internal.theta):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def copy(self) -> "Ensemble":
        return Ensemble(self.internal.copy(), self.control.copy(), self.particle_ids.copy(),
                        self.seed, self.params, self.domain, self.field,
                        self.max_jump_error.copy(), self.clip_events.copy())


def init_ensemble(law: InitialLaw, N: int, seed: int, params: ModelParams,
                  domain: Domain, field: ChemoField, first_id: int = 0) -> Ensemble:
    """Draw N internal particles from ``law`` (in local equilibrium, y = S(x))
    and copy positions and directions to the control particles."""
    if N < 1:
        raise ConfigError("N must be at least 1")
    seed = _check_seed(seed)
    pids = np.arange(first_id, first_id + N, dtype=np.int64)
    u, vdraw, th = _init_draws(seed, pids)
    x = law.positions(u)
    if np.any(x < 0) or np.any(x > domain.length):
        raise ConfigError("initial law puts particles outside the domain")
    v = vdraw if law.v0 is None else np.full(N, float(law.v0))
    zeros = np.zeros(N)
    internal = InternalArrays(x=x.copy(), v=v.copy(), t=zeros.copy(),
                              n=np.zeros(N, dtype=np.int64), acc=zeros.copy(),
                              theta=th.copy(), z=zeros.copy())
    control = ParticleArrays(x=x.copy(), v=v.copy(), t=zeros.copy(),
                             n=np.zeros(N, dtype=np.int64), acc=zeros.copy(),
                             theta=th.copy())
    return Ensemble(internal, control, pids, seed, params, domain, field)


def advance(e: Ensemble, t_end: float) -> Ensemble:
    """Advance every pair to t_end in place (and return the ensemble)."""
    if t_end < e.t - 1e-12:
        raise ValueError("t_end is before the ensemble clock")
    N = e.size
    status = np.zeros(N, dtype=np.int64)
    I = e.internal
    _internal_advance_all(I.x, I.v, I.z, I.t, I.n, I.acc, I.theta, e.particle_ids,
                          float(t_end), *_internal_args(e.params, e.field, e.domain),
                          e.seed, status, e.max_jump_error, e.clip_events)
    if np.any(status):
        raise_for_status(int(status[np.nonzero(status)[0][0]]), "internal process")
    C = e.control
    _control_advance_all(C.x, C.v, C.t, C.n, C.acc, C.theta, e.particle_ids,
                         float(t_end), *_control_args(e.params, e.field, e.domain),
                         e.seed, status, e.max_jump_error, e.clip_events)
    if np.any(status):
        raise_for_status(int(status[np.nonzero(status)[0][0]]), "control process")
    return e


def reinitialize(e: Ensemble, mode: str = "sync") -> Ensemble:
    """Reset control particles onto their internal partners, in place.

    ``mode='sync'`` also hands the control particle its partner's jump clock
    (jump count, accumulated rate integral and pending exponential), so both
    wait for the same theta_{n+1}. ``mode='keep'`` copies only (x, v) and each
    control particle keeps consuming its stream from its own jump count.
    """
    if mode not in REINIT_MODES:
        raise ValueError(f"mode must be one of {REINIT_MODES}")
    C, I = e.control, e.internal
    C.x[:] = I.x
    C.v[:] = I.v
    if mode == "sync":
        C.n[:] = I.n
        C.acc[:] = I.acc
        C.theta[:] = I.theta
    return e


def coupling_stats(e: Ensemble, keep_values: bool = False) -> CouplingStats:
    d = e.internal.x - e.control.x
    return CouplingStats(count=d.shape[0], mean_abs_dx=float(np.mean(np.abs(d))),
                         mean_sq_dx=float(np.mean(d * d)),
                         dx=d.copy() if keep_values else None)

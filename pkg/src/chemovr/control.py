"""Gradient-sensing (control) velocity-jump process.

The turning rate is lambda0 - eps * A(x) * v with A(x) = b*tau/(1+lambda0*tau) * S'(x).
Freezing the gradient at each substep start makes the rate constant on the
substep, so the jump solve is a division. Substeps, jump tests and the solve
go through the same primitives as the internal process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import OK, RATE_NONPOSITIVE, raise_for_status
from .field import ChemoField, _gradient, gradient
from .internal import _integral, _solve
from .model import Domain, ModelParams, _apply_bc, m_expectation, m_function
from .streams import CoupledStream, _direction, _theta


def drift_field(params: ModelParams, field: ChemoField, x):
    """A(x) = b * tau / (1 + lambda0 * tau) * S'(x)."""
    return params.drift_coefficient * gradient(field, x)


def control_rate(params: ModelParams, field: ChemoField, x, v):
    """lambda0 - eps * A(x) * v, floored at ``params.floor`` when one is set.

    Raises RatePositivityError if the rate is non-positive with no floor.
    """
    lam = params.lambda0 - params.epsilon * drift_field(params, field, x) * np.asarray(v, dtype=float)
    if params.floor > 0.0:
        lam = np.maximum(lam, params.floor)
    elif np.any(lam <= 0.0):
        raise_for_status(RATE_NONPOSITIVE, "control_rate")
    return lam if np.ndim(lam) else float(lam)


def min_control_rate(params: ModelParams, field: ChemoField, domain: Domain,
                     n: int = 20001) -> float:
    """Unfloored minimum of the control rate over the domain (grid scan, both directions)."""
    x = np.linspace(0.0, domain.length, n)
    a = params.epsilon * np.abs(drift_field(params, field, x))
    return float(params.lambda0 - a.max()) if len(a) else params.lambda0


@numba.njit(cache=True)
def _control_substep(x, v, t, n, acc, th, t_end, eps, lam0, coef, floor, dt,
                     fa, fb, fc, L, bc, seed, pid):
    h_full = t_end - t
    last = True
    if h_full > dt:
        h_full = dt
        last = False
    g = _gradient(x, fa, fb, fc)
    A = lam0 - eps * (coef * g) * v
    if floor <= 0.0 and A <= 0.0:
        return x, v, t, n, acc, th, RATE_NONPOSITIVE, False, False, 0.0, h_full, g, A
    clipped = floor > 0.0 and A < floor
    I = _integral(A, 0.0, 1.0, floor, h_full)
    h = h_full
    jumped = False
    err = 0.0
    if acc + I >= th:
        R = th - acc
        h = _solve(A, 0.0, 1.0, floor, R, h_full)
        err = abs(_integral(A, 0.0, 1.0, floor, h) - R)
        jumped = True
    x_new, v_new = _apply_bc(x + eps * v * h, v, L, bc)
    if last and h == h_full:
        t_new = t_end
    else:
        t_new = t + h
    if jumped:
        n += 1
        v_new = _direction(seed, pid, n)
        th = _theta(seed, pid, n + 1)
        acc = 0.0
    else:
        acc = acc + I
    return x_new, v_new, t_new, n, acc, th, OK, jumped, clipped, err, h, g, A


@numba.njit(cache=True)
def _control_advance(x, v, t, n, acc, th, t_end, eps, lam0, coef, floor, dt,
                     fa, fb, fc, L, bc, seed, pid):
    max_err = 0.0
    clips = 0
    status = OK
    while t < t_end:
        (x, v, t, n, acc, th, status, jumped, clipped, err,
         h, g, A) = _control_substep(x, v, t, n, acc, th, t_end, eps, lam0, coef,
                                     floor, dt, fa, fb, fc, L, bc, seed, pid)
        if status != OK:
            break
        if clipped:
            clips += 1
        if err > max_err:
            max_err = err
    return x, v, t, n, acc, th, status, max_err, clips


@numba.njit(cache=True, parallel=True)
def _control_advance_all(xs, vs, ts, ns, accs, ths, pids, t_end, eps, lam0, coef,
                         floor, dt, fa, fb, fc, L, bc, seed, status, max_err, clips):
    for i in numba.prange(xs.shape[0]):
        r = _control_advance(xs[i], vs[i], ts[i], ns[i], accs[i], ths[i], t_end,
                             eps, lam0, coef, floor, dt, fa, fb, fc, L, bc, seed, pids[i])
        xs[i] = r[0]
        vs[i] = r[1]
        ts[i] = r[2]
        ns[i] = r[3]
        accs[i] = r[4]
        ths[i] = r[5]
        status[i] = r[6]
        if r[7] > max_err[i]:
            max_err[i] = r[7]
        clips[i] += r[8]


@numba.njit(cache=True)
def _control_trace(x, v, t, n, acc, th, t_end, eps, lam0, coef, floor, dt,
                   fa, fb, fc, L, bc, seed, pid, max_records):
    rec = np.empty((max_records, 9))
    k = 0
    status = OK
    while t < t_end and k < max_records:
        t0, x0, v0, acc0, th0, n0 = t, x, v, acc, th, n
        (x, v, t, n, acc, th, status, jumped, clipped, err,
         h, g, A) = _control_substep(x, v, t, n, acc, th, t_end, eps, lam0, coef,
                                     floor, dt, fa, fb, fc, L, bc, seed, pid)
        if status != OK:
            break
        rec[k, 0] = t0
        rec[k, 1] = h
        rec[k, 2] = x0
        rec[k, 3] = g
        rec[k, 4] = v0
        rec[k, 5] = acc0
        rec[k, 6] = th0
        rec[k, 7] = 1.0 if jumped else 0.0
        rec[k, 8] = n0
        k += 1
    return rec[:k], (x, v, t, n, acc, th), status


TRACE_COLUMNS = ("t", "h", "x", "g", "v", "acc", "theta_target", "jumped", "n")


@dataclass
class ControlParticle:
    x: float
    v: float
    t: float = 0.0
    n: int = 0
    acc: float = 0.0
    theta_target: float = math.nan


def new_control(x0: float, stream: CoupledStream, v0: float | None = None) -> ControlParticle:
    v = stream.direction(0) if v0 is None else float(v0)
    return ControlParticle(x=float(x0), v=v, theta_target=stream.theta(1))


def _kernel_args(params: ModelParams, field: ChemoField, domain: Domain):
    fa, fb, fc = field.arrays
    return (params.epsilon, params.lambda0, params.drift_coefficient, params.floor,
            params.dt, fa, fb, fc, domain.length, domain.bc_code)


def advance_until(p: ControlParticle, params: ModelParams, field: ChemoField,
                  domain: Domain, t_end: float, stream: CoupledStream) -> ControlParticle:
    if t_end < p.t:
        raise ValueError("t_end is before the particle's clock")
    x, v, t, n, acc, th, status, _, _ = _control_advance(
        p.x, p.v, p.t, p.n, p.acc, p.theta_target, float(t_end),
        *_kernel_args(params, field, domain), stream.master_seed, stream.particle_id)
    raise_for_status(status, "control process")
    return ControlParticle(x, v, t, int(n), acc, th)


def trace(p: ControlParticle, params: ModelParams, field: ChemoField, domain: Domain,
          t_end: float, stream: CoupledStream, max_records: int = 1_000_000):
    rec, st, status = _control_trace(p.x, p.v, p.t, p.n, p.acc, p.theta_target,
                                     float(t_end), *_kernel_args(params, field, domain),
                                     stream.master_seed, stream.particle_id, max_records)
    raise_for_status(status, "control trace")
    x, v, t, n, acc, th = st
    return rec, ControlParticle(x, v, t, int(n), acc, th)


def m_identity_check(tau: float, lambda0: float, thetas) -> tuple[float, float, float]:
    """(sample mean of m(theta/lambda0), its standard error, closed form)."""
    vals = m_function(np.asarray(thetas) / lambda0, tau)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))), m_expectation(tau, lambda0)

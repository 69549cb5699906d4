"""Velocity-jump process with an internal adaptation state.

Between jumps time is cut into substeps of length ``dt`` anchored at the last
jump (or at the start of an ``advance_until`` call). On a substep the
gradient is frozen at its start, so the deviation z = S(x) - y follows

    z(s) = exp(-s/tau) z0 + eps*tau*(1 - exp(-s/tau)) g v,

and the (linearised) rate along the substep has the form
``A + B*exp(-s/tau)``. Its integral is analytic, and the jump time inside a
substep is found by Newton's method on that integral.

The same integral/solve primitives drive the control process with ``B = 0``,
which makes the two processes arithmetically identical when S is constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import OK, RATE_NONPOSITIVE, NoRootError, raise_for_status
from .field import ChemoField, _gradient, _value
from .model import LINEAR, Domain, ModelParams, _apply_bc, _rate, _rate_slope
from .streams import CoupledStream, _direction, _theta

NEWTON_RTOL = 1e-12
NEWTON_MAXIT = 50


@numba.njit(cache=True)
def _one_minus_exp(h, tau):
    # tau * (1 - exp(-h/tau))
    return -tau * np.expm1(-h / tau)


@numba.njit(cache=True)
def _coeffs(z0, g, v, eps, tau, lam0, b, kind):
    """(A, B) such that the substep rate is A + B*exp(-s/tau)."""
    zinf = eps * tau * g * v
    if kind == LINEAR:
        a = lam0
        c = -b
    else:
        c = _rate_slope(z0, lam0, b, kind)
        a = _rate(z0, lam0, b, kind) - c * z0
    return a + c * zinf, c * (z0 - zinf)


@numba.njit(cache=True)
def _raw_rate(A, B, tau, s):
    if B == 0.0:
        return A
    return A + B * np.exp(-s / tau)


@numba.njit(cache=True)
def _raw_integral(A, B, tau, h):
    if B == 0.0:
        return A * h
    return A * h + B * _one_minus_exp(h, tau)


@numba.njit(cache=True)
def _rate_eff(A, B, tau, floor, s):
    r = _raw_rate(A, B, tau, s)
    if floor > 0.0 and r < floor:
        return floor
    return r


@numba.njit(cache=True)
def _is_clipped(A, B, tau, floor, h):
    if floor <= 0.0:
        return False
    return min(A + B, _raw_rate(A, B, tau, h)) < floor


@numba.njit(cache=True)
def _integral(A, B, tau, floor, h):
    """Exact integral over [0, h] of max(A + B*exp(-s/tau), floor).

    The rate is monotone in s, so it crosses the floor at most once.
    """
    if floor <= 0.0:
        return _raw_integral(A, B, tau, h)
    r0 = A + B
    rh = _raw_rate(A, B, tau, h)
    if r0 >= floor and rh >= floor:
        return _raw_integral(A, B, tau, h)
    if r0 <= floor and rh <= floor:
        return floor * h
    sc = -tau * np.log((floor - A) / B)
    if r0 < floor:
        return floor * sc + (_raw_integral(A, B, tau, h) - _raw_integral(A, B, tau, sc))
    return _raw_integral(A, B, tau, sc) + floor * (h - sc)


@numba.njit(cache=True)
def _solve(A, B, tau, floor, R, hmax):
    """Smallest h in (0, hmax] with integral(h) = R; caller ensures integral(hmax) >= R."""
    if B == 0.0:
        r = A
        if floor > 0.0 and r < floor:
            r = floor
        h = R / r
        return h if h < hmax else hmax
    tol = NEWTON_RTOL * max(1.0, R)
    lo = 0.0
    hi = hmax
    h = R / _rate_eff(A, B, tau, floor, 0.0)
    if not (lo < h < hi):
        h = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAXIT):
        f = _integral(A, B, tau, floor, h) - R
        if abs(f) < tol:
            return h
        if f > 0.0:
            hi = h
        else:
            lo = h
        hn = h - f / _rate_eff(A, B, tau, floor, h)
        if not (lo < hn < hi):
            hn = 0.5 * (lo + hi)
        h = hn
    # bisection fallback; the integral is increasing in h
    for _ in range(200):
        h = 0.5 * (lo + hi)
        f = _integral(A, B, tau, floor, h) - R
        if abs(f) < tol or hi - lo <= 4e-16 * hi:
            return h
        if f > 0.0:
            hi = h
        else:
            lo = h
    return h


@numba.njit(cache=True)
def _internal_substep(x, v, z, t, n, acc, th, t_end,
                      eps, tau, lam0, b, kind, floor, dt,
                      fa, fb, fc, L, bc, seed, pid):
    """One substep (possibly cut short by a jump or by t_end).

    Returns the new state followed by (status, jumped, clipped, jump_err,
    h, g, A, B).
    """
    h_full = t_end - t
    last = True
    if h_full > dt:
        h_full = dt
        last = False
    g = _gradient(x, fa, fb, fc)
    A, B = _coeffs(z, g, v, eps, tau, lam0, b, kind)
    if floor <= 0.0 and (A + B <= 0.0 or _raw_rate(A, B, tau, h_full) <= 0.0):
        return (x, v, z, t, n, acc, th, RATE_NONPOSITIVE, False, False, 0.0,
                h_full, g, A, B)
    clipped = _is_clipped(A, B, tau, floor, h_full)
    I = _integral(A, B, tau, floor, h_full)
    h = h_full
    jumped = False
    err = 0.0
    if acc + I >= th:
        R = th - acc
        h = _solve(A, B, tau, floor, R, h_full)
        err = abs(_integral(A, B, tau, floor, h) - R)
        jumped = True
    zinf = eps * tau * g * v
    e = np.exp(-h / tau)
    z_new = e * z - np.expm1(-h / tau) * zinf
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
    return (x_new, v_new, z_new, t_new, n, acc, th, OK, jumped, clipped, err,
            h, g, A, B)


@numba.njit(cache=True)
def _internal_advance(x, v, z, t, n, acc, th, t_end,
                      eps, tau, lam0, b, kind, floor, dt,
                      fa, fb, fc, L, bc, seed, pid):
    max_err = 0.0
    clips = 0
    status = OK
    while t < t_end:
        (x, v, z, t, n, acc, th, status, jumped, clipped, err,
         h, g, A, B) = _internal_substep(x, v, z, t, n, acc, th, t_end,
                                         eps, tau, lam0, b, kind, floor, dt,
                                         fa, fb, fc, L, bc, seed, pid)
        if status != OK:
            break
        if clipped:
            clips += 1
        if err > max_err:
            max_err = err
    return x, v, z, t, n, acc, th, status, max_err, clips


@numba.njit(cache=True, parallel=True)
def _internal_advance_all(xs, vs, zs, ts, ns, accs, ths, pids, t_end,
                          eps, tau, lam0, b, kind, floor, dt,
                          fa, fb, fc, L, bc, seed, status, max_err, clips):
    for i in numba.prange(xs.shape[0]):
        r = _internal_advance(xs[i], vs[i], zs[i], ts[i], ns[i], accs[i], ths[i],
                              t_end, eps, tau, lam0, b, kind, floor, dt,
                              fa, fb, fc, L, bc, seed, pids[i])
        xs[i] = r[0]
        vs[i] = r[1]
        zs[i] = r[2]
        ts[i] = r[3]
        ns[i] = r[4]
        accs[i] = r[5]
        ths[i] = r[6]
        status[i] = r[7]
        if r[8] > max_err[i]:
            max_err[i] = r[8]
        clips[i] += r[9]


@numba.njit(cache=True)
def _internal_trace(x, v, z, t, n, acc, th, t_end,
                    eps, tau, lam0, b, kind, floor, dt,
                    fa, fb, fc, L, bc, seed, pid, max_records):
    rec = np.empty((max_records, 10))
    k = 0
    status = OK
    while t < t_end and k < max_records:
        t0, x0, z0, v0, acc0, th0, n0 = t, x, z, v, acc, th, n
        (x, v, z, t, n, acc, th, status, jumped, clipped, err,
         h, g, A, B) = _internal_substep(x, v, z, t, n, acc, th, t_end,
                                         eps, tau, lam0, b, kind, floor, dt,
                                         fa, fb, fc, L, bc, seed, pid)
        if status != OK:
            break
        rec[k, 0] = t0
        rec[k, 1] = h
        rec[k, 2] = x0
        rec[k, 3] = z0
        rec[k, 4] = g
        rec[k, 5] = v0
        rec[k, 6] = acc0
        rec[k, 7] = th0
        rec[k, 8] = 1.0 if jumped else 0.0
        rec[k, 9] = n0
        k += 1
    return rec[:k], (x, v, z, t, n, acc, th), status


TRACE_COLUMNS = ("t", "h", "x", "z", "g", "v", "acc", "theta_target", "jumped", "n")


@dataclass
class InternalParticle:
    """One bacterium with internal state.

    ``z`` is the deviation S(x) - y; the internal variable itself is
    ``particle.y(field)``.
    """

    x: float
    v: float
    z: float = 0.0
    t: float = 0.0
    n: int = 0
    acc: float = 0.0
    theta_target: float = math.nan

    def y(self, field: ChemoField) -> float:
        return float(_value(self.x, *field.arrays)) - self.z


def new_internal(x0: float, stream: CoupledStream, field: ChemoField,
                 v0: float | None = None, y0: float | None = None) -> InternalParticle:
    """Particle at time 0; v0 defaults to the stream's direction(0) and y0 to S(x0)."""
    v = stream.direction(0) if v0 is None else float(v0)
    z = 0.0 if y0 is None else float(_value(x0, *field.arrays)) - y0
    return InternalParticle(x=float(x0), v=v, z=z, theta_target=stream.theta(1))


def _kernel_args(params: ModelParams, field: ChemoField, domain: Domain):
    fa, fb, fc = field.arrays
    return (params.epsilon, params.tau, params.lambda0, params.b, params.kind_code,
            params.floor, params.dt, fa, fb, fc, domain.length, domain.bc_code)


def _substep_coeffs(p: InternalParticle, params: ModelParams, field: ChemoField):
    g = float(_gradient(p.x, *field.arrays))
    A, B = _coeffs(p.z, g, p.v, params.epsilon, params.tau, params.lambda0,
                   params.b, params.kind_code)
    return g, A, B


def substep_advance(p: InternalParticle, params: ModelParams, field: ChemoField,
                    h: float, domain: Domain | None = None) -> InternalParticle:
    """Move along a jump-free stretch of length h with the gradient frozen at the start."""
    if not h > 0:
        raise ValueError("h must be positive")
    g = float(_gradient(p.x, *field.arrays))
    zinf = params.epsilon * params.tau * g * p.v
    z = math.exp(-h / params.tau) * p.z - math.expm1(-h / params.tau) * zinf
    x = p.x + params.epsilon * p.v * h
    v = p.v
    if domain is not None:
        x, v = _apply_bc(x, v, domain.length, domain.bc_code)
    return replace(p, x=x, v=v, z=z, t=p.t + h)


def substep_rate_integral(p: InternalParticle, params: ModelParams,
                          field: ChemoField, h: float) -> float:
    """Integral of the (linearised, floored) turning rate over a substep of length h."""
    if not 0 < h <= params.dt * (1 + 1e-12):
        raise ValueError("h must lie in (0, dt]")
    g, A, B = _substep_coeffs(p, params, field)
    floor = params.floor
    if floor <= 0.0 and (A + B <= 0.0 or _raw_rate(A, B, params.tau, h) <= 0.0):
        raise_for_status(RATE_NONPOSITIVE, "substep_rate_integral")
    return float(_integral(A, B, params.tau, floor, h))


def solve_jump_time(p: InternalParticle, params: ModelParams, field: ChemoField,
                    residual: float) -> float:
    """Duration h* in (0, dt] after which the substep rate integral equals residual."""
    if not residual > 0:
        raise ValueError("residual must be positive")
    full = substep_rate_integral(p, params, field, params.dt)
    if full < residual:
        raise NoRootError(
            f"substep integral {full!r} is below the residual {residual!r}")
    g, A, B = _substep_coeffs(p, params, field)
    return float(_solve(A, B, params.tau, params.floor, residual, params.dt))


def advance_until(p: InternalParticle, params: ModelParams, field: ChemoField,
                  domain: Domain, t_end: float, stream: CoupledStream) -> InternalParticle:
    if t_end < p.t:
        raise ValueError("t_end is before the particle's clock")
    out = _internal_advance(p.x, p.v, p.z, p.t, p.n, p.acc, p.theta_target, float(t_end),
                            *_kernel_args(params, field, domain),
                            stream.master_seed, stream.particle_id)
    x, v, z, t, n, acc, th, status, _, _ = out
    raise_for_status(status, "internal process")
    return InternalParticle(x, v, z, t, int(n), acc, th)


def trace(p: InternalParticle, params: ModelParams, field: ChemoField, domain: Domain,
          t_end: float, stream: CoupledStream, max_records: int = 1_000_000):
    """Advance while recording every substep; returns (records, final particle).

    ``records`` has one row per substep with columns ``TRACE_COLUMNS``.
    """
    rec, st, status = _internal_trace(p.x, p.v, p.z, p.t, p.n, p.acc, p.theta_target,
                                      float(t_end), *_kernel_args(params, field, domain),
                                      stream.master_seed, stream.particle_id, max_records)
    raise_for_status(status, "internal trace")
    x, v, z, t, n, acc, th = st
    return rec, InternalParticle(x, v, z, t, int(n), acc, th)

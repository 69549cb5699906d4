"""Counter-based random streams shared by the coupled processes.

Every variate is a pure function of ``(master_seed, particle_id, index)``:
a Philox4x64-10 block is computed for the counter ``(index, particle_id,
purpose, 0)`` under the key ``(master_seed, 0)``. Word 0 of the block feeds
the exponential clock, word 1 the direction. Purposes other than jumps
(initial sampling, SDE noise) use distinct values of the third counter word,
so no two consumers ever share a block.

The block function matches ``numpy.random.Philox``: numpy increments the
counter before generating, so our block at counter ``c`` equals numpy's first
four outputs for ``counter = c - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S12 = np.uint64(12)
_S63 = np.uint64(63)
_ONE = np.uint64(1)

# third counter word: what the block is used for
PURPOSE_JUMP = 0
PURPOSE_INIT = 1
PURPOSE_SDE = 2

_TWO_M52 = 1.0 / 4503599627370496.0


@numba.njit(cache=True)
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


@numba.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; all arguments are uint64."""
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@numba.njit(cache=True)
def _to_open_unit(w):
    # (0, 1) exclusive at both ends; with 53 bits the top word would round to 1.0
    return (np.float64(w >> _S12) + 0.5) * _TWO_M52


@numba.njit(cache=True)
def _block(seed, pid, n, purpose):
    return philox4x64(
        np.uint64(n), np.uint64(pid), np.uint64(purpose), np.uint64(0),
        np.uint64(seed), np.uint64(0),
    )


@numba.njit(cache=True)
def _theta(seed, pid, n):
    w0, w1, w2, w3 = _block(seed, pid, n, PURPOSE_JUMP)
    return -np.log(_to_open_unit(w0))


@numba.njit(cache=True)
def _direction(seed, pid, n):
    w0, w1, w2, w3 = _block(seed, pid, n, PURPOSE_JUMP)
    return 1.0 if (w1 >> _S63) == _ONE else -1.0


@numba.njit(cache=True)
def _uniform(seed, pid, n, purpose):
    w0, w1, w2, w3 = _block(seed, pid, n, purpose)
    return _to_open_unit(w0)


@numba.njit(cache=True)
def _normal_pair(seed, pid, n, purpose):
    """Two independent N(0,1) variates by Box-Muller on words 2 and 3."""
    w0, w1, w2, w3 = _block(seed, pid, n, purpose)
    u1 = _to_open_unit(w2)
    u2 = _to_open_unit(w3)
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


@numba.njit(cache=True)
def _theta_many(seed, pid, ns):
    out = np.empty(ns.shape[0])
    for i in range(ns.shape[0]):
        out[i] = _theta(seed, pid, ns[i])
    return out


@numba.njit(cache=True)
def _direction_many(seed, pid, ns):
    out = np.empty(ns.shape[0])
    for i in range(ns.shape[0]):
        out[i] = _direction(seed, pid, ns[i])
    return out


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


@dataclass(frozen=True)
class CoupledStream:
    """The (theta_n, V_n) sequences of one particle.

    ``theta(n)`` is the n-th unit-mean exponential (n >= 1) and
    ``direction(n)`` the n-th velocity direction in {-1, +1} (n >= 0).
    """

    master_seed: int
    particle_id: int

    def __post_init__(self):
        _check_seed(self.master_seed)
        if self.particle_id < 0:
            raise ValueError("particle_id must be non-negative")

    def theta(self, n):
        if np.ndim(n):
            ns = np.asarray(n, dtype=np.int64)
            if np.any(ns < 1):
                raise ValueError("theta indices start at 1")
            return _theta_many(self.master_seed, self.particle_id, ns)
        if n < 1:
            raise ValueError("theta indices start at 1")
        return float(_theta(self.master_seed, self.particle_id, int(n)))

    def direction(self, n):
        if np.ndim(n):
            ns = np.asarray(n, dtype=np.int64)
            if np.any(ns < 0):
                raise ValueError("direction indices start at 0")
            return _direction_many(self.master_seed, self.particle_id, ns)
        if n < 0:
            raise ValueError("direction indices start at 0")
        return float(_direction(self.master_seed, self.particle_id, int(n)))

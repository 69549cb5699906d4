"""Reference implementations used only by the tests.

Nothing here imports the package's kernels: the random words come from
numpy's Philox, integrals from scipy quadrature or closed forms written out
independently, roots from brentq.
"""
import math

import numpy as np
from scipy import integrate, optimize

MASK64 = (1 << 64) - 1


def philox_words(seed, pid, n, purpose):
    """The four output words for counter (n, pid, purpose, 0), key (seed, 0)."""
    c = int(n) + (int(pid) << 64) + (int(purpose) << 128) - 1  # numpy bumps the counter first
    c &= (1 << 256) - 1
    counter = [(c >> (64 * k)) & MASK64 for k in range(4)]
    bg = np.random.Philox(counter=np.array(counter, dtype=np.uint64),
                          key=np.array([seed, 0], dtype=np.uint64))
    return [int(w) for w in bg.random_raw(4)]


def open_unit(w):
    return ((w >> 12) + 0.5) * 2.0 ** -52


def theta(seed, pid, n):
    return -math.log(open_unit(philox_words(seed, pid, n, 0)[0]))


def direction(seed, pid, n):
    return 1.0 if philox_words(seed, pid, n, 0)[1] >> 63 else -1.0


def gauss_field(x, terms):
    return sum(a * math.exp(-b * (x - c) ** 2) for a, b, c in terms)


def arctan_rate(z, lam0, b=1.0):
    return 2 * lam0 * (0.5 - math.atan(math.pi * b * z / (2 * lam0)) / math.pi)


def arctan_rate_slope(z, lam0, b=1.0):
    u = math.pi * b * z / (2 * lam0)
    return -b / (1 + u * u)


def z_closed(s, z0, g, v, eps, tau):
    return math.exp(-s / tau) * z0 + eps * tau * (1 - math.exp(-s / tau)) * g * v


def linear_substep_integral(h, z0, g, v, eps, tau, lam0, b):
    """lam0 h - b (1 - e^{-h/tau}) tau z0 - eps b (h tau - (1 - e^{-h/tau}) tau^2) g v."""
    q = 1 - math.exp(-h / tau)
    return lam0 * h - b * q * tau * z0 - eps * b * (h * tau - q * tau ** 2) * g * v


def quad_rate_integral(rate, h, epsabs=1e-14, epsrel=1e-13):
    val, _ = integrate.quad(rate, 0.0, h, epsabs=epsabs, epsrel=epsrel, limit=200)
    return val


def brent_root(fun, lo, hi):
    return optimize.brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def m_function(t, tau):
    return t * tau - (1 - math.exp(-t / tau)) * tau ** 2


def m_expectation_quad(tau, lam0):
    val, _ = integrate.quad(lambda th: m_function(th / lam0, tau) * math.exp(-th), 0, np.inf,
                            epsabs=1e-13, epsrel=1e-12)
    return val


def gaussian_cell_average(mesh_edges, mean, sd):
    from scipy.special import ndtr
    c = ndtr((mesh_edges - mean) / sd)
    return (c[1:] - c[:-1]) / np.diff(mesh_edges)

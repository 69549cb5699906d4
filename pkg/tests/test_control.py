import math

import numpy as np
import pytest

import oracles
from chemovr import control, internal
from chemovr.errors import RatePositivityError
from chemovr.field import ChemoField
from chemovr.model import Domain, ModelParams, m_expectation, m_function
from chemovr.streams import CoupledStream

FIELD = ChemoField.bimodal(2.0, 1.0)


def _grad(x):
    return sum(-2 * a * b * (x - c) * math.exp(-b * (x - c) ** 2)
               for a, b, c in zip(FIELD.alpha, FIELD.beta, FIELD.center))


def test_control_rate_formula():
    p = ModelParams(epsilon=0.3, tau=2.0, lambda0=1.5, b=0.7)
    coef = 0.7 * 2.0 / (1 + 1.5 * 2.0)
    for x in (3.0, 7.0, 9.4, 12.9):
        for v in (-1.0, 1.0):
            assert control.control_rate(p, FIELD, x, v) == pytest.approx(
                1.5 - 0.3 * coef * _grad(x) * v, rel=1e-14)
        assert control.drift_field(p, FIELD, x) == pytest.approx(coef * _grad(x), rel=1e-14)


def test_control_rate_floor_and_error():
    strong = ChemoField.bimodal(5.0, 1.0)
    p = ModelParams(epsilon=2.0, tau=1.0)
    assert control.min_control_rate(p, strong, Domain()) < 0
    with pytest.raises(RatePositivityError):
        control.control_rate(p, strong, np.linspace(0, 20, 101), 1.0)
    q = p.replace(rate_floor=0.05)
    assert control.control_rate(q, strong, np.linspace(0, 20, 101), 1.0).min() == 0.05


def test_min_control_rate_flat():
    p = ModelParams(lambda0=1.7)
    assert control.min_control_rate(p, ChemoField(), Domain()) == 1.7


def test_m_closed_form_against_quadrature():
    for tau, lam0 in ((1.0, 1.0), (0.3, 2.5), (4.0, 0.5)):
        assert m_expectation(tau, lam0) == pytest.approx(oracles.m_expectation_quad(tau, lam0),
                                                         abs=1e-12)
    t = np.array([0.5, 3.0])
    assert np.allclose(m_function(t, 1.3), [oracles.m_function(s, 1.3) for s in t], rtol=1e-12)
    # the naive form cancels for tiny t; compare with the series t^2/2 - t^3/(6 tau)
    assert m_function(1e-8, 1.3) == pytest.approx(0.5e-16 - 1e-24 / 7.8, rel=1e-12)


def test_m_identity_check_runs():
    th = CoupledStream(1, 0).theta(np.arange(1, 100_001))
    mean, se, closed = control.m_identity_check(1.0, 1.0, th)
    assert closed == 0.5 and abs(mean - closed) < 4 * se


def test_control_trace_integrals_hit_theta():
    p = ModelParams(epsilon=0.4, tau=1.0, dt=0.1)
    st = CoupledStream(3, 9)
    rec, end = control.trace(control.new_control(8.0, st), p, FIELD, Domain(), 100.0, st)
    coef = p.drift_coefficient
    integ = (p.lambda0 - p.epsilon * coef * rec[:, 3] * rec[:, 4]) * rec[:, 1]
    n = rec[:, 8].astype(int)
    sums = np.bincount(n, weights=integ)
    done = np.unique(n[rec[:, 7] > 0])
    th = np.array([oracles.theta(3, 9, k + 1) for k in done])
    assert np.max(np.abs(sums[done] - th)) < 1e-12
    assert end.n == len(done)
    assert end == control.advance_until(control.new_control(8.0, st), p, FIELD, Domain(), 100.0, st)


def test_constant_field_matches_internal_bitwise():
    flat = ChemoField()
    p = ModelParams(epsilon=0.5, tau=1.0, lambda0=1.2, dt=0.1)
    for pid in range(20):
        st = CoupledStream(11, pid)
        a = internal.advance_until(internal.new_internal(5.0, st, flat), p, flat, Domain(), 60.0, st)
        b = control.advance_until(control.new_control(5.0, st), p, flat, Domain(), 60.0, st)
        assert (a.x, a.v, a.t, a.n, a.acc, a.theta_target) == (b.x, b.v, b.t, b.n, b.acc, b.theta_target)

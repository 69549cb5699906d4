import numpy as np
import pytest

import oracles
from chemovr.field import ChemoField, _gradient, _value, gradient, value


def test_value_matches_reference():
    f = ChemoField.bimodal(5.0, 1.0)
    terms = list(zip(f.alpha, f.beta, f.center))
    for x in np.linspace(0, 20, 41):
        assert value(f, x) == pytest.approx(oracles.gauss_field(x, terms), rel=1e-14)


def test_gradient_matches_finite_difference():
    f = ChemoField(alpha=(2.0, 0.7), beta=(0.5, 3.0), center=(4.0, 11.0))
    x = np.linspace(0.3, 19.7, 97)
    h = 1e-5
    fd = (value(f, x + h) - value(f, x - h)) / (2 * h)
    assert np.allclose(gradient(f, x), fd, atol=1e-8)


def test_compiled_matches_numpy():
    f = ChemoField.bimodal(3.0, 2.0)
    for x in (0.0, 7.1, 9.99, 12.5, 20.0):
        assert _value(x, *f.arrays) == pytest.approx(value(f, x), rel=1e-15)
        assert _gradient(x, *f.arrays) == pytest.approx(gradient(f, x), rel=1e-14, abs=1e-300)


def test_bimodal_layout_and_symmetry():
    f = ChemoField.bimodal(5.0, 1.0)
    assert f.center == (7.5, 12.5)
    x = np.linspace(0, 10, 11)
    assert np.allclose(value(f, 10 - x), value(f, 10 + x))
    assert np.allclose(gradient(f, 10 - x), -gradient(f, 10 + x))


def test_terms_round_trip():
    f = ChemoField.bimodal(2.0, 0.5)
    assert ChemoField.from_terms(f.to_terms()) == f


def test_empty_field_is_constant():
    f = ChemoField()
    assert f.is_constant
    assert value(f, 3.0) == 0.0 and gradient(f, 3.0) == 0.0
    assert f.max_abs_gradient(0, 20) == 0.0
    assert ChemoField((0.0,), (1.0,), (5.0,)).is_constant


def test_max_abs_gradient():
    # single Gaussian: max |S'| = a * sqrt(2b) * exp(-1/2)
    f = ChemoField((3.0,), (2.0,), (10.0,))
    assert f.max_abs_gradient(0, 20, 200001) == pytest.approx(3 * np.sqrt(4.0) * np.exp(-0.5), rel=1e-8)


@pytest.mark.parametrize("kw", [dict(alpha=(1.0,), beta=(), center=(1.0,)),
                                dict(alpha=(-1.0,), beta=(1.0,), center=(1.0,)),
                                dict(alpha=(1.0,), beta=(0.0,), center=(1.0,))])
def test_invalid_fields(kw):
    with pytest.raises(ValueError):
        ChemoField(**kw)

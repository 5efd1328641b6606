import numpy as np
import pytest
from hypothesis import given, strategies as st

from slowqubits.numerics import Numerics, central_difference, spectral_derivative, step_for
from slowqubits.parallel import WORKERS_ENV, ordered_map, resolve_workers


def _square(x):
    return x * x


def test_central_difference_exact_on_quadratics():
    f = lambda X: X[0] ** 2 + 3 * X[0] * X[1]  # noqa: E731
    X = np.array([1.5, -2.0])
    d = central_difference(f, X, np.array([1.0, 0.0]), 1e-3)
    assert d == pytest.approx(2 * 1.5 + 3 * -2.0, rel=1e-9)


def test_central_difference_direction_not_normalized():
    f = lambda X: np.sin(X[0])  # noqa: E731
    d = central_difference(f, np.array([0.3]), np.array([2.0]), 1e-4)
    assert d == pytest.approx(2 * np.cos(0.3), rel=1e-8)
    assert central_difference(f, np.array([0.3]), np.array([0.0]), 1e-4) == 0.0


def test_richardson_order():
    f = lambda X: np.exp(X[0])  # noqa: E731
    X, v = np.array([0.2]), np.array([1.0])
    errs = [abs(central_difference(f, X, v, h, richardson=True) - np.exp(0.2)) for h in (0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.05)


@given(st.integers(1, 12), st.floats(0.5, 5))
def test_spectral_derivative_of_trig(k, period):
    t = np.arange(64) * period / 64
    w = 2 * np.pi * k / period
    d = spectral_derivative(np.stack([np.sin(w * t), np.cos(w * t)], axis=1), period)
    assert np.allclose(d[:, 0], w * np.cos(w * t), atol=1e-9 * w)
    assert np.allclose(d[:, 1], -w * np.sin(w * t), atol=1e-9 * w)


def test_step_for_scales_with_norm():
    assert step_for([0.1, 0.1], 1e-5) == 1e-5
    assert step_for([3.0, 4.0], 1e-5) == pytest.approx(5e-5)


@pytest.mark.parametrize("kw", [{"fd_step": 0.0}, {"nested_step": -1.0}, {"quadrature_rtol": 0.0}, {"nodes": 4}])
def test_numerics_validation(kw):
    with pytest.raises(ValueError):
        Numerics(**kw)


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert resolve_workers() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv(WORKERS_ENV, "many")
    with pytest.raises(ValueError, match="integer"):
        resolve_workers()
    with pytest.raises(ValueError, match="at least 1"):
        resolve_workers(0)


def test_ordered_map_keeps_order():
    items = list(range(23))
    assert ordered_map(_square, items, workers=2) == [x * x for x in items]
    assert ordered_map(_square, items, workers=1) == [x * x for x in items]

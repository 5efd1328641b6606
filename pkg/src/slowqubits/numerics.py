"""Finite differences, periodic spectral derivatives and the numerics settings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Numerics:
    """Step sizes and tolerances.

    ``fd_step`` is relative: the actual step is ``fd_step * max(1, |X|)``.
    Nested derivatives (second-order response, Omega kernels) always use the
    fourth-order Richardson stencil with ``nested_step`` at both levels.
    """

    fd_step: float = 1e-5
    richardson: bool = False
    nested_step: float = 1e-3
    quadrature_rtol: float = 1e-7
    nodes: int = 2048

    def __post_init__(self):
        for name in ("fd_step", "nested_step", "quadrature_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"numerics.{name} must be positive")
        if self.nodes < 8:
            raise ValueError("numerics.nodes must be at least 8")


DEFAULT = Numerics()


def step_for(X, rel: float) -> float:
    return rel * max(1.0, float(np.linalg.norm(X)))


def central_difference(f, X, v, h: float, richardson: bool = False):
    """Derivative of ``f`` at ``X`` along ``v`` (not normalized).

    The displacement has length ``h``; with ``richardson`` the
    fourth-order combination of steps h and h/2 is returned.
    """
    X = np.asarray(X, dtype=float)
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0 * f(X)
    s = h / norm
    d1 = (f(X + s * v) - f(X - s * v)) / (2 * s)
    if not richardson:
        return d1
    d2 = (f(X + 0.5 * s * v) - f(X - 0.5 * s * v)) / s
    return (4 * d2 - d1) / 3


def spectral_derivative(values: np.ndarray, period: float) -> np.ndarray:
    """d/dt of uniformly sampled periodic data (axis 0) via FFT."""
    values = np.asarray(values)
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=period / n) * 2j * np.pi
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = (n,) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(k.reshape(shape) * np.fft.fft(values, axis=0), axis=0)
    return out.real if np.isrealobj(values) else out

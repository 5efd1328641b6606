"""Frozen solution at a control point: basis, channels, generator, steady state."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .lattice import SystemConfig, hamiltonian, hamiltonian_gradient
from .lindblad import (
    FrozenBasis,
    Superoperator,
    channel_stack,
    dissipator,
    eigendecompose,
    TracelessSolver,
    lindbladian,
    steady_state,
)


@dataclass(frozen=True, eq=False)
class FrozenSolution:
    X: np.ndarray
    H: np.ndarray = field(repr=False)
    basis: FrozenBasis = field(repr=False)
    channels: tuple = field(repr=False)  # per bath: (frequencies, eigenoperator stack)
    dissipators: tuple = field(repr=False)
    generator: Superoperator = field(repr=False)
    rho: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def solver(self) -> TracelessSolver:
        cached = self.__dict__.get("_solver")
        if cached is None:
            cached = TracelessSolver(self.generator)
            object.__setattr__(self, "_solver", cached)
        return cached

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Apply the traceless-subspace inverse of the generator."""
        return self.solver(y)

    @property
    def dissipator_stack(self) -> np.ndarray:
        return np.stack([d.matrix for d in self.dissipators])

    def heat(self, rho: np.ndarray) -> np.ndarray:
        """Per-bath Tr{D_a[rho] H}."""
        v = rho.reshape(-1, order="F")
        Hv = self.H.T.reshape(-1, order="F")  # Tr(A H) = vec(H^T) . vec(A)
        return np.array([np.dot(Hv, d.matrix @ v).real for d in self.dissipators])


def _assemble(config: SystemConfig, X):
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"control point has non-finite entries: {X}")
    H = hamiltonian(config, X)
    basis = eigendecompose(H, rtol=config.degeneracy_rtol)
    channels = tuple(channel_stack(basis, bath.operator) for bath in config.baths)
    diss = tuple(dissipator(bath, ch, basis) for bath, ch in zip(config.baths, channels))
    gen = lindbladian(basis.hamiltonian, diss)
    return X, basis, channels, diss, gen


def generator_parts(config: SystemConfig, X) -> tuple:
    """(generator matrix, per-bath dissipator matrices) without solving for rho."""
    _, _, _, diss, gen = _assemble(config, X)
    return gen.matrix, np.stack([d.matrix for d in diss])


def build_frozen(config: SystemConfig, X) -> FrozenSolution:
    X, basis, channels, diss, gen = _assemble(config, X)
    rho = steady_state(gen).rho
    return FrozenSolution(X.copy(), basis.hamiltonian, basis, channels, diss, gen, rho)


class _Cache:
    def __init__(self, size: int = 4096):
        self.size = size
        self.data: OrderedDict = OrderedDict()

    def get(self, config: SystemConfig, X) -> FrozenSolution:
        X = np.asarray(X, dtype=float)
        key = (id(config), X.tobytes())
        hit = self.data.get(key)
        if hit is not None and hit[0] is config:
            self.data.move_to_end(key)
            return hit[1]
        sol = build_frozen(config, X)
        self.data[key] = (config, sol)
        if len(self.data) > self.size:
            self.data.popitem(last=False)
        return sol

    def clear(self):
        self.data.clear()


_CACHE = _Cache()


def frozen(config: SystemConfig, X) -> FrozenSolution:
    """Memoized frozen solution (keyed on config identity and the exact X bytes)."""
    return _CACHE.get(config, X)


def clear_cache():
    _CACHE.clear()


def gradient(config: SystemConfig, X) -> list:
    return hamiltonian_gradient(config, X)

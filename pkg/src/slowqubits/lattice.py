"""Spin operators, tensor embedding and the driven qubit-chain Hamiltonian.

Control points are plain float arrays.  Two layouts are accepted:

* ``(B_x, B_z)``: the field on qubit 1; every further qubit sees ``eta`` times
  that field.
* ``3 * n_qubits`` numbers: one ``(B_x, B_y, B_z)`` vector per qubit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np

_PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis) -> np.ndarray:
    """Return the 2x2 Pauli matrix for ``axis`` in {0, 'x', 'y', 'z'}."""
    key = str(axis).lower()
    if key not in _PAULI:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of 0, x, y, z")
    return _PAULI[key].copy()


def spin(axis) -> np.ndarray:
    """Spin-1/2 operator S = sigma / 2."""
    return 0.5 * pauli(axis)


def embed(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Place a single-qubit operator on ``site`` of an ``n_qubits`` register."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"embed expects a 2x2 operator, got shape {op.shape}")
    if not 0 <= site < n_qubits:
        raise ValueError(f"site {site} out of range for {n_qubits} qubits")
    eye = np.eye(2, dtype=complex)
    return reduce(np.kron, [op if k == site else eye for k in range(n_qubits)])


@dataclass(frozen=True, eq=False)
class BathSpec:
    """One bosonic bath: coupling g, temperature T, cutoff omega_c, operator pi."""

    label: str
    g: float
    T: float
    omega_c: float
    operator: np.ndarray = field(repr=False)

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        object.__setattr__(self, "operator", op)
        if not self.g > 0:
            raise ValueError(f"bath {self.label}: g must be positive, got {self.g}")
        if not self.T > 0:
            raise ValueError(f"bath {self.label}: T must be positive, got {self.T}")
        if not self.omega_c > 0:
            raise ValueError(f"bath {self.label}: omega_c must be positive, got {self.omega_c}")
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"bath {self.label}: coupling operator must be square")
        if np.linalg.norm(op - op.conj().T) > 1e-12 * max(1.0, np.linalg.norm(op)):
            raise ValueError(f"bath {self.label}: coupling operator must be Hermitian")


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Qubit chain with Heisenberg exchange J, field ratio eta and coupling ratio b.

    ``field_scale`` multiplies the Zeeman term: 1 gives ``-B.S``, 2 gives the
    Pauli normalisation ``-B.sigma``.
    """

    n_qubits: int
    J: float = 0.0
    eta: float = 1.0
    b: float = 1.0
    baths: tuple = ()
    field_scale: float = 1.0
    degeneracy_rtol: float = 1e-9

    def __post_init__(self):
        if not self.degeneracy_rtol > 0:
            raise ValueError(f"degeneracy_rtol must be positive, got {self.degeneracy_rtol}")
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError(f"n_qubits must be a positive integer, got {self.n_qubits}")
        object.__setattr__(self, "baths", tuple(self.baths))
        if not self.baths:
            raise ValueError("at least one bath is required")
        dim = 2 ** self.n_qubits
        labels = [bath.label for bath in self.baths]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate bath labels: {labels}")
        for bath in self.baths:
            if bath.operator.shape != (dim, dim):
                raise ValueError(
                    f"bath {bath.label}: operator shape {bath.operator.shape} "
                    f"does not match Hilbert dimension {dim}"
                )

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def n_params(self) -> int:
        return 2

    def bath(self, label: str) -> BathSpec:
        for bath in self.baths:
            if bath.label == label:
                return bath
        raise KeyError(f"no bath labelled {label!r}; have {[b.label for b in self.baths]}")

    def bath_index(self, label: str) -> int:
        return [b.label for b in self.baths].index(self.bath(label).label)


def _site_weights(config: SystemConfig, ratio: float) -> np.ndarray:
    w = np.full(config.n_qubits, float(ratio))
    w[0] = 1.0
    return w


def field_vectors(config: SystemConfig, X) -> np.ndarray:
    """Per-qubit field vectors (n_qubits, 3) for a control point."""
    X = np.asarray(X, dtype=float)
    n = config.n_qubits
    if X.shape == (2,):
        base = np.array([X[0], 0.0, X[1]])
        return np.outer(_site_weights(config, config.eta), base)
    if X.shape == (3 * n,):
        return X.reshape(n, 3)
    raise ValueError(
        f"control point has {X.size} components; expected 2 or {3 * n} for {n} qubits"
    )


@lru_cache(maxsize=64)
def _zeeman_ops(n: int) -> tuple:
    return tuple(tuple(embed(spin(a), k, n) for a in "xyz") for k in range(n))


@lru_cache(maxsize=256)
def _affine_parts(config: SystemConfig, layout: int):
    """H(X) = H0 + sum_j X_j G_j; cached per config (identity-hashed)."""
    n = config.n_qubits
    ops = _zeeman_ops(n)
    H0 = np.zeros((config.dim, config.dim), dtype=complex)
    if config.J != 0.0:
        for k in range(n - 1):
            H0 += config.J * sum(ops[k][a] @ ops[k + 1][a] for a in range(3))
    if layout == 2:
        w = _site_weights(config, config.eta)
        gx = -config.field_scale * sum(w[k] * ops[k][0] for k in range(n))
        gz = -config.field_scale * sum(w[k] * ops[k][2] for k in range(n))
        G = np.stack([gx, gz])
    else:
        G = np.stack([-config.field_scale * ops[k][a] for k in range(n) for a in range(3)])
    H0.setflags(write=False)
    G.setflags(write=False)
    return H0, G


def _layout(config: SystemConfig, X: np.ndarray) -> int:
    n = config.n_qubits
    if X.shape == (2,):
        return 2
    if X.shape == (3 * n,):
        return 3 * n
    raise ValueError(
        f"control point has {X.size} components; expected 2 or {3 * n} for {n} qubits"
    )


def hamiltonian(config: SystemConfig, X) -> np.ndarray:
    """H = -field_scale * sum_k B_k.S_k + J sum_k S_k.S_{k+1}."""
    X = np.asarray(X, dtype=float)
    H0, G = _affine_parts(config, _layout(config, X))
    return H0 + np.tensordot(X, G, axes=1)


def hamiltonian_gradient(config: SystemConfig, X) -> list:
    """Exact partial derivatives dH/dX_j (H is linear in the fields)."""
    X = np.asarray(X, dtype=float)
    _, G = _affine_parts(config, _layout(config, X))
    return list(G)


def coupling_operators(n_qubits, b: float = 1.0) -> tuple:
    """(pi_L, pi_R): x-spins couple to L, z-spins to R; qubit 1 has weight 1, the rest b.

    ``n_qubits`` may also be a SystemConfig, whose own ``b`` is then used.
    """
    if isinstance(n_qubits, SystemConfig):
        n_qubits, b = n_qubits.n_qubits, n_qubits.b
    w = np.full(n_qubits, float(b))
    w[0] = 1.0
    pi_L = sum(w[k] * embed(spin("x"), k, n_qubits) for k in range(n_qubits))
    pi_R = sum(w[k] * embed(spin("z"), k, n_qubits) for k in range(n_qubits))
    return pi_L, pi_R


def chain_config(
    n_qubits: int = 2,
    J: float = 0.0,
    eta: float = 1.0,
    b: float = 1.0,
    g=1e-3,
    T=1.0,
    omega_c=120.0,
    field_scale: float = 1.0,
    degeneracy_rtol: float = 1e-9,
) -> SystemConfig:
    """Convenience constructor for the two-bath chain.

    ``g``, ``T`` and ``omega_c`` may be scalars or ``(L, R)`` pairs.
    """

    def pair(v):
        return tuple(v) if np.ndim(v) else (v, v)

    pi_L, pi_R = coupling_operators(n_qubits, b)
    gs, Ts, wcs = pair(g), pair(T), pair(omega_c)
    baths = (
        BathSpec("L", gs[0], Ts[0], wcs[0], pi_L),
        BathSpec("R", gs[1], Ts[1], wcs[1], pi_R),
    )
    return SystemConfig(n_qubits, J, eta, b, baths, field_scale, degeneracy_rtol)

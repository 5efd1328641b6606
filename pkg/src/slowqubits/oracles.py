"""Closed-form references: one driven qubit, uncoupled qubit registers, and the
split of a two-qubit heat current into single-qubit and correlated parts.

Single-qubit conventions (matching the chain Hamiltonian): h = -kappa B.S with
S = sigma/2, so the levels are -/+ eps with eps = kappa |B| / 2 and the
Bohr frequency is 2 eps.  A bath couples through a.S; only the component of
a transverse to B drives transitions, with |xi|^2 = (|a|^2 - (a.n)^2) / 4.

Bloch equation in the laboratory frame, r = <sigma>:

    dr/dt = omega x r - G_par (r_par - r_eq) - G_perp r_perp

with omega = -kappa B, G_par = sum_a g_a^2 |xi_a|^2 (gamma_a(2 eps) + gamma_a(-2 eps)),
G_perp = G_par / 2 + sum_a g_a^2 gamma_a(0) (a.n)^2 / 2 and r_eq = tanh(eps / T) n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import BathSpec, SystemConfig, embed, field_vectors, pauli
from .lindblad import (
    TracelessSolver,
    channel_stack,
    dissipator,
    eigendecompose,
    lindbladian,
    ohmic_rate,
)

_SIGMA = np.stack([pauli("x"), pauli("y"), pauli("z")])


@dataclass(frozen=True)
class QubitBath:
    """Bath as seen by one qubit: coupling a.S with strength g."""

    label: str
    g: float
    T: float
    omega_c: float
    a: np.ndarray  # 3-vector

    def rate(self, w: float, cutoff: bool = True) -> float:
        return ohmic_rate(w, self.T, self.omega_c if cutoff else np.inf)


@dataclass(frozen=True)
class BlochState:
    r: np.ndarray
    frame: str  # "laboratory" or "eigenbasis"

    def __post_init__(self):
        if self.frame not in ("laboratory", "eigenbasis"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if np.linalg.norm(self.r) > 1 + 1e-12:
            raise ValueError(f"Bloch vector longer than 1: |r| = {np.linalg.norm(self.r)}")

    def density(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.tensordot(self.r, _SIGMA, axes=1))


def _unit(B):
    B = np.asarray(B, dtype=float)
    nb = float(np.linalg.norm(B))
    return B, nb, (B / nb if nb > 0 else np.zeros(3))


def _common_T(baths) -> float:
    temps = {b.T for b in baths}
    if len(temps) != 1:
        raise ValueError("closed form needs all baths at one temperature")
    return temps.pop()


def single_qubit_rates(B, baths, kappa: float = 2.0, cutoff: bool = True) -> tuple:
    """(Gamma_a per bath, G_par, G_perp) at field B."""
    B, nb, n = _unit(B)
    eps = 0.5 * kappa * nb
    gam, deph = [], 0.0
    for bath in baths:
        a = np.asarray(bath.a, dtype=float)
        an = float(a @ n) if nb > 0 else 0.0
        xi2 = 0.25 * (a @ a - an * an) if nb > 0 else 0.25 * (a @ a)
        gam.append(bath.g ** 2 * xi2 * (bath.rate(2 * eps, cutoff) + bath.rate(-2 * eps, cutoff)))
        deph += 0.5 * bath.g ** 2 * bath.rate(0.0, cutoff) * an * an
    gam = np.array(gam)
    return gam, float(gam.sum()), float(0.5 * gam.sum() + deph)


def single_qubit_steady(B, baths, kappa: float = 2.0, frame: str = "laboratory",
                        cutoff: bool = True) -> BlochState:
    """Frozen Bloch vector; with unequal temperatures the Gamma-weighted mean of tanh."""
    B, nb, n = _unit(B)
    if nb == 0:
        return BlochState(np.zeros(3), frame)
    eps = 0.5 * kappa * nb
    gam, total, _ = single_qubit_rates(B, baths, kappa, cutoff)
    if total <= 0:
        raise ValueError("no bath drives transitions at this field; steady state not unique")
    mag = float(np.sum(gam * np.tanh([eps / b.T for b in baths])) / total)
    r = mag * n if frame == "laboratory" else np.array([0.0, 0.0, mag])
    return BlochState(r, frame)


def _frozen_rate(B, Bdot, T, kappa):
    """d r_f / dt in the lab frame and dS_f/dt, at one temperature."""
    B, nb, n = _unit(B)
    Bdot = np.asarray(Bdot, dtype=float)
    eps = 0.5 * kappa * nb
    x = eps / T
    th = np.tanh(x)
    deps = 0.5 * kappa * float(n @ Bdot)
    dth = (1 - th * th) * deps / T
    dn = (Bdot - n * (n @ Bdot)) / nb
    return dth * n + th * dn, -x * dth


def single_qubit_rho1(B, Bdot, baths, kappa: float = 2.0, cutoff: bool = True) -> BlochState:
    """Lab-frame Bloch vector r1 of the first-order correction rho1 = r1.sigma / 2.

    Solves the homogeneous Bloch generator against d r_f / dt.
    """
    B, nb, n = _unit(B)
    if nb == 0:
        raise ValueError("first-order correction is undefined at B = 0")
    T = _common_T(baths)
    drf, _ = _frozen_rate(B, Bdot, T, kappa)
    _, gpar, gperp = single_qubit_rates(B, baths, kappa, cutoff)
    omega = -kappa * B
    cross = np.array([[0, -omega[2], omega[1]], [omega[2], 0, -omega[0]], [-omega[1], omega[0], 0]])
    P = np.outer(n, n)
    M = cross - gpar * P - gperp * (np.eye(3) - P)
    r1 = np.linalg.solve(M, drf)
    # r1 is a linear response, not a state; bypass the |r| <= 1 check
    obj = BlochState.__new__(BlochState)
    object.__setattr__(obj, "r", r1)
    object.__setattr__(obj, "frame", "laboratory")
    return obj


def single_qubit_heat1(B, Bdot, baths, kappa: float = 2.0, cutoff: bool = True) -> np.ndarray:
    """J^(1)_a = (Gamma_a / sum Gamma) T dS_f/dt with dS_f/dt = -(eps/T) d tanh(eps/T)/dt."""
    B, nb, n = _unit(B)
    if nb == 0:
        raise ValueError("first-order current is undefined at B = 0")
    T = _common_T(baths)
    gam, total, _ = single_qubit_rates(B, baths, kappa, cutoff)
    if total <= 0:
        raise ValueError("no bath drives transitions; the current split is undefined")
    _, dS = _frozen_rate(B, Bdot, T, kappa)
    return gam / total * T * dS


def single_qubit_entropy_rate(B, Bdot, T: float, kappa: float = 2.0) -> float:
    return _frozen_rate(B, Bdot, T, kappa)[1]


# uncoupled registers -------------------------------------------------------------------

def partial_trace(rho: np.ndarray, keep: int, n_qubits: int) -> np.ndarray:
    """Reduced 2x2 state of one qubit."""
    t = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n_qubits))
    order = [keep, n_qubits + keep] + [k for k in range(2 * n_qubits) if k not in (keep, n_qubits + keep)]
    t = t.transpose(order).reshape(2, 2, 2 ** (n_qubits - 1), 2 ** (n_qubits - 1))
    return np.einsum("abkk->ab", t)


def local_part(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Traceless single-site part of an operator: Tr_{others}(op)/2^(n-1) minus its trace."""
    red = partial_trace(op, site, n_qubits) / 2 ** (n_qubits - 1)
    return red - 0.5 * np.trace(red) * np.eye(2)


def spin_vector(op2: np.ndarray) -> np.ndarray:
    """a with op2 = a.S + c I (op2 Hermitian 2x2)."""
    return np.array([np.trace(op2 @ s).real for s in _SIGMA])


def qubit_baths(config: SystemConfig, site: int) -> list:
    """Per-qubit view of the register's baths (coupling vector a per bath)."""
    out = []
    for bath in config.baths:
        loc = local_part(bath.operator, site, config.n_qubits)
        out.append(QubitBath(bath.label, bath.g, bath.T, bath.omega_c, spin_vector(loc)))
    return out


def _check_local(op: np.ndarray, n: int, what: str):
    recon = sum(embed(local_part(op, k, n), k, n) for k in range(n))
    recon = recon + np.trace(op) / op.shape[0] * np.eye(op.shape[0])
    if np.linalg.norm(recon - op) > 1e-10 * max(1.0, np.linalg.norm(op)):
        raise ValueError(f"{what} is not a sum of single-qubit terms")


@dataclass(frozen=True, eq=False)
class ProductSolution:
    rho_f: np.ndarray
    rho1: np.ndarray
    heat1: np.ndarray  # (n_qubits, n_baths)
    entropy_rate: np.ndarray  # per qubit dS_f/dt
    qubits: tuple  # per-qubit (r_f, r1) Bloch vectors

    @property
    def total_heat1(self) -> np.ndarray:
        return self.heat1.sum(axis=0)


def _kron_all(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def product_state_solver(config: SystemConfig, X, Xdot, cutoff: bool = True) -> ProductSolution:
    """Frozen state, first-order correction and currents of an uncoupled register.

    Every qubit is solved with the single-qubit Bloch formulas; the register
    state is the tensor product and the currents add.
    """
    if config.J != 0:
        raise ValueError(f"product-state solution needs J = 0, got J = {config.J}")
    n = config.n_qubits
    for bath in config.baths:
        _check_local(bath.operator, n, f"coupling operator of bath {bath.label}")
    fields = field_vectors(config, X)
    Xdot = np.asarray(Xdot, dtype=float)
    dfields = field_vectors(config, Xdot) if Xdot.shape == np.asarray(X).shape else None
    if dfields is None:
        raise ValueError("X and Xdot must have the same layout")
    kappa = config.field_scale
    rf, r1, heat, dS = [], [], [], []
    T = _common_T(config.baths)
    for k in range(n):
        baths = qubit_baths(config, k)
        rf.append(single_qubit_steady(fields[k], baths, kappa, cutoff=cutoff).r)
        r1.append(single_qubit_rho1(fields[k], dfields[k], baths, kappa, cutoff).r)
        heat.append(single_qubit_heat1(fields[k], dfields[k], baths, kappa, cutoff))
        dS.append(single_qubit_entropy_rate(fields[k], dfields[k], T, kappa))
    rho_q = [0.5 * (np.eye(2) + np.tensordot(r, _SIGMA, axes=1)) for r in rf]
    rho1_q = [0.5 * np.tensordot(r, _SIGMA, axes=1) for r in r1]
    rho_f = _kron_all(rho_q)
    rho1 = sum(_kron_all([rho1_q[j] if j == k else rho_q[j] for j in range(n)]) for k in range(n))
    return ProductSolution(rho_f, rho1, np.array(heat), np.array(dS), tuple(zip(rf, r1)))


# correlated currents -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelationSplit:
    labels: tuple
    J_q1: np.ndarray  # per bath
    J_q2: np.ndarray
    J_12: np.ndarray
    J_total: np.ndarray  # engine value Tr{D_a[rho1] H}
    terms_12: np.ndarray  # (3, n_baths): the two interaction-energy terms and the remainder
    delta_R: np.ndarray  # 3x3 correlation matrix of rho_f
    bloch: tuple  # reduced Bloch vectors (r_q1, r_q2)

    @property
    def residual(self) -> float:
        scale = max(1e-300, float(np.max(np.abs(self.J_total))))
        return float(np.max(np.abs(self.J_q1 + self.J_q2 + self.J_12 - self.J_total)) / scale)


def _qubit_generator(h, baths_ops, config):
    basis = eigendecompose(h)
    diss = []
    for bath, op in zip(config.baths, baths_ops):
        spec = BathSpec(bath.label, bath.g, bath.T, bath.omega_c, op)
        diss.append(dissipator(spec, channel_stack(basis, op), basis))
    return lindbladian(basis.hamiltonian, diss), diss


def _sop(S, rho):
    n = rho.shape[0]
    return (S.matrix @ rho.reshape(-1, order="F")).reshape(n, n, order="F")


def correlation_current_split(config: SystemConfig, X, Xdot, numerics=None) -> CorrelationSplit:
    """Split J^(1)_a of a two-qubit register into single-qubit and correlated parts.

    Single-qubit parts use the reduced states and the local generators
    L_qj built from h_j and the local coupling operators:
    rho1_qj = L_qj^{-1} d(rho_qj)/dt and J_qj = Tr{D_qj[rho1_qj] h_j}.
    The correlated part collects the interaction-energy terms and the
    remainder Tr{(D_a[rho1] - D_q1[rho1_q1] x rho_q2 - rho_q1 x D_q2[rho1_q2]) H}.
    """
    from .numerics import DEFAULT
    from .response import LocalExpansion

    if config.n_qubits != 2:
        raise ValueError("the correlation split is defined for two qubits")
    numerics = DEFAULT if numerics is None else numerics
    loc = LocalExpansion(config, X, numerics, order=1)
    Xdot = np.asarray(Xdot, dtype=float)
    rho = loc.sol.rho
    H = loc.sol.H
    drho = loc.drho_f(Xdot)
    rho1 = loc.rho1(Xdot)
    J_total = loc.sol.heat(rho1)

    h = [local_part(H, k, 2) for k in range(2)]
    h_int = H - np.kron(h[0], np.eye(2)) - np.kron(np.eye(2), h[1]) - np.trace(H) / 4 * np.eye(4)
    rq = [partial_trace(rho, k, 2) for k in range(2)]
    drq = [partial_trace(drho, k, 2) for k in range(2)]
    Dq1, Dq2 = [], []
    rho1_q = []
    for k in range(2):
        ops = [local_part(b.operator, k, 2) for b in config.baths]
        Lq, dq = _qubit_generator(h[k], ops, config)
        rho1_q.append(TracelessSolver(Lq)(0.5 * (drq[k] + drq[k].conj().T)))
        (Dq1 if k == 0 else Dq2).extend(dq)

    labels = tuple(b.label for b in config.baths)
    J1 = np.zeros(len(labels))
    J2 = np.zeros(len(labels))
    terms = np.zeros((3, len(labels)))
    for a, D in enumerate(loc.sol.dissipators):
        d1 = _sop(Dq1[a], rho1_q[0])
        d2 = _sop(Dq2[a], rho1_q[1])
        J1[a] = np.trace(d1 @ h[0]).real
        J2[a] = np.trace(d2 @ h[1]).real
        A1 = np.kron(d1, rq[1])
        A2 = np.kron(rq[0], d2)
        terms[0, a] = np.trace(A1 @ h_int).real
        terms[1, a] = np.trace(A2 @ h_int).real
        full = (D.matrix @ rho1.reshape(-1, order="F")).reshape(4, 4, order="F")
        terms[2, a] = np.trace((full - A1 - A2) @ H).real
    J12 = terms.sum(axis=0)

    r = [spin_vector(m) for m in rq]  # reduced Bloch vectors (Tr rho_q sigma)
    corr = np.array([[np.trace(rho @ np.kron(si, sj)).real for sj in _SIGMA] for si in _SIGMA])
    delta_R = corr - np.outer(r[0], r[1])
    return CorrelationSplit(labels, J1, J2, J12, J_total, terms, delta_R, tuple(r))

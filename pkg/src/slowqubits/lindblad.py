"""Frozen-Hamiltonian Lindbladian in the secular (Davies) form.

Vectorization is column stacking throughout: ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGENERACY_RTOL = 1e-9


class DegenerateKernelError(ValueError):
    """The generator has more than one stationary state."""

    def __init__(self, dimension: int, detail: str = ""):
        self.dimension = dimension
        msg = f"Lindbladian kernel has dimension {dimension}; the steady state is not unique"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class SingularOperatorError(ValueError):
    """The generator is not invertible on the traceless subspace."""


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if n is None:
        n = int(round(np.sqrt(v.shape[0])))
    return v.reshape((n, n) + v.shape[1:], order="F")


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.shape[0], b.shape[0]
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(n * m, n * m)


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X."""
    return _kron(np.eye(a.shape[0]), a)


def spost(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> X A."""
    return _kron(a.T, np.eye(a.shape[0]))


def _tolerance(values: np.ndarray, rtol: float) -> float:
    span = float(values.max() - values.min()) if values.size else 0.0
    return rtol * max(1.0, span)


@dataclass(frozen=True, eq=False)
class FrozenBasis:
    """Distinct eigenvalues (ascending) and their spectral projectors.

    ``vectors`` and ``level`` hold the eigenvectors and the level index of each;
    only projector-level (gauge-free) combinations leave this class.
    """

    energies: np.ndarray
    hamiltonian: np.ndarray = field(repr=False)
    tol: float = 0.0
    vectors: np.ndarray = field(default=None, repr=False)
    level: np.ndarray = field(default=None, repr=False)

    @property
    def projectors(self) -> tuple:
        V, lev = self.vectors, self.level
        return tuple(V[:, lev == k] @ V[:, lev == k].conj().T for k in range(len(self.energies)))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def reconstruct(self) -> np.ndarray:
        return sum(e * p for e, p in zip(self.energies, self.projectors))


def eigendecompose(H: np.ndarray, degeneracy_tol: float | None = None,
                   rtol: float = DEGENERACY_RTOL) -> FrozenBasis:
    """Spectral projectors of a Hermitian matrix, merging near-equal eigenvalues.

    ``degeneracy_tol`` is absolute; without it the tolerance is
    ``rtol * max(1, spectral range)``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {H.shape}")
    scale = max(1.0, np.linalg.norm(H))
    if np.linalg.norm(H - H.conj().T) > 1e-10 * scale:
        raise ValueError("Hamiltonian is not Hermitian")
    H = 0.5 * (H + H.conj().T)
    evals, evecs = np.linalg.eigh(H)
    tol = _tolerance(evals, rtol) if degeneracy_tol is None else degeneracy_tol
    level = np.concatenate([[0], np.cumsum(np.diff(evals) > tol)])
    nlev = level[-1] + 1
    energies = np.bincount(level, weights=evals, minlength=nlev) / np.bincount(level)
    return FrozenBasis(energies, H, tol, evecs, level)


@dataclass(frozen=True, eq=False)
class BohrChannel:
    frequency: float
    operator: np.ndarray = field(repr=False)


def _cluster(values: np.ndarray, tol: float) -> tuple:
    """Chain-cluster values; returns (labels, centers) with centers ascending."""
    order = np.argsort(values, kind="stable")
    srt = values[order]
    ids = np.concatenate([[0], np.cumsum(np.diff(srt) > tol)])
    labels = np.empty(len(values), dtype=int)
    labels[order] = ids
    counts = np.bincount(ids)
    centers = np.bincount(ids, weights=srt) / counts
    return labels, centers


def channel_stack(basis: FrozenBasis, pi: np.ndarray) -> tuple:
    """Bohr frequencies (ascending) and the matching stack of eigenoperators."""
    pi = np.asarray(pi, dtype=complex)
    eps = basis.energies
    tol = basis.tol if basis.tol > 0 else _tolerance(eps, DEGENERACY_RTOL)
    V, lev = basis.vectors, basis.level
    # Bohr frequency of each level pair (l, m) is eps_m - eps_l
    pair_label, centers = _cluster((eps[None, :] - eps[:, None]).ravel(), tol)
    nlev = len(eps)
    elem_label = pair_label.reshape(nlev, nlev)[lev[:, None], lev[None, :]]
    A = V.conj().T @ pi @ V
    masks = elem_label[None, :, :] == np.arange(len(centers))[:, None, None]
    blocks = np.where(masks, A[None], 0.0)
    keep = np.abs(blocks).reshape(len(centers), -1).max(axis=1) > 0
    ops = V[None] @ blocks[keep] @ V.conj().T[None]
    freqs = np.where(np.abs(centers[keep]) <= tol, 0.0, centers[keep])
    return freqs, ops


def bohr_channels(basis: FrozenBasis, pi: np.ndarray) -> list:
    """Eigenoperators pi_w = sum over eps_m - eps_l = w of P_l pi P_m, sorted by w."""
    freqs, ops = channel_stack(basis, pi)
    return [BohrChannel(float(w), op) for w, op in zip(freqs, ops)]


def ohmic_rates(omega: np.ndarray, T: float, omega_c: float) -> np.ndarray:
    """Vectorized :func:`ohmic_rate`."""
    omega = np.asarray(omega, dtype=float)
    a = np.abs(omega)
    safe = np.where(a > 0, a, 1.0)
    up = safe / -np.expm1(-safe / T)
    down = safe / np.expm1(safe / T)
    rate = np.where(omega > 0, up, down) * np.exp(-a / omega_c)
    return np.where(omega == 0, float(T), rate)


def ohmic_rate(omega: float, T: float, omega_c: float) -> float:
    """Ohmic emission/absorption rate with exponential cutoff; gamma(0) = T."""
    if omega == 0.0:
        return float(T)
    a = abs(omega)
    cut = np.exp(-a / omega_c)
    if omega > 0:
        return float(a / -np.expm1(-a / T) * cut)
    return float(a / np.expm1(a / T) * cut)


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Matrix acting on column-stacked operators, tagged with its role."""

    matrix: np.ndarray = field(repr=False)
    role: str
    hamiltonian: np.ndarray | None = field(default=None, repr=False)
    dissipative: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.dim
        return unvec(self.matrix @ vec(rho), n)


def _dissipator_matrix(jumps) -> np.ndarray:
    Ls = np.asarray(jumps)
    n = Ls.shape[1]
    # sum_k conj(L_k) kron L_k
    D = (Ls.conj()[:, :, None, :, None] * Ls[:, None, :, None, :]).sum(axis=0).reshape(n * n, n * n)
    LdL = np.matmul(np.swapaxes(Ls.conj(), 1, 2), Ls).sum(axis=0)
    D -= 0.5 * (spre(LdL) + spost(LdL))
    return D


def jump_operators(bath, channels) -> np.ndarray:
    """Stack of L_w = g sqrt(gamma(w)) pi_w; ``channels`` is a list or a (freqs, ops) pair."""
    if isinstance(channels, tuple):
        freqs, ops = channels
    else:
        freqs = np.array([ch.frequency for ch in channels])
        ops = np.array([ch.operator for ch in channels])
    if len(freqs) == 0:
        return np.zeros((0,) + bath.operator.shape, dtype=complex)
    rates = ohmic_rates(freqs, bath.T, bath.omega_c)
    return (bath.g * np.sqrt(rates))[:, None, None] * ops


def dissipator(bath, channels, basis: FrozenBasis | None = None) -> Superoperator:
    """D[rho] = sum_w (L rho L^+ - {L^+ L, rho}/2), L = g sqrt(gamma(w)) pi_w."""
    ops = jump_operators(bath, channels)
    H = None if basis is None else basis.hamiltonian
    if len(ops) == 0:
        n = bath.operator.shape[0]
        return Superoperator(np.zeros((n * n, n * n), complex), f"dissipator-{bath.label}", hamiltonian=H)
    return Superoperator(_dissipator_matrix(ops), f"dissipator-{bath.label}", hamiltonian=H)


def lindbladian(H: np.ndarray, dissipators) -> Superoperator:
    """-i[H, .] + sum of dissipators."""
    H = np.asarray(H, dtype=complex)
    for d in dissipators:
        if d.hamiltonian is not None and not np.array_equal(d.hamiltonian, H):
            if np.linalg.norm(d.hamiltonian - H) > 1e-12 * max(1.0, np.linalg.norm(H)):
                raise ValueError(f"{d.role} was built for a different Hamiltonian")
        if d.matrix.shape != (H.shape[0] ** 2,) * 2:
            raise ValueError(f"{d.role} has the wrong dimension")
    diss = sum(d.matrix for d in dissipators)
    unitary = -1j * (spre(H) - spost(H))
    return Superoperator(unitary + diss, "lindbladian", hamiltonian=H, dissipative=diss)


@dataclass(frozen=True, eq=False)
class SteadyState:
    rho: np.ndarray

    def __post_init__(self):
        rho = self.rho
        if np.linalg.norm(rho - rho.conj().T) > 1e-12:
            raise ValueError("steady state is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError("steady state does not have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValueError("steady state is not positive semidefinite")

    @property
    def traceless_part(self) -> np.ndarray:
        n = self.rho.shape[0]
        return self.rho - np.eye(n) / n


def kernel_dimension(matrix: np.ndarray, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s <= rtol * s[0])) if s[0] > 0 else matrix.shape[0]


def steady_state(L: Superoperator, rtol: float = 1e-10) -> SteadyState:
    """Unique normalized stationary state of a Lindbladian.

    The kernel is taken from the dissipative part when available: secular
    dissipators commute with the unitary part, so a one-dimensional dissipative
    kernel is the full generator's kernel, and its SVD is far better
    conditioned.  The result is always checked against the full generator.
    """
    n = L.dim
    for target in (L.dissipative, L.matrix):
        if target is None:
            continue
        _, s, vh = np.linalg.svd(target)
        if s[0] == 0:
            raise DegenerateKernelError(n * n, "generator is identically zero")
        dim = int(np.sum(s <= rtol * s[0]))
        if dim == 1:
            break
    else:
        raise DegenerateKernelError(dim)
    rho = unvec(vh[-1].conj(), n)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    resid = np.linalg.norm(L.matrix @ vec(rho))
    if resid > 1e-8 * s[0]:
        raise DegenerateKernelError(0, f"dissipative kernel is not stationary (residual {resid:.3e})")
    return SteadyState(rho)


class TracelessSolver:
    """Factorized bordered system [L; vec(I)^T] x = [vec y; 0] for repeated solves."""

    def __init__(self, L: Superoperator):
        n = L.dim
        self.n = n
        A = np.vstack([L.matrix, vec(np.eye(n))[None, :]])
        self.q, self.r = np.linalg.qr(A)
        diag = np.abs(np.diag(self.r))
        if diag.min() <= 1e-13 * diag.max():
            raise SingularOperatorError(
                "generator restricted to traceless operators is singular "
                f"(pivot ratio {diag.min() / diag.max():.2e})"
            )
        self.matrix = L.matrix
        self._trace_row = vec(np.eye(n))[None, :]

    def __call__(self, y: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        n = self.n
        y = np.asarray(y, dtype=complex)
        single = y.ndim == 2
        ys = y[None] if single else y
        if ys.shape[0] == 0:
            return ys.copy()
        traces = np.trace(ys, axis1=1, axis2=2)
        scale = np.maximum(1.0, np.linalg.norm(ys, axis=(1, 2)))
        if np.any(np.abs(traces) > tol * scale):
            raise ValueError(f"right-hand side is not traceless (|Tr y| = {np.abs(traces).max():.3e})")
        # drop the round-off trace so the bordered system stays consistent
        ys = ys - (traces / n)[:, None, None] * np.eye(n)
        rhs = np.swapaxes(ys, 1, 2).reshape(len(ys), n * n).T  # columns are vec(y_k)
        rhs = np.vstack([rhs, np.zeros((1, len(ys)))])
        x = np.linalg.solve(self.r, self.q.conj().T @ rhs)
        # one step of iterative refinement against the unbordered residual
        resid = rhs[:-1] - self.matrix @ x
        corr = np.vstack([resid, -self._trace_row @ x])
        x = x + np.linalg.solve(self.r, self.q.conj().T @ corr)
        xs = np.swapaxes(x.T.reshape(len(ys), n, n), 1, 2)
        return xs[0] if single else xs


def inverse_on_traceless(L: Superoperator, y: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Solve L x = y with Tr x = 0 through the bordered least-squares system.

    ``y`` may be one matrix or a stack of shape (k, n, n).
    """
    return TracelessSolver(L)(y, tol)


def bordered_condition(L: Superoperator) -> float:
    """2-norm condition number of the bordered system used by the traceless solve."""
    n = L.dim
    A = np.vstack([L.matrix, vec(np.eye(n))[None, :]])
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1])

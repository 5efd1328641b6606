"""Slow-driving expansion: first and second order density corrections and kernels.

Everything lives in the laboratory frame.  With ``x_j = L^{-1} d_j rho_f``:

* ``rho1 = sum_j Xdot_j x_j``
* ``rho2 = L^{-1}[d rho1/dt]`` with ``d rho1/dt = Xdot_i Xdot_l d_i x_l + Xddot_l x_l``
* ``Lambda_jl = Tr{x_j d_l H}``
* ``Lambda^(n)_{a,j} = Tr{D_a[(L^{-1})^{n-1} x_j] H}``
* ``Omega1_{a,jl} = Tr{D_a[L^{-1} d_j x_l] H}``
* ``Omega2_{a,ij} = -d_i Lambda^(2)_{a,j}``

Derivatives of the steady state and of the response operators are obtained
by implicit differentiation of ``L rho = 0``; only the generator itself is
finite-differenced.  Because every derived quantity comes from one set of
generator derivatives, bath sums such as ``Omega_L + Omega_R = -Lambda^T``
hold to round-off rather than to stencil accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frozen import frozen, generator_parts
from .lattice import SystemConfig, hamiltonian_gradient
from .lindblad import spost, spre
from .numerics import DEFAULT, Numerics, central_difference, step_for


def _hermitian(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2).conj())


def _apply(S: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Superoperator matrix applied to an operator (column stacking)."""
    n = rho.shape[-1]
    return (S @ rho.reshape(-1, order="F")).reshape(n, n, order="F")


def frozen_derivative(
    config: SystemConfig, X, j: int, h: float | None = None, richardson: bool | None = None,
    numerics: Numerics = DEFAULT,
) -> np.ndarray:
    """Central difference of the lab-frame steady state along control axis j."""
    X = np.asarray(X, dtype=float)
    if h is None:
        h = step_for(X, numerics.fd_step)
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    if richardson is None:
        richardson = numerics.richardson
    e = np.zeros_like(X)
    e[j] = 1.0
    return _hermitian(central_difference(lambda Y: frozen(config, Y).rho, X, e, h, richardson))


class LocalExpansion:
    """Implicit-differentiation data at one control point.

    ``order=1`` differentiates the generator once (enough for rho1, Lambda and
    Lambda^(1)); ``order=2`` adds second derivatives for rho2 and the Omega kernels.
    """

    def __init__(self, config: SystemConfig, X, numerics: Numerics = DEFAULT, order: int = 2):
        if order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {order}")
        X = np.asarray(X, dtype=float)
        self.config, self.X, self.order = config, X, order
        self.sol = frozen(config, X)
        self.dH = np.asarray(hamiltonian_gradient(config, X))
        d = X.size
        self.d = d
        s = 0.5 * step_for(X, numerics.nested_step)
        self.step = s
        pts = {}

        def parts(k):
            k = tuple(k)
            if k not in pts:
                pts[k] = generator_parts(config, X + s * np.asarray(k, dtype=float))[1]
            return pts[k]

        D0 = self.sol.dissipator_stack
        zero = (0,) * d
        pts[zero] = D0

        def unit(i, m):
            k = [0] * d
            k[i] = m
            return tuple(k)

        # H is affine in X, so the commutator part is differentiated exactly and
        # only the dissipators are differenced (fourth order).
        self.dD, self.dL = [], []
        for i in range(d):
            p1, m1, p2, m2 = (parts(unit(i, m)) for m in (1, -1, 2, -2))
            dDi = (8 * (p1 - m1) - (p2 - m2)) / (12 * s)
            self.dD.append(dDi)
            self.dL.append(dDi.sum(axis=0) - 1j * (spre(self.dH[i]) - spost(self.dH[i])))
        if order == 2:
            self.ddL = [[None] * d for _ in range(d)]
            for i in range(d):
                f = [parts(unit(i, m)).sum(axis=0) for m in (2, 1, -1, -2)]
                c0 = D0.sum(axis=0)
                self.ddL[i][i] = (-f[0] + 16 * f[1] - 30 * c0 + 16 * f[2] - f[3]) / (12 * s * s)
                for l in range(i + 1, d):
                    def corner(a, b):
                        return parts(tuple(a if q == i else b if q == l else 0 for q in range(d))).sum(axis=0)

                    def mixed(m):
                        return (corner(m, m) - corner(m, -m) - corner(-m, m)
                                + corner(-m, -m)) / (4 * (m * s) ** 2)

                    self.ddL[i][l] = self.ddL[l][i] = (4 * mixed(1) - mixed(2)) / 3
        self._solve_all()

    def solve(self, y):
        # differenced generators leak an O(eps/s^2) trace; the exact one is zero
        y = np.asarray(y, dtype=complex)
        n = y.shape[-1]
        tr = np.trace(y, axis1=-2, axis2=-1)
        y = y - tr[..., None, None] * np.eye(n) / n
        return _hermitian(self.sol.solve(y))

    def _solve_all(self):
        rho, d = self.sol.rho, self.d
        self.drho = self.solve(np.stack([-_apply(self.dL[i], rho) for i in range(d)]))
        self.x = self.solve(self.drho)
        if self.order == 1:
            return
        self.y = self.solve(self.x)
        ddrho = np.empty((d, d) + rho.shape, dtype=complex)
        for i in range(d):
            for l in range(d):
                rhs = _apply(self.ddL[i][l], rho) + _apply(self.dL[l], self.drho[i]) + _apply(
                    self.dL[i], self.drho[l])
                ddrho[i, l] = -rhs
        ddrho = self.solve(ddrho.reshape((-1,) + rho.shape)).reshape(ddrho.shape)
        # d_i x_l and d_i y_l
        dx = np.stack([[ddrho[i, l] - _apply(self.dL[i], self.x[l]) for l in range(d)] for i in range(d)])
        self.dx = self.solve(dx.reshape((-1,) + rho.shape)).reshape(dx.shape)
        dy = np.stack([[self.dx[i, l] - _apply(self.dL[i], self.y[l]) for l in range(d)] for i in range(d)])
        self.dy = self.solve(dy.reshape((-1,) + rho.shape)).reshape(dy.shape)
        self.ddrho = ddrho

    # kernels -----------------------------------------------------------
    def heat(self, op) -> np.ndarray:
        return self.sol.heat(op)

    @property
    def Lambda(self) -> np.ndarray:
        return np.einsum("jab,lba->jl", self.x, self.dH).real

    @property
    def lambda1(self) -> np.ndarray:
        return np.stack([self.heat(x) for x in self.x], axis=1)

    @property
    def lambda2(self) -> np.ndarray:
        return np.stack([self.heat(y) for y in self.y], axis=1)

    @property
    def omega1(self) -> np.ndarray:
        d = self.d
        nb = len(self.config.baths)
        solved = self.solve(self.dx.reshape((-1,) + self.x.shape[1:]))
        heats = np.array([self.heat(m) for m in solved])  # (d*d, nb)
        return heats.T.reshape(nb, d, d)

    @property
    def omega2(self) -> np.ndarray:
        d = self.d
        nb = len(self.config.baths)
        H = self.sol.H
        out = np.zeros((nb, d, d))
        for i in range(d):
            for l in range(d):
                y = self.y[l]
                term = np.array([np.trace(_apply(self.dD[i][a], y) @ H).real for a in range(nb)])
                term += self.heat(self.dy[i, l])
                term += np.array([np.trace(_apply(D, y) @ self.dH[i]).real
                                  for D in self.sol.dissipator_stack])
                out[:, i, l] = -term
        return out

    # expansion terms ---------------------------------------------------
    def rho1(self, Xdot) -> np.ndarray:
        return np.tensordot(np.asarray(Xdot, float), self.x, axes=1)

    def drho_f(self, Xdot) -> np.ndarray:
        return np.tensordot(np.asarray(Xdot, float), self.drho, axes=1)

    def drho1(self, Xdot, Xddot) -> np.ndarray:
        Xdot = np.asarray(Xdot, float)
        return np.einsum("i,l,ilab->ab", Xdot, Xdot, self.dx) + self.rho1(Xddot)

    def rho2(self, Xdot, Xddot) -> np.ndarray:
        return self.solve(self.drho1(Xdot, Xddot))


def steady_gradient(config, X, numerics: Numerics = DEFAULT) -> np.ndarray:
    """Stack (d, n, n) of d_j rho_f by implicit differentiation."""
    return LocalExpansion(config, X, numerics, order=1).drho


def response_operators(config, X, numerics: Numerics = DEFAULT) -> np.ndarray:
    """Stack (d, n, n) of x_j = L^{-1} d_j rho_f."""
    return LocalExpansion(config, X, numerics, order=1).x


def rho_order1(config, X, Xdot, numerics: Numerics = DEFAULT) -> np.ndarray:
    return LocalExpansion(config, X, numerics, order=1).rho1(Xdot)


def rho_order2(config, X, Xdot, Xddot, numerics: Numerics = DEFAULT) -> np.ndarray:
    return LocalExpansion(config, X, numerics, order=2).rho2(Xdot, Xddot)


def lambda_metric(config, X, numerics: Numerics = DEFAULT) -> np.ndarray:
    return LocalExpansion(config, X, numerics, order=1).Lambda


def lambda_alpha(config, X, order: int = 1, numerics: Numerics = DEFAULT) -> np.ndarray:
    """Array (n_baths, d) of Lambda^(order)_a."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    loc = LocalExpansion(config, X, numerics, order=order)
    return loc.lambda1 if order == 1 else loc.lambda2


def omega1_alpha(config, X, numerics: Numerics = DEFAULT) -> np.ndarray:
    return LocalExpansion(config, X, numerics).omega1


def omega2_alpha(config, X, h: float | None = None, numerics: Numerics = DEFAULT) -> np.ndarray:
    """Array (n_baths, d, d) with entries -d_i Lambda^(2)_{a,j}.

    With ``h`` given, the derivative is a plain central difference of
    Lambda^(2) with that step instead of the implicit chain.
    """
    if h is None:
        return LocalExpansion(config, X, numerics).omega2
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    X = np.asarray(X, dtype=float)
    cols = []
    for i in range(X.size):
        e = np.zeros_like(X)
        e[i] = 1.0
        cols.append(-central_difference(
            lambda Y: lambda_alpha(config, Y, 2, numerics), X, e, h))
    return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class ResponseKernels:
    X: np.ndarray
    labels: tuple
    Lambda: np.ndarray = field(repr=False)
    lambda1: np.ndarray = field(repr=False)
    lambda2: np.ndarray = field(repr=False)
    omega1: np.ndarray = field(repr=False)
    omega2: np.ndarray = field(repr=False)

    @property
    def omega(self) -> np.ndarray:
        return self.omega1 + self.omega2

    @staticmethod
    def sym(m: np.ndarray) -> np.ndarray:
        return 0.5 * (m + np.swapaxes(m, -1, -2))

    def balance_matrix(self) -> np.ndarray:
        return self.sym(self.omega).sum(axis=0) + self.sym(self.Lambda)

    def balance_residual(self) -> float:
        """||sum_a Omega_a^s + Lambda^s||_F relative to ||Lambda^s||_F."""
        scale = np.linalg.norm(self.sym(self.Lambda))
        return float(np.linalg.norm(self.balance_matrix()) / scale) if scale > 0 else 0.0

    def heat2(self, Xdot, Xddot) -> np.ndarray:
        Xdot = np.asarray(Xdot, float)
        return np.einsum("j,ajl,l->a", Xdot, self.omega1, Xdot) + self.lambda2 @ np.asarray(Xddot, float)


def response_kernels(config, X, numerics: Numerics = DEFAULT) -> ResponseKernels:
    loc = LocalExpansion(config, X, numerics, order=2)
    labels = tuple(b.label for b in config.baths)
    return ResponseKernels(loc.X.copy(), labels, loc.Lambda, loc.lambda1, loc.lambda2,
                           loc.omega1, loc.omega2)


@dataclass(frozen=True, eq=False)
class ExpansionState:
    X: np.ndarray
    Xdot: np.ndarray
    Xddot: np.ndarray
    rho_f: np.ndarray = field(repr=False)
    rho1: np.ndarray = field(repr=False)
    rho2: np.ndarray = field(repr=False)
    drho_f: np.ndarray = field(repr=False)
    drho1: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("rho1", "rho2"):
            m = getattr(self, name)
            scale = max(1.0, np.linalg.norm(m))
            if abs(np.trace(m)) > 1e-10 * scale:
                raise ValueError(f"{name} is not traceless")
            if np.linalg.norm(m - m.conj().T) > 1e-10 * scale:
                raise ValueError(f"{name} is not Hermitian")


def expansion_state(config, X, Xdot, Xddot, numerics: Numerics = DEFAULT,
                    second_order: bool = True) -> ExpansionState:
    """rho_f, rho1, rho2 plus the chain-rule time derivatives of rho_f and rho1."""
    loc = LocalExpansion(config, X, numerics, order=2 if second_order else 1)
    Xdot = np.asarray(Xdot, dtype=float)
    Xddot = np.asarray(Xddot, dtype=float)
    rho1 = loc.rho1(Xdot)
    if second_order:
        drho1 = loc.drho1(Xdot, Xddot)
        rho2 = loc.solve(drho1)
    else:
        drho1 = np.zeros_like(rho1)
        rho2 = np.zeros_like(rho1)
    return ExpansionState(loc.X, Xdot, Xddot, loc.sol.rho, rho1, rho2, loc.drho_f(Xdot), drho1)

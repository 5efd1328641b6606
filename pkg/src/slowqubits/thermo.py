"""Instantaneous powers, heat currents, entropies and their balance residuals.

Signs: heat currents are positive when energy flows from a bath into the
system, powers are positive when the drive does work on the system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import SystemConfig
from .numerics import DEFAULT, Numerics, spectral_derivative
from .response import LocalExpansion, ExpansionState


def reference_temperature(config: SystemConfig) -> float:
    """Common bath temperature; the energy form of S^(1) needs one."""
    temps = {bath.T for bath in config.baths}
    if len(temps) != 1:
        raise ValueError(f"baths have different temperatures {sorted(temps)}; no common T")
    return temps.pop()


def _energy(rho: np.ndarray, H: np.ndarray) -> float:
    return float(np.einsum("ab,ba->", rho, H).real)


def von_neumann(rho: np.ndarray) -> float:
    """-Tr rho ln rho with 0 ln 0 = 0."""
    p = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def log_form_s1(rho_f: np.ndarray, rho1: np.ndarray) -> float:
    """-Tr rho1 ln rho_f; needs rho_f strictly positive."""
    w, V = np.linalg.eigh(0.5 * (rho_f + rho_f.conj().T))
    if w.min() <= 0:
        raise ValueError("frozen state is singular; ln rho_f is undefined")
    log_rho = (V * np.log(w)) @ V.conj().T
    return float(-np.einsum("ab,ba->", rho1, log_rho).real)


def power_terms(state: ExpansionState, dH_dt: np.ndarray, Lambda: np.ndarray | None = None) -> tuple:
    """(P1, P2) with P1 = Tr{rho_f dH/dt} and P2 = Tr{rho1 dH/dt} (= Xdot.Lambda.Xdot)."""
    P1 = _energy(state.rho_f, dH_dt)
    if Lambda is not None:
        return P1, float(state.Xdot @ Lambda @ state.Xdot)
    return P1, _energy(state.rho1, dH_dt)


def heat_currents(state: ExpansionState, dissipators, H: np.ndarray) -> np.ndarray:
    """Array (n_baths, 3): J^(f), J^(1), J^(2) per bath."""
    Hv = H.T.reshape(-1, order="F")
    rows = []
    for D in dissipators:
        M = D.matrix if hasattr(D, "matrix") else D
        rows.append([np.dot(Hv, M @ r.reshape(-1, order="F")).real
                     for r in (state.rho_f, state.rho1, state.rho2)])
    return np.array(rows, dtype=float)


def entropies(state: ExpansionState, H: np.ndarray, T: float) -> tuple:
    """(S^(f), S^(1)); S^(1) in the energy form Tr{rho1 H}/T."""
    return von_neumann(state.rho_f), _energy(state.rho1, H) / T


@dataclass(frozen=True, eq=False)
class InstantReport:
    t: float
    X: np.ndarray
    labels: tuple
    P1: float
    P2: float
    Jf: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    Sf: float
    S1: float
    dSf_dt: float
    dS1_dt: float
    E: float
    dE_dt: float
    state: ExpansionState = field(repr=False)

    @property
    def first_law_residual(self) -> float:
        """dE/dt - P - sum J through second order (absolute)."""
        return self.dE_dt - self.P1 - self.P2 - float(np.sum(self.Jf + self.J1 + self.J2))


def instant(config: SystemConfig, X, Xdot, Xddot, t: float = 0.0,
            numerics: Numerics = DEFAULT, T: float | None = None) -> InstantReport:
    """All instantaneous observables at one protocol point.

    Time derivatives use the chain rule with the supplied velocities, so the
    entropy rates here are exact; ``balance_residuals`` rechecks them against
    a spectral time derivative.
    """
    if T is None:
        T = reference_temperature(config)
    loc = LocalExpansion(config, X, numerics, order=2)
    Xdot = np.asarray(Xdot, dtype=float)
    Xddot = np.asarray(Xddot, dtype=float)
    rho1 = loc.rho1(Xdot)
    drho_f = loc.drho_f(Xdot)
    drho1 = loc.drho1(Xdot, Xddot)
    rho2 = loc.solve(drho1)
    state = ExpansionState(loc.X, Xdot, Xddot, loc.sol.rho, rho1, rho2, drho_f, drho1)
    H = loc.sol.H
    dH = np.tensordot(Xdot, loc.dH, axes=1)
    P1, P2 = power_terms(state, dH)
    J = heat_currents(state, loc.sol.dissipators, H)
    Sf, S1 = entropies(state, H, T)
    # -Tr{drho_f ln rho_f}; Tr drho_f = 0 so this equals Tr{drho_f H}/T at a Gibbs state
    w, V = np.linalg.eigh(loc.sol.rho)
    w = np.clip(w, np.finfo(float).tiny, None)
    dSf = float(-np.einsum("ab,ba->", drho_f, (V * np.log(w)) @ V.conj().T).real)
    dS1 = (_energy(drho1, H) + _energy(rho1, dH)) / T
    rho = state.rho_f + rho1
    E = _energy(rho, H)
    dE = _energy(drho_f + drho1, H) + _energy(rho, dH)
    labels = tuple(b.label for b in config.baths)
    return InstantReport(float(t), loc.X.copy(), labels, P1, P2, J[:, 0], J[:, 1], J[:, 2],
                         Sf, S1, dSf, dS1, E, dE, state)


@dataclass(frozen=True)
class BalanceResiduals:
    """Pointwise residual series, relative and absolute."""

    first_law: np.ndarray
    entropy1: np.ndarray
    entropy2: np.ndarray
    first_law_abs: np.ndarray
    entropy1_abs: np.ndarray
    entropy2_abs: np.ndarray

    def max(self) -> dict:
        return {
            "first_law": float(np.max(np.abs(self.first_law))),
            "entropy1": float(np.max(np.abs(self.entropy1))),
            "entropy2": float(np.max(np.abs(self.entropy2))),
        }


def _relative(resid: np.ndarray, *terms) -> np.ndarray:
    scale = max(float(np.max(np.abs(t))) for t in terms)
    return resid / scale if scale > 0 else np.zeros_like(resid)


def balance_residuals(reports, period: float, T: float | None = None,
                      spectral: bool = True) -> BalanceResiduals:
    """Residuals of the first law and the two entropy balances along a cycle.

    ``reports`` must sample one period on a uniform grid.  With ``spectral``
    the entropy rates come from an FFT derivative of S^(f)(t) and S^(1)(t);
    otherwise the chain-rule rates stored in each report are used.  The first
    law always uses the chain-rule dE/dt.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to check")
    if T is None:
        T = 1.0
    P1 = np.array([r.P1 for r in reports])
    P2 = np.array([r.P2 for r in reports])
    J1 = np.array([np.sum(r.J1) for r in reports])
    J2 = np.array([np.sum(r.J2) for r in reports])
    Jf = np.array([np.sum(r.Jf) for r in reports])
    dE = np.array([r.dE_dt for r in reports])
    if spectral:
        dSf = spectral_derivative(np.array([r.Sf for r in reports]), period)
        dS1 = spectral_derivative(np.array([r.S1 for r in reports]), period)
    else:
        dSf = np.array([r.dSf_dt for r in reports])
        dS1 = np.array([r.dS1_dt for r in reports])
    r1 = dE - (P1 + P2) - (Jf + J1 + J2)
    r2 = T * dSf - J1
    r3 = T * dS1 - (J2 + P2)
    return BalanceResiduals(
        _relative(r1, dE, P1, P2, J1, J2),
        _relative(r2, T * dSf, J1),
        _relative(r3, T * dS1, J2, P2),
        r1, r2, r3,
    )

"""Cycle integrals: pumped heat, dissipated work, thermodynamic length, Stokes flux.

All cycle quantities are quadratures of kernel samples taken at the protocol
nodes.  ``CycleSampler`` evaluates the kernels once per node count and every
integral reuses them.  Each integral carries a convergence check: on uniform
periodic grids the result on every other node is compared with the full
result; on piecewise paths a second Gauss rule with half the nodes is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.integrate import cumulative_simpson

from .lattice import SystemConfig
from .numerics import DEFAULT, Numerics
from .parallel import ordered_map
from .protocols import Nodes, Protocol, WarpedByInverse
from .response import LocalExpansion
from .thermo import reference_temperature


class QuadratureError(RuntimeError):
    """Halving the node count changed a cycle integral by more than the tolerance."""


class InvariantViolation(RuntimeError):
    """A conservation law that must hold identically failed; indicates an engine bug."""


# kernel samples -------------------------------------------------------------

@dataclass(frozen=True)
class KernelPoint:
    Lambda: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray | None
    omega1: np.ndarray | None
    grad_S: np.ndarray
    force: np.ndarray
    S: float


def _entropy_and_gradient(loc: LocalExpansion) -> tuple:
    w, V = np.linalg.eigh(loc.sol.rho)
    w = np.clip(w, np.finfo(float).tiny, None)
    log_rho = (V * np.log(w)) @ V.conj().T
    grad = -np.einsum("jab,ba->j", loc.drho, log_rho).real
    return float(-np.sum(w * np.log(w))), grad


def kernel_point(args) -> KernelPoint:
    """Worker: kernels at one control point.  ``args = (config, X, order, numerics)``."""
    config, X, order, numerics = args
    loc = LocalExpansion(config, X, numerics, order=order)
    S, grad = _entropy_and_gradient(loc)
    force = np.einsum("ab,jba->j", loc.sol.rho, loc.dH).real
    if order == 2:
        return KernelPoint(loc.Lambda, loc.lambda1, loc.lambda2, loc.omega1, grad, force, S)
    return KernelPoint(loc.Lambda, loc.lambda1, None, None, grad, force, S)


@dataclass(frozen=True, eq=False)
class Samples:
    nodes: Nodes
    t: np.ndarray
    weights: np.ndarray
    piece: np.ndarray
    X: np.ndarray
    V: np.ndarray
    A: np.ndarray
    Lambda: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray | None
    omega1: np.ndarray | None
    grad_S: np.ndarray
    force: np.ndarray
    S: np.ndarray


class CycleSampler:
    """Kernel samples of one protocol, memoized per node count."""

    def __init__(self, protocol: Protocol, config: SystemConfig, numerics: Numerics = DEFAULT,
                 order: int = 1, workers: int | None = None):
        self.protocol = protocol
        self.config = config
        self.numerics = numerics
        self.order = order
        self.workers = workers
        self._cache: dict = {}
        self.kinks = level_crossings(protocol, config)

    @property
    def labels(self) -> tuple:
        return tuple(b.label for b in self.config.baths)

    def samples(self, n: int) -> Samples:
        if n not in self._cache:
            nodes = self.protocol.nodes(n, self.kinks)
            X, V, A = self.protocol.evaluate(nodes.t)
            pts = ordered_map(kernel_point, [(self.config, x, self.order, self.numerics) for x in X],
                              self.workers)

            def stack(name):
                vals = [getattr(p, name) for p in pts]
                return None if vals[0] is None else np.stack(vals)

            self._cache[n] = Samples(
                nodes, nodes.t, nodes.weights, nodes.piece, X, V, A,
                stack("Lambda"), stack("lambda1"), stack("lambda2"), stack("omega1"),
                stack("grad_S"), stack("force"), np.array([p.S for p in pts]),
            )
        return self._cache[n]

    def integrate(self, integrand, n: int | None = None, pieces=None, check: bool = True,
                  rtol: float | None = None) -> tuple:
        """(value, error estimate) of sum_nodes w * integrand(samples).

        ``pieces`` restricts the sum to the named protocol pieces.
        """
        n = self.numerics.nodes if n is None else int(n)
        rtol = self.numerics.quadrature_rtol if rtol is None else rtol
        value, scale = self._sum(integrand, self.samples(n), pieces)
        if not check:
            return value, np.zeros_like(value)
        s = self.samples(n)
        if s.nodes.uniform and n % 2 == 0:
            coarse, _ = self._sum(integrand, _subsample(s), pieces)
        else:
            coarse, _ = self._sum(integrand, self.samples(max(2, n // 2)), pieces)
        err = np.abs(value - coarse)
        bound = rtol * np.maximum(np.max(scale), 1e-300)
        if np.any(err > bound):
            raise QuadratureError(
                f"cycle integral not converged with {n} nodes: change on halving "
                f"{np.max(err):.3e} exceeds {bound:.3e}; increase the node count")
        return value, err

    def _sum(self, integrand, s: Samples, pieces):
        f = np.asarray(integrand(s), dtype=float)
        w = s.weights.copy()
        if pieces is not None:
            labels = self.protocol.piece_labels()
            wanted = [labels.index(p) for p in ([pieces] if isinstance(pieces, str) else pieces)]
            w = np.where(np.isin(s.piece, wanted), w, 0.0)
        w = w.reshape((-1,) + (1,) * (f.ndim - 1))
        # the tolerance scale is taken over the whole cycle, so pieces whose
        # integral vanishes are judged against the cycle's magnitude
        full = s.weights.reshape(w.shape)
        return np.sum(w * f, axis=0), np.sum(full * np.abs(f), axis=0)


def _subsample(s: Samples) -> Samples:
    def take(a):
        return None if a is None else a[::2]

    return Samples(s.nodes, take(s.t), 2 * s.weights[::2], take(s.piece), take(s.X), take(s.V), take(s.A),
                   take(s.Lambda), take(s.lambda1), take(s.lambda2), take(s.omega1),
                   take(s.grad_S), take(s.force), take(s.S))


def _sampler(protocol, config, numerics, order, workers, sampler):
    if sampler is not None:
        if sampler.protocol is not protocol or sampler.config is not config:
            raise ValueError("sampler belongs to a different protocol or config")
        if sampler.order < order:
            raise ValueError(f"sampler has kernel order {sampler.order}, need {order}")
        return sampler
    return CycleSampler(protocol, config, numerics, order, workers)


def _bath_values(config, values, bath):
    if bath is None:
        return values
    return float(values[config.bath_index(bath)])


def _vertex(f, lo: float, hi: float, iters: int = 80) -> tuple:
    """Minimum of a unimodal (possibly V-shaped) function by interval quartering."""
    for _ in range(iters):
        q = 0.25 * (hi - lo)
        m = lo + 2 * q
        if f(m - q) < f(m + q):
            hi = m
        else:
            lo = m
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(m)):
            break
    m = 0.5 * (lo + hi)
    return float(m), float(f(m))


def level_crossings(protocol: Protocol, config: SystemConfig, samples: int = 2048,
                    rtol: float = 1e-7) -> np.ndarray:
    """Times where two frozen levels cross along the protocol.

    At a crossing a Bohr frequency passes through zero and the cutoff factor
    exp(-|w|/w_C) has a slope jump, so kernels are only C^0 there.  Crossings
    show up as V-shaped minima of gaps between sorted eigenvalues.
    """
    from .lattice import hamiltonian

    def gaps(t):
        X = protocol.evaluate(np.atleast_1d(t))[0]
        E = np.linalg.eigvalsh(np.stack([hamiltonian(config, x) for x in X]))
        return np.diff(E, axis=-1), E[:, -1] - E[:, 0]

    edges = protocol.breakpoints()
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        t = np.linspace(a, b, max(8, int(samples * (b - a) / protocol.tau)))
        g, spread = gaps(t)
        for j in range(g.shape[1]):
            col = g[:, j]
            for i in range(1, len(t) - 1):
                # a sampled V has its lowest sample at most half the higher neighbour;
                # plateaus (constant |B| arcs) and smooth minima fail this
                lo_nb, hi_nb = sorted((col[i - 1], col[i + 1]))
                if col[i] <= lo_nb and col[i] <= 0.5 * hi_nb:
                    tc, gc = _vertex(lambda s: gaps(s)[0][0, j], t[i - 1], t[i + 1])
                    if gc < rtol * max(1.0, float(spread[i])) and a < tc < b:
                        out.append(tc)
    out = np.unique(np.round(np.array(out) / protocol.tau, 12)) * protocol.tau
    return out


# integrands -------------------------------------------------------------------

def _pump_integrand(s):
    return np.einsum("nad,nd->na", s.lambda1, s.V)


def _work_integrand(s):
    return np.einsum("ni,nij,nj->n", s.V, s.Lambda, s.V)


def _heat2_integrand(s):
    return np.einsum("ni,naij,nj->na", s.V, s.omega1, s.V) + np.einsum("nai,ni->na", s.lambda2, s.A)


def _entropy_rate(s):
    return np.einsum("nj,nj->n", s.grad_S, s.V)


def _power1_integrand(s):
    return np.einsum("nj,nj->n", s.force, s.V)


# public operations ----------------------------------------------------------

def pumped_heat_line(protocol: Protocol, config: SystemConfig, bath: str | None = None,
                     numerics: Numerics = DEFAULT, n: int | None = None,
                     workers: int | None = None, sampler: CycleSampler | None = None):
    """Line integral of Lambda^(1)_a . dX; all baths as an array, or one bath by label."""
    smp = _sampler(protocol, config, numerics, 1, workers, sampler)
    value, _ = smp.integrate(_pump_integrand, n)
    return _bath_values(config, value, bath)


def segment_heat(protocol: Protocol, config: SystemConfig, piece: str,
                 numerics: Numerics = DEFAULT, n: int | None = None,
                 workers: int | None = None, sampler: CycleSampler | None = None) -> tuple:
    """(Q_a per bath, Delta S^(f)) accumulated along one named piece of the path."""
    labels = protocol.piece_labels()
    if piece not in labels:
        raise KeyError(f"protocol has no piece {piece!r}; pieces are {labels}")
    smp = _sampler(protocol, config, numerics, 1, workers, sampler)
    Q, _ = smp.integrate(_pump_integrand, n, pieces=piece)
    dS, _ = smp.integrate(_entropy_rate, n, pieces=piece)
    return Q, float(dS)


def first_order_work(protocol, config, numerics: Numerics = DEFAULT, n=None, workers=None,
                     sampler=None) -> float:
    """Cycle integral of P^(1) = Tr{rho_f dH/dt}; zero for any closed path."""
    smp = _sampler(protocol, config, numerics, 1, workers, sampler)
    value, _ = smp.integrate(_power1_integrand, n)
    return float(value)


@dataclass(frozen=True)
class DissipationReport:
    W2: float
    Q2: np.ndarray
    Q_diss: float
    residual: float  # |W2 + sum Q2| / W2


def dissipated_work(protocol: Protocol, config: SystemConfig, numerics: Numerics = DEFAULT,
                    n: int | None = None, workers: int | None = None,
                    sampler: CycleSampler | None = None, tol: float = 1e-6) -> DissipationReport:
    """W^(2), Q^(2)_a and Q^diss = -sum Q^(2)_a; raises if W^(2) + sum Q^(2) != 0."""
    smp = _sampler(protocol, config, numerics, 2, workers, sampler)
    W2, _ = smp.integrate(_work_integrand, n)
    Q2, _ = smp.integrate(_heat2_integrand, n)
    W2 = float(W2)
    Q_diss = -float(np.sum(Q2))
    scale = max(abs(W2), float(np.max(np.abs(Q2))))
    residual = abs(W2 - Q_diss) / scale if scale > 0 else 0.0
    if residual > tol:
        raise InvariantViolation(
            f"second-order balance broken: W2 = {W2:.12g}, -sum Q2 = {Q_diss:.12g} "
            f"(relative residual {residual:.3e})")
    return DissipationReport(W2, Q2, Q_diss, residual)


@dataclass(frozen=True)
class LengthReport:
    length: float  # thermodynamic length
    length2: float  # its square, the minimum of tau * W2 over velocity profiles
    L2: float  # tau * W2 for the protocol's own velocity profile


def _metric_speed(s: Samples, tol: float = 1e-10) -> np.ndarray:
    q = _work_integrand(s)
    bad = q < -tol * max(1.0, float(np.max(np.abs(q))))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValueError(f"negative dissipation form {q[k]:.3e} at t = {s.t[k]:.6g}, X = {s.X[k]}")
    return np.sqrt(np.clip(q, 0.0, None))


def _refined_sqrt_integral(protocol: Protocol, s: Samples, factor: int = 16) -> float:
    """Integral of sqrt(q) with q = X'.Lambda.X' interpolated spectrally onto a finer grid.

    q is smooth but can come close to zero, where sqrt(q) develops a narrow
    dip that a direct quadrature resolves slowly.
    """
    q = _work_integrand(s)
    _metric_speed(s)
    if s.nodes.uniform:
        n = q.size
        fine = np.fft.irfft(np.fft.rfft(q), n * factor) * factor
        return float(np.sum(np.sqrt(np.clip(fine, 0.0, None))) * protocol.tau / (n * factor))
    # Legendre interpolant on every panel, re-integrated on a finer Gauss rule
    m = int(np.sum(s.nodes.panel == 0))
    x, w = np.polynomial.legendre.leggauss(m)
    vander = np.polynomial.legendre.legvander(x, m - 1)
    coef = (2 * np.arange(m) + 1) / 2 * ((w * q.reshape(-1, m)) @ vander)
    xf, wf = np.polynomial.legendre.leggauss(factor * m)
    qf = coef @ np.polynomial.legendre.legvander(xf, m - 1).T
    half = 0.5 * np.diff(s.nodes.panels, axis=1)[:, 0]
    return float(np.sum(half * (np.sqrt(np.clip(qf, 0.0, None)) @ wf)))


def thermodynamic_length(protocol: Protocol, config: SystemConfig, numerics: Numerics = DEFAULT,
                         n: int | None = None, workers: int | None = None,
                         sampler: CycleSampler | None = None, check: bool = True) -> LengthReport:
    smp = _sampler(protocol, config, numerics, 1, workers, sampler)
    n = numerics.nodes if n is None else int(n)
    length = _refined_sqrt_integral(protocol, smp.samples(n))
    if check:
        if smp.samples(n).nodes.uniform and n % 2 == 0:
            coarse = _refined_sqrt_integral(protocol, _subsample(smp.samples(n)), 32)
        else:
            coarse = _refined_sqrt_integral(protocol, smp.samples(max(2, n // 2)), 32)
        if abs(length - coarse) > numerics.quadrature_rtol * abs(length):
            raise QuadratureError(
                f"thermodynamic length not converged with {n} nodes "
                f"({length:.12g} vs {coarse:.12g} on half the nodes)")
    W2, _ = smp.integrate(_work_integrand, n)
    return LengthReport(length, length * length, protocol.tau * float(W2))


def arc_length_protocol(protocol: Protocol, config: SystemConfig, numerics: Numerics = DEFAULT,
                        n: int = 512, workers: int | None = None, factor: int = 16) -> WarpedByInverse:
    """Same path with constant dissipation rate X'.Lambda.X' along it.

    q = X'.Lambda.X' is sampled on n uniform nodes and interpolated spectrally
    onto a grid `factor` times finer. The metric arc length accumulated there
    fixes the knots of the warp, with slope L / (tau sqrt(q)) at each knot.
    """
    if not protocol.periodic_smooth or len(protocol.breakpoints()) > 2:
        raise ValueError("arc-length profiles need a smooth closed path")
    t = np.arange(n) * protocol.tau / n
    X, V, _ = protocol.evaluate(t)
    pts = ordered_map(kernel_point, [(config, x, 1, numerics) for x in X], workers)
    q = np.einsum("ni,nij,nj->n", V, np.stack([p.Lambda for p in pts]), V)
    m = n * factor
    fine = np.fft.irfft(np.fft.rfft(q), m) * factor
    speed = np.sqrt(np.clip(np.append(fine, fine[0]), 0.0, None))
    if speed.min() <= 1e-12 * speed.max():
        raise ValueError("metric speed vanishes on the path; arc-length profile is singular")
    s = np.linspace(0.0, protocol.tau, m + 1)
    ell = cumulative_simpson(speed, x=s, initial=0.0)
    L = ell[-1]
    t_knots = protocol.tau * ell / L
    t_knots[-1] = protocol.tau
    return WarpedByInverse(protocol, t_knots, s, L / (protocol.tau * speed))


# field maps and Stokes form ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldMap:
    quantity: str
    Bx: np.ndarray
    Bz: np.ndarray
    values: np.ndarray = field(repr=False)  # shape (len(Bx), len(Bz))

    def __post_init__(self):
        for name in ("Bx", "Bz"):
            ax = getattr(self, name)
            if ax.ndim != 1 or ax.size < 2 or np.any(np.diff(ax) <= 0):
                raise ValueError(f"grid axis {name} must be strictly increasing with at least 2 points")
        if self.values.shape != (self.Bx.size, self.Bz.size):
            raise ValueError("values do not match the grid shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"field map {self.quantity} has non-finite values")

    @property
    def spacing(self) -> tuple:
        return float(np.mean(np.diff(self.Bx))), float(np.mean(np.diff(self.Bz)))

    def rows(self):
        for i, x in enumerate(self.Bx):
            for j, z in enumerate(self.Bz):
                yield float(x), float(z), float(self.values[i, j])


FIELD_QUANTITIES = ("rotor_L", "rotor_R", "max_eig_Lambda", "max_eig_-Omega_L", "max_eig_-Omega_R")


def _grid_point(args):
    config, X, order, numerics = args
    loc = LocalExpansion(config, X, numerics, order=order)
    if order == 1:
        return loc.lambda1, loc.Lambda, None
    return loc.lambda1, loc.Lambda, loc.omega1 + loc.omega2


def _sym_max_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[-1])


def field_map(config: SystemConfig, Bx, Bz, quantity: str, numerics: Numerics = DEFAULT,
              workers: int | None = None) -> FieldMap:
    """Rotor of Lambda^(1)_a or the top eigenvalue of a symmetrized kernel on a grid."""
    if quantity not in FIELD_QUANTITIES:
        raise ValueError(f"unknown field {quantity!r}; choose from {FIELD_QUANTITIES}")
    Bx = np.asarray(Bx, dtype=float)
    Bz = np.asarray(Bz, dtype=float)
    if Bx.size == 0 or Bz.size == 0:
        raise ValueError("empty grid")
    if quantity.startswith("rotor"):
        return rotor_field(config, Bx, Bz, quantity.split("_")[1], numerics, workers)
    order = 1 if quantity == "max_eig_Lambda" else 2
    pts = [(config, np.array([x, z]), order, numerics) for x in Bx for z in Bz]
    res = ordered_map(_grid_point, pts, workers)
    if quantity == "max_eig_Lambda":
        vals = [_sym_max_eig(r[1]) for r in res]
    else:
        k = config.bath_index(quantity.rsplit("_", 1)[1])
        vals = [_sym_max_eig(-r[2][k]) for r in res]
    return FieldMap(quantity, Bx, Bz, np.array(vals).reshape(Bx.size, Bz.size))


def rotor_field(config: SystemConfig, Bx, Bz, bath: str, numerics: Numerics = DEFAULT,
                workers: int | None = None) -> FieldMap:
    """d_Bx Lambda^(1)_{a,z} - d_Bz Lambda^(1)_{a,x} by second-order differences on the grid."""
    Bx = np.asarray(Bx, dtype=float)
    Bz = np.asarray(Bz, dtype=float)
    if Bx.size < 3 or Bz.size < 3:
        raise ValueError("rotor needs at least 3 grid points per axis for its difference stencil")
    k = config.bath_index(bath)
    pts = [(config, np.array([x, z]), 1, numerics) for x in Bx for z in Bz]
    lam = np.stack([r[0][k] for r in ordered_map(_grid_point, pts, workers)])
    lam = lam.reshape(Bx.size, Bz.size, 2)
    curl = np.gradient(lam[:, :, 1], Bx, axis=0, edge_order=2) - np.gradient(
        lam[:, :, 0], Bz, axis=1, edge_order=2)
    return FieldMap(f"rotor_{bath}", Bx, Bz, curl)


def pumped_heat_stokes(protocol: Protocol, rotor: FieldMap, n: int = 1024, radial: int = 64,
                       center=None) -> float:
    """Flux of the rotor through the region enclosed by the path.

    The region must be star-shaped about ``center`` (default: the centroid of
    the path).  With polar coordinates about the centre, the flux is
    int dt theta'(t) int_0^r(t) rotor rho d rho.
    """
    nodes = protocol.nodes(n)
    X, V, _ = protocol.evaluate(nodes.t)
    if center is None:
        center = np.sum(nodes.weights[:, None] * X, axis=0) / protocol.tau
    center = np.asarray(center, dtype=float)
    d = X - center
    r2 = np.einsum("ni,ni->n", d, d)
    scale = float(np.max(r2)) if r2.size else 0.0
    if scale == 0.0:
        return 0.0
    ok = r2 > 1e-24 * scale
    dtheta = np.where(ok, (d[:, 0] * V[:, 1] - d[:, 1] * V[:, 0]) / np.where(ok, r2, 1.0), 0.0)
    if np.any(dtheta > 1e-12 * np.max(np.abs(dtheta))) and np.any(dtheta < -1e-12 * np.max(np.abs(dtheta))):
        raise ValueError("path is not star-shaped about the chosen centre")
    lo = np.array([rotor.Bx[0], rotor.Bz[0]])
    hi = np.array([rotor.Bx[-1], rotor.Bz[-1]])
    pad = 1e-9 * (hi - lo)
    if np.any(X < lo - pad) or np.any(X > hi + pad) or np.any(center < lo) or np.any(center > hi):
        raise ValueError("protocol leaves the rotor grid")
    interp = RegularGridInterpolator((rotor.Bx, rotor.Bz), rotor.values, method="cubic")
    x, w = np.polynomial.legendre.leggauss(radial)
    u = 0.5 * (x + 1)  # rho = u * r
    pts = center + u[None, :, None] * d[:, None, :]
    pts = np.clip(pts, lo, hi)
    vals = interp(pts.reshape(-1, 2)).reshape(len(X), radial)
    inner = np.sum(0.5 * w * u * vals, axis=1) * r2  # int_0^r rotor rho d rho
    return float(np.sum(nodes.weights * dtheta * inner))


# kernel identity scan -------------------------------------------------------------

@dataclass(frozen=True)
class BalanceScan:
    max_residual: float
    at: tuple
    residuals: np.ndarray


def _balance_point(args):
    from .response import response_kernels

    config, X, numerics = args
    return response_kernels(config, X, numerics).balance_residual()


def kernel_balance_scan(config: SystemConfig, Bx, Bz, numerics: Numerics = DEFAULT,
                        workers: int | None = None) -> BalanceScan:
    """Max over the grid of ||sum_a Omega_a^s + Lambda^s|| / ||Lambda^s||."""
    if len(config.baths) < 2:
        raise ValueError("the kernel identity needs at least two baths")
    Bx = np.asarray(Bx, dtype=float)
    Bz = np.asarray(Bz, dtype=float)
    pts = [(config, np.array([x, z]), numerics) for x in Bx for z in Bz]
    res = np.array(ordered_map(_balance_point, pts, workers)).reshape(Bx.size, Bz.size)
    i, j = np.unravel_index(int(np.argmax(res)), res.shape)
    return BalanceScan(float(res[i, j]), (float(Bx[i]), float(Bz[j])), res)


# figure of merit and full report ----------------------------------------------------

@dataclass(frozen=True)
class MeritReport:
    A: float
    length2: float
    L2: float
    merit: float  # A^2 / length2
    dT: float | None
    tau_D: float | None
    P_D: float | None
    P_max: float | None


def _merit(A, length2, L2, T, dT) -> MeritReport:
    merit = A * A / length2 if length2 > 0 else math.inf
    if dT is None:
        return MeritReport(A, length2, L2, merit, None, None, None, None)
    tau_D = 2 * T * L2 / (A * dT) if A != 0 else None
    P_D = 0.25 * (A * A / L2) * (dT / T) ** 2 if L2 > 0 else None
    P_max = 0.25 * merit * (dT / T) ** 2
    return MeritReport(A, length2, L2, merit, dT, tau_D, P_D, P_max)


def figure_of_merit(protocol: Protocol, config: SystemConfig, cold: str = "L",
                    dT: float | None = None, numerics: Numerics = DEFAULT, n: int | None = None,
                    workers: int | None = None, sampler: CycleSampler | None = None) -> MeritReport:
    """A = Q^pump_cold, A^2/length^2 and, given a bias dT, the optimal period and powers.

    ``tau_D`` is None when A = 0.  The bias enters only through the linear
    response formulas; the baths themselves stay at equal temperature.
    """
    import warnings

    T = reference_temperature(config)
    if dT is not None and abs(dT) / T > 0.2:
        warnings.warn(f"dT/T = {dT / T:.3g} is outside the linear-response regime", stacklevel=2)
    smp = _sampler(protocol, config, numerics, 1, workers, sampler)
    A = pumped_heat_line(protocol, config, cold, numerics, n, sampler=smp)
    lr = thermodynamic_length(protocol, config, numerics, n, sampler=smp)
    return _merit(A, lr.length2, lr.L2, T, dT)


@dataclass(frozen=True)
class CycleReport:
    labels: tuple
    tau: float
    nodes: int
    Q_pump: np.ndarray
    Q2: np.ndarray
    W2: float
    Q_diss: float
    W1: float
    length2: float
    L2: float
    cold: str
    merit: MeritReport
    pump_sum_residual: float
    second_order_residual: float

    def violations(self, pump_rtol: float = 1e-8, balance_rtol: float = 1e-6) -> list:
        out = []
        scale = float(np.max(np.abs(self.Q_pump)))
        if abs(self.pump_sum_residual) > pump_rtol * max(scale, 1e-300) and scale > 0:
            out.append(f"pumped heats do not sum to zero ({self.pump_sum_residual:.3e})")
        if self.second_order_residual > balance_rtol:
            out.append(f"W2 + sum Q2 != 0 (relative {self.second_order_residual:.3e})")
        if self.W2 * self.tau < self.length2 * (1 - 1e-6):
            out.append(f"dissipation bound violated: W2*tau = {self.W2 * self.tau:.6g} < {self.length2:.6g}")
        return out

    def as_dict(self) -> dict:
        d = {"tau": self.tau, "nodes": self.nodes, "cold": self.cold}
        for k, lab in enumerate(self.labels):
            d[f"Q_pump_{lab}"] = float(self.Q_pump[k])
            d[f"Q2_{lab}"] = float(self.Q2[k])
        d.update(W2=self.W2, Q_diss=self.Q_diss, W1=self.W1, length2=self.length2, L2=self.L2,
                 A=self.merit.A, merit=self.merit.merit, dT=self.merit.dT, tau_D=self.merit.tau_D,
                 P_D=self.merit.P_D, P_max=self.merit.P_max,
                 pump_sum_residual=self.pump_sum_residual,
                 second_order_residual=self.second_order_residual)
        return d


def cycle_report(protocol: Protocol, config: SystemConfig, cold: str = "L", dT: float | None = None,
                 numerics: Numerics = DEFAULT, n: int | None = None, workers: int | None = None,
                 second_order: bool = True, sampler: CycleSampler | None = None) -> CycleReport:
    """Every per-cycle total from one set of kernel samples."""
    n = numerics.nodes if n is None else int(n)
    smp = _sampler(protocol, config, numerics, 2 if second_order else 1, workers, sampler)
    Q = pumped_heat_line(protocol, config, None, numerics, n, sampler=smp)
    W1 = first_order_work(protocol, config, numerics, n, sampler=smp)
    lr = thermodynamic_length(protocol, config, numerics, n, sampler=smp)
    if second_order:
        dis = dissipated_work(protocol, config, numerics, n, sampler=smp, tol=math.inf)
        W2, Q2, Qd, res2 = dis.W2, dis.Q2, dis.Q_diss, dis.residual
    else:
        W2, Q2, Qd, res2 = lr.L2 / protocol.tau, np.full(len(config.baths), np.nan), math.nan, 0.0
    T = reference_temperature(config)
    merit = _merit(float(Q[config.bath_index(cold)]), lr.length2, lr.L2, T, dT)
    return CycleReport(tuple(b.label for b in config.baths), protocol.tau, n, Q, Q2, W2, Qd, W1,
                       lr.length2, lr.L2, cold, merit, float(np.sum(Q)), res2)

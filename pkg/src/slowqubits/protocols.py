"""Closed driving protocols X(t) on [0, tau] with analytic velocity and acceleration.

A protocol is made of smooth pieces.  Periodic single-piece curves are
integrated with the trapezoid rule (spectrally accurate); piecewise paths
use Gauss-Legendre nodes on every piece so that kinks never sit on a node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq


PANEL = 16


@dataclass(frozen=True, eq=False)
class Nodes:
    t: np.ndarray
    weights: np.ndarray
    piece: np.ndarray  # index of the piece each node belongs to
    uniform: bool = True  # periodic trapezoid grid; otherwise Gauss panels
    panel: np.ndarray | None = None  # panel index per node (Gauss only)
    panels: np.ndarray | None = None  # (n_panels, 2) panel edges (Gauss only)


class Protocol:
    """Base class.  Subclasses implement ``_eval(t) -> (X, Xdot, Xddot)``."""

    kind = "protocol"
    periodic_smooth = True
    # geometric refinement levels at piece ends; off by default because piece
    # ends such as B = 0 can be degenerate points of the frozen generator
    grading = 0

    def __init__(self, tau: float = 1.0):
        if not tau > 0:
            raise ValueError(f"period must be positive, got {tau}")
        self.tau = float(tau)

    # evaluation ------------------------------------------------------------
    def _eval(self, t: np.ndarray):
        raise NotImplementedError

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        X, V, A = self._eval(np.atleast_1d(t))
        if t.ndim == 0:
            return X[0], V[0], A[0]
        return X, V, A

    def X(self, t):
        return self.evaluate(t)[0]

    def Xdot(self, t):
        return self.evaluate(t)[1]

    def Xddot(self, t):
        return self.evaluate(t)[2]

    @property
    def dim(self) -> int:
        return self.evaluate(0.0)[0].size

    # pieces and quadrature -------------------------------------------------
    def breakpoints(self) -> np.ndarray:
        """Piece boundaries in [0, tau], including both ends."""
        return np.array([0.0, self.tau])

    def piece_labels(self) -> tuple:
        return tuple(f"piece{k}" for k in range(len(self.breakpoints()) - 1))

    def nodes(self, n: int, kinks=()) -> Nodes:
        """Quadrature nodes.

        ``kinks`` are times where the integrand is known to lose smoothness;
        they become panel edges.  A smooth periodic protocol without kinks
        gets the uniform trapezoid grid.
        """
        if n < 2:
            raise ValueError(f"need at least 2 nodes, got {n}")
        edges = self.breakpoints()
        kinks = np.sort(np.asarray(kinks, dtype=float).ravel())
        if self.periodic_smooth and len(edges) == 2 and kinks.size == 0:
            t = np.arange(n) * (self.tau / n)
            return Nodes(t, np.full(n, self.tau / n), np.zeros(n, dtype=int))
        # composite Gauss-Legendre: panels of PANEL nodes spread over pieces by
        # duration; the end panels of every piece are split geometrically so that
        # endpoint singularities (corners, degenerate points) are resolved
        lengths = np.diff(edges)
        panels = max(len(lengths), n // PANEL)
        counts = np.maximum(1, np.round(panels * lengths / self.tau).astype(int))
        grading = self.grading if len(edges) > 2 else 0
        cuts = []
        for k, (a, b, m) in enumerate(zip(edges[:-1], edges[1:], counts)):
            for lo, hi in _graded_cuts(a, b, int(m), grading):
                inner = kinks[(kinks > lo) & (kinks < hi)]
                pts = np.concatenate([[lo], inner, [hi]])
                cuts.extend((p, q, k) for p, q in zip(pts[:-1], pts[1:]) if q > p)
        x, w = np.polynomial.legendre.leggauss(PANEL)
        lo = np.array([c[0] for c in cuts])
        hi = np.array([c[1] for c in cuts])
        t = (0.5 * (hi - lo)[:, None] * x + 0.5 * (lo + hi)[:, None]).ravel()
        wt = (0.5 * (hi - lo)[:, None] * w).ravel()
        piece = np.repeat([c[2] for c in cuts], PANEL)
        panel = np.repeat(np.arange(len(cuts)), PANEL)
        return Nodes(t, wt, piece, False, panel, np.stack([lo, hi], axis=1))

    def closure_gap(self) -> float:
        X0, V0, _ = self.evaluate(0.0)
        X1, V1, _ = self.evaluate(self.tau)
        return float(np.linalg.norm(X1 - X0))

    def scaled(self, tau: float) -> "Protocol":
        return TimeScaled(self, tau)


class Ellipse(Protocol):
    """X(t) = B0 * (center + semi * (cos, sin)(2 pi t / tau)), counter-clockwise in (Bx, Bz)."""

    kind = "ellipse"

    def __init__(self, B0: float = 1.0, center=(1.0, 0.5), semi=(0.5, 0.25), tau: float = 1.0,
                 phase: float = 0.0):
        super().__init__(tau)
        self.B0 = float(B0)
        self.center = np.asarray(center, dtype=float)
        self.semi = np.asarray(semi, dtype=float)
        self.phase = float(phase)
        if self.center.shape != (2,) or self.semi.shape != (2,):
            raise ValueError("center and semi must be 2-vectors")

    def _eval(self, t):
        w = 2 * math.pi / self.tau
        c, s = np.cos(w * t + self.phase), np.sin(w * t + self.phase)
        X = self.B0 * (self.center + self.semi * np.stack([c, s], axis=-1))
        V = self.B0 * w * self.semi * np.stack([-s, c], axis=-1)
        A = -self.B0 * w * w * self.semi * np.stack([c, s], axis=-1)
        return X, V, A

    def area(self) -> float:
        return math.pi * self.B0 ** 2 * abs(self.semi[0] * self.semi[1])


def benchmark_ellipse(B0: float = 1.0, tau: float = 1.0) -> Ellipse:
    """Bx = B0(1 + cos/2), Bz = B0(1/2 + sin/4)."""
    return Ellipse(B0, (1.0, 0.5), (0.5, 0.25), tau)


class Circle(Ellipse):
    """Circle of radius r*B0 centered at (B0, B0)."""

    kind = "circle"

    def __init__(self, B0: float = 1.0, r: float = 1.0, tau: float = 1.0, center=None):
        c = (1.0, 1.0) if center is None else tuple(np.asarray(center, float) / B0)
        super().__init__(B0, c, (r, r), tau)


def _graded_cuts(a: float, b: float, m: int, levels: int, ratio: float = 0.15):
    cuts = np.linspace(a, b, m + 1)
    if levels:
        h = cuts[1] - cuts[0]
        g = h * ratio ** np.arange(levels, 0, -1)
        inner = cuts[1:-1]
        cuts = np.concatenate([[a], a + g, inner if m > 1 else [], b - g[::-1], [b]])
        cuts = np.unique(cuts)
    return list(zip(cuts[:-1], cuts[1:]))


# piecewise paths -------------------------------------------------------------

@dataclass(frozen=True)
class Line:
    p0: np.ndarray
    p1: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    def reversed(self) -> "Line":
        return Line(self.p1, self.p0)

    def at(self, s):
        """Position, unit tangent and curvature vector at arc length s."""
        u = (self.p1 - self.p0) / self.length
        s = np.asarray(s, dtype=float)[:, None]
        return self.p0 + s * u, np.broadcast_to(u, s.shape[:1] + u.shape), np.zeros(s.shape[:1] + u.shape)


@dataclass(frozen=True)
class Arc:
    center: np.ndarray
    radius: float
    theta0: float
    theta1: float  # counter-clockwise when theta1 > theta0

    @property
    def length(self) -> float:
        return abs(self.theta1 - self.theta0) * self.radius

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0)

    def at(self, s):
        sign = 1.0 if self.theta1 >= self.theta0 else -1.0
        th = self.theta0 + sign * np.asarray(s, dtype=float) / self.radius
        radial = np.stack([np.cos(th), np.sin(th)], axis=-1)
        tangent = sign * np.stack([-np.sin(th), np.cos(th)], axis=-1)
        return self.center + self.radius * radial, tangent, -radial / self.radius


class PiecewisePath(Protocol):
    """Closed path of line and arc segments traversed at constant speed."""

    kind = "piecewise"
    periodic_smooth = False

    def __init__(self, segments, labels=None, tau: float = 1.0):
        super().__init__(tau)
        self.segments = tuple(segments)
        if not self.segments:
            raise ValueError("path needs at least one segment")
        self.labels = tuple(labels) if labels is not None else tuple(
            f"seg{k}" for k in range(len(self.segments)))
        if len(self.labels) != len(self.segments):
            raise ValueError("one label per segment is required")
        self.lengths = np.array([seg.length for seg in self.segments])
        if np.any(self.lengths <= 0):
            raise ValueError("segments must have positive length")
        self.total = float(self.lengths.sum())
        self.cum = np.concatenate([[0.0], np.cumsum(self.lengths)])
        self.speed = self.total / self.tau
        ends = [seg.at([seg.length])[0][0] for seg in self.segments]
        starts = [seg.at([0.0])[0][0] for seg in self.segments]
        for k in range(len(self.segments)):
            gap = np.linalg.norm(ends[k] - starts[(k + 1) % len(self.segments)])
            if gap > 1e-12 * max(1.0, self.total):
                raise ValueError(f"segments {k} and {k + 1} do not join (gap {gap:.3e})")

    def breakpoints(self):
        return self.cum / self.speed

    def reversed(self) -> "PiecewisePath":
        """Same path traversed in the opposite direction."""
        return PiecewisePath([seg.reversed() for seg in reversed(self.segments)],
                             tuple(reversed(self.labels)), self.tau)

    def piece_labels(self):
        return self.labels

    def _eval(self, t):
        s = np.mod(np.asarray(t, dtype=float), self.tau) * self.speed
        s = np.where(np.isclose(t, self.tau, rtol=0, atol=1e-15 * self.tau), self.total, s)
        idx = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0, len(self.segments) - 1)
        X = np.empty((s.size, 2))
        V = np.empty((s.size, 2))
        A = np.empty((s.size, 2))
        for k, seg in enumerate(self.segments):
            m = idx == k
            if np.any(m):
                p, u, kappa = seg.at(s[m] - self.cum[k])
                X[m], V[m], A[m] = p, self.speed * u, self.speed ** 2 * kappa
        return X, V, A


def quadrant_sector(R: float = 20.0, tau: float = 1.0, rounding: float = 0.0) -> PiecewisePath:
    """Quarter disc of radius R in the first quadrant, traversed clockwise.

    Pieces in time order: ``C<`` up the B_z axis from the origin, the
    ``arc`` down to (R, 0), then ``C>`` back along B_z = 0 to the origin.
    With ``rounding > 0`` the three corners are replaced by tangent circular
    fillets of that radius (the path becomes C^1).
    """
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    r = float(rounding)
    if r < 0 or r >= R / 3:
        raise ValueError(f"rounding must lie in [0, R/3), got {rounding}")
    # built counter-clockwise, then reversed
    if r == 0:
        segs = [
            Line(np.array([0.0, 0.0]), np.array([R, 0.0])),
            Arc(np.zeros(2), R, 0.0, math.pi / 2),
            Line(np.array([0.0, R]), np.array([0.0, 0.0])),
        ]
        return PiecewisePath(segs, ("C>", "arc", "C<"), tau).reversed()
    # fillets tangent to an axis and internally tangent to the big circle
    a = math.sqrt((R - r) ** 2 - r * r)
    phi = math.atan2(r, a)  # polar angle of the fillet centre near (R, 0)
    segs = [
        Arc(np.array([r, r]), r, math.pi, 1.5 * math.pi),
        Line(np.array([r, 0.0]), np.array([a, 0.0])),
        Arc(np.array([a, r]), r, -0.5 * math.pi, phi),
        Arc(np.zeros(2), R, phi, 0.5 * math.pi - phi),
        Arc(np.array([r, a]), r, 0.5 * math.pi - phi, math.pi),
        Line(np.array([0.0, a]), np.array([0.0, r])),
    ]
    labels = ("fillet0", "C>", "fillet1", "arc", "fillet2", "C<")
    return PiecewisePath(segs, labels, tau).reversed()


# reparameterizations ---------------------------------------------------------

class TimeScaled(Protocol):
    """Same path and velocity profile, period changed to ``tau``."""

    def __init__(self, base: Protocol, tau: float):
        super().__init__(tau)
        self.base = base
        self.kind = base.kind
        self.periodic_smooth = base.periodic_smooth
        self.k = base.tau / self.tau

    def breakpoints(self):
        return self.base.breakpoints() / self.k

    def piece_labels(self):
        return self.base.piece_labels()

    def _eval(self, t):
        X, V, A = self.base._eval(t * self.k)
        return X, V * self.k, A * self.k ** 2


class Reparameterized(Protocol):
    """X(phi(t)) with a monotone periodic warp phi(t) = t + sum_k a_k tau/(2 pi k) sin(2 pi k t/tau + c_k).

    The path is unchanged, only the velocity profile moves.
    """

    def __init__(self, base: Protocol, amplitudes, phases=None):
        super().__init__(base.tau)
        self.base = base
        self.kind = base.kind
        self.periodic_smooth = base.periodic_smooth
        self.a = np.asarray(amplitudes, dtype=float)
        self.c = np.zeros_like(self.a) if phases is None else np.asarray(phases, dtype=float)
        if self.a.shape != self.c.shape:
            raise ValueError("amplitudes and phases must have equal length")
        if np.sum(np.abs(self.a)) >= 1:
            raise ValueError("sum |a_k| must be below 1 to keep the warp monotone")
        self.k = np.arange(1, self.a.size + 1)

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        w = 2 * math.pi * self.k / self.tau
        arg = np.multiply.outer(t, w) + self.c
        return t + np.sum(self.a / w * (np.sin(arg) - np.sin(self.c)), axis=-1)

    def _phi_derivs(self, t):
        w = 2 * math.pi * self.k / self.tau
        arg = np.multiply.outer(t, w) + self.c
        return 1 + np.sum(self.a * np.cos(arg), axis=-1), -np.sum(self.a * w * np.sin(arg), axis=-1)

    def breakpoints(self):
        edges = self.base.breakpoints()
        out = [0.0]
        for e in edges[1:-1]:
            out.append(brentq(lambda t: float(self.phi(t)) - e, 0.0, self.tau, xtol=1e-15))
        out.append(self.tau)
        return np.array(out)

    def piece_labels(self):
        return self.base.piece_labels()

    def _eval(self, t):
        p = self.phi(t)
        d1, d2 = self._phi_derivs(t)
        X, V, A = self.base._eval(p)
        return X, V * d1[:, None], A * (d1 * d1)[:, None] + V * d2[:, None]


class WarpedByInverse(Protocol):
    """X(phi(t)) with phi given by its values and slopes at knots over one period.

    Knots are placed in the base parameter, so they crowd together where the
    warp is steep. The interpolant is a cubic Hermite spline through
    (t_k, phi_k) with slope dphi/dt at each knot.
    """

    def __init__(self, base: Protocol, t_knots, phi_knots, slopes):
        super().__init__(base.tau)
        t_knots = np.asarray(t_knots, float)
        phi_knots = np.asarray(phi_knots, float)
        slopes = np.asarray(slopes, float)
        if not (t_knots[0] == 0.0 and math.isclose(t_knots[-1], self.tau)
                and phi_knots[0] == 0.0 and math.isclose(phi_knots[-1], self.tau)):
            raise ValueError("warp knots must span exactly one period")
        if np.any(np.diff(t_knots) <= 0) or np.any(np.diff(phi_knots) <= 0) or np.any(slopes <= 0):
            raise ValueError("warp must be strictly monotone")
        self.base = base
        self.kind = base.kind
        self.periodic_smooth = base.periodic_smooth
        self.spline = CubicHermiteSpline(t_knots, phi_knots, slopes)
        self._d1 = self.spline.derivative(1)
        self._d2 = self.spline.derivative(2)

    def _split(self, t):
        t = np.asarray(t, float)
        tt = np.mod(t, self.tau)
        return tt, t - tt

    def phi(self, t):
        tt, shift = self._split(t)
        return self.spline(tt) + shift

    def breakpoints(self):
        edges = self.base.breakpoints()
        inner = [brentq(lambda t: float(self.spline(t)) - e, 0.0, self.tau, xtol=1e-15) for e in edges[1:-1]]
        return np.array([0.0, *inner, self.tau])

    def piece_labels(self):
        return self.base.piece_labels()

    def _eval(self, t):
        tt, shift = self._split(t)
        d1, d2 = self._d1(tt), self._d2(tt)
        X, V, A = self.base._eval(self.spline(tt) + shift)
        return X, V * d1[:, None], A * (d1 * d1)[:, None] + V * d2[:, None]


def random_warp(base: Protocol, rng: np.random.Generator, modes: int = 3, strength: float = 0.8):
    """A random monotone velocity profile on the same path."""
    a = rng.uniform(-1, 1, modes)
    a *= strength * rng.uniform(0.2, 1.0) / np.sum(np.abs(a))
    return Reparameterized(base, a, rng.uniform(0, 2 * math.pi, modes))

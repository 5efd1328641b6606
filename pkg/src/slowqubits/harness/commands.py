"""Subcommand implementations.  Each returns a CommandResult; the CLI writes it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .. import cycle, oracles
from ..cycle import CycleSampler, InvariantViolation
from ..frozen import frozen
from ..lattice import chain_config
from ..lindblad import kernel_dimension
from ..parallel import ordered_map
from ..protocols import Circle
from ..response import LocalExpansion
from ..thermo import balance_residuals, instant, reference_temperature
from .config import ConfigError, RunConfig
from .output import ResultTable, summary_table

BALANCE_TOL = 1e-6

UNITS = {
    "rotor_L": "1/k_BT", "rotor_R": "1/k_BT", "max_eig_Lambda": "time",
    "max_eig_-Omega_L": "time", "max_eig_-Omega_R": "time",
}


@dataclass
class CommandResult:
    table: ResultTable
    extra: dict = field(default_factory=dict)  # name -> secondary ResultTable
    violations: list = field(default_factory=list)


def _meta(cfg: RunConfig, **more) -> dict:
    return {"config": cfg.source, "config_sha256": cfg.digest, **more}


# steady ------------------------------------------------------------------------------

def cmd_steady(cfg: RunConfig, X=None) -> CommandResult:
    """Eigenvalues, frozen state and its distance to the Gibbs state at one point."""
    system = cfg.system()
    X = cfg.point() if X is None else np.asarray(X, dtype=float)
    try:
        sol = frozen(system, X)
    except ValueError as exc:
        raise ValueError(f"steady state at X = {X.tolist()}: {exc}") from exc
    T = reference_temperature(system)
    gibbs = expm(-sol.H / T)
    gibbs /= np.trace(gibbs)
    resid = float(np.linalg.norm(sol.rho - gibbs))
    values = {}
    units = {}
    for k, e in enumerate(np.linalg.eigvalsh(sol.H)):
        values[f"energy_{k}"] = e
        units[f"energy_{k}"] = "k_BT"
    for k, p in enumerate(np.linalg.eigvalsh(sol.rho)[::-1]):
        values[f"population_{k}"] = p
    n = sol.dim
    for i in range(n):
        for j in range(n):
            values[f"rho_{i}{j}_re"] = sol.rho[i, j].real
            values[f"rho_{i}{j}_im"] = sol.rho[i, j].imag
    values["gibbs_residual"] = resid
    values["kernel_dimension"] = kernel_dimension(sol.generator.matrix)
    table = summary_table(values, units, _meta(cfg, X=X.tolist()), cfg.data["output"]["precision"])
    violations = []
    if resid > 1e-10:
        violations.append(f"frozen state differs from the Gibbs state by {resid:.3e}")
    return CommandResult(table, violations=violations)


# benchmark ---------------------------------------------------------------------------

def _instant_node(args):
    system, protocol, t, numerics = args
    X, V, A = protocol.evaluate(t)
    return instant(system, X, V, A, t, numerics)


def cmd_benchmark(cfg: RunConfig, nodes: int | None = None, workers: int | None = None) -> CommandResult:
    """Time series of the first- and second-order balances over one period."""
    system = cfg.system()
    protocol = cfg.protocol()
    if not protocol.periodic_smooth:
        raise ConfigError("benchmark needs a smooth periodic protocol (ellipse or circle)")
    numerics = cfg.numerics()
    n = nodes or cfg.data["protocol"]["nodes"]
    T = reference_temperature(system)
    tau = protocol.tau
    ts = np.arange(n) * tau / n
    reps = ordered_map(_instant_node, [(system, protocol, t, numerics) for t in ts], workers)
    res = balance_residuals(reps, tau, T)
    labels = reps[0].labels
    cols = [("t", "time")]
    cols += [(f"J1_{lab}", "k_BT/time") for lab in labels]
    cols += [("T_dSf_dt", "k_BT/time"), ("J2_sum", "k_BT/time"), ("P2", "k_BT/time"),
             ("T_dS1_dt", "k_BT/time"), ("residual_first_law", ""), ("residual_entropy1", ""),
             ("residual_entropy2", "")]
    prec = cfg.data["output"]["precision"]
    table = ResultTable(cols, meta=_meta(cfg, nodes=n), precision=prec)
    for k, r in enumerate(reps):
        table.add(r.t, *r.J1, T * r.dSf_dt, float(np.sum(r.J2)), r.P2, T * r.dS1_dt,
                  res.first_law[k], res.entropy1[k], res.entropy2[k])
    # uniform trapezoid = spectrally accurate on periodic data
    w = tau / n
    J1 = np.array([r.J1 for r in reps])
    J2 = np.array([r.J2 for r in reps])
    P1 = np.array([r.P1 for r in reps])
    P2 = np.array([r.P2 for r in reps])
    summary, units = {}, {}
    for a, lab in enumerate(labels):
        summary[f"Q_pump_{lab}"] = w * J1[:, a].sum()
    for a, lab in enumerate(labels):
        summary[f"Q2_{lab}"] = w * J2[:, a].sum()
    summary["W1"] = w * P1.sum()
    summary["W2"] = w * P2.sum()
    summary["second_order_sum"] = summary["W2"] + sum(summary[f"Q2_{lab}"] for lab in labels)
    scale = max(abs(summary["W2"]), max(abs(summary[f"Q2_{lab}"]) for lab in labels))
    summary["second_order_residual"] = abs(summary["second_order_sum"]) / scale if scale else 0.0
    for key, val in res.max().items():
        summary[f"max_residual_{key}"] = val
    for k in summary:
        units[k] = "" if "residual" in k else "k_BT"
    extra = {"summary": summary_table(summary, units, _meta(cfg, nodes=n), prec)}
    violations = [f"max {k} residual {v:.3e} exceeds {BALANCE_TOL:g}"
                  for k, v in res.max().items() if v > BALANCE_TOL]
    if summary["second_order_residual"] > BALANCE_TOL:
        violations.append(f"W2 + sum Q2 relative residual {summary['second_order_residual']:.3e}")
    return CommandResult(table, extra, violations)


# sweep -------------------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig, quantity: str | None = None, resolution=None,
              workers: int | None = None) -> CommandResult:
    """Field map over the (B_x, B_z) grid, optionally for several J values."""
    w = cfg.data["sweep"]
    quantity = quantity or w["field"]
    if quantity not in cycle.FIELD_QUANTITIES:
        raise ConfigError(f"unknown sweep field {quantity!r}; choose from {cycle.FIELD_QUANTITIES}")
    Bx, Bz = cfg.grid(resolution)
    if quantity.startswith("rotor") and (Bx.size < 3 or Bz.size < 3):
        raise ConfigError("rotor sweeps need at least 3 grid points per axis")
    Js = w["J"] if w["J"] is not None else [cfg.data["system"]["J"]]
    numerics = cfg.numerics()
    table = ResultTable([("J", "k_BT"), ("B_x", "k_BT"), ("B_z", "k_BT"),
                         (quantity, UNITS[quantity])],
                        meta=_meta(cfg, field=quantity, grid=f"{Bx.size}x{Bz.size}"),
                        precision=cfg.data["output"]["precision"])
    for J in Js:
        fm = cycle.field_map(cfg.system(J=float(J)), Bx, Bz, quantity, numerics, workers)
        if not np.all(np.isfinite(fm.values)):
            raise FloatingPointError(f"non-finite values in the {quantity} map at J = {J}")
        for x, z, v in fm.rows():
            table.add(float(J), x, z, v)
    return CommandResult(table)


# cycle -------------------------------------------------------------------------------

CYCLE_UNITS = {
    "tau": "time", "nodes": "", "cold": "", "W2": "k_BT", "Q_diss": "k_BT", "W1": "k_BT",
    "length2": "k_BT*time", "L2": "k_BT*time", "A": "k_BT", "merit": "k_BT/time", "dT": "k_BT",
    "tau_D": "time", "P_D": "k_BT/time", "P_max": "k_BT/time", "pump_sum_residual": "k_BT",
    "second_order_residual": "",
}


def cmd_cycle(cfg: RunConfig, nodes: int | None = None, workers: int | None = None) -> CommandResult:
    """Every per-cycle total for the configured protocol."""
    system = cfg.system()
    protocol = cfg.protocol()
    numerics = cfg.numerics()
    smp = CycleSampler(protocol, system, numerics, 2 if cfg.second_order() else 1, workers)
    rep = cycle.cycle_report(protocol, system, cfg.data["baths"]["cold"], cfg.data["cycle"]["dT"],
                             numerics, nodes or cfg.data["protocol"]["nodes"], workers,
                             second_order=cfg.second_order(), sampler=smp)
    values = rep.as_dict()
    values["second_order"] = cfg.second_order()
    units = dict(CYCLE_UNITS)
    for lab in rep.labels:
        units[f"Q_pump_{lab}"] = units[f"Q2_{lab}"] = "k_BT"
    if protocol.piece_labels() and len(set(protocol.piece_labels())) > 1:
        for piece in dict.fromkeys(protocol.piece_labels()):
            Q, dS = cycle.segment_heat(protocol, system, piece, numerics, rep.nodes, sampler=smp)
            for lab, q in zip(rep.labels, Q):
                values[f"Q_{lab}[{piece}]"] = q
                units[f"Q_{lab}[{piece}]"] = "k_BT"
            values[f"dS[{piece}]"] = dS
            units[f"dS[{piece}]"] = "k_B"
    table = summary_table(values, units, _meta(cfg, protocol=protocol.kind),
                          cfg.data["output"]["precision"])
    violations = rep.violations() if cfg.second_order() else [
        v for v in rep.violations() if not v.startswith("W2 + sum")
        and not v.startswith("dissipation bound")]
    return CommandResult(table, violations=violations)


# merit scan --------------------------------------------------------------------------

def _merit_row(system, protocol, cold, numerics, n, workers):
    smp = CycleSampler(protocol, system, numerics, 1, workers)
    Q = cycle.pumped_heat_line(protocol, system, None, numerics, n, sampler=smp)
    lr = cycle.thermodynamic_length(protocol, system, numerics, n, sampler=smp)
    A = float(Q[system.bath_index(cold)])
    return Q, A, lr.length2, A * A / lr.length2


def cmd_merit_scan(cfg: RunConfig, nodes: int | None = None, workers: int | None = None) -> CommandResult:
    """Pumped heat, squared length and A^2/length^2 on circles, over J, b and B0."""
    w = cfg.data["sweep"]
    if cfg.data["protocol"]["kind"] != "circle":
        raise ConfigError("merit-scan runs on circle protocols; set protocol.kind = 'circle'")
    Js = w["J"] if w["J"] is not None else [cfg.data["system"]["J"]]
    bs = w["b"] if w["b"] is not None else [cfg.data["system"]["b"]]
    B0s = w["B0"] if w["B0"] is not None else [cfg.data["protocol"]["B0"]]
    cold = cfg.data["baths"]["cold"]
    numerics = cfg.numerics()
    n = nodes or cfg.data["protocol"]["nodes"]
    table = ResultTable(
        [("n_qubits", ""), ("J", "k_BT"), ("b", ""), ("B0", "k_BT"), ("Q_pump_L", "k_BT"),
         ("Q_pump_R", "k_BT"), ("A", "k_BT"), ("length2", "k_BT*time"), ("merit", "k_BT/time")],
        meta=_meta(cfg, cold=cold, nodes=n), precision=cfg.data["output"]["precision"])
    violations = []
    if w["single_qubit_reference"]:
        for B0 in B0s:
            single = cfg.system(n_qubits=1, J=0.0, b=1.0)
            Q, A, l2, m = _merit_row(single, cfg.protocol(B0), cold, numerics, n, workers)
            table.add(1, 0.0, 1.0, B0, *Q, A, l2, m)
    for J in Js:
        for b in bs:
            system = cfg.system(J=float(J), b=float(b))
            for B0 in B0s:
                Q, A, l2, m = _merit_row(system, cfg.protocol(B0), cold, numerics, n, workers)
                if abs(Q.sum()) > 1e-8 * max(np.abs(Q).max(), 1e-300):
                    violations.append(f"pumped heats do not cancel at J={J}, b={b}, B0={B0}")
                table.add(system.n_qubits, J, b, B0, *Q, A, l2, m)
    return CommandResult(table, violations=violations)


# oracle check ------------------------------------------------------------------------

def _check(table, name, value, tol):
    ok = bool(value <= tol)
    table.add(name, value, tol, ok)
    return ok


def cmd_oracle_check(cfg: RunConfig, nodes: int | None = None, seed: int = 0) -> CommandResult:
    """Engine against the closed-form single-qubit and product-state references."""
    rng = np.random.default_rng(seed)
    d = cfg.data
    g = cfg.g_pair()
    b = d["baths"]
    kappa = d["system"]["field_scale"]
    numerics = cfg.numerics()

    def make(n, J=0.0, eta=1.0, bb=1.0):
        return chain_config(n, J, eta, bb, g=g, T=b["T"], omega_c=b["omega_c"], field_scale=kappa)

    table = ResultTable([("check", ""), ("value", ""), ("tolerance", ""), ("pass", "")],
                        meta=_meta(cfg, seed=seed), precision=d["output"]["precision"])
    failures = []

    one = make(1)
    baths = oracles.qubit_baths(one, 0)
    err_r = 0.0
    for x in np.linspace(0.1, 3.0, 6):
        for z in np.linspace(0.1, 3.0, 6):
            rho = frozen(one, np.array([x, z])).rho
            r = np.array([np.trace(rho @ s).real for s in oracles._SIGMA])
            ref = oracles.single_qubit_steady(np.array([x, 0.0, z]), baths, kappa).r
            err_r = max(err_r, float(np.linalg.norm(r - ref)))
    if not _check(table, "single_qubit_bloch_vector", err_r, 1e-10):
        failures.append("single-qubit frozen state")

    circle = Circle(d["protocol"]["B0"])
    n = nodes or 64
    ts = np.arange(n) / n * circle.tau
    engine, ref, r1err, r1scale = [], [], 0.0, 0.0
    for t in ts:
        X, V, _ = circle.evaluate(t)
        loc = LocalExpansion(one, X, numerics, order=1)
        rho1 = loc.rho1(V)
        engine.append(loc.sol.heat(rho1))
        B = np.array([X[0], 0.0, X[1]])
        Bd = np.array([V[0], 0.0, V[1]])
        ref.append(oracles.single_qubit_heat1(B, Bd, baths, kappa))
        r1 = np.array([np.trace(rho1 @ s).real for s in oracles._SIGMA])
        r1ref = oracles.single_qubit_rho1(B, Bd, baths, kappa).r
        r1err = max(r1err, float(np.linalg.norm(r1 - r1ref)))
        r1scale = max(r1scale, float(np.linalg.norm(r1ref)))
    engine, ref = np.array(engine), np.array(ref)
    rel = float(np.max(np.abs(engine - ref)) / np.max(np.abs(ref)))
    if not _check(table, "single_qubit_heat1_relative", rel, 1e-8):
        failures.append("single-qubit first-order current")
    if not _check(table, "single_qubit_rho1_relative", r1err / r1scale, 1e-8):
        failures.append("single-qubit first-order state")

    prod = make(2, 0.0, 1.2, 2.0)
    err_f = err_1 = err_j = 0.0
    err_dr = 0.0
    for _ in range(8):
        X = rng.uniform(0.1, 2.0, 2)
        V = rng.normal(size=2)
        loc = LocalExpansion(prod, X, numerics, order=1)
        sol = oracles.product_state_solver(prod, X, V)
        rho1 = loc.rho1(V)
        err_f = max(err_f, float(np.linalg.norm(sol.rho_f - loc.sol.rho)))
        err_1 = max(err_1, float(np.linalg.norm(sol.rho1 - rho1) / np.linalg.norm(sol.rho1)))
        J1 = loc.sol.heat(rho1)
        err_j = max(err_j, float(np.max(np.abs(J1 - sol.total_heat1)) / np.max(np.abs(J1))))
        err_dr = max(err_dr, float(np.linalg.norm(oracles.correlation_current_split(prod, X, V).delta_R)))
    ok = [_check(table, "product_rho_f", err_f, 1e-10),
          _check(table, "product_rho1_relative", err_1, 1e-8),
          _check(table, "product_heat1_relative", err_j, 1e-8),
          _check(table, "product_correlation_matrix", err_dr, 1e-10)]
    if not all(ok):
        failures.append("product-state solution")

    J = d["system"]["J"] or 2.0
    inter = make(2, J, d["system"]["eta"] if d["system"]["eta"] != 1.0 else 1.2, d["system"]["b"])
    worst = 0.0
    for _ in range(8):
        X = rng.uniform(0.1, 2.0, 2)
        V = rng.normal(size=2)
        worst = max(worst, oracles.correlation_current_split(inter, X, V, numerics).residual)
    if not _check(table, "correlation_split_residual", worst, 1e-9):
        failures.append("correlation split")
    return CommandResult(table, violations=[f"oracle mismatch: {f}" for f in failures])


__all__ = ["CommandResult", "cmd_benchmark", "cmd_cycle", "cmd_merit_scan", "cmd_oracle_check",
           "cmd_steady", "cmd_sweep", "InvariantViolation"]

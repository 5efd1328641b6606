import numpy as np
import pytest

from slowqubits import oracles
from slowqubits.frozen import frozen
from slowqubits.lattice import chain_config
from slowqubits.protocols import benchmark_ellipse
from slowqubits.response import LocalExpansion
from slowqubits.thermo import (
    balance_residuals,
    instant,
    log_form_s1,
    reference_temperature,
    von_neumann,
)

from _support import KAPPA, make


def test_von_neumann_limits():
    assert von_neumann(np.diag([1.0, 0, 0, 0])) == 0.0
    assert von_neumann(np.eye(4) / 4) == pytest.approx(np.log(4))


def test_log_and_energy_forms_of_s1_agree():
    c = make(J=1.0)
    X, V = np.array([0.8, 1.2]), np.array([0.5, -0.2])
    loc = LocalExpansion(c, X, order=1)
    rho1 = loc.rho1(V)
    energy_form = np.trace(rho1 @ loc.sol.H).real / 1.0
    assert log_form_s1(loc.sol.rho, rho1) == pytest.approx(energy_form, rel=1e-10)
    with pytest.raises(ValueError, match="singular"):
        log_form_s1(np.diag([1.0, 0, 0, 0]), rho1)


def test_reference_temperature():
    assert reference_temperature(make(T=0.5)) == 0.5
    with pytest.raises(ValueError, match="different temperatures"):
        reference_temperature(chain_config(2, T=(1.0, 2.0)))


def test_instant_single_qubit_against_closed_form():
    c = make(1)
    X, V, A = np.array([0.7, 1.1]), np.array([0.4, -0.9]), np.array([0.1, 0.2])
    r = instant(c, X, V, A)
    B, Bd = [0.7, 0, 1.1], [0.4, 0, -0.9]
    ref = oracles.single_qubit_heat1(B, Bd, oracles.qubit_baths(c, 0), KAPPA)
    assert np.allclose(r.J1, ref, rtol=1e-8)
    assert r.dSf_dt == pytest.approx(oracles.single_qubit_entropy_rate(B, Bd, 1.0, KAPPA), rel=1e-8)
    # Gibbs state: zeroth-order currents vanish
    assert np.all(np.abs(r.Jf) < 1e-14)
    assert abs(r.first_law_residual) < 1e-10 * max(abs(r.dE_dt), abs(r.P1))


def test_instant_balances_pointwise():
    c = make(J=2.0)
    r = instant(c, [1.1, 0.6], [0.8, 0.3], [-0.5, 1.0], t=0.25)
    assert r.t == 0.25 and r.labels == ("L", "R")
    assert r.dSf_dt == pytest.approx(np.sum(r.J1), rel=1e-9)
    assert r.dS1_dt == pytest.approx(np.sum(r.J2) + r.P2, rel=1e-7)
    assert r.P2 > 0


def test_balance_residuals_on_benchmark_cycle():
    c = make(J=0.0, eta=1.2, b=2.0)
    p = benchmark_ellipse()
    n = 64
    ts = np.arange(n) / n
    reps = [instant(c, *p.evaluate(t), t=t) for t in ts]
    res = balance_residuals(reps, p.tau, 1.0)
    assert max(res.max().values()) < 1e-6
    chain = balance_residuals(reps, p.tau, 1.0, spectral=False)
    assert max(chain.max().values()) < 1e-8
    with pytest.raises(ValueError, match="no reports"):
        balance_residuals([], 1.0)


def test_heat_sign_convention():
    """Raising the field: the lagging state relaxes by releasing energy to the bath."""
    c = make(1)
    sol = frozen(c, [0.0, 1.0])
    loc = LocalExpansion(c, [0.0, 1.0], order=1)
    J1 = loc.lambda1 @ np.array([0.0, 1.0])
    # the z-coupled bath is parallel to B and exchanges no energy
    assert J1[0] < 0 and abs(J1[1]) < 1e-15
    assert sol.rho[0, 0].real > 0.5

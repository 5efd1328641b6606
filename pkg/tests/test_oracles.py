import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from slowqubits import oracles
from slowqubits.frozen import frozen
from slowqubits.lattice import BathSpec, SystemConfig, embed, spin
from slowqubits.oracles import (
    BlochState,
    QubitBath,
    correlation_current_split,
    local_part,
    partial_trace,
    product_state_solver,
    qubit_baths,
    single_qubit_rates,
    single_qubit_steady,
    spin_vector,
)

from _support import KAPPA, make

coord = st.floats(0.1, 2.5)


def _bath(a, g=0.1, T=1.0, wc=120.0, label="a"):
    return QubitBath(label, g, T, wc, np.asarray(a, float))


def test_bloch_state_validation():
    with pytest.raises(ValueError, match="frame"):
        BlochState(np.zeros(3), "rotating")
    with pytest.raises(ValueError, match="longer than 1"):
        BlochState(np.array([1.0, 1.0, 0.0]), "laboratory")
    rho = BlochState(np.array([0, 0, 0.5]), "laboratory").density()
    assert np.allclose(rho, np.diag([0.75, 0.25]))


@given(coord, st.floats(-2, 2), coord, st.floats(0.3, 3))
def test_steady_bloch_vector_is_thermal(bx, by, bz, T):
    """r_f = tanh(kappa |B| / 2T) B/|B|: the Gibbs state of -kappa B.S."""
    B = np.array([bx, by, bz])
    r = single_qubit_steady(B, [_bath([1, 0, 0], T=T), _bath([0, 0, 1], T=T)], KAPPA).r
    h = -KAPPA * np.tensordot(B, oracles._SIGMA, axes=1) / 2
    rho = expm(-h / T)
    rho /= np.trace(rho)
    assert np.allclose(r, spin_vector(rho), atol=1e-12)
    eig = single_qubit_steady(B, [_bath([1, 0, 0], T=T)], KAPPA, frame="eigenbasis").r
    assert eig[:2].tolist() == [0.0, 0.0] and eig[2] == pytest.approx(np.linalg.norm(r))


@given(coord, coord)
def test_rates_match_generator_spectrum(bx, bz):
    """Bloch rates are the relaxation eigenvalues of the engine's qubit generator."""
    c = make(1)
    sol = frozen(c, [bx, bz])
    _, gpar, gperp = single_qubit_rates([bx, 0, bz], qubit_baths(c, 0), KAPPA)
    w = KAPPA * np.hypot(bx, bz)
    ev = np.linalg.eigvals(sol.generator.matrix)
    expected = np.array([0.0, -gpar, -gperp + 1j * w, -gperp - 1j * w])
    for e in expected:
        assert np.min(np.abs(ev - e)) < 1e-10 * max(1.0, w)


def test_rates_without_cutoff_are_larger():
    baths = [_bath([1, 0, 0], wc=5.0)]
    g_cut, _, _ = single_qubit_rates([0, 0, 3.0], baths, cutoff=True)
    g_free, _, _ = single_qubit_rates([0, 0, 3.0], baths, cutoff=False)
    assert g_free[0] / g_cut[0] == pytest.approx(np.exp(6.0 / 5.0))


def test_heat1_split_and_entropy_rate():
    baths = [_bath([1, 0, 0], g=0.1, label="L"), _bath([0, 0, 1], g=0.3, label="R")]
    B, Bd = np.array([0.8, 0, 0.6]), np.array([0.2, 0, -0.5])
    J = oracles.single_qubit_heat1(B, Bd, baths)
    dS = oracles.single_qubit_entropy_rate(B, Bd, 1.0)
    assert J.sum() == pytest.approx(dS)
    gam, _, _ = single_qubit_rates(B, baths)
    assert J[0] / J[1] == pytest.approx(gam[0] / gam[1])


def test_degenerate_inputs():
    baths = [_bath([1, 0, 0])]
    assert np.all(single_qubit_steady(np.zeros(3), baths).r == 0)
    with pytest.raises(ValueError, match="B = 0"):
        oracles.single_qubit_rho1(np.zeros(3), np.ones(3), baths)
    with pytest.raises(ValueError, match="B = 0"):
        oracles.single_qubit_heat1(np.zeros(3), np.ones(3), baths)
    # field parallel to the only coupling: no transitions
    with pytest.raises(ValueError, match="not unique"):
        single_qubit_steady([1.0, 0, 0], baths)
    with pytest.raises(ValueError, match="one temperature"):
        oracles.single_qubit_heat1([0, 0, 1.0], [0, 0, 1.0], [_bath([1, 0, 0]), _bath([1, 0, 0], T=2)])


def test_partial_trace_and_local_parts():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b /= np.trace(b)
    assert np.allclose(partial_trace(np.kron(a, b), 0, 2), a)
    op = 0.3 * embed(spin("x"), 0, 3) + 1.7 * embed(spin("z"), 2, 3) + 0.2 * np.eye(8)
    assert np.allclose(spin_vector(local_part(op, 0, 3)), [0.3, 0, 0])
    assert np.allclose(spin_vector(local_part(op, 2, 3)), [0, 0, 1.7])
    assert np.allclose(local_part(op, 1, 3), 0)
    vecs = [qb.a for qb in qubit_baths(make(b=2.0), 1)]
    assert np.allclose(vecs, [[2, 0, 0], [0, 0, 2]])


def test_product_solver_rejects_coupled_registers():
    with pytest.raises(ValueError, match="J = 0"):
        product_state_solver(make(J=1.0), [1, 1], [1, 0])
    xx = embed(spin("x"), 0, 2) @ embed(spin("x"), 1, 2)
    cfg = SystemConfig(2, baths=(BathSpec("L", 0.1, 1.0, 100.0, xx),), field_scale=KAPPA)
    with pytest.raises(ValueError, match="single-qubit terms"):
        product_state_solver(cfg, [1, 1], [1, 0])
    with pytest.raises(ValueError, match="layout"):
        product_state_solver(make(), [1, 1], [1, 0, 0])


@given(coord, coord, st.floats(-2, 2), st.floats(-2, 2))
def test_product_solution_is_a_product(bx, bz, vx, vz):
    c = make(J=0.0, eta=1.2, b=2.0)
    sol = product_state_solver(c, [bx, bz], [vx, vz])
    (r1, _), (r2, _) = sol.qubits
    assert np.allclose(sol.rho_f, np.kron(BlochState(r1, "laboratory").density(),
                                          BlochState(r2, "laboratory").density()))
    assert abs(np.trace(sol.rho1)) < 1e-14 * max(1.0, np.linalg.norm(sol.rho1))
    assert sol.heat1.shape == (2, 2)
    assert sol.total_heat1.sum() == pytest.approx(sol.entropy_rate.sum(), rel=1e-9, abs=1e-15)


def test_correlation_split_uncoupled_pair():
    c = make(J=0.0, eta=1.2, b=2.0)
    X, V = np.array([0.9, 1.4]), np.array([0.7, -0.3])
    split = correlation_current_split(c, X, V)
    ref = product_state_solver(c, X, V)
    assert np.linalg.norm(split.delta_R) < 1e-12
    assert np.max(np.abs(split.J_12)) < 1e-10 * np.max(np.abs(split.J_total))
    assert np.allclose(split.J_q1, ref.heat1[0], rtol=1e-8)
    assert np.allclose(split.J_q2, ref.heat1[1], rtol=1e-8)
    assert split.residual < 1e-12


@pytest.mark.parametrize("J", [1.0, 2.0])
def test_correlation_split_interacting_pair(J):
    c = make(J=J, eta=1.2, b=2.0)
    split = correlation_current_split(c, [0.9, 1.4], [0.7, -0.3])
    assert split.residual < 1e-12
    assert np.linalg.norm(split.delta_R) > 1e-3
    assert np.max(np.abs(split.J_12)) > 1e-6 * np.max(np.abs(split.J_total))
    assert np.allclose(split.terms_12.sum(axis=0), split.J_12)


def test_correlation_split_needs_two_qubits():
    with pytest.raises(ValueError, match="two qubits"):
        correlation_current_split(make(1), [1, 1], [1, 0])

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slowqubits.frozen import build_frozen, frozen
from slowqubits.lattice import hamiltonian
from slowqubits.lindblad import (
    DegenerateKernelError,
    SingularOperatorError,
    Superoperator,
    TracelessSolver,
    bohr_channels,
    bordered_condition,
    channel_stack,
    dissipator,
    eigendecompose,
    inverse_on_traceless,
    kernel_dimension,
    lindbladian,
    ohmic_rate,
    ohmic_rates,
    spost,
    spre,
    steady_state,
    unvec,
    vec,
)

from _support import COMBOS, DEGENERATE, make, gibbs

rng = np.random.default_rng(7)


def _rand_herm(n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def test_vec_roundtrip_and_superoperators():
    A, X, B = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(unvec(vec(X)), X)
    assert np.allclose(unvec(spre(A) @ vec(X)), A @ X)
    assert np.allclose(unvec(spost(B) @ vec(X)), X @ B)
    assert np.allclose(vec(A @ X @ B), np.kron(B.T, A) @ vec(X))


def test_eigendecompose_merges_degenerate_levels():
    H = np.diag([1.0, 1.0 + 1e-12, 3.0, -2.0])
    basis = eigendecompose(H)
    assert np.allclose(basis.energies, [-2.0, 1.0, 3.0])
    P = basis.projectors
    assert [int(round(np.trace(p).real)) for p in P] == [1, 2, 1]
    assert np.allclose(sum(P), np.eye(4))
    for p in P:
        assert np.allclose(p @ p, p)
    assert np.allclose(basis.reconstruct(), H)


def test_eigendecompose_absolute_tolerance():
    H = np.diag([0.0, 1e-3])
    assert len(eigendecompose(H).energies) == 2
    assert len(eigendecompose(H, degeneracy_tol=1e-2).energies) == 1


def test_eigendecompose_rejects_non_hermitian():
    with pytest.raises(ValueError, match="Hermitian"):
        eigendecompose(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError, match="square"):
        eigendecompose(np.zeros((2, 3)))


@given(st.integers(0, 10_000))
def test_eigenoperators_are_complete_and_shift_energy(seed):
    r = np.random.default_rng(seed)
    H = hamiltonian(make(J=r.uniform(0, 3)), r.uniform(-2, 2, 2))
    pi = _rand_herm(4)
    basis = eigendecompose(H)
    freqs, ops = channel_stack(basis, pi)
    assert np.allclose(ops.sum(axis=0), pi)
    for w, op in zip(freqs, ops):
        # [H, pi_w] = -w pi_w
        assert np.allclose(H @ op - op @ H, -w * op, atol=1e-9)
    assert np.all(np.diff(freqs) > 0)
    assert [c.frequency for c in bohr_channels(basis, pi)] == list(freqs)


@given(st.floats(1e-3, 50), st.floats(0.1, 5), st.floats(10, 500))
def test_ohmic_detailed_balance(w, T, wc):
    up, down = ohmic_rate(w, T, wc), ohmic_rate(-w, T, wc)
    assert up / down == pytest.approx(np.exp(w / T), rel=1e-10)
    assert up - down == pytest.approx(w * np.exp(-w / wc), rel=1e-10)


def test_ohmic_zero_frequency_limit():
    assert ohmic_rate(0.0, 0.7, 100.0) == 0.7
    assert ohmic_rate(1e-9, 0.7, 100.0) == pytest.approx(0.7, rel=1e-8)
    w = np.array([-3.0, -1e-4, 0.0, 1e-4, 2.0])
    assert np.allclose(ohmic_rates(w, 1.3, 80.0), [ohmic_rate(x, 1.3, 80.0) for x in w])


@pytest.mark.parametrize("J, eta, b", COMBOS)
def test_dissipators_preserve_trace_and_gibbs(J, eta, b):
    c = make(J=J, eta=eta, b=b)
    X = np.array([0.7, 1.3])
    H = hamiltonian(c, X)
    basis = eigendecompose(H)
    rho_th = gibbs(H)
    for bath in c.baths:
        D = dissipator(bath, channel_stack(basis, bath.operator), basis)
        assert np.allclose(vec(np.eye(4)) @ D.matrix, 0, atol=1e-14)
        assert np.linalg.norm(D.matrix @ vec(rho_th)) < 1e-13
        # Hermiticity preserving
        Y = D.apply(_rand_herm(4))
        assert np.allclose(Y, Y.conj().T)


def test_lindbladian_rejects_foreign_dissipator():
    c = make()
    b1 = eigendecompose(hamiltonian(c, [1.0, 1.0]))
    b2 = eigendecompose(hamiltonian(c, [2.0, 1.0]))
    D = dissipator(c.baths[0], channel_stack(b1, c.baths[0].operator), b1)
    with pytest.raises(ValueError, match="different Hamiltonian"):
        lindbladian(b2.hamiltonian, [D])


@given(st.floats(0.01, 2), st.floats(0.01, 2), st.sampled_from([c for c in COMBOS if c not in DEGENERATE]))
def test_steady_state_is_gibbs(bx, bz, combo):
    c = make(J=combo[0], eta=combo[1], b=combo[2])
    sol = build_frozen(c, [bx, bz])
    assert np.linalg.norm(sol.rho - gibbs(sol.H)) < 1e-10
    assert kernel_dimension(sol.generator.matrix) == 1


@pytest.mark.parametrize("J, eta, b", DEGENERATE)
def test_symmetric_pair_has_degenerate_kernel(J, eta, b):
    c = make(J=J, eta=eta, b=b)
    with pytest.raises(DegenerateKernelError) as info:
        build_frozen(c, [0.8, 1.1])
    assert "not unique" in str(info.value)


def test_zero_generator_is_degenerate():
    with pytest.raises(DegenerateKernelError, match="identically zero"):
        steady_state(Superoperator(np.zeros((4, 4), complex), "zero"))


def test_traceless_solver_against_pseudoinverse():
    sol = frozen(make(J=1.0), [0.9, 0.4])
    L = sol.generator
    y = _rand_herm(4)
    y -= np.trace(y) / 4 * np.eye(4)
    x = inverse_on_traceless(L, y)
    assert abs(np.trace(x)) < 1e-12
    assert np.allclose(L.apply(x), y, atol=1e-10)
    # oracle: any solution plus a multiple of the kernel vector rho_f
    x_ref = unvec(np.linalg.pinv(L.matrix) @ vec(y))
    x_ref -= np.trace(x_ref) * sol.rho
    assert np.allclose(x, x_ref, atol=1e-8 * np.linalg.norm(x))
    stack = TracelessSolver(L)(np.stack([y, 2 * y]))
    assert np.allclose(stack[1], 2 * x)
    assert np.isfinite(bordered_condition(L))


def test_traceless_solver_rejects_trace():
    solver = TracelessSolver(frozen(make(), [1.0, 1.0]).generator)
    with pytest.raises(ValueError, match="not traceless"):
        solver(np.eye(4))


def test_traceless_solver_detects_singular_generator():
    c = make(eta=1.0, b=1.0)
    H = hamiltonian(c, [1.0, 1.0])
    basis = eigendecompose(H)
    diss = [dissipator(b, channel_stack(basis, b.operator), basis) for b in c.baths]
    with pytest.raises(SingularOperatorError):
        TracelessSolver(lindbladian(H, diss))

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decometry.channels import DephasingChannel, apply_dephasing
from decometry.errors import ValidationError
from decometry.qstate import (
    BipartiteState,
    BlochVector,
    as_density_matrix,
    basis_state,
    bloch_from_qubit,
    cq_state,
    fidelity,
    load_state,
    maximally_coherent,
    maximally_entangled,
    partial_trace,
    qubit_from_bloch,
    random_density,
    random_pure,
    random_unitary,
    save_state,
    spectral_decomposition,
    state_from_json,
    state_to_json,
    tensor,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 6)

PLUS = maximally_coherent(2)
MINUS = maximally_coherent(2, [0, np.pi])
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def assert_valid(rho):
    rho = np.asarray(rho)
    assert np.max(np.abs(rho - rho.conj().T)) <= 1e-12
    assert abs(np.trace(rho) - 1) <= 1e-12
    assert np.linalg.eigvalsh(rho)[0] >= -1e-10


def test_validation_rejects_bad_matrices():
    with pytest.raises(ValidationError, match="Hermitian"):
        as_density_matrix([[0.5, 0.1], [0.2, 0.5]])
    with pytest.raises(ValidationError, match="trace"):
        as_density_matrix(np.eye(2))
    with pytest.raises(ValidationError, match="positive"):
        as_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        as_density_matrix(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        as_density_matrix(np.eye(65) / 65)


def test_spectral_decomposition_examples():
    sd = spectral_decomposition(np.eye(2) / 2)
    np.testing.assert_allclose(sd.eigenvalues, [0.5, 0.5])

    sd = spectral_decomposition(PLUS)
    np.testing.assert_allclose(sd.eigenvalues, [1, 0], atol=1e-15)
    v = sd.eigenvectors[:, 0]
    assert abs(abs(v @ np.array([1, 1]) / np.sqrt(2)) - 1) < 1e-12

    # Dephased uniform superposition in d=3 at p=0.5: (1 - p + p/d, p/d, p/d)
    rho = apply_dephasing(maximally_coherent(3), DephasingChannel(0.5))
    np.testing.assert_allclose(spectral_decomposition(rho).eigenvalues, [2 / 3, 1 / 6, 1 / 6])


def test_spectral_decomposition_clamps_tiny_negatives():
    rho = np.diag([1.0 + 1e-11, -1e-11]).astype(complex)
    assert spectral_decomposition(rho).eigenvalues.min() == 0.0


def test_spectral_decomposition_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        spectral_decomposition([[0.5, 1], [0, 0.5]])


@settings(max_examples=50, deadline=None)
@given(seeds, dims, st.data())
def test_spectral_decomposition_invariants(seed, d, data):
    rank = data.draw(st.integers(1, d))
    rho = random_density(d, rank, seed)
    sd = spectral_decomposition(rho)
    assert np.all(np.diff(sd.eigenvalues) <= 1e-15)
    assert np.linalg.norm(sd.reconstruct() - rho) <= 1e-10
    v = sd.eigenvectors
    assert np.max(np.abs(v.conj().T @ v - np.eye(d))) <= 1e-10
    again = spectral_decomposition(sd.reconstruct())
    assert np.linalg.norm(again.reconstruct() - sd.reconstruct()) <= 1e-10


def test_fidelity_examples():
    assert fidelity(PLUS, PLUS) == pytest.approx(1, abs=1e-12)
    assert fidelity(basis_state(2, 0), basis_state(2, 1)) == pytest.approx(0, abs=1e-12)
    # pure-vs-mixed closed form sqrt(<psi|sigma|psi>)
    psi = np.array([1, 1]) / np.sqrt(2)
    sigma = np.eye(2) / 2
    oracle = np.sqrt((psi.conj() @ sigma @ psi).real)
    assert oracle == pytest.approx(1 / np.sqrt(2))
    assert fidelity(PLUS, sigma) == pytest.approx(oracle, abs=1e-12)
    with pytest.raises(ValidationError):
        fidelity(PLUS, np.eye(3) / 3)


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_fidelity_symmetric_and_bounded(seed, d):
    rng = np.random.default_rng(seed)
    a = random_density(d, int(rng.integers(1, d + 1)), rng)
    b = random_density(d, int(rng.integers(1, d + 1)), rng)
    f = fidelity(a, b)
    assert 0 <= f <= 1
    assert abs(f - fidelity(b, a)) <= 1e-10
    assert fidelity(a, a) == pytest.approx(1, abs=1e-10)
    # distinct random states are never confused with identical ones
    assert np.linalg.norm(a - b) > 1e-8 and f < 1 - 1e-12


def test_tensor_examples():
    np.testing.assert_allclose(tensor(np.eye(2) / 2, np.eye(2) / 2).state, np.eye(4) / 4)
    np.testing.assert_allclose(tensor(basis_state(2, 0), basis_state(2, 1)).state, basis_state(4, 1))
    v = np.array([1, 0, 1, 0]) / np.sqrt(2)
    np.testing.assert_allclose(tensor(PLUS, basis_state(2, 0)).state, np.outer(v, v), atol=1e-15)


def test_partial_trace_examples():
    a, b = random_density(2, seed=1), random_density(3, seed=2)
    ab = tensor(a, b)
    np.testing.assert_allclose(partial_trace(ab, "A"), a, atol=1e-12)
    np.testing.assert_allclose(partial_trace(ab, "B"), b, atol=1e-12)
    np.testing.assert_allclose(partial_trace(maximally_entangled(2), "A"), np.eye(2) / 2, atol=1e-15)

    probs = [0.3, 0.7]
    conds = [random_density(2, seed=3), random_density(2, seed=4)]
    cq = cq_state(probs, np.eye(2), conds)
    np.testing.assert_allclose(partial_trace(cq, "B"), 0.3 * conds[0] + 0.7 * conds[1], atol=1e-15)
    with pytest.raises(ValidationError):
        partial_trace(cq, "C")


def test_partial_trace_of_products_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(100):
        dA, dB = rng.integers(2, 5, size=2)
        a = random_density(dA, seed=rng)
        b = random_density(dB, seed=rng)
        assert np.max(np.abs(partial_trace(tensor(a, b), "A") - a)) <= 1e-12


def test_maximally_coherent():
    np.testing.assert_allclose(maximally_coherent(2, [0, 0]), PLUS)
    np.testing.assert_allclose(maximally_coherent(3), np.full((3, 3), 1 / 3))
    np.testing.assert_allclose(MINUS, np.array([[1, -1], [-1, 1]]) / 2, atol=1e-15)
    rho = maximally_coherent(4, [0.1, 2.0, -1.0, 3.0])
    np.testing.assert_allclose(np.abs(rho), np.full((4, 4), 0.25))
    with pytest.raises(ValidationError):
        maximally_coherent(3, [0, 0])


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_maximally_entangled(d):
    state = maximally_entangled(d)
    assert np.linalg.matrix_rank(state.state) == 1
    for side in "AB":
        assert np.max(np.abs(partial_trace(state, side) - np.eye(d) / d)) <= 1e-12
    if d == 2:
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        np.testing.assert_allclose(state.state, np.outer(bell, bell))


def test_cq_state():
    state = cq_state([1, 0], np.eye(2), [np.eye(2) / 2, np.eye(2) / 2])
    np.testing.assert_allclose(state.state, np.kron(basis_state(2, 0), np.eye(2) / 2))
    state = cq_state([0.5, 0.5], H, [basis_state(2, 0), basis_state(2, 1)])
    expected = 0.5 * np.kron(PLUS, basis_state(2, 0)) + 0.5 * np.kron(MINUS, basis_state(2, 1))
    np.testing.assert_allclose(state.state, expected, atol=1e-15)
    with pytest.raises(ValidationError):
        cq_state([0.5, 0.6], np.eye(2), [np.eye(2) / 2] * 2)
    with pytest.raises(ValidationError):
        cq_state([0.5, 0.5], np.ones((2, 2)), [np.eye(2) / 2] * 2)


def test_bipartite_dims_must_match():
    with pytest.raises(ValidationError):
        BipartiteState(np.eye(4) / 4, (2, 3))


def test_random_generators():
    assert_valid(random_density(2, 1, seed=5))
    np.testing.assert_allclose(spectral_decomposition(random_density(2, 1, seed=5)).eigenvalues,
                               [1, 0], atol=1e-12)
    for d in (2, 5, 16):
        U = random_unitary(d, seed=d)
        assert np.linalg.norm(U.conj().T @ U - np.eye(d)) <= 1e-10
    assert np.array_equal(random_unitary(4, seed=11), random_unitary(4, seed=11))
    assert np.array_equal(random_density(4, 2, seed=11), random_density(4, 2, seed=11))
    assert np.array_equal(random_pure(3, seed=11), random_pure(3, seed=11))
    with pytest.raises(ValidationError):
        random_density(3, 4, seed=0)
    with pytest.raises(ValidationError):
        random_density(3, 0, seed=0)


@settings(max_examples=50, deadline=None)
@given(seeds, dims, st.data())
def test_random_states_are_valid(seed, d, data):
    rank = data.draw(st.integers(1, d))
    rho = random_density(d, rank, seed)
    assert_valid(rho)
    assert np.linalg.matrix_rank(rho, tol=1e-10) == rank
    assert_valid(random_pure(d, seed))


def test_haar_unitary_first_moment():
    # E|U_00|^2 = 1/d for Haar unitaries
    d = 3
    vals = [abs(random_unitary(d, seed=s)[0, 0]) ** 2 for s in range(4000)]
    assert np.mean(vals) == pytest.approx(1 / d, abs=0.02)


def test_bloch_round_trip():
    assert bloch_from_qubit(np.eye(2) / 2) == pytest.approx((0, 0, 0))
    assert bloch_from_qubit(PLUS) == pytest.approx((1, 0, 0))
    np.testing.assert_allclose(qubit_from_bloch((1, 0, 0)), PLUS)
    rho = qubit_from_bloch((0.5, 0, 0.3))
    assert rho[0, 1] == pytest.approx(0.25)
    rng = np.random.default_rng(0)
    for _ in range(100):
        rho = random_density(2, int(rng.integers(1, 3)), rng)
        assert np.max(np.abs(qubit_from_bloch(bloch_from_qubit(rho)) - rho)) <= 1e-12
    with pytest.raises(ValidationError):
        qubit_from_bloch((1, 1, 0))
    assert BlochVector(0.6, 0.8, 0).r2 == pytest.approx(1)


def test_state_json_round_trip(tmp_path):
    rho = random_density(3, seed=4)
    path = tmp_path / "s.json"
    save_state(path, rho)
    assert np.max(np.abs(load_state(path) - rho)) <= 1e-15
    obj = json.loads(path.read_text())
    assert set(obj) == {"dim", "re", "im"} and obj["dim"] == 3

    bi = maximally_entangled(2)
    save_state(path, bi)
    back = load_state(path)
    assert isinstance(back, BipartiteState) and back.dims == (2, 2)
    assert np.max(np.abs(back.state - bi.state)) <= 1e-15


def test_state_json_rejects_malformed(tmp_path):
    with pytest.raises(ValidationError):
        state_from_json({"re": [[1]]})
    with pytest.raises(ValidationError):
        state_from_json({"dim": 3, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]})
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError):
        load_state(path)
    assert state_to_json(np.eye(2) / 2)["dim"] == 2

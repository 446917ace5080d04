import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rqclab.errors import InvalidArgument
from rqclab.linalg import (PAULIS, bloch_vector, check_channel_contraction, density_from_bloch,
                           frobenius_norm, haar_states, haar_unitaries, haar_unitary, is_density_matrix,
                           matrix_from_pairs, matrix_to_pairs, partial_trace, pauli_basis, pauli_coords,
                           pauli_reconstruct, project_to_bloch_ball, single_qubit_state, trace_norm)
from rqclab.rng import RngStream

seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds, st.sampled_from([1, 2, 4, 8]))
@settings(max_examples=40, deadline=None)
def test_haar_unitary_is_unitary(seed, dim):
    u = haar_unitary(dim, np.random.default_rng(seed))
    assert np.abs(u.conj().T @ u - np.eye(dim)).max() <= 1e-10


def test_dim_one_is_a_phase():
    u = haar_unitary(1, np.random.default_rng(3))
    assert u.shape == (1, 1) and abs(abs(u[0, 0]) - 1) < 1e-15


def test_dim_zero_rejected():
    with pytest.raises(InvalidArgument):
        haar_unitary(0, np.random.default_rng(0))


def test_same_stream_same_draws():
    a = haar_unitaries(4, 5, RngStream(9, (1, 2)))
    b = haar_unitaries(4, 5, RngStream(9, (1, 2)))
    c = haar_unitaries(4, 5, RngStream(9, (1, 3)))
    assert np.array_equal(a, b) and not np.allclose(a, c)


def test_entry_second_moment():
    us = haar_unitaries(4, 20000, np.random.default_rng(11))
    x = np.abs(us[:, 0, 0]) ** 2
    assert abs(x.mean() - 0.25) < 4 * x.std() / math.sqrt(len(x))


def test_haar_states_normalised():
    v = haar_states(6, 50, np.random.default_rng(2))
    assert np.allclose(np.linalg.norm(v, axis=1), 1)


def test_partial_trace_product():
    g = np.random.default_rng(4)
    rho = single_qubit_state(haar_states(2, 1, g)[0])
    full = np.kron(np.eye(2) / 2, rho)
    assert np.allclose(partial_trace(full, [1]), rho, atol=1e-12)


def test_partial_trace_bell():
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    bell = np.outer(phi, phi)
    for q in (0, 1):
        assert np.allclose(partial_trace(bell, [q]), np.eye(2) / 2)


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_partial_trace_keeps_unit_trace(seed):
    g = np.random.default_rng(seed)
    psi = haar_states(8, 1, g)[0]
    rho = np.outer(psi, psi.conj())
    for keep in ([0], [1, 2], [0, 2]):
        r = partial_trace(rho, keep)
        assert abs(np.trace(r) - 1) <= 1e-10 and is_density_matrix(r)


def test_partial_trace_errors():
    with pytest.raises(InvalidArgument):
        partial_trace(np.eye(4) / 4, [2])


def test_norm_values():
    zero = single_qubit_state("0")
    one = single_qubit_state("1")
    assert frobenius_norm(zero - np.eye(2) / 2) == pytest.approx(1 / math.sqrt(2))
    assert frobenius_norm(zero - one) == pytest.approx(math.sqrt(2))
    assert trace_norm(zero - one) == pytest.approx(2)
    assert frobenius_norm(PAULIS["X"]) == pytest.approx(math.sqrt(2))
    with pytest.raises(InvalidArgument):
        frobenius_norm(np.array([[np.nan]]))


def test_pauli_coords_examples():
    assert np.linalg.norm(pauli_coords(PAULIS["X"])) == pytest.approx(math.sqrt(2))
    assert np.allclose(pauli_coords(np.zeros((2, 2))), 0)
    g = np.random.default_rng(5)
    r1, r2 = [v / np.linalg.norm(v) * g.uniform() for v in g.standard_normal((2, 3))]
    d = density_from_bloch(r1) - density_from_bloch(r2)
    # rho = (I + r.sigma)/2 against the basis sigma/sqrt(2)
    assert np.allclose(pauli_coords(d), (r1 - r2) / math.sqrt(2))
    with pytest.raises(InvalidArgument):
        pauli_coords(np.eye(2))


@given(seeds, st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_pauli_round_trip_preserves_norm(seed, k):
    g = np.random.default_rng(seed)
    a = g.standard_normal((2 ** k, 2 ** k)) + 1j * g.standard_normal((2 ** k, 2 ** k))
    h = a + a.conj().T
    h -= np.trace(h) / 2 ** k * np.eye(2 ** k)
    c = pauli_coords(h)
    assert np.allclose(pauli_reconstruct(c, k), h)
    assert np.linalg.norm(c) == pytest.approx(frobenius_norm(h))
    assert len(pauli_basis(k)) == 4 ** k - 1


def test_channel_contraction_examples():
    g = np.random.default_rng(6)
    states = [np.outer(v, v.conj()) for v in haar_states(4, 2, g)]
    assert check_channel_contraction(lambda r: r, *states)
    depol = lambda r: np.eye(4) / 4
    assert check_channel_contraction(depol, *states)
    # tracing out a qubit can shrink the Frobenius difference by at most 2^{1/2}
    d_in = frobenius_norm(states[0] - states[1])
    d_out = frobenius_norm(partial_trace(states[0], [0]) - partial_trace(states[1], [0]))
    assert d_out <= math.sqrt(2) * d_in + 1e-12


def test_single_qubit_state_forms():
    assert np.allclose(single_qubit_state("mixed"), np.eye(2) / 2)
    assert np.allclose(bloch_vector(single_qubit_state("+i")), [0, 1, 0])
    assert np.allclose(single_qubit_state([0, 0, -1]), single_qubit_state("1"))
    with pytest.raises(InvalidArgument):
        single_qubit_state([0, 0, 2])
    with pytest.raises(InvalidArgument):
        single_qubit_state("bogus")


def test_projection_into_ball():
    rho = density_from_bloch(np.array([0.0, 0.0, 1.3]))
    p = project_to_bloch_ball(rho)
    assert np.allclose(bloch_vector(p), [0, 0, 1])


def test_pairs_round_trip():
    u = haar_unitary(4, np.random.default_rng(8))
    assert np.array_equal(matrix_from_pairs(matrix_to_pairs(u)), u)

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamforge.operator_core import (
    P1,
    DimensionCapError,
    Hamiltonian,
    LayoutError,
    LocalTerm,
    RegisterLayout,
    X,
    Y,
    Z,
    conjugate_operator,
    embed_local_term,
    hermiticity_defect,
    matvec,
    to_dense,
)
from hamforge.query_oracle import QueryInstance, build_query_hamiltonian


def naive_embed(term, layout):
    """Entry-by-entry oracle: loop over row digits, column digits and compare off-support digits."""
    dims = layout.dims
    pos = [layout.position[s] for s in term.support]
    sub_dims = [dims[p] for p in pos]
    D = layout.dim
    out = np.zeros((D, D), dtype=complex)
    for r in range(D):
        rd = layout.digits(r)
        for c in range(D):
            cd = layout.digits(c)
            if any(rd[k] != cd[k] for k in range(len(dims)) if k not in pos):
                continue
            ri = ci = 0
            for p, d in zip(pos, sub_dims):
                ri, ci = ri * d + rd[p], ci * d + cd[p]
            out[r, c] = term.weight * term.block[ri, ci]
    return out


def random_hermitian(rng, d):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (M + M.conj().T) / 2


@st.composite
def layouts_and_terms(draw):
    n = draw(st.integers(1, 3))
    dims = draw(st.lists(st.integers(2, 3), min_size=n, max_size=n))
    layout = RegisterLayout(tuple(enumerate(dims)))
    k = draw(st.integers(1, n))
    support = tuple(draw(st.permutations(range(n)))[:k])
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    d = int(np.prod([dims[s] for s in support]))
    term = LocalTerm(support, random_hermitian(rng, d), draw(st.floats(-2, 2)))
    return layout, term, rng


def test_identity_block_is_full_identity():
    layout = RegisterLayout.qubits(3)
    M = embed_local_term(LocalTerm((1,), np.eye(2)), layout).toarray()
    assert np.array_equal(M, np.eye(8))


def test_projector_on_middle_qubit():
    layout = RegisterLayout.qubits(3)
    M = embed_local_term(LocalTerm((1,), P1), layout).toarray()
    expected = [float(layout.digits(k)[1] == 1) for k in range(8)]
    assert np.array_equal(M, np.diag(expected))


def test_x_on_first_qubit_maps_00_to_10():
    layout = RegisterLayout.qubits(2)
    M = embed_local_term(LocalTerm((0,), X), layout).toarray()
    v = layout.basis_state((0, 0))
    assert np.array_equal(M @ v, layout.basis_state((1, 0)))


@settings(max_examples=60, deadline=None)
@given(layouts_and_terms())
def test_embedding_matches_naive_oracle(data):
    layout, term, _ = data
    M = embed_local_term(term, layout).toarray()
    assert np.max(np.abs(M - naive_embed(term, layout))) <= 1e-12
    assert hermiticity_defect(M) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(layouts_and_terms())
def test_matvec_matches_dense(data):
    layout, term, rng = data
    other = LocalTerm((layout.site_ids[0],), random_hermitian(rng, layout.dims[0]), 0.7)
    H = Hamiltonian(layout, (term, other))
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    assert np.max(np.abs(matvec(H, v) - to_dense(H) @ v)) <= 1e-10


def test_matvec_trivial_cases():
    layout = RegisterLayout.qubits(1)
    v = np.array([0.3, 0.7j])
    assert np.array_equal(matvec(Hamiltonian(layout, ()), v), np.zeros(2))
    H = Hamiltonian(layout, (LocalTerm((0,), Z),))
    assert np.array_equal(matvec(H, np.array([0, 1.0])), np.array([0, -1.0]))


def test_query_null_state():
    # H_Y = |1><1| on one qubit with a = 1/4, b = 3/4; |1>_X |0>_Y is annihilated
    hy = Hamiltonian(RegisterLayout.qubits(1), (LocalTerm((0,), P1),))
    H = build_query_hamiltonian([QueryInstance(hy, 0.25, 0.75)])
    v = H.layout.basis_state((1, 0))
    assert np.allclose(matvec(H, v), 0, atol=1e-14)


def test_to_dense_basics_and_cap():
    layout = RegisterLayout.qubits(1)
    assert np.array_equal(to_dense(Hamiltonian(layout, ())), np.zeros((2, 2)))
    assert np.array_equal(to_dense(Hamiltonian(layout, (LocalTerm((0,), Z),))), np.diag([1, -1]))
    big = Hamiltonian(RegisterLayout.qubits(13), ())
    with pytest.raises(DimensionCapError):
        to_dense(big)
    assert to_dense(Hamiltonian(RegisterLayout.qubits(3), ()), max_dim=8).shape == (8, 8)


def test_dense_cap_env_override(monkeypatch):
    monkeypatch.setenv("HAMFORGE_MAX_DIM", "4")
    with pytest.raises(DimensionCapError):
        to_dense(Hamiltonian(RegisterLayout.qubits(3), ()))


def test_single_not_prop_diagonal():
    # I - |0><0| (x) |1><1| - |1><1| (x) |0><0|
    block = np.eye(4) - np.diag([0, 1, 0, 0]) - np.diag([0, 0, 1, 0])
    H = Hamiltonian(RegisterLayout.qubits(2), (LocalTerm((0, 1), block),))
    assert np.array_equal(np.diag(to_dense(H)).real, [1, 0, 0, 1])


def test_conjugate_operator():
    layout = RegisterLayout.qubits(1)
    real = Hamiltonian(layout, (LocalTerm((0,), Z, 0.5),))
    assert np.array_equal(to_dense(conjugate_operator(real)), to_dense(real))
    yh = Hamiltonian(layout, (LocalTerm((0,), Y),))
    assert np.array_equal(to_dense(conjugate_operator(yh)), -Y)


@settings(max_examples=30, deadline=None)
@given(layouts_and_terms())
def test_conjugate_is_involution_and_hermitian(data):
    layout, term, _ = data
    H = Hamiltonian(layout, (term,))
    twice = conjugate_operator(conjugate_operator(H))
    assert np.array_equal(to_dense(twice), to_dense(H))
    assert hermiticity_defect(to_dense(conjugate_operator(H))) <= 1e-12
    assert hermiticity_defect(to_dense(H + H.scaled(-0.3))) <= 1e-12


def test_invalid_terms_rejected():
    layout = RegisterLayout.qubits(2)
    with pytest.raises((LayoutError, ValueError)):
        Hamiltonian(layout, (LocalTerm((5,), Z),))
    with pytest.raises(ValueError):
        Hamiltonian(layout, (LocalTerm((0,), np.eye(3)),))
    with pytest.raises(ValueError):
        LocalTerm((0,), np.array([[0, 1], [0, 0]]))


def test_basis_ordering_site_zero_most_significant():
    layout = RegisterLayout(((0, 2), (1, 3)))
    assert [layout.digits(k) for k in range(6)] == list(itertools.product(range(2), range(3)))

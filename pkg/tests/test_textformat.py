import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamforge.instance_io import loads_bundle, simulation_from_text, simulation_text, split_bundle
from hamforge.operator_core import Hamiltonian, LocalTerm, RegisterLayout
from hamforge.sim_reduce import build_code_simulation
from hamforge.textformat import ParseError, dumps_hamiltonian, loads_document, loads_hamiltonian


@st.composite
def hamiltonians(draw):
    n = draw(st.integers(1, 3))
    dims = draw(st.lists(st.integers(2, 3), min_size=n, max_size=n))
    layout = RegisterLayout(tuple((10 + i, d) for i, d in enumerate(dims)), {"R": tuple(10 + i for i in range(n))})
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    terms = []
    for _ in range(draw(st.integers(0, 3))):
        k = draw(st.integers(1, n))
        support = tuple(draw(st.permutations(range(n)))[:k])
        d = int(np.prod([dims[s] for s in support]))
        M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        terms.append(LocalTerm(tuple(10 + s for s in support), (M + M.conj().T) / 3, draw(st.floats(-1e3, 1e3))))
    return Hamiltonian(layout, tuple(terms))


@settings(max_examples=50, deadline=None)
@given(hamiltonians())
def test_round_trip_is_bit_exact(H):
    text = dumps_hamiltonian(H)
    back = loads_hamiltonian(text)
    assert back.layout == H.layout
    assert len(back.terms) == len(H.terms)
    for t, u in zip(H.terms, back.terms):
        assert t.support == u.support and t.weight == u.weight
        assert np.array_equal(t.block, u.block)
    assert dumps_hamiltonian(back) == text


def test_parse_errors_carry_line_numbers():
    text = "SITE 0 2\nTERM 1.0 0\n(1.0,0.0) (0.0,0.0)\n(0.0,0.0)\n"
    with pytest.raises(ParseError) as e:
        loads_document(text)
    assert e.value.lineno == 4
    with pytest.raises(ParseError) as e:
        loads_document("SITE 0 2\nBOGUS 1\n")
    assert e.value.lineno == 2
    with pytest.raises(ParseError) as e:
        loads_document("SITE 0 2\nTERM 1.0 3\n(1.0,0.0)\n")
    assert "unknown sites" in str(e.value)


def test_bundle_keeps_file_line_numbers():
    text = "SITE 0 2\n---\nSITE 0 2\nNOPE\n"
    assert len(split_bundle(text)) == 2
    with pytest.raises(ParseError) as e:
        loads_bundle(text)
    assert e.value.lineno == 4


def test_simulation_bundle_round_trip():
    from hamforge.operator_core import X, Z

    H = Hamiltonian(RegisterLayout.qubits(1), (LocalTerm((0,), Z), LocalTerm((0,), X, 0.2)))
    w = build_code_simulation(H, 50.0)
    text = simulation_text(w)
    back = simulation_from_text(text)
    assert np.array_equal(back.target.to_dense(), w.target.to_dense())
    assert np.array_equal(back.source.to_dense(), w.source.to_dense())
    assert back.Delta == w.Delta and back.eta == w.eta and back.epsilon == w.epsilon
    assert simulation_text(back) == text

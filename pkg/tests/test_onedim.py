from fractions import Fraction

import numpy as np
import pytest

from hamforge.onedim import (
    CNOT4,
    I4,
    LEVEL_INDEX,
    X2,
    InfeasibleParameters,
    QuantumGate,
    RoundCircuit,
    audit_clock,
    build_1d_hamiltonian,
    build_history_state,
    build_observable,
    circuit_unitary,
    enumerate_legal_configurations,
    legal_basis,
    line_layout,
    linearize_circuit,
    restrict_to_basis,
    search_penalties,
    set_parameters,
    sifter_qudit,
    sifter_terms,
    toy_instance,
    verify_low_energy_structure,
)
from hamforge.operator_core import Hamiltonian


def identity_rounds(n, R):
    return RoundCircuit(n, [[I4.copy() for _ in range(n - 1)] for _ in range(R)], r_star=1)


def test_linearize_distant_cnot():
    g = QuantumGate((0, 2), CNOT4)
    rc = linearize_circuit(3, [g])
    assert np.allclose(rc.unitary(), circuit_unitary(3, [g]), atol=1e-10)
    # brute-force reference: CNOT from qubit 0 onto qubit 2 as a permutation
    ref = np.zeros((8, 8))
    for x in range(8):
        b = [(x >> 2) & 1, (x >> 1) & 1, x & 1]
        b[2] ^= b[0]
        ref[4 * b[0] + 2 * b[1] + b[2], x] = 1
    assert np.allclose(rc.unitary(), ref)


def test_linearize_adjacent_gate_keeps_rounds_minimal():
    rc = linearize_circuit(2, [QuantumGate((0, 1), CNOT4)])
    # one leading pause round, then one round holding the gate
    assert rc.R == 2
    assert np.allclose(rc.rounds[1][0], CNOT4)


def test_clock_anchor_configurations():
    for n, R in [(2, 1), (2, 2), (3, 1)]:
        clock = enumerate_legal_configurations(n, R)
        a = audit_clock(clock)
        assert a.first_config_ok and a.final_config_ok
        assert a.unique_configs and a.one_active and a.forward_replay
        assert clock.configs[0][0] == "G"
        assert clock.configs[-1][-1] == "G"


def test_clock_config_counts():
    assert [enumerate_legal_configurations(2, R).L for R in (1, 2)] == [3, 15]
    assert enumerate_legal_configurations(3, 1).L == 5


def test_gate_label_unique_at_sifter_and_output():
    for R in (1, 2):
        clock = enumerate_legal_configurations(2, R)
        counts = audit_clock(clock).gate_label_counts
        assert counts[sifter_qudit(2, 1, 1) - 1] == 1
        assert counts[clock.n_qudits - 1] == 1
    assert set(audit_clock(enumerate_legal_configurations(2, 1)).gate_label_counts.values()) == {1}


def test_sifter_qudit_arithmetic():
    assert sifter_qudit(2, 1, 1) == 1
    assert sifter_qudit(3, 2, 2) == 9


def test_set_parameters_values():
    p = set_parameters(2, 10)
    assert (p.epsilon, p.a, p.b, p.delta, p.gamma) == (
        Fraction(1, 16),
        Fraction(1, 40),
        Fraction(3, 40),
        Fraction(1, 10240),
        Fraction(1, 10240),
    )
    q = set_parameters(1, 4)
    assert (q.epsilon, q.a, q.b) == (Fraction(1, 8), Fraction(1, 16), Fraction(3, 16))
    p0 = Fraction(1, 2**20)
    assert p.delta + p.m * p.epsilon * p.gamma < (p.epsilon - p0) * p.epsilon / p.L
    with pytest.raises(InfeasibleParameters):
        set_parameters(1, 4, p=Fraction(1, 2))


def test_terms_are_nearest_neighbour():
    ham = build_1d_hamiltonian(identity_rounds(2, 2))
    for H in (ham.H_prop, ham.H_pen):
        for t in H.terms:
            assert len(t.support) == 2 and t.support[1] == t.support[0] + 1
    clock = ham.clock
    assert all(len(t.support) == 1 for t in sifter_terms(clock, 1, 1, 0.125))
    assert len(build_observable(2, 2).terms[0].support) == 1


def test_history_states_annihilate_G():
    rc = identity_rounds(2, 1)
    ham = build_1d_hamiltonian(rc)
    basis = legal_basis(ham.clock)
    G = restrict_to_basis(ham.G(1.0, 1.0, 1.0), basis.digits)
    for bits in ([0, 0], [0, 1], [1, 0], [1, 1]):
        psi = build_history_state(rc, bits, ham.clock)
        assert np.linalg.norm(G @ psi) <= 1e-10
        assert np.real(np.vdot(psi, G @ psi)) == pytest.approx(0, abs=1e-12)
    w = np.linalg.eigvalsh(G)
    assert np.sum(w <= 1e-9) == 4


def test_identity_history_carries_data():
    rc = identity_rounds(2, 1)
    psi = build_history_state(rc, [0, 0])
    blocks = psi.reshape(-1, 4)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert np.allclose(np.abs(blocks[:, 1:]), 0)


def test_not_round_flips_at_gate_crossing():
    rc = RoundCircuit(2, [[I4.copy()], [np.kron(X2, np.eye(2))]], r_star=1)
    clock = enumerate_legal_configurations(2, 2)
    blocks = build_history_state(rc, [0, 0], clock).reshape(-1, 4)
    t_gate = next(t for t, r in enumerate(clock.rules) if r.gate == (2, 0))
    amp = 1 / np.sqrt(len(clock.configs))
    for t in range(len(clock.configs)):
        expected = 0 if t <= t_gate else 2
        assert abs(blocks[t, expected]) == pytest.approx(amp)


def test_illegal_configuration_penalized():
    ham = build_1d_hamiltonian(identity_rounds(2, 1))
    N = ham.clock.n_qudits
    # two gate labels side by side never occur in a legal configuration
    illegal = np.array([[LEVEL_INDEX["G0"], LEVEL_INDEX["G0"]] + [LEVEL_INDEX["_"]] * (N - 2)])
    assert restrict_to_basis(ham.H_pen, illegal)[0, 0].real >= 1.0
    assert restrict_to_basis(ham.H_pen.scaled(7.0), illegal)[0, 0].real >= 7.0


def _observable_value(rc, initial):
    clock = enumerate_legal_configurations(rc.n, rc.R)
    basis = legal_basis(clock)
    A = restrict_to_basis(build_observable(rc.n, rc.R), basis.digits)
    psi = build_history_state(rc, initial, clock)
    return np.real(np.vdot(psi, A @ psi)), len(clock.configs)


def test_observable_on_history_states():
    rc = identity_rounds(2, 1)
    val, n_cfg = _observable_value(rc, [0, 1])
    assert val == pytest.approx(0, abs=1e-15)
    val, n_cfg = _observable_value(rc, [0, 0])
    assert val == pytest.approx(1 / n_cfg)
    y = 0.3
    val, _ = _observable_value(rc, np.array([np.sqrt(y), np.sqrt(1 - y), 0, 0]))
    assert val == pytest.approx(y / n_cfg)


def test_sifter_penalizes_answer_zero_only():
    rc = identity_rounds(2, 1)
    clock = enumerate_legal_configurations(2, 1)
    basis = legal_basis(clock)
    eps = 0.125
    S = restrict_to_basis(Hamiltonian(line_layout(clock.n_qudits), tuple(sifter_terms(clock, 1, 1, eps))), basis.digits)
    one = build_history_state(rc, [1, 0], clock)
    zero = build_history_state(rc, [0, 0], clock)
    assert np.real(np.vdot(one, S @ one)) == pytest.approx(0, abs=1e-15)
    assert np.real(np.vdot(zero, S @ zero)) == pytest.approx(eps / len(clock.configs))


def test_null_space_dimension_counts_free_inputs():
    inst = toy_instance("yes", 1)
    params = set_parameters(1, inst.n_configs)
    rep = verify_low_energy_structure(inst, params)
    # qubit 1 is pinned, qubit 0 is free
    assert rep.null_dim == rep.history_dim == 2 and rep.null_ok


@pytest.mark.parametrize("query,R,negate", [("yes", 2, False), ("no", 2, False), ("no", 2, True)])
def test_toy_separation(query, R, negate):
    inst = toy_instance(query, R, negate)
    found = search_penalties(inst)
    sep = found.report.separation
    assert found.report.null_ok and found.report.trace_ok
    assert sep.window_passes and sep.eigen_passes
    if inst.expected == "YES":
        assert sep.window_max <= float(found.params.a)
    else:
        assert sep.window_min >= float(found.params.b)


def test_toy_instance_rejects_bad_arguments():
    with pytest.raises(ValueError):
        toy_instance("maybe")
    with pytest.raises(ValueError):
        toy_instance("yes", 3)

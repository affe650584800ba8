from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamforge.circuits import CNOT, TOFFOLI, ReversibleCircuit
from hamforge.instances import INVALID, NO, YES, ApxSimInstance, classify_apxsim, random_apxsim_instance
from hamforge.operator_core import P1, Hamiltonian, LocalTerm, RegisterLayout, Z
from hamforge.query_oracle import (
    Adversary,
    AdaptiveMachine,
    IllFormedComputation,
    ParallelOracleComputation,
    QueryInstance,
    adaptive_to_parallel_expansion,
    build_query_hamiltonian,
    classify_query,
    decide_apxsim_adaptive,
    query_budget,
    random_query,
    run_parallel_oracle_machine,
    verify_query_gap,
)

ONE = RegisterLayout.qubits(1)


def q1(block, a=0.25, b=0.75):
    return QueryInstance(Hamiltonian(ONE, (LocalTerm((0,), block),)), a, b)


YES_Q = q1(P1)
NO_Q = q1(np.eye(2))
INVALID_Q = q1(0.5 * np.eye(2))


def test_query_hamiltonian_hand_expansion():
    H = build_query_hamiltonian([YES_Q]).to_dense()
    assert np.allclose(H, np.diag([0.5, 0.5, 0, 1]))


def test_no_query_ground_energy_sector():
    H = build_query_hamiltonian([NO_Q])
    w, V = np.linalg.eigh(H.to_dense())
    assert w[0] == pytest.approx(0.5)
    ground = V[:, 0]
    # all weight on X = 0, the first two basis states
    assert np.sum(np.abs(ground[:2]) ** 2) == pytest.approx(1.0)


def test_empty_query_list_rejected():
    with pytest.raises(ValueError):
        build_query_hamiltonian([])


def test_classify_query():
    assert classify_query(YES_Q).status == YES
    assert classify_query(NO_Q).status == NO
    assert classify_query(INVALID_Q).status == INVALID


def test_query_gap_single_queries():
    r = verify_query_gap([YES_Q])
    assert r.lam == pytest.approx(0.0, abs=1e-12)
    assert r.sector_energies[(0,)] == pytest.approx(0.5)
    assert r.holds
    r = verify_query_gap([NO_Q])
    assert r.lam == pytest.approx(0.5)
    assert r.sector_energies[(1,)] == pytest.approx(1.0)
    assert r.holds
    r = verify_query_gap([INVALID_Q])
    assert r.correct == [(0,), (1,)] and r.holds


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_query_gap_random_batches(seed, m):
    rng = np.random.default_rng(seed)
    queries = [random_query(rng, str(s)) for s in rng.choice([YES, NO], size=m)]
    r = verify_query_gap(queries)
    assert r.argmin_correct
    assert r.worst_margin >= -1e-9


def test_parallel_machine_examples():
    copy = ReversibleCircuit(2, (CNOT(0, 1),), 1)
    assert run_parallel_oracle_machine(ParallelOracleComputation(copy, [YES_Q])).output == 1
    land = ReversibleCircuit(3, (TOFFOLI(0, 1, 2),), 2)
    assert run_parallel_oracle_machine(ParallelOracleComputation(land, [YES_Q, NO_Q])).output == 0
    # answer XOR answer is constant 0 on bit 1
    xor_self = ReversibleCircuit(2, (CNOT(0, 1), CNOT(0, 1)), 1)
    res = run_parallel_oracle_machine(ParallelOracleComputation(xor_self, [INVALID_Q]))
    assert res.output == 0 and len(res.correct) == 2
    with pytest.raises(IllFormedComputation):
        run_parallel_oracle_machine(ParallelOracleComputation(copy, [INVALID_Q]))


def test_adaptive_threshold_identity_exact():
    rng = np.random.default_rng(4)
    checked = 0
    for k in range(12):
        inst = random_apxsim_instance(rng, 2, YES if k % 2 else NO)
        r = decide_apxsim_adaptive(inst)
        if r.early_exit:
            continue
        checked += 1
        assert r.final_gap == Fraction(inst.delta) * (Fraction(inst.b) - Fraction(inst.a)) / 2
        assert r.identity_holds
    assert checked >= 6


def test_adaptive_sign_example():
    H = Hamiltonian(ONE, (LocalTerm((0,), P1),))
    # ground |0> has <Z> = +1, so A = -Z puts it at -1 <= a
    inst = ApxSimInstance(H, Hamiltonian(ONE, (LocalTerm((0,), -Z),)), -0.9, 0.9, 0.1)
    assert classify_apxsim(inst) == YES
    assert decide_apxsim_adaptive(inst).verdict == YES
    flipped = ApxSimInstance(H, Hamiltonian(ONE, (LocalTerm((0,), Z),)), -0.9, 0.9, 0.1)
    assert decide_apxsim_adaptive(flipped).verdict == NO


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([YES, NO]), st.sampled_from(["yes", "no", "coin"]))
def test_adaptive_agrees_with_ground_truth(seed, verdict, policy):
    rng = np.random.default_rng(seed)
    inst = random_apxsim_instance(rng, int(rng.integers(1, 4)), verdict)
    r = decide_apxsim_adaptive(inst, Adversary(policy, seed))
    assert r.verdict == classify_apxsim(inst) == verdict
    if r.query_budget is not None:
        assert r.n_queries <= r.query_budget


def test_query_budget_formula():
    assert query_budget(4.0, 0.01) == int(np.ceil(np.log2(800))) + 2
    assert query_budget(0.01, 1.0) == 2


def _tree(depth, rng):
    qs = {}

    def query_at(prefix):
        if prefix not in qs:
            qs[prefix] = random_query(rng, YES if rng.uniform() < 0.5 else NO)
        return qs[prefix]

    table = {bits: int(rng.integers(2)) for bits in np.ndindex(*(2,) * depth)}
    return AdaptiveMachine(depth, query_at, lambda p: table[tuple(p)])


def test_expansion_sizes():
    rng = np.random.default_rng(0)
    e1 = adaptive_to_parallel_expansion(_tree(1, rng))
    assert len(e1.queries) == 1 and e1.decision_map_size == 2
    e2 = adaptive_to_parallel_expansion(_tree(2, rng))
    assert len(e2.queries) == 3
    with pytest.raises(ValueError):
        adaptive_to_parallel_expansion(_tree(13, rng))


def test_expansion_replay_matches_adaptive_run():
    rng = np.random.default_rng(9)
    for _ in range(100):
        m = _tree(int(rng.integers(1, 4)), rng)
        e = adaptive_to_parallel_expansion(m)

        def oracle(q):
            return 1 if classify_query(q).status == YES else 0

        answers = [oracle(q) for q in e.queries]
        assert e.decide(answers) == m.run(oracle)

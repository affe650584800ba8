"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION <k> PASS|FAIL`` line with its key
numbers and measured runtime, then asserts.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from hamforge.cook_levin import (
    GridLayout,
    build_hardness_instance,
    build_prop_hamiltonian,
    build_spatially_sparse_instance,
    diagonal,
    enumerate_circuit_family,
    history_basis_index,
    scan_hardness_instance,
    toy_parallel_computations,
)
from hamforge.instance_io import (
    apxsim_from_document,
    hardness_document,
    oned_document,
    queries_from_document,
    query_document,
    simulation_from_text,
    simulation_text,
)
from hamforge.instances import INVALID, NO, YES, classify_apxsim, classify_forall, random_apxsim_instance
from hamforge.onedim import (
    audit_clock,
    enumerate_legal_configurations,
    legal_basis,
    restrict_to_basis,
    search_penalties,
    sifter_qudit,
    toy_instance,
    toy_suite,
    verify_low_energy_structure,
)
from hamforge.operator_core import Hamiltonian, LocalTerm, RegisterLayout, to_dense, to_sparse
from hamforge.query_oracle import (
    Adversary,
    ParallelOracleComputation,
    build_query_hamiltonian,
    decide_apxsim_adaptive,
    random_query,
    run_parallel_oracle_machine,
    verify_query_gap,
)
from hamforge.sim_reduce import build_code_simulation, reduce_apxsim2_instance, verify_simulation
from hamforge.textformat import dumps_document, loads_document
from hamforge.trials import low_energy_trials, projection_trials, random_hermitian, union_trials


@pytest.fixture
def say(capsys):
    def emit(k, ok, detail, seconds):
        with capsys.disabled():
            print(f"\nCRITERION {k} {'PASS' if ok else 'FAIL'} {detail} runtime={seconds:.2f}s")

    return emit


def test_criterion_1_query_gap(say):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240101)
    worst, failures = math.inf, 0
    for _ in range(100):
        m = int(rng.integers(1, 4))
        statuses = rng.choice([YES, NO, INVALID], size=m)
        r = verify_query_gap([random_query(rng, str(s)) for s in statuses])
        worst = min(worst, r.worst_margin)
        failures += not (r.argmin_correct and r.worst_margin >= -1e-9)
    dt = time.perf_counter() - t0
    ok = failures == 0 and dt <= 30
    say(1, ok, f"batches=100 failures={failures} worst_margin={worst:.3e}", dt)
    assert ok


def test_criterion_2_cook_levin_structure(say):
    t0 = time.perf_counter()
    count, failures = 0, 0
    for width in (1, 2, 3):
        for c in enumerate_circuit_family(width, 3):
            grid = GridLayout.for_circuit(c)
            H = build_prop_hamiltonian(c, grid)
            assert all(np.count_nonzero(t.block - np.diag(np.diag(t.block))) == 0 for t in H.terms)
            d_prop = diagonal(H)
            lay = H.layout
            digits = np.array(np.unravel_index(np.arange(lay.dim), lay.dims)).T
            row0 = digits[:, [lay.position[s] for s in grid.input_row]]
            for x in itertools.product((0, 1), repeat=width):
                # pinned input adds one unit per mismatched input-row bit
                d = d_prop + np.sum(row0 != np.array(x), axis=1)
                k = history_basis_index(grid, c.history(x), lay)
                integer = np.all(d == np.round(d))
                unique_zero = d[k] == 0 and np.count_nonzero(d < 1) == 1
                failures += not (integer and unique_zero)
                count += 1
    dt = time.perf_counter() - t0
    ok = failures == 0 and dt <= 10
    say(2, ok, f"circuit_inputs={count} failures={failures}", dt)
    assert ok


def test_criterion_3_hardness_separation(say):
    t0 = time.perf_counter()
    comps = toy_parallel_computations(seed=0)
    failures = []
    for k, comp in enumerate(comps):
        hi = build_hardness_instance(comp)
        inst = hi.instance
        assert inst.delta == pytest.approx(hi.epsilon / 16)
        scan = scan_hardness_instance(inst, hi.quantum_sites)
        truth = YES if run_parallel_oracle_machine(comp).output == 1 else NO
        if truth == YES:
            sep = np.all(scan.window_z <= -0.5 + 1e-6)
        else:
            sep = np.all(scan.window_z >= 0.5 - 1e-6)
        if not (sep and scan.verdict == truth):
            failures.append(k)
    dt = time.perf_counter() - t0
    ok = len(comps) >= 10 and not failures and dt <= 60
    say(3, ok, f"computations={len(comps)} failures={failures}", dt)
    assert ok


def test_criterion_4_adaptive(say):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    checked, failures, finals = 0, 0, 0
    for k in range(30):
        inst = random_apxsim_instance(rng, 1 + k % 3, YES if k % 2 == 0 else NO)
        truth = classify_apxsim(inst)
        if truth == INVALID:
            continue
        for policy in ("yes", "no", "coin"):
            r = decide_apxsim_adaptive(inst, Adversary(policy, k))
            checked += 1
            good = r.verdict == truth
            if not r.early_exit:
                finals += 1
                good &= r.n_queries <= r.query_budget
                good &= r.final_gap == Fraction(inst.delta) * (Fraction(inst.b) - Fraction(inst.a)) / 2
            failures += not good
    dt = time.perf_counter() - t0
    ok = failures == 0 and finals > 0
    say(4, ok, f"runs={checked} full_runs={finals} failures={failures}", dt)
    assert ok


def test_criterion_5_low_energy_distance(say):
    t0 = time.perf_counter()
    s = low_energy_trials(1000, seed=5)
    dt = time.perf_counter() - t0
    ok = s.passed and s.trials == 1000 and dt <= 20
    say(5, ok, f"trials={s.trials} failures={s.failures} worst_margin={s.worst_margin:.3e}", dt)
    assert ok, s.witness


def test_criterion_6_projection(say):
    t0 = time.perf_counter()
    s = projection_trials(200, seed=6)
    dt = time.perf_counter() - t0
    ok = s.passed and s.trials == 200 and dt <= 20
    say(6, ok, f"trials={s.trials} failures={s.failures} worst_margin={s.worst_margin:.3e}", dt)
    assert ok, s.witness


def test_criterion_7_union_bound(say):
    t0 = time.perf_counter()
    s = union_trials(1000, seed=7)
    dt = time.perf_counter() - t0
    ok = s.passed and s.trials == 1000 and dt <= 10
    say(7, ok, f"trials={s.trials} failures={s.failures} worst_margin={s.worst_margin:.3e}", dt)
    assert ok, s.witness


def test_criterion_8_simulation_and_reduction(say):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    src = Hamiltonian(
        RegisterLayout.qubits(2),
        (LocalTerm((0, 1), random_hermitian(rng, 4, 0.25)), LocalTerm((1,), random_hermitian(rng, 2, 0.25))),
    )
    residuals = []
    sims_ok = True
    for strength in (10.0, 100.0, 1000.0):
        rep = verify_simulation(build_code_simulation(src, strength))
        sims_ok &= rep.passed
        residuals.append(rep.eps_residual)
    monotone = residuals[0] > residuals[1] > residuals[2]
    counts = {YES: 0, NO: 0}
    red_fail = 0
    k = 0
    while min(counts.values()) < 5:
        verdict = YES if k % 2 == 0 else NO
        k += 1
        inst = random_apxsim_instance(rng, 2, verdict, forall=True)
        truth = classify_forall(inst)
        if truth == INVALID:
            continue
        red = reduce_apxsim2_instance(inst)
        good = classify_forall(red.instance) == truth
        good &= red.delta_prime + 2 * red.epsilon < inst.delta
        good &= red.lhs_observable < (inst.b - inst.a) / 3
        red_fail += not good
        counts[truth] += 1
    dt = time.perf_counter() - t0
    ok = sims_ok and monotone and red_fail == 0 and dt <= 120
    say(8, ok, f"residuals={[f'{r:.2e}' for r in residuals]} yes={counts[YES]} no={counts[NO]} failures={red_fail}", dt)
    assert ok


def test_criterion_9_one_dimensional(say):
    t0 = time.perf_counter()
    problems = []
    for inst in toy_suite():
        found = search_penalties(inst)
        rep = found.report
        if not rep.null_ok:
            problems.append(f"{inst.name}: null space")
        if not rep.separation.window_passes:
            problems.append(f"{inst.name}: separation")
    audits = {}
    for R in (1, 2):
        clock = enumerate_legal_configurations(2, R)
        a = audit_clock(clock)
        counts = a.gate_label_counts
        sif = sifter_qudit(2, 1, 1) - 1
        audits[R] = ({q for q, c in counts.items() if c != 1})
        if not (a.passed and sif == 0 and counts[sif] == 1 and counts[clock.n_qudits - 1] == 1):
            problems.append(f"R={R}: clock audit")
    if audits[1]:
        problems.append("R=1: a qudit is labeled gate more than once")
    inst = toy_instance("no", 1)
    found = search_penalties(inst)
    full = verify_low_energy_structure(inst, found.params, full_space=True)
    legal = found.report
    agree = (
        full.null_ok
        and full.null_dim == legal.null_dim
        and abs(full.lam_H - legal.lam_H) <= 1e-9
        and full.separation.eigen_passes == legal.separation.eigen_passes
    )
    if not agree:
        problems.append("full-space check disagrees with legal subspace")
    dt = time.perf_counter() - t0
    ok = not problems and dt <= 300
    repeated = sorted(audits[2])
    say(9, ok, f"instances=6 problems={problems} R2_repeat_gate_qudits={repeated}", dt)
    assert ok


def _same(H1, H2):
    return (to_sparse(H1) != to_sparse(H2)).nnz == 0


def test_criterion_10_round_trip(say, tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    results = {}

    queries = [random_query(rng, YES), random_query(rng, NO)]
    path = tmp_path / "query.txt"
    path.write_text(dumps_document(query_document(queries)))
    doc = loads_document(path.read_text())
    back = queries_from_document(doc)
    results["query"] = _same(doc.hamiltonian("HAM"), build_query_hamiltonian(queries)) and all(
        np.array_equal(to_dense(b.H_Y), to_dense(q.H_Y)) and (b.a, b.b) == (q.a, q.b) for b, q in zip(back, queries)
    )

    comp = toy_parallel_computations(seed=1)[4]
    for kind, hi in (("cooklevin", build_hardness_instance(comp)), ("sparse", build_spatially_sparse_instance(comp))):
        path = tmp_path / f"{kind}.txt"
        path.write_text(dumps_document(hardness_document(hi)))
        inst = apxsim_from_document(loads_document(path.read_text()))
        results[kind] = (
            _same(inst.H, hi.instance.H)
            and _same(inst.A, hi.instance.A)
            and (inst.a, inst.b, inst.delta) == (hi.instance.a, hi.instance.b, hi.instance.delta)
        )

    ok_oned = True
    for R in (1, 2):
        od = toy_instance("yes", R)
        params = search_penalties(od).params
        doc = oned_document(od, params)
        path = tmp_path / f"oned{R}.txt"
        path.write_text(dumps_document(doc))
        inst = apxsim_from_document(loads_document(path.read_text()))
        want = apxsim_from_document(doc)
        if R == 1:
            ok_oned &= _same(inst.H, want.H) and _same(inst.A, want.A)
        else:
            digits = legal_basis(od.clock).digits
            ok_oned &= np.array_equal(restrict_to_basis(inst.H, digits), restrict_to_basis(want.H, digits))
    results["oned"] = ok_oned

    w = build_code_simulation(Hamiltonian(RegisterLayout.qubits(2), (LocalTerm((0, 1), random_hermitian(rng, 4, 0.3)),)), 60.0)
    path = tmp_path / "sim.txt"
    path.write_text(simulation_text(w))
    back = simulation_from_text(path.read_text())
    results["simcode"] = (
        np.array_equal(to_dense(back.target), to_dense(w.target))
        and np.array_equal(to_dense(back.source), to_dense(w.source))
        and all(np.array_equal(back.encoding.isometries[s], w.encoding.isometries[s]) for s in w.source.layout.site_ids)
    )
    dt = time.perf_counter() - t0
    ok = all(results.values())
    say(10, ok, " ".join(f"{k}={'exact' if v else 'MISMATCH'}" for k, v in results.items()), dt)
    assert ok

"""Parallel-query Hamiltonians, promise oracles and the adaptive decision algorithm.

Exact diagonalization stands in for the oracle. Queries whose ground energy
falls strictly between the thresholds are answered by an adversary policy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .circuits import ReversibleCircuit
from .instances import INVALID, NO, YES, ApxSimInstance, classify_apxsim
from .operator_core import P0, P1, Hamiltonian, LocalTerm, RegisterLayout
from .spectral import min_eigenvalue

MU_BRUTE_FORCE_SITES = 8
DEFAULT_MAX_DEPTH = 12


@dataclass(frozen=True)
class QueryInstance:
    """One local-Hamiltonian query: is lambda(H_Y) <= a, or >= b?"""

    H_Y: Hamiltonian
    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("query thresholds must satisfy a < b")

    @property
    def gap(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class QueryVerdict:
    status: str
    lam: float


def classify_query(q: QueryInstance, tol: float | None = None) -> QueryVerdict:
    lam = min_eigenvalue(q.H_Y, tol).lambda_min
    if lam <= q.a:
        return QueryVerdict(YES, lam)
    if lam >= q.b:
        return QueryVerdict(NO, lam)
    return QueryVerdict(INVALID, lam)


def random_query(rng: np.random.Generator, status: str, gap: float = 1.0, n_qubits: int = 2) -> QueryInstance:
    """Random query with a chosen verdict; valid ground energies sit gap/4 outside [a, b]."""
    d = 2**n_qubits
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    M = (M + M.conj().T) / 4
    lam = float(np.linalg.eigvalsh(M)[0])
    if status == YES:
        a = lam + gap / 4
    elif status == NO:
        a = lam - gap - gap / 4
    elif status == INVALID:
        a = lam - gap * rng.uniform(0.1, 0.9)
    else:
        raise ValueError(f"unknown status {status!r}")
    layout = RegisterLayout.qubits(n_qubits)
    return QueryInstance(Hamiltonian(layout, (LocalTerm(tuple(range(n_qubits)), M),)), a, a + gap)


class Adversary:
    """Answers for promise-violating queries: always yes, always no, or a seeded coin."""

    def __init__(self, policy: str = "coin", seed: int = 0):
        if policy not in ("yes", "no", "coin"):
            raise ValueError(f"unknown adversary policy {policy!r}")
        self.policy = policy
        self.rng = np.random.default_rng(seed)

    def answer(self, q: QueryInstance | None = None) -> int:
        if self.policy == "yes":
            return 1
        if self.policy == "no":
            return 0
        return int(self.rng.integers(2))


def oracle_answer(q: QueryInstance, adversary: Adversary, tol: float | None = None) -> tuple[int, QueryVerdict]:
    v = classify_query(q, tol)
    if v.status == YES:
        return 1, v
    if v.status == NO:
        return 0, v
    return adversary.answer(q), v


def query_layout(queries: Sequence[QueryInstance]) -> tuple[RegisterLayout, list[dict[int, int]]]:
    """Layout X1 Y1 ... Xm Ym; returns per-query maps from Y-local site to global site."""
    sites, regs, maps = [], {}, []
    nxt = 0
    for i, q in enumerate(queries, 1):
        regs[f"X{i}"] = (nxt,)
        sites.append((nxt, 2))
        nxt += 1
        local = {}
        for s, d in q.H_Y.layout.sites:
            local[s] = nxt
            sites.append((nxt, d))
            nxt += 1
        regs[f"Y{i}"] = tuple(local.values())
        maps.append(local)
    return RegisterLayout(tuple(sites), regs), maps


def build_query_hamiltonian(queries: Sequence[QueryInstance]) -> Hamiltonian:
    """sum_i ((a_i+b_i)/2) |0><0|_{X_i} + |1><1|_{X_i} (x) H_{Y_i}."""
    if not queries:
        raise ValueError("at least one query is required")
    layout, maps = query_layout(queries)
    terms = []
    for i, (q, local) in enumerate(zip(queries, maps), 1):
        x = layout.register(f"X{i}")[0]
        terms.append(LocalTerm((x,), P0, (q.a + q.b) / 2))
        for t in q.H_Y.terms:
            block = np.kron(P1, t.block)
            terms.append(LocalTerm((x,) + tuple(local[s] for s in t.support), block, t.weight))
    return Hamiltonian(layout, tuple(terms))


def correct_strings(queries: Sequence[QueryInstance], tol: float | None = None) -> tuple[list[tuple[int, ...]], list[QueryVerdict]]:
    verdicts = [classify_query(q, tol) for q in queries]
    choices = [(1,) if v.status == YES else (0,) if v.status == NO else (0, 1) for v in verdicts]
    return [tuple(c) for c in itertools.product(*choices)], verdicts


@dataclass
class QueryGapReport:
    lam: float
    epsilon: float
    sector_energies: dict[tuple[int, ...], float]
    correct: list[tuple[int, ...]]
    verdicts: list[QueryVerdict]
    worst_margin: float
    argmin_correct: bool
    holds: bool
    violating: tuple[int, ...] | None = None


def verify_query_gap(queries: Sequence[QueryInstance], slack: float = 1e-9, max_dim: int | None = None) -> QueryGapReport:
    """Restrict the query Hamiltonian to each X-string sector and compare energies.

    The global minimum must lie on a correct string and every incorrect string
    must sit at least min_i (b_i - a_i)/2 above it.
    """
    H = build_query_hamiltonian(queries)
    M = H.to_dense(max_dim)
    lam = float(np.linalg.eigvalsh(M)[0])
    layout = H.layout
    xpos = [layout.position[layout.register(f"X{i}")[0]] for i in range(1, len(queries) + 1)]
    digits = np.array([layout.digits(k) for k in range(layout.dim)])
    energies = {}
    for y in itertools.product((0, 1), repeat=len(queries)):
        mask = np.all(digits[:, xpos] == np.array(y), axis=1)
        idx = np.nonzero(mask)[0]
        energies[y] = float(np.linalg.eigvalsh(M[np.ix_(idx, idx)])[0])
    correct, verdicts = correct_strings(queries)
    eps = min(q.gap for q in queries) / 2
    best = min(energies, key=energies.get)
    argmin_ok = min(energies[y] for y in correct) <= lam + slack
    worst, violating = math.inf, None
    for y, e in energies.items():
        if y in correct:
            continue
        margin = e - (lam + eps)
        if margin < worst:
            worst, violating = margin, y
    holds = argmin_ok and worst >= -slack
    return QueryGapReport(lam, eps, energies, correct, verdicts, worst, argmin_ok, holds,
                          None if holds else (violating if worst < -slack else best))


@dataclass(frozen=True)
class ParallelOracleComputation:
    """A reversible circuit reading m oracle answers (bits 0..m-1) plus zeroed ancillae."""

    circuit: ReversibleCircuit
    queries: tuple[QueryInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValueError("a parallel computation needs at least one query")
        if self.circuit.width < len(self.queries):
            raise ValueError("circuit width is smaller than the number of queries")

    @property
    def m(self) -> int:
        return len(self.queries)

    @property
    def ancillae(self) -> int:
        return self.circuit.width - self.m

    def input_bits(self, answers: Sequence[int]) -> tuple[int, ...]:
        return tuple(answers) + (0,) * self.ancillae


class IllFormedComputation(ValueError):
    pass


@dataclass
class MachineResult:
    output: int
    correct: list[tuple[int, ...]]
    outputs: dict[tuple[int, ...], int]
    verdicts: list[QueryVerdict]


def run_parallel_oracle_machine(comp: ParallelOracleComputation) -> MachineResult:
    """Evaluate the circuit on every correct answer string; outputs must agree."""
    correct, verdicts = correct_strings(comp.queries)
    outputs = {y: comp.circuit.output_bit(comp.input_bits(y)) for y in correct}
    values = set(outputs.values())
    if len(values) != 1:
        raise IllFormedComputation(f"outputs disagree across correct strings: {outputs}")
    return MachineResult(values.pop(), correct, outputs, verdicts)


# Adaptive containment algorithm.


@dataclass
class QueryRecord:
    purpose: str
    a: float
    b: float
    lam: float
    status: str
    answer: int


@dataclass
class AdaptiveResult:
    verdict: str
    transcript: list[QueryRecord]
    mu: float
    epsilon: float | None = None
    lam_star: float | None = None
    a_final: float | None = None
    b_final: float | None = None
    final_gap: Fraction | None = None
    identity_holds: bool = True
    early_exit: str = ""
    query_budget: int | None = None

    @property
    def n_queries(self) -> int:
        return len(self.transcript)


def lower_bound_min_eigenvalue(A: Hamiltonian, adversary: Adversary, transcript: list, precision: float) -> float:
    """Lower bound on lambda(A): brute force on few sites, else oracle binary search."""
    if len(A.support()) <= MU_BRUTE_FORCE_SITES:
        return min_eigenvalue(A).lambda_min - 1e-12
    nb = A.norm_bound()
    lo, hi = -nb, nb
    g = precision / 8
    while hi - lo > precision:
        t = (lo + hi) / 2 - g / 2
        ans, v = oracle_answer(QueryInstance(A, t, t + g), adversary)
        transcript.append(QueryRecord("mu", t, t + g, v.lam, v.status, ans))
        if ans:
            hi = t + g
        else:
            lo = t
    return lo


def query_budget(norm_bound: float, epsilon: float) -> int:
    # when 2 ||H|| <= eps the bisection takes no steps at all
    return max(math.ceil(math.log2(2 * norm_bound / epsilon)), 0) + 2


def decide_apxsim_adaptive(inst: ApxSimInstance, adversary: Adversary | None = None) -> AdaptiveResult:
    """Binary-search lambda(H) with the oracle, then one final query on (b - mu) H + delta A."""
    adversary = adversary or Adversary("coin", 0)
    transcript: list[QueryRecord] = []
    a, b, delta = Fraction(inst.a), Fraction(inst.b), Fraction(inst.delta)
    mu = Fraction(lower_bound_min_eigenvalue(inst.A, adversary, transcript, float(b - a) / 4))
    if b < mu:
        return AdaptiveResult(NO, transcript, float(mu), early_exit="b below lambda(A)")
    if b > Fraction(inst.A.norm_bound()):
        return AdaptiveResult(YES, transcript, float(mu), early_exit="b above norm bound of A")

    eps = delta * (b - a) / (2 * (b - mu))
    nb = Fraction(inst.H.norm_bound())
    lo, hi = -nb, nb
    g = eps / 8
    budget = query_budget(float(nb), float(eps)) if nb > 0 else 2
    while hi - lo > eps:
        t = (lo + hi) / 2 - g / 2
        ans, v = oracle_answer(QueryInstance(inst.H, float(t), float(t + g)), adversary)
        transcript.append(QueryRecord("energy", float(t), float(t + g), v.lam, v.status, ans))
        if ans:
            hi = t + g
        else:
            lo = t
    lam_star = lo
    a_p = (lam_star + eps) * (b - mu) + delta * a
    b_p = lam_star * (b - mu) + delta * b
    gap = b_p - a_p
    identity = gap == delta * (b - a) / 2
    H_final = inst.H.scaled(float(b - mu)) + inst.A.scaled(float(delta))
    ans, v = oracle_answer(QueryInstance(H_final, float(a_p), float(b_p)), adversary)
    transcript.append(QueryRecord("final", float(a_p), float(b_p), v.lam, v.status, ans))
    return AdaptiveResult(YES if ans else NO, transcript, float(mu), float(eps), float(lam_star),
                          float(a_p), float(b_p), gap, identity, query_budget=budget)


def ground_truth(inst: ApxSimInstance) -> str:
    return classify_apxsim(inst)


# Adaptive to parallel expansion.


@dataclass
class AdaptiveMachine:
    """A depth-q query tree: ``query_at(prefix)`` gives the next query after the answers in prefix."""

    depth: int
    query_at: Callable[[tuple[int, ...]], QueryInstance]
    decide: Callable[[tuple[int, ...]], int]

    def run(self, answer: Callable[[QueryInstance], int]) -> int:
        prefix: tuple[int, ...] = ()
        for _ in range(self.depth):
            prefix += (int(answer(self.query_at(prefix))),)
        return int(self.decide(prefix))


@dataclass
class ParallelExpansion:
    queries: list[QueryInstance]
    node_query: dict[tuple[int, ...], int]
    machine: AdaptiveMachine = field(repr=False)

    @property
    def decision_map_size(self) -> int:
        return 2 ** len(self.queries)

    def decide(self, parallel_answers: Sequence[int]) -> int:
        """Replay the tree, reading each node's answer from the parallel answer vector."""
        prefix: tuple[int, ...] = ()
        for _ in range(self.machine.depth):
            prefix += (int(parallel_answers[self.node_query[prefix]]),)
        return int(self.machine.decide(prefix))

    def decision_map(self, limit: int = 16) -> dict[tuple[int, ...], int]:
        if len(self.queries) > limit:
            raise ValueError(f"decision map over {len(self.queries)} queries is too large to tabulate")
        return {bits: self.decide(bits) for bits in itertools.product((0, 1), repeat=len(self.queries))}


def _query_key(q: QueryInstance):
    from .textformat import dumps_hamiltonian

    return dumps_hamiltonian(q.H_Y), float(q.a), float(q.b)


def adaptive_to_parallel_expansion(machine: AdaptiveMachine, max_depth: int = DEFAULT_MAX_DEPTH) -> ParallelExpansion:
    """Every query reachable on some answer path, deduplicated, plus the replay map."""
    if machine.depth > max_depth:
        raise ValueError(f"depth {machine.depth} exceeds the cap {max_depth}")
    queries: list[QueryInstance] = []
    index: dict = {}
    node_query: dict[tuple[int, ...], int] = {}
    for level in range(machine.depth):
        for prefix in itertools.product((0, 1), repeat=level):
            q = machine.query_at(prefix)
            key = _query_key(q)
            if key not in index:
                index[key] = len(queries)
                queries.append(q)
            node_query[prefix] = index[key]
    return ParallelExpansion(queries, node_query, machine)

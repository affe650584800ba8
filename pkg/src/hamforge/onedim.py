"""A 1D line of 8-level qudits that clocks a nearest-neighbour round circuit.

Each logical qubit occupies two neighbouring qudits. Qudit levels, in basis
order, are

    _  unborn     <  move-left   .  filler     x  dead
    G0 G1 gate label with a data bit
    Q0 Q1 qubit label with a data bit

Labels string configurations come from a fixed schedule. Per round there
is a rightward gate sweep and, except after the last round, ``n`` shift
cycles that move the logical block two qudits at a time into the next block.
The two-local transition rules are read off consecutive configurations and
audited so that each rule fires on exactly one legal configuration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .instances import scan_low_energy, window_min_expectation
from .operator_core import Hamiltonian, LocalTerm, RegisterLayout, to_sparse

LEVELS = ("_", "<", ".", "x", "G0", "G1", "Q0", "Q1")
LEVEL_INDEX = {s: k for k, s in enumerate(LEVELS)}
DATA_CLASSES = ("G", "Q")
CLASSES = ("_", "<", ".", "x", "G", "Q")
QUDIT_DIM = 8

SWAP4 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
CNOT4 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
I4 = np.eye(4, dtype=complex)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)


def level(cls: str, bit: int = 0) -> int:
    return LEVEL_INDEX[cls + str(bit)] if cls in DATA_CLASSES else LEVEL_INDEX[cls]


def n_data(pattern: Sequence[str]) -> int:
    return sum(c in DATA_CLASSES for c in pattern)


# Circuits.


@dataclass(frozen=True)
class QuantumGate:
    qubits: tuple[int, ...]
    matrix: np.ndarray


@dataclass
class RoundCircuit:
    """R rounds of n-1 two-qubit gates; gate j of a round acts on logical qubits (j, j+1)."""

    n: int
    rounds: list[list[np.ndarray]]
    r_star: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two logical qubits")
        for r, rnd in enumerate(self.rounds, 1):
            if len(rnd) != self.n - 1:
                raise ValueError(f"round {r} has {len(rnd)} gates, expected {self.n - 1}")
            for U in rnd:
                U = np.asarray(U)
                if U.shape != (4, 4) or not np.allclose(U.conj().T @ U, I4, atol=1e-10):
                    raise ValueError(f"round {r} holds a non-unitary or wrongly sized gate")
        if not 1 <= self.r_star <= self.R:
            raise ValueError("pause round out of range")
        if any(not np.allclose(U, I4) for U in self.rounds[self.r_star - 1]):
            raise ValueError("the pause round must consist of identity gates")

    @property
    def R(self) -> int:
        return len(self.rounds)

    @property
    def n_qudits(self) -> int:
        return 2 * self.n * self.R

    def gate_operator(self, r: int, j: int) -> np.ndarray:
        """Round r (1-based) gate j (0-based) lifted to all n logical qubits."""
        return np.kron(np.kron(np.eye(2**j), self.rounds[r - 1][j]), np.eye(2 ** (self.n - j - 2)))

    def unitary(self) -> np.ndarray:
        U = np.eye(2**self.n, dtype=complex)
        for r in range(1, self.R + 1):
            for j in range(self.n - 1):
                U = self.gate_operator(r, j) @ U
        return U


def circuit_unitary(n: int, gates: Sequence[QuantumGate]) -> np.ndarray:
    """Dense unitary of a gate list on n qubits, qubit 0 most significant."""
    U = np.eye(2**n, dtype=complex)
    for g in gates:
        k = len(g.qubits)
        rest = [q for q in range(n) if q not in g.qubits]
        perm = list(g.qubits) + rest
        full = np.kron(g.matrix, np.eye(2 ** (n - k))).reshape([2] * (2 * n))
        inv = np.argsort(perm)
        full = full.transpose(list(inv) + [n + i for i in inv]).reshape(2**n, 2**n)
        U = full @ U
    return U


def _adjacent_gates(n: int, g: QuantumGate) -> list[tuple[int, np.ndarray]]:
    """Rewrite one gate as (slot, 4x4) gates on neighbouring pairs."""
    if len(g.qubits) == 1:
        q = g.qubits[0]
        if q < n - 1:
            return [(q, np.kron(g.matrix, np.eye(2)))]
        return [(q - 1, np.kron(np.eye(2), g.matrix))]
    if len(g.qubits) != 2:
        raise ValueError("only one- and two-qubit gates can be linearized")
    a, b = g.qubits
    M = np.asarray(g.matrix, dtype=complex)
    if a > b:
        a, b = b, a
        M = SWAP4 @ M @ SWAP4
    swaps = [(k, SWAP4) for k in range(b - 1, a, -1)]
    return swaps + [(a, M)] + swaps[::-1]


def linearize_circuit(n: int, gates: Sequence[QuantumGate], check: bool = True) -> RoundCircuit:
    """Pack a circuit into rounds, inserting swaps for distant pairs and identities as padding.

    A fresh round opens whenever the next slot does not lie strictly right of
    the last filled slot. The leading round is the identity pause round.
    """
    seq = [x for g in gates for x in _adjacent_gates(n, g)]
    rounds: list[list[np.ndarray]] = []
    last = n
    for slot, M in seq:
        if slot <= last:
            rounds.append([I4.copy() for _ in range(n - 1)])
        rounds[-1][slot] = M
        last = slot
    if not rounds:
        rounds.append([I4.copy() for _ in range(n - 1)])
    rc = RoundCircuit(n, [[I4.copy() for _ in range(n - 1)]] + rounds, r_star=1)
    if check and n <= 4:
        if not np.allclose(rc.unitary(), circuit_unitary(n, gates), atol=1e-10):
            raise AssertionError("linearized circuit differs from the input circuit")
    return rc


# Configurations.


@dataclass(frozen=True)
class Rule:
    """A two-local transition at qudits (pos, pos + 1)."""

    pos: int
    before: tuple[str, str]
    after: tuple[str, str]
    gate: tuple[int, int] | None = None  # (round, slot) when a round gate is applied

    def __post_init__(self):
        if n_data(self.before) != n_data(self.after):
            raise ValueError("a rule must preserve the number of data labels")


@dataclass
class Clock:
    n: int
    R: int
    configs: list[tuple[str, ...]]
    rules: list[Rule]  # rules[t] takes configs[t] to configs[t + 1]
    phase: list[str]

    @property
    def L(self) -> int:
        return len(self.configs) - 1

    @property
    def n_qudits(self) -> int:
        return 2 * self.n * self.R

    def ascii(self, t: int) -> str:
        return " ".join(self.configs[t])

    def data_positions(self, t: int) -> list[int]:
        return [p for p, c in enumerate(self.configs[t]) if c in DATA_CLASSES]

    def gate_label_configs(self, q: int) -> list[int]:
        return [t for t, c in enumerate(self.configs) if c[q] == "G"]


def enumerate_legal_configurations(n: int, R: int) -> Clock:
    """Run the label schedule and record every configuration and transition."""
    if n < 2 or R < 1:
        raise ValueError("need n >= 2 and R >= 1")
    N = 2 * n * R
    cur = ["_"] * N
    cur[0], cur[1] = "G", "."
    for i in range(1, n):
        cur[2 * i] = "Q"
        cur[2 * i + 1] = "."
    cur[2 * n - 1] = "_"
    configs = [tuple(cur)]
    rules: list[Rule] = []
    phase = ["sweep"]

    def step(p: int, after: tuple[str, str], tag: str, gate=None):
        before = (cur[p], cur[p + 1])
        rules.append(Rule(p, before, after, gate))
        cur[p], cur[p + 1] = after
        configs.append(tuple(cur))
        phase.append(tag)

    for r in range(1, R + 1):
        o = 2 * n * (r - 1)
        cycles = n if r < R else 1
        for k in range(cycles):
            s = o + 2 * k
            step(s, ("x", "G"), "sweep")
            for i in range(1, n):
                step(s + 2 * i - 1, ("Q", "G"), "sweep", (r, i - 1) if k == 0 else None)
                step(s + 2 * i, (".", "G"), "sweep")
            if r == R:
                break
            step(s + 2 * n - 1, ("<", "Q"), "turn")
            for p in range(s + 2 * n - 1, s + 2, -1):
                step(p - 1, ("<", cur[p - 1]), "left")
            step(s + 1, ("x", "G"), "land")
    return Clock(n, R, configs, rules, phase)


@dataclass
class ClockAudit:
    unique_configs: bool
    one_active: bool
    rule_conflicts: list[str]
    forward_replay: bool
    gate_label_counts: dict[int, int]
    first_config_ok: bool
    final_config_ok: bool

    @property
    def passed(self) -> bool:
        return self.unique_configs and self.one_active and not self.rule_conflicts and self.forward_replay and self.first_config_ok and self.final_config_ok


def _matches(cfg, p, pattern) -> bool:
    return cfg[p] == pattern[0] and cfg[p + 1] == pattern[1]


def _replay(clock: Clock) -> list[tuple[str, ...]]:
    """Independent forward run: from configuration 0 fire whichever rule matches."""
    cur, out = clock.configs[0], [clock.configs[0]]
    for _ in range(len(clock.configs) + 2):
        hits = [r for r in clock.rules if _matches(cur, r.pos, r.before)]
        uniq = {(r.pos, r.before, r.after) for r in hits}
        if not uniq:
            break
        if len(uniq) > 1:
            return out
        r = hits[0]
        cur = cur[: r.pos] + r.after + cur[r.pos + 2 :]
        out.append(cur)
    return out


def audit_clock(clock: Clock) -> ClockAudit:
    cfgs = clock.configs
    unique = len(set(cfgs)) == len(cfgs)
    active = all(sum(c in ("G", "<") for c in cfg) == 1 for cfg in cfgs)
    conflicts = []
    for t, r in enumerate(clock.rules):
        before_hits = [u for u, c in enumerate(cfgs) if _matches(c, r.pos, r.before)]
        after_hits = [u for u, c in enumerate(cfgs) if _matches(c, r.pos, r.after)]
        if before_hits != [t]:
            conflicts.append(f"rule {t} at {r.pos}: before pattern {r.before} matches configs {before_hits}")
        if after_hits != [t + 1]:
            conflicts.append(f"rule {t} at {r.pos}: after pattern {r.after} matches configs {after_hits}")
    N = clock.n_qudits
    counts = {q: len(clock.gate_label_configs(q)) for q in range(N)}
    n = clock.n
    first = ("G", ".") + tuple(x for i in range(1, n) for x in ("Q", "."))
    first = first[: 2 * n - 1] + ("_",) + ("_",) * (N - 2 * n)
    last = ("x",) * (N - 2 * n) + ("x", "Q") + tuple(x for i in range(1, n - 1) for x in (".", "Q")) + (".", "G")
    return ClockAudit(unique, active, conflicts, _replay(clock) == cfgs, counts, cfgs[0] == first, cfgs[-1] == last)


def sifter_qudit(n: int, r_star: int, i: int) -> int:
    """1-based qudit index holding query answer i at the start of the pause round."""
    return 2 * n * (r_star - 1) + (2 * i - 1)


# Operators.


def _pattern_states(pattern: Sequence[str]) -> list[tuple[int, tuple[int, ...]]]:
    """(two-qudit basis index, data bits) for every data assignment of a label pattern."""
    out = []
    k = n_data(pattern)
    for bits in itertools.product((0, 1), repeat=k):
        it = iter(bits)
        idx = 0
        for c in pattern:
            idx = idx * QUDIT_DIM + (level(c, next(it)) if c in DATA_CLASSES else level(c))
        out.append((idx, bits))
    return out


def rule_block(rule: Rule, U: np.ndarray | None = None) -> np.ndarray:
    """(P_before + P_after - M - M^dagger) / 2 with M carrying the data through U."""
    d = QUDIT_DIM**2
    M = np.zeros((d, d), dtype=complex)
    Pb = np.zeros((d, d), dtype=complex)
    Pa = np.zeros((d, d), dtype=complex)
    after = {bits: idx for idx, bits in _pattern_states(rule.after)}
    k = n_data(rule.before)
    for idx, bits in _pattern_states(rule.before):
        Pb[idx, idx] = 1
        x = int("".join(map(str, bits)), 2) if k else 0
        if U is not None and k == 2:
            for y in range(4):
                amp = U[y, x]
                if amp != 0:
                    M[after[((y >> 1) & 1, y & 1)], idx] += amp
        else:
            M[after[bits], idx] = 1
    for idx, _ in _pattern_states(rule.after):
        Pa[idx, idx] = 1
    return 0.5 * (Pb + Pa - M - M.conj().T)


def pair_projector(pairs: Sequence[tuple[str, str]]) -> np.ndarray:
    P = np.zeros((QUDIT_DIM**2,) * 2, dtype=complex)
    for pat in pairs:
        for idx, _ in _pattern_states(pat):
            P[idx, idx] = 1
    return P


def single_projector(lvl: int) -> np.ndarray:
    P = np.zeros((QUDIT_DIM, QUDIT_DIM), dtype=complex)
    P[lvl, lvl] = 1
    return P


def line_layout(N: int) -> RegisterLayout:
    return RegisterLayout.uniform(N, QUDIT_DIM)


@dataclass
class Pin:
    """Penalize logical qubit ``qubit`` holding ``1 - value`` in configuration 0."""

    qubit: int
    value: int = 0


def pin_terms(clock: Clock, pins: Sequence[Pin]) -> list[LocalTerm]:
    cfg0 = clock.configs[0]
    pos0 = clock.data_positions(0)
    terms = []
    for pin in pins:
        p = pos0[pin.qubit]
        partner = p + 1
        block = np.zeros((QUDIT_DIM**2,) * 2, dtype=complex)
        bad = cfg0[p] + str(1 - pin.value)
        lv = [LEVEL_INDEX[bad], level(cfg0[partner], 0) if cfg0[partner] not in DATA_CLASSES else None]
        if lv[1] is None:
            raise ValueError("pin partner qudit carries data")
        idx = lv[0] * QUDIT_DIM + lv[1]
        block[idx, idx] = 1
        terms.append(LocalTerm((p, partner), block))
    return terms


def audit_pins(clock: Clock, pins: Sequence[Pin]) -> list[str]:
    """Each pin pattern may only fire on configurations where its qubit is still untouched."""
    problems = []
    touched_at = {}
    for t, r in enumerate(clock.rules):
        if r.gate is not None:
            left = sum(c in DATA_CLASSES for c in clock.configs[t][: r.pos])
            for q in (left, left + 1):
                touched_at.setdefault(q, t + 1)
    cfg0 = clock.configs[0]
    for pin in pins:
        p = clock.data_positions(0)[pin.qubit]
        pat = (cfg0[p], cfg0[p + 1])
        for t, c in enumerate(clock.configs):
            if _matches(c, p, pat):
                owner = sum(x in DATA_CLASSES for x in c[:p])
                if owner != pin.qubit or t >= touched_at.get(pin.qubit, math.inf):
                    problems.append(f"pin on qubit {pin.qubit} fires in configuration {t}")
    return problems


@dataclass
class OneDHamiltonian:
    clock: Clock
    rc: RoundCircuit
    H_in: Hamiltonian
    H_prop: Hamiltonian
    H_pen: Hamiltonian
    pins: list[Pin]
    allowed_pairs: list[set[tuple[str, str]]]

    def G(self, d_in: float, d_prop: float, d_pen: float) -> Hamiltonian:
        return self.H_in.scaled(d_in) + self.H_prop.scaled(d_prop) + self.H_pen.scaled(d_pen)


def build_1d_hamiltonian(rc: RoundCircuit, pins: Sequence[Pin] = ()) -> OneDHamiltonian:
    clock = enumerate_legal_configurations(rc.n, rc.R)
    audit = audit_clock(clock)
    if audit.rule_conflicts:
        raise ValueError("clock rules are ambiguous: " + "; ".join(audit.rule_conflicts[:3]))
    probs = audit_pins(clock, pins)
    if probs:
        raise ValueError("; ".join(probs))
    N = clock.n_qudits
    layout = line_layout(N)
    prop = []
    for r in clock.rules:
        U = rc.rounds[r.gate[0] - 1][r.gate[1]] if r.gate else (I4 if n_data(r.before) == 2 else None)
        prop.append(LocalTerm((r.pos, r.pos + 1), rule_block(r, U)))
    allowed = [set() for _ in range(N - 1)]
    for cfg in clock.configs:
        for j in range(N - 1):
            allowed[j].add((cfg[j], cfg[j + 1]))
    pen = []
    for j in range(N - 1):
        bad = [pq for pq in itertools.product(CLASSES, repeat=2) if pq not in allowed[j]]
        pen.append(LocalTerm((j, j + 1), pair_projector(bad)))
    return OneDHamiltonian(
        clock,
        rc,
        Hamiltonian(layout, tuple(pin_terms(clock, pins))),
        Hamiltonian(layout, tuple(prop)),
        Hamiltonian(layout, tuple(pen)),
        list(pins),
        allowed,
    )


def sifter_terms(clock: Clock, m: int, r_star: int, epsilon: float) -> list[LocalTerm]:
    out = []
    for i in range(1, m + 1):
        q = sifter_qudit(clock.n, r_star, i) - 1
        if not 0 <= q < clock.n_qudits:
            raise ValueError(f"sifter qudit {q + 1} out of range")
        out.append(LocalTerm((q,), single_projector(LEVEL_INDEX["G0"]), epsilon))
    return out


def add_sifters(G: Hamiltonian, clock: Clock, m: int, r_star: int, epsilon: float) -> Hamiltonian:
    if m > clock.n:
        raise ValueError("more queries than logical qubits")
    return G.with_terms(sifter_terms(clock, m, r_star, epsilon))


def build_observable(n: int, R: int) -> Hamiltonian:
    N = 2 * n * R
    return Hamiltonian(line_layout(N), (LocalTerm((N - 1,), single_projector(LEVEL_INDEX["G0"])),))


# Legal subspace.


@dataclass
class LegalBasis:
    """Basis |t, d>: configuration t with logical data d (qubit 0 most significant)."""

    clock: Clock
    digits: np.ndarray  # (basis size, N) qudit levels

    @property
    def size(self) -> int:
        return self.digits.shape[0]

    def index(self, t: int, d: int) -> int:
        return t * 2**self.clock.n + d

    def full_indices(self) -> np.ndarray:
        N = self.digits.shape[1]
        weights = QUDIT_DIM ** np.arange(N - 1, -1, -1, dtype=np.int64)
        return self.digits.astype(np.int64) @ weights


def legal_basis(clock: Clock) -> LegalBasis:
    n = clock.n
    rows = []
    for cfg in clock.configs:
        for d in range(2**n):
            bits = [(d >> (n - 1 - i)) & 1 for i in range(n)]
            it = iter(bits)
            rows.append([level(c, next(it)) if c in DATA_CLASSES else level(c) for c in cfg])
    return LegalBasis(clock, np.array(rows, dtype=np.int64))


def restrict_to_basis(H: Hamiltonian, digits: np.ndarray) -> np.ndarray:
    """Compression <b|H|b'> over product basis states given by their qudit levels."""
    B, N = digits.shape
    out = np.zeros((B, B), dtype=complex)
    pos = H.layout.position
    for t in H.terms:
        cols = [pos[s] for s in t.support]
        rest = [c for c in range(N) if c not in cols]
        same = np.all(digits[:, None, rest] == digits[None, :, rest], axis=2)
        loc = np.zeros(B, dtype=np.int64)
        for c in cols:
            loc = loc * H.layout.dims[c] + digits[:, c]
        out += t.weight * t.block[loc[:, None], loc[None, :]] * same
    return out


def step_operator(rc: RoundCircuit, rule: Rule) -> np.ndarray:
    if rule.gate is None:
        return np.eye(2**rc.n, dtype=complex)
    return rc.gate_operator(*rule.gate)


def build_history_state(rc: RoundCircuit, initial, clock: Clock | None = None) -> np.ndarray:
    """(1/sqrt(L+1)) sum_t |t> (x) U_t ... U_1 |initial> in the legal basis."""
    clock = clock or enumerate_legal_configurations(rc.n, rc.R)
    dim = 2**rc.n
    if isinstance(initial, (tuple, list)) and len(initial) == rc.n and all(b in (0, 1) for b in initial):
        psi = np.zeros(dim, dtype=complex)
        psi[int("".join(map(str, initial)), 2)] = 1
    else:
        psi = np.asarray(initial, dtype=complex)
        psi = psi / np.linalg.norm(psi)
    out = []
    for t in range(len(clock.configs)):
        out.append(psi)
        if t < len(clock.rules):
            psi = step_operator(rc, clock.rules[t]) @ psi
    return np.concatenate(out) / math.sqrt(len(clock.configs))


def embed_legal_vector(basis: LegalBasis, v: np.ndarray) -> np.ndarray:
    N = basis.digits.shape[1]
    out = np.zeros(QUDIT_DIM**N, dtype=complex)
    out[basis.full_indices()] = v
    return out


# Parameters.


@dataclass(frozen=True)
class OneDParams:
    m: int
    L: int
    epsilon: Fraction
    a: Fraction
    b: Fraction
    delta: Fraction
    gamma: Fraction
    p: Fraction
    d_in: float = 1.0
    d_prop: float = 1.0
    d_pen: float = 1.0

    @property
    def feasibility_margin(self) -> Fraction:
        return (self.epsilon - self.p) * self.epsilon / self.L - (self.delta + self.m * self.epsilon * self.gamma)

    def with_penalties(self, d_in: float, d_prop: float, d_pen: float) -> "OneDParams":
        return OneDParams(self.m, self.L, self.epsilon, self.a, self.b, self.delta, self.gamma, self.p, d_in, d_prop, d_pen)


class InfeasibleParameters(ValueError):
    pass


def set_parameters(m: int, L: int, p: Fraction = Fraction(1, 2**20)) -> OneDParams:
    if m < 1 or L < 1:
        raise ValueError("m and L must be positive")
    p = Fraction(p)
    eps = Fraction(1, 8 * m)
    delta = gamma = Fraction(1, 256 * m * m * L)
    params = OneDParams(m, L, eps, Fraction(1, 4 * L), Fraction(3, 4 * L), delta, gamma, p)
    if not p < eps:
        raise InfeasibleParameters("completeness error p must be below epsilon")
    if params.feasibility_margin <= 0:
        raise InfeasibleParameters(f"delta + m eps gamma >= (eps - p) eps / L for p={p}")
    return params


# Instances and verification.


@dataclass
class OneDInstance:
    rc: RoundCircuit
    ham: OneDHamiltonian
    m: int
    answers: dict[int, int]  # valid query index (1-based) -> correct answer
    expected: str  # "YES" if the computation accepts (final output 1)
    name: str = ""

    @property
    def clock(self) -> Clock:
        return self.ham.clock

    @property
    def n_configs(self) -> int:
        return len(self.clock.configs)


def toy_instance(query: str, R: int = 2, negate_output: bool = False) -> OneDInstance:
    """n = 2, m = 1. Logical qubit 0 holds the query answer, qubit 1 the output.

    A YES query leaves the answer free (any proof is acceptable to the toy
    verifier, the sifter picks answer 1). A NO query pins the answer to 0.
    Round 1 is the pause round; round 2 copies the answer into the output
    (optionally negated). With R = 1 the output stays 0.
    """
    if query not in ("yes", "no"):
        raise ValueError("query must be 'yes' or 'no'")
    rounds = [[I4.copy()]]
    if R == 2:
        U = CNOT4 if not negate_output else np.kron(np.eye(2), X2) @ CNOT4
        rounds.append([U])
    elif R != 1:
        raise ValueError("toy instances have one or two rounds")
    rc = RoundCircuit(2, rounds, r_star=1)
    pins = [Pin(1, 0)] + ([Pin(0, 0)] if query == "no" else [])
    ham = build_1d_hamiltonian(rc, pins)
    answer = 1 if query == "yes" else 0
    out = 0 if R == 1 else (answer ^ int(negate_output))
    name = f"{query}-R{R}" + ("-neg" if negate_output else "")
    return OneDInstance(rc, ham, 1, {1: answer}, "YES" if out == 1 else "NO", name)


def toy_suite() -> list[OneDInstance]:
    return [
        toy_instance("yes", 1),
        toy_instance("no", 1),
        toy_instance("yes", 2),
        toy_instance("no", 2),
        toy_instance("yes", 2, True),
        toy_instance("no", 2, True),
    ]


@dataclass
class SeparationReport:
    lam: float
    eig_A: np.ndarray
    window_min: float
    window_max: float
    a: float
    b: float
    expected: str

    @property
    def eigen_passes(self) -> bool:
        if self.expected == "YES":
            return bool(np.all(self.eig_A <= self.a + 1e-9))
        return bool(np.all(self.eig_A >= self.b - 1e-9))

    @property
    def window_passes(self) -> bool:
        if self.expected == "YES":
            return self.window_max <= self.a + 1e-9
        return self.window_min >= self.b - 1e-9


@dataclass
class LowEnergyReport:
    params: OneDParams
    null_dim: int
    history_dim: int
    null_residual: float
    history_residual: float
    max_trace_distance: float
    window_trace_distance: float
    gate_overlaps: dict[int, float]
    gate_overlap_bound: float
    gamma_product: float
    gamma_bound: float
    separation: SeparationReport
    lam_H: float

    @property
    def null_ok(self) -> bool:
        return self.null_dim == self.history_dim and self.null_residual < 1e-8

    @property
    def trace_ok(self) -> bool:
        return self.max_trace_distance <= float(self.params.gamma)

    @property
    def window_trace_ok(self) -> bool:
        return self.window_trace_distance <= float(self.params.gamma)

    @property
    def overlaps_ok(self) -> bool:
        return all(v >= self.gate_overlap_bound - 1e-12 for v in self.gate_overlaps.values())

    @property
    def gamma_ok(self) -> bool:
        return self.gamma_product >= self.gamma_bound - 1e-12

    @property
    def passed(self) -> bool:
        return self.null_ok and self.trace_ok and self.overlaps_ok and self.gamma_ok and self.separation.window_passes


def history_span(inst: OneDInstance) -> np.ndarray:
    """Orthonormal basis of history states whose initial data satisfies every pin."""
    n = inst.rc.n
    pinned = {p.qubit: p.value for p in inst.ham.pins}
    cols = []
    for bits in itertools.product((0, 1), repeat=n):
        if all(bits[q] == v for q, v in pinned.items()):
            cols.append(build_history_state(inst.rc, list(bits), inst.clock))
    return np.array(cols).T


def legal_operators(inst: OneDInstance, params: OneDParams):
    basis = legal_basis(inst.clock)
    G = inst.ham.G(params.d_in, params.d_prop, params.d_pen)
    sif = Hamiltonian(G.layout, tuple(sifter_terms(inst.clock, inst.m, inst.rc.r_star, float(params.epsilon))))
    A = build_observable(inst.rc.n, inst.rc.R)
    return basis, restrict_to_basis(G, basis.digits), restrict_to_basis(sif, basis.digits), restrict_to_basis(A, basis.digits)


def _gate_weight(inst: OneDInstance, basis: LegalBasis, psi: np.ndarray, qudit: int, lvl: int) -> float:
    mask = basis.digits[:, qudit] == lvl
    return float(np.sum(np.abs(psi[mask]) ** 2))


def _low_eigh(M: np.ndarray, k: int = 48):
    """Full eigendecomposition for small matrices, lowest k pairs otherwise."""
    if M.shape[0] <= 512:
        return np.linalg.eigh(M)
    return sla.eigh(M, subset_by_index=[0, k - 1])


def verify_low_energy_structure(inst: OneDInstance, params: OneDParams, full_space: bool = False) -> LowEnergyReport:
    """Null space, trace distance, gate overlaps, the union-bound product and <A> separation."""
    basis, Gm, Sm, Am = legal_operators(inst, params)
    if full_space:
        Gm, Sm, Am, hist = _full_space_operators(inst, params, basis)
    else:
        hist = history_span(inst)
    Hm = Gm + Sm
    gw, gv = _low_eigh(Gm)
    scale = max(params.d_in, params.d_prop, params.d_pen)
    null = gv[:, gw <= 1e-9 * scale]
    # null space and history span agree iff the null basis lies inside the span
    null_res = float(np.linalg.norm(null - hist @ (hist.conj().T @ null), 2)) if null.shape[1] == hist.shape[1] else math.inf
    hist_res = float(np.max(np.linalg.norm(Gm @ hist, axis=0)))

    hw, hv = _low_eigh(Hm)
    lam = float(hw[0])
    delta = float(params.delta)
    if len(hw) < Hm.shape[0] and hw[-1] <= lam + delta:
        raise RuntimeError("partial spectrum does not cover the energy window")
    low = hv[:, hw <= lam + delta]
    fid = np.linalg.norm(hist.conj().T @ low, axis=0) ** 2
    tdist = float(np.max(2 * np.sqrt(np.clip(1 - fid, 0, None))))
    ground = hv[:, 0]
    psi_hist = hist @ (hist.conj().T @ ground)
    psi_hist = psi_hist / np.linalg.norm(psi_hist)
    overlaps = {}
    n_cfg = inst.n_configs
    if not full_space:
        for i, x in inst.answers.items():
            q = sifter_qudit(inst.rc.n, inst.rc.r_star, i) - 1
            overlaps[i] = _gate_weight(inst, basis, psi_hist, q, LEVEL_INDEX[f"G{x}"])
        q1 = sifter_qudit(inst.rc.n, inst.rc.r_star, 1) - 1
        t_star = inst.clock.gate_label_configs(q1)[0]
        block = psi_hist[basis.index(t_star, 0) : basis.index(t_star, 0) + 2**inst.rc.n]
        block = block / np.linalg.norm(block)
        digits_t = basis.digits[basis.index(t_star, 0) : basis.index(t_star, 0) + 2**inst.rc.n]
        mask = np.ones(len(block), dtype=bool)
        for i, x in inst.answers.items():
            q = sifter_qudit(inst.rc.n, inst.rc.r_star, i) - 1
            lbl = "G" if i == 1 else "Q"
            mask &= digits_t[:, q] == LEVEL_INDEX[f"{lbl}{x}"]
        gamma_prod = float(np.sum(np.abs(block[mask]) ** 2))
    else:
        gamma_prod = 1.0
    eps = float(params.epsilon)
    if full_space:
        # the exact window dual would need dozens of 4096-dim solves; eigenvectors only
        exps = np.real(np.einsum("ij,ik,kj->j", low.conj(), Am, low))
        sep = SeparationReport(lam, exps, float(exps.min()), float(exps.max()), float(params.a), float(params.b), inst.expected)
        min_fid = float(fid.min())
    else:
        scan = scan_low_energy(Hm, Am, delta)
        sep = SeparationReport(lam, scan.expectations, scan.range_min, scan.range_max, float(params.a), float(params.b), inst.expected)
        # worst state of the whole window, not only eigenvectors
        min_fid = window_min_expectation(Hm, hist @ hist.conj().T, lam, delta, 1.0)
    tdist_window = float(2 * math.sqrt(max(1 - min_fid, 0.0)))
    return LowEnergyReport(
        params,
        null.shape[1],
        hist.shape[1],
        null_res,
        hist_res,
        tdist,
        tdist_window,
        overlaps,
        (1 - eps) / n_cfg,
        gamma_prod,
        1 - len(inst.answers) * eps,
        sep,
        lam,
    )


def _full_space_operators(inst: OneDInstance, params: OneDParams, basis: LegalBasis):
    """Dense operators on all 8^N states (only tiny lines) plus embedded history states."""
    G = inst.ham.G(params.d_in, params.d_prop, params.d_pen)
    if G.dim > 4096:
        raise ValueError(f"full-space check needs dimension <= 4096, got {G.dim}")
    sif = Hamiltonian(G.layout, tuple(sifter_terms(inst.clock, inst.m, inst.rc.r_star, float(params.epsilon))))
    A = build_observable(inst.rc.n, inst.rc.R)
    hist = history_span(inst)
    hist_full = np.array([embed_legal_vector(basis, h) for h in hist.T]).T
    mats = [to_sparse(op) for op in (G, sif, A)]
    if all(abs(M.imag).max() == 0 for M in mats):
        mats = [M.real for M in mats]
        hist_full = hist_full.real
    return (*[M.toarray() for M in mats], hist_full)


@dataclass
class PenaltySearch:
    params: OneDParams
    report: LowEnergyReport
    doublings: int
    trail: list = field(default_factory=list)


def search_penalties(inst: OneDInstance, base: OneDParams | None = None, cap: float = 2.0**20) -> PenaltySearch:
    """Double all three penalty strengths from 1 until the null-space and trace-distance checks pass.

    The trace-distance target is checked on eigenvectors of the window. Over
    the whole window it would need strengths past the cap, so the search also
    requires the observable separation on every window state, which is the
    consequence the construction needs.
    """
    base = base or set_parameters(inst.m, inst.n_configs)
    d = 1.0
    trail = []
    k = 0
    while d <= cap:
        params = base.with_penalties(d, d, d)
        rep = verify_low_energy_structure(inst, params)
        trail.append((d, rep.null_ok, rep.max_trace_distance, rep.window_trace_distance))
        if rep.null_ok and rep.trace_ok and rep.separation.window_passes:
            return PenaltySearch(params, rep, k, trail)
        d *= 2
        k += 1
    raise InfeasibleParameters(f"penalty search exceeded {cap}")

"""Encodings, simulation witnesses and the instance reduction through a simulation.

An encoding maps every source site onto a few target sites by an isometry
and may carry one ancilla register split by orthogonal projectors P and Q:
E(M) = V (M (x) P + conj(M) (x) Q) V^dagger. With no ancilla P = 1, Q = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .instances import ApxSimInstance
from .operator_core import X, Hamiltonian, LocalTerm, RegisterLayout, to_dense
from .textformat import Document, Section, dumps_document, loads_document

ISO_TOL = 1e-10


@dataclass(frozen=True)
class Encoding:
    """Per-site isometries plus optional ancilla projectors.

    The target layout lists the targets of source site 0, then site 1 and so
    on, followed by the ancilla sites.
    """

    source: RegisterLayout
    targets: Mapping[int, tuple[int, ...]]
    isometries: Mapping[int, np.ndarray]
    target: RegisterLayout
    ancilla: tuple[int, ...] = ()
    P: np.ndarray | None = None
    Q: np.ndarray | None = None

    def __post_init__(self):
        order = [t for s in self.source.site_ids for t in self.targets[s]] + list(self.ancilla)
        if tuple(order) != self.target.site_ids:
            raise ValueError("target layout must list per-site targets in source order, then ancillae")
        for s in self.source.site_ids:
            V = np.asarray(self.isometries[s], dtype=complex)
            rows = int(np.prod([self.target.dim_of(t) for t in self.targets[s]]))
            if V.shape != (rows, self.source.dim_of(s)):
                raise ValueError(f"isometry for site {s} has shape {V.shape}, expected {(rows, self.source.dim_of(s))}")
            if np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))) > ISO_TOL:
                raise ValueError(f"map for site {s} is not an isometry")
        P, Q = self.projectors
        if np.max(np.abs(P @ Q)) > ISO_TOL or np.max(np.abs(Q @ P)) > ISO_TOL:
            raise ValueError("ancilla projectors must satisfy PQ = QP = 0")
        for M in (P, Q):
            if np.max(np.abs(M @ M - M)) > ISO_TOL or np.max(np.abs(M - M.conj().T)) > ISO_TOL:
                raise ValueError("ancilla operators must be orthogonal projectors")

    @property
    def ancilla_dim(self) -> int:
        return int(np.prod([self.target.dim_of(t) for t in self.ancilla])) if self.ancilla else 1

    @property
    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.ancilla_dim
        P = np.eye(d, dtype=complex) if self.P is None else np.asarray(self.P, dtype=complex)
        Q = np.zeros((d, d), dtype=complex) if self.Q is None else np.asarray(self.Q, dtype=complex)
        return P, Q

    @property
    def is_special(self) -> bool:
        return not self.ancilla

    def local_isometry(self, sites: Sequence[int]) -> np.ndarray:
        V = np.ones((1, 1), dtype=complex)
        for s in sites:
            V = np.kron(V, self.isometries[s])
        return V

    def global_isometry(self) -> np.ndarray:
        """V on source (x) ancilla into the target space."""
        return np.kron(self.local_isometry(self.source.site_ids), np.eye(self.ancilla_dim))


def trivial_encoding(layout: RegisterLayout) -> Encoding:
    return Encoding(layout, {s: (s,) for s in layout.site_ids}, {s: np.eye(layout.dim_of(s)) for s in layout.site_ids}, layout)


REPETITION = np.array([[1, 0], [0, 0], [0, 0], [0, 1]], dtype=complex)  # |b> -> |bb>


def repetition_encoding(source: RegisterLayout) -> Encoding:
    if any(d != 2 for d in source.dims):
        raise ValueError("repetition encoding needs qubit sites")
    targets = {s: (2 * k, 2 * k + 1) for k, s in enumerate(source.site_ids)}
    target = RegisterLayout.qubits(2 * source.n_sites)
    return Encoding(source, targets, {s: REPETITION for s in source.site_ids}, target)


def conjugation_encoding(source: RegisterLayout) -> Encoding:
    """V = I with one ancilla qubit: P = |0><0| keeps M, Q = |1><1| conjugates it."""
    anc = max(source.site_ids) + 1
    target = RegisterLayout(source.sites + ((anc, 2),))
    return Encoding(
        source,
        {s: (s,) for s in source.site_ids},
        {s: np.eye(source.dim_of(s)) for s in source.site_ids},
        target,
        (anc,),
        np.diag([1.0, 0.0]).astype(complex),
        np.diag([0.0, 1.0]).astype(complex),
    )


def _dense(M, layout: RegisterLayout) -> np.ndarray:
    if isinstance(M, Hamiltonian):
        if M.layout != layout:
            raise ValueError("operator layout does not match the encoding source")
        return to_dense(M)
    M = np.asarray(M, dtype=complex)
    if M.shape != (layout.dim, layout.dim):
        raise ValueError(f"operator of shape {M.shape} does not act on dimension {layout.dim}")
    return M


def encoded_matrix(enc: Encoding, M) -> np.ndarray:
    """M (x) P + conj(M) (x) Q on source (x) ancilla."""
    Md = _dense(M, enc.source)
    P, Q = enc.projectors
    return np.kron(Md, P) + np.kron(Md.conj(), Q)


def apply_encoding(enc: Encoding, M) -> np.ndarray:
    V = enc.global_isometry()
    return V @ encoded_matrix(enc, M) @ V.conj().T


# Simulation witnesses.


@dataclass
class SimulationWitness:
    source: Hamiltonian
    target: Hamiltonian
    encoding: Encoding
    Delta: float
    eta: float
    epsilon: float

    def __post_init__(self):
        if not (self.Delta > 0 and self.eta > 0 and self.epsilon > 0):
            raise ValueError("Delta, eta and epsilon must be positive")
        if self.target.dim < self.source.dim:
            raise ValueError("target space is smaller than the source space")


PASS, RANK_MISMATCH, ETA_FAIL, EPS_FAIL = "pass", "rank-mismatch", "eta", "epsilon"


@dataclass
class SimulationReport:
    code: str
    low_rank: int
    code_rank: int
    eta_residual: float
    eps_residual: float
    eigenvalue_shift: float
    target_norm_bound: float
    V_tilde: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.code == PASS


def _code_columns(enc: Encoding) -> np.ndarray:
    """Isometry C onto source (x) supp(P + Q)."""
    P, Q = enc.projectors
    w, U = np.linalg.eigh(P + Q)
    S = U[:, w > 0.5]
    return np.kron(np.eye(enc.source.dim), S)


def verify_simulation(w: SimulationWitness, eta: float | None = None, epsilon: float | None = None) -> SimulationReport:
    """Check both simulation conditions with V~ = polar factor of P_low V."""
    eta = w.eta if eta is None else eta
    epsilon = w.epsilon if epsilon is None else epsilon
    enc = w.encoding
    Ht = to_dense(w.target)
    vals, vecs = np.linalg.eigh(Ht)
    low = vecs[:, vals <= w.Delta]
    C = _code_columns(enc)
    Vc = enc.global_isometry() @ C
    Mc = C.conj().T @ encoded_matrix(enc, w.source) @ C
    lam_src = float(np.linalg.eigvalsh(to_dense(w.source))[0])
    shift = abs(float(vals[0]) - lam_src)
    nb = w.target.norm_bound()
    pv = low @ (low.conj().T @ Vc)
    sv = np.linalg.svd(pv, compute_uv=False)
    full = low.shape[1] == Vc.shape[1] and sv.size and sv[-1] > 1e-12
    if not full:
        return SimulationReport(RANK_MISMATCH, low.shape[1], Vc.shape[1], math.inf, math.inf, shift, nb)
    U, _ = sla.polar(pv)
    eta_res = float(np.linalg.norm(U - Vc, 2))
    H_low = low @ np.diag(vals[vals <= w.Delta]) @ low.conj().T
    eps_res = float(np.linalg.norm(H_low - U @ Mc @ U.conj().T, 2))
    code = PASS if eta_res <= eta and eps_res <= epsilon else (ETA_FAIL if eta_res > eta else EPS_FAIL)
    return SimulationReport(code, low.shape[1], Vc.shape[1], eta_res, eps_res, shift, nb, U)


def _flip_first(k: int) -> np.ndarray:
    """X on the first physical qubit of each of k encoded pairs."""
    F = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        F = np.kron(F, np.kron(X, np.eye(2)))
    return F


def encoded_terms(H: Hamiltonian, enc: Encoding, leakage: float = 0.5) -> list[LocalTerm]:
    """V_S h V_S^dagger per term plus a leakage coupling that vanishes with h.

    The leakage piece F V h V^dagger + h.c. (F flips the first qubit of every
    pair) moves weight out of the code space, so the encoded Hamiltonian
    reproduces H only to second order in leakage / strength.
    """
    out = []
    for t in H.terms:
        V = enc.local_isometry(t.support)
        enc_block = V @ t.block @ V.conj().T
        if leakage:
            F = _flip_first(len(t.support))
            T = F @ enc_block
            enc_block = enc_block + leakage * (T + T.conj().T)
        supp = tuple(x for s in t.support for x in enc.targets[s])
        out.append(LocalTerm(supp, enc_block, t.weight))
    return out


CODE_PENALTY = np.diag([0.0, 1.0, 1.0, 0.0]).astype(complex)


def build_code_simulation(H: Hamiltonian, strength: float, leakage: float = 0.5) -> SimulationWitness:
    """Repetition-code target strength * sum (|01><01| + |10><10|) + encoded H, with Delta = strength / 2."""
    enc = repetition_encoding(H.layout)
    terms = encoded_terms(H, enc, leakage)
    terms += [LocalTerm(enc.targets[s], CODE_PENALTY, float(strength)) for s in H.layout.site_ids]
    Ht = Hamiltonian(enc.target, tuple(terms))
    w = SimulationWitness(H, Ht, enc, strength / 2, 1.0, 1.0)
    rep = verify_simulation(w)
    w.eta = max(rep.eta_residual, 1e-15)
    w.epsilon = max(rep.eps_residual, 1e-15)
    return w


def perturbative_estimate(w: SimulationWitness, strength: float, leakage: float = 0.5) -> float:
    """Second-order estimate of the epsilon residual of a code simulation.

    With off-diagonal coupling of norm c and gap g = strength - 2 ||H_code||,
    the low-energy block moves by about c^2 / g and rotates by c / g.
    """
    src_norm = w.source.norm_bound()
    c = 2 * leakage * src_norm
    g = strength - 2 * (src_norm + c)
    if g <= 0:
        return math.inf
    return 2 * c * c / g + 4 * src_norm * (c / g) ** 2


def translate_observable(A: Hamiltonian, enc: Encoding, S: Sequence[int] | None = None) -> Hamiltonian:
    """A' = V_S (B (x) P + conj(B) (x) Q) V_S^dagger term by term on the targets of S (plus ancillae)."""
    S = set(A.support() if S is None else S)
    P, Q = enc.projectors
    out = []
    for t in A.terms:
        if not set(t.support) <= S:
            raise ValueError(f"observable term on {t.support} escapes the site subset")
        V = np.kron(enc.local_isometry(t.support), np.eye(enc.ancilla_dim))
        block = V @ (np.kron(t.block, P) + np.kron(t.block.conj(), Q)) @ V.conj().T
        supp = tuple(x for s in t.support for x in enc.targets[s]) + enc.ancilla
        out.append(LocalTerm(supp, block, t.weight))
    A2 = Hamiltonian(enc.target, tuple(out))
    if enc.target.dim <= 4096:
        V = enc.global_isometry()
        lhs = V.conj().T @ to_dense(A2) @ V
        if np.max(np.abs(lhs - encoded_matrix(enc, A))) > ISO_TOL:
            raise AssertionError("translated observable does not pull back to the encoded observable")
    return A2


# Reduction.


class InfeasibleReduction(RuntimeError):
    def __init__(self, msg: str, trail: list):
        super().__init__(msg)
        self.trail = trail


@dataclass(frozen=True)
class ReductionConfig:
    delta0: float = 1.0
    max_doublings: int = 30


@dataclass
class ReductionResult:
    instance: ApxSimInstance
    witness: SimulationWitness
    report: SimulationReport
    delta_prime: float
    epsilon: float
    eta: float
    Delta: float
    doublings: int
    lhs_window: float
    lhs_observable: float
    trail: list = field(default_factory=list)


def reduced_thresholds(a: float, b: float) -> tuple[float, float]:
    third = (b - a) / 3
    return a + third, b - third


def code_builder(leakage: float = 0.5) -> Callable[[Hamiltonian, float], SimulationWitness]:
    def build(H: Hamiltonian, Delta: float) -> SimulationWitness:
        return build_code_simulation(H, 2 * Delta, leakage)

    return build


def reduce_apxsim2_instance(inst: ApxSimInstance, builder=None, config: ReductionConfig = ReductionConfig()) -> ReductionResult:
    """Map an all-low-energy-states instance through a simulation, searching Delta by doubling."""
    builder = builder or code_builder()
    delta_p = inst.delta / 4
    eps = inst.delta / 4
    eta = eps
    a2, b2 = reduced_thresholds(inst.a, inst.b)
    norm_a = float(np.linalg.norm(to_dense(inst.A), 2))
    third = (inst.b - inst.a) / 3
    Delta = config.delta0
    trail = []
    for k in range(config.max_doublings + 1):
        w = builder(inst.H, Delta)
        rep = verify_simulation(w, eta=eta, epsilon=eps)
        lam_t = float(np.linalg.eigvalsh(to_dense(w.target))[0])
        gap = Delta - lam_t
        lhs = norm_a * (2 * math.sqrt(delta_p / gap) + 2 * eta) if gap > 0 else math.inf
        trail.append((Delta, rep.code, rep.eta_residual, rep.eps_residual, lhs))
        if rep.passed and lhs < third:
            assert delta_p + 2 * eps < inst.delta
            A2 = translate_observable(inst.A, w.encoding)
            w = replace(w, eta=eta, epsilon=eps)
            meta = dict(inst.meta, reduced_from=inst.meta.get("kind", "instance"))
            out = ApxSimInstance(w.target, A2, a2, b2, delta_p, meta)
            return ReductionResult(out, w, rep, delta_p, eps, eta, Delta, k, delta_p + 2 * eps, lhs, trail)
        Delta *= 2
    raise InfeasibleReduction(f"no simulation met the parameters within {config.max_doublings} doublings", trail)


# Serialization of witnesses.


def witness_to_text(w: SimulationWitness) -> tuple[str, str]:
    """(target document, source document). Isometries go in ISO sections; P and Q use sites -1 and -2."""
    enc = w.encoding
    secs = [Section("HAM", (), list(w.target.terms))]
    for s in enc.source.site_ids:
        V = np.asarray(enc.isometries[s], dtype=complex)
        secs.append(Section("ISO", (str(s), str(V.shape[0]), str(V.shape[1])), [], V))
    if enc.ancilla:
        P, Q = enc.projectors
        secs.append(Section("ISO", ("-1",) + (str(P.shape[0]),) * 2, [], P))
        secs.append(Section("ISO", ("-2",) + (str(Q.shape[0]),) * 2, [], Q))
    meta = {
        "kind": "simcode",
        "Delta": repr(float(w.Delta)),
        "eta": repr(float(w.eta)),
        "epsilon": repr(float(w.epsilon)),
        "ancilla": " ".join(map(str, enc.ancilla)) or "-",
    }
    for s in enc.source.site_ids:
        meta[f"targets.{s}"] = " ".join(map(str, enc.targets[s]))
    target_doc = Document(enc.target, secs, None, meta)
    source_doc = Document(w.source.layout, [Section("HAM", (), list(w.source.terms))])
    return dumps_document(target_doc), dumps_document(source_doc)


def witness_from_text(target_text: str, source_text: str) -> SimulationWitness:
    tdoc, sdoc = loads_document(target_text), loads_document(source_text)
    src = sdoc.hamiltonian()
    iso = {int(sec.args[0]): sec.matrix for sec in tdoc.all("ISO")}
    anc = () if tdoc.meta["ancilla"] == "-" else tuple(int(x) for x in tdoc.meta["ancilla"].split())
    targets = {s: tuple(int(x) for x in tdoc.meta[f"targets.{s}"].split()) for s in src.layout.site_ids}
    enc = Encoding(
        src.layout,
        targets,
        {s: iso[s] for s in src.layout.site_ids},
        tdoc.layout,
        anc,
        iso.get(-1),
        iso.get(-2),
    )
    m = tdoc.meta
    return SimulationWitness(src, tdoc.hamiltonian(), enc, float(m["Delta"]), float(m["eta"]), float(m["epsilon"]))

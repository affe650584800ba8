"""The simulation-problem instance tuple and exact ground-truth classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .operator_core import Hamiltonian, LocalTerm, RegisterLayout, X, Y, Z
from .spectral import as_dense

YES, NO, INVALID = "YES", "NO", "INVALID"


@dataclass(frozen=True)
class ApxSimInstance:
    """(H, A, k, l, a, b, delta): estimate <A> on states within delta of lambda(H)."""

    H: Hamiltonian
    A: Hamiltonian
    a: float
    b: float
    delta: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("thresholds must satisfy a < b")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.H.layout != self.A.layout:
            raise ValueError("H and A must share a layout")

    @property
    def k(self) -> int:
        return max((len(t.support) for t in self.H.terms), default=0)

    @property
    def ell(self) -> int:
        return max((len(t.support) for t in self.A.terms), default=0)


@dataclass
class LowEnergyScan:
    lam: float
    energies: np.ndarray
    expectations: np.ndarray
    range_min: float
    range_max: float
    ground_min: float


def window_min_expectation(Hm: np.ndarray, Am: np.ndarray, lam: float, delta: float, norm_a: float) -> float:
    """min <A> over all unit psi with <H> <= lam + delta, by Lagrangian duality.

    The joint numerical range of two Hermitian matrices is convex, so
    min <A> = max_{t >= 0} lambda_min(A + t (H - lam - delta)).
    """
    c = lam + delta

    def neg_dual(t: float) -> float:
        return -(np.linalg.eigvalsh(Am + t * Hm)[0] - t * c)

    t_max = 2.0 * norm_a / delta + 1.0
    res = minimize_scalar(neg_dual, bounds=(0.0, t_max), method="bounded", options={"xatol": 1e-12 * t_max})
    return max(-res.fun, -neg_dual(0.0))


def scan_low_energy(H, A, delta: float, ground_tol: float = 1e-9) -> LowEnergyScan:
    """Eigenvector scan of the window plus exact extremes of <A> over it."""
    Hm, Am = as_dense(H), as_dense(A)
    w, V = np.linalg.eigh(Hm)
    lam = float(w[0])
    keep = w <= lam + delta
    exps = np.real(np.einsum("ij,ik,kj->j", V[:, keep].conj(), Am, V[:, keep]))
    norm_a = float(np.linalg.norm(Am, 2))
    lo = window_min_expectation(Hm, Am, lam, delta, norm_a)
    hi = -window_min_expectation(Hm, -Am, lam, delta, norm_a)
    G = V[:, w <= lam + ground_tol]
    ground_min = float(np.linalg.eigvalsh(G.conj().T @ Am @ G)[0])
    return LowEnergyScan(lam, w[keep], exps, lo, hi, ground_min)


def classify_by_eigenvectors(inst: ApxSimInstance, tol: float = 0.0) -> str:
    """Verdict from the eigenvectors inside the window (all must agree)."""
    scan = scan_low_energy(inst.H, inst.A, inst.delta)
    if np.all(scan.expectations <= inst.a + tol):
        return YES
    if np.all(scan.expectations >= inst.b - tol):
        return NO
    return INVALID


def classify_forall(inst: ApxSimInstance, tol: float = 1e-9) -> str:
    """Exact verdict for the all-low-energy-states variant."""
    scan = scan_low_energy(inst.H, inst.A, inst.delta)
    if scan.range_max <= inst.a + tol:
        return YES
    if scan.range_min >= inst.b - tol:
        return NO
    return INVALID


def classify_apxsim(inst: ApxSimInstance, tol: float = 1e-9) -> str:
    """Exact verdict for the ground-state variant: YES needs one ground state with <A> <= a."""
    scan = scan_low_energy(inst.H, inst.A, inst.delta)
    yes = scan.ground_min <= inst.a + tol
    no = scan.range_min >= inst.b - tol
    if yes and not no:
        return YES
    if no and not yes:
        return NO
    return INVALID


def random_apxsim_instance(
    rng: np.random.Generator,
    n_qubits: int,
    verdict: str,
    forall: bool = False,
    delta: float = 0.1,
    gap: float = 0.5,
    margin: float = 0.05,
) -> ApxSimInstance:
    """Random 2-local H and 1-local A with thresholds placed to force the verdict.

    YES puts a just above the ground (or, with ``forall``, the window-wide)
    maximum of <A>; NO puts b just below the window-wide minimum.
    """
    layout = RegisterLayout.qubits(n_qubits)
    terms = []
    for i in range(n_qubits):
        if i + 1 < n_qubits:
            M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            terms.append(LocalTerm((i, i + 1), (M + M.conj().T) / 4))
        M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        terms.append(LocalTerm((i,), (M + M.conj().T) / 4))
    H = Hamiltonian(layout, tuple(terms))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    A_block = axis[0] * X + axis[1] * Y + axis[2] * Z
    A = Hamiltonian(layout, (LocalTerm((int(rng.integers(n_qubits)),), A_block),))
    scan = scan_low_energy(H, A, delta)
    if verdict == YES:
        a = (scan.range_max if forall else scan.ground_min) + margin
        b = a + gap
    elif verdict == NO:
        b = scan.range_min - margin
        a = b - gap
    else:
        raise ValueError("verdict must be YES or NO")
    return ApxSimInstance(H, A, a, b, delta, meta={"kind": "random", "forall": forall})

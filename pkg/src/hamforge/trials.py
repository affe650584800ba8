"""Seeded random trials for the trace-distance, projection and union-bound lemmas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import check_low_energy_distance, closeness_to_nullspace, projection_lemma_bounds, union_bound_check


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (M + M.conj().T) / 2


def random_state(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    rank = rank or int(rng.integers(1, d + 1))
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


@dataclass
class TrialSummary:
    name: str
    trials: int
    failures: int
    worst_margin: float  # min over trials of rhs - lhs
    witness: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _record(summary: TrialSummary, margin: float, holds: bool, witness: dict):
    """Keep the first violation as the witness, else the tightest trial."""
    if not holds:
        summary.failures += 1
        if summary.failures == 1:
            summary.witness = witness
    if margin < summary.worst_margin:
        summary.worst_margin = margin
        if summary.failures == 0:
            summary.witness = witness


def low_energy_trials(trials: int, seed: int, max_qubits: int = 3) -> TrialSummary:
    """rho mixes low eigenvectors with a random tail; delta is its measured excess."""
    rng = np.random.default_rng(seed)
    out = TrialSummary("lowenergy", trials, 0, np.inf)
    for k in range(trials):
        n = int(rng.integers(1, max_qubits + 1))
        d = 2**n
        H = random_hermitian(rng, d)
        w, V = np.linalg.eigh(H)
        low = V[:, : int(rng.integers(1, d + 1))]
        coeffs = random_state(rng, low.shape[1])
        psi = low @ coeffs
        tail = random_density(rng, d)
        mix = rng.uniform(0, 0.3)
        rho = (1 - mix) * np.outer(psi, psi.conj()) + mix * tail
        delta = max(float(np.trace(H @ rho).real) - w[0], 1e-12)
        delta_p = delta * float(rng.uniform(0.5, 20.0))
        rep = check_low_energy_distance(H, rho, delta, delta_p)
        rhs_minus = rep.rhs - rep.lhs if np.isfinite(rep.lhs) else np.inf
        _record(out, rhs_minus, rep.holds, {"trial": k, "n": n, "delta": delta, "delta_p": delta_p, "lhs": rep.lhs, "rhs": rep.rhs})
    return out


def _projection_instance(rng: np.random.Generator, n: int, J: float):
    d = 2**n
    r = int(rng.integers(1, d))
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    S = Q[:, :r]
    comp = Q[:, r:]
    excess = np.diag(J + rng.uniform(0, J, size=d - r))
    H1 = comp @ excess @ comp.conj().T
    H2 = random_hermitian(rng, d)
    H2 *= rng.uniform(0.05, 0.45) * J / np.linalg.norm(H2, 2)
    return H1, H2, S


def projection_trials(trials: int, seed: int, couplings=(50.0, 100.0)) -> TrialSummary:
    """Sandwich bound plus closeness of a low-energy vector to the null space."""
    rng = np.random.default_rng(seed)
    out = TrialSummary("projection", trials, 0, np.inf)
    for k in range(trials):
        n = int(rng.integers(2, 4))
        J = float(couplings[k % len(couplings)])
        H1, H2, S = _projection_instance(rng, n, J)
        b = projection_lemma_bounds(H1, H2, S, J)
        margin = min(b.lam - b.lower, b.upper - b.lam)
        _record(out, margin, b.holds, {"trial": k, "part": "sandwich", "J": J, "lower": b.lower, "lam": b.lam, "upper": b.upper})
        w, V = np.linalg.eigh(H1 + H2)
        m = int(rng.integers(1, min(4, len(w)) + 1))
        psi = V[:, :m] @ random_state(rng, m)
        c = closeness_to_nullspace(H1, H2, S, J, psi)
        _record(out, c.bound - c.distance, c.holds, {"trial": k, "part": "closeness", "J": J, "distance": c.distance, "bound": c.bound})
    return out


def union_trials(trials: int, seed: int, max_qubits: int = 6) -> TrialSummary:
    """Random diagonal projector families against random low-rank states."""
    rng = np.random.default_rng(seed)
    out = TrialSummary("union", trials, 0, np.inf)
    for k in range(trials):
        n = int(rng.integers(1, max_qubits + 1))
        d = 2**n
        count = int(rng.integers(1, 6))
        Ps = []
        for _ in range(count):
            diag = (rng.uniform(size=d) < rng.uniform(0.5, 1.0)).astype(float)
            Ps.append(np.diag(diag))
        rho = random_density(rng, d, rank=int(rng.integers(1, min(d, 4) + 1)))
        rep = union_bound_check(Ps, rho)
        _record(out, rep.rhs - rep.lhs, rep.holds, {"trial": k, "n": n, "count": count, "lhs": rep.lhs, "rhs": rep.rhs})
    return out

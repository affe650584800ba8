"""Eigensolvers and numerical checks of low-energy spectral bounds."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .operator_core import (
    Hamiltonian,
    LocalTerm,
    RegisterLayout,
    embed_local_term,
    hermiticity_defect,
    max_dense_dim,
    to_dense,
)

logger = logging.getLogger(__name__)

LANCZOS_MAX_ITER = 500
LANCZOS_SEED = 20170101
CUT_TOL = 1e-9


class NonConvergenceError(RuntimeError):
    pass


class AmbiguousCutError(ValueError):
    """An eigenvalue sits within the cut tolerance of the requested threshold."""


class HypothesisError(ValueError):
    """A lemma's precondition does not hold for the supplied instance."""


def as_dense(op, max_dim: int | None = None) -> np.ndarray:
    if isinstance(op, Hamiltonian):
        return to_dense(op, max_dim)
    return np.asarray(op, dtype=complex)


def default_tol(H) -> float:
    bound = H.norm_bound() if isinstance(H, Hamiltonian) else float(np.linalg.norm(as_dense(H), 2))
    return 1e-9 * max(1.0, bound)


def trace_norm(m: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix: sum of absolute eigenvalues."""
    m = np.asarray(m, dtype=complex)
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))


def pure_trace_distance(psi: np.ndarray, phi: np.ndarray) -> float:
    """Trace norm of |psi><psi| - |phi><phi| for unit vectors."""
    ov = abs(np.vdot(psi, phi)) ** 2
    return 2.0 * float(np.sqrt(max(0.0, 1.0 - ov)))


@dataclass
class SpectralResult:
    lambda_min: float
    ground_vector: np.ndarray
    residual: float
    iterations: int = 0
    method: str = "dense"


def lanczos(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float,
    max_iter: int = LANCZOS_MAX_ITER,
    seed: int = LANCZOS_SEED,
) -> SpectralResult:
    """Smallest eigenpair by Lanczos with full reorthogonalization.

    The start vector is drawn from a fixed-seed generator, so repeated calls
    give identical results. Convergence is declared when the Ritz residual
    ``|beta_k * s_k|`` of the lowest Ritz pair falls below ``tol``.
    """
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    q /= np.linalg.norm(q)
    steps = min(max_iter, dim)
    Q = np.zeros((dim, steps + 1), dtype=complex)
    Q[:, 0] = q
    alpha = np.zeros(steps)
    beta = np.zeros(steps)
    for k in range(steps):
        w = apply(Q[:, k])
        alpha[k] = float(np.vdot(Q[:, k], w).real)
        w = w - alpha[k] * Q[:, k] - (beta[k - 1] * Q[:, k - 1] if k else 0)
        # two passes of classical Gram-Schmidt against every previous vector
        for _ in range(2):
            w -= Q[:, : k + 1] @ (Q[:, : k + 1].conj().T @ w)
        beta[k] = float(np.linalg.norm(w))
        if k == 0:
            theta, S = np.array([alpha[0]]), np.ones((1, 1))
        else:
            theta, S = sla.eigh_tridiagonal(alpha[: k + 1], beta[:k])
        exhausted = beta[k] < 1e-14 or k == steps - 1
        if abs(beta[k] * S[-1, 0]) < tol or exhausted:
            v = Q[:, : k + 1] @ S[:, 0]
            v /= np.linalg.norm(v)
            res = float(np.linalg.norm(apply(v) - theta[0] * v))
            if res < tol or beta[k] < 1e-14 or k == dim - 1:
                return SpectralResult(float(theta[0]), v, res, k + 1, "lanczos")
            if exhausted:
                raise NonConvergenceError(
                    f"Lanczos did not converge in {steps} iterations (residual {res:.3e})"
                )
        Q[:, k + 1] = w / beta[k]
    raise NonConvergenceError("Lanczos exhausted its iteration budget")


def min_eigenvalue(H, tol: float | None = None, method: str = "auto", max_dim: int | None = None) -> SpectralResult:
    """Smallest eigenvalue with a certified ground vector.

    ``method='auto'`` uses dense ``eigh`` below the dense cap and Lanczos on
    the lazy term-wise matvec above it.
    """
    tol = default_tol(H) if tol is None else tol
    dim = H.dim if isinstance(H, Hamiltonian) else np.asarray(H).shape[0]
    if method == "auto":
        method = "dense" if dim <= max_dense_dim(max_dim) else "lanczos"
    if method == "dense":
        M = as_dense(H, max_dim)
        w, V = np.linalg.eigh(M)
        v = V[:, 0]
        res = float(np.linalg.norm(M @ v - w[0] * v))
        return SpectralResult(float(w[0]), v, res, 0, "dense")
    if method == "lanczos":
        if isinstance(H, Hamiltonian):
            apply = H.matvec
        else:
            M = np.asarray(H, dtype=complex)
            apply = M.__matmul__
        return lanczos(apply, dim, tol)
    raise ValueError(f"unknown method {method!r}")


def spectrum(H, max_dim: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(as_dense(H, max_dim))


@dataclass
class LowEnergyProjector:
    threshold: float
    basis: np.ndarray
    eigenvalues: np.ndarray
    flagged: tuple[float, ...] = ()

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


def low_energy_projector(
    H,
    threshold: float,
    basis: np.ndarray | None = None,
    cut_tol: float = CUT_TOL,
    allow_ambiguous: bool = False,
    max_dim: int | None = None,
) -> LowEnergyProjector:
    """Projector onto the eigenvectors with eigenvalue strictly below ``threshold``.

    When ``basis`` (orthonormal columns spanning an invariant subspace) is
    given, the operator is diagonalized inside that subspace only and the
    returned vectors are expressed in the full space.
    """
    if basis is None:
        w, V = spectrum(H, max_dim)
    else:
        B = np.asarray(basis, dtype=complex)
        HB = np.column_stack([H.matvec(B[:, j]) for j in range(B.shape[1])]) if isinstance(H, Hamiltonian) else as_dense(H) @ B
        w, U = np.linalg.eigh(B.conj().T @ HB)
        V = B @ U
    near = tuple(float(x) for x in w[np.abs(w - threshold) <= cut_tol])
    if near and not allow_ambiguous:
        raise AmbiguousCutError(f"eigenvalues {near} lie within {cut_tol:g} of threshold {threshold}")
    keep = w < threshold
    return LowEnergyProjector(float(threshold), V[:, keep], w[keep], near)


def expectation(A, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    if isinstance(A, Hamiltonian):
        if psi.shape != (A.dim,):
            raise ValueError("state dimension does not match operator")
        val = np.vdot(psi, A.matvec(psi))
    else:
        M = np.asarray(A, dtype=complex)
        if M.shape[0] != psi.shape[0]:
            raise ValueError("state dimension does not match operator")
        val = np.vdot(psi, M @ psi)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def density_expectation(A, rho: np.ndarray) -> float:
    val = np.trace(as_dense(A) @ rho)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


@dataclass
class LowEnergyDistanceReport:
    lhs: float
    rhs: float
    energy_excess: float
    weight_in_window: float
    holds: bool
    vacuous: bool = False


def check_low_energy_distance(H, rho: np.ndarray, delta: float, delta_p: float, slack: float = 1e-9) -> LowEnergyDistanceReport:
    """Half trace distance from rho to its projection on the window below lambda + delta_p."""
    if delta_p <= 0:
        raise HypothesisError("delta_p must be positive")
    M = as_dense(H)
    rho = np.asarray(rho, dtype=complex)
    w, V = np.linalg.eigh(M)
    lam = float(w[0])
    excess = float(np.trace(M @ rho).real) - lam
    if excess > delta + slack:
        raise HypothesisError(f"energy excess {excess:.3e} exceeds delta {delta:.3e}")
    Vl = V[:, w < lam + delta_p]
    P = Vl @ Vl.conj().T
    weight = float(np.trace(P @ rho).real)
    rhs = float(np.sqrt(max(delta, 0.0) / delta_p))
    if weight <= 1e-300:
        return LowEnergyDistanceReport(float("nan"), rhs, excess, weight, False, True)
    rho_p = P @ rho @ P / weight
    lhs = 0.5 * trace_norm(rho - rho_p)
    return LowEnergyDistanceReport(lhs, rhs, excess, weight, lhs <= rhs + slack)


def _orthonormal(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=complex)
    if S.ndim == 1:
        S = S[:, None]
    q, _ = np.linalg.qr(S)
    return q


def _check_projection_hypotheses(H1: np.ndarray, H2: np.ndarray, S: np.ndarray, J: float, tol: float = 1e-9):
    K = float(np.linalg.norm(H2, 2))
    if J <= 2 * K:
        raise HypothesisError(f"J = {J} must exceed 2||H2|| = {2 * K}")
    leak = float(np.linalg.norm(H1 @ S)) if S.size else 0.0
    if leak > tol * max(1.0, J):
        raise HypothesisError(f"H1 does not annihilate S (residual {leak:.3e})")
    Pperp = np.eye(H1.shape[0]) - S @ S.conj().T
    w = np.linalg.eigvalsh(Pperp @ H1 @ Pperp)
    # S-perp eigenvalues are the nonzero ones; S contributes exact zeros.
    off = np.sort(w)[S.shape[1]:]
    if off.size and off[0] < J - tol * max(1.0, J):
        raise HypothesisError(f"H1 has an eigenvalue {off[0]:.6g} below J on the complement of S")
    return K


@dataclass
class ProjectionBounds:
    lower: float
    upper: float
    lam: float
    K: float
    holds: bool


def projection_lemma_bounds(H1, H2, S, J: float, slack: float = 1e-9) -> ProjectionBounds:
    """Sandwich lambda(H2|S) - K^2/(J - 2K) <= lambda(H1 + H2) <= lambda(H2|S), K = ||H2||."""
    A, B = as_dense(H1), as_dense(H2)
    S = _orthonormal(S)
    K = _check_projection_hypotheses(A, B, S, J)
    lam_s = float(np.linalg.eigvalsh(S.conj().T @ B @ S)[0])
    lam = float(np.linalg.eigvalsh(A + B)[0])
    lower = lam_s - K**2 / (J - 2 * K)
    return ProjectionBounds(lower, lam_s, lam, K, lower - slack <= lam <= lam_s + slack)


def closeness_bound(K: float, J: float, delta: float) -> float:
    return 2.0 * (K + np.sqrt(K**2 + delta * (J - 2 * K))) / (J - 2 * K)


@dataclass
class ClosenessReport:
    distance: float
    bound: float
    delta: float
    closest: np.ndarray
    holds: bool


def closeness_to_nullspace(H1, H2, S, J: float, psi: np.ndarray, delta: float | None = None, slack: float = 1e-9) -> ClosenessReport:
    """Distance from psi to its normalized projection onto S against the closeness bound."""
    A, B = as_dense(H1), as_dense(H2)
    S = _orthonormal(S)
    K = _check_projection_hypotheses(A, B, S, J)
    H = A + B
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    lam = float(np.linalg.eigvalsh(H)[0])
    measured = float(np.vdot(psi, H @ psi).real) - lam
    if delta is None:
        delta = max(measured, 0.0)
    elif measured > delta + slack:
        raise HypothesisError(f"energy excess {measured:.3e} exceeds delta {delta:.3e}")
    proj = S @ (S.conj().T @ psi)
    nrm = float(np.linalg.norm(proj))
    closest = proj / nrm if nrm > 0 else S[:, 0]
    dist = pure_trace_distance(psi, closest)
    bound = closeness_bound(K, J, delta)
    return ClosenessReport(dist, bound, delta, closest, dist <= bound + slack)


@dataclass
class UnionBoundReport:
    lhs: float
    rhs: float
    holds: bool


def union_bound_check(projectors: Sequence[np.ndarray], rho: np.ndarray, slack: float = 1e-9, comm_tol: float = 1e-10) -> UnionBoundReport:
    """1 - tr(P_m..P_1 rho P_1..P_m) against sum_i tr((I - P_i) rho)."""
    Ps = [as_dense(P) for P in projectors]
    rho = np.asarray(rho, dtype=complex)
    for i, P in enumerate(Ps):
        if hermiticity_defect(P) > comm_tol or np.max(np.abs(P @ P - P)) > comm_tol:
            raise HypothesisError(f"operator {i} is not an orthogonal projector")
    for i in range(len(Ps)):
        for j in range(i + 1, len(Ps)):
            c = np.max(np.abs(Ps[i] @ Ps[j] - Ps[j] @ Ps[i]))
            if c > comm_tol:
                raise HypothesisError(f"projectors {i} and {j} do not commute (defect {c:.3e})")
    prod = np.eye(rho.shape[0], dtype=complex)
    for P in Ps:
        prod = P @ prod
    lhs = 1.0 - float(np.trace(prod @ rho @ prod.conj().T).real)
    rhs = float(sum(np.trace((np.eye(rho.shape[0]) - P) @ rho).real for P in Ps))
    return UnionBoundReport(lhs, rhs, lhs <= rhs + slack)


def low_energy_scan(H, delta: float, max_dim: int | None = None) -> tuple[float, np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors with energy at most lambda(H) + delta."""
    w, V = spectrum(H, max_dim)
    keep = w <= w[0] + delta
    return float(w[0]), w[keep], V[:, keep]


@dataclass
class SectorSpectrum:
    """Eigen-decomposition of an operator that is diagonal on a set of classical sites."""

    energies: np.ndarray
    expectations: dict[str, np.ndarray]
    sectors: np.ndarray
    local_vectors: list[np.ndarray]
    quantum_sites: tuple[int, ...]


def _restrict_term(term, layout, classical_pos: dict[int, int], assignment: dict[int, int], quantum_sites):
    """The operator a term induces on the quantum sites once classical sites are fixed."""
    c_sites = [s for s in term.support if s in classical_pos]
    q_sites = [s for s in term.support if s not in classical_pos]
    dims = [layout.dim_of(s) for s in term.support]
    B = term.block.reshape(dims + dims)
    idx = []
    for s in term.support:
        idx.append(assignment[s] if s in classical_pos else slice(None))
    sub = B[tuple(idx) + tuple(idx)]
    qd = int(np.prod([layout.dim_of(s) for s in q_sites])) if q_sites else 1
    return q_sites, term.weight * np.asarray(sub).reshape(qd, qd)


def classical_defect(H: Hamiltonian, classical_sites) -> float:
    """Largest off-diagonal weight any term carries on the classical sites."""
    worst = 0.0
    cs = set(classical_sites)
    for t in H.terms:
        dims = [H.layout.dim_of(s) for s in t.support]
        B = t.block.reshape(dims + dims)
        k = len(dims)
        for a, s in enumerate(t.support):
            if s not in cs:
                continue
            Bm = np.moveaxis(B, (a, k + a), (0, 1))
            for i in range(dims[a]):
                for j in range(dims[a]):
                    if i != j:
                        worst = max(worst, float(np.max(np.abs(Bm[i, j]))) if Bm[i, j].size else 0.0)
    return worst


def sector_spectrum(H: Hamiltonian, quantum_sites, observables: dict | None = None, tol: float = 1e-12) -> SectorSpectrum:
    """Diagonalize H sector by sector over the computational basis of all non-quantum sites.

    Every term of H and of each observable must be diagonal on the classical
    sites; this is checked.
    """
    layout = H.layout
    quantum_sites = tuple(quantum_sites)
    classical = [s for s in layout.site_ids if s not in quantum_sites]
    observables = observables or {}
    for name, op in [("H", H)] + list(observables.items()):
        d = classical_defect(op, classical)
        if d > tol:
            raise ValueError(f"{name} is not diagonal on the classical sites (defect {d:.3e})")
    cpos = {s: k for k, s in enumerate(classical)}
    qpos = {s: k for k, s in enumerate(quantum_sites)}
    qdims = [layout.dim_of(s) for s in quantum_sites]
    qdim = int(np.prod(qdims)) if qdims else 1
    qlayout = RegisterLayout(tuple((s, layout.dim_of(s)) for s in quantum_sites)) if quantum_sites else None
    cdims = [layout.dim_of(s) for s in classical]
    energies, sectors, vecs = [], [], []
    exps = {name: [] for name in observables}
    for digits in itertools.product(*[range(d) for d in cdims]):
        assignment = dict(zip(classical, digits))

        def restricted(op):
            M = np.zeros((qdim, qdim), dtype=complex)
            for t in op.terms:
                qs, sub = _restrict_term(t, layout, cpos, assignment, quantum_sites)
                if not np.any(sub):
                    continue
                if not qs:
                    M += sub[0, 0] * np.eye(qdim)
                else:
                    M += embed_local_term(LocalTerm(tuple(qs), sub, 1.0), qlayout).toarray()
            return M

        Hm = restricted(H)
        w, V = np.linalg.eigh(Hm)
        energies.append(w)
        sectors.extend([digits] * qdim)
        vecs.append(V)
        for name, op in observables.items():
            Am = restricted(op)
            exps[name].append(np.real(np.einsum("ij,ik,kj->j", V.conj(), Am, V)))
    return SectorSpectrum(
        np.concatenate(energies),
        {k: np.concatenate(v) for k, v in exps.items()},
        np.array(sectors),
        vecs,
        quantum_sites,
    )


def commuting_window_range(energies: np.ndarray, values: np.ndarray, delta: float) -> tuple[float, float]:
    """Extremes of <A> over all states with <H> <= lambda + delta when A commutes with H.

    With a joint eigenbasis the problem is a linear program over probability
    vectors; the optimum mixes at most two joint eigenpairs.
    """
    e = np.asarray(energies, dtype=float)
    v = np.asarray(values, dtype=float)
    c = e.min() + delta

    def lowest(vals):
        inside = e <= c
        best = vals[inside].min()
        ei, vi = e[inside], vals[inside]
        eo, vo = e[~inside], vals[~inside]
        if eo.size:
            # mixture p*i + (1-p)*o with energy exactly c
            p = (eo[None, :] - c) / (eo[None, :] - ei[:, None])
            mix = p * vi[:, None] + (1 - p) * vo[None, :]
            best = min(best, float(mix.min()))
        return float(best)

    return lowest(v), -lowest(-v)

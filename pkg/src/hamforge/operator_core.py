"""Hermitian operators on registers of qudits, stored as sums of local blocks.

Basis convention: site 0 is the most significant digit of the mixed-radix
index. A basis state |i_0 i_1 ... i_{N-1}> has index
sum_k i_k * prod_{j>k} d_j.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

HERMITIAN_TOL = 1e-12
DEFAULT_MAX_DIM = 4096


class LayoutError(ValueError):
    """A term or register references sites that the layout does not have."""


class DimensionCapError(RuntimeError):
    """Dense materialization was requested above the configured cap."""


def max_dense_dim(override: int | None = None) -> int:
    """Dense cap: explicit override, else ``HAMFORGE_MAX_DIM``, else 4096."""
    if override is not None:
        return int(override)
    env = os.environ.get("HAMFORGE_MAX_DIM")
    return int(env) if env else DEFAULT_MAX_DIM


def hermiticity_defect(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)))


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered qudit sites plus named registers (ordered site lists)."""

    sites: tuple[tuple[int, int], ...]
    registers: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        sites = tuple((int(s), int(d)) for s, d in self.sites)
        object.__setattr__(self, "sites", sites)
        ids = [s for s, _ in sites]
        if len(set(ids)) != len(ids):
            raise LayoutError("duplicate site id")
        for s, d in sites:
            if d < 2:
                raise LayoutError(f"site {s} has dimension {d} < 2")
        regs = {str(k): tuple(int(x) for x in v) for k, v in dict(self.registers).items()}
        known = set(ids)
        for name, members in regs.items():
            missing = [x for x in members if x not in known]
            if missing:
                raise LayoutError(f"register {name} references missing sites {missing}")
        object.__setattr__(self, "registers", regs)
        total = 1
        for _, d in sites:
            total *= d
        if total >= 2**63:
            raise LayoutError("total dimension does not fit a 64-bit index")

    @classmethod
    def qubits(cls, n: int, registers: Mapping[str, Sequence[int]] | None = None) -> "RegisterLayout":
        return cls(tuple((i, 2) for i in range(n)), registers or {})

    @classmethod
    def uniform(cls, n: int, d: int) -> "RegisterLayout":
        return cls(tuple((i, d) for i in range(n)))

    @cached_property
    def site_ids(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.sites)

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.sites)

    @cached_property
    def position(self) -> dict[int, int]:
        return {s: k for k, (s, _) in enumerate(self.sites)}

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @cached_property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=object)) if self.sites else 1

    def dim_of(self, site: int) -> int:
        return self.dims[self.position[site]]

    def register(self, name: str) -> tuple[int, ...]:
        return self.registers[name]

    def basis_index(self, digits: Mapping[int, int] | Sequence[int]) -> int:
        """Index of a product basis state given per-site digits."""
        if isinstance(digits, Mapping):
            digits = [digits[s] for s in self.site_ids]
        idx = 0
        for digit, d in zip(digits, self.dims):
            if not 0 <= digit < d:
                raise ValueError(f"digit {digit} out of range for dimension {d}")
            idx = idx * d + int(digit)
        return idx

    def digits(self, index: int) -> tuple[int, ...]:
        out = []
        for d in reversed(self.dims):
            out.append(index % d)
            index //= d
        return tuple(reversed(out))

    def basis_state(self, digits) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.basis_index(digits)] = 1.0
        return v


@dataclass(frozen=True)
class LocalTerm:
    """``weight * block`` acting on the ordered ``support`` sites."""

    support: tuple[int, ...]
    block: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if len(set(support)) != len(support):
            raise LayoutError("repeated site in term support")
        block = np.array(self.block, dtype=complex)
        if block.ndim != 2 or block.shape[0] != block.shape[1]:
            raise ValueError("block must be a square matrix")
        defect = hermiticity_defect(block)
        if defect > HERMITIAN_TOL:
            raise ValueError(f"block is not Hermitian (defect {defect:.3e})")
        block.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "weight", float(self.weight))

    def check(self, layout: RegisterLayout) -> None:
        missing = [s for s in self.support if s not in layout.position]
        if missing:
            raise LayoutError(f"support sites {missing} not in layout")
        expect = int(np.prod([layout.dim_of(s) for s in self.support])) if self.support else 1
        if self.block.shape[0] != expect:
            raise ValueError(
                f"block dimension {self.block.shape[0]} does not match support dimension {expect}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.block, 2)) if self.block.size else 0.0


def embed_local_term(term: LocalTerm, layout: RegisterLayout) -> sp.csr_matrix:
    """Sparse matrix of ``weight * (I x block x I)`` on the full space."""
    term.check(layout)
    dims = layout.dims
    pos = [layout.position[s] for s in term.support]
    rest = [k for k in range(len(dims)) if k not in pos]
    strides = np.ones(len(dims), dtype=np.int64)
    for k in range(len(dims) - 2, -1, -1):
        strides[k] = strides[k + 1] * dims[k + 1]

    def offsets(axes):
        off = np.zeros(1, dtype=np.int64)
        for k in axes:
            off = (off[:, None] + strides[k] * np.arange(dims[k])[None, :]).ravel()
        return off

    loc = offsets(pos)
    env = offsets(rest)
    rows_b, cols_b = np.nonzero(term.block)
    vals = term.weight * term.block[rows_b, cols_b]
    rows = (env[:, None] + loc[rows_b][None, :]).ravel()
    cols = (env[:, None] + loc[cols_b][None, :]).ravel()
    data = np.tile(vals, env.size)
    n = layout.dim
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def apply_term(term: LocalTerm, layout: RegisterLayout, v: np.ndarray) -> np.ndarray:
    """``weight * (I x block x I) v`` computed by a tensor contraction."""
    dims = layout.dims
    pos = [layout.position[s] for s in term.support]
    if not pos:
        return term.weight * term.block[0, 0] * v
    t = v.reshape(dims)
    t = np.moveaxis(t, pos, range(len(pos)))
    shape = t.shape
    k = term.block.shape[0]
    t = (term.block @ t.reshape(k, -1)).reshape(shape)
    t = np.moveaxis(t, range(len(pos)), pos)
    return term.weight * t.reshape(-1)


@dataclass(frozen=True)
class Hamiltonian:
    """A layout and a tuple of local terms; immutable."""

    layout: RegisterLayout
    terms: tuple[LocalTerm, ...] = ()

    def __post_init__(self):
        terms = tuple(self.terms)
        for t in terms:
            t.check(self.layout)
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def norm_bound(self) -> float:
        """Triangle-inequality bound sum |w| * ||block||."""
        return float(sum(abs(t.weight) * t.norm for t in self.terms))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return matvec(self, v)

    def to_dense(self, max_dim: int | None = None) -> np.ndarray:
        return to_dense(self, max_dim)

    def scaled(self, c: float) -> "Hamiltonian":
        return Hamiltonian(self.layout, tuple(LocalTerm(t.support, t.block, c * t.weight) for t in self.terms))

    def __add__(self, other: "Hamiltonian") -> "Hamiltonian":
        if other.layout != self.layout:
            raise LayoutError("cannot add Hamiltonians on different layouts")
        return Hamiltonian(self.layout, self.terms + other.terms)

    def with_terms(self, extra: Iterable[LocalTerm]) -> "Hamiltonian":
        return Hamiltonian(self.layout, self.terms + tuple(extra))

    def on_layout(self, layout: RegisterLayout) -> "Hamiltonian":
        """Same terms re-homed on a larger layout containing their sites."""
        return Hamiltonian(layout, self.terms)

    def support(self) -> set[int]:
        return {s for t in self.terms for s in t.support}


def matvec(H: Hamiltonian, v: np.ndarray) -> np.ndarray:
    """Apply H term by term in a fixed order; no global matrix is built."""
    v = np.asarray(v)
    if v.shape != (H.dim,):
        raise ValueError(f"vector of shape {v.shape} does not match dimension {H.dim}")
    out = np.zeros(H.dim, dtype=complex)
    for t in H.terms:
        out += apply_term(t, H.layout, v)
    return out


def to_dense(H: Hamiltonian, max_dim: int | None = None) -> np.ndarray:
    cap = max_dense_dim(max_dim)
    if H.dim > cap:
        raise DimensionCapError(f"dimension {H.dim} exceeds dense cap {cap}")
    out = np.zeros((H.dim, H.dim), dtype=complex)
    for t in H.terms:
        out += embed_local_term(t, H.layout).toarray()
    return out


def to_sparse(H: Hamiltonian) -> sp.csr_matrix:
    out = sp.csr_matrix((H.dim, H.dim), dtype=complex)
    for t in H.terms:
        out = out + embed_local_term(t, H.layout)
    return out.tocsr()


def restrict(H: Hamiltonian, indices: Sequence[int]) -> np.ndarray:
    """Dense block of H on the given basis indices, built without the full dense matrix."""
    idx = np.asarray(indices, dtype=np.int64)
    return to_sparse(H)[idx][:, idx].toarray()


def conjugate_operator(H: Hamiltonian) -> Hamiltonian:
    """Entrywise complex conjugate of every block; weights unchanged."""
    return Hamiltonian(H.layout, tuple(LocalTerm(t.support, t.block.conj(), t.weight) for t in H.terms))


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / nrm


# Frequently used single-qubit blocks.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def projector(d: int, k: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[k, k] = 1.0
    return m

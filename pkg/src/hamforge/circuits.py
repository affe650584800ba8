"""Classical reversible circuits given as permutation tables on bit supports."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence


@dataclass(frozen=True)
class Gate:
    """A permutation of {0,1}^k acting on the ordered bits ``support``.

    Table index and value use the first support bit as most significant.
    """

    support: tuple[int, ...]
    table: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(b) for b in self.support))
        object.__setattr__(self, "table", tuple(int(x) for x in self.table))
        k = len(self.support)
        if len(set(self.support)) != k:
            raise ValueError("gate support repeats a bit")
        if sorted(self.table) != list(range(2**k)):
            raise ValueError("gate table is not a permutation")

    @property
    def arity(self) -> int:
        return len(self.support)

    def apply(self, bits: Sequence[int]) -> tuple[int, ...]:
        out = list(bits)
        idx = 0
        for b in self.support:
            idx = 2 * idx + bits[b]
        val = self.table[idx]
        for pos in reversed(self.support):
            out[pos] = val & 1
            val >>= 1
        return tuple(out)


def gate_from_function(support: Sequence[int], f: Callable[[tuple[int, ...]], tuple[int, ...]], name: str = "") -> Gate:
    k = len(support)
    table = []
    for x in itertools.product((0, 1), repeat=k):
        y = f(x)
        table.append(int("".join(map(str, y)), 2) if k else 0)
    return Gate(tuple(support), tuple(table), name)


def NOT(i: int) -> Gate:
    return Gate((i,), (1, 0), "NOT")


def IDENTITY(*bits: int) -> Gate:
    return Gate(tuple(bits), tuple(range(2 ** len(bits))), "ID")


def CNOT(c: int, t: int) -> Gate:
    return Gate((c, t), (0, 1, 3, 2), "CNOT")


def SWAP(i: int, j: int) -> Gate:
    return Gate((i, j), (0, 2, 1, 3), "SWAP")


def TOFFOLI(c1: int, c2: int, t: int) -> Gate:
    return Gate((c1, c2, t), (0, 1, 2, 3, 4, 5, 7, 6), "TOFFOLI")


@dataclass(frozen=True)
class ReversibleCircuit:
    width: int
    gates: tuple[Gate, ...]
    output: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 0 <= self.output < self.width:
            raise ValueError("output bit outside the circuit width")
        for g in self.gates:
            if any(not 0 <= b < self.width for b in g.support):
                raise ValueError(f"gate {g.name or g.table} acts outside width {self.width}")

    def history(self, x: Sequence[int]) -> list[tuple[int, ...]]:
        """Rows U_t...U_1 x for t = 0..len(gates)."""
        x = tuple(int(b) for b in x)
        if len(x) != self.width:
            raise ValueError(f"input has {len(x)} bits, circuit width is {self.width}")
        rows = [x]
        for g in self.gates:
            rows.append(g.apply(rows[-1]))
        return rows

    def evaluate(self, x: Sequence[int]) -> tuple[int, ...]:
        return self.history(x)[-1]

    def output_bit(self, x: Sequence[int]) -> int:
        return self.evaluate(x)[self.output]

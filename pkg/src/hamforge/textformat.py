"""Line-oriented text format for layouts, operators and instance records.

::

    # basis: site 0 most significant
    SITE <id> <dim>
    REG <name> <ids...>
    TERM <weight> <ids...>
    (re,im) (re,im) ...        # one line per block row, row-major

Records that open a new section: ``HAM``, ``OBS``, ``QUERY <a> <b>``,
``ISO <site> <rows> <cols>`` (followed by matrix rows). Records without a
body: ``THRESH <a> <b> <delta>``, ``META <key> <value...>``. Terms that
precede any section header belong to ``HAM``. Floats are written with
``repr`` so that a write/read cycle is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operator_core import Hamiltonian, LocalTerm, RegisterLayout

HEADER = "# hamforge-text v1; basis: site 0 most significant"
SECTION_KINDS = ("HAM", "OBS", "QUERY", "ISO")


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass
class Section:
    kind: str
    args: tuple[str, ...] = ()
    terms: list[LocalTerm] = field(default_factory=list)
    matrix: np.ndarray | None = None


@dataclass
class Document:
    layout: RegisterLayout
    sections: list[Section] = field(default_factory=list)
    thresholds: tuple[float, float, float] | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def section(self, kind: str) -> Section | None:
        for s in self.sections:
            if s.kind == kind:
                return s
        return None

    def all(self, kind: str) -> list[Section]:
        return [s for s in self.sections if s.kind == kind]

    def hamiltonian(self, kind: str = "HAM") -> Hamiltonian:
        s = self.section(kind)
        return Hamiltonian(self.layout, tuple(s.terms) if s else ())


def fmt_complex(z: complex) -> str:
    return f"({float(z.real)!r},{float(z.imag)!r})"


def _matrix_lines(m: np.ndarray) -> list[str]:
    return [" ".join(fmt_complex(z) for z in row) for row in np.asarray(m, dtype=complex)]


def _term_lines(t: LocalTerm) -> list[str]:
    head = "TERM " + repr(float(t.weight)) + "".join(f" {s}" for s in t.support)
    return [head] + _matrix_lines(t.block)


def dumps_document(doc: Document) -> str:
    lines = [HEADER]
    for s, d in doc.layout.sites:
        lines.append(f"SITE {s} {d}")
    for name in sorted(doc.layout.registers):
        lines.append(f"REG {name}" + "".join(f" {x}" for x in doc.layout.registers[name]))
    for key in sorted(doc.meta):
        lines.append(f"META {key} {doc.meta[key]}")
    if doc.thresholds is not None:
        a, b, delta = doc.thresholds
        lines.append(f"THRESH {float(a)!r} {float(b)!r} {float(delta)!r}")
    for sec in doc.sections:
        lines.append(" ".join((sec.kind,) + tuple(sec.args)))
        if sec.matrix is not None:
            lines.extend(_matrix_lines(sec.matrix))
        for t in sec.terms:
            lines.extend(_term_lines(t))
    return "\n".join(lines) + "\n"


def dumps_hamiltonian(H: Hamiltonian) -> str:
    return dumps_document(Document(H.layout, [Section("HAM", (), list(H.terms))]))


def _parse_row(text: str, lineno: int, width: int) -> list[complex]:
    toks = text.split()
    if len(toks) != width:
        raise ParseError(lineno, f"expected {width} entries, found {len(toks)}")
    out = []
    for tok in toks:
        if not (tok.startswith("(") and tok.endswith(")")) or tok.count(",") != 1:
            raise ParseError(lineno, f"malformed entry {tok!r}")
        re_s, im_s = tok[1:-1].split(",")
        try:
            out.append(complex(float(re_s), float(im_s)))
        except ValueError:
            raise ParseError(lineno, f"malformed entry {tok!r}") from None
    return out


def loads_document(text: str) -> Document:
    raw = text.splitlines()
    sites: list[tuple[int, int]] = []
    regs: dict[str, tuple[int, ...]] = {}
    pending: list[tuple[int, str, list[str]]] = []
    for lineno, line in enumerate(raw, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        pending.append((lineno, stripped, stripped.split()))

    i = 0
    # Layout records come first.
    def ints(toks, lineno):
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise ParseError(lineno, "expected integers") from None

    while i < len(pending) and pending[i][2][0] in ("SITE", "REG"):
        lineno, _, toks = pending[i]
        if toks[0] == "SITE":
            if len(toks) != 3:
                raise ParseError(lineno, "SITE takes <id> <dim>")
            sid, d = ints(toks[1:], lineno)
            sites.append((sid, d))
        else:
            if len(toks) < 2:
                raise ParseError(lineno, "REG takes a name")
            regs[toks[1]] = tuple(ints(toks[2:], lineno))
        i += 1
    try:
        layout = RegisterLayout(tuple(sites), regs)
    except ValueError as e:
        raise ParseError(pending[i - 1][0] if i else 1, str(e)) from None

    doc = Document(layout)
    current: Section | None = None

    def take_matrix(start: int, rows: int, cols: int) -> tuple[np.ndarray, int]:
        m = np.zeros((rows, cols), dtype=complex)
        for r in range(rows):
            if start + r >= len(pending):
                raise ParseError(pending[-1][0], "unexpected end of input inside a matrix")
            lineno, stripped, _ = pending[start + r]
            m[r] = _parse_row(stripped, lineno, cols)
        return m, start + rows

    while i < len(pending):
        lineno, stripped, toks = pending[i]
        kind = toks[0]
        if kind in ("SITE", "REG"):
            raise ParseError(lineno, f"{kind} must precede all other records")
        if kind == "META":
            if len(toks) < 3:
                raise ParseError(lineno, "META takes <key> <value>")
            doc.meta[toks[1]] = stripped.split(None, 2)[2]
            i += 1
        elif kind == "THRESH":
            if len(toks) != 4:
                raise ParseError(lineno, "THRESH takes <a> <b> <delta>")
            try:
                doc.thresholds = tuple(float(t) for t in toks[1:])
            except ValueError:
                raise ParseError(lineno, "THRESH values must be floats") from None
            i += 1
        elif kind in ("HAM", "OBS"):
            current = Section(kind)
            doc.sections.append(current)
            i += 1
        elif kind == "QUERY":
            if len(toks) != 3:
                raise ParseError(lineno, "QUERY takes <a> <b>")
            try:
                float(toks[1]), float(toks[2])
            except ValueError:
                raise ParseError(lineno, "QUERY thresholds must be floats") from None
            current = Section(kind, tuple(toks[1:]))
            doc.sections.append(current)
            i += 1
        elif kind == "ISO":
            if len(toks) != 4:
                raise ParseError(lineno, "ISO takes <site> <rows> <cols>")
            _, rows, cols = ints(toks[1:], lineno)
            current = Section(kind, tuple(toks[1:]))
            current.matrix, i = take_matrix(i + 1, rows, cols)
            doc.sections.append(current)
        elif kind == "TERM":
            if len(toks) < 2:
                raise ParseError(lineno, "TERM takes <weight> <ids...>")
            try:
                weight = float(toks[1])
            except ValueError:
                raise ParseError(lineno, "TERM weight must be a float") from None
            support = ints(toks[2:], lineno)
            missing = [s for s in support if s not in layout.position]
            if missing:
                raise ParseError(lineno, f"TERM references unknown sites {missing}")
            k = int(np.prod([layout.dim_of(s) for s in support])) if support else 1
            block, i = take_matrix(i + 1, k, k)
            try:
                term = LocalTerm(tuple(support), block, weight)
            except ValueError as e:
                raise ParseError(lineno, str(e)) from None
            if current is None:
                current = Section("HAM")
                doc.sections.append(current)
            current.terms.append(term)
        else:
            raise ParseError(lineno, f"unknown record {kind!r}")
    return doc


def loads_hamiltonian(text: str) -> Hamiltonian:
    return loads_document(text).hamiltonian("HAM")


def write_document(doc: Document, path) -> str:
    text = dumps_document(doc)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
    return text


def read_document(path) -> Document:
    with open(path, encoding="ascii") as fh:
        return loads_document(fh.read())

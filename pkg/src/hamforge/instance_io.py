"""Instance files: one text document per instance, or a bundle of documents.

Every instance document carries ``META kind <name>``. APX-SIM style kinds
(cooklevin, sparse, oned) store H in ``HAM``, the observable in ``OBS`` and
``THRESH a b delta``. Query files store one ``QUERY a b`` section per query
with its terms on the global Y sites. Simulation witnesses are a bundle of
the target and source documents separated by a ``---`` line.
"""

from __future__ import annotations

from typing import Sequence

from .instances import ApxSimInstance
from .operator_core import Hamiltonian, LocalTerm, RegisterLayout
from .query_oracle import QueryInstance, build_query_hamiltonian, query_layout
from .sim_reduce import SimulationWitness, witness_from_text, witness_to_text
from .textformat import Document, ParseError, Section, loads_document

BUNDLE_SEPARATOR = "---"


def dumps_bundle(texts: Sequence[str]) -> str:
    return (BUNDLE_SEPARATOR + "\n").join(texts)


def split_bundle(text: str) -> list[str]:
    """Split on separator lines; line numbers in parse errors stay file-relative."""
    chunks, cur = [], []
    for lineno, line in enumerate(text.splitlines(keepends=True), 1):
        if line.strip() == BUNDLE_SEPARATOR:
            chunks.append("".join(cur))
            # blank placeholders keep later line numbers file-relative
            cur = ["\n"] * lineno
        else:
            cur.append(line)
    chunks.append("".join(cur))
    return chunks


def loads_bundle(text: str) -> list[Document]:
    return [loads_document(chunk) for chunk in split_bundle(text)]


def _int_list(text: str) -> tuple[int, ...]:
    return () if text.strip() == "-" else tuple(int(x) for x in text.split())


def _ids(ids: Sequence[int]) -> str:
    return " ".join(map(str, ids)) or "-"


# Query files.


def query_document(queries: Sequence[QueryInstance]) -> Document:
    layout, maps = query_layout(queries)
    secs = [Section("HAM", (), list(build_query_hamiltonian(queries).terms))]
    for q, local in zip(queries, maps):
        terms = [LocalTerm(tuple(local[s] for s in t.support), t.block, t.weight) for t in q.H_Y.terms]
        secs.append(Section("QUERY", (repr(float(q.a)), repr(float(q.b))), terms))
    return Document(layout, secs, None, {"kind": "query", "m": str(len(queries))})


def queries_from_document(doc: Document) -> list[QueryInstance]:
    out = []
    for i, sec in enumerate(doc.all("QUERY"), 1):
        ysites = doc.layout.register(f"Y{i}")
        to_local = {g: j for j, g in enumerate(ysites)}
        layout = RegisterLayout(tuple((j, doc.layout.dim_of(g)) for j, g in enumerate(ysites)))
        terms = tuple(LocalTerm(tuple(to_local[s] for s in t.support), t.block, t.weight) for t in sec.terms)
        out.append(QueryInstance(Hamiltonian(layout, terms), float(sec.args[0]), float(sec.args[1])))
    return out


# APX-SIM style files.


def apxsim_document(inst: ApxSimInstance, kind: str, meta: dict[str, str] | None = None) -> Document:
    secs = [Section("HAM", (), list(inst.H.terms)), Section("OBS", (), list(inst.A.terms))]
    m = {"kind": kind}
    m.update(meta or {})
    return Document(inst.H.layout, secs, (inst.a, inst.b, inst.delta), m)


def apxsim_from_document(doc: Document) -> ApxSimInstance:
    if doc.thresholds is None:
        raise ValueError("instance document lacks THRESH")
    a, b, delta = doc.thresholds
    return ApxSimInstance(doc.hamiltonian("HAM"), doc.hamiltonian("OBS"), a, b, delta, meta=dict(doc.meta))


def quantum_sites_of(doc: Document) -> tuple[int, ...] | None:
    return _int_list(doc.meta["quantum"]) if "quantum" in doc.meta else None


def hardness_document(hi) -> Document:
    """HardnessInstance or SparseInstance; records which sites are not classical."""
    kind = hi.instance.meta.get("kind", "cooklevin")
    meta = {"quantum": _ids(hi.quantum_sites), "scale": repr(float(hi.scale)), "epsilon": repr(float(hi.epsilon))}
    return apxsim_document(hi.instance, kind, meta)


def oned_document(inst, params) -> Document:
    """1D instance at fixed penalties: H = G + sifters, A the output observable."""
    from .onedim import build_observable, sifter_terms

    G = inst.ham.G(params.d_in, params.d_prop, params.d_pen)
    sif = sifter_terms(inst.clock, inst.m, inst.rc.r_star, float(params.epsilon))
    H = Hamiltonian(G.layout, tuple(G.terms) + tuple(sif))
    A = build_observable(inst.rc.n, inst.rc.R)
    ap = ApxSimInstance(H, A, float(params.a), float(params.b), float(params.delta))
    meta = {
        "n": str(inst.rc.n),
        "R": str(inst.rc.R),
        "m": str(inst.m),
        "expected": inst.expected,
        "name": inst.name or "-",
        "penalties": f"{float(params.d_in)!r} {float(params.d_prop)!r} {float(params.d_pen)!r}",
    }
    return apxsim_document(ap, "oned", meta)


# Simulation witnesses.


def simulation_text(w: SimulationWitness) -> str:
    target, source = witness_to_text(w)
    return dumps_bundle([target, source])


def simulation_from_text(text: str) -> SimulationWitness:
    chunks = split_bundle(text)
    if len(chunks) != 2:
        raise ParseError(1, f"simulation bundle needs 2 documents, found {len(chunks)}")
    return witness_from_text(*chunks)

"""Command-line front end: build, solve and verify instances.

Every command prints a short table followed by a ``KEY=VALUE`` block and
exits 0 on pass, 1 on an assertion failure, 2 on a usage or parse error and
3 when a dense dimension cap is hit. Output depends only on inputs and the
seed; wall time goes to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from typing import Callable

import numpy as np

from . import circuits as circ
from .cook_levin import build_hardness_instance, build_spatially_sparse_instance, scan_hardness_instance
from .instance_io import (
    apxsim_from_document,
    hardness_document,
    oned_document,
    queries_from_document,
    quantum_sites_of,
    query_document,
    simulation_from_text,
    simulation_text,
    split_bundle,
)
from .instances import INVALID, NO, YES, scan_low_energy
from .operator_core import DimensionCapError, Hamiltonian, LocalTerm, RegisterLayout
from .query_oracle import (
    Adversary,
    ParallelOracleComputation,
    QueryInstance,
    correct_strings,
    decide_apxsim_adaptive,
    random_query,
    run_parallel_oracle_machine,
    verify_query_gap,
)
from .sim_reduce import build_code_simulation, perturbative_estimate, verify_simulation
from .textformat import ParseError, dumps_document, loads_document

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3
# the adaptive search diagonalizes once per query
ADAPTIVE_MAX_DIM = 256
# above this the exact window dual costs dozens of dense solves; report eigenvectors only
WINDOW_DUAL_MAX_DIM = 1024

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

GATES: dict[str, Callable] = {
    "NOT": circ.NOT,
    "CNOT": circ.CNOT,
    "SWAP": circ.SWAP,
    "TOFFOLI": circ.TOFFOLI,
    "IDENTITY": circ.IDENTITY,
}


class SpecError(ValueError):
    """A build spec is well-formed JSON but does not describe a valid instance."""


class Report:
    """Ordered results and flags for one command; rendered as a table plus KEY=VALUE lines."""

    def __init__(self, command: str, digest: str, seed: int | None = None):
        self.command = command
        self.digest = digest
        self.seed = seed
        self.values: list[tuple[str, object]] = []
        self.flags: list[tuple[str, bool]] = []
        self.witness: dict = {}

    def add(self, key: str, value) -> None:
        self.values.append((key, value))

    def flag(self, key: str, ok: bool) -> None:
        self.flags.append((key, bool(ok)))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.flags)

    def render(self) -> str:
        fmt = lambda v: repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
        width = max([len(k) for k, _ in self.values + self.flags] + [8])
        lines = [f"== {self.command} =="]
        lines += [f"  {k:<{width}}  {fmt(v)}" for k, v in self.values]
        lines += [f"  {k:<{width}}  {'pass' if ok else 'FAIL'}" for k, ok in self.flags]
        if self.witness and not self.passed:
            lines.append("  witness: " + json.dumps(self.witness, sort_keys=True, default=str))
        lines.append("")
        lines.append(f"command={self.command}")
        lines.append(f"digest={self.digest}")
        if self.seed is not None:
            lines.append(f"seed={self.seed}")
        lines += [f"{k}={fmt(v)}" for k, v in self.values]
        lines += [f"{k}={'pass' if ok else 'fail'}" for k, ok in self.flags]
        lines.append(f"status={'pass' if self.passed else 'fail'}")
        return "\n".join(lines) + "\n"


def digest_of(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()[:16]


# Build specs (JSON).


def _matrix(obj, d: int, where: str) -> np.ndarray:
    try:
        M = np.array([[complex(x) if not isinstance(x, list) else complex(x[0], x[1]) for x in row] for row in obj])
    except (TypeError, ValueError, IndexError):
        raise SpecError(f"{where}: matrix entries must be numbers or [re, im] pairs") from None
    if M.shape != (d, d):
        raise SpecError(f"{where}: matrix must be {d}x{d}")
    return M


def parse_hamiltonian_spec(obj: dict, where: str = "hamiltonian") -> Hamiltonian:
    """{"qubits": n, "terms": [{"sites": [...], "pauli": "ZZ" | "matrix": [[...]], "weight": w}]}"""
    try:
        n = int(obj["qubits"])
        raw_terms = obj["terms"]
    except (KeyError, TypeError, ValueError):
        raise SpecError(f"{where}: needs 'qubits' and 'terms'") from None
    layout = RegisterLayout.qubits(n)
    terms = []
    for k, t in enumerate(raw_terms):
        at = f"{where}.terms[{k}]"
        sites = tuple(int(s) for s in t.get("sites", ()))
        if any(s < 0 or s >= n for s in sites):
            raise SpecError(f"{at}: site out of range")
        if "pauli" in t:
            label = str(t["pauli"]).upper()
            if len(label) != len(sites) or any(c not in PAULI for c in label):
                raise SpecError(f"{at}: pauli label must match the sites")
            block = np.array([[1.0 + 0j]])
            for c in label:
                block = np.kron(block, PAULI[c])
        elif "matrix" in t:
            block = _matrix(t["matrix"], 2 ** len(sites), at)
        else:
            raise SpecError(f"{at}: needs 'pauli' or 'matrix'")
        try:
            terms.append(LocalTerm(sites, block, float(t.get("weight", 1.0))))
        except ValueError as e:
            raise SpecError(f"{at}: {e}") from None
    return Hamiltonian(layout, tuple(terms))


def parse_query_spec(obj: dict, rng: np.random.Generator, where: str) -> QueryInstance:
    if "random" in obj:
        status = str(obj["random"]).upper()
        if status not in (YES, NO, INVALID):
            raise SpecError(f"{where}: random must be yes, no or invalid")
        return random_query(rng, status, float(obj.get("gap", 1.0)), int(obj.get("qubits", 2)))
    try:
        a, b = float(obj["a"]), float(obj["b"])
    except (KeyError, TypeError, ValueError):
        raise SpecError(f"{where}: needs numeric 'a' and 'b'") from None
    try:
        return QueryInstance(parse_hamiltonian_spec(obj, where), a, b)
    except ValueError as e:
        raise SpecError(f"{where}: {e}") from None


def parse_circuit_spec(obj: dict) -> circ.ReversibleCircuit:
    try:
        width, output = int(obj["width"]), int(obj["output"])
        gates = []
        for k, g in enumerate(obj["gates"]):
            name, *bits = g
            if name not in GATES:
                raise SpecError(f"circuit.gates[{k}]: unknown gate {name!r}")
            gates.append(GATES[name](*[int(b) for b in bits]))
    except (KeyError, TypeError) as e:
        raise SpecError(f"circuit: malformed ({e})") from None
    try:
        return circ.ReversibleCircuit(width, tuple(gates), output)
    except ValueError as e:
        raise SpecError(f"circuit: {e}") from None


def load_spec(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg) from None
    if not isinstance(obj, dict):
        raise ParseError(1, "spec must be a JSON object")
    return obj


def _computation(spec: dict, rng) -> ParallelOracleComputation:
    if "circuit" not in spec or "queries" not in spec:
        raise SpecError("spec needs 'circuit' and 'queries'")
    queries = [parse_query_spec(q, rng, f"queries[{i}]") for i, q in enumerate(spec["queries"])]
    try:
        return ParallelOracleComputation(parse_circuit_spec(spec["circuit"]), queries)
    except ValueError as e:
        raise SpecError(str(e)) from None


def build_instance_text(kind: str, spec: dict, seed: int) -> str:
    rng = np.random.default_rng(seed)
    if kind == "query":
        if "queries" not in spec:
            raise SpecError("spec needs 'queries'")
        queries = [parse_query_spec(q, rng, f"queries[{i}]") for i, q in enumerate(spec["queries"])]
        if not queries:
            raise SpecError("at least one query is required")
        return dumps_document(query_document(queries))
    if kind == "cooklevin":
        return dumps_document(hardness_document(build_hardness_instance(_computation(spec, rng))))
    if kind == "sparse":
        comp = _computation(spec, rng)
        sp = build_spatially_sparse_instance(comp, path_length=int(spec.get("path_length", 1)))
        return dumps_document(hardness_document(sp))
    if kind == "oned":
        from .onedim import search_penalties, set_parameters, toy_instance

        try:
            inst = toy_instance(str(spec.get("query", "yes")), int(spec.get("R", 2)), bool(spec.get("negate", False)))
        except ValueError as e:
            raise SpecError(str(e)) from None
        if "penalty" in spec:
            d = float(spec["penalty"])
            params = set_parameters(inst.m, inst.n_configs).with_penalties(d, d, d)
        else:
            params = search_penalties(inst).params
        return dumps_document(oned_document(inst, params))
    if kind == "simcode":
        if "source" not in spec:
            raise SpecError("spec needs 'source'")
        H = parse_hamiltonian_spec(spec["source"], "source")
        w = build_code_simulation(H, float(spec.get("strength", 100.0)), float(spec.get("leakage", 0.5)))
        return simulation_text(w)
    raise SpecError(f"unknown kind {kind!r}")


# Commands.


def cmd_build(args) -> Report:
    with open(args.spec, encoding="utf-8") as fh:
        raw = fh.read()
    spec = load_spec(raw)
    text = build_instance_text(args.kind, spec, args.seed)
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    rep = Report(f"build {args.kind}", digest_of(raw), args.seed)
    rep.add("instance_digest", digest_of(text))
    rep.add("lines", text.count("\n"))
    return rep


def _legal_digits(doc):
    from .onedim import enumerate_legal_configurations, legal_basis

    clock = enumerate_legal_configurations(int(doc.meta["n"]), int(doc.meta["R"]))
    return legal_basis(clock).digits


def _apxsim_verdict(scan_ground_min: float, window_min: float, a: float, b: float, tol: float) -> str:
    yes = scan_ground_min <= a + tol
    no = window_min >= b - tol
    return YES if yes and not no else NO if no and not yes else INVALID


def cmd_solve(args) -> Report:
    with open(args.instance, encoding="ascii") as fh:
        raw = fh.read()
    rep = Report("solve", digest_of(raw), args.seed)
    chunks = split_bundle(raw)
    if len(chunks) == 2:
        w = simulation_from_text(raw)
        r = verify_simulation(w)
        rep.add("kind", "simcode")
        rep.add("code", r.code)
        rep.add("eta_residual", r.eta_residual)
        rep.add("eps_residual", r.eps_residual)
        rep.flag("simulation", r.passed)
        return rep
    doc = loads_document(raw)
    kind = doc.meta.get("kind", "apxsim")
    rep.add("kind", kind)
    if kind == "query":
        queries = queries_from_document(doc)
        correct, verdicts = correct_strings(queries)
        for i, v in enumerate(verdicts, 1):
            rep.add(f"query{i}_lambda", v.lam)
            rep.add(f"query{i}_verdict", v.status)
        rep.add("correct_strings", " ".join("".join(map(str, y)) for y in correct))
        return rep
    inst = apxsim_from_document(doc)
    qs = quantum_sites_of(doc)
    if kind == "oned" and (args.legal_subspace or inst.H.dim > _cap()):
        from .onedim import restrict_to_basis

        digits = _legal_digits(doc)
        scan = scan_low_energy(restrict_to_basis(inst.H, digits), restrict_to_basis(inst.A, digits), inst.delta)
        rep.add("subspace", f"legal:{len(digits)}")
        lam, lo, hi, gmin = scan.lam, scan.range_min, scan.range_max, scan.ground_min
        eig = scan.expectations
    elif inst.H.dim <= min(_cap(), WINDOW_DUAL_MAX_DIM):
        scan = scan_low_energy(inst.H, inst.A, inst.delta)
        lam, lo, hi, gmin, eig = scan.lam, scan.range_min, scan.range_max, scan.ground_min, scan.expectations
        if inst.H.dim <= ADAPTIVE_MAX_DIM:
            res = decide_apxsim_adaptive(inst, Adversary(args.adversary, args.seed))
            rep.add("adaptive_verdict", res.verdict)
            rep.add("adaptive_queries", res.n_queries)
    elif inst.H.dim <= _cap() and qs is None:
        lam, eig, gmin = eigenvector_scan(inst.H, inst.A, inst.delta)
        lo, hi = float(np.min(eig)), float(np.max(eig))
        rep.add("window", "eigenvectors")
    elif qs is not None:
        sc = scan_hardness_instance(inst, qs)
        rep.add("subspace", "classical-sectors")
        lam, lo, hi, gmin, eig = sc.lam, sc.window_min, sc.window_max, sc.ground_min, sc.window_z
    else:
        raise DimensionCapError(f"dimension {inst.H.dim} exceeds the dense cap {_cap()}")
    rep.add("dim", inst.H.dim)
    rep.add("lambda", lam)
    rep.add("ground_A", gmin)
    rep.add("window_eig_A_min", float(np.min(eig)))
    rep.add("window_eig_A_max", float(np.max(eig)))
    rep.add("window_A_min", lo)
    rep.add("window_A_max", hi)
    rep.add("verdict", _apxsim_verdict(gmin, lo, inst.a, inst.b, args.tol))
    return rep


def eigenvector_scan(H, A, delta: float, ground_tol: float = 1e-9):
    from .spectral import as_dense

    Hm, Am = as_dense(H), as_dense(A)
    w, V = np.linalg.eigh(Hm)
    low = V[:, w <= w[0] + delta]
    exps = np.real(np.einsum("ij,ik,kj->j", low.conj(), Am, low))
    G = V[:, w <= w[0] + ground_tol]
    return float(w[0]), exps, float(np.linalg.eigvalsh(G.conj().T @ Am @ G)[0])


def _cap() -> int:
    from .operator_core import max_dense_dim

    return max_dense_dim()


def verify_hgap(args, rep: Report) -> None:
    rng = np.random.default_rng(args.seed)
    worst, eps_min, fails = np.inf, np.inf, 0
    for k in range(args.trials):
        statuses = rng.choice([YES, NO, INVALID], size=args.m)
        queries = [random_query(rng, str(s)) for s in statuses]
        r = verify_query_gap(queries)
        eps_min = min(eps_min, r.epsilon)
        if r.worst_margin < worst:
            worst = r.worst_margin
        if not r.holds:
            fails += 1
            rep.witness = rep.witness or {"batch": k, "statuses": list(map(str, statuses)), "violating": r.violating}
    rep.add("batches", args.trials)
    rep.add("m", args.m)
    rep.add("epsilon", eps_min)
    rep.add("worst_incorrect_margin", worst)
    rep.flag("query_gap", fails == 0)


def _trial_report(summary, rep: Report) -> None:
    rep.add("trials", summary.trials)
    rep.add("failures", summary.failures)
    rep.add("worst_margin", summary.worst_margin)
    rep.witness = summary.witness
    rep.flag(summary.name, summary.passed)


def verify_simulation_cmd(args, rep: Report) -> None:
    rng = np.random.default_rng(args.seed)
    n = 2
    terms = [LocalTerm((0, 1), np.kron(PAULI["Z"], PAULI["Z"]), float(rng.uniform(0.5, 1.5)))]
    terms += [LocalTerm((q,), PAULI["X"], float(rng.uniform(-1, 1))) for q in range(n)]
    H = Hamiltonian(RegisterLayout.qubits(n), tuple(terms))
    residuals = []
    for s in args.strengths:
        w = build_code_simulation(H, s)
        r = verify_simulation(w)
        residuals.append(r.eps_residual)
        rep.add(f"eps_residual@{s:g}", r.eps_residual)
        rep.add(f"estimate@{s:g}", perturbative_estimate(w, s))
        rep.flag(f"simulation@{s:g}", r.passed)
        if not r.passed:
            rep.witness = rep.witness or {"strength": s, "code": r.code}
    rep.flag("monotone", all(x > y for x, y in zip(residuals, residuals[1:])))


def verify_onedim(args, rep: Report) -> None:
    from .onedim import (
        audit_clock,
        enumerate_legal_configurations,
        search_penalties,
        sifter_qudit,
        toy_instance,
        verify_low_energy_structure,
    )

    clock = enumerate_legal_configurations(args.n, args.R)
    audit = audit_clock(clock)
    rep.add("n", args.n)
    rep.add("R", args.R)
    rep.add("L", len(clock.configs))
    rep.flag("clock_audit", audit.passed)
    if not audit.passed:
        rep.witness = {"rule_conflicts": audit.rule_conflicts[:3]}
        return
    if args.n != 2:
        rep.add("toy_instances", "none for n != 2")
        return
    sif = sifter_qudit(args.n, 1, 1) - 1
    rep.flag("unique_label_sifter", audit.gate_label_counts.get(sif, 0) == 1)
    rep.flag("unique_label_last", audit.gate_label_counts.get(clock.n_qudits - 1, 0) == 1)
    for query in ("yes", "no"):
        inst = toy_instance(query, args.R)
        found = search_penalties(inst)
        r = found.report
        p = found.params
        tag = inst.name
        rep.add(f"{tag}.expected", inst.expected)
        rep.add(f"{tag}.a", float(p.a))
        rep.add(f"{tag}.b", float(p.b))
        rep.add(f"{tag}.penalty", float(p.d_in))
        rep.add(f"{tag}.A_window_min", r.separation.window_min)
        rep.add(f"{tag}.A_window_max", r.separation.window_max)
        rep.flag(f"{tag}.nullspace", r.null_ok)
        rep.flag(f"{tag}.separation", r.separation.window_passes)
        if not args.legal_subspace:
            full = verify_low_energy_structure(inst, p, full_space=True)
            rep.flag(f"{tag}.full_space_agrees", abs(full.lam_H - r.lam_H) < 1e-8 and full.null_dim == r.null_dim)


def cmd_verify(args) -> Report:
    from .trials import low_energy_trials, projection_trials, union_trials

    inputs = {k: v for k, v in vars(args).items() if k != "func"}
    rep = Report(f"verify {args.lemma}", digest_of(json.dumps(inputs, sort_keys=True)), args.seed)
    if args.lemma == "hgap":
        verify_hgap(args, rep)
    elif args.lemma == "lowenergy":
        _trial_report(low_energy_trials(args.trials, args.seed), rep)
    elif args.lemma == "projection":
        _trial_report(projection_trials(args.trials, args.seed), rep)
    elif args.lemma == "union":
        _trial_report(union_trials(args.trials, args.seed), rep)
    elif args.lemma == "simulation":
        verify_simulation_cmd(args, rep)
    elif args.lemma == "onedim":
        verify_onedim(args, rep)
    return rep


def cmd_machine(args) -> Report:
    """Ground truth for a cook-levin spec: the machine output on correct strings."""
    with open(args.spec, encoding="utf-8") as fh:
        raw = fh.read()
    comp = _computation(load_spec(raw), np.random.default_rng(args.seed))
    res = run_parallel_oracle_machine(comp)
    rep = Report("machine", digest_of(raw), args.seed)
    rep.add("output", res.output)
    rep.add("correct_strings", " ".join("".join(map(str, y)) for y in res.correct))
    return rep


def _strengths(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError("strengths must be comma-separated numbers") from None


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit seed for every random choice")
    common.add_argument("--tol", type=float, default=1e-9, help="verdict tolerance")
    common.add_argument("--max-dim", type=int, default=None, help="dense dimension cap")
    common.add_argument("--adversary", choices=("yes", "no", "coin"), default="coin", help="answers to promise-violating queries")

    p = argparse.ArgumentParser(prog="hamforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", parents=[common], help="build an instance file from a JSON spec")
    b.add_argument("kind", choices=("query", "cooklevin", "sparse", "oned", "simcode"))
    b.add_argument("spec")
    b.add_argument("-o", "--output", default="-")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("solve", parents=[common], help="diagonalize an instance and report the verdict")
    s.add_argument("instance")
    s.add_argument("--legal-subspace", action="store_true", help="1D files: work in the legal-clock subspace")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", parents=[common], help="run a lemma verifier")
    v.add_argument("lemma", choices=("hgap", "lowenergy", "projection", "union", "simulation", "onedim"))
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--m", type=int, default=2)
    v.add_argument("--n", type=int, default=2)
    v.add_argument("--R", type=int, default=1)
    v.add_argument("--strengths", type=_strengths, default=[10.0, 100.0, 1000.0])
    v.add_argument("--legal-subspace", action="store_true", help="onedim: skip the full-space comparison")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("machine", parents=[common], help="run the parallel-query machine on a spec")
    m.add_argument("spec")
    m.set_defaults(func=cmd_machine)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    saved = os.environ.get("HAMFORGE_MAX_DIM")
    if args.max_dim is not None:
        os.environ["HAMFORGE_MAX_DIM"] = str(args.max_dim)
    try:
        return _run(args)
    finally:
        if saved is None:
            os.environ.pop("HAMFORGE_MAX_DIM", None)
        else:
            os.environ["HAMFORGE_MAX_DIM"] = saved


def _run(args) -> int:
    start = time.perf_counter()
    out = sys.stderr if getattr(args, "command", "") == "build" and args.output in (None, "-") else sys.stdout
    try:
        rep = args.func(args)
    except (ParseError, SpecError) as e:
        print(f"hamforge: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"hamforge: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DimensionCapError as e:
        print(f"hamforge: resource cap: {e}", file=sys.stderr)
        return EXIT_CAP
    out.write(rep.render())
    print(f"wall_time={time.perf_counter() - start:.3f}", file=sys.stderr)
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

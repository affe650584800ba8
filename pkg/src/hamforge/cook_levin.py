"""Classical Cook-Levin propagation Hamiltonians and the hardness instances built on them.

The grid stores one row per time step: row t holds the circuit state after
t gates. All terms of the Cook-Levin part are diagonal 0/1 projectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuits import ReversibleCircuit
from .instances import INVALID, NO, YES, ApxSimInstance
from .operator_core import P0, P1, Z, Hamiltonian, LocalTerm, RegisterLayout, restrict, to_dense
from .query_oracle import ParallelOracleComputation, QueryInstance, build_query_hamiltonian, query_layout, random_query
from .spectral import commuting_window_range, min_eigenvalue, sector_spectrum

NO_CHANGE = np.diag([0, 1, 1, 0]).astype(complex)
COPY_PENALTY = NO_CHANGE  # |1><1| (x) |0><0| + |0><0| (x) |1><1|


@dataclass(frozen=True)
class GridLayout:
    """rows x width qubit sites; site (t, i) has id offset + t * width + i."""

    width: int
    rows: int
    offset: int = 0

    def site(self, t: int, i: int) -> int:
        if not (0 <= t < self.rows and 0 <= i < self.width):
            raise IndexError(f"grid position ({t}, {i}) out of range")
        return self.offset + t * self.width + i

    def sites(self) -> list[int]:
        return [self.site(t, i) for t in range(self.rows) for i in range(self.width)]

    def row(self, t: int) -> list[int]:
        return [self.site(t, i) for i in range(self.width)]

    @property
    def input_row(self) -> list[int]:
        return self.row(0)

    def layout(self) -> RegisterLayout:
        return RegisterLayout(tuple((s, 2) for s in self.sites()), {"W": tuple(self.sites())})

    @classmethod
    def for_circuit(cls, circuit: ReversibleCircuit, offset: int = 0) -> "GridLayout":
        return cls(circuit.width, len(circuit.gates) + 1, offset)


def gate_block(table: Sequence[int], k: int) -> np.ndarray:
    """I - sum_x |x><x| (x) |U x><U x| on 2k bits (input row first)."""
    dim = 2 ** (2 * k)
    diag = np.ones(dim)
    for x, y in enumerate(table):
        diag[(x << k) | y] = 0.0
    return np.diag(diag).astype(complex)


def prop_terms(circuit: ReversibleCircuit, grid: GridLayout) -> list[LocalTerm]:
    if grid.rows != len(circuit.gates) + 1:
        raise ValueError(f"grid has {grid.rows} rows but the circuit has {len(circuit.gates)} gates")
    if grid.width != circuit.width:
        raise ValueError("grid width does not match circuit width")
    terms = []
    for t, g in enumerate(circuit.gates):
        supp = tuple(grid.site(t, b) for b in g.support) + tuple(grid.site(t + 1, b) for b in g.support)
        terms.append(LocalTerm(supp, gate_block(g.table, g.arity)))
        for i in range(circuit.width):
            if i not in g.support:
                terms.append(LocalTerm((grid.site(t, i), grid.site(t + 1, i)), NO_CHANGE))
    return terms


def build_prop_hamiltonian(circuit: ReversibleCircuit, grid: GridLayout | None = None, layout: RegisterLayout | None = None) -> Hamiltonian:
    grid = grid or GridLayout.for_circuit(circuit)
    return Hamiltonian(layout or grid.layout(), tuple(prop_terms(circuit, grid)))


def pinned_input_terms(grid: GridLayout, x: Sequence[int]) -> list[LocalTerm]:
    """Penalize row-0 bit i unless it equals x_i."""
    if len(x) != grid.width:
        raise ValueError("input length does not match grid width")
    return [LocalTerm((grid.site(0, i),), P0 if b else P1) for i, b in enumerate(x)]


def history_string(circuit: ReversibleCircuit, x: Sequence[int]) -> list[tuple[int, ...]]:
    return circuit.history(x)


def history_basis_index(grid: GridLayout, rows: Sequence[Sequence[int]], layout: RegisterLayout | None = None) -> int:
    layout = layout or grid.layout()
    digits = {s: 0 for s in layout.site_ids}
    for t, row in enumerate(rows):
        for i, b in enumerate(row):
            digits[grid.site(t, i)] = b
    return layout.basis_index(digits)


def diagonal(H: Hamiltonian) -> np.ndarray:
    """Diagonal of H computed term by term (valid for any H)."""
    dims = H.layout.dims
    out = np.zeros(H.dim)
    pos = H.layout.position
    grids = np.indices(dims).reshape(len(dims), -1) if dims else np.zeros((0, 1), dtype=np.int64)
    for t in H.terms:
        d = np.real(np.diag(t.block)) * t.weight
        idx = np.zeros(H.dim, dtype=np.int64)
        for s in t.support:
            k = pos[s]
            idx = idx * dims[k] + grids[k]
        out += d[idx]
    return out


# Hardness instance.


@dataclass
class HardnessInstance:
    instance: ApxSimInstance
    H1: Hamiltonian
    H2: Hamiltonian
    grid: GridLayout
    scale: float
    epsilon: float
    output_site: int
    quantum_sites: tuple[int, ...]
    extra: dict = field(default_factory=dict)

    @property
    def delta_prime(self) -> float:
        return self.epsilon


def input_copy_terms(comp: ParallelOracleComputation, grid: GridLayout, x_sites: Sequence[int]) -> list[LocalTerm]:
    terms = [LocalTerm((x, grid.site(0, i)), COPY_PENALTY) for i, x in enumerate(x_sites)]
    terms += [LocalTerm((grid.site(0, j),), P1) for j in range(comp.m, comp.circuit.width)]
    return terms


def _lambda_h2(queries: Sequence[QueryInstance]) -> float:
    return float(sum(min((q.a + q.b) / 2, min_eigenvalue(q.H_Y).lambda_min) for q in queries))


def penalty_scale(queries: Sequence[QueryInstance], eps: float) -> float:
    # any H1 violation costs at least the scale on top of lambda(H2), so scale > eps is enough
    return float(max(math.ceil(_lambda_h2(queries) + eps + 1), math.ceil(eps) + 1))


def build_hardness_instance(comp: ParallelOracleComputation) -> HardnessInstance:
    """H = c (H_prop + H_in) + H_query with A = Z on the output bit of the last row."""
    qlayout, _ = query_layout(comp.queries)
    offset = max(qlayout.site_ids) + 1
    grid = GridLayout.for_circuit(comp.circuit, offset)
    layout = RegisterLayout(
        qlayout.sites + tuple((s, 2) for s in grid.sites()),
        dict(qlayout.registers, W=tuple(grid.sites())),
    )
    H2 = build_query_hamiltonian(comp.queries).on_layout(layout)
    x_sites = [layout.register(f"X{i}")[0] for i in range(1, comp.m + 1)]
    eps = min(q.gap for q in comp.queries) / 2
    scale = penalty_scale(comp.queries, eps)
    H1 = Hamiltonian(layout, tuple(prop_terms(comp.circuit, grid)) + tuple(input_copy_terms(comp, grid, x_sites)))
    out = grid.site(grid.rows - 1, comp.circuit.output)
    A = Hamiltonian(layout, (LocalTerm((out,), Z),))
    H = H1.scaled(scale) + H2
    inst = ApxSimInstance(H, A, -0.5, 0.5, eps / 16, meta={"kind": "cooklevin"})
    ysites = tuple(s for i in range(1, comp.m + 1) for s in layout.register(f"Y{i}"))
    return HardnessInstance(inst, H1, H2, grid, scale, eps, out, ysites)


# Spatially sparse variant.


@dataclass(frozen=True)
class LatticeQuery:
    """A query whose H_Y terms live on edges of an integer square lattice."""

    query: QueryInstance
    coords: Mapping[int, tuple[int, int]]

    def edges(self) -> list[tuple[int, ...]]:
        out = []
        for t in self.query.H_Y.terms:
            if len(t.support) > 2:
                raise ValueError("query term acts on more than two sites")
            if len(t.support) == 2:
                (x1, y1), (x2, y2) = (self.coords[s] for s in t.support)
                if abs(x1 - x2) + abs(y1 - y2) != 1:
                    raise ValueError(f"term on {t.support} is not a lattice edge")
            out.append(t.support)
        return out


def chain_lattice(q: QueryInstance) -> LatticeQuery:
    """Place the query sites on a horizontal line in layout order."""
    return LatticeQuery(q, {s: (k, 0) for k, s in enumerate(q.H_Y.layout.site_ids)})


@dataclass
class InteractionGraph:
    hyperedges: list[tuple[int, ...]]
    coords: dict[int, tuple[float, float]]
    k: int

    def __post_init__(self):
        for e in self.hyperedges:
            if len(e) > self.k:
                raise ValueError(f"hyperedge {e} exceeds declared size {self.k}")

    @classmethod
    def from_hamiltonian(cls, H: Hamiltonian, coords: Mapping[int, tuple[float, float]]) -> "InteractionGraph":
        seen, edges = set(), []
        for t in H.terms:
            key = tuple(sorted(t.support))
            if len(key) >= 1 and key not in seen:
                seen.add(key)
                edges.append(key)
        k = max((len(e) for e in edges), default=0)
        return cls(edges, dict(coords), k)

    def to_text(self) -> str:
        lines = [f"# interaction graph, hyperedge size <= {self.k}"]
        for s in sorted(self.coords):
            x, y = self.coords[s]
            lines.append(f"V {s} {x!r} {y!r}")
        for e in self.hyperedges:
            lines.append("E " + " ".join(map(str, e)))
        return "\n".join(lines) + "\n"


@dataclass
class SparseInstance:
    instance: ApxSimInstance
    graph: InteractionGraph
    H1: Hamiltonian
    H2: Hamiltonian
    H3: Hamiltonian
    grid: GridLayout
    scale: float
    epsilon: float
    deltas: list[float]
    x_registers: list[tuple[int, ...]]
    y_maps: list[dict[int, int]]
    anchors: list[int]
    quantum_sites: tuple[int, ...]


def build_spatially_sparse_instance(
    comp: ParallelOracleComputation, lattices: Sequence[LatticeQuery] | None = None, path_length: int = 1
) -> SparseInstance:
    """Replace each one-qubit X_i by a register of control qubits plus a path to W.

    Each edge term h_jk of query i is controlled by the X_i qubit paired with
    Y_i site j. The anchor (path end nearest W) carries the threshold term and
    the copy into W. Ferromagnetic agreement penalties tie each X_i together.
    """
    if lattices is None:
        lattices = [chain_lattice(q) for q in comp.queries]
    if len(lattices) != comp.m or any(lq.query is not q for lq, q in zip(lattices, comp.queries)):
        raise ValueError("one lattice presentation per query is required")
    sites, regs, coords = [], {}, {}
    nxt = 0
    x_regs, y_maps, anchors, ctrl_maps, paths = [], [], [], [], []
    x_left = 0.0
    y_top = 0.0
    for lq in lattices:
        y_top = max(y_top, max(y for _, y in lq.coords.values()))
    w_row0 = y_top + 0.4 + path_length + 1
    for i, lq in enumerate(lattices, 1):
        lq.edges()
        xs = [x for x, _ in lq.coords.values()]
        x0 = x_left - min(xs)
        ymap, cmap = {}, {}
        for s in lq.query.H_Y.layout.site_ids:
            ymap[s] = nxt
            cx, cy = lq.coords[s]
            coords[nxt] = (x0 + cx, float(cy))
            sites.append((nxt, 2))
            nxt += 1
        for s in lq.query.H_Y.layout.site_ids:
            cmap[s] = nxt
            cx, cy = lq.coords[s]
            coords[nxt] = (x0 + cx + 0.4, cy + 0.4)
            sites.append((nxt, 2))
            nxt += 1
        first = lq.query.H_Y.layout.site_ids[0]
        fx, fy = coords[cmap[first]]
        path = []
        ax, ay = i - 1 + 0.4, w_row0 - 1.0
        for p in range(path_length):
            frac = (p + 1) / path_length
            coords[nxt] = (fx + frac * (ax - fx), fy + frac * (ay - fy))
            sites.append((nxt, 2))
            path.append(nxt)
            nxt += 1
        anchor = path[-1] if path else cmap[first]
        regs[f"Y{i}"] = tuple(ymap.values())
        regs[f"X{i}"] = tuple(cmap.values()) + tuple(path)
        x_regs.append(regs[f"X{i}"])
        y_maps.append(ymap)
        ctrl_maps.append(cmap)
        paths.append(path)
        anchors.append(anchor)
        x_left = max(x0 + x for x in xs) + 2.0

    grid = GridLayout.for_circuit(comp.circuit, nxt)
    for t in range(grid.rows):
        for c in range(grid.width):
            s = grid.site(t, c)
            coords[s] = (c + 0.4, w_row0 + t)
            sites.append((s, 2))
    regs["W"] = tuple(grid.sites())
    layout = RegisterLayout(tuple(sites), regs)

    eps = min(q.gap for q in comp.queries) / 2
    delta = eps / 16
    h2, h3, deltas = [], [], []
    for i, lq in enumerate(lattices):
        q, ymap, cmap = lq.query, y_maps[i], ctrl_maps[i]
        h2.append(LocalTerm((anchors[i],), P0, (q.a + q.b) / 2))
        norm_sum = 0.0
        for t in q.H_Y.terms:
            ctrl = cmap[t.support[0]] if t.support else anchors[i]
            h2.append(LocalTerm((ctrl,) + tuple(ymap[s] for s in t.support), np.kron(P1, t.block), t.weight))
            norm_sum += abs(t.weight) * t.norm
        d_i = delta + norm_sum + 1.0
        deltas.append(d_i)
        agree_edges = set()
        for t in q.H_Y.terms:
            if len(t.support) == 2:
                agree_edges.add(tuple(sorted(cmap[s] for s in t.support)))
        # keep every control qubit connected even if some lattice edge carries no term
        order = list(q.H_Y.layout.site_ids)
        for u, v in zip(order, order[1:]):
            (x1, y1), (x2, y2) = lq.coords[u], lq.coords[v]
            if abs(x1 - x2) + abs(y1 - y2) == 1:
                agree_edges.add(tuple(sorted((cmap[u], cmap[v]))))
        chain = [cmap[first_site(q)]] + paths[i]
        for u, v in zip(chain, chain[1:]):
            agree_edges.add((u, v))
        for u, v in sorted(agree_edges):
            h3.append(LocalTerm((u, v), NO_CHANGE, d_i))
        _check_connected(x_regs[i], agree_edges)
    H2 = Hamiltonian(layout, tuple(h2))
    H3 = Hamiltonian(layout, tuple(h3))
    H1u = Hamiltonian(layout, tuple(prop_terms(comp.circuit, grid)) + tuple(input_copy_terms(comp, grid, anchors)))
    scale = penalty_scale(comp.queries, eps)
    out = grid.site(grid.rows - 1, comp.circuit.output)
    A = Hamiltonian(layout, (LocalTerm((out,), Z),))
    H = H1u.scaled(scale) + H2 + H3
    inst = ApxSimInstance(H, A, -0.5, 0.5, delta, meta={"kind": "sparse"})
    graph = InteractionGraph.from_hamiltonian(H, coords)
    ysites = tuple(s for m in y_maps for s in m.values())
    return SparseInstance(inst, graph, H1u, H2, H3, grid, scale, eps, deltas, x_regs, y_maps, anchors, ysites)


def first_site(q: QueryInstance) -> int:
    return q.H_Y.layout.site_ids[0]


def _check_connected(nodes: Sequence[int], edges) -> None:
    adj = {v: set() for v in nodes}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, stack = {nodes[0]}, [nodes[0]]
    while stack:
        u = stack.pop()
        for v in adj[u] - seen:
            seen.add(v)
            stack.append(v)
    if seen != set(nodes):
        raise ValueError("agreement edges do not connect the X register")


# Sparsity audit.


@dataclass
class SparsityReport:
    max_degree: int
    max_overlap: int
    max_area: float
    degree_cap: int
    overlap_cap: int
    area_cap: float

    @property
    def passed(self) -> bool:
        return self.max_degree <= self.degree_cap and self.max_overlap <= self.overlap_cap and self.max_area <= self.area_cap


def _shape(edge, coords):
    from shapely.geometry import LineString, MultiPoint, Point

    pts = [coords[s] for s in edge]
    if len(pts) == 1:
        return Point(pts[0])
    if len(pts) == 2:
        return LineString(pts)
    return MultiPoint(pts).convex_hull


def check_spatial_sparsity(graph: InteractionGraph, degree_cap: int = 6, overlap_cap: int = 8, area_cap: float = 4.0) -> SparsityReport:
    """Degree, straight-line overlap count and convex-hull area of every hyperedge.

    Two hyperedges overlap when their drawings meet anywhere other than at a
    shared vertex. One-site hyperedges are ignored for overlap and area.
    """
    from shapely.geometry import Point
    from shapely.strtree import STRtree

    degree: dict[int, int] = {}
    for e in graph.hyperedges:
        for s in e:
            degree[s] = degree.get(s, 0) + 1
    edges = [e for e in graph.hyperedges if len(e) >= 2]
    shapes = [_shape(e, graph.coords) for e in edges]
    tree = STRtree(shapes)
    overlaps = [0] * len(edges)
    for a, sa in enumerate(shapes):
        for b in tree.query(sa):
            b = int(b)
            if b <= a:
                continue
            inter = sa.intersection(shapes[b])
            if inter.is_empty:
                continue
            shared = set(edges[a]) & set(edges[b])
            for s in shared:
                inter = inter.difference(Point(graph.coords[s]).buffer(1e-9))
            if not inter.is_empty:
                overlaps[a] += 1
                overlaps[b] += 1
    areas = [float(s.area) for s in shapes]
    return SparsityReport(
        max(degree.values(), default=0),
        max(overlaps, default=0),
        max(areas, default=0.0),
        degree_cap,
        overlap_cap,
        area_cap,
    )


def all_agree_sector_indices(layout: RegisterLayout, registers: Sequence[Sequence[int]], values: Sequence[int]) -> np.ndarray:
    """Basis indices where every site of register r takes the common bit values[r]."""
    digits = np.array([layout.digits(k) for k in range(layout.dim)])
    mask = np.ones(layout.dim, dtype=bool)
    for reg, v in zip(registers, values):
        for s in reg:
            mask &= digits[:, layout.position[s]] == v
    return np.nonzero(mask)[0]


def enumerate_circuit_family(width: int, max_gates: int, library=None):
    """Every gate sequence up to ``max_gates`` drawn from a standard library on ``width`` bits."""
    from .circuits import CNOT, IDENTITY, NOT, SWAP, TOFFOLI

    if library is None:
        library = [NOT(i) for i in range(width)]
        library += [CNOT(c, t) for c in range(width) for t in range(width) if c != t]
        library += [SWAP(i, j) for i in range(width) for j in range(i + 1, width)]
        if width >= 3:
            library += [TOFFOLI(a, b, c) for a, b, c in itertools.permutations(range(width), 3) if a < b]
        library += [IDENTITY(0)]
    for g in range(1, max_gates + 1):
        for seq in itertools.product(library, repeat=g):
            yield ReversibleCircuit(width, tuple(seq), width - 1)


def agree_sector_defect(sparse: SparseInstance, dense: HardnessInstance) -> float:
    """max |entry| of H_sparse restricted to all-agree X sectors minus the one-qubit-X Hamiltonian.

    Every X_i register is collapsed to one bit; Y and W sites are matched in order.
    """
    small = dense.instance.H.layout
    big = sparse.instance.H.layout
    m = len(sparse.x_registers)
    site_map = {}
    for i in range(1, m + 1):
        site_map.update({b: s for s, b in zip(small.register(f"Y{i}"), big.register(f"Y{i}"))})
        site_map.update({b: small.register(f"X{i}")[0] for b in big.register(f"X{i}")})
    site_map.update(dict(zip(big.register("W"), small.register("W"))))
    idx = []
    for k in range(small.dim):
        d = dict(zip(small.site_ids, small.digits(k)))
        idx.append(big.basis_index({b: d[s] for b, s in site_map.items()}))
    restricted = restrict(sparse.instance.H, idx)
    return float(np.max(np.abs(restricted - to_dense(dense.instance.H))))


@dataclass
class HardnessScan:
    lam: float
    window_energies: np.ndarray
    window_z: np.ndarray
    window_min: float
    window_max: float
    ground_min: float
    verdict: str


def scan_hardness_instance(inst: ApxSimInstance, quantum_sites: Sequence[int]) -> HardnessScan:
    """Low-energy scan by classical sectors; exact window extremes since Z_out is classical."""
    spec = sector_spectrum(inst.H, quantum_sites, {"A": inst.A})
    e, z = spec.energies, spec.expectations["A"]
    lam = float(e.min())
    keep = e <= lam + inst.delta
    lo, hi = commuting_window_range(e, z, inst.delta)
    ground_min = float(z[e <= lam + 1e-9].min())
    yes = ground_min <= inst.a + 1e-9
    no = lo >= inst.b - 1e-9
    verdict = YES if yes and not no else NO if no and not yes else INVALID
    return HardnessScan(lam, e[keep], z[keep], lo, hi, ground_min, verdict)


def toy_parallel_computations(seed: int = 0) -> list[ParallelOracleComputation]:
    """Small parallel-query computations (m <= 2) covering every answer pattern."""
    from .circuits import CNOT, NOT, TOFFOLI

    rng = np.random.default_rng(seed)
    one_query = [
        ReversibleCircuit(2, (CNOT(0, 1),), 1),
        ReversibleCircuit(2, (CNOT(0, 1), NOT(1)), 1),
    ]
    two_query = [
        ReversibleCircuit(3, (TOFFOLI(0, 1, 2),), 2),
        ReversibleCircuit(3, (CNOT(0, 2), CNOT(1, 2)), 2),
        ReversibleCircuit(3, (TOFFOLI(0, 1, 2), NOT(2)), 2),
    ]
    comps = []
    for c in one_query:
        for yes in (True, False):
            comps.append(ParallelOracleComputation(c, [random_query(rng, YES if yes else NO)]))
    for c in two_query:
        for pattern in itertools.product((True, False), repeat=2):
            comps.append(ParallelOracleComputation(c, [random_query(rng, YES if y else NO) for y in pattern]))
    return comps

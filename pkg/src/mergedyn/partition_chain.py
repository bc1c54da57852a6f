"""Reduction of the Merge graph to partitions of n, and its tableau refinement."""
from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .forest import (
    Partition,
    counting,
    default_labels,
    dynamic_partitions,
    partition_of,
    set_partitions,
)
from .merge_graph import GraphConfig, MergeGraph, MergeOpKind, build_merge_graph, period
from .spectral import PFResult, perron_frobenius

KIND_GROUP = {
    MergeOpKind.EM: "EM",
    MergeOpKind.IM: "IM",
    MergeOpKind.SM1: "SM",
    MergeOpKind.SM2: "SM",
    MergeOpKind.SM3: "SM",
}


@dataclass
class PartitionGraph:
    """Partition-level arrows counted from one representative per fiber.

    ``arrows[(i, j)]`` is a Counter keyed by (kind, ks) giving how many
    arrows of that type leave the representative of fiber i for fiber j.
    """

    n: int
    vertices: list
    c: np.ndarray
    arrows: dict
    edge_mode: str

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def index(self, p) -> int:
        return self.vertices.index(Partition(p))

    @property
    def KR(self) -> np.ndarray:
        m = len(self.vertices)
        out = np.zeros((m, m), dtype=np.int64)
        for (i, j), cnt in self.arrows.items():
            out[i, j] = sum(cnt.values())
        return out

    @property
    def KL(self) -> list:
        """Average in-arrow counts per target vertex, c_i KR_ij / c_j, exact.

        Not always integral: at n = 4 the twelve arrows {3,1} -> {4} land on
        the twelve caterpillar trees only.
        """
        kr = self.KR
        m = len(self.vertices)
        return [[Fraction(int(self.c[i]) * int(kr[i, j]), int(self.c[j])) for j in range(m)]
                for i in range(m)]

    def adjacency(self) -> np.ndarray:
        return self.KR

    def typed_edges(self) -> list:
        """(src, dst, group) with group EM, SM or IM, one entry per group present."""
        out = set()
        for (i, j), cnt in self.arrows.items():
            for (kind, _ks), m in cnt.items():
                if m:
                    out.add((i, j, KIND_GROUP[kind]))
        return sorted(out)

    def named_edges(self) -> set:
        return {(str(self.vertices[i]), str(self.vertices[j]), g) for i, j, g in self.typed_edges()}

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "vertices": [str(p) for p in self.vertices],
            "fiber_sizes": [int(x) for x in self.c],
            "KR": self.KR.tolist(),
            "KL": [[str(x) for x in row] for row in self.KL],
            "edge_mode": self.edge_mode,
        }


def _target_groups(graph: MergeGraph, ops, mode: str):
    """Group one source's operations by target, as (target, kind, ks, weight)."""
    by_target: dict = {}
    for o in ops:
        by_target.setdefault(o.target.code, []).append(o)
    out = []
    for code, group in by_target.items():
        first = group[0]
        weight = len(group) if mode == "ops" else 1
        out.append((graph.index[code], first.kind, first.ks, weight))
    return out


def build_partition_graph(n: int, edge_mode: str = "simple", sister_cut: bool = True,
                          graph: MergeGraph | None = None) -> PartitionGraph:
    if graph is None:
        graph = build_merge_graph(n=n, config=GraphConfig(sister_cut=sister_cut, edge_mode=edge_mode))
    parts = dynamic_partitions(n)
    pidx = {p: i for i, p in enumerate(parts)}
    vparts = [pidx[partition_of(v)] for v in graph.vertices]
    reps = {}
    for vi, pi in enumerate(vparts):
        reps.setdefault(pi, vi)
    by_source = graph.ops_by_source()
    arrows: dict = defaultdict(Counter)
    for pi, vi in reps.items():
        for tgt, kind, ks, w in _target_groups(graph, by_source.get(vi, []), edge_mode):
            arrows[(pi, vparts[tgt])][(kind, ks)] += w
    c = np.array([counting(n, p).lam for p in parts], dtype=np.int64)
    return PartitionGraph(n, parts, c, dict(arrows), edge_mode)


@dataclass
class Projection:
    partitions: list
    fiber_of: np.ndarray
    c: np.ndarray
    totals: np.ndarray
    KR: list
    KL: list

    def consistent(self) -> bool:
        """c_p KR[p][q] == c_q KL[p][q] for all pairs, exactly."""
        m = len(self.partitions)
        return all(self.c[i] * self.KR[i][j] == self.c[j] * self.KL[i][j]
                   for i in range(m) for j in range(m))


def project(graph: MergeGraph, mode: str | None = None) -> Projection:
    """Reduced matrices from the full edge tallies (exact rationals)."""
    n = graph.n
    parts = dynamic_partitions(n)
    pidx = {p: i for i, p in enumerate(parts)}
    fiber_of = np.array([pidx[partition_of(v)] for v in graph.vertices], dtype=np.int64)
    m = len(parts)
    c = np.bincount(fiber_of, minlength=m).astype(np.int64)
    a = graph.matrix(mode).tocoo()
    totals = np.zeros((m, m), dtype=np.int64)
    np.add.at(totals, (fiber_of[a.row], fiber_of[a.col]), a.data.astype(np.int64))
    kr = [[Fraction(int(totals[i, j]), int(c[i])) for j in range(m)] for i in range(m)]
    kl = [[Fraction(int(totals[i, j]), int(c[j])) for j in range(m)] for i in range(m)]
    return Projection(parts, fiber_of, c, totals, kr, kl)


@dataclass
class ProjectionReport:
    passed: bool
    out_failures: list = field(default_factory=list)
    in_failures: list = field(default_factory=list)

    @property
    def failing_fibers(self) -> set:
        return {f[1] for f in self.out_failures} | {f[1] for f in self.in_failures}


def verify_p_symmetry(graph: MergeGraph, mode: str | None = None) -> ProjectionReport:
    """Per-vertex out-counts by target fiber and in-counts by source fiber
    must depend only on the vertex's own fiber."""
    proj = project(graph, mode)
    fiber_of = proj.fiber_of
    m = len(proj.partitions)
    a = graph.matrix(mode).tocoo()
    nv = graph.num_vertices
    out_c = np.zeros((nv, m), dtype=np.int64)
    in_c = np.zeros((nv, m), dtype=np.int64)
    np.add.at(out_c, (a.row, fiber_of[a.col]), a.data.astype(np.int64))
    np.add.at(in_c, (a.col, fiber_of[a.row]), a.data.astype(np.int64))
    out_fail, in_fail = [], []
    for f in range(m):
        members = np.flatnonzero(fiber_of == f)
        ref_out, ref_in = out_c[members[0]], in_c[members[0]]
        for v in members[1:]:
            if not np.array_equal(out_c[v], ref_out):
                out_fail.append((graph.vertices[v].code, str(proj.partitions[f])))
            if not np.array_equal(in_c[v], ref_in):
                in_fail.append((graph.vertices[v].code, str(proj.partitions[f])))
    return ProjectionReport(not out_fail and not in_fail, out_fail, in_fail)


@dataclass
class LiftedStationary:
    partitions: list
    eta: np.ndarray
    psi: np.ndarray
    lam: float
    per_forest: np.ndarray
    class_mass: np.ndarray
    class_value: np.ndarray
    xi: np.ndarray

    def on_forests(self, fiber_of: np.ndarray) -> np.ndarray:
        return self.per_forest[fiber_of]


def lift_stationary(kr, c, pf: PFResult | None = None, partitions=None) -> LiftedStationary:
    """Stationary law of the full chain from the reduced right matrix.

    ``per_forest`` is the probability of a single forest in each fiber
    (summing c * per_forest gives one); ``class_value`` rescales the same
    per-forest values to sum to one over classes; ``xi`` is psi / c.
    """
    kr = np.asarray(kr, dtype=float)
    c = np.asarray(c, dtype=float)
    if pf is None:
        pf = perron_frobenius(kr, mode="unit")
    value = pf.eta * pf.psi / c
    per_forest = value / float(np.dot(value, c))
    return LiftedStationary(
        partitions=partitions,
        eta=pf.eta,
        psi=pf.psi,
        lam=pf.lam,
        per_forest=per_forest,
        class_mass=per_forest * c,
        class_value=value / value.sum(),
        xi=pf.psi / c,
    )


# ---------------------------------------------------------------- tableaux

@dataclass
class TableauGraph:
    n: int
    labels: list
    vertices: list
    shapes: list
    adjacency_matrix: sparse.csr_matrix
    edges: list

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def adjacency(self):
        return self.adjacency_matrix

    def typed_edges(self) -> list:
        return self.edges

    def count_by_shape(self) -> Counter:
        return Counter(self.shapes)

    def strongly_connected(self) -> bool:
        k, _ = csgraph.connected_components(self.adjacency_matrix, directed=True, connection="strong")
        return k == 1

    def period(self) -> int:
        return period(self.adjacency_matrix)


def _key(blocks) -> str:
    return "|".join(sorted(",".join(sorted(b)) for b in blocks))


def tableau_moves(blocks) -> list:
    """(kind, new blocks) for every EM / minimal SM move on a set partition."""
    blocks = [frozenset(b) for b in blocks]
    out = []
    idx = range(len(blocks))

    def rest(*skip):
        return [blocks[m] for m in idx if m not in skip]

    for i, j in itertools.combinations(idx, 2):
        out.append(("EM", rest(i, j) + [blocks[i] | blocks[j]]))
    big = [i for i in idx if len(blocks[i]) >= 2]
    singles = [i for i in idx if len(blocks[i]) == 1]
    for i in big:
        for x in sorted(blocks[i]):
            for j in singles:
                (y,) = blocks[j]
                out.append(("SM1", rest(i, j) + [blocks[i] - {x}, frozenset({x, y})]))
    for i, j in itertools.combinations(big, 2):
        for x in sorted(blocks[i]):
            for y in sorted(blocks[j]):
                out.append(("SM2", rest(i, j) + [blocks[i] - {x}, blocks[j] - {y}, frozenset({x, y})]))
    for i in big:
        if len(blocks[i]) >= 3:
            for x, y in itertools.combinations(sorted(blocks[i]), 2):
                out.append(("SM3", rest(i) + [blocks[i] - {x, y}, frozenset({x, y})]))
    return out


def build_tableau_graph(n: int, labels=None) -> TableauGraph:
    labels = list(labels) if labels is not None else default_labels(n)
    verts = []
    for blocks in set_partitions(labels):
        if any(len(b) >= 2 for b in blocks):
            verts.append(frozenset(frozenset(b) for b in blocks))
    verts.sort(key=_key)
    index = {v: i for i, v in enumerate(verts)}
    edges = set()
    for v in verts:
        for kind, new in tableau_moves(v):
            w = frozenset(new)
            edges.add((index[v], index[w], kind))
    simple = sorted({(s, d) for s, d, _ in edges})
    m = len(verts)
    adj = sparse.csr_matrix(
        (np.ones(len(simple)), ([s for s, _ in simple], [d for _, d in simple])), shape=(m, m))
    shapes = [Partition(len(b) for b in v) for v in verts]
    readable = [_key(v) for v in verts]
    return TableauGraph(n, labels, readable, shapes, adj, sorted(edges))

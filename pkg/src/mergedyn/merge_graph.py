"""The typed Merge graph on workspaces and its structural checks."""
from __future__ import annotations

import itertools
import json
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import CapExceeded, NotStronglyConnected
from .forest import (
    Partition,
    Workspace,
    _join,
    default_labels,
    delete_quotient,
    enumerate_forests,
    partition_of,
    tree_count,
)

DEFAULT_CAP = 7


def cap_limit() -> int:
    return int(os.environ.get("MERGEDYN_CAP", DEFAULT_CAP))


class MergeOpKind(str, Enum):
    EM = "EM"
    IM = "IM"
    SM1 = "SM1"
    SM2 = "SM2"
    SM3 = "SM3"

    def __str__(self):
        return self.value


SM_KINDS = frozenset({MergeOpKind.SM1, MergeOpKind.SM2, MergeOpKind.SM3})
ALL_KINDS = frozenset(MergeOpKind)


def parse_kinds(kinds) -> frozenset:
    """Accept kind names ("em", "im", "sm", "sm1", ...) or enum members."""
    if kinds is None:
        return ALL_KINDS
    if isinstance(kinds, str):
        kinds = [k for k in kinds.replace("+", ",").split(",") if k.strip()]
    out = set()
    for k in kinds:
        if isinstance(k, MergeOpKind):
            out.add(k)
            continue
        name = str(k).strip().upper()
        if name == "SM":
            out |= SM_KINDS
        elif name == "ALL":
            out |= ALL_KINDS
        else:
            out.add(MergeOpKind(name))
    return frozenset(out)


@dataclass(frozen=True)
class GraphConfig:
    sister_cut: bool = True
    edge_mode: str = "simple"

    def __post_init__(self):
        if self.edge_mode not in ("simple", "ops"):
            raise ValueError(f"edge_mode must be 'simple' or 'ops', got {self.edge_mode!r}")


@dataclass(frozen=True)
class MergeOp:
    """One Merge operation.

    ``operands`` holds component indices into ``source.components`` and
    vertex paths inside those components:
    EM (i, j); IM (i, path); SM1 (i, x, j); SM2 (i, x, j, y); SM3 (i, x, y).
    ``ks`` holds the leaf counts of the components leaves are taken from.
    """

    kind: MergeOpKind
    operands: tuple
    ks: tuple
    source: Workspace
    target: Workspace


def apply_op(f: Workspace, kind: MergeOpKind, operands: tuple) -> Workspace:
    comps = f.components
    if kind is MergeOpKind.EM:
        i, j = operands
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        return Workspace(rest + [_join(comps[i], comps[j])], check=False)
    if kind is MergeOpKind.IM:
        i, path = operands
        t = comps[i]
        rest = [c for m, c in enumerate(comps) if m != i]
        moved = _join(t.subtree(path), delete_quotient(t, [path]))
        return Workspace(rest + [moved], check=False)
    if kind is MergeOpKind.SM1:
        i, x, j = operands
        t = comps[i]
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        new = [delete_quotient(t, [x]), _join(t.subtree(x), comps[j])]
        return Workspace(rest + new, check=False)
    if kind is MergeOpKind.SM2:
        i, x, j, y = operands
        ti, tj = comps[i], comps[j]
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        new = [delete_quotient(ti, [x]), delete_quotient(tj, [y]), _join(ti.subtree(x), tj.subtree(y))]
        return Workspace(rest + new, check=False)
    if kind is MergeOpKind.SM3:
        i, x, y = operands
        t = comps[i]
        rest = [c for m, c in enumerate(comps) if m != i]
        new = [delete_quotient(t, [x, y]), _join(t.subtree(x), t.subtree(y))]
        return Workspace(rest + new, check=False)
    raise ValueError(f"unknown kind {kind}")


def _is_sister_pair(x: tuple, y: tuple) -> bool:
    return x[:-1] == y[:-1]


def operand_specs(f: Workspace, kinds=ALL_KINDS, config: GraphConfig = GraphConfig()) -> list:
    """(kind, operands, ks) for every minimal Merge operation on f."""
    kinds = parse_kinds(kinds)
    comps = f.components
    edged = [i for i, t in enumerate(comps) if t.nleaves >= 2]
    singles = [i for i, t in enumerate(comps) if t.nleaves == 1]
    leaves = {i: comps[i].leaf_paths() for i in edged}
    specs = []
    if MergeOpKind.EM in kinds:
        for i, j in itertools.combinations(range(len(comps)), 2):
            specs.append((MergeOpKind.EM, (i, j), (comps[i].nleaves, comps[j].nleaves)))
    if MergeOpKind.IM in kinds:
        for i in edged:
            for path in comps[i].vertices():
                if len(path) >= 2:  # root children give the identity
                    specs.append((MergeOpKind.IM, (i, path), (comps[i].nleaves,)))
    if MergeOpKind.SM1 in kinds:
        for i in edged:
            for x in leaves[i]:
                for j in singles:
                    specs.append((MergeOpKind.SM1, (i, x, j), (comps[i].nleaves,)))
    if MergeOpKind.SM2 in kinds:
        for i, j in itertools.combinations(edged, 2):
            for x in leaves[i]:
                for y in leaves[j]:
                    specs.append((MergeOpKind.SM2, (i, x, j, y), (comps[i].nleaves, comps[j].nleaves)))
    if MergeOpKind.SM3 in kinds:
        for i in edged:
            if comps[i].nleaves < 3:
                continue
            for x, y in itertools.combinations(leaves[i], 2):
                if not config.sister_cut and _is_sister_pair(x, y):
                    continue
                specs.append((MergeOpKind.SM3, (i, x, y), (comps[i].nleaves,)))
    return specs


def ops_from(f: Workspace, kinds=ALL_KINDS, config: GraphConfig = GraphConfig()) -> list:
    return [MergeOp(k, o, ks, f, apply_op(f, k, o)) for k, o, ks in operand_specs(f, kinds, config)]


@dataclass
class MergeGraph:
    labels: list
    vertices: list
    ops: list
    kinds: frozenset
    config: GraphConfig
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {v.code: i for i, v in enumerate(self.vertices)}
        m = len(self.vertices)
        self.src = np.fromiter((self.index[o.source.code] for o in self.ops), dtype=np.int64, count=len(self.ops))
        self.dst = np.fromiter((self.index[o.target.code] for o in self.ops), dtype=np.int64, count=len(self.ops))
        ones = np.ones(len(self.ops), dtype=np.int64)
        self.N = sparse.csr_matrix((ones, (self.src, self.dst)), shape=(m, m))
        self.N.sum_duplicates()
        self.K = (self.N > 0).astype(np.int64).tocsr()
        kind_of = {}
        for o, s, d in zip(self.ops, self.src, self.dst):
            prev = kind_of.setdefault((int(s), int(d)), o.kind)
            if prev is not o.kind:
                raise AssertionError(f"kind collision on {o.source} -> {o.target}: {prev} vs {o.kind}")
        self.edge_kind = kind_of

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def matrix(self, mode: str | None = None) -> sparse.csr_matrix:
        mode = mode or self.config.edge_mode
        if mode == "ops":
            return self.N
        if mode == "simple":
            return self.K
        raise ValueError(f"unknown edge mode {mode!r}")

    def typed_edges(self, mode: str | None = None) -> list:
        """(src, dst, kind, mult) per distinct (src, dst) pair."""
        mode = mode or self.config.edge_mode
        out = []
        coo = self.N.tocoo()
        for s, d, m in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
            out.append((s, d, self.edge_kind[(s, d)], int(m) if mode == "ops" else 1))
        return out

    def partitions(self) -> list:
        return [partition_of(v) for v in self.vertices]

    def fiber(self, p) -> list:
        p = Partition(p)
        return [i for i, v in enumerate(self.vertices) if partition_of(v) == p]

    def induced(self, indices: Iterable[int]) -> "MergeGraph":
        keep = sorted(set(indices))
        verts = [self.vertices[i] for i in keep]
        codes = {v.code for v in verts}
        ops = [o for o in self.ops if o.source.code in codes and o.target.code in codes]
        return MergeGraph(self.labels, verts, ops, self.kinds, self.config)

    def ops_by_source(self) -> dict:
        out = defaultdict(list)
        for o, s in zip(self.ops, self.src):
            out[int(s)].append(o)
        return out

    def to_json(self, mode: str | None = None) -> dict:
        return {
            "n": self.n,
            "labels": [str(l) for l in self.labels],
            "vertices": [v.code for v in self.vertices],
            "edges": [
                {"src": s, "dst": d, "kind": str(k), "mult": m}
                for s, d, k, m in self.typed_edges(mode)
            ],
        }

    def to_dot(self) -> str:
        colors = {"EM": "black", "IM": "blue", "SM1": "red", "SM2": "darkorange", "SM3": "purple"}
        lines = ["digraph merge {"]
        for i, v in enumerate(self.vertices):
            lines.append(f'  {i} [label="{v.code}"];')
        for s, d, k, m in self.typed_edges():
            lines.append(f'  {s} -> {d} [color={colors[str(k)]}, label="{k}"];')
        lines.append("}")
        return "\n".join(lines)


def check_cap(n: int, cap: int | None = None) -> None:
    cap = cap_limit() if cap is None else cap
    if n < 2 or n > cap:
        raise CapExceeded(f"n={n} outside the supported range 2..{cap}")


def build_merge_graph(labels=None, kinds=ALL_KINDS, config: GraphConfig = GraphConfig(),
                      n: int | None = None, cap: int | None = None) -> MergeGraph:
    """Build the graph on all workspaces over ``labels`` (or a..., if only n is given)."""
    if labels is None:
        if n is None:
            raise ValueError("give labels or n")
        labels = default_labels(n)
    labels = list(labels)
    check_cap(len(labels), cap)
    kinds = parse_kinds(kinds)
    verts = enumerate_forests(labels)
    ops = []
    for f in verts:
        ops.extend(ops_from(f, kinds, config))
    return MergeGraph(labels, verts, ops, kinds, config)


# ---------------------------------------------------------------- degree formulas

def degree_profile(f: Workspace, config: GraphConfig = GraphConfig()) -> dict:
    """Closed-form per-kind operation counts at f."""
    ks = [t.nleaves for t in f.components]
    r, c = len(ks), f.c
    edged = [k for k in ks if k >= 2]
    im = sum(2 * k - 4 for k in edged)
    within = sum(math.comb(k, 2) for k in edged if k >= 3)
    with_singletons = sum(edged) * (r - c)
    cross_pairs = sum(a * b for a, b in itertools.combinations(edged, 2))
    sm_out = within + with_singletons + cross_pairs
    sm_out_printed = within + with_singletons + 2 * cross_pairs
    if not config.sister_cut:
        sm_out -= f.d_second
        sm_out_printed -= f.d_second
    # splitting the lone cherry of {2,1,...,1} would give the edgeless
    # workspace, which is not a vertex
    em_in = c - 1 if edged == [2] else c
    return {
        "em_out": math.comb(r, 2),
        "em_in": em_in,
        "em_in_printed": c,
        "im_out": im,
        "im_in": im,
        "sm_out": sm_out,
        "sm_out_printed": sm_out_printed,
        "sm_in_printed": _sm_in_printed(f, config),
    }


def _sm_in_printed(f: Workspace, config: GraphConfig) -> int:
    """Incoming SM count as printed in closed form; diagnostic only."""
    dp = f.d_prime
    if dp == 0:
        return 0
    n, c = f.n, f.c
    comps = sorted((t for t in f.components if t.nleaves >= 2), key=lambda t: t.nleaves)
    # cherry components first, as in the closed form's indexing
    edged = [t.nleaves for t in comps]
    idx = range(len(edged))
    cherries = [i for i in idx if edged[i] == 2][:dp]
    extra = 2 if config.sister_cut else 1
    total = 6 * dp * (n - c)
    for i in cherries:
        total += 2 * sum((2 * edged[a] - 2) * (2 * edged[b] - 2)
                         for a in idx for b in idx if a != b and i not in (a, b))
        total += 2 * sum((2 * edged[j] - 2) * (2 * edged[j] + extra + n - c) for j in idx if j != i)
    return total


def enumerated_degrees(graph: MergeGraph) -> dict:
    """Per-vertex op counts by kind group, from the stored operations."""
    m = graph.num_vertices
    groups = {"EM": "em", "IM": "im", "SM1": "sm", "SM2": "sm", "SM3": "sm"}
    out = {f"{g}_{d}": np.zeros(m, dtype=np.int64) for g in ("em", "im", "sm") for d in ("out", "in")}
    for o, s, d in zip(graph.ops, graph.src, graph.dst):
        g = groups[o.kind.value]
        out[f"{g}_out"][s] += 1
        out[f"{g}_in"][d] += 1
    return out


def verify_degrees(graph: MergeGraph) -> dict:
    """Compare enumerated op counts with the closed forms at every vertex."""
    if graph.kinds != ALL_KINDS:
        raise ValueError("degree check needs a graph with every kind")
    enum = enumerated_degrees(graph)
    asserted = ("em_out", "em_in", "im_out", "im_in", "sm_out")
    mismatches = {k: [] for k in asserted}
    sm_in = []
    printed_cross = []
    for i, f in enumerate(graph.vertices):
        pred = degree_profile(f, graph.config)
        for k in asserted:
            if int(enum[k][i]) != pred[k]:
                mismatches[k].append((f.code, int(enum[k][i]), pred[k]))
        if int(enum["sm_in"][i]) != pred["sm_in_printed"]:
            sm_in.append((f.code, int(enum["sm_in"][i]), pred["sm_in_printed"]))
        if int(enum["sm_out"][i]) != pred["sm_out_printed"]:
            printed_cross.append((f.code, int(enum["sm_out"][i]), pred["sm_out_printed"]))
    return {
        "n": graph.n,
        "vertices": graph.num_vertices,
        "ok": all(not v for v in mismatches.values()),
        "mismatches": mismatches,
        "sm_in_diagnostic": sm_in,
        "sm_out_printed_diagnostic": printed_cross,
    }


def sm21_balance(graph: MergeGraph) -> dict:
    """Fiber-preserving SM counts per vertex against the a_2 * a_1 constant."""
    parts = graph.partitions()
    out_c = Counter()
    in_c = Counter()
    for o, s, d in zip(graph.ops, graph.src, graph.dst):
        if o.kind in SM_KINDS and parts[s] == parts[d]:
            out_c[int(s)] += 1
            in_c[int(d)] += 1
    rows = []
    balanced = True
    exists_ok = True
    for i, p in enumerate(parts):
        mult = p.multiplicities
        pairs = mult.get(2, 0) * mult.get(1, 0)
        if out_c[i] != in_c[i]:
            balanced = False
        if (out_c[i] > 0) != (pairs > 0):
            exists_ok = False
        rows.append((graph.vertices[i].code, out_c[i], in_c[i], pairs))
    return {"balanced": balanced, "existence_ok": exists_ok, "rows": rows}


# ---------------------------------------------------------------- connectivity

def _adjacency(obj) -> sparse.csr_matrix:
    if isinstance(obj, MergeGraph):
        return obj.K
    if hasattr(obj, "adjacency"):
        return sparse.csr_matrix(obj.adjacency())
    return sparse.csr_matrix(obj)


@dataclass
class Condensation:
    scc: np.ndarray
    count: int
    edges: set
    closed: list

    def members(self, c: int) -> list:
        return np.flatnonzero(self.scc == c).tolist()

    def closed_classes(self) -> list:
        return [self.members(c) for c in range(self.count) if self.closed[c]]


def strongly_connected_components(obj) -> Condensation:
    a = _adjacency(obj)
    count, labels = csgraph.connected_components(a, directed=True, connection="strong")
    coo = a.tocoo()
    edges = {(int(labels[s]), int(labels[d])) for s, d in zip(coo.row, coo.col) if labels[s] != labels[d]}
    has_out = {s for s, _ in edges}
    closed = [c not in has_out for c in range(count)]
    return Condensation(labels, int(count), edges, closed)


def period(obj) -> int:
    a = _adjacency(obj)
    m = a.shape[0]
    cond = strongly_connected_components(a)
    if cond.count != 1:
        raise NotStronglyConnected(f"{cond.count} strongly connected components")
    depth = np.full(m, -1, dtype=np.int64)
    depth[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in a.indices[a.indptr[u]:a.indptr[u + 1]]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    coo = a.tocoo()
    for u, v in zip(coo.row, coo.col):
        g = math.gcd(g, int(abs(depth[u] + 1 - depth[v])))
    return g


def density(obj) -> float:
    a = _adjacency(obj)
    m = a.shape[0]
    if m < 2:
        raise ValueError("density needs at least two vertices")
    return (a != 0).sum() / (m * (m - 1))


def im_fiber_components(n: int, p, labels=None, graph: MergeGraph | None = None) -> list:
    """Connected components of the IM-only graph on one partition fiber.

    Returns one list of workspaces per component.
    """
    if graph is None:
        graph = build_merge_graph(labels, kinds={MergeOpKind.IM}, n=n)
    sub = graph.induced(graph.fiber(p))
    count, labs = csgraph.connected_components(sub.K, directed=True, connection="weak")
    comps = [[] for _ in range(count)]
    for i, c in enumerate(labs):
        comps[c].append(sub.vertices[i])
    return comps


def expected_im_component_size(p) -> int:
    out = 1
    for k in Partition(p):
        out *= tree_count(k)
    return out


def _edge_list(obj):
    if hasattr(obj, "typed_edges"):
        return [(e[0], e[1], e[2]) for e in obj.typed_edges()], obj.num_vertices
    a = sparse.csr_matrix(obj).tocoo()
    return [(int(s), int(d), None) for s, d in zip(a.row, a.col)], a.shape[0]


def edge_connectivity_probe(obj, edge: Sequence) -> bool:
    """True iff the graph stays strongly connected after removing ``edge``.

    ``edge`` is (src, dst) or (src, dst, kind); with a kind, only that
    typed edge is removed.
    """
    edges, m = _edge_list(obj)
    if strongly_connected_components(_from_edges(edges, m)).count != 1:
        raise NotStronglyConnected("probe needs a strongly connected graph")
    target = tuple(edge)
    if len(target) == 3:
        kept = [e for e in edges if (e[0], e[1], _norm_kind(e[2])) != (target[0], target[1], _norm_kind(target[2]))]
    else:
        kept = [e for e in edges if (e[0], e[1]) != target]
    if len(kept) == len(edges):
        raise ValueError(f"edge {edge} not present")
    return strongly_connected_components(_from_edges(kept, m)).count == 1


def _norm_kind(k):
    return None if k is None else str(k)


def _from_edges(edges, m) -> sparse.csr_matrix:
    if not edges:
        return sparse.csr_matrix((m, m))
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    return sparse.csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(m, m))


def graph_json_dumps(graph: MergeGraph, mode: str | None = None) -> str:
    return json.dumps(graph.to_json(mode), indent=1)

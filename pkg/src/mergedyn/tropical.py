"""Min-plus linear algebra for the small-t behaviour of cost-weighted chains.

Matrices are square lists of lists whose entries are Fractions or floats,
with ``math.inf`` marking a missing edge.  Fractions stay exact through
every routine; floats are compared with ``FLOAT_SLACK``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np

from .cost import CostKind, weighted_matrix
from .errors import MultipleCritical, NegativeCycle, NotStronglyConnected, Underflow, Unreachable
from .partition_chain import PartitionGraph, build_partition_graph
from .spectral import perron_frobenius

log = logging.getLogger(__name__)

INF = math.inf
FLOAT_SLACK = 1e-12
UNDERFLOW = 1e-290


def _size(c) -> int:
    m = len(c)
    if any(len(row) != m for row in c):
        raise ValueError("min-plus matrix must be square")
    return m


def _is_zero(x) -> bool:
    if isinstance(x, float):
        return abs(x) <= FLOAT_SLACK
    return x == 0


def _is_negative(x) -> bool:
    if isinstance(x, float):
        return x < -FLOAT_SLACK
    return x < 0


def to_digraph(c) -> nx.DiGraph:
    g = nx.DiGraph()
    m = _size(c)
    g.add_nodes_from(range(m))
    for i in range(m):
        for j in range(m):
            if c[i][j] != INF:
                g.add_edge(i, j, weight=c[i][j])
    return g


def _require_strong(c):
    g = to_digraph(c)
    if len(g) == 0 or not nx.is_strongly_connected(g):
        raise NotStronglyConnected("min-plus matrix graph is not strongly connected")


def min_plus_eigenvalue(c):
    """Minimum cycle mean by Karp's recurrence (walks of every length from vertex 0)."""
    _require_strong(c)
    m = _size(c)
    d = [[INF] * m for _ in range(m + 1)]
    d[0][0] = 0
    for k in range(1, m + 1):
        prev, cur = d[k - 1], d[k]
        for u in range(m):
            if prev[u] == INF:
                continue
            row = c[u]
            for v in range(m):
                w = row[v]
                if w != INF and prev[u] + w < cur[v]:
                    cur[v] = prev[u] + w
    best = None
    for v in range(m):
        if d[m][v] == INF:
            continue
        worst = None
        for k in range(m):
            if d[k][v] == INF:
                continue
            diff = d[m][v] - d[k][v]
            val = Fraction(diff) / (m - k) if not isinstance(diff, float) else diff / (m - k)
            if worst is None or val > worst:
                worst = val
        if worst is not None and (best is None or worst < best):
            best = worst
    return best


def min_cycle_mean_bruteforce(c):
    """Minimum mean over all simple cycles, by enumeration."""
    g = to_digraph(c)
    best = None
    for cyc in nx.simple_cycles(g):
        total = sum((c[a][b] for a, b in zip(cyc, cyc[1:] + cyc[:1])), start=0)
        mean = Fraction(total) / len(cyc) if not isinstance(total, float) else total / len(cyc)
        if best is None or mean < best:
            best = mean
    return best


def reduce(c, rho):
    return [[x - rho if x != INF else INF for x in row] for row in c]


def kleene_star(a):
    """All-pairs minimal path costs with an empty path on the diagonal."""
    m = _size(a)
    d = [list(row) for row in a]
    for i in range(m):
        d[i][i] = min(d[i][i], 0)
    for k in range(m):
        dk = d[k]
        for i in range(m):
            dik = d[i][k]
            if dik == INF:
                continue
            di = d[i]
            for j in range(m):
                w = dk[j]
                if w != INF and dik + w < di[j]:
                    di[j] = dik + w
    for i in range(m):
        if _is_negative(d[i][i]):
            raise NegativeCycle(f"negative cycle through vertex {i}")
        d[i][i] = 0 if not isinstance(d[i][i], float) else 0.0
    return d


def bellman_ford(a, source: int, reverse: bool = False) -> list:
    """Single-source path costs (to ``source`` instead when ``reverse``)."""
    m = _size(a)
    dist = [INF] * m
    dist[source] = 0
    edges = [(i, j, a[i][j]) for i in range(m) for j in range(m) if a[i][j] != INF]
    if reverse:
        edges = [(j, i, w) for i, j, w in edges]
    for _ in range(m - 1):
        changed = False
        for u, v, w in edges:
            if dist[u] != INF and dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    for u, v, w in edges:
        if dist[u] != INF and _is_negative(dist[u] + w - dist[v]):
            raise NegativeCycle("negative cycle reachable from the source")
    return dist


@dataclass
class CriticalGraph:
    rho: object
    vertices: list
    edges: list
    classes: list = field(default_factory=list)


def critical_graph(c, rho=None) -> CriticalGraph:
    """Edges and vertices on cycles of mean rho."""
    if rho is None:
        rho = min_plus_eigenvalue(c)
    a = reduce(c, rho)
    star = kleene_star(a)
    m = len(a)
    edges = [(i, j) for i in range(m) for j in range(m)
             if a[i][j] != INF and star[j][i] != INF and _is_zero(a[i][j] + star[j][i])]
    verts = sorted({i for e in edges for i in e})
    g = nx.DiGraph(edges)
    classes = sorted(sorted(s) for s in nx.strongly_connected_components(g))
    return CriticalGraph(rho, verts, edges, classes)


def _check_right(c, u, ell) -> bool:
    m = len(c)
    for i in range(m):
        best = min((c[i][j] + u[j] for j in range(m) if c[i][j] != INF and u[j] != INF), default=INF)
        if not _is_zero(best - (ell + u[i])):
            return False
    return True


def _check_left(c, q, ell) -> bool:
    m = len(c)
    for j in range(m):
        best = min((c[i][j] + q[i] for i in range(m) if c[i][j] != INF and q[i] != INF), default=INF)
        if not _is_zero(best - (ell + q[j])):
            return False
    return True


@dataclass
class Eigenbasis:
    rho: object
    roots: list
    right: dict
    left: dict
    critical: CriticalGraph


def eigenbasis(c) -> Eigenbasis:
    """One right/left min-plus eigenvector per critical class.

    ``right[r][v]`` is the cheapest reduced path cost v -> r and
    ``left[r][v]`` the cheapest r -> v.  Both are checked against the
    eigen-equations before being returned.
    """
    rho = min_plus_eigenvalue(c)
    crit = critical_graph(c, rho)
    star = kleene_star(reduce(c, rho))
    m = len(c)
    roots = [cls[0] for cls in crit.classes]
    right, left = {}, {}
    for r in roots:
        u = [star[v][r] for v in range(m)]
        q = [star[r][v] for v in range(m)]
        if not _check_right(c, u, rho) or not _check_left(c, q, rho):
            raise AssertionError(f"eigenvector for root {r} fails the min-plus equation")
        right[r], left[r] = u, q
    return Eigenbasis(rho, roots, right, left, crit)


@dataclass
class Arborescence:
    root: int
    direction: str
    parent: dict
    cost: list
    total_weight: object
    method: str


def _tree_costs(c, root, parent, direction):
    m = len(c)
    cost = [None] * m
    cost[root] = 0

    def resolve(v):
        if cost[v] is not None:
            return cost[v]
        p = parent[v]
        w = c[v][p] if direction == "sink" else c[p][v]
        cost[v] = resolve(p) + w
        return cost[v]

    for v in range(m):
        resolve(v)
    return cost


def optimal_arborescence(c, root: int, direction: str = "sink", method: str = "shortest-path") -> Arborescence:
    """Spanning arborescence into (sink) or out of (source) ``root``.

    ``shortest-path`` returns the tree of cheapest paths, whose per-vertex
    costs are the Kleene-star entries.  ``edmonds`` returns a minimum total
    weight arborescence via networkx; its path costs can be larger.
    """
    if direction not in ("sink", "source"):
        raise ValueError("direction is 'sink' or 'source'")
    m = _size(c)
    if m == 1:
        return Arborescence(root, direction, {}, [0], 0, method)
    g = to_digraph(c)
    g.remove_edges_from(list(nx.selfloop_edges(g)))
    reach = nx.ancestors(g, root) if direction == "sink" else nx.descendants(g, root)
    if len(reach) != m - 1:
        missing = sorted(set(range(m)) - reach - {root})
        raise Unreachable(f"vertices {missing} are not connected to root {root} ({direction})")
    parent = {}
    if method == "shortest-path":
        dist = bellman_ford(c, root, reverse=(direction == "sink"))
        for v in range(m):
            if v == root:
                continue
            if direction == "sink":
                cands = [p for p in range(m) if p != v and c[v][p] != INF and dist[p] != INF
                         and _is_zero(c[v][p] + dist[p] - dist[v])]
            else:
                cands = [p for p in range(m) if p != v and c[p][v] != INF and dist[p] != INF
                         and _is_zero(dist[p] + c[p][v] - dist[v])]
            # prefer a parent already closer to the root so the tree has no cycles
            parent[v] = min(cands, key=lambda p: (_hops(c, root, p, direction), p))
    elif method == "edmonds":
        h = g if direction == "source" else g.reverse(copy=True)
        h.remove_edges_from(list(h.in_edges(root)))
        for a, b in h.edges:
            h[a][b]["weight"] = float(h[a][b]["weight"])
        tree = nx.minimum_spanning_arborescence(h, attr="weight", preserve_attrs=True)
        for a, b in tree.edges:
            parent[b] = a
    else:
        raise ValueError(f"unknown method {method!r}")
    cost = _tree_costs(c, root, parent, direction)
    total = sum((c[v][p] if direction == "sink" else c[p][v] for v, p in parent.items()), start=0)
    return Arborescence(root, direction, parent, cost, total, method)


def _hops(c, root, v, direction):
    g = to_digraph(c)
    try:
        if direction == "sink":
            return nx.shortest_path_length(g, v, root)
        return nx.shortest_path_length(g, root, v)
    except nx.NetworkXNoPath:
        return math.inf


# ---------------------------------------------------------------- partition-level asymptotics

def partition_cost_matrix(pg: PartitionGraph, kind) -> list:
    """Min-plus matrix of cheapest arrow cost per partition pair."""
    return weighted_matrix(pg, kind, 1.0).min_cost


@dataclass
class AsymptoticOrder:
    n: int
    kind: CostKind
    partitions: list
    exponents: dict
    critical: list
    rho: object

    def to_json(self) -> dict:
        return {
            "rho_min": float(self.rho),
            "critical": [str(p) for p in self.critical],
            "exponents": {k: float(v) for k, v in self.exponents.items()},
        }


def predicted_orders(n: int, kind, pg: PartitionGraph | None = None) -> AsymptoticOrder:
    """Exponent of each class's stationary mass as t -> 0.

    The exponent is the cheapest cost of reaching the critical class plus
    the cheapest cost of returning from it.  With several critical classes
    MultipleCritical is raised, carrying the per-root exponents.
    """
    kind = CostKind.parse(kind)
    pg = pg or build_partition_graph(n)
    c = partition_cost_matrix(pg, kind)
    basis = eigenbasis(c)
    names = [str(p) for p in pg.vertices]
    per_root = {}
    for r in basis.roots:
        per_root[names[r]] = {names[v]: basis.right[r][v] + basis.left[r][v] for v in range(len(c))}
    crit = [pg.vertices[v] for v in basis.critical.vertices]
    if len(basis.roots) != 1:
        warnings.warn(f"{len(basis.roots)} critical classes; limit is not determined by one generator")
        raise MultipleCritical(f"{len(basis.roots)} critical classes for {kind.value}", orders=per_root)
    (exps,) = per_root.values()
    return AsymptoticOrder(n, kind, list(pg.vertices), exps, crit, basis.rho)


def weighted_class_stationary(pg: PartitionGraph, kind, t: float) -> np.ndarray:
    """Stationary mass per partition class of the t-weighted chain.

    Runs on the reduced matrix; the class mass is eta * psi normalised.
    """
    w = weighted_matrix(pg, kind, t).matrix
    pf = perron_frobenius(w, tol=1e-13, relative=True, mode="pairing")
    mass = pf.eta * pf.psi
    return mass / mass.sum()


def slope_estimate(pi1, pi2, t1: float, t2: float) -> np.ndarray:
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    if not 0 < t2 < t1 < 1:
        raise ValueError("need 0 < t2 < t1 < 1")
    low = min(pi1.min(), pi2.min())
    if low < UNDERFLOW:
        raise Underflow(f"stationary entry {low:g} below {UNDERFLOW:g}")
    return (np.log(pi1) - np.log(pi2)) / (math.log(t1) - math.log(t2))


def slope_report(n: int, kind, t_pair=(1e-6, 1e-8)) -> dict:
    pg = build_partition_graph(n)
    pred = predicted_orders(n, kind, pg)
    t1, t2 = t_pair
    slopes = slope_estimate(weighted_class_stationary(pg, kind, t1),
                            weighted_class_stationary(pg, kind, t2), t1, t2)
    names = [str(p) for p in pg.vertices]
    out = pred.to_json()
    out["slopes"] = dict(zip(names, slopes.tolist()))
    out["max_gap"] = max(abs(out["slopes"][k] - out["exponents"][k]) for k in names)
    return out

"""Edge costs for Merge operations and cost-weighted transition matrices."""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import sparse

from .errors import CostCollision, UnknownKind
from .forest import Partition, partition_of, shannon_entropy, shannon_of_partition
from .merge_graph import MergeGraph, MergeOp, MergeOpKind
from .partition_chain import PartitionGraph


class CostKind(str, Enum):
    MS = "MS"
    MY = "MY"
    CL = "CL"
    TOTAL = "TOTAL"
    SHANNON = "SHANNON"
    TOTAL_PLUS_SHANNON = "TOTAL_PLUS_SHANNON"

    @classmethod
    def parse(cls, s) -> "CostKind":
        if isinstance(s, cls):
            return s
        key = str(s).strip().upper().replace("+", "_PLUS_").replace("-", "_")
        aliases = {"SH": "SHANNON", "TOT": "TOTAL", "TOTAL_SHANNON": "TOTAL_PLUS_SHANNON"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise UnknownKind(f"unknown cost kind {s!r}") from None

    @property
    def uses_shannon(self) -> bool:
        return self in (CostKind.SHANNON, CostKind.TOTAL_PLUS_SHANNON)


def _inv(ks):
    return [Fraction(1, k) for k in ks]


def _ms(kind, ks):
    if kind in (MergeOpKind.EM, MergeOpKind.IM):
        return Fraction(0)
    if kind is MergeOpKind.SM1:
        return 2 - _inv(ks[:1])[0]
    if kind is MergeOpKind.SM2:
        a, b = _inv(ks[:2])
        return 2 - a - b
    return 1 - 2 * _inv(ks[:1])[0]


_MY = {MergeOpKind.EM: 1, MergeOpKind.IM: 0, MergeOpKind.SM1: 0, MergeOpKind.SM2: -1, MergeOpKind.SM3: -1}
_CL = {MergeOpKind.EM: 0, MergeOpKind.IM: 0, MergeOpKind.SM1: 1, MergeOpKind.SM2: 2, MergeOpKind.SM3: 2}


def _op_kind(kind) -> MergeOpKind:
    if isinstance(kind, MergeOpKind):
        return kind
    try:
        return MergeOpKind(str(kind).upper())
    except ValueError:
        raise UnknownKind(f"unknown operation kind {kind!r}") from None


def table_cost(op_kind, ks, kind, source=None):
    """Cost of an operation given its kind and leaf counts.

    Table kinds return exact Fractions.  Shannon kinds need the source
    partition (or workspace) and return floats.
    """
    op_kind = _op_kind(op_kind)
    kind = CostKind.parse(kind)
    ks = tuple(ks)
    if kind is CostKind.MS:
        return _ms(op_kind, ks)
    if kind is CostKind.MY:
        return Fraction(_MY[op_kind])
    if kind is CostKind.CL:
        return Fraction(_CL[op_kind])
    total = _ms(op_kind, ks) + _MY[op_kind] + _CL[op_kind]
    if kind is CostKind.TOTAL:
        return total
    if source is None:
        raise ValueError("Shannon cost needs the source partition")
    sh = shannon_of_partition(source if isinstance(source, (Partition, tuple, list)) else partition_of(source))
    if kind is CostKind.SHANNON:
        return sh
    return float(total) + sh


def op_cost(op: MergeOp, kind):
    return table_cost(op.kind, op.ks, kind, op.source)


def shannon_edge_cost(edge) -> float:
    """Shannon cost of an edge: the entropy of its source partition.

    ``edge`` may be a MergeOp, a (source, target) pair of workspaces or
    partitions, or a bare source partition.
    """
    if isinstance(edge, MergeOp):
        src = edge.source
    elif isinstance(edge, tuple) and len(edge) == 2 and not isinstance(edge[0], int):
        src = edge[0]
    else:
        src = edge
    if not isinstance(src, (Partition, tuple, list)):
        src = partition_of(src)
    return shannon_of_partition(src)


@dataclass
class WeightedMatrix:
    """t^cost weighted adjacency plus the exponent data behind it.

    ``exponents`` maps (src, dst) to the sorted tuple of distinct costs on
    that cell; ``min_cost`` is the min-plus entry (+inf where no edge).
    """

    matrix: sparse.csr_matrix
    exponents: dict
    t: float
    kind: CostKind

    @property
    def min_cost(self) -> list:
        m = self.matrix.shape[0]
        out = [[math.inf] * m for _ in range(m)]
        for (i, j), costs in self.exponents.items():
            out[i][j] = costs[0]
        return out

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _power(t, c) -> float:
    if c == 0:
        return 1.0
    return float(t) ** float(c)


def _check_t(t):
    if not 0 < t <= 1:
        raise ValueError(f"t must lie in (0, 1], got {t}")


def weighted_matrix(obj, kind, t: float, mode: str | None = None) -> WeightedMatrix:
    """Entries t^cost times the arrow count.

    On a Merge graph every collapsed (src, dst) cell must carry one cost.
    On a partition graph a cell can mix arrow types with different costs;
    the entry is then the sum of count * t^cost over the types.
    """
    _check_t(t)
    kind = CostKind.parse(kind)
    if isinstance(obj, PartitionGraph):
        return _weighted_partition(obj, kind, t)
    if not isinstance(obj, MergeGraph):
        raise TypeError("expected a MergeGraph or PartitionGraph")
    mode = mode or obj.config.edge_mode
    costs: dict = {}
    for o, s, d in zip(obj.ops, obj.src, obj.dst):
        c = op_cost(o, kind)
        prev = costs.setdefault((int(s), int(d)), c)
        if prev != c and not (isinstance(c, float) and abs(prev - c) <= 1e-12):
            raise CostCollision(f"{o.source} -> {o.target}: costs {prev} and {c}")
    base = obj.matrix(mode).tocoo()
    vals = np.array([v * _power(t, costs[(int(r), int(c))]) for r, c, v in zip(base.row, base.col, base.data)])
    m = obj.num_vertices
    mat = sparse.csr_matrix((vals, (base.row, base.col)), shape=(m, m))
    return WeightedMatrix(mat, {k: (v,) for k, v in costs.items()}, t, kind)


def partition_costs(pg: PartitionGraph, kind) -> dict:
    """(i, j) -> list of (cost, count) over arrow types on that cell."""
    kind = CostKind.parse(kind)
    out = {}
    for (i, j), cnt in pg.arrows.items():
        src = pg.vertices[i]
        out[(i, j)] = sorted((table_cost(k, ks, kind, src), m) for (k, ks), m in cnt.items() if m)
    return out


def _weighted_partition(pg: PartitionGraph, kind: CostKind, t: float) -> WeightedMatrix:
    m = pg.num_vertices
    dense = np.zeros((m, m))
    exps = {}
    for (i, j), items in partition_costs(pg, kind).items():
        dense[i, j] = math.fsum(cnt * _power(t, c) for c, cnt in items)
        exps[(i, j)] = tuple(sorted({c for c, _ in items}))
    return WeightedMatrix(sparse.csr_matrix(dense), exps, t, kind)


def chain_rule_check(p, i: int, j: int) -> float:
    """Residual of the entropy chain rule when parts i and j of p merge."""
    p = Partition(p)
    if i == j or not (0 <= i < len(p) and 0 <= j < len(p)):
        raise ValueError("need two distinct part indices")
    n = p.n
    ki, kj = p[i], p[j]
    merged = Partition([k for m, k in enumerate(p) if m not in (i, j)] + [ki + kj])
    s = ki + kj
    inner = shannon_entropy((ki / s, kj / s))
    return abs(shannon_of_partition(merged) - shannon_of_partition(p) + s / n * inner)


def random_chain_rule_residuals(count: int = 100, max_n: int = 30, seed: int = 0) -> list:
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(2, max_n)
        parts, left = [], n
        while left:
            k = rng.randint(1, left)
            parts.append(k)
            left -= k
        if len(parts) < 2:
            continue
        i, j = rng.sample(range(len(parts)), 2)
        out.append((Partition(parts), chain_rule_check(parts, i, j)))
    return out


def cost_table_csv(max_k: int = 6) -> str:
    """Rows (cost kind, op kind, k_i, k_j, value) for the table kinds."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cost", "op", "k_i", "k_j", "value"])
    table_kinds = (CostKind.MS, CostKind.MY, CostKind.CL, CostKind.TOTAL)
    for kind in table_kinds:
        w.writerow([kind.value, "EM", "", "", table_cost("EM", (), kind)])
        w.writerow([kind.value, "IM", "", "", table_cost("IM", (), kind)])
        for k in range(2, max_k + 1):
            w.writerow([kind.value, "SM1", k, "", table_cost("SM1", (k,), kind)])
        for ki in range(2, max_k + 1):
            for kj in range(ki, max_k + 1):
                w.writerow([kind.value, "SM2", ki, kj, table_cost("SM2", (ki, kj), kind)])
        for k in range(3, max_k + 1):
            w.writerow([kind.value, "SM3", k, "", table_cost("SM3", (k,), kind)])
    return buf.getvalue()

import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graph
from mergedyn.cost import (
    CostKind,
    chain_rule_check,
    cost_table_csv,
    op_cost,
    partition_costs,
    random_chain_rule_residuals,
    shannon_edge_cost,
    table_cost,
    weighted_matrix,
)
from mergedyn.errors import CostCollision, UnknownKind
from mergedyn.forest import Partition, decode_workspace
from mergedyn.merge_graph import MergeOpKind
from mergedyn.partition_chain import build_partition_graph


def total_oracle(kind, ks):
    """Combined table written out row by row."""
    return {
        "EM": lambda: Fraction(1),
        "IM": lambda: Fraction(0),
        "SM1": lambda: 3 - Fraction(1, ks[0]),
        "SM2": lambda: 3 - Fraction(1, ks[0]) - Fraction(1, ks[1]),
        "SM3": lambda: 2 - Fraction(2, ks[0]),
    }[kind]()


def test_table_examples():
    assert table_cost("EM", (), "total") == 1
    assert table_cost("IM", (), "total") == 0
    assert table_cost("SM1", (2,), "total") == Fraction(5, 2)
    assert table_cost("SM3", (4,), "total") == Fraction(3, 2)
    assert isinstance(table_cost("SM2", (2, 3), "total"), Fraction)


@given(st.sampled_from(["EM", "IM", "SM1", "SM2", "SM3"]), st.lists(st.integers(2, 40), min_size=2, max_size=2))
def test_total_is_sum_of_components(kind, ks):
    parts = sum(table_cost(kind, ks, k) for k in ("ms", "my", "cl"))
    assert table_cost(kind, ks, "total") == parts == total_oracle(kind, ks)


def test_my_signs_follow_the_table():
    assert [table_cost(k, (3, 3), "my") for k in ("EM", "IM", "SM1", "SM2", "SM3")] == [1, 0, 0, -1, -1]


def test_parse():
    assert CostKind.parse("total+shannon") is CostKind.TOTAL_PLUS_SHANNON
    assert CostKind.parse("TOTAL") is CostKind.TOTAL
    assert CostKind.parse(CostKind.MS) is CostKind.MS
    with pytest.raises(UnknownKind):
        CostKind.parse("fuel")
    with pytest.raises(UnknownKind):
        table_cost("XM", (), "total")


def test_shannon_costs():
    assert shannon_edge_cost(decode_workspace("((a,b),(c,d))")) == 0
    assert shannon_edge_cost(Partition((2, 2))) == pytest.approx(math.log(2))
    assert shannon_edge_cost((Partition((3, 1)), Partition((4,)))) == pytest.approx(0.562335, abs=1e-6)
    with pytest.raises(ValueError):
        table_cost("EM", (), "shannon")
    assert table_cost("IM", (), "total+shannon", Partition((2, 2))) == pytest.approx(math.log(2))


def test_nonnegative_total_and_zero_cost_edges(g4, g5):
    for g in (g4, g5):
        for o in g.ops:
            c = op_cost(o, "total")
            assert c >= 0
            assert (c == 0) == (o.kind is MergeOpKind.IM)
            cs = op_cost(o, "total+shannon")
            assert (cs == 0) == (o.kind is MergeOpKind.IM and len(o.source) == 1)


@pytest.mark.parametrize("kind", list(CostKind))
def test_t_one_is_unweighted(g4, kind):
    wm = weighted_matrix(g4, kind, 1.0)
    assert (wm.dense() == g4.K.toarray()).all()


def test_t_half(g4):
    wm = weighted_matrix(g4, "total", 0.5)
    k = g4.K.toarray()
    d = wm.dense()
    for (s, t), kind in g4.edge_kind.items():
        if kind is MergeOpKind.EM:
            assert d[s, t] == 0.5 * k[s, t]
        elif kind is MergeOpKind.IM:
            assert d[s, t] == k[s, t]


def test_ops_mode_weighting(g4):
    wm = weighted_matrix(g4, "total", 0.5, mode="ops")
    assert wm.dense().sum() == pytest.approx(
        sum(0.5 ** float(op_cost(o, "total")) for o in g4.ops))


def test_bad_t(g4):
    for t in (0, -1, 1.5):
        with pytest.raises(ValueError):
            weighted_matrix(g4, "total", t)


def test_collision_on_a_synthetic_graph():
    from mergedyn.merge_graph import GraphConfig, MergeGraph, ops_from

    f = decode_workspace("((a,b),c)|d")
    ops = [o for o in ops_from(f) if o.kind is MergeOpKind.SM1][:1]
    bad = type(ops[0])(MergeOpKind.SM1, ops[0].operands, (7,), f, ops[0].target)
    verts = sorted({f, ops[0].target})
    g = MergeGraph(list("abcd"), verts, ops + [bad], frozenset(MergeOpKind), GraphConfig())
    with pytest.raises(CostCollision):
        weighted_matrix(g, "total", 0.5)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_monotone_in_t(t1, t2):
    lo, hi = sorted((t1, t2))
    g = graph(3)
    a = weighted_matrix(g, "total", lo).dense()
    b = weighted_matrix(g, "total", hi).dense()
    assert (a <= b + 1e-15).all()


def test_partition_cell_with_mixed_costs():
    pg = build_partition_graph(5)
    cell = partition_costs(pg, "total")[(pg.index((3, 2)), pg.index((2, 2, 1)))]
    assert cell == [(Fraction(4, 3), 3), (Fraction(13, 6), 6)]
    wm = weighted_matrix(pg, "total", 0.5)
    assert wm.dense()[pg.index((3, 2)), pg.index((2, 2, 1))] == pytest.approx(3 * 0.5 ** (4 / 3) + 6 * 0.5 ** (13 / 6))
    assert wm.min_cost[pg.index((3, 2))][pg.index((2, 2, 1))] == Fraction(4, 3)
    assert wm.min_cost[pg.index((5,))][pg.index((2, 1, 1, 1))] == math.inf


def test_chain_rule_examples():
    assert chain_rule_check((2, 2), 0, 1) <= 1e-12
    p = Partition((3, 2, 1))
    i, j = list(p).index(2), list(p).index(1)
    assert chain_rule_check(p, i, j) <= 1e-12
    with pytest.raises(ValueError):
        chain_rule_check((2, 2), 0, 0)


def test_random_chain_rule():
    res = random_chain_rule_residuals(100, 30, seed=3)
    assert len(res) == 100
    assert max(r for _, r in res) <= 1e-12
    assert all(p.n <= 30 for p, _ in res)


def test_cost_table_csv():
    rows = cost_table_csv(4).strip().split("\n")
    assert rows[0] == "cost,op,k_i,k_j,value"
    assert "TOTAL,SM3,4,,3/2" in rows
    assert "TOTAL,SM2,2,3,13/6" in rows


def _weighted_stationary(g, kind, t):
    from mergedyn.spectral import perron_frobenius

    pf = perron_frobenius(weighted_matrix(g, kind, t).matrix, tol=1e-14, relative=True, mode="pairing")
    pi = pf.eta * pf.psi
    return pi / pi.sum()


def test_n3_total_weighting_concentrates_on_trees():
    g = graph(3)
    pi = _weighted_stationary(g, "total", 1e-4)
    trees = g.fiber((3,))
    assert pi[trees].sum() >= 0.99
    assert max(abs(pi[i] - 1 / 3) for i in trees) < 1e-3


@pytest.mark.parametrize("n", [4, 5])
def test_shannon_weighting_concentrates_on_trees(n):
    g = graph(n)
    pi = _weighted_stationary(g, "shannon", 1e-4)
    assert pi[g.fiber((n,))].sum() >= 0.95

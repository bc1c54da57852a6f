import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mergedyn.errors import DuplicateLabel, InvalidCut, InvalidHead
from mergedyn.forest import (
    HeadFunction,
    LeafLabel,
    Partition,
    Workspace,
    accessible_terms,
    canonical_encode,
    contract_quotient,
    counting,
    decode_tree,
    decode_workspace,
    default_head_function,
    default_labels,
    delete_quotient,
    dynamic_partitions,
    entropy_bound_diagnostic,
    enumerate_forests,
    enumerate_trees,
    forest_count,
    leaf,
    merge_pair,
    odd_double_factorial,
    partition_distribution,
    partition_of,
    project_dc,
    shannon_of_partition,
)


def T(s):
    return decode_tree(s)


# brute-force oracle: count rooted full binary trees on labelled leaves by
# splitting off the block containing the first label
def brute_tree_count(labels):
    labels = list(labels)
    if len(labels) == 1:
        return 1
    first, rest = labels[0], labels[1:]
    total = 0
    for r in range(0, len(rest)):
        for others in itertools.combinations(rest, r):
            left = [first, *others]
            right = [x for x in rest if x not in others]
            total += brute_tree_count(left) * brute_tree_count(right)
    return total


def test_encoding_examples():
    a, b, c, d = (leaf(x) for x in "abcd")
    assert merge_pair(a, b).code == merge_pair(b, a).code == "(a,b)"
    assert canonical_encode(a) == "a"
    assert canonical_encode(Workspace([merge_pair(c, d), merge_pair(a, b)])) == "(a,b)|(c,d)"
    assert merge_pair(merge_pair(a, b), c).code == "((a,b),c)"
    assert leaf("x", traced=True).code == "~x"


def test_duplicate_labels_rejected():
    with pytest.raises(DuplicateLabel):
        merge_pair(leaf("a"), leaf("a"))
    with pytest.raises(DuplicateLabel):
        canonical_encode(Workspace([leaf("a"), leaf("a")], check=False))
    # a traced copy may coexist with its untraced label
    assert merge_pair(leaf("a"), leaf("a", traced=True)).code == "(a,~a)"


def test_bad_symbols():
    with pytest.raises(ValueError):
        LeafLabel("a,b")
    with pytest.raises(ValueError):
        LeafLabel("")


@st.composite
def trees(draw, max_leaves=7):
    n = draw(st.integers(1, max_leaves))
    labels = [f"x{i}" for i in range(n)]
    nodes = [leaf(s) for s in labels]
    while len(nodes) > 1:
        i = draw(st.integers(0, len(nodes) - 1))
        a = nodes.pop(i)
        j = draw(st.integers(0, len(nodes) - 1))
        b = nodes.pop(j)
        nodes.append(merge_pair(a, b))
    return nodes[0]


def _swap_random(t, flips):
    if t.children is None:
        return t
    a, b = t.children
    a, b = _swap_random(a, flips), _swap_random(b, flips)
    flip = flips.pop() if flips else False
    return merge_pair(b, a) if flip else merge_pair(a, b)


@given(trees(), st.lists(st.booleans(), max_size=20))
def test_encoding_ignores_child_order(t, flips):
    assert _swap_random(t, list(flips)).code == t.code


@given(trees())
def test_decode_round_trip(t):
    assert decode_tree(t.code).code == t.code
    assert len(accessible_terms(t)) == 2 * t.nleaves - 2


def test_round_trip_all_forests():
    for n in range(2, 7):
        for f in enumerate_forests(default_labels(n)):
            assert decode_workspace(f.code).code == f.code


def test_accessible_terms_examples():
    assert accessible_terms(leaf("a")) == []
    assert [s.code for _, s in accessible_terms(T("(a,b)"))] == ["a", "b"]
    assert len(accessible_terms(T("((a,b),(c,d))"))) == 6


def test_delete_quotient_examples():
    t = T("(a,(b,(c,d)))")
    # canonical form is (((c,d),b),a): (c,d) sits at path (0, 0)
    assert t.code == "(((c,d),b),a)"
    assert delete_quotient(t, [(0, 0)]).code == "(a,b)"
    assert delete_quotient(t, [(0, 0, 0), (0, 0, 1)]).code == "(a,b)"
    assert delete_quotient(T("(a,b)"), [(0,)]).code == "b"
    assert delete_quotient(T("(a,b)"), [()]) is None


def test_delete_quotient_rejects_nested_cut():
    t = T("(a,(b,c))")
    with pytest.raises(InvalidCut):
        delete_quotient(t, [(1,), (1, 0)])
    with pytest.raises(InvalidCut):
        delete_quotient(t, [(5,)])


@given(trees(max_leaves=6), st.data())
def test_deletion_leaf_additivity(t, data):
    vertices = [p for p in t.vertices() if p]
    if not vertices:
        return
    v = data.draw(st.sampled_from(vertices))
    q = delete_quotient(t, [v])
    assert t.nleaves == t.subtree(v).nleaves + (q.nleaves if q else 0)
    h = default_head_function(t)
    assert contract_quotient(t, h, [v]).nleaves == t.nleaves - t.subtree(v).nleaves + 1


def test_contract_quotient_examples():
    t = T("(a,(b,c))")
    c_path = next(p for p in t.leaf_paths() if t.subtree(p).label.symbol == "c")
    assert contract_quotient(t, default_head_function(t), [c_path]).code == T("(a,(b,~c))").code
    t = T("(a,(b,(c,d)))")
    h = default_head_function(t)
    assert h.symbol((0, 0)) == "c"
    assert contract_quotient(t, h, [(0, 0)]).code == T("(a,(b,~c))").code
    assert contract_quotient(t, h, []).code == t.code


def test_contract_rejects_bad_head():
    t = T("((a,b),c)")
    h = default_head_function(t)
    bad = HeadFunction(t, {(): (0, 1), (0,): (0, 0)})
    with pytest.raises(InvalidHead):
        bad.validate()
    with pytest.raises(InvalidHead):
        HeadFunction(t, {(): (1,)}).validate()
    with pytest.raises(InvalidHead):
        HeadFunction(t, {(): (0,), (0,): (0, 0)}).validate()
    # heads may come from either child as long as they nest
    HeadFunction(t, {(): (1,), (0,): (0, 0)}).validate()
    with pytest.raises(InvalidHead):
        contract_quotient(t, bad, [(0,)])
    with pytest.raises(InvalidHead):
        contract_quotient(T("(a,b)"), h, [])


def test_default_head_examples():
    assert default_head_function(T("(a,b)")).symbol(()) == "a"
    assert default_head_function(T("((a,b),c)")).symbol(()) == "a"


def test_default_heads_valid_up_to_five_leaves():
    for n in range(2, 6):
        for t in enumerate_trees(default_labels(n)):
            default_head_function(t).validate()


def test_project_dc_examples():
    f = Workspace([T("(a,(b,~c))"), leaf("c")])
    assert project_dc(f).code == "(a,b)|c"
    g = decode_workspace("(a,b)|(c,d)")
    assert project_dc(g) == g
    assert project_dc(Workspace([T("(~a,~b)")])).code == ""


def test_tree_counts_against_brute_force():
    for n in range(1, 8):
        got = len(enumerate_trees(default_labels(n)))
        assert got == brute_tree_count(range(n))
        if n >= 2:
            assert got == odd_double_factorial(2 * n - 3)
    assert len(enumerate_trees("ab")) == 1
    assert len(enumerate_trees("abc")) == 3
    assert len(enumerate_trees("abcd")) == 15


def test_forest_counts():
    assert len(enumerate_forests("ab")) == 1
    assert len(enumerate_forests("abcd")) == 36
    for n, want in {3: 6, 4: 36, 5: 265, 6: 2430, 7: 27006}.items():
        assert forest_count(n) == want
    assert len(enumerate_forests(default_labels(6))) == 2430


def test_fiber_sizes_match_lambda():
    for n in range(2, 8):
        tally = Counter(partition_of(f) for f in enumerate_forests(default_labels(n)))
        assert set(tally) == set(dynamic_partitions(n))
        for p, cnt in tally.items():
            assert cnt == counting(n, p).lam


def test_counting_examples():
    assert counting(4, (3, 1)).lam == 12
    assert counting(4, (2, 2)).lam == 3
    assert counting(9, (4, 2, 2, 1)).mu == math.factorial(9) // (24 * 2 * 2)
    assert counting(9, (4, 2, 2, 1)).mu == 3780
    fiber5 = {(2, 1, 1, 1): 10, (2, 2, 1): 15, (3, 1, 1): 30, (3, 2): 30, (4, 1): 75, (5,): 105}
    for p, lam in fiber5.items():
        assert counting(5, p).lam == lam
    c = counting(5, (3, 2))
    assert c.upsilon == 10 and c.gamma == Fraction(3) and c.lam == c.mu * c.gamma


def test_partitions():
    p = Partition.parse("2+1+1")
    assert p == Partition((1, 2, 1)) and p.n == 4 and str(p) == "2+1+1" and repr(p) == "{2,1,1}"
    assert dynamic_partitions(4) == [(2, 1, 1), (2, 2), (3, 1), (4,)]
    assert partition_of(decode_workspace("(a,b)|c|d")) == (2, 1, 1)
    assert partition_of(decode_workspace("((a,b),(c,d))")) == (4,)
    assert partition_of(decode_workspace("(a,b)|(c,d)")) == (2, 2)


def test_shannon_examples():
    assert shannon_of_partition((4,)) == 0
    assert shannon_of_partition((2, 2)) == pytest.approx(math.log(2), abs=1e-12)
    assert shannon_of_partition((3, 1), 4) == pytest.approx(0.562335, abs=1e-6)
    with pytest.raises(ValueError):
        shannon_of_partition((3, 1), 5)


@given(st.lists(st.integers(1, 9), min_size=1, max_size=8))
def test_partition_distribution_sums_to_one(parts):
    probs = partition_distribution(parts)
    assert all(x > 0 for x in probs)
    assert abs(sum(probs) - 1) <= 1e-12


def test_entropy_bound_diagnostic_reports_constant():
    rep = entropy_bound_diagnostic()
    assert set(rep["gaps"]) == {8, 16, 32, 64}
    assert rep["C"] > 0

"""Syntactic objects, workspaces and their combinatorics.

Trees are full binary, non-planar and leaf-labelled.  Every tree carries a
canonical string code; two trees are equal exactly when their codes agree.
Vertices inside a tree are addressed by paths from the root: a tuple of
child indices (0 or 1) in canonical child order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Sequence

from .errors import DuplicateLabel, InvalidCut, InvalidHead

Path = tuple


@dataclass(frozen=True, order=True)
class LeafLabel:
    symbol: str
    traced: bool = False

    def __post_init__(self):
        if not self.symbol:
            raise ValueError("leaf symbol must be non-empty")
        if any(ch in self.symbol for ch in "(),|~ "):
            raise ValueError(f"illegal character in leaf symbol {self.symbol!r}")

    def encode(self) -> str:
        return "~" + self.symbol if self.traced else self.symbol

    def as_traced(self) -> "LeafLabel":
        return LeafLabel(self.symbol, True)


class Tree:
    """Canonical full binary tree.  Build with :func:`leaf` and :func:`merge_pair`."""

    __slots__ = ("label", "children", "code", "nleaves")

    def __init__(self, label=None, children=None, code=None, nleaves=1):
        self.label = label
        self.children = children
        self.code = code
        self.nleaves = nleaves

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def __eq__(self, other):
        return isinstance(other, Tree) and self.code == other.code

    def __hash__(self):
        return hash(self.code)

    def __lt__(self, other):
        return self.code < other.code

    def __repr__(self):
        return f"Tree({self.code})"

    def __str__(self):
        return self.code

    def subtree(self, path: Path) -> "Tree":
        t = self
        for step in path:
            if t.children is None or step not in (0, 1):
                raise InvalidCut(f"path {path} leaves the tree {self.code}")
            t = t.children[step]
        return t

    def vertices(self) -> list:
        """All vertex paths in preorder, root first."""
        out = []
        stack = [((), self)]
        while stack:
            path, t = stack.pop()
            out.append(path)
            if t.children is not None:
                stack.append((path + (1,), t.children[1]))
                stack.append((path + (0,), t.children[0]))
        return out

    def leaf_paths(self) -> list:
        return [p for p in self.vertices() if self.subtree(p).children is None]

    def leaves(self) -> list:
        """Leaf labels in canonical left-to-right order."""
        if self.children is None:
            return [self.label]
        return self.children[0].leaves() + self.children[1].leaves()

    def cherries(self) -> int:
        if self.children is None:
            return 0
        a, b = self.children
        if a.children is None and b.children is None:
            return 1
        return a.cherries() + b.cherries()


def leaf(symbol: str | LeafLabel, traced: bool = False) -> Tree:
    lab = symbol if isinstance(symbol, LeafLabel) else LeafLabel(symbol, traced)
    return Tree(label=lab, code=lab.encode(), nleaves=1)


def _join(a: Tree, b: Tree) -> Tree:
    if b.code < a.code:
        a, b = b, a
    return Tree(children=(a, b), code=f"({a.code},{b.code})", nleaves=a.nleaves + b.nleaves)


def _untraced(t: Tree) -> list:
    return [lab.symbol for lab in t.leaves() if not lab.traced]


def _check_distinct(symbols: Sequence[str], where: str) -> None:
    if len(set(symbols)) != len(symbols):
        dup = sorted({s for s in symbols if symbols.count(s) > 1})
        raise DuplicateLabel(f"repeated untraced labels {dup} in {where}")


def merge_pair(a: Tree, b: Tree) -> Tree:
    """Join two trees under a new root (the magma product)."""
    _check_distinct(_untraced(a) + _untraced(b), f"merge of {a.code} and {b.code}")
    return _join(a, b)


def accessible_terms(t: Tree) -> list:
    """(path, subtree) for every non-root vertex, leaves included."""
    return [(p, t.subtree(p)) for p in t.vertices() if p]


def _check_cut(t: Tree, cut: Iterable[Path]) -> frozenset:
    cut = frozenset(tuple(p) for p in cut)
    for p in cut:
        t.subtree(p)
    for p, q in itertools.permutations(cut, 2):
        if q[: len(p)] == p:
            raise InvalidCut(f"cut vertex {p} is an ancestor of {q} in {t.code}")
    return cut


def _delete(t: Tree, path: Path, cut: frozenset):
    if path in cut:
        return None
    if t.children is None:
        return t
    left = _delete(t.children[0], path + (0,), cut)
    right = _delete(t.children[1], path + (1,), cut)
    if left is None:
        return right
    if right is None:
        return left
    if left is t.children[0] and right is t.children[1]:
        return t
    return _join(left, right)


def delete_quotient(t: Tree, cut: Iterable[Path]):
    """Remove the cut subtrees and contract unary vertices.

    Returns ``None`` (the empty tree) when every leaf was removed.
    """
    return _delete(t, (), _check_cut(t, cut))


class HeadFunction:
    """Assignment of a leaf (given by its path) to every internal vertex."""

    def __init__(self, tree: Tree, heads: dict):
        self.tree = tree
        self.heads = dict(heads)

    def __getitem__(self, path: Path) -> Path:
        return self.heads[path]

    def symbol(self, path: Path) -> str:
        return self.tree.subtree(self.heads[path]).label.symbol

    def validate(self) -> None:
        t = self.tree
        internal = [p for p in t.vertices() if t.subtree(p).children is not None]
        if set(internal) != set(self.heads):
            raise InvalidHead("head function must be defined on exactly the internal vertices")
        for v in internal:
            h = self.heads[v]
            if h[: len(v)] != v or t.subtree(h).children is not None:
                raise InvalidHead(f"head of {v} is not a leaf below it")
        for v, w in itertools.permutations(internal, 2):
            h = self.heads[v]
            if w[: len(v)] == v and h[: len(w)] == w and self.heads[w] != h:
                raise InvalidHead(f"heads of {v} and {w} are inconsistent")


def default_head_function(t: Tree) -> HeadFunction:
    """Head passes up from the child with the smaller canonical code."""
    heads = {}

    def walk(node, path):
        if node.children is None:
            return path
        h0 = walk(node.children[0], path + (0,))
        walk(node.children[1], path + (1,))
        heads[path] = h0
        return h0

    walk(t, ())
    return HeadFunction(t, heads)


def contract_quotient(t: Tree, h: HeadFunction, cut: Iterable[Path]) -> Tree:
    """Replace every cut subtree by a traced leaf named after its head."""
    cut = _check_cut(t, cut)
    if h.tree != t:
        raise InvalidHead("head function belongs to a different tree")
    h.validate()

    def walk(node, path):
        if path in cut:
            if node.children is None:
                return leaf(node.label.as_traced())
            return leaf(LeafLabel(h.symbol(path), True))
        if node.children is None:
            return node
        return _join(walk(node.children[0], path + (0,)), walk(node.children[1], path + (1,)))

    return walk(t, ())


class Workspace:
    """A finite multiset of trees with disjoint untraced labels."""

    __slots__ = ("components", "code")

    def __init__(self, components: Iterable[Tree], check: bool = True):
        comps = tuple(sorted(components, key=lambda c: c.code))
        if check:
            syms = [s for c in comps for s in _untraced(c)]
            _check_distinct(syms, "workspace")
        self.components = comps
        self.code = "|".join(c.code for c in comps)

    def __eq__(self, other):
        return isinstance(other, Workspace) and self.code == other.code

    def __hash__(self):
        return hash(self.code)

    def __lt__(self, other):
        return self.code < other.code

    def __repr__(self):
        return f"Workspace({self.code})"

    def __str__(self):
        return self.code

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def n(self) -> int:
        return sum(c.nleaves for c in self.components)

    @property
    def b0(self) -> int:
        return len(self.components)

    @property
    def c(self) -> int:
        """Number of components with at least one edge."""
        return sum(1 for t in self.components if t.nleaves >= 2)

    @property
    def d(self) -> int:
        """Number of cherry subtrees, counting cherry components."""
        return sum(t.cherries() for t in self.components)

    @property
    def d_prime(self) -> int:
        """Number of components that are themselves cherries."""
        return sum(1 for t in self.components if t.nleaves == 2)

    @property
    def d_second(self) -> int:
        """Cherries sitting strictly inside larger components."""
        return self.d - self.d_prime

    @property
    def c_tilde(self) -> int:
        return self.c - self.d_prime

    def leaf_labels(self) -> list:
        return [lab for t in self.components for lab in t.leaves()]


def canonical_encode(x: Tree | Workspace | Iterable[Tree]) -> str:
    if isinstance(x, Tree):
        _check_distinct(_untraced(x), x.code)
        return x.code
    if not isinstance(x, Workspace):
        x = Workspace(x)
    else:
        _check_distinct([s for c in x.components for s in _untraced(c)], "workspace")
    return x.code


def decode_tree(s: str) -> Tree:
    pos = 0

    def parse():
        nonlocal pos
        if s.startswith("(", pos):
            pos += 1
            a = parse()
            if not s.startswith(",", pos):
                raise ValueError(f"expected ',' at {pos} in {s!r}")
            pos += 1
            b = parse()
            if not s.startswith(")", pos):
                raise ValueError(f"expected ')' at {pos} in {s!r}")
            pos += 1
            return merge_pair(a, b)
        traced = s.startswith("~", pos)
        if traced:
            pos += 1
        start = pos
        while pos < len(s) and s[pos] not in "(),|~":
            pos += 1
        if pos == start:
            raise ValueError(f"empty symbol at {start} in {s!r}")
        return leaf(s[start:pos], traced)

    t = parse()
    if pos != len(s):
        raise ValueError(f"trailing input in {s!r}")
    return t


def decode_workspace(s: str) -> Workspace:
    if not s:
        return Workspace([])
    return Workspace(decode_tree(part) for part in s.split("|"))


def project_dc(f: Workspace) -> Workspace:
    """Remove every traced leaf and drop components that become empty."""
    out = []
    for t in f.components:
        traced = [p for p in t.leaf_paths() if t.subtree(p).label.traced]
        q = delete_quotient(t, traced) if traced else t
        if q is not None:
            out.append(q)
    return Workspace(out)


# ---------------------------------------------------------------- enumeration

def _as_labels(labels) -> tuple:
    labs = tuple(l if isinstance(l, LeafLabel) else LeafLabel(str(l)) for l in labels)
    _check_distinct([l.symbol for l in labs if not l.traced], "label set")
    return tuple(sorted(labs))


def _trees(labels: tuple, memo: dict) -> list:
    if labels in memo:
        return memo[labels]
    if len(labels) == 1:
        res = [leaf(labels[0])]
    else:
        first, rest = labels[0], labels[1:]
        res = []
        # the block holding the first label is A; B is its nonempty complement
        for r in range(len(rest)):
            for extra in itertools.combinations(rest, r):
                a = (first,) + extra
                b = tuple(x for x in rest if x not in extra)
                for ta in _trees(a, memo):
                    for tb in _trees(b, memo):
                        res.append(_join(ta, tb))
    memo[labels] = res
    return res


def enumerate_trees(labels) -> list:
    """All trees on exactly these leaves, sorted by code."""
    labs = _as_labels(labels)
    if not labs:
        raise ValueError("need at least one label")
    return sorted(_trees(labs, {}), key=lambda t: t.code)


def set_partitions(items: Sequence) -> Iterator[list]:
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def enumerate_forests(labels) -> list:
    """All workspaces on these leaves with at least one edge, sorted by code."""
    labs = _as_labels(labels)
    if len(labs) < 2:
        raise ValueError("need at least two labels")
    memo: dict = {}
    out = []
    for blocks in set_partitions(labs):
        if all(len(b) == 1 for b in blocks):
            continue
        choices = [_trees(tuple(sorted(b)), memo) for b in blocks]
        for combo in itertools.product(*choices):
            out.append(Workspace(combo, check=False))
    out.sort(key=lambda w: w.code)
    return out


def default_labels(n: int) -> list:
    """a, b, ..., z, then a1, b1, ... for larger n."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    return [letters[i % 26] + (str(i // 26) if i >= 26 else "") for i in range(n)]


# ---------------------------------------------------------------- partitions

class Partition(tuple):
    """Integer partition stored as a non-increasing tuple."""

    def __new__(cls, parts: Iterable[int]):
        parts = sorted((int(k) for k in parts), reverse=True)
        if not parts or parts[-1] < 1:
            raise ValueError(f"invalid partition {parts}")
        return super().__new__(cls, parts)

    @classmethod
    def parse(cls, s: str) -> "Partition":
        s = s.strip().strip("{}")
        return cls(int(x) for x in s.replace(",", "+").split("+") if x.strip())

    @property
    def n(self) -> int:
        return sum(self)

    @property
    def multiplicities(self) -> dict:
        out: dict = {}
        for k in self:
            out[k] = out.get(k, 0) + 1
        return out

    @property
    def is_dynamic(self) -> bool:
        """True unless all parts equal one (that state has no edges)."""
        return self[0] >= 2

    def __str__(self):
        return "+".join(map(str, self))

    def __repr__(self):
        return "{" + ",".join(map(str, self)) + "}"


def integer_partitions(n: int, largest: int | None = None) -> Iterator[tuple]:
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - k, k):
            yield (k,) + rest


def dynamic_partitions(n: int) -> list:
    """The partitions of n other than all ones, in ascending lexicographic order."""
    return sorted(Partition(p) for p in integer_partitions(n) if p[0] >= 2)


def partition_of(f: Workspace) -> Partition:
    return Partition(t.nleaves for t in f.components)


def odd_double_factorial(m: int) -> int:
    """m!! for odd m, with (-1)!! = 1."""
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def tree_count(k: int) -> int:
    """Number of trees on k labelled leaves, (2k-3)!!."""
    return odd_double_factorial(2 * k - 3)


class Counts(NamedTuple):
    mu: int
    upsilon: int
    gamma: Fraction
    lam: int


def counting(n: int, p) -> Counts:
    """Multinomial, label-assignment, shape and fiber counts of a partition."""
    p = Partition(p)
    if p.n != n:
        raise ValueError(f"{p!r} does not partition {n}")
    mult = p.multiplicities
    mu = math.factorial(n)
    for k, a in mult.items():
        mu //= math.factorial(k) ** a
    sym = 1
    for a in mult.values():
        sym *= math.factorial(a)
    shapes = 1
    for k, a in mult.items():
        shapes *= tree_count(k) ** a
    gamma = Fraction(shapes, sym)
    lam = mu * gamma
    assert lam.denominator == 1 and mu % sym == 0
    return Counts(mu, mu // sym, gamma, int(lam))


def forest_count(n: int) -> int:
    return sum(counting(n, p).lam for p in dynamic_partitions(n))


def partition_distribution(p) -> tuple:
    p = Partition(p)
    return tuple(k / p.n for k in p)


def shannon_entropy(probs: Iterable[float]) -> float:
    return -math.fsum(x * math.log(x) for x in probs if x > 0)


def shannon_of_partition(p, n: int | None = None) -> float:
    p = Partition(p)
    if n is not None and n != p.n:
        raise ValueError(f"{p!r} does not partition {n}")
    return shannon_entropy(partition_distribution(p))


def entropy_bound_diagnostic(ns=(8, 16, 32, 64)) -> dict:
    """Compare ln(mu)/n with the partition entropy for {n/2, n/4, n/4}.

    Returns the gaps and the smallest C with gap <= C ln(n)/n at every n.
    """
    gaps = {}
    for n in ns:
        p = Partition((n // 2, n // 4, n - n // 2 - n // 4))
        ln_mu = math.lgamma(n + 1) - sum(math.lgamma(k + 1) for k in p)
        gaps[n] = abs(ln_mu / n - shannon_of_partition(p))
    c_fit = max(g * n / math.log(n) for n, g in gaps.items())
    return {"gaps": gaps, "C": c_fit}

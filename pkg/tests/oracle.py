"""Independent brute-force model of workspaces for cross-checking.

Trees are leaf strings or frozensets of two subtrees, so child order never
exists in the first place.
"""
import itertools


def code(t):
    if isinstance(t, str):
        return t
    a, b = sorted(code(c) for c in t)
    return f"({a},{b})"


def wcode(comps):
    return "|".join(sorted(code(c) for c in comps))


def join(a, b):
    return frozenset((a, b))


def leaves(t):
    if isinstance(t, str):
        return [t]
    return [x for c in t for x in leaves(c)]


def subterms(t):
    """Every vertex below the root."""
    if isinstance(t, str):
        return []
    out = []
    for c in t:
        out.append(c)
        out.extend(subterms(c))
    return out


def delete(t, s):
    if t == s:
        return None
    if isinstance(t, str):
        return t
    a, b = tuple(t)
    a2, b2 = delete(a, s), delete(b, s)
    if a2 is None:
        return b2
    if b2 is None:
        return a2
    return join(a2, b2)


def trees(labels):
    labels = list(labels)
    if len(labels) == 1:
        return [labels[0]]
    first, rest = labels[0], labels[1:]
    out = []
    for r in range(len(rest)):
        for extra in itertools.combinations(rest, r):
            left = [first, *extra]
            right = [x for x in rest if x not in extra]
            out.extend(join(a, b) for a in trees(left) for b in trees(right))
    return out


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest):
        yield [[first]] + p
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]


def forests(labels):
    out = []
    for blocks in set_partitions(list(labels)):
        if all(len(b) == 1 for b in blocks):
            continue
        for choice in itertools.product(*(trees(b) for b in blocks)):
            out.append(list(choice))
    return out


def targets(comps, sister_cut=True):
    """Multiset of target codes, one per minimal Merge operation."""
    out = []
    r = len(comps)
    for i, j in itertools.combinations(range(r), 2):
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        out.append(("EM", wcode(rest + [join(comps[i], comps[j])])))
    for i, t in enumerate(comps):
        rest = comps[:i] + comps[i + 1:]
        if isinstance(t, str):
            continue
        for s in subterms(t):
            if s in t:
                continue
            out.append(("IM", wcode(rest + [join(s, delete(t, s))])))
        for x in leaves(t):
            for j, u in enumerate(comps):
                if isinstance(u, str):
                    rest2 = [c for m, c in enumerate(comps) if m not in (i, j)]
                    out.append(("SM", wcode(rest2 + [delete(t, x), join(x, u)])))
        if len(leaves(t)) >= 3:
            for x, y in itertools.combinations(leaves(t), 2):
                if not sister_cut and join(x, y) in [t, *subterms(t)]:
                    continue
                q = delete(delete(t, x), y)
                out.append(("SM", wcode(rest + [q, join(x, y)])))
    for i, j in itertools.combinations(range(r), 2):
        ti, tj = comps[i], comps[j]
        if isinstance(ti, str) or isinstance(tj, str):
            continue
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        for x in leaves(ti):
            for y in leaves(tj):
                out.append(("SM", wcode(rest + [delete(ti, x), delete(tj, y), join(x, y)])))
    return out

"""One-step Merge with the contraction quotient, checked against deletion."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import Mismatch
from .forest import Workspace, _join, contract_quotient, default_head_function, enumerate_forests, project_dc
from .merge_graph import ALL_KINDS, GraphConfig, MergeOpKind, apply_op, check_cap, operand_specs

CONTRACTION_CAP = 5


def all_traced(t) -> bool:
    return all(lab.traced for lab in t.leaves())


def contraction_image(f: Workspace, kind: MergeOpKind, operands: tuple):
    """Target of one operation when extracted terms leave traces behind.

    Returns None when the result would contain a component made only of
    traced leaves; such operations are filtered out.
    """
    comps = f.components
    if kind is MergeOpKind.EM:
        return apply_op(f, kind, operands)
    if kind is MergeOpKind.IM:
        i, path = operands
        t = comps[i]
        rest = [c for m, c in enumerate(comps) if m != i]
        quot = contract_quotient(t, default_head_function(t), [path])
        new = [_join(t.subtree(path), quot)]
    elif kind is MergeOpKind.SM1:
        i, x, j = operands
        t = comps[i]
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        new = [contract_quotient(t, default_head_function(t), [x]), _join(t.subtree(x), comps[j])]
    elif kind is MergeOpKind.SM2:
        i, x, j, y = operands
        ti, tj = comps[i], comps[j]
        rest = [c for m, c in enumerate(comps) if m not in (i, j)]
        new = [
            contract_quotient(ti, default_head_function(ti), [x]),
            contract_quotient(tj, default_head_function(tj), [y]),
            _join(ti.subtree(x), tj.subtree(y)),
        ]
    elif kind is MergeOpKind.SM3:
        i, x, y = operands
        t = comps[i]
        rest = [c for m, c in enumerate(comps) if m != i]
        new = [contract_quotient(t, default_head_function(t), [x, y]), _join(t.subtree(x), t.subtree(y))]
    else:
        raise ValueError(f"unknown kind {kind}")
    if any(all_traced(c) for c in new):
        return None
    return Workspace(rest + new, check=False)


@dataclass
class ContractionReport:
    n: int
    forests: int
    operations: int
    filtered: int
    mismatches: list = field(default_factory=list)
    traced_only_components: int = 0

    @property
    def passed(self) -> bool:
        return not self.mismatches and self.traced_only_components == 0

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "forests": self.forests,
            "operations": self.operations,
            "filtered": self.filtered,
            "traced_only_components": self.traced_only_components,
            "mismatches": self.mismatches,
            "pass": self.passed,
        }


def contraction_check(n: int | None = None, labels=None, kinds=ALL_KINDS, strict: bool = False,
                      cap: int = CONTRACTION_CAP) -> ContractionReport:
    """Compare projected contraction images with deletion images, per forest.

    With ``strict`` the first mismatch raises ``Mismatch``.
    """
    if labels is None:
        from .forest import default_labels

        labels = default_labels(n)
    labels = list(labels)
    check_cap(len(labels), cap)
    report = ContractionReport(len(labels), 0, 0, 0)
    config = GraphConfig()
    for f in enumerate_forests(labels):
        report.forests += 1
        deletion: Counter = Counter()
        projected: Counter = Counter()
        for kind, ops, _ks in operand_specs(f, kinds, config):
            report.operations += 1
            deletion[apply_op(f, kind, ops).code] += 1
            img = contraction_image(f, kind, ops)
            if img is None:
                report.filtered += 1
                continue
            report.traced_only_components += sum(all_traced(c) for c in img.components)
            projected[project_dc(img).code] += 1
        if deletion != projected:
            extra = projected - deletion
            missing = deletion - projected
            detail = {"forest": f.code, "extra": dict(extra), "missing": dict(missing)}
            report.mismatches.append(detail)
            if strict:
                raise Mismatch(f.code, "one-step image", str(detail))
    return report

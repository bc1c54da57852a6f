"""Command-line front end: ``mergedyn <command> [options]``.

Options can also come from a flat ``key=value`` file given with
``--config``; flags on the command line win over the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from collections import Counter
from pathlib import Path

import numpy as np

from . import acceptance
from .contraction import CONTRACTION_CAP, contraction_check
from .cost import CostKind, cost_table_csv, weighted_matrix
from .errors import CapExceeded, MergeDynError, MultipleCritical
from .forest import counting, default_labels, dynamic_partitions, enumerate_forests, partition_of
from .merge_graph import (
    GraphConfig,
    build_merge_graph,
    cap_limit,
    check_cap,
    density,
    period,
    sm21_balance,
    strongly_connected_components,
    verify_degrees,
)
from .partition_chain import build_partition_graph, lift_stationary, project, verify_p_symmetry
from .simulate import frequency_csv, run_replicas, tv_distance
from .spectral import entropy_rate, perron_frobenius, stationary, to_markov
from .tropical import (
    eigenbasis,
    partition_cost_matrix,
    predicted_orders,
    slope_estimate,
    weighted_class_stationary,
)

log = logging.getLogger("mergedyn")

DEFAULTS = {
    "n": 4,
    "labels": None,
    "edge_mode": "simple",
    "sister_cut": "allow",
    "kinds": "em,im,sm",
    "cost": "total",
    "t": 1e-4,
    "t_pair": "1e-6,1e-8",
    "normalization": "unit",
    "level": "partition",
    "graph": None,
    "tol": 1e-12,
    "format": "json",
    "steps": 1_000_000,
    "burn_in": 1000,
    "seed": 42,
    "replicas": 1,
    "workers": 1,
    "start": 0,
    "counts": False,
    "out": None,
    "report": None,
}

BOOL_KEYS = {"counts"}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse a flat key=value file; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def write_config(values: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in values.items() if v is not None)


def _coerce(key, value):
    if value is None:
        return None
    default = DEFAULTS[key]
    if key in BOOL_KEYS:
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, bool):
        return value
    if isinstance(default, int):
        return int(float(value))
    if isinstance(default, float):
        return float(value)
    return value


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge hard defaults, the config file, then explicit flags."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for key in DEFAULTS:
        if not hasattr(args, key):
            continue
        flag = getattr(args, key)
        if flag is not None and flag is not False:
            value = flag
        elif key in cfg:
            value = cfg[key]
        else:
            value = DEFAULTS[key]
        setattr(args, key, _coerce(key, value))
    if args.labels:
        labels = [s for s in str(args.labels).split(",") if s]
        args.labels = labels
        args.n = len(labels)
    else:
        args.labels = None
    if getattr(args, "sister_cut", "allow") not in ("allow", "forbid"):
        raise UsageError("sister-cut must be 'allow' or 'forbid'")
    if getattr(args, "edge_mode", "simple") not in ("simple", "ops"):
        raise UsageError("edge-mode must be 'simple' or 'ops'")
    return args


def _labels(args):
    return args.labels or default_labels(args.n)


def _config(args) -> GraphConfig:
    return GraphConfig(sister_cut=args.sister_cut == "allow", edge_mode=args.edge_mode)


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(acceptance._jsonable(obj), indent=1)


def _matrix_csv(names, rows) -> str:
    lines = ["," + ",".join(names)]
    for name, row in zip(names, rows):
        lines.append(name + "," + ",".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands

def cmd_enumerate(args) -> int:
    check_cap(args.n)
    forests = enumerate_forests(_labels(args))
    if args.counts:
        tally = Counter(str(partition_of(f)) for f in forests)
        rows = {str(p): {"enumerated": tally[str(p)], "predicted": counting(args.n, p).lam}
                for p in dynamic_partitions(args.n)}
        _emit(args, _dump({"n": args.n, "total": len(forests), "fibers": rows}))
    else:
        _emit(args, "\n".join(f.code for f in forests))
    return 0


def cmd_graph(args) -> int:
    g = build_merge_graph(_labels(args), kinds=args.kinds, config=_config(args))
    if args.format == "dot":
        _emit(args, g.to_dot())
    else:
        _emit(args, _dump(g.to_json()))
    return 0


def cmd_analyze(args) -> int:
    g = build_merge_graph(_labels(args), kinds=args.kinds, config=_config(args))
    cond = strongly_connected_components(g)
    report = {
        "n": g.n,
        "vertices": g.num_vertices,
        "edges": int(g.K.nnz),
        "operations": len(g.ops),
        "density": density(g) if g.num_vertices > 1 else None,
        "scc_count": cond.count,
        "closed_classes": [len(c) for c in cond.closed_classes()],
        "period": period(g) if cond.count == 1 else None,
    }
    if set(g.kinds) == set(acceptance.MergeOpKind):
        deg = verify_degrees(g)
        report["degrees_ok"] = deg["ok"]
        report["degree_mismatches"] = {k: len(v) for k, v in deg["mismatches"].items()}
        report["sm_in_report"] = deg["sm_in_diagnostic"][:20]
        report["sm_in_report_rows"] = len(deg["sm_in_diagnostic"])
        report["sm21"] = {k: v for k, v in sm21_balance(g).items() if k != "rows"}
    _emit(args, _dump(report))
    return 0 if report.get("degrees_ok", True) else 1


def _graph_from_json(path):
    data = json.loads(Path(path).read_text())
    m = len(data["vertices"])
    k = np.zeros((m, m))
    for e in data["edges"]:
        k[e["src"], e["dst"]] += e.get("mult", 1)
    return k, data["vertices"]


def cmd_spectral(args) -> int:
    if args.graph:
        k, names = _graph_from_json(args.graph)
        args.level = "full"
    elif args.level == "full":
        check_cap(args.n)
        g = build_merge_graph(_labels(args), config=_config(args))
        k = g.matrix().astype(float)
        names = [v.code for v in g.vertices]
    else:
        check_cap(args.n)
        pg = build_partition_graph(args.n, edge_mode=args.edge_mode, sister_cut=args.sister_cut == "allow")
        k = pg.KR.astype(float)
        names = [str(p) for p in pg.vertices]
    pf = perron_frobenius(k, tol=args.tol, mode=args.normalization)
    chain = to_markov(k, pf)
    pi = stationary(chain)
    report = {
        "level": args.level,
        "lambda": pf.lam,
        "residual": max(pf.residual_right, pf.residual_left),
        "normalization": pf.mode,
        "ln_lambda": math.log(pf.lam),
        "entropy_rate": entropy_rate(chain, pi),
        "eta": dict(zip(names, pf.eta.tolist())),
        "psi": dict(zip(names, pf.psi.tolist())),
        "stationary": dict(zip(names, pi.tolist())),
    }
    if args.level == "partition" and not args.graph:
        lifted = lift_stationary(pg.KR, pg.c, pf)
        report["class_value"] = dict(zip(names, lifted.class_value.tolist()))
        report["class_mass"] = dict(zip(names, lifted.class_mass.tolist()))
    _emit(args, _dump(report))
    return 0


def cmd_project(args) -> int:
    g = build_merge_graph(_labels(args), config=_config(args))
    pg = build_partition_graph(g.n, edge_mode=args.edge_mode, graph=g)
    proj = project(g)
    rep = verify_p_symmetry(g)
    names = [str(p) for p in pg.vertices]
    report = {
        "n": g.n,
        "edge_mode": args.edge_mode,
        "partitions": names,
        "fiber_sizes": proj.c.tolist(),
        "KR": pg.KR.tolist(),
        "KL": [[str(x) for x in row] for row in pg.KL],
        "fiber_edge_totals": proj.totals.tolist(),
        "representative_matches_full": all(proj.KR[i][j] == pg.KR[i, j]
                                           for i in range(len(names)) for j in range(len(names))),
        "p_symmetry": {"pass": rep.passed, "failing_fibers": sorted(rep.failing_fibers),
                       "out_failures": len(rep.out_failures), "in_failures": len(rep.in_failures)},
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "KR.csv").write_text(_matrix_csv(names, pg.KR.tolist()))
        (out / "KL.csv").write_text(_matrix_csv(names, [[str(x) for x in r] for r in pg.KL]))
        (out / "p_symmetry.json").write_text(_dump(report))
    else:
        sys.stdout.write(_dump(report) + "\n")
    return 0


def cmd_weight(args) -> int:
    check_cap(args.n)
    kind = CostKind.parse(args.cost)
    if args.format == "table":
        _emit(args, cost_table_csv())
        return 0
    pg = build_partition_graph(args.n, edge_mode=args.edge_mode)
    wm = weighted_matrix(pg, kind, args.t)
    names = [str(p) for p in pg.vertices]
    if args.format == "csv":
        _emit(args, _matrix_csv(names, wm.dense().tolist()))
        return 0
    mass = weighted_class_stationary(pg, kind, args.t)
    report = {
        "cost": kind.value,
        "t": args.t,
        "matrix": wm.dense().tolist(),
        "exponents": {f"{names[i]}->{names[j]}": [str(c) for c in cs] for (i, j), cs in sorted(wm.exponents.items())},
        "class_mass": dict(zip(names, mass.tolist())),
    }
    _emit(args, _dump(report))
    return 0


def cmd_tropical(args) -> int:
    check_cap(args.n)
    kind = CostKind.parse(args.cost)
    pg = build_partition_graph(args.n)
    names = [str(p) for p in pg.vertices]
    t1, t2 = (float(x) for x in str(args.t_pair).split(","))
    slopes = slope_estimate(weighted_class_stationary(pg, kind, t1),
                            weighted_class_stationary(pg, kind, t2), t1, t2)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = predicted_orders(args.n, kind, pg).to_json()
    except MultipleCritical as exc:
        basis = eigenbasis(partition_cost_matrix(pg, kind))
        log.warning("%s; reporting one exponent vector per critical class", exc)
        report = {
            "rho_min": float(basis.rho),
            "critical": [names[v] for v in basis.critical.vertices],
            "exponents_by_root": {r: {k: float(v) for k, v in e.items()} for r, e in exc.orders.items()},
        }
    report["slopes"] = dict(zip(names, slopes.tolist()))
    report["t_pair"] = [t1, t2]
    _emit(args, _dump(report))
    return 0


def cmd_simulate(args) -> int:
    g = build_merge_graph(_labels(args), config=_config(args))
    k = g.matrix().astype(float)
    pf = perron_frobenius(k)
    chain = to_markov(k, pf)
    pi = stationary(chain)
    traj = run_replicas(chain, args.start, args.steps, args.seed, replicas=args.replicas,
                        burn_in=args.burn_in, workers=args.workers, chain_id=f"hamc-{g.n}")
    _emit(args, frequency_csv(traj, pi, [v.code for v in g.vertices]))
    log.info("tv distance %.6f", tv_distance(traj.empirical, pi))
    return 0


def cmd_contraction_check(args) -> int:
    check_cap(args.n, min(CONTRACTION_CAP, cap_limit()))
    rep = contraction_check(labels=_labels(args), cap=min(CONTRACTION_CAP, cap_limit()))
    _emit(args, _dump(rep.to_json()))
    return 0 if rep.passed else 1


def cmd_verify(args) -> int:
    check_cap(args.n)
    results = []
    report_path = args.report
    try:
        results = acceptance.run_all([args.n], sister_cut=args.sister_cut == "allow")
    finally:
        payload = {"n": args.n, "sister_cut": args.sister_cut,
                   "checks": [r.to_json() for r in results],
                   "pass": bool(results) and all(r.ok for r in results)}
        if report_path:
            Path(report_path).write_text(_dump(payload))
    for r in results:
        sys.stdout.write(r.line() + "\n")
    failed = [r for r in results if not r.ok]
    sys.stdout.write(f"{len(results) - len(failed)}/{len(results)} checks ok\n")
    if not report_path:
        sys.stdout.write(_dump(payload) + "\n")
    return 0 if not failed else 1


COMMANDS = {
    "enumerate": cmd_enumerate,
    "graph": cmd_graph,
    "analyze": cmd_analyze,
    "spectral": cmd_spectral,
    "project": cmd_project,
    "weight": cmd_weight,
    "tropical": cmd_tropical,
    "simulate": cmd_simulate,
    "contraction-check": cmd_contraction_check,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--n", type=int, help="number of leaves (default 4)")
    common.add_argument("--labels", help="comma-separated leaf labels; sets n")
    common.add_argument("--edge-mode", dest="edge_mode", choices=("simple", "ops"))
    common.add_argument("--sister-cut", dest="sister_cut", choices=("allow", "forbid"))
    common.add_argument("--out", help="output file (directory for project)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mergedyn", description="Merge dynamics on workspaces of binary trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="list forests or fiber counts")
    p.add_argument("--counts", action="store_true", default=None)

    for name, helptext in (("graph", "export the Merge graph"), ("analyze", "structural checks")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--kinds", help="operation kinds, e.g. em,im,sm")
        if name == "graph":
            p.add_argument("--format", choices=("json", "dot"))

    p = sub.add_parser("spectral", parents=[common], help="Perron-Frobenius data")
    p.add_argument("--normalization", choices=("unit", "pairing"))
    p.add_argument("--level", choices=("full", "partition"))
    p.add_argument("--graph", help="graph JSON written by the graph command")
    p.add_argument("--tol", type=float)

    sub.add_parser("project", parents=[common], help="reduced matrices and p-symmetry")

    p = sub.add_parser("weight", parents=[common], help="cost-weighted partition matrix")
    p.add_argument("--cost")
    p.add_argument("--t", type=float)
    p.add_argument("--format", choices=("json", "csv", "table"))

    p = sub.add_parser("tropical", parents=[common], help="min-plus asymptotics")
    p.add_argument("--cost")
    p.add_argument("--t-pair", dest="t_pair")

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo run of the maximal-entropy chain")
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--start", type=int)

    sub.add_parser("contraction-check", parents=[common], help="contraction vs deletion one-step images")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--report", help="write the JSON report here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = resolve(args)
        return COMMANDS[args.command](args)
    except (CapExceeded, UsageError, FileNotFoundError) as exc:
        sys.stderr.write(f"mergedyn: {exc}\n")
        return 2
    except MergeDynError as exc:
        sys.stderr.write(f"mergedyn: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

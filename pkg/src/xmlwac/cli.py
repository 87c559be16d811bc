"""Command-line front end.

Exit codes: 0 ok/consistent, 1 analysis negative (inconsistent, not
quasiconsistent, witness found), 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from .analysis import CONDITION, check_consistency, lpce
from .errors import InternalError, XmlwacError
from .oracle import SearchBounds, digraph_reduction, find_witness, parse_digraph
from .policy import Policy, parse_policy, render_policy, valid_set
from .repair import EDGE_TIEBREAKS, INSDEL_TIEBREAKS, Tiebreak, repair
from .schema import DTD, dtd_graph, parse_dtd, render_dtd

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


# --- report rendering ------------------------------------------------------------

def render_text(report: dict, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    for key, value in report.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(render_text(value, indent + 1))
        elif isinstance(value, list):
            lines.append(f"{pad}{key}: {len(value)}" if not value or isinstance(value[0], dict)
                         else f"{pad}{key}:")
            for item in value:
                if isinstance(item, dict):
                    lines.append(f"{pad}  -")
                    lines.append(render_text(item, indent + 2))
                else:
                    lines.append(f"{pad}  - {item}")
        else:
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{pad}{key}: {value}")
    return "\n".join(x for x in lines if x)


def emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report, indent=2, ensure_ascii=False))
    else:
        print(render_text(report))


def _digest(path: str) -> dict:
    data = Path(path).read_bytes()
    return {"path": path, "sha256": hashlib.sha256(data).hexdigest()}


def _load_dtd(path: str) -> DTD:
    return parse_dtd(Path(path).read_text(encoding="utf-8"), source=path)


def _load(args) -> tuple[DTD, Policy, str]:
    d = _load_dtd(args.dtd)
    p, mode = parse_policy(Path(args.policy).read_text(encoding="utf-8"), d, source=args.policy)
    return d, p, mode


def _inputs(args) -> dict:
    out = {"dtd": _digest(args.dtd)}
    if getattr(args, "policy", None):
        out["policy"] = _digest(args.policy)
    return out


def _violation_dict(v) -> dict:
    out = {"condition": v.condition, "kind": v.kind, "rule": v.ctx}
    if v.child:
        out["child"] = v.child
    if v.edge:
        out["edge"] = f"({v.edge[0]},{v.edge[1]})"
    if v.vertex:
        out["vertex"] = v.vertex
    if v.path:
        out["path"] = " -> ".join(v.path)
    if v.witness is not None:
        out["forbidden"] = str(v.witness)
    return out


def _write_policy(path: str, p: Policy, mode: str) -> None:
    Path(path).write_text(render_policy(p, mode), encoding="utf-8")


# --- commands -----------------------------------------------------------------

def cmd_check(args) -> tuple[int, dict]:
    d, p, mode = _load(args)
    verdict = check_consistency(d, p)
    groups = {}
    for kind, cond in sorted(CONDITION.items(), key=lambda kv: kv[1]):
        groups[f"condition {cond} ({kind})"] = len(verdict.by_kind(kind))
    report = {
        "command": "check",
        "inputs": _inputs(args),
        "mode": mode,
        "consistent": verdict.consistent,
        "violation_counts": groups,
        "violations": [_violation_dict(v) for v in verdict.violations],
    }
    return (EXIT_OK if verdict.consistent else EXIT_NEGATIVE), report


def cmd_extend(args) -> tuple[int, dict]:
    d, p, mode = _load(args)
    res = lpce(p)
    report = {"command": "extend", "inputs": _inputs(args),
              "quasiconsistent": res.quasiconsistent}
    if not res.quasiconsistent:
        report["witness"] = str(res.witness)
        report["conflicts"] = [str(u) for u in res.conflicts]
        return EXIT_NEGATIVE, report
    q = res.policy
    report["allowed"] = len(q.allow)
    report["added"] = [str(u) for u in sorted(q.allow - p.allow)]
    if args.out:
        _write_policy(args.out, q, "total")
        report["output"] = args.out
    else:
        report["policy"] = render_policy(q, "total").splitlines()
    return EXIT_OK, report


def cmd_repair(args) -> tuple[int, dict]:
    d, p, mode = _load(args)
    total = args.total if args.total is not None else (mode == "total")
    tb = Tiebreak(insdel=args.tiebreak, edge=args.edge_tiebreak, seed=args.seed)
    res = repair(d, p, total=total, strategy=args.strategy, mnj=args.mnj, tiebreak=tb)
    report = {
        "command": "repair",
        "inputs": _inputs(args),
        "strategy": args.strategy,
        "mnj": res.mnj,
        "tiebreak": {"insdel": tb.insdel, "edge": tb.edge, "seed": tb.seed},
        "repair": "total" if total else "partial",
        "removed_count": len(res.removed),
        "removed": [str(u) for u in res.removed],
        "passes": dict(sorted(res.passes.items())) or "none",
        "rescans": res.rescans,
        "consistent_after": True,
    }
    out_mode = "total" if total else "partial"
    if args.out:
        _write_policy(args.out, res.repaired, out_mode)
        report["output"] = args.out
    return EXIT_OK, report


def cmd_oracle(args) -> tuple[int, dict]:
    d, p, mode = _load(args)
    values = tuple(v for v in args.values.split(",")) if args.values else ("s", "t")
    bounds = SearchBounds(args.max_nodes, args.max_seq, args.max_insert, values)
    res = find_witness(d, p, bounds)
    report = {
        "command": "oracle",
        "inputs": _inputs(args),
        "bounds": {"max_nodes": bounds.max_tree_nodes, "max_seq": bounds.max_seq_len,
                   "max_insert": bounds.max_insert_nodes,
                   "values": ",".join(bounds.value_alphabet)},
        "truncated": res.truncated,
        "trees_checked": res.trees_checked,
    }
    if res.witness is None:
        report["result"] = "no witness within bounds"
        return EXIT_OK, report
    report["result"] = "witness found"
    report["witness"] = res.witness.lines()
    return EXIT_NEGATIVE, report


def cmd_validate_dtd(args) -> tuple[int, dict]:
    d = _load_dtd(args.dtd)
    g = dtd_graph(d)
    return EXIT_OK, {
        "command": "validate-dtd",
        "inputs": _inputs(args),
        "root": d.root,
        "elements": len(d.elements),
        "edges": len(g.edges),
        "valid_uats": len(valid_set(d)),
        "rules": render_dtd(d).splitlines()[1:],
    }


def cmd_validate_policy(args) -> tuple[int, dict]:
    d, p, mode = _load(args)
    return EXIT_OK, {
        "command": "validate-policy",
        "inputs": _inputs(args),
        "mode": mode,
        "allowed": len(p.allow),
        "forbidden": len(p.forbid),
        "unspecified": len(valid_set(d)) - len(p.allow) - len(p.forbid),
    }


def cmd_reduce(args) -> tuple[int, dict]:
    vertices, edges = parse_digraph(Path(args.digraph).read_text(encoding="utf-8"))
    d, p = digraph_reduction(vertices, edges)
    Path(args.dtd_out).write_text(render_dtd(d), encoding="utf-8")
    _write_policy(args.policy_out, p, "total")
    return EXIT_OK, {
        "command": "reduce",
        "inputs": {"digraph": _digest(args.digraph)},
        "vertices": len(vertices),
        "edges": len(edges),
        "dtd": args.dtd_out,
        "policy": args.policy_out,
    }


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmlwac",
        description="Consistency checking, extension and repair of XML write-access policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, policy=True):
        sp.add_argument("dtd", help="DTD file")
        if policy:
            sp.add_argument("policy", help="policy file")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--timing", action="store_true",
                        help="add elapsed time to the report (makes output nondeterministic)")

    sp = sub.add_parser("check", help="decide consistency and list violations")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("extend", help="least-privilege consistent total extension")
    common(sp)
    sp.add_argument("--out", help="write the extended policy here")
    sp.set_defaults(func=cmd_extend)

    sp = sub.add_parser("repair", help="revoke allowed UATs until consistent")
    common(sp)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--total", dest="total", action="store_true", default=None,
                      help="forbid everything no longer allowed (default for total policies)")
    mode.add_argument("--partial", dest="total", action="store_false",
                      help="keep the forbid set unchanged")
    sp.add_argument("--strategy", choices=("naive", "setcover"), default="setcover")
    sp.add_argument("--mnj", type=int, default=1,
                    help="justifications kept per edge or vertex (setcover)")
    sp.add_argument("--tiebreak", choices=INSDEL_TIEBREAKS, default="prefer-delete",
                    help="which of insert/delete to revoke")
    sp.add_argument("--edge-tiebreak", choices=EDGE_TIEBREAKS, default="lex",
                    help="which edge of an offending pair to delete")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write the repaired policy here")
    sp.set_defaults(func=cmd_repair)

    sp = sub.add_parser("oracle", help="bounded brute-force search for a witness")
    common(sp)
    sp.add_argument("--max-nodes", type=int, default=8)
    sp.add_argument("--max-seq", type=int, default=3)
    sp.add_argument("--max-insert", type=int, default=3)
    sp.add_argument("--values", default="s,t", help="comma-separated text values")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("validate-dtd", help="parse and summarise a DTD")
    common(sp, policy=False)
    sp.set_defaults(func=cmd_validate_dtd)

    sp = sub.add_parser("validate-policy", help="parse and summarise a policy")
    common(sp)
    sp.set_defaults(func=cmd_validate_policy)

    sp = sub.add_parser("reduce", help="encode a digraph as a DTD and total policy")
    sp.add_argument("digraph")
    sp.add_argument("--dtd-out", required=True)
    sp.add_argument("--policy-out", required=True)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.add_argument("--timing", action="store_true")
    sp.set_defaults(func=cmd_reduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        code, report = args.func(args)
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (XmlwacError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.timing:
        report["elapsed_ms"] = round((time.perf_counter() - start) * 1000, 3)
    emit(report, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Brute-force ground truth for small instances.

* :func:`find_witness` searches bounded trees and update sequences for a
  forbidden update that allowed updates reproduce.
* :func:`expand_violation` turns an analysis violation into such a witness
  directly.
* :func:`minimal_repair_bruteforce` computes an optimal allow-shrinking repair.
* :func:`digraph_reduction` encodes a digraph as a DTD and policy whose
  optimal repair is the minimum edge deletion making the digraph transitive.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence as Seq

from .analysis import FORBIDDEN_TRANSITIVITY, INSDEL, Violation, check_consistency, find_violations
from .errors import InputError, InstanceTooLargeError, InternalError
from .policy import UAT, Policy, is_allowed_seq, matches, valid_set
from .schema import DTD, STR, Choice, Sequence, Star, Str, dtd_path
from .tree import (XMLTree, canon, enumerate_instances, from_shape, has_larger_instances,
                   minimal_shape, relabel)
from .updates import (Delete, Insert, ReplaceText, ReplaceTree, UpdateOp, apply, apply_seq,
                      format_op, format_seq)


@dataclass(frozen=True)
class SearchBounds:
    max_tree_nodes: int = 8
    max_seq_len: int = 3
    max_insert_nodes: int = 3
    value_alphabet: tuple = ("s", "t")

    def __post_init__(self):
        object.__setattr__(self, "value_alphabet", tuple(sorted(set(self.value_alphabet))))
        if min(self.max_tree_nodes, self.max_seq_len, self.max_insert_nodes) < 1:
            raise ValueError("search bounds must be >= 1")
        if not self.value_alphabet:
            raise ValueError("value alphabet must be nonempty")


@dataclass(frozen=True)
class Witness:
    tree: XMLTree
    forbidden_op: UpdateOp
    allowed_seq: tuple
    forbidden_uat: UAT | None = None

    def lines(self) -> list[str]:
        return ([f"tree: {canon(self.tree)}",
                 f"forbidden: {format_op(self.forbidden_op, self.tree)}"
                 + (f" matches {self.forbidden_uat}" if self.forbidden_uat else "")]
                + [f"allowed[{i}]: {s}" for i, s in
                   enumerate(format_seq(self.allowed_seq, self.tree), start=1)])


@dataclass(frozen=True)
class SearchResult:
    witness: Witness | None
    truncated: bool
    trees_checked: int = 0
    states: int = 0


def verify_witness(d: DTD, p: Policy, w: Witness) -> bool:
    """All three conditions: the op is forbidden (and changes the tree), the
    sequence is allowed, and both reach isomorphic trees."""
    t = w.tree
    if not any(matches(w.forbidden_op, u, t, d) for u in p.forbid):
        return False
    target = canon(apply(w.forbidden_op, t))
    if target == canon(t) or not w.allowed_seq:
        return False
    if not is_allowed_seq(p, t, w.allowed_seq):
        return False
    return canon(apply_seq(w.allowed_seq, t)) == target


# --- bounded transition system ---------------------------------------------

class TransitionSystem:
    """Every update that matches some valid UAT, per tree, up to isomorphism.

    Policy independent, so one instance can serve many policies over the
    same DTD and bounds."""

    def __init__(self, d: DTD, bounds: SearchBounds = SearchBounds()):
        self.d = d
        self.bounds = bounds
        self._inst: dict[str, tuple[XMLTree, ...]] = {}
        self._rep: dict[str, XMLTree] = {}
        self._trans: dict[str, tuple] = {}
        self.cut_inserts = False

    def trees(self) -> list[XMLTree]:
        b = self.bounds
        out = list(enumerate_instances(self.d, self.d.root, b.max_tree_nodes, b.value_alphabet))
        for t in out:
            self._rep.setdefault(canon(t), t)
        return out

    def add_tree(self, t: XMLTree) -> None:
        self._rep.setdefault(canon(t), t)

    def trees_cut(self) -> bool:
        b = self.bounds
        return has_larger_instances(self.d, self.d.root, b.max_tree_nodes, b.value_alphabet)

    def instances(self, a: str) -> tuple[XMLTree, ...]:
        if a not in self._inst:
            b = self.bounds
            self._inst[a] = tuple(enumerate_instances(self.d, a, b.max_insert_nodes,
                                                      b.value_alphabet))
            if has_larger_instances(self.d, a, b.max_insert_nodes, b.value_alphabet):
                self.cut_inserts = True
        return self._inst[a]

    def ops(self, t: XMLTree) -> list[tuple[UAT, UpdateOp]]:
        """Concrete ops on ``t`` matching a valid UAT, deterministic order."""
        d, out = self.d, []
        start = t.max_id + 1
        for n in sorted(t.nodes):
            a = t.label(n)
            if a == STR:
                continue
            rg = d.rule(a)
            if isinstance(rg, Star):
                for u in self.instances(rg.child):
                    out.append((UAT.insert(a, rg.child), Insert(n, relabel(u, start))))
                for c in t.children(n):
                    out.append((UAT.delete(a, rg.child), Delete(c)))
            elif isinstance(rg, Choice):
                for c in t.children(n):
                    for alt in sorted(rg.alternatives):
                        if alt == t.label(c):
                            continue
                        for u in self.instances(alt):
                            out.append((UAT.replace(a, t.label(c), alt),
                                        ReplaceTree(c, relabel(u, start))))
            elif isinstance(rg, Str):
                for c in t.children(n):
                    for v in self.bounds.value_alphabet:
                        out.append((UAT.text(a), ReplaceText(c, v)))
        return out

    def transitions(self, c: str) -> tuple:
        """``(uat, result canon, result size)`` triples for the tree ``c``."""
        if c not in self._trans:
            t = self._rep[c]
            seen = set()
            out = []
            for u, op in self.ops(t):
                r = apply(op, t)
                rc = canon(r)
                if (u, rc) in seen:
                    continue
                seen.add((u, rc))
                self._rep.setdefault(rc, r)
                out.append((u, rc, len(r)))
            self._trans[c] = tuple(sorted(out, key=lambda x: (x[0], x[1])))
        return self._trans[c]

    def concrete_step(self, t: XMLTree, uat: UAT, target: str) -> UpdateOp:
        for u, op in self.ops(t):
            if u == uat and canon(apply(op, t)) == target:
                return op
        raise InternalError("cannot replay an abstract transition")


def find_witness(d: DTD, p: Policy, bounds: SearchBounds = SearchBounds(),
                 system: TransitionSystem | None = None,
                 trees: Iterable[XMLTree] | None = None,
                 only: Iterable[UAT] | None = None) -> SearchResult:
    """Least witness within bounds: trees by size then canonical form, then
    forbidden op by (UAT, result), then a shortest allowed sequence.

    ``trees`` replaces the enumerated start trees and ``only`` restricts the
    forbidden UATs considered; both narrow the search to a scenario."""
    ts = system if system is not None and system.bounds == bounds and system.d == d \
        else TransitionSystem(d, bounds)
    allow, forbid = p.allow, p.forbid
    if only is not None:
        forbid = forbid & frozenset(only)
    states = 0
    if trees is None:
        truncated = ts.trees_cut()
        trees = ts.trees()
    else:
        truncated = True
        trees = list(trees)
        for t in trees:
            ts.add_tree(t)
    for count, t in enumerate(trees, start=1):
        c0 = canon(t)
        targets = [(u, rc) for u, rc, _ in ts.transitions(c0) if u in forbid and rc != c0]
        if not targets:
            continue
        depth = {c0: 0}
        parent: dict[str, tuple[str, UAT]] = {}
        frontier = [c0]
        for k in range(1, bounds.max_seq_len + 1):
            nxt = []
            for c in frontier:
                for u, rc, size in ts.transitions(c):
                    if u not in allow:
                        continue
                    if size > bounds.max_tree_nodes:
                        truncated = True
                        continue
                    if rc not in depth:
                        depth[rc] = k
                        parent[rc] = (c, u)
                        nxt.append(rc)
            frontier = nxt
        if frontier:
            truncated = True
        states += len(depth)
        hits = [(u, rc) for u, rc in targets if rc in depth]
        if not hits:
            continue
        fu, frc = hits[0]
        chain = []
        c = frc
        while c != c0:
            pc, u = parent[c]
            chain.append((u, c))
            c = pc
        chain.reverse()
        seq, cur = [], t
        for u, rc in chain:
            op = ts.concrete_step(cur, u, rc)
            seq.append(op)
            cur = apply(op, cur)
        fop = ts.concrete_step(t, fu, frc)
        w = Witness(t, fop, tuple(seq), fu)
        if not verify_witness(d, p, w):
            raise InternalError("oracle produced a witness that does not replay")
        return SearchResult(w, truncated or ts.cut_inserts, count, states)
    return SearchResult(None, truncated or ts.cut_inserts, len(trees), states)


# --- violation expansion -------------------------------------------------------

def _leaf_shape(d: DTD, w: UAT) -> tuple:
    """Instance of ``w.ctx`` on which ``w`` has a matching, effective op."""
    c = w.ctx
    if w.kind == "insert":
        return (c, ())
    if w.kind == "delete":
        return (c, (minimal_shape(d, w.first),))
    if w.kind == "replace":
        return (c, (minimal_shape(d, w.first),))
    return (c, ((STR, ""),))


def _path_shape(d: DTD, labels: Seq[str], leaf: tuple) -> tuple:
    """Shape along ``labels`` (top first) ending in ``leaf``; every other
    child is minimal."""
    if len(labels) == 1:
        return leaf
    a, nxt = labels[0], labels[1]
    inner = _path_shape(d, labels[1:], leaf)
    rg = d.rule(a)
    if isinstance(rg, Sequence):
        kids = tuple(inner if b == nxt else minimal_shape(d, b) for b in sorted(rg.children))
    else:
        kids = (inner,)
    return (a, kids)


def _walk(t: XMLTree, labels: Seq[str]) -> list[int]:
    nodes = [t.root]
    for lab in labels[1:]:
        nodes.append(next(c for c in t.children(nodes[-1]) if t.label(c) == lab))
    return nodes


def _forbidden_op(d: DTD, t: XMLTree, node: int, w: UAT, fresh: int) -> UpdateOp:
    if w.kind == "insert":
        return Insert(node, from_shape(minimal_shape(d, w.first), fresh))
    child = t.children(node)[0]
    if w.kind == "delete":
        return Delete(child)
    if w.kind == "replace":
        return ReplaceTree(child, from_shape(minimal_shape(d, w.second), fresh))
    return ReplaceText(child, "t")


def expand_violation(d: DTD, p: Policy, v: Violation) -> Witness:
    """Concrete tree, forbidden op and allowed sequence for one violation.
    Requires the violation's context to be reachable from the root."""
    root_path = dtd_path(d, d.root, v.ctx)
    if root_path is None:
        raise InputError(f"{v.ctx} is not reachable from the root {d.root}")
    if v.kind == FORBIDDEN_TRANSITIVITY:
        bi, bj = v.edge
        t = from_shape(_path_shape(d, root_path + (bi,), minimal_shape(d, bi)))
        node = _walk(t, root_path + (bi,))[-1]
        fresh = t.max_id + 1
        fop = ReplaceTree(node, from_shape(minimal_shape(d, bj), fresh))
        seq, cur = [], t
        for nxt in v.path[1:]:
            fresh = max(fresh, cur.max_id) + 1
            op = ReplaceTree(node, from_shape(minimal_shape(d, nxt), fresh))
            seq.append(op)
            node = op.subtree.root
            cur = apply(op, cur)
        return Witness(t, fop, tuple(seq), UAT.replace(v.ctx, bi, bj))
    top = v.child if v.kind == INSDEL else v.vertex
    w = v.witness
    labels = root_path + dtd_path(d, top, w.ctx)
    t = from_shape(_path_shape(d, labels, _leaf_shape(d, w)))
    walk = _walk(t, labels)
    top_node = walk[len(root_path)]
    ctx_node = walk[len(root_path) - 1]
    fop = _forbidden_op(d, t, walk[-1], w, t.max_id + 1)
    after = apply(fop, t)
    edited = after.subtree(top_node)
    fresh = max(t.max_id, after.max_id) + 1
    if v.kind == INSDEL:
        seq = (Delete(top_node), Insert(ctx_node, relabel(edited, fresh)))
        return Witness(t, fop, seq, w)
    seq, cur, node = [], t, top_node
    for nxt in v.path[1:-1]:
        op = ReplaceTree(node, from_shape(minimal_shape(d, nxt), fresh))
        fresh = op.subtree.max_id + 1
        seq.append(op)
        node = op.subtree.root
        cur = apply(op, cur)
    seq.append(ReplaceTree(node, relabel(edited, fresh)))
    return Witness(t, fop, tuple(seq), w)


# --- minimal repairs ------------------------------------------------------------

@dataclass(frozen=True)
class MinimalRepair:
    k: int
    removed: tuple
    method: str


def _repaired(p: Policy, removed: frozenset, total: bool) -> Policy:
    allow = p.allow - removed
    if total:
        return Policy(p.dtd, allow, frozenset(valid_set(p.dtd)) - allow)
    return Policy(p.dtd, allow, p.forbid)


def _violation_support(v: Violation) -> list[UAT]:
    """Allowed UATs the violation depends on: dropping none keeps it alive."""
    if v.kind == INSDEL:
        return [UAT.delete(v.ctx, v.child), UAT.insert(v.ctx, v.child)]
    path = v.path
    return sorted(UAT.replace(v.ctx, path[i], path[i + 1]) for i in range(len(path) - 1))


def minimal_repair_bruteforce(d: DTD, p: Policy, bounds: SearchBounds | None = None,
                              total: bool = True, method: str = "subsets",
                              limit: int = 20) -> MinimalRepair:
    """Smallest set of allowed UATs whose removal yields a consistent policy.

    ``subsets`` enumerates removal sets by size (needs ``|allow| <= limit``);
    consistency is decided by the analysis, or by :func:`find_witness` when
    ``bounds`` is given.  ``branch`` is an exact bounded search tree: some
    UAT supporting any remaining violation must be removed, so it branches
    on the support of the smallest violation with iterative deepening."""
    if method == "subsets":
        allow = sorted(p.allow)
        if len(allow) > limit:
            raise InstanceTooLargeError(f"{len(allow)} allowed UATs exceed the limit of {limit}")
        ts = TransitionSystem(d, bounds) if bounds is not None else None

        def ok(q: Policy) -> bool:
            if bounds is None:
                return check_consistency(d, q).consistent
            return find_witness(d, q, bounds, ts).witness is None

        for k in range(len(allow) + 1):
            for combo in itertools.combinations(allow, k):
                if ok(_repaired(p, frozenset(combo), total)):
                    return MinimalRepair(k, combo, method)
        raise InternalError("removing every allowed UAT must give a consistent policy")
    if method != "branch":
        raise ValueError(f"unknown method {method!r}")
    if bounds is not None:
        raise ValueError("the branch method decides consistency analytically")

    failed: set[tuple[frozenset, int]] = set()

    def search(removed: frozenset, k: int) -> frozenset | None:
        q = _repaired(p, removed, total)
        vs = find_violations(d, q.allow, q.forbid)
        if not vs:
            return removed
        if k == 0 or (removed, k) in failed:
            return None
        support = min((_violation_support(v) for v in vs), key=len)
        for u in support:
            res = search(removed | {u}, k - 1)
            if res is not None:
                return res
        failed.add((removed, k))
        return None

    for k in range(len(p.allow) + 1):
        res = search(frozenset(), k)
        if res is not None:
            return MinimalRepair(len(res), tuple(sorted(res)), method)
    raise InternalError("removing every allowed UAT must give a consistent policy")


# --- digraph reduction ----------------------------------------------------------

def parse_digraph(text: str) -> tuple[tuple[str, ...], frozenset]:
    """``digraph`` header, then ``u -> v`` edge lines or bare vertex names."""
    vertices: set[str] = set()
    edges: set[tuple[str, str]] = set()
    header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header:
            if line != "digraph":
                raise InputError("expected header 'digraph'", line=lineno)
            header = True
            continue
        m = re.fullmatch(r"([A-Za-z0-9_]+)\s*(?:->\s*([A-Za-z0-9_]+))?", line)
        if not m:
            raise InputError(f"cannot parse {line!r}", line=lineno)
        a, b = m.groups()
        vertices.add(a)
        if b is not None:
            vertices.add(b)
            edges.add((a, b))
    if not header:
        raise InputError("expected header 'digraph'", line=1)
    return tuple(sorted(vertices)), frozenset(edges)


def digraph_reduction(vertices: Iterable[str], edges: Iterable[tuple[str, str]]
                      ) -> tuple[DTD, Policy]:
    """``Ctx -> v1 + ... + vn``, ``vi -> #str``; allow the edges as replaces
    and every text edit; forbid the rest."""
    vs = tuple(sorted(set(vertices)))
    es = frozenset(edges)
    for a, b in es:
        if a == b:
            raise InputError(f"self-loop on {a!r} is not allowed")
        if a not in vs or b not in vs:
            raise InputError(f"edge ({a},{b}) uses an unknown vertex")
    if len(vs) < 2:
        raise InputError("the digraph needs at least two vertices")
    ctx = next(n for n in ("A", "Ctx", "Root") + tuple(f"A{i}" for i in range(len(vs) + 1))
               if n not in vs)
    rules = {ctx: Choice(vs)}
    rules.update({v: Str() for v in vs})
    d = DTD(rules, ctx)
    allow = {UAT.replace(ctx, a, b) for a, b in es} | {UAT.text(v) for v in vs}
    return d, Policy.total(d, allow)

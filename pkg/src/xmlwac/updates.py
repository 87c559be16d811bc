"""Atomic update operations on unordered trees and their normal form.

Four operations are supported: ``Insert`` (insert-into), ``ReplaceTree``,
``ReplaceText`` and ``Delete``.  Delete and ReplaceTree remove the target
node together with all its descendants.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Sequence as Seq, Union

from .errors import InvalidUpdateError, TreeSyntaxError
from .schema import STR
from .tree import XMLTree, canon, fresh_copy, from_shape, parse_shape, relabel


@dataclass(frozen=True)
class Insert:
    target: int
    subtree: XMLTree


@dataclass(frozen=True)
class ReplaceTree:
    target: int
    subtree: XMLTree


@dataclass(frozen=True)
class ReplaceText:
    target: int
    text: str


@dataclass(frozen=True)
class Delete:
    target: int


UpdateOp = Union[Insert, ReplaceTree, ReplaceText, Delete]
UpdateSeq = tuple  # tuple[UpdateOp, ...]


def _invalid_reason(op: UpdateOp, t: XMLTree) -> str | None:
    n = op.target
    if n not in t:
        return f"target node {n} is not in the tree"
    if isinstance(op, (Insert, ReplaceTree)):
        if op.subtree.nodes & t.nodes:
            return "inserted tree shares node ids with the target tree"
    if isinstance(op, (ReplaceTree, Delete)) and n == t.root:
        return "the root cannot be deleted or replaced"
    if isinstance(op, ReplaceText) and t.label(n) != STR:
        return f"text replacement needs a #str node, node {n} is {t.label(n)!r}"
    return None


def is_valid_op(op: UpdateOp, t: XMLTree) -> bool:
    return _invalid_reason(op, t) is None


def _graft(t: XMLTree, labels: dict, kids: dict, values: dict,
           parent: int, u: XMLTree) -> None:
    labels.update(u.labels)
    values.update(u.values)
    kids.update(u.kids)
    kids[parent] = kids.get(parent, ()) + (u.root,)


def _drop(t: XMLTree, n: int, labels: dict, kids: dict, values: dict) -> None:
    for m in t.descendants(n):
        del labels[m]
        kids.pop(m, None)
        values.pop(m, None)
    p = t.parent(n)
    rest = tuple(c for c in kids[p] if c != n)
    if rest:
        kids[p] = rest
    else:
        del kids[p]


def apply(op: UpdateOp, t: XMLTree) -> XMLTree:
    reason = _invalid_reason(op, t)
    if reason is not None:
        raise InvalidUpdateError(reason)
    labels, kids, values = dict(t.labels), dict(t.kids), dict(t.values)
    if isinstance(op, Insert):
        _graft(t, labels, kids, values, op.target, op.subtree)
    elif isinstance(op, ReplaceTree):
        parent = t.parent(op.target)
        _drop(t, op.target, labels, kids, values)
        _graft(t, labels, kids, values, parent, op.subtree)
    elif isinstance(op, ReplaceText):
        values[op.target] = op.text
    elif isinstance(op, Delete):
        _drop(t, op.target, labels, kids, values)
    else:
        raise TypeError(op)
    return XMLTree(t.root, labels, kids, values)


def apply_seq(seq: Iterable[UpdateOp], t: XMLTree) -> XMLTree:
    for i, op in enumerate(seq):
        try:
            t = apply(op, t)
        except InvalidUpdateError as exc:
            raise InvalidUpdateError(exc.args[0], index=i) from None
    return t


def is_valid_seq(seq: Iterable[UpdateOp], t: XMLTree) -> bool:
    try:
        apply_seq(seq, t)
    except InvalidUpdateError:
        return False
    return True


def intermediates(seq: Seq[UpdateOp], t: XMLTree) -> list[XMLTree]:
    """``[t0, t1, ..., tn]`` for a valid sequence."""
    out = [t]
    for op in seq:
        out.append(apply(op, out[-1]))
    return out


# --- literal syntax ---------------------------------------------------------

_STEP = re.compile(r"(#str|[A-Za-z0-9_]+)(?:\[(\d+)\])?\Z")


def _ordered_children(t: XMLTree, n: int, label: str) -> list[int]:
    cs = [c for c in t.children(n) if t.label(c) == label]
    return sorted(cs, key=lambda c: (canon(t, c), c))


def resolve_path(t: XMLTree, path: str) -> int:
    """Resolve ``R/B/E[2]/G`` to a node id (ordinals are 1-based among
    same-label siblings sorted by canonical form)."""
    steps = [s.strip() for s in path.strip().split("/")]
    first = _STEP.match(steps[0])
    if not first or first.group(2) not in (None, "1") or first.group(1) != t.label(t.root):
        raise TreeSyntaxError(f"path {path!r} must start at the root {t.label(t.root)!r}")
    n = t.root
    for step in steps[1:]:
        m = _STEP.match(step)
        if not m:
            raise TreeSyntaxError(f"bad path step {step!r}")
        cs = _ordered_children(t, n, m.group(1))
        k = int(m.group(2) or 1)
        if not 1 <= k <= len(cs):
            raise TreeSyntaxError(f"path {path!r}: no child {step!r}")
        n = cs[k - 1]
    return n


def node_path(t: XMLTree, n: int) -> str:
    steps = []
    while n != t.root:
        p = t.parent(n)
        lab = t.label(n)
        same = _ordered_children(t, p, lab)
        steps.append(lab if len(same) == 1 else f"{lab}[{same.index(n) + 1}]")
        n = p
    steps.append(t.label(t.root))
    return "/".join(reversed(steps))


def _split_args(body: str) -> list[str]:
    depth, quoted, esc, start, parts = 0, False, False, 0, []
    for i, ch in enumerate(body):
        if quoted:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                quoted = False
        elif ch == '"':
            quoted = True
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(body[start:i])
            start = i + 1
    parts.append(body[start:])
    return [p.strip() for p in parts]


def parse_op(text: str, t: XMLTree) -> UpdateOp:
    """Parse ``delete(p)``, ``insert(p, tree)``, ``replace(p, tree)`` or
    ``replace(p, "text")`` against tree ``t``."""
    m = re.fullmatch(r"\s*(insert|delete|replace)\s*\((.*)\)\s*", text, re.S)
    if not m:
        raise TreeSyntaxError(f"cannot parse update {text.strip()!r}")
    kind, args = m.group(1), _split_args(m.group(2))
    if kind == "delete":
        if len(args) != 1:
            raise TreeSyntaxError("delete takes one path")
        return Delete(resolve_path(t, args[0]))
    if len(args) != 2:
        raise TreeSyntaxError(f"{kind} takes a path and an argument")
    target = resolve_path(t, args[0])
    if kind == "replace" and args[1].startswith('"'):
        if t.label(target) != STR:
            strs = [c for c in t.children(target) if t.label(c) == STR]
            if len(strs) != 1:
                raise TreeSyntaxError(f"{args[0]!r} has no unique text child")
            target = strs[0]
        return ReplaceText(target, json.loads(args[1]))
    sub = from_shape(parse_shape(args[1]), t.max_id + 1)
    return Insert(target, sub) if kind == "insert" else ReplaceTree(target, sub)


def format_op(op: UpdateOp, t: XMLTree) -> str:
    """Literal for ``op`` relative to the tree it applies to."""
    path = node_path(t, op.target)
    if isinstance(op, Delete):
        return f"delete({path})"
    if isinstance(op, ReplaceText):
        return f"replace({path}, {json.dumps(op.text, ensure_ascii=False)})"
    kind = "insert" if isinstance(op, Insert) else "replace"
    return f"{kind}({path}, {canon(op.subtree)})"


def format_seq(seq: Seq[UpdateOp], t: XMLTree) -> list[str]:
    out = []
    for op in seq:
        out.append(format_op(op, t))
        t = apply(op, t)
    return out


# --- normal form ---------------------------------------------------------------

_RANK = {Delete: 0, ReplaceTree: 1, ReplaceText: 1, Insert: 2}


def _rewrite_pair(a: UpdateOp, b: UpdateOp, t: XMLTree) -> list[UpdateOp] | None:
    """Rewrite ``a;b`` (applied to ``t``) into an equivalent shorter or
    better-ordered sequence, or return None when the pair is already fine."""
    m = b.target
    if isinstance(a, Insert):
        u, n = a.subtree, a.target
        if m in u:
            if isinstance(b, Delete) and m == u.root:
                return []
            if isinstance(b, ReplaceTree) and m == u.root:
                return [Insert(n, b.subtree)]
            return [Insert(n, apply(b, u))]
        if isinstance(b, Insert):
            return None
        if isinstance(b, (Delete, ReplaceTree)) and t.is_ancestor(m, n):
            return [b]
        return [b, a]
    if isinstance(a, ReplaceTree):
        u, n = a.subtree, a.target
        if m in u and m != u.root:
            return [ReplaceTree(n, apply(b, u))]
        if m in u and isinstance(b, Delete):
            return [Delete(n)]
        if m in u and isinstance(b, (Insert, ReplaceText)):
            return [ReplaceTree(n, apply(b, u))]
        if isinstance(b, (Delete, ReplaceTree)) and m != u.root and t.is_ancestor(m, n):
            return [b]
        if isinstance(b, Delete):
            return [b, a]
        return None
    if isinstance(a, ReplaceText):
        n = a.target
        if isinstance(b, ReplaceText) and m == n:
            return [b]
        if isinstance(b, (Delete, ReplaceTree)) and t.is_ancestor(m, n):
            return [b]
        if isinstance(b, Delete):
            return [b, a]
        return None
    if isinstance(a, Delete):
        if isinstance(b, (Delete, ReplaceTree)) and t.is_ancestor(m, a.target):
            return [b]
        return None
    raise TypeError(a)


def _chain_order(seq: list[UpdateOp]) -> list[UpdateOp]:
    """Stable-group the replace block into chains by target lineage."""
    lo = next((i for i, op in enumerate(seq) if _RANK[type(op)] == 1), len(seq))
    hi = lo
    while hi < len(seq) and _RANK[type(seq[hi])] == 1:
        hi += 1
    chain_of: dict[int, int] = {}
    keyed = []
    for op in seq[lo:hi]:
        key = chain_of.get(op.target, op.target)
        if isinstance(op, ReplaceTree):
            chain_of[op.subtree.root] = key
        keyed.append((key, op))
    first: dict[int, int] = {}
    for i, (key, _) in enumerate(keyed):
        first.setdefault(key, i)
    block = [op for _, op in sorted(keyed, key=lambda kv: first[kv[0]])]
    return seq[:lo] + block + seq[hi:]


def normalize(seq: Seq[UpdateOp], t: XMLTree) -> tuple[UpdateOp, ...]:
    """Equivalent sequence shaped deletes; replacements; inserts, with
    replacement chains contiguous and every target a node of ``t``."""
    apply_seq(seq, t)  # surfaces invalidity with the op index
    ops = _freshen(seq, t)
    changed = True
    while changed:
        changed = False
        cur = t
        for i in range(len(ops) - 1):
            out = _rewrite_pair(ops[i], ops[i + 1], cur)
            if out is not None:
                ops[i:i + 2] = out
                changed = True
                break
            cur = apply(ops[i], cur)
        if not changed:
            changed = _absorb(ops, t) or _pull_back(ops)
    return tuple(_chain_order(ops))


def _freshen(seq: Seq[UpdateOp], t: XMLTree) -> list[UpdateOp]:
    """Relabel inserted subtrees so no id is ever reused within the sequence
    (reordering would otherwise make a reused id clash)."""
    used = set(t.nodes)
    rename: dict[int, int] = {}
    nxt = max(used) + 1
    out = []
    for op in seq:
        op = type(op)(rename.get(op.target, op.target), *_payload(op))
        if isinstance(op, (Insert, ReplaceTree)):
            sub = op.subtree
            if sub.nodes & used:
                fresh = relabel(sub, nxt)
                rename.update(zip(sub.descendants(sub.root), fresh.descendants(fresh.root)))
                sub = fresh
                op = type(op)(op.target, sub)
            used |= sub.nodes
            nxt = max(nxt, max(sub.nodes) + 1)
        out.append(op)
    return out


def _payload(op: UpdateOp) -> tuple:
    if isinstance(op, (Insert, ReplaceTree)):
        return (op.subtree,)
    if isinstance(op, ReplaceText):
        return (op.text,)
    return ()


def _absorb(ops: list[UpdateOp], t: XMLTree) -> bool:
    """Drop earlier ops confined to a subtree that a later delete or replace
    removes anyway."""
    trees = intermediates(ops, t)
    for i, b in enumerate(ops):
        if not isinstance(b, (Delete, ReplaceTree)):
            continue
        m = b.target
        dead = [j for j in range(i) if m in trees[j] and ops[j].target in trees[j]
                and trees[j].is_ancestor(m, ops[j].target)]
        if dead:
            for j in reversed(dead):
                del ops[j]
            return True
    return False


def _pull_back(ops: list[UpdateOp]) -> bool:
    """Move the first op that edits a subtree introduced by a non-adjacent
    earlier op (or re-edits the same text node) to just after that op.  The ops in between cannot touch the
    subtree (otherwise one of them would be first), so the move is sound."""
    owner: dict[int, int] = {}
    for i, op in enumerate(ops):
        j = owner.get(op.target)
        if j is not None and j < i - 1:
            ops.insert(j + 1, ops.pop(i))
            return True
        if isinstance(op, (Insert, ReplaceTree)):
            owner.update((n, i) for n in op.subtree.nodes)
        elif isinstance(op, ReplaceText):
            owner[op.target] = i
    return False


def is_normal_form(seq: Seq[UpdateOp], t: XMLTree) -> bool:
    """Deletes, then replacements, then inserts; deletes, inserts and chain
    heads target nodes of ``t``; no deleted or replaced node of ``t`` is an
    ancestor of another modified node."""
    ranks = [_RANK[type(op)] for op in seq]
    if ranks != sorted(ranks):
        return False
    chain_roots: set[int] = set()
    heads: list[UpdateOp] = []
    for op in seq:
        if op.target in chain_roots:
            if not isinstance(op, ReplaceTree):
                return False
        elif op.target not in t:
            return False
        else:
            heads.append(op)
        if isinstance(op, ReplaceTree):
            chain_roots.add(op.subtree.root)
    for a in heads:
        if isinstance(a, (Delete, ReplaceTree)):
            for b in heads:
                if b is not a and t.is_ancestor(a.target, b.target):
                    return False
    return True


def op_kind(op: UpdateOp) -> str:
    return {Insert: "insert", ReplaceTree: "replace", ReplaceText: "text",
            Delete: "delete"}[type(op)]


def with_fresh_ids(op: UpdateOp, t: XMLTree) -> UpdateOp:
    """Same op with its subtree relabelled so ids avoid ``t``."""
    if isinstance(op, Insert):
        return Insert(op.target, fresh_copy(op.subtree, t))
    if isinstance(op, ReplaceTree):
        return ReplaceTree(op.target, fresh_copy(op.subtree, t))
    return op

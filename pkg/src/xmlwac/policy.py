"""Update access types (UATs), policies, and the op-matches-UAT relation.

Policy file format::

    policy mode total
    allow R replace(A,B)
    allow B insert(E)
    allow H replace(str,str)
    forbid G replace(H,I)

In ``total`` mode every valid UAT that is not allowed is forbidden; listed
``forbid`` lines must then agree with that complement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence as Seq

from .errors import PolicyError, UnknownElementError
from .schema import DTD, STR, Choice, Star, Str
from .tree import XMLTree, conforms_at
from .updates import Delete, Insert, ReplaceText, ReplaceTree, UpdateOp, apply, is_valid_op

KINDS = ("delete", "insert", "replace", "text")


@dataclass(frozen=True, order=True)
class UAT:
    """``(ctx, insert(first))``, ``(ctx, delete(first))``,
    ``(ctx, replace(first, second))`` or ``(ctx, replace(str,str))``
    (kind ``text``)."""

    ctx: str
    kind: str
    first: str = ""
    second: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown UAT kind {self.kind!r}")

    @classmethod
    def insert(cls, ctx: str, child: str) -> UAT:
        return cls(ctx, "insert", child)

    @classmethod
    def delete(cls, ctx: str, child: str) -> UAT:
        return cls(ctx, "delete", child)

    @classmethod
    def replace(cls, ctx: str, old: str, new: str) -> UAT:
        return cls(ctx, "replace", old, new)

    @classmethod
    def text(cls, ctx: str) -> UAT:
        return cls(ctx, "text")

    def op_text(self) -> str:
        if self.kind == "text":
            return "replace(str,str)"
        if self.kind == "replace":
            return f"replace({self.first},{self.second})"
        return f"{self.kind}({self.first})"

    def __str__(self) -> str:
        return f"({self.ctx}, {self.op_text()})"


def _invalid_reason(u: UAT, d: DTD) -> str | None:
    rg = d.rule(u.ctx)
    for name in (u.first, u.second):
        if name and name != "str":
            d.rule(name)
    where = f"{u.ctx} -> {rg.render()}"
    if u.kind in ("insert", "delete"):
        if isinstance(rg, Star) and rg.child == u.first:
            return None
        return f"{u} needs the rule {u.ctx} -> {u.first} *, found {where}"
    if u.kind == "text":
        if isinstance(rg, Str):
            return None
        return f"{u} needs the rule {u.ctx} -> {STR}, found {where}"
    if u.first == u.second:
        return (f"{u} replaces an element by one of the same type, which can simulate "
                "any update below it; grant the specific updates instead")
    if isinstance(rg, Choice) and u.first in rg.alternatives and u.second in rg.alternatives:
        return None
    return f"{u} needs two distinct alternatives of a choice rule for {u.ctx}, found {where}"


def is_valid_uat(u: UAT, d: DTD) -> bool:
    return _invalid_reason(u, d) is None


def valid_set(d: DTD) -> tuple[UAT, ...]:
    out = []
    for a, rg in d.rules.items():
        if isinstance(rg, Star):
            out += [UAT.insert(a, rg.child), UAT.delete(a, rg.child)]
        elif isinstance(rg, Str):
            out.append(UAT.text(a))
        elif isinstance(rg, Choice):
            out += [UAT.replace(a, b, c) for b in rg.alternatives
                    for c in rg.alternatives if b != c]
    return tuple(sorted(out))


@dataclass(frozen=True)
class Policy:
    dtd: DTD
    allow: frozenset
    forbid: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "allow", frozenset(self.allow))
        object.__setattr__(self, "forbid", frozenset(self.forbid))
        for u in sorted(self.allow | self.forbid):
            reason = _invalid_reason(u, self.dtd)
            if reason is not None:
                raise PolicyError(reason)
        both = self.allow & self.forbid
        if both:
            raise PolicyError(f"{min(both)} is both allowed and forbidden")

    @classmethod
    def total(cls, d: DTD, allow: Iterable[UAT]) -> Policy:
        allow = frozenset(allow)
        return cls(d, allow, frozenset(valid_set(d)) - allow)

    @property
    def is_total(self) -> bool:
        return self.allow | self.forbid == frozenset(valid_set(self.dtd))

    def completed(self) -> Policy:
        """Total policy forbidding everything not allowed."""
        return Policy.total(self.dtd, self.allow)


# --- matching -----------------------------------------------------------------

def matches(op: UpdateOp, u: UAT, t: XMLTree, d: DTD) -> bool:
    n = op.target
    if n not in t:
        return False
    parent = t.parent(n)
    plabel = t.label(parent) if parent is not None else None
    if isinstance(op, Insert):
        return (u.kind == "insert" and t.label(n) == u.ctx
                and u.first in d and conforms_at(op.subtree, d, u.first))
    if isinstance(op, Delete):
        return u.kind == "delete" and t.label(n) == u.first and plabel == u.ctx
    if isinstance(op, ReplaceTree):
        return (u.kind == "replace" and t.label(n) == u.first and plabel == u.ctx
                and u.first != u.second and u.second in d
                and conforms_at(op.subtree, d, u.second))
    if isinstance(op, ReplaceText):
        return u.kind == "text" and t.label(n) == STR and plabel == u.ctx
    return False


def matching_uat(op: UpdateOp, t: XMLTree, d: DTD) -> UAT | None:
    """The single UAT shape an op can match on ``t`` (None if no shape fits).

    Whether that UAT is valid for ``d`` is a separate question."""
    n = op.target
    if n not in t:
        return None
    parent = t.parent(n)
    plabel = t.label(parent) if parent is not None else None
    if isinstance(op, Insert):
        u = UAT.insert(t.label(n), op.subtree.label(op.subtree.root))
    elif isinstance(op, Delete):
        if plabel is None:
            return None
        u = UAT.delete(plabel, t.label(n))
    elif isinstance(op, ReplaceTree):
        if plabel is None or t.label(n) == op.subtree.label(op.subtree.root):
            return None
        u = UAT.replace(plabel, t.label(n), op.subtree.label(op.subtree.root))
    else:
        if plabel is None:
            return None
        u = UAT.text(plabel)
    try:
        return u if matches(op, u, t, d) else None
    except UnknownElementError:
        return None


def allowed_ops(p: Policy, t: XMLTree) -> Callable[[UpdateOp], bool]:
    def pred(op: UpdateOp) -> bool:
        return any(matches(op, u, t, p.dtd) for u in p.allow)
    return pred


def forbidden_ops(p: Policy, t: XMLTree) -> Callable[[UpdateOp], bool]:
    def pred(op: UpdateOp) -> bool:
        return any(matches(op, u, t, p.dtd) for u in p.forbid)
    return pred


def is_allowed_seq(p: Policy, t: XMLTree, seq: Seq[UpdateOp]) -> bool:
    for op in seq:
        if not is_valid_op(op, t) or not allowed_ops(p, t)(op):
            return False
        t = apply(op, t)
    return True


# --- file format ----------------------------------------------------------------

_UAT_OP = re.compile(
    r"(?P<kind>insert|delete)\(\s*(?P<b>[A-Za-z0-9_]+)\s*\)\Z"
    r"|replace\(\s*(?P<r1>[A-Za-z0-9_]+)\s*,\s*(?P<r2>[A-Za-z0-9_]+)\s*\)\Z")


def _parse_uat_op(ctx: str, text: str) -> UAT | None:
    m = _UAT_OP.match(text.strip())
    if not m:
        return None
    if m.group("kind"):
        return UAT(ctx, m.group("kind"), m.group("b"))
    r1, r2 = m.group("r1"), m.group("r2")
    if (r1, r2) == ("str", "str"):
        return UAT.text(ctx)
    return UAT.replace(ctx, r1, r2)


def parse_uat(text: str) -> UAT:
    """Parse ``(G, replace(H,I))`` or ``G replace(H,I)``."""
    s = text.strip()
    if s.startswith("(") and s.endswith(")"):
        s = s[1:-1]
    m = re.match(r"\s*([A-Za-z0-9_]+)\s*,?\s*(.+)\Z", s)
    u = _parse_uat_op(m.group(1), m.group(2)) if m else None
    if u is None:
        raise PolicyError(f"cannot parse access type {text.strip()!r}")
    return u


def parse_policy(text: str, d: DTD, source: str | None = None) -> tuple[Policy, str]:
    """Parse a policy file; returns the policy and its declared mode."""
    mode = None
    entries: dict[str, dict[UAT, int]] = {"allow": {}, "forbid": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        def fail(msg: str, col: int = 1) -> PolicyError:
            return PolicyError(msg, line=lineno, col=col, source=source)

        if mode is None:
            words = line.split()
            if len(words) != 3 or words[:2] != ["policy", "mode"] or words[2] not in ("total", "partial"):
                raise fail("expected header 'policy mode total|partial'")
            mode = words[2]
            continue
        m = re.match(r"(allow|forbid)\s+([A-Za-z0-9_]+)\s+(.*)\Z", line)
        if not m:
            raise fail("expected '<allow|forbid> <Element> <update>'")
        verb, ctx, rest = m.groups()
        u = _parse_uat_op(ctx, rest)
        if u is None:
            raise fail(f"cannot parse update type {rest!r}", raw.index(rest) + 1)
        try:
            reason = _invalid_reason(u, d)
        except UnknownElementError as exc:
            raise UnknownElementError(exc.message, line=lineno, source=source) from None
        if reason is not None:
            raise fail(reason)
        other = "forbid" if verb == "allow" else "allow"
        if u in entries[other]:
            raise fail(f"{u} is both allowed (line {entries['allow'].get(u, lineno)}) "
                       f"and forbidden (line {entries['forbid'].get(u, lineno)})")
        entries[verb].setdefault(u, lineno)
    if mode is None:
        raise PolicyError("missing header 'policy mode total|partial'", line=1, source=source)
    allow = frozenset(entries["allow"])
    forbid = frozenset(entries["forbid"])
    if mode == "total":
        complement = frozenset(valid_set(d)) - allow
        if forbid and forbid != complement:
            missing = sorted(complement - forbid)
            raise PolicyError(
                f"forbid lines disagree with the total completion; first missing: {missing[0]}",
                source=source)
        forbid = complement
    return Policy(d, allow, forbid), mode


def render_policy(p: Policy, mode: str | None = None) -> str:
    mode = mode or ("total" if p.is_total else "partial")
    lines = [f"policy mode {mode}"]
    lines += [f"allow {u.ctx} {u.op_text()}" for u in sorted(p.allow)]
    lines += [f"forbid {u.ctx} {u.op_text()}" for u in sorted(p.forbid)]
    return "\n".join(lines) + "\n"

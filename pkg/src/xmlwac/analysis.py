"""Consistency analysis of write-access policies.

A policy is inconsistent when some forbidden update can be reproduced by a
sequence of allowed ones.  Over a structured DTD this reduces to three
checks per production rule:

1. ``A -> B*`` with both insert and delete of ``B`` allowed, while something
   is forbidden at or below ``B`` (delete the subtree, re-insert it edited).
2. ``A -> B1+...+Bn``: an edge of the transitive closure of the replace graph
   is forbidden (replace along the path instead).
3. ``A -> B1+...+Bn``: a replace-graph cycle passes through ``Bi`` and
   something is forbidden at or below ``Bi`` (replace away and come back
   edited).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import DTDError, InternalError
from .policy import UAT, Policy, valid_set
from .schema import DTD, STR, Choice, DTDGraph, Star, dtd_graph

PLUS, MINUS, BOTTOM = "+", "-", "⊥"

INSDEL = "insdel"
FORBIDDEN_TRANSITIVITY = "forbidden-transitivity"
NEGATIVE_CYCLE = "negative-cycle"
CONDITION = {INSDEL: 1, FORBIDDEN_TRANSITIVITY: 2, NEGATIVE_CYCLE: 3}

Edge = tuple  # (str, str)


# --- graph helpers ----------------------------------------------------------

def transitive_closure(vertices: Iterable[str], edges: Iterable[Edge]) -> frozenset:
    """All pairs ``(x, y)`` joined by a nonempty path; ``(x, x)`` marks a cycle."""
    succ: dict[str, set[str]] = {v: set() for v in vertices}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
        succ.setdefault(b, set())
    closure = set()
    for v in succ:
        seen: set[str] = set()
        stack = list(succ[v])
        while stack:
            w = stack.pop()
            if w in seen:
                continue
            seen.add(w)
            stack.extend(succ[w])
        closure.update((v, w) for w in seen)
    return frozenset(closure)


def shortest_path(edges: Iterable[Edge], src: str, dst: str) -> tuple[str, ...] | None:
    """Shortest nonempty path ``src -> ... -> dst`` (a cycle when equal),
    breaking ties lexicographically."""
    succ: dict[str, list[str]] = {}
    for a, b in sorted(edges):
        succ.setdefault(a, []).append(b)
    prev: dict[str, str] = {}
    queue = deque()
    for b in succ.get(src, []):
        if b not in prev:
            prev[b] = src
            queue.append(b)
    while queue and dst not in prev:
        x = queue.popleft()
        for y in succ.get(x, []):
            if y not in prev:
                prev[y] = x
                queue.append(y)
    if dst not in prev:
        return None
    path = [dst]
    while True:
        p = prev[path[-1]]
        path.append(p)
        if p == src:
            break
    return tuple(reversed(path))


# --- replace graphs ---------------------------------------------------------

@dataclass(frozen=True)
class ReplaceGraph:
    ctx: str
    vertices: tuple[str, ...]
    edges: frozenset
    forbidden_edges: frozenset

    def closure(self) -> frozenset:
        return transitive_closure(self.vertices, self.edges)

    def without(self, removed: Iterable[Edge]) -> ReplaceGraph:
        return ReplaceGraph(self.ctx, self.vertices, self.edges - frozenset(removed),
                            self.forbidden_edges)


def replace_graph(d: DTD, p: Policy, a: str) -> ReplaceGraph:
    rg = d.rule(a)
    if not isinstance(rg, Choice):
        raise DTDError(f"{a} -> {rg.render()} is not a choice rule")
    return _replace_graph(a, rg, p.allow, p.forbid)


def _replace_graph(a: str, rg: Choice, allow, forbid) -> ReplaceGraph:
    def edges(us):
        return frozenset((u.first, u.second) for u in us
                         if u.ctx == a and u.kind == "replace")
    return ReplaceGraph(a, tuple(sorted(rg.alternatives)), edges(allow), edges(forbid))


def replace_graphs(d: DTD, p: Policy) -> dict[str, ReplaceGraph]:
    return {a: _replace_graph(a, rg, p.allow, p.forbid)
            for a, rg in d.rules.items() if isinstance(rg, Choice)}


# --- marked graph -------------------------------------------------------------

@dataclass(frozen=True)
class MarkedGraph:
    base: DTDGraph
    mu: Mapping[str, str]
    chi: Mapping[str, str]

    def minus(self, v: str) -> bool:
        return self.mu.get(v) == MINUS


def forbidden_below(d: DTD, forbid: Iterable[UAT]) -> dict[str, UAT | None]:
    """For every element type, the least forbidden UAT whose context is at or
    below it (None when nothing is forbidden below)."""
    own: dict[str, UAT] = {}
    for u in sorted(forbid):
        own.setdefault(u.ctx, u)
    out: dict[str, UAT | None] = {}
    for a in d.topological_order:
        cands = [own[a]] if a in own else []
        cands += [out[b] for b in d.subelements(a) if out[b] is not None]
        out[a] = min(cands) if cands else None
    return out


def mark_graph(d: DTD, p: Policy) -> MarkedGraph:
    """``mu(A) = -`` iff something is forbidden at or below ``A``;
    ``chi(A) = ⊥`` for star rules with insert and delete both allowed and
    ``mu(A) = -``.  One bottom-up pass."""
    below = forbidden_below(d, p.forbid)
    mu = {a: (MINUS if below[a] is not None else PLUS) for a in d.elements}
    mu[STR] = PLUS
    chi = {}
    for a, rg in d.rules.items():
        if (isinstance(rg, Star) and mu[a] == MINUS
                and UAT.insert(a, rg.child) in p.allow
                and UAT.delete(a, rg.child) in p.allow):
            chi[a] = BOTTOM
    return MarkedGraph(dtd_graph(d), dict(sorted(mu.items())), chi)


# --- violations -------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Violation:
    """One failing (rule, site) pair.

    ``insdel``: ``ctx -> child*`` with ``witness`` forbidden at or below child.
    ``forbidden-transitivity``: ``edge`` in the closure of the replace graph of
    ``ctx`` is forbidden; ``path`` realises it with allowed edges.
    ``negative-cycle``: ``vertex`` lies on ``path`` (a cycle) and ``witness``
    is forbidden at or below it.
    """

    condition: int
    ctx: str
    kind: str
    child: str = ""
    edge: tuple = ()
    vertex: str = ""
    path: tuple = ()
    witness: UAT | None = None

    def describe(self) -> str:
        if self.kind == INSDEL:
            return (f"{self.ctx}: insert and delete of {self.child} allowed, "
                    f"{self.witness} forbidden below {self.child}")
        if self.kind == FORBIDDEN_TRANSITIVITY:
            a, b = self.edge
            return (f"{self.ctx}: replace({a},{b}) forbidden but reachable via "
                    + " -> ".join(self.path))
        return (f"{self.ctx}: {self.vertex} on cycle " + " -> ".join(self.path)
                + f" with {self.witness} forbidden below {self.vertex}")


@dataclass(frozen=True)
class Verdict:
    consistent: bool
    violations: tuple[Violation, ...] = ()
    total: bool = True

    def by_kind(self, kind: str) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.kind == kind)


def find_violations(d: DTD, allow: frozenset, forbid: frozenset) -> list[Violation]:
    below = forbidden_below(d, forbid)
    out: list[Violation] = []
    for a, rg in d.rules.items():
        if isinstance(rg, Star):
            b = rg.child
            if (UAT.insert(a, b) in allow and UAT.delete(a, b) in allow
                    and below[b] is not None):
                out.append(Violation(1, a, INSDEL, child=b, witness=below[b]))
    for a, rg in d.rules.items():
        if not isinstance(rg, Choice):
            continue
        g = _replace_graph(a, rg, allow, forbid)
        closure = g.closure()
        for e in sorted(closure & g.forbidden_edges):
            out.append(Violation(2, a, FORBIDDEN_TRANSITIVITY, edge=e,
                                 path=shortest_path(g.edges, *e)))
        for v in g.vertices:
            if (v, v) in closure and below[v] is not None:
                out.append(Violation(3, a, NEGATIVE_CYCLE, vertex=v,
                                     path=shortest_path(g.edges, v, v), witness=below[v]))
    return sorted(out)


def check_consistency(d: DTD, p: Policy) -> Verdict:
    violations = tuple(find_violations(d, p.allow, p.forbid))
    total = p.is_total
    if not total:
        hit = closure_T(d, p.allow) & p.forbid
        if bool(hit) != bool(violations):
            raise InternalError("closure and rule checks disagree on a partial policy")
    return Verdict(not violations, violations, total)


# --- operator T and least-privilege extension ----------------------------------

def _uats_by_ctx(d: DTD) -> dict[str, list[UAT]]:
    out: dict[str, list[UAT]] = {a: [] for a in d.elements}
    for u in valid_set(d):
        out[u.ctx].append(u)
    return out


def apply_T(d: DTD, s: frozenset, _by_ctx=None) -> frozenset:
    """One application of the operator T."""
    by_ctx = _by_ctx or _uats_by_ctx(d)
    out = set(s)
    roots: set[str] = set()
    for a, rg in d.rules.items():
        if isinstance(rg, Star):
            if UAT.insert(a, rg.child) in s and UAT.delete(a, rg.child) in s:
                roots.add(rg.child)
        elif isinstance(rg, Choice):
            g = _replace_graph(a, rg, s, ())
            for x, y in g.closure():
                if x == y:
                    roots.add(x)
                else:
                    out.add(UAT.replace(a, x, y))
    for r in roots:
        for c in d.below_set(r):
            if c != STR:
                out.update(by_ctx[c])
    return frozenset(out)


def closure_T(d: DTD, s: Iterable[UAT]) -> frozenset:
    """Least fixpoint of T above ``s``."""
    by_ctx = _uats_by_ctx(d)
    cur = frozenset(s)
    while True:
        nxt = apply_T(d, cur, by_ctx)
        if nxt == cur:
            return cur
        cur = nxt


@dataclass(frozen=True)
class LpceResult:
    quasiconsistent: bool
    policy: Policy | None = None
    witness: UAT | None = None
    conflicts: tuple[UAT, ...] = field(default=())


def lpce(p: Policy) -> LpceResult:
    """Least-privilege consistent total extension, or the UATs that block it."""
    d = p.dtd
    closed = closure_T(d, p.allow)
    conflicts = tuple(sorted(closed & p.forbid))
    if conflicts:
        return LpceResult(False, witness=conflicts[0], conflicts=conflicts)
    return LpceResult(True, policy=Policy.total(d, closed))

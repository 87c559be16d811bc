"""Repairs that restore consistency by revoking allowed privileges.

Insert/delete conflicts are fixed by dropping one of the two UATs of each
flagged star rule.  Replace conflicts are fixed per choice rule by deleting
edges of its replace graph, either with a worklist that deletes one edge of
each offending pair as it is found (``naive``) or by covering justification
sets with a greedy set cover (``setcover``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .analysis import (MarkedGraph, ReplaceGraph, check_consistency, mark_graph,
                       replace_graphs, shortest_path, transitive_closure)
from .errors import InternalError
from .policy import UAT, Policy, valid_set
from .schema import DTD, Star

Edge = tuple  # (str, str)
Justification = frozenset  # frozenset of Edge

INSDEL_TIEBREAKS = ("prefer-delete", "prefer-insert", "seeded")
EDGE_TIEBREAKS = ("lex", "incoming", "outgoing", "seeded")


@dataclass(frozen=True)
class Tiebreak:
    """How arbitrary choices are resolved.

    ``insdel`` picks which of insert/delete to drop; ``edge`` picks which edge
    of an offending pair the naive strategy deletes and, when ``seeded``,
    also breaks greedy set-cover ties at random.  ``lex`` deletes the
    lexicographically smaller edge of the pair.
    """

    insdel: str = "prefer-delete"
    edge: str = "lex"
    seed: int = 0

    def __post_init__(self):
        if self.insdel not in INSDEL_TIEBREAKS:
            raise ValueError(f"unknown insert/delete tiebreak {self.insdel!r}")
        if self.edge not in EDGE_TIEBREAKS:
            raise ValueError(f"unknown edge tiebreak {self.edge!r}")


def just_key(j: Iterable[Edge]) -> tuple:
    return tuple(sorted(j))


def format_just(j: Iterable[Edge]) -> str:
    return "{" + ", ".join(f"({a},{b})" for a, b in just_key(j)) + "}"


# --- insert/delete ---------------------------------------------------------------

def insdel_repair(d: DTD, p: Policy, tiebreak: Tiebreak = Tiebreak()) -> frozenset:
    mg = mark_graph(d, p)
    rng = random.Random(tiebreak.seed)
    out = set()
    for a in sorted(mg.chi):
        b = d.rule(a).child
        ins, dele = UAT.insert(a, b), UAT.delete(a, b)
        if tiebreak.insdel == "prefer-delete":
            out.add(dele)
        elif tiebreak.insdel == "prefer-insert":
            out.add(ins)
        else:
            out.add(rng.choice([dele, ins]))
    return frozenset(out)


# --- replace: shared checks -------------------------------------------------------

def _forbidden_now(g: ReplaceGraph, removed: frozenset, total: bool) -> frozenset:
    """Forbidden edges after ``removed`` left the allow set.  In a total
    repair revoked UATs become forbidden too."""
    return g.forbidden_edges | removed if total else g.forbidden_edges


def replace_conflicts(g: ReplaceGraph, mg: MarkedGraph, removed: frozenset = frozenset(),
                      total: bool = False) -> list[tuple[str, tuple]]:
    """Remaining forbidden-transitivity edges and negative-cycle vertices of
    ``g`` minus ``removed``, each with a realising path."""
    edges = g.edges - removed
    closure = transitive_closure(g.vertices, edges)
    out = []
    for e in sorted(closure & _forbidden_now(g, removed, total)):
        out.append(("edge", shortest_path(edges, *e)))
    for v in g.vertices:
        if (v, v) in closure and mg.minus(v):
            out.append(("vertex", shortest_path(edges, v, v)))
    return out


def _path_edges(path: tuple) -> list[Edge]:
    return [(path[i], path[i + 1]) for i in range(len(path) - 1)]


# --- naive ------------------------------------------------------------------------

@dataclass
class NaiveTrace:
    deleted: list = field(default_factory=list)
    rescans: int = 0


def _naive_one(g: ReplaceGraph, mg: MarkedGraph, tiebreak: Tiebreak, total: bool,
               rng: random.Random, trace: NaiveTrace) -> frozenset:
    removed: set[Edge] = set()
    succ = {v: sorted(b for a, b in g.edges if a == v) for v in g.vertices}
    pred = {v: sorted(a for a, b in g.edges if b == v) for v in g.vertices}

    def live(e: Edge) -> bool:
        return e in g.edges and e not in removed

    def reachable(src: str) -> list[str]:
        seen, stack = {src}, [src]
        while stack:
            x = stack.pop()
            for y in succ[x]:
                if live((x, y)) and y not in seen:
                    seen.add(y)
                    stack.append(y)
        return sorted(seen)

    def offending(a: str, b: str, c: str) -> bool:
        if a != c:
            return (a, c) in _forbidden_now(g, frozenset(removed), total)
        return mg.minus(a) or mg.minus(b)

    def choose(e1: Edge, e2: Edge) -> Edge:
        mode = tiebreak.edge
        if mode == "lex":
            return min(e1, e2)
        if mode == "incoming":
            return e1
        if mode == "outgoing":
            return e2
        return rng.choice([e1, e2])

    stack = sorted(g.vertices, reverse=True)
    while stack:
        b = stack.pop()
        for a in pred[b]:
            for c in succ[b]:
                if not live((a, b)):
                    break
                if not live((b, c)) or not offending(a, b, c):
                    continue
                e = choose((a, b), (b, c))
                removed.add(e)
                trace.deleted.append((g.ctx, e))
                start = a if e == (a, b) else b
                stack.extend(reversed(reachable(start)))
    # Safety net: anything the local worklist missed (longer cycles in partial
    # policies, for instance) is fixed by deleting an edge of its path.
    while True:
        left = replace_conflicts(g, mg, frozenset(removed), total)
        if not left:
            break
        trace.rescans += 1
        path_edges = _path_edges(left[0][1])
        if tiebreak.edge == "seeded":
            e = rng.choice(path_edges)
        elif tiebreak.edge == "outgoing":
            e = path_edges[-1]
        elif tiebreak.edge == "incoming":
            e = path_edges[0]
        else:
            e = min(path_edges)
        removed.add(e)
        trace.deleted.append((g.ctx, e))
    return frozenset(removed)


def replace_naive(d: DTD, p: Policy, tiebreak: Tiebreak = Tiebreak(), total: bool | None = None,
                  trace: NaiveTrace | None = None) -> dict[str, frozenset]:
    total = p.is_total if total is None else total
    mg = mark_graph(d, p)
    rng = random.Random(tiebreak.seed)
    trace = trace if trace is not None else NaiveTrace()
    return {a: _naive_one(g, mg, tiebreak, total, rng, trace)
            for a, g in sorted(replace_graphs(d, p).items())}


# --- justifications and set cover ------------------------------------------------------

@dataclass(frozen=True)
class AnnotatedReplaceGraph:
    base: ReplaceGraph
    derived_edges: tuple
    edge_just: Mapping[Edge, tuple]
    node_just: Mapping[str, tuple]


def compute_justifications(g: ReplaceGraph, mu: Mapping[str, str] | MarkedGraph,
                           mnj: int = 1) -> AnnotatedReplaceGraph:
    """Closure of ``g`` where each derived edge and each minus vertex on a
    cycle carries up to ``mnj`` justifications (sets of base edges).

    Sources are visited in lexicographic order; the successor list of a
    vertex holds its base successors (sorted) followed by derived ones in
    discovery order, and grows while it is scanned."""
    if mnj < 1:
        raise ValueError("mnj must be >= 1")
    minus = mu.minus if isinstance(mu, MarkedGraph) else (lambda v: mu.get(v) == "-")
    base = set(g.edges)
    succ = {v: sorted(b for a, b in base if a == v) for v in g.vertices}
    just: dict[Edge, list[Justification]] = {e: [frozenset([e])] for e in sorted(base)}
    node: dict[str, list[Justification]] = {v: [] for v in g.vertices}
    derived: list[Edge] = []

    def add(bucket: list, j: Justification) -> None:
        if len(bucket) < mnj and j not in bucket:
            bucket.append(j)

    for a in g.vertices:
        i = 0
        while i < len(succ[a]):
            b = succ[a][i]
            i += 1
            j_ab = list(just[(a, b)])
            k = 0
            while k < len(succ[b]):
                c = succ[b][k]
                k += 1
                j_bc = list(just[(b, c)])
                if (a, c) not in base and a != c:
                    if (a, c) not in just:
                        just[(a, c)] = []
                        derived.append((a, c))
                        succ[a].append(c)
                    for j1 in j_ab:
                        for j2 in j_bc:
                            add(just[(a, c)], j1 | j2)
                if a == c and minus(a):
                    for j1 in j_ab:
                        for j2 in j_bc:
                            add(node[a], j1 | j2)
    return AnnotatedReplaceGraph(
        base=g,
        derived_edges=tuple(derived),
        edge_just={e: tuple(js) for e, js in just.items()},
        node_just={v: tuple(js) for v, js in node.items() if js},
    )


@dataclass(frozen=True)
class SetCoverInstance:
    universe: tuple
    families: Mapping[Edge, frozenset]

    def matrix(self) -> list[tuple[int, ...]]:
        """Membership rows (universe order) by columns (sorted edges)."""
        cols = sorted(self.families)
        return [tuple(int(u in self.families[e]) for e in cols) for u in self.universe]


def build_setcover(ag: AnnotatedReplaceGraph,
                   forbidden: Iterable[Edge] | None = None) -> SetCoverInstance:
    """Universe: justifications of forbidden closure edges and of vertices
    (deduplicated); family ``I(e)``: the universe members containing ``e``."""
    forbidden = frozenset(ag.base.forbidden_edges if forbidden is None else forbidden)
    members: list[Justification] = []
    for e in sorted(ag.edge_just):
        if e in forbidden:
            members.extend(ag.edge_just[e])
    for v in sorted(ag.node_just):
        members.extend(ag.node_just[v])
    universe = tuple(sorted(set(members), key=lambda j: (len(j), just_key(j))))
    families = {e: frozenset(u for u in universe if e in u) for e in sorted(ag.base.edges)}
    return SetCoverInstance(universe, families)


def greedy_setcover(inst: SetCoverInstance, tiebreak: Tiebreak = Tiebreak(),
                    rng: random.Random | None = None,
                    graph: ReplaceGraph | None = None) -> tuple:
    """Repeatedly take the edge covering most uncovered justifications.

    Ties go to edges that leave no other path between their endpoints once
    the chosen edges are gone (only when ``graph`` is given: in a total
    repair a revoked edge that is still derivable is a new conflict), then
    to the larger family, then to the lexicographically least edge (or a
    seeded random pick under the ``seeded`` edge tiebreak)."""
    uncovered = set(inst.universe)
    rng = rng or random.Random(tiebreak.seed)
    chosen: list[Edge] = []

    def rederivable(e: Edge) -> bool:
        if graph is None:
            return False
        rest = graph.edges - set(chosen) - {e}
        return shortest_path(rest, *e) is not None

    while uncovered:
        best = max(len(inst.families[e] & uncovered) for e in inst.families) if inst.families else 0
        if best == 0:
            raise InternalError("set-cover universe is not covered by the families")
        ties = [e for e in sorted(inst.families) if len(inst.families[e] & uncovered) == best]
        clean = [e for e in ties if not rederivable(e)]
        ties = clean or ties
        if tiebreak.edge == "seeded":
            e = rng.choice(ties)
        else:
            e = min(ties, key=lambda x: (-len(inst.families[x]), x))
        chosen.append(e)
        uncovered -= inst.families[e]
    return tuple(chosen)


@dataclass
class SetCoverTrace:
    passes: dict = field(default_factory=dict)
    fallbacks: int = 0


def _setcover_one(g: ReplaceGraph, mg: MarkedGraph, mnj: int, tiebreak: Tiebreak,
                  total: bool, rng: random.Random, trace: SetCoverTrace) -> frozenset:
    removed: frozenset = frozenset()
    passes = 0
    while True:
        passes += 1
        cur = g.without(removed)
        ag = compute_justifications(cur, mg, mnj)
        inst = build_setcover(ag, _forbidden_now(g, removed, total))
        if not inst.universe:
            left = replace_conflicts(g, mg, removed, total)
            if not left:
                break
            # Justification search missed a conflict; cover its path directly.
            trace.fallbacks += 1
            js = tuple(frozenset(_path_edges(path)) for _, path in left)
            inst = SetCoverInstance(js, {e: frozenset(j for j in js if e in j)
                                         for e in sorted(cur.edges)})
        cover = greedy_setcover(inst, tiebreak, rng, cur if total else None)
        removed = removed | frozenset(cover)
    trace.passes[g.ctx] = passes
    return removed


def replace_setcover(d: DTD, p: Policy, mnj: int = 1, tiebreak: Tiebreak = Tiebreak(),
                     total: bool | None = None,
                     trace: SetCoverTrace | None = None) -> dict[str, frozenset]:
    if mnj < 1:
        raise ValueError("mnj must be >= 1")
    total = p.is_total if total is None else total
    mg = mark_graph(d, p)
    rng = random.Random(tiebreak.seed)
    trace = trace if trace is not None else SetCoverTrace()
    return {a: _setcover_one(g, mg, mnj, tiebreak, total, rng, trace)
            for a, g in sorted(replace_graphs(d, p).items())}


def edges_to_uats(per_ctx: Mapping[str, Iterable[Edge]]) -> frozenset:
    return frozenset(UAT.replace(a, x, y) for a, es in per_ctx.items() for x, y in es)


# --- assembly ---------------------------------------------------------------

@dataclass(frozen=True)
class RepairResult:
    removed: tuple
    repaired: Policy
    strategy: str
    mnj: int
    tiebreak: Tiebreak
    total: bool
    insdel_removed: tuple = ()
    replace_removed: tuple = ()
    passes: Mapping[str, int] = field(default_factory=dict)
    rescans: int = 0

    @property
    def seed(self) -> int:
        return self.tiebreak.seed


def repair(d: DTD, p: Policy, total: bool = True, strategy: str = "setcover", mnj: int = 1,
           tiebreak: Tiebreak = Tiebreak()) -> RepairResult:
    """Drop allowed UATs until the policy is consistent.  ``total`` forbids
    everything no longer allowed; otherwise the forbid set is kept."""
    if total:
        p = p.completed()
    insdel = insdel_repair(d, p, tiebreak)
    passes: dict[str, int] = {}
    rescans = 0
    if strategy == "naive":
        nt = NaiveTrace()
        per_ctx = replace_naive(d, p, tiebreak, total, nt)
        rescans = nt.rescans
    elif strategy == "setcover":
        st = SetCoverTrace()
        per_ctx = replace_setcover(d, p, mnj, tiebreak, total, st)
        passes = dict(st.passes)
        rescans = st.fallbacks
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    replace = edges_to_uats(per_ctx)
    removed = insdel | replace
    allow = p.allow - removed
    if total:
        repaired = Policy(d, allow, frozenset(valid_set(d)) - allow)
    else:
        repaired = Policy(d, allow, p.forbid)
    verdict = check_consistency(d, repaired)
    if not verdict.consistent:
        raise InternalError("repaired policy is still inconsistent: "
                            + verdict.violations[0].describe())
    return RepairResult(
        removed=tuple(sorted(removed)), repaired=repaired, strategy=strategy,
        mnj=mnj if strategy == "setcover" else 0, tiebreak=tiebreak, total=total,
        insdel_removed=tuple(sorted(insdel)), replace_removed=tuple(sorted(replace)),
        passes=passes, rescans=rescans,
    )

"""Unordered labelled XML trees.

Trees are immutable values keyed by integer node ids.  Text content is held in
``#str``-labelled leaf nodes, so an element whose rule is ``#str`` has exactly
one such child.

The literal syntax is a parenthesised term::

    R(B(E(G(H("x")), G(I("y")))))

where a bare name is an element with no children and a quoted string is a
``#str`` child carrying that value.  :func:`canon` prints the same syntax with
children sorted, which makes it a canonical form for isomorphism.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Mapping, Sequence as Seq, Union

from .errors import TreeSyntaxError, UnknownElementError
from .schema import DTD, STR, Choice, Empty, Sequence, Star, Str

# A shape is a tree without node ids: (label, children) or (STR, value).
Shape = tuple


@dataclass(frozen=True)
class XMLTree:
    root: int
    labels: Mapping[int, str]
    kids: Mapping[int, tuple[int, ...]]
    values: Mapping[int, str]

    @cached_property
    def parents(self) -> dict[int, int]:
        return {c: p for p, cs in self.kids.items() for c in cs}

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, n: object) -> bool:
        return n in self.labels

    def label(self, n: int) -> str:
        return self.labels[n]

    def children(self, n: int) -> tuple[int, ...]:
        return self.kids.get(n, ())

    def parent(self, n: int) -> int | None:
        return self.parents.get(n)

    def descendants(self, n: int) -> list[int]:
        """``n`` and everything below it, in preorder."""
        out, stack = [], [n]
        while stack:
            m = stack.pop()
            out.append(m)
            stack.extend(reversed(self.children(m)))
        return out

    def is_ancestor(self, a: int, n: int) -> bool:
        """``a <=_t n``: ``a`` is ``n`` or one of its ancestors."""
        while n is not None:
            if n == a:
                return True
            n = self.parents.get(n)
        return False

    def subtree(self, n: int) -> XMLTree:
        keep = self.descendants(n)
        return XMLTree(
            root=n,
            labels={m: self.labels[m] for m in keep},
            kids={m: self.kids[m] for m in keep if m in self.kids},
            values={m: self.values[m] for m in keep if m in self.values},
        )

    @property
    def max_id(self) -> int:
        return max(self.labels)

    def edges(self) -> set[tuple[int, int]]:
        return {(p, c) for p, cs in self.kids.items() for c in cs}

    def __str__(self) -> str:
        return canon(self)


def from_shape(shape: Shape, start: int = 0) -> XMLTree:
    labels: dict[int, str] = {}
    kids: dict[int, tuple[int, ...]] = {}
    values: dict[int, str] = {}
    counter = itertools.count(start)

    def build(s: Shape) -> int:
        n = next(counter)
        labels[n] = s[0]
        if s[0] == STR:
            values[n] = s[1]
        elif s[1]:
            kids[n] = tuple(build(c) for c in s[1])
        return n

    root = build(shape)
    return XMLTree(root, labels, kids, values)


def to_shape(t: XMLTree, n: int | None = None) -> Shape:
    n = t.root if n is None else n
    if t.labels[n] == STR:
        return (STR, t.values[n])
    return (t.labels[n], tuple(to_shape(t, c) for c in t.children(n)))


def make(label: str, *children: Union[Shape, str]) -> Shape:
    """Shape builder for tests: ``make("G", make("H", "x"))``."""
    return (label, tuple((STR, c) if isinstance(c, str) else c for c in children))


def relabel(t: XMLTree, start: int) -> XMLTree:
    """Copy of ``t`` with ids ``start, start+1, ...`` in preorder."""
    return from_shape(to_shape(t), start)


def fresh_copy(u: XMLTree, avoid: XMLTree) -> XMLTree:
    """Copy of ``u`` whose ids do not collide with ``avoid``."""
    if not (u.nodes & avoid.nodes):
        return u
    return relabel(u, avoid.max_id + 1)


# --- canonical form -------------------------------------------------------

def _encode_text(value: str) -> str:
    return json.dumps(value, ensure_ascii=False)


def canon(t: XMLTree, n: int | None = None) -> str:
    """Canonical encoding: equal iff the (sub)trees are isomorphic."""
    n = t.root if n is None else n
    memo: dict[int, str] = {}
    for m in reversed(t.descendants(n)):
        if t.labels[m] == STR:
            memo[m] = _encode_text(t.values.get(m, ""))
            continue
        cs = t.children(m)
        if cs:
            memo[m] = t.labels[m] + "(" + ",".join(sorted(memo[c] for c in cs)) + ")"
        else:
            memo[m] = t.labels[m]
    return memo[n]


def shape_canon(s: Shape) -> str:
    if s[0] == STR:
        return _encode_text(s[1])
    if not s[1]:
        return s[0]
    return s[0] + "(" + ",".join(sorted(shape_canon(c) for c in s[1])) + ")"


def isomorphic(t1: XMLTree, t2: XMLTree) -> bool:
    return canon(t1) == canon(t2)


render_tree = canon


# --- literal parser ------------------------------------------------------

_LEX = re.compile(r'\s*(?:(?P<name>[A-Za-z0-9_]+)|(?P<str>"(?:[^"\\]|\\.)*")|(?P<p>[(),]))')


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        m = _LEX.match(self.text, self.pos)
        if not m:
            if self.text[self.pos:].strip():
                raise TreeSyntaxError(f"unexpected input {self.text[self.pos:].strip()[:10]!r}",
                                      col=self.pos + 1)
            return None
        kind = m.lastgroup
        return kind, m.group(kind)

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise TreeSyntaxError("unexpected end of input", col=len(self.text) + 1)
        self.pos = _LEX.match(self.text, self.pos).end()
        return tok

    def expect(self, punct: str) -> None:
        kind, val = self.take()
        if val != punct:
            raise TreeSyntaxError(f"expected {punct!r}, got {val!r}", col=self.pos)


def parse_shape(text: str) -> Shape:
    lx = _Lexer(text)
    shape = _parse_item(lx, top=True)
    if lx.peek() is not None:
        raise TreeSyntaxError("trailing input after tree literal", col=lx.pos + 1)
    return shape


def _parse_item(lx: _Lexer, top: bool = False) -> Shape:
    kind, val = lx.take()
    if kind == "str":
        if top:
            raise TreeSyntaxError("a tree literal must start with an element name", col=1)
        return (STR, json.loads(val))
    if kind != "name":
        raise TreeSyntaxError(f"unexpected {val!r}", col=lx.pos)
    children: list[Shape] = []
    nxt = lx.peek()
    if nxt == ("p", "("):
        lx.take()
        if lx.peek() == ("p", ")"):
            lx.take()
        else:
            while True:
                children.append(_parse_item(lx))
                kind2, v2 = lx.take()
                if v2 == ")":
                    break
                if v2 != ",":
                    raise TreeSyntaxError(f"expected ',' or ')', got {v2!r}", col=lx.pos)
    return (val, tuple(children))


def parse_tree(text: str, start: int = 0) -> XMLTree:
    return from_shape(parse_shape(text), start)


# --- conformance ------------------------------------------------------------

def _content_ok(d: DTD, t: XMLTree, n: int) -> bool:
    rg = d.rule(t.labels[n])
    child_labels = [t.labels[c] for c in t.children(n)]
    if isinstance(rg, Str):
        return child_labels == [STR]
    if isinstance(rg, Empty):
        return not child_labels
    if isinstance(rg, Sequence):
        return sorted(child_labels) == sorted(rg.children)
    if isinstance(rg, Choice):
        return len(child_labels) == 1 and child_labels[0] in rg.alternatives
    if isinstance(rg, Star):
        return all(lab == rg.child for lab in child_labels)
    raise TypeError(rg)


def conforms_at(t: XMLTree, d: DTD, a: str) -> bool:
    """Whether ``t`` is an instance of ``d`` at element type ``a``."""
    d.rule(a)
    if t.labels.get(t.root) != a:
        return False
    for n in t.descendants(t.root):
        lab = t.labels[n]
        if lab == STR:
            if t.children(n) or n not in t.values:
                return False
            continue
        if lab not in d or n in t.values:
            return False
        if not _content_ok(d, t, n):
            return False
    return True


# --- instance generation --------------------------------------------------

def minimal_shape(d: DTD, a: str) -> Shape:
    rg = d.rule(a)
    if isinstance(rg, Str):
        return (a, ((STR, ""),))
    if isinstance(rg, (Empty, Star)):
        return (a, ())
    if isinstance(rg, Choice):
        return (a, (minimal_shape(d, min(rg.alternatives)),))
    return (a, tuple(minimal_shape(d, b) for b in sorted(rg.children)))


def gen_instance(d: DTD, a: str, start: int = 0) -> XMLTree:
    """Deterministic smallest member of ``I_D(a)``."""
    return from_shape(minimal_shape(d, a), start)


def _multisets(pool: list[tuple[int, str, Shape]], budget: int,
               lo: int = 0) -> Iterator[tuple[Shape, ...]]:
    if budget == 0:
        yield ()
        return
    for i in range(lo, len(pool)):
        size, _, s = pool[i]
        if size <= budget:
            for rest in _multisets(pool, budget - size, i):
                yield (s,) + rest


def _products(per_child: list[list[tuple[int, str, Shape]]],
              budget: int) -> Iterator[tuple[Shape, ...]]:
    if not per_child:
        if budget == 0:
            yield ()
        return
    head, rest = per_child[0], per_child[1:]
    for size, _, s in head:
        if size <= budget:
            for tail in _products(rest, budget - size):
                yield (s,) + tail


def _sort_children(label: str, children: tuple[Shape, ...]) -> Shape:
    return (label, tuple(sorted(children, key=shape_canon)))


@lru_cache(maxsize=None)
def _shapes_exact(d: DTD, a: str, n: int, values: tuple[str, ...]) -> tuple[Shape, ...]:
    """All shapes of ``I_D(a)`` with exactly ``n`` nodes, one per iso class."""
    rg = d.rule(a)
    out: list[Shape] = []
    if n < 1:
        return ()
    if isinstance(rg, Str):
        if n == 2:
            out = [(a, ((STR, v),)) for v in values]
    elif isinstance(rg, Empty):
        if n == 1:
            out = [(a, ())]
    elif isinstance(rg, Choice):
        for b in rg.alternatives:
            out.extend((a, (s,)) for s in _shapes_exact(d, b, n - 1, values))
    elif isinstance(rg, Star):
        pool = _pool(d, rg.child, n - 1, values)
        out = [_sort_children(a, ms) for ms in _multisets(pool, n - 1)]
    elif isinstance(rg, Sequence):
        per_child = [_pool(d, b, n - 1, values) for b in rg.children]
        out = [_sort_children(a, p) for p in _products(per_child, n - 1)]
    return tuple(sorted(out, key=shape_canon))


def _pool(d: DTD, a: str, max_nodes: int,
          values: tuple[str, ...]) -> list[tuple[int, str, Shape]]:
    pool = []
    for k in range(1, max_nodes + 1):
        pool.extend((k, shape_canon(s), s) for s in _shapes_exact(d, a, k, values))
    pool.sort(key=lambda x: x[1])
    return pool


def enumerate_shapes(d: DTD, a: str, max_nodes: int,
                     values: Seq[str] = ("s",)) -> Iterator[Shape]:
    vals = tuple(sorted(set(values)))
    if max_nodes < 1 or not vals:
        raise ValueError("max_nodes must be >= 1 and values nonempty")
    for k in range(1, max_nodes + 1):
        yield from _shapes_exact(d, a, k, vals)


def enumerate_instances(d: DTD, a: str, max_nodes: int,
                        values: Seq[str] = ("s",)) -> Iterator[XMLTree]:
    """Every member of ``I_D(a)`` with at most ``max_nodes`` nodes, up to
    isomorphism, ordered by size then canonical form."""
    for s in enumerate_shapes(d, a, max_nodes, values):
        yield from_shape(s)


def count_instances(d: DTD, a: str, max_nodes: int, values: Seq[str] = ("s",)) -> int:
    return sum(1 for _ in enumerate_shapes(d, a, max_nodes, values))


def has_larger_instances(d: DTD, a: str, max_nodes: int, values: Seq[str]) -> bool:
    """Whether ``I_D(a)`` has members with more than ``max_nodes`` nodes."""
    return _max_size(d, a) is None or _max_size(d, a) > max_nodes


def _max_size(d: DTD, a: str) -> int | None:
    rg = d.rule(a)
    if isinstance(rg, Str):
        return 2
    if isinstance(rg, Empty):
        return 1
    if isinstance(rg, Star):
        return None
    sizes = [_max_size(d, b) for b in rg.names()]
    if any(s is None for s in sizes):
        return None
    return 1 + (max(sizes) if isinstance(rg, Choice) else sum(sizes))


def node_by_id_check(t: XMLTree, n: int) -> None:
    if n not in t.labels:
        raise UnknownElementError(f"node {n} not in tree")

"""Structured, non-recursive DTDs and their element-type graph.

Concrete syntax, one production per line (choice, sequence, star, text,
empty)::

    dtd root R
    R -> A + B + J + K
    A -> C , D
    B -> E *
    F -> #str
    X -> epsilon

Lines whose first non-blank character is ``#`` are comments (``#str`` can only
appear on the right of ``->`` so it never starts a line).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Union

from .errors import DTDError, DTDSyntaxError, UnknownElementError

STR = "#str"
RESERVED = frozenset({"epsilon", "str", "dtd"})
_NAME = re.compile(r"[A-Za-z0-9_]+\Z")


@dataclass(frozen=True)
class Str:
    def names(self) -> tuple[str, ...]:
        return ()

    def render(self) -> str:
        return STR


@dataclass(frozen=True)
class Empty:
    def names(self) -> tuple[str, ...]:
        return ()

    def render(self) -> str:
        return "epsilon"


@dataclass(frozen=True)
class Sequence:
    children: tuple[str, ...]

    def names(self) -> tuple[str, ...]:
        return self.children

    def render(self) -> str:
        return " , ".join(self.children)


@dataclass(frozen=True)
class Choice:
    alternatives: tuple[str, ...]

    def names(self) -> tuple[str, ...]:
        return self.alternatives

    def render(self) -> str:
        return " + ".join(self.alternatives)


@dataclass(frozen=True)
class Star:
    child: str

    def names(self) -> tuple[str, ...]:
        return (self.child,)

    def render(self) -> str:
        return f"{self.child} *"


ContentModel = Union[Str, Empty, Sequence, Choice, Star]


class DTD:
    """A validated structured DTD ``(Ele, Rg, rt)``.

    Instances are immutable after construction; build them with
    :func:`parse_dtd` or directly from a rule mapping.
    """

    __slots__ = ("_rules", "_root", "__dict__")

    def __init__(self, rules: Mapping[str, ContentModel], root: str):
        self._rules = dict(sorted(rules.items()))
        self._root = root
        _validate(self._rules, root)

    @property
    def root(self) -> str:
        return self._root

    @property
    def rules(self) -> Mapping[str, ContentModel]:
        return dict(self._rules)

    @cached_property
    def elements(self) -> tuple[str, ...]:
        return tuple(self._rules)

    def __contains__(self, name: object) -> bool:
        return name in self._rules

    def rule(self, name: str) -> ContentModel:
        try:
            return self._rules[name]
        except KeyError:
            raise UnknownElementError(f"unknown element type {name!r}") from None

    def subelements(self, name: str) -> tuple[str, ...]:
        return self.rule(name).names()

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        """Element types ordered children-first (leaves before their parents)."""
        order: list[str] = []
        seen: set[str] = set()

        def visit(a: str) -> None:
            if a in seen:
                return
            seen.add(a)
            for b in sorted(self._rules[a].names()):
                visit(b)
            order.append(a)

        for a in self._rules:
            visit(a)
        return tuple(order)

    @cached_property
    def _reach(self) -> dict[str, frozenset[str]]:
        reach: dict[str, frozenset[str]] = {}
        for a in self.topological_order:
            below = {a}
            rg = self._rules[a]
            if isinstance(rg, Str):
                below.add(STR)
            for b in rg.names():
                below |= reach[b]
            reach[a] = frozenset(below)
        return reach

    def below_set(self, a: str) -> frozenset[str]:
        """All types ``c`` with ``a <=_D c`` (``#str`` included when reachable)."""
        self.rule(a)
        return self._reach[a]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DTD):
            return NotImplemented
        return self._root == other._root and self._rules == other._rules

    def __hash__(self) -> int:
        return hash((self._root, tuple(self._rules.items())))

    def __repr__(self) -> str:
        return f"DTD(root={self._root!r}, elements={len(self._rules)})"


@dataclass(frozen=True)
class DTDGraph:
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    root: str

    def successors(self, v: str) -> tuple[str, ...]:
        return tuple(b for a, b in self.edges if a == v)


def _validate(rules: Mapping[str, ContentModel], root: str) -> None:
    if root not in rules:
        raise DTDError(f"root type {root!r} has no production rule")
    for name, rg in rules.items():
        if not _NAME.match(name) or name in RESERVED:
            raise DTDError(f"invalid element type name {name!r}")
        kids = rg.names()
        if len(set(kids)) != len(kids):
            raise DTDError(f"duplicate subelement type in rule for {name!r}")
        if isinstance(rg, Choice) and len(kids) < 2:
            raise DTDError(f"choice rule for {name!r} needs at least 2 alternatives")
        if isinstance(rg, Sequence) and not kids:
            raise DTDError(f"sequence rule for {name!r} needs at least 1 child")
        for b in kids:
            if b not in rules:
                raise DTDError(f"rule for {name!r} references undefined type {b!r}")
    # Cycle detection with an explicit path in the message.
    state: dict[str, int] = {}

    def visit(a: str, path: list[str]) -> None:
        state[a] = 1
        for b in rules[a].names():
            if state.get(b) == 1:
                cyc = path[path.index(b):] + [b] if b in path else [a, b]
                raise DTDError("recursive DTD: " + " -> ".join(cyc))
            if b not in state:
                visit(b, path + [b])
        state[a] = 2

    for a in sorted(rules):
        if a not in state:
            visit(a, [a])


def _tokens(text: str) -> Iterator[tuple[str, int]]:
    for m in re.finditer(r"#str|->|[,+*]|[^\s,+*]+", text):
        yield m.group(0), m.start()


def parse_dtd(text: str, source: str | None = None) -> DTD:
    """Parse the line-oriented DTD format; raises DTDSyntaxError / DTDError."""
    rules: dict[str, ContentModel] = {}
    root: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or (line.startswith("#") and not line.startswith("#str")):
            continue
        toks = list(_tokens(raw))
        if root is None:
            words = [t for t, _ in toks]
            if len(words) != 3 or words[:2] != ["dtd", "root"]:
                raise DTDSyntaxError("expected header 'dtd root <Name>'",
                                     line=lineno, col=1, source=source)
            root = words[2]
            if not _NAME.match(root):
                raise DTDSyntaxError(f"invalid root name {root!r}", line=lineno,
                                     col=toks[2][1] + 1, source=source)
            continue
        if len(toks) < 3 or toks[1][0] != "->":
            raise DTDSyntaxError("expected '<Name> -> <content>'", line=lineno,
                                 col=1, source=source)
        name, ncol = toks[0]
        if not _NAME.match(name) or name in RESERVED:
            raise DTDSyntaxError(f"invalid element type name {name!r}",
                                 line=lineno, col=ncol + 1, source=source)
        if name in rules:
            raise DTDError(f"duplicate production for {name!r}", line=lineno,
                           source=source)
        rules[name] = _parse_rhs(toks[2:], lineno, source)
    if root is None:
        raise DTDSyntaxError("missing header 'dtd root <Name>'", line=1, source=source)
    try:
        return DTD(rules, root)
    except DTDError as exc:
        raise DTDError(exc.message, source=source) from None


def _parse_rhs(toks: list[tuple[str, int]], lineno: int,
               source: str | None) -> ContentModel:
    words = [t for t, _ in toks]

    def fail(msg: str, i: int = 0) -> DTDSyntaxError:
        return DTDSyntaxError(msg, line=lineno, col=toks[i][1] + 1, source=source)

    if words == [STR]:
        return Str()
    if words == ["epsilon"]:
        return Empty()
    if words[-1] == "*":
        if len(words) != 2:
            raise fail("star applies to exactly one element type", len(words) - 1)
        _check_name(words[0], fail)
        return Star(words[0])
    names = words[0::2]
    seps = set(words[1::2])
    for i, w in enumerate(names):
        if w in (STR, "epsilon"):
            raise fail(f"{w} cannot be combined with other content", 2 * i)
        _check_name(w, lambda m, i=i: fail(m, 2 * i))
    if len(words) % 2 == 0:
        raise fail("dangling separator", len(words) - 1)
    if len(seps) > 1:
        raise fail("mixed ',' and '+' in one rule", 1)
    if seps - {",", "+"}:
        raise fail(f"unexpected token {sorted(seps - {',', '+'})[0]!r}", 1)
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise DTDError(f"duplicate subelement {dup!r} in one rule", line=lineno,
                       source=source)
    if seps == {"+"}:
        return Choice(tuple(names))
    return Sequence(tuple(names))


def _check_name(word: str, fail) -> None:
    if not _NAME.match(word) or word in RESERVED:
        raise fail(f"invalid element type name {word!r}")


def render_dtd(d: DTD) -> str:
    lines = [f"dtd root {d.root}"]
    for name in d.elements:
        lines.append(f"{name} -> {d.rule(name).render()}")
    return "\n".join(lines) + "\n"


def below(d: DTD, a: str, c: str) -> bool:
    """``a <=_D c``: ``c`` is reachable from ``a`` in the DTD graph (reflexive)."""
    if c != STR:
        d.rule(c)
    return c in d.below_set(a)


def dtd_graph(d: DTD) -> DTDGraph:
    edges = set()
    for a, rg in d.rules.items():
        for b in rg.names():
            edges.add((a, b))
        if isinstance(rg, Str):
            edges.add((a, STR))
    vertices = tuple(sorted(set(d.elements) | {STR}))
    return DTDGraph(vertices, tuple(sorted(edges)), d.root)


def choice_rules(d: DTD) -> Iterable[tuple[str, Choice]]:
    for a, rg in d.rules.items():
        if isinstance(rg, Choice):
            yield a, rg


def dtd_path(d: DTD, a: str, c: str) -> tuple[str, ...] | None:
    """Shortest ``a``-to-``c`` path in the DTD graph (lexicographically least
    among shortest), or None when ``c`` is not below ``a``."""
    if c not in d.below_set(a):
        return None
    prev: dict[str, str | None] = {a: None}
    frontier = [a]
    while c not in prev:
        nxt = []
        for x in frontier:
            if x == STR:
                continue
            kids = sorted(d.rule(x).names()) + ([STR] if isinstance(d.rule(x), Str) else [])
            for y in kids:
                if y not in prev:
                    prev[y] = x
                    nxt.append(y)
        frontier = nxt
    path = [c]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return tuple(reversed(path))

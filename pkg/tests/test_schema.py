from __future__ import annotations

import pytest
from hypothesis import given, settings

from conftest import dtds
from xmlwac.errors import DTDError, DTDSyntaxError, UnknownElementError
from xmlwac.schema import (DTD, STR, Choice, Empty, Sequence, Star, Str, below, dtd_graph,
                           dtd_path, parse_dtd, render_dtd)


def test_fig1_rules(fig1):
    assert fig1.root == "R"
    assert fig1.elements == tuple(sorted("RABCDEFGHIJK"))
    assert fig1.rule("R") == Choice(("A", "B", "J", "K"))
    assert fig1.rule("A") == Sequence(("C", "D"))
    assert fig1.rule("B") == Star("E")
    assert fig1.rule("F") == Str()


def test_below_on_fig1(fig1):
    assert below(fig1, "B", "H")
    assert below(fig1, "B", "B")
    assert below(fig1, "B", STR)
    assert not below(fig1, "A", "G")
    assert not below(fig1, "G", "B")
    assert fig1.below_set("J") == {"J", "G", "H", "I", STR}


def test_topological_order_children_first(fig1):
    pos = {a: i for i, a in enumerate(fig1.topological_order)}
    for a in fig1.elements:
        for b in fig1.subelements(a):
            assert pos[b] < pos[a]


def test_dtd_graph_has_str_vertex(fig1):
    g = dtd_graph(fig1)
    assert STR in g.vertices
    assert ("F", STR) in g.edges
    assert g.successors("R") == ("A", "B", "J", "K")
    assert len(g.edges) == 4 + 2 + 1 + 1 + 1 + 1 + 2 + 1 + 4


def test_dtd_path(fig1):
    assert dtd_path(fig1, "R", "H") == ("R", "J", "G", "H")
    assert dtd_path(fig1, "B", STR) == ("B", "E", "G", "H", STR)
    assert dtd_path(fig1, "A", "G") is None


def test_round_trip(fig1):
    assert parse_dtd(render_dtd(fig1)) == fig1


def test_comments_and_epsilon():
    d = parse_dtd("# c\ndtd root R\n\nR -> X , Y\n# c2\nX -> epsilon\nY -> #str\n")
    assert d.rule("X") == Empty()


@pytest.mark.parametrize("text, exc, where", [
    ("R -> A\n", DTDSyntaxError, "line 1"),
    ("dtd root R\nR -> A , B + C\nA -> epsilon\nB -> epsilon\nC -> epsilon\n",
     DTDSyntaxError, "line 2"),
    ("dtd root R\nR -> A *  B\n", DTDSyntaxError, "line 2"),
    ("dtd root R\nR -> A , A\nA -> epsilon\n", DTDError, "duplicate"),
    ("dtd root R\nR -> A\nA -> R\n", DTDError, "recursive"),
    ("dtd root R\nR -> A\n", DTDError, "undefined"),
    ("dtd root R\nR -> A + B\nA -> #str\nA -> #str\nB -> #str\n", DTDError, "duplicate production"),
    ("dtd root R\nR -> A\nA -> #str , B\nB -> epsilon\n", DTDSyntaxError, "combined"),
    ("dtd root R\nR -> A\nA -> epsilon\nQ -> epsilon\n", None, None),
])
def test_parse_errors(text, exc, where):
    if exc is None:
        parse_dtd(text)
        return
    with pytest.raises(exc) as info:
        parse_dtd(text, source="x.dtd")
    assert where in str(info.value)


def test_choice_needs_two_alternatives():
    with pytest.raises(DTDSyntaxError):
        parse_dtd("dtd root R\nR -> A +\nA -> epsilon\n")
    with pytest.raises(DTDError):
        DTD({"R": Choice(("A",)), "A": Empty()}, "R")


def test_unknown_element(fig1):
    with pytest.raises(UnknownElementError) as info:
        fig1.rule("Z")
    assert isinstance(info.value, KeyError)
    assert "Z" in str(info.value)


def test_syntax_error_has_position():
    with pytest.raises(DTDSyntaxError) as info:
        parse_dtd("dtd root R\nR -> A + B , C\n", source="f.dtd")
    e = info.value
    assert (e.source, e.line) == ("f.dtd", 2) and e.col is not None


def _reach_bruteforce(d, a):
    out, stack = set(), [a]
    while stack:
        x = stack.pop()
        if x in out:
            continue
        out.add(x)
        if x != STR:
            stack.extend(d.subelements(x))
            if isinstance(d.rule(x), Str):
                stack.append(STR)
    return out


@settings(max_examples=150, deadline=None)
@given(dtds())
def test_below_is_a_partial_order(d):
    types = d.elements
    for a in types:
        assert below(d, a, a)
        assert d.below_set(a) == _reach_bruteforce(d, a)
        for b in types:
            if a != b and below(d, a, b):
                assert not below(d, b, a)
            for c in types:
                if below(d, a, b) and below(d, b, c):
                    assert below(d, a, c)


@settings(max_examples=100, deadline=None)
@given(dtds())
def test_render_round_trip(d):
    assert parse_dtd(render_dtd(d)) == d

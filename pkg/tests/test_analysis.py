from __future__ import annotations

import itertools
import time

import pytest
from hypothesis import given, settings, strategies as st

from conftest import dtds, load_policy, partial_policy_on, total_policy_on
from xmlwac.analysis import (BOTTOM, FORBIDDEN_TRANSITIVITY, INSDEL, MINUS, NEGATIVE_CYCLE,
                             PLUS, apply_T, check_consistency, closure_T, find_violations,
                             forbidden_below, lpce, mark_graph, replace_graph, shortest_path,
                             transitive_closure)
from xmlwac.errors import DTDError
from xmlwac.policy import UAT, Policy, valid_set
from xmlwac.schema import STR, DTD, Choice, Sequence, Star, Str


def warshall(vertices, edges):
    vs = sorted(vertices)
    reach = {(a, b): (a, b) in edges for a in vs for b in vs}
    for k in vs:
        for i in vs:
            for j in vs:
                reach[i, j] = reach[i, j] or (reach[i, k] and reach[k, j])
    return {e for e, r in reach.items() if r}


@settings(max_examples=200, deadline=None)
@given(st.sets(st.tuples(st.sampled_from("abcde"), st.sampled_from("abcde")), max_size=12))
def test_transitive_closure_matches_warshall(edges):
    assert transitive_closure("abcde", edges) == warshall("abcde", edges)
    for a, b in transitive_closure("abcde", edges):
        path = shortest_path(edges, a, b)
        assert path[0] == a and path[-1] == b
        assert all(e in edges for e in zip(path, path[1:]))


def test_replace_graph_running_policy(fig1, running):
    g = replace_graph(fig1, running, "R")
    assert g.vertices == ("A", "B", "J", "K")
    assert g.edges == {("A", "B"), ("B", "J"), ("J", "K"), ("K", "J"), ("K", "B")}
    assert len(g.forbidden_edges) == 7
    with pytest.raises(DTDError):
        replace_graph(fig1, running, "B")


def test_marks_running_policy(fig1, running):
    mg = mark_graph(fig1, running)
    minus = {v for v, m in mg.mu.items() if m == MINUS}
    assert minus == {"R", "B", "E", "G", "J"}
    assert mg.mu[STR] == PLUS
    assert mg.chi == {"B": BOTTOM, "E": BOTTOM, "J": BOTTOM}
    below = forbidden_below(fig1, running.forbid)
    assert below["B"] == UAT.replace("G", "H", "I")
    assert below["A"] is None


def test_violations_running_policy(fig1, running):
    v = check_consistency(fig1, running)
    assert not v.consistent and v.total
    assert {x.ctx for x in v.by_kind(INSDEL)} == {"B", "E", "J"}
    assert {x.edge for x in v.by_kind(FORBIDDEN_TRANSITIVITY)} == {
        ("A", "J"), ("A", "K"), ("B", "K"), ("J", "B")}
    assert {x.vertex for x in v.by_kind(NEGATIVE_CYCLE)} == {"B", "J"}
    cyc = next(x for x in v.violations if x.vertex == "B")
    assert cyc.path == ("B", "J", "K", "B")
    assert "forbidden below B" in cyc.describe()


def test_not_quasiconsistent(fig1):
    p = load_policy(fig1, "not_quasiconsistent.policy")
    res = lpce(p)
    assert not res.quasiconsistent
    assert res.witness == UAT.text("H")


def test_lpce_example(fig1):
    p = Policy(fig1, {UAT.replace("R", "A", "B"), UAT.replace("R", "B", "J")},
               {UAT.text("K")})
    res = lpce(p)
    assert res.quasiconsistent
    assert res.policy.allow == p.allow | {UAT.replace("R", "A", "J")}
    assert check_consistency(fig1, res.policy).consistent


def test_T_adds_everything_below_cycles(fig1):
    s = frozenset({UAT.replace("R", "B", "J"), UAT.replace("R", "J", "B")})
    out = apply_T(fig1, s)
    assert UAT.replace("G", "H", "I") in out and UAT.insert("E", "G") in out
    assert UAT.text("K") not in out
    s2 = frozenset({UAT.insert("B", "E"), UAT.delete("B", "E")})
    assert closure_T(fig1, s2) == s2 | {u for u in valid_set(fig1) if u.ctx in "EGHI"}


# --- dual route: rule checks vs fixpoint closure -----------------------------------

@st.composite
def dtd_and_total(draw):
    d = draw(dtds())
    return d, draw(total_policy_on(d))


@st.composite
def dtd_and_partial(draw):
    d = draw(dtds())
    return d, draw(partial_policy_on(d))


@settings(max_examples=300, deadline=None)
@given(dtd_and_total())
def test_rule_checks_agree_with_closure(case):
    d, p = case
    by_rules = not find_violations(d, p.allow, p.forbid)
    by_closure = not (closure_T(d, p.allow) & p.forbid)
    assert by_rules == by_closure
    assert check_consistency(d, p).consistent == by_rules


@settings(max_examples=300, deadline=None)
@given(dtd_and_partial())
def test_lpce_laws(case):
    d, p = case
    res = lpce(p)
    closed = closure_T(d, p.allow)
    assert res.quasiconsistent == (not closed & p.forbid)
    if res.quasiconsistent:
        q = res.policy
        assert q.is_total and p.allow <= q.allow and p.forbid <= q.forbid
        assert check_consistency(d, q).consistent
        assert closure_T(d, q.allow) == q.allow
    else:
        assert res.witness in p.forbid and res.witness in closed


@settings(max_examples=200, deadline=None)
@given(dtds(), st.data())
def test_T_is_a_closure_operator(d, data):
    vs = valid_set(d)
    s1 = frozenset(data.draw(st.sets(st.sampled_from(vs))) if vs else ())
    extra = frozenset(data.draw(st.sets(st.sampled_from(vs))) if vs else ())
    s2 = s1 | extra
    c1, c2 = closure_T(d, s1), closure_T(d, s2)
    assert s1 <= apply_T(d, s1) and s1 <= c1
    assert c1 <= c2
    assert closure_T(d, c1) == c1 and apply_T(d, c1) == c1


@settings(max_examples=200, deadline=None)
@given(dtd_and_partial())
def test_consistent_total_extension_exists_iff_quasiconsistent(case):
    d, p = case
    free = [u for u in valid_set(d) if u not in p.allow | p.forbid]
    if len(free) > 8:
        free = free[:8]
        p = Policy(d, p.allow, frozenset(valid_set(d)) - p.allow - frozenset(free))
    exts = [Policy.total(d, p.allow | set(c))
            for k in range(len(free) + 1) for c in itertools.combinations(free, k)]
    consistent = [q for q in exts if check_consistency(d, q).consistent]
    res = lpce(p)
    assert res.quasiconsistent == bool(consistent)
    for q in consistent:
        assert res.policy.allow <= q.allow


# --- scale and determinism -----------------------------------------------------

def wide_dtd(n):
    """A layered DTD with ``n`` element types mixing all rule kinds."""
    names = [f"E{i}" for i in range(n)]
    rules = {}
    for i, name in enumerate(names):
        kids = [names[j] for j in (2 * i + 1, 2 * i + 2, 2 * i + 3) if j < n]
        if not kids:
            rules[name] = Str()
        elif i % 3 == 0 and len(kids) >= 2:
            rules[name] = Choice(tuple(kids))
        elif i % 3 == 1:
            rules[name] = Star(kids[0])
        else:
            rules[name] = Sequence(tuple(kids))
    return DTD(rules, names[0])


def test_two_hundred_types_under_a_second():
    d = wide_dtd(200)
    vs = valid_set(d)
    p = Policy.total(d, vs[::2])
    t0 = time.perf_counter()
    v = check_consistency(d, p)
    lpce(Policy(d, frozenset(vs[::3]), frozenset()))
    assert time.perf_counter() - t0 < 1.0
    assert not v.consistent


def test_deterministic(fig1, running):
    a = check_consistency(fig1, running)
    b = check_consistency(fig1, Policy(fig1, set(reversed(sorted(running.allow))),
                                       set(running.forbid)))
    assert a == b

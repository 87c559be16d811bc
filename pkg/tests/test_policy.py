from __future__ import annotations

import pytest
from hypothesis import given, settings

from conftest import DATA, dtds, load_policy
from xmlwac.errors import PolicyError, UnknownElementError
from xmlwac.policy import (UAT, Policy, allowed_ops, is_allowed_seq, is_valid_uat,
                           matches, matching_uat, parse_policy, parse_uat, render_policy,
                           valid_set)
from xmlwac.schema import Choice, Star, Str
from xmlwac.tree import parse_tree
from xmlwac.updates import Delete, Insert, ReplaceText, ReplaceTree, parse_op, resolve_path


def expected_valid_count(d):
    n = 0
    for rg in d.rules.values():
        if isinstance(rg, Star):
            n += 2
        elif isinstance(rg, Str):
            n += 1
        elif isinstance(rg, Choice):
            k = len(rg.alternatives)
            n += k * (k - 1)
    return n


def test_valid_set_fig1(fig1):
    vs = valid_set(fig1)
    # Five star rules, four text rules, R with four alternatives, G with two.
    assert len(vs) == 5 * 2 + 4 + 4 * 3 + 2 == 28
    assert UAT.replace("G", "I", "H") in vs
    assert UAT.replace("G", "H", "H") not in vs
    assert UAT.insert("A", "C") not in vs
    assert list(vs) == sorted(vs)


@settings(max_examples=100, deadline=None)
@given(dtds())
def test_valid_set_size(d):
    vs = valid_set(d)
    assert len(vs) == len(set(vs)) == expected_valid_count(d)
    assert all(is_valid_uat(u, d) for u in vs)


def test_invalid_uats(fig1):
    assert not is_valid_uat(UAT.replace("B", "B", "B"), fig1)
    assert not is_valid_uat(UAT.insert("R", "A"), fig1)
    assert not is_valid_uat(UAT.text("G"), fig1)
    with pytest.raises(PolicyError, match="same type"):
        Policy(fig1, {UAT.replace("R", "B", "B")})
    with pytest.raises(UnknownElementError):
        Policy(fig1, {UAT.insert("Z", "E")})


def test_uat_text():
    for text in ("(G, replace(H,I))", "(B, insert(E))", "(B, delete(E))", "(H, replace(str,str))"):
        assert str(parse_uat(text)) == text
    assert parse_uat("(H, replace(str,str))") == UAT.text("H")
    with pytest.raises(PolicyError):
        parse_uat("(H, move(X))")


def test_running_policy(fig1, running):
    assert running.is_total
    assert len(running.allow) == 20
    assert len(running.forbid) == 8
    assert UAT.replace("G", "H", "I") in running.forbid


def test_policy_round_trip(fig1, running):
    text = render_policy(running, "total")
    p, mode = parse_policy(text, fig1)
    assert (p, mode) == (running, "total")
    partial = load_policy(fig1, "not_quasiconsistent.policy")
    p2, mode2 = parse_policy(render_policy(partial, "partial"), fig1)
    assert p2 == partial and mode2 == "partial" and not p2.is_total


@pytest.mark.parametrize("body, match", [
    ("allow R replace(A,B)\n", "header"),
    ("policy mode total\nallow R replace(A,A)\n", "line 2"),
    ("policy mode partial\nallow B insert(E)\nforbid B insert(E)\n", "both allowed"),
    ("policy mode total\nallow B insert(E)\nforbid B delete(E)\n", "total completion"),
    ("policy mode total\npermit B insert(E)\n", "line 2"),
])
def test_policy_errors(fig1, body, match):
    with pytest.raises(PolicyError, match=match):
        parse_policy(body, fig1, source="p.policy")


def test_unknown_element_in_policy(fig1):
    with pytest.raises(UnknownElementError, match="line 2"):
        parse_policy("policy mode total\nallow Z insert(E)\n", fig1)


def test_total_mode_forbid_may_match_complement(fig1):
    body = "policy mode total\nallow B insert(E)\n" + "".join(
        f"forbid {u.ctx} {u.op_text()}\n" for u in valid_set(fig1) if u != UAT.insert("B", "E"))
    p, _ = parse_policy(body, fig1)
    assert p == Policy.total(fig1, {UAT.insert("B", "E")})


def test_empty_allow(fig1):
    p = load_policy(fig1, "empty_allow.policy")
    assert not p.allow and len(p.forbid) == 28


def test_matches(fig1):
    t = parse_tree('R(B(E(G(H("x")))))')
    e = resolve_path(t, "R/B/E")
    g = resolve_path(t, "R/B/E/G")
    h = resolve_path(t, "R/B/E/G/H")
    s = resolve_path(t, "R/B/E/G/H/#str")
    cases = [
        (Insert(e, parse_tree('G(I("y"))', 50)), UAT.insert("E", "G")),
        (Delete(g), UAT.delete("E", "G")),
        (ReplaceTree(h, parse_tree('I("y")', 50)), UAT.replace("G", "H", "I")),
        (ReplaceText(s, "z"), UAT.text("H")),
        (parse_op("replace(R/B, J)", t), UAT.replace("R", "B", "J")),
    ]
    for op, u in cases:
        assert matches(op, u, t, fig1)
        assert matching_uat(op, t, fig1) == u
    # Inserted subtree must be an instance of the inserted type.
    assert not matches(Insert(e, parse_tree("G", 50)), UAT.insert("E", "G"), t, fig1)
    assert matching_uat(Insert(e, parse_tree("G", 50)), t, fig1) is None
    assert matching_uat(ReplaceTree(h, parse_tree('H("q")', 50)), t, fig1) is None


def test_allowed_sequences(fig1, running):
    t = parse_tree('R(B(E(G(H("x")))))')
    seq = [parse_op("delete(R/B/E/G)", t)]
    assert is_allowed_seq(running, t, seq)
    t2 = parse_tree('R(B(E(G(H("x")))))')
    bad = [parse_op('replace(R/B, K("k"))', t2)]
    assert not is_allowed_seq(running, t2, bad)
    assert not allowed_ops(running, t2)(bad[0])


def test_policy_files_parse(fig1):
    for name in ("running.policy", "running_partial.policy", "not_quasiconsistent.policy",
                 "empty_allow.policy"):
        parse_policy((DATA / name).read_text(), fig1, source=name)

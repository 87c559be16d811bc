from __future__ import annotations

import itertools
import random
from pathlib import Path

import pytest

from xmlwac.policy import Policy, parse_policy, valid_set
from xmlwac.schema import parse_dtd

DATA = Path(__file__).parent / "data"
SMALL_DTDS = ("small_choice.dtd", "small_star.dtd", "small_seq.dtd")


def load_dtd(name):
    return parse_dtd((DATA / name).read_text(), source=name)


def load_policy(d, name):
    return parse_policy((DATA / name).read_text(), d, source=name)[0]


def total_policies(d):
    """Every total policy over ``d``."""
    vs = valid_set(d)
    for mask in range(1 << len(vs)):
        yield Policy.total(d, [u for i, u in enumerate(vs) if mask >> i & 1])


def partial_policies(d):
    """Every partial policy over ``d`` (each UAT allowed, forbidden or unspecified)."""
    vs = valid_set(d)
    for marks in itertools.product((0, 1, 2), repeat=len(vs)):
        yield Policy(d, frozenset(u for u, m in zip(vs, marks) if m == 1),
                     frozenset(u for u, m in zip(vs, marks) if m == 2))


def random_partial_policies(d, n, seed):
    rng = random.Random(seed)
    vs = valid_set(d)
    for _ in range(n):
        marks = [rng.randrange(3) for _ in vs]
        yield Policy(d, frozenset(u for u, m in zip(vs, marks) if m == 1),
                     frozenset(u for u, m in zip(vs, marks) if m == 2))


def toggled_policies(p, k):
    """``p`` with every set of at most ``k`` UATs moved between allow and forbid."""
    vs = valid_set(p.dtd)
    for r in range(k + 1):
        for flip in itertools.combinations(vs, r):
            allow = set(p.allow) ^ set(flip)
            yield Policy.total(p.dtd, allow)


@pytest.fixture(scope="session")
def fig1():
    return load_dtd("fig1.dtd")


@pytest.fixture(scope="session")
def running(fig1):
    return load_policy(fig1, "running.policy")


@pytest.fixture(scope="session")
def small_dtds():
    return {name: load_dtd(name) for name in SMALL_DTDS}


# --- hypothesis strategies ------------------------------------------------------

from hypothesis import strategies as st  # noqa: E402

from xmlwac.schema import DTD, Choice, Empty, Sequence, Star, Str  # noqa: E402


@st.composite
def dtds(draw, max_types=7):
    """Random structured DTD; type ``Ti`` only refers to ``Tj`` with ``j > i``."""
    n = draw(st.integers(1, max_types))
    names = [f"T{i}" for i in range(n)]
    rules = {}
    for i, name in enumerate(names):
        later = names[i + 1:]
        kinds = ["str", "empty"] + (["star", "seq"] if later else []) \
            + (["choice"] if len(later) >= 2 else [])
        kind = draw(st.sampled_from(kinds))
        if kind == "str":
            rules[name] = Str()
        elif kind == "empty":
            rules[name] = Empty()
        elif kind == "star":
            rules[name] = Star(draw(st.sampled_from(later)))
        else:
            lo = 2 if kind == "choice" else 1
            kids = draw(st.lists(st.sampled_from(later), min_size=lo,
                                 max_size=min(3, len(later)), unique=True))
            rules[name] = Choice(tuple(kids)) if kind == "choice" else Sequence(tuple(kids))
    return DTD(rules, names[0])


@st.composite
def total_policy_on(draw, d):
    vs = valid_set(d)
    bits = draw(st.lists(st.booleans(), min_size=len(vs), max_size=len(vs)))
    return Policy.total(d, [u for u, b in zip(vs, bits) if b])


@st.composite
def partial_policy_on(draw, d):
    vs = valid_set(d)
    marks = draw(st.lists(st.integers(0, 2), min_size=len(vs), max_size=len(vs)))
    return Policy(d, frozenset(u for u, m in zip(vs, marks) if m == 1),
                  frozenset(u for u, m in zip(vs, marks) if m == 2))


# --- acceptance summary ------------------------------------------------------------

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[1].rstrip(":")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")

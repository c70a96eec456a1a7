import itertools
import re

import pytest
from hypothesis import given, strategies as st

from shapval.query import (
    CQ,
    RPQ,
    UCQ,
    QuerySyntaxError,
    canonical_supports,
    core,
    evaluate,
    is_minimal_support,
    is_relevant_fact,
    minimal_supports_in,
    parse_query,
)
from shapval.query.regex import Alt, Concat, Epsilon, Star, Symbol
from shapval.relational import Constant, constants_of, fact, sorted_facts

Q_RST = parse_query("R(x), S(x,y), T(y)")


# ---------------------------------------------------------------------------
# parsing


def test_parse_cq():
    assert isinstance(Q_RST, CQ) and len(Q_RST.atoms) == 3 and Q_RST.constants == frozenset()


def test_parse_rpq():
    q = parse_query("path 'a' 'b' : (A B | B A)")
    assert isinstance(q, RPQ)
    assert q.constants == {Constant("a"), Constant("b")}


def test_parse_ucq():
    q = parse_query("R('a',x) | R('b',x)")
    assert isinstance(q, UCQ) and len(q.disjuncts) == 2
    assert q.constants == {Constant("a"), Constant("b")}


def test_bar_inside_regex_is_alternation():
    q = parse_query("path x 'a' : A B | B A, R(x,y)")
    assert q.kind == "CRPQ" and len(q.path_atoms) == 2


def test_bar_before_atom_separates_disjuncts():
    q = parse_query("path x 'a' : A B | R(x,y)")
    assert q.kind == "UCRPQ"


@pytest.mark.parametrize("text", ["R(x", "R(x),", "path x : A", "R(x), R(x,y)", "", "R('a)", "path 'a' 'b' : (A"])
def test_syntax_errors(text):
    with pytest.raises(QuerySyntaxError):
        parse_query(text)


def test_syntax_error_has_position():
    with pytest.raises(QuerySyntaxError) as exc:
        parse_query("R(x), S(x y)")
    assert "column" in str(exc.value)


@pytest.mark.parametrize("text", ["R(x), S(x,y), T(y)", "path 'a' 'b' : A B*", "R('a',x) | S(x)", "path x y : A, path y 'c' : B | C"])
def test_print_parse_roundtrip(text):
    q = parse_query(text)
    assert parse_query(str(q)) == q


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_examples():
    assert evaluate(Q_RST, {fact("R", "a"), fact("S", "a", "b"), fact("T", "b")})
    assert not evaluate(Q_RST, {fact("R", "a"), fact("S", "c", "b"), fact("T", "b")})
    assert evaluate(parse_query("path 'a' 'a' : A*"), set())


small_facts = st.lists(
    st.tuples(st.sampled_from("ABR"), st.sampled_from("abcdef"), st.sampled_from("abcdef")),
    max_size=8,
).map(lambda xs: frozenset(fact(r, u, v) for r, u, v in xs))

QUERIES = [
    "R(x,y), R(y,z)",
    "A(x,'a'), B('a',y)",
    "A(x,y) | B(y,y)",
    "path 'a' 'b' : A B*",
    "path 'a' 'c' : (A | B) (A | B)",
    "path x 'a' : A B | B A",
    "path x y : A A, path y 'b' : B",
]


@given(st.sampled_from(QUERIES), small_facts, small_facts)
def test_evaluation_is_monotone(text, facts, more):
    q = parse_query(text)
    if q.evaluate(facts):
        assert q.evaluate(facts | more)


def to_python_re(node):
    """Regex over relation tokens, matched against '<A><B>...' strings."""
    if isinstance(node, Symbol):
        return f"<{re.escape(node.relation)}>"
    if isinstance(node, Epsilon):
        return ""
    if isinstance(node, Star):
        return f"(?:{to_python_re(node.child)})*"
    if isinstance(node, Concat):
        return "".join(f"(?:{to_python_re(p)})" for p in node.parts)
    if isinstance(node, Alt):
        return "|".join(f"(?:{to_python_re(o)})" for o in node.options)
    raise TypeError(node)


def rpq_by_words(q, facts):
    """Walk every path of length <= |facts| from the source and test its word."""
    pattern = re.compile(to_python_re(q.regex))
    edges = [(f.args[0], f.relation, f.args[1]) for f in facts]
    frontier = [(q.src, "")]
    for _ in range(len(facts) + 1):
        nxt = []
        for node, word in frontier:
            if node == q.dst and pattern.fullmatch(word):
                return True
            nxt.extend((v, word + f"<{r}>") for u, r, v in edges if u == node)
        frontier = nxt
    return False


RPQS = [
    "path 'a' 'b' : A B*",
    "path 'a' 'b' : (A | B)* A",
    "path 'a' 'a' : A B A",
    "path 'a' 'c' : A* B A*",
    "path 'b' 'a' : (A B)* | eps",
]


@given(st.sampled_from(RPQS), small_facts.map(lambda fs: frozenset(f for f in fs if f.relation in "AB")))
def test_rpq_matches_word_oracle(text, facts):
    q = parse_query(text)
    facts = frozenset(f for f in facts if len(constants_of(facts)) <= 6)
    assert q.evaluate(facts) == rpq_by_words(q, facts)


# ---------------------------------------------------------------------------
# supports


def test_minimal_supports_examples():
    D = {fact("R", "a"), fact("S", "a", "b"), fact("T", "b"), fact("R", "c")}
    assert minimal_supports_in(Q_RST, D) == [frozenset({fact("R", "a"), fact("S", "a", "b"), fact("T", "b")})]
    R = parse_query("R(x)")
    assert minimal_supports_in(R, {fact("R", "a"), fact("R", "b")}) == [
        frozenset({fact("R", "a")}),
        frozenset({fact("R", "b")}),
    ]
    assert minimal_supports_in(Q_RST, {fact("R", "a")}) == []


@given(st.sampled_from(QUERIES), small_facts)
def test_minimal_supports_are_minimal(text, facts):
    q = parse_query(text)
    sups = minimal_supports_in(q, facts)
    for s in sups:
        assert q.evaluate(s)
        assert all(not q.evaluate(s - {f}) for f in s)
    # brute force: exactly the inclusion-minimal satisfying subsets
    facts = sorted_facts(facts)
    satisfying = [frozenset(c) for r in range(len(facts) + 1) for c in itertools.combinations(facts, r) if q.evaluate(c)]
    minimal = {s for s in satisfying if not any(t < s for t in satisfying)}
    assert set(sups) == minimal


def test_canonical_supports_examples():
    (s,) = canonical_supports(Q_RST)
    assert len(s.facts) == 3 and q_rst_shape(s.facts)
    (p,) = canonical_supports(parse_query("path 'a' 'b' : A A"), 2)
    (f0,) = constants_of(p.facts) - {Constant("a"), Constant("b")}
    assert p.facts == {fact("A", "a", f0.name), fact("A", f0.name, "b")}
    (loop,) = canonical_supports(parse_query("R(x,x)"))
    (only,) = loop.facts
    assert only.args[0] == only.args[1]


def q_rst_shape(facts):
    return Q_RST.evaluate(facts) and len(constants_of(facts)) == 2


@pytest.mark.parametrize("text", QUERIES + ["R(x,y), R(y,x), R(x,x)", "R(x) | R(x), S(x)"])
def test_canonical_supports_satisfy_and_are_minimal(text):
    q = parse_query(text)
    for s in canonical_supports(q):
        assert q.evaluate(s.facts)
        assert is_minimal_support(q, s.facts)
        assert minimal_supports_in(q, s.facts) == [s.facts]


def test_core_folds_redundant_atoms():
    q = parse_query("R(x,y), R(x,z)")
    assert len(core(q.atoms)) == 1
    q = parse_query("R(x,y), R(y,x), R(x,x)")
    assert len(core(q.atoms)) == 1


def test_redundant_disjunct_is_dropped():
    q = parse_query("R(x) | R(x), S(x)")
    assert [len(s.facts) for s in canonical_supports(q)] == [1]


def test_relevance_examples():
    assert is_relevant_fact(Q_RST, fact("S", "a", "b"))
    assert not is_relevant_fact(Q_RST, fact("U", "a"))
    assert not is_relevant_fact(parse_query("R('a',x)"), fact("R", "b", "c"))
    assert is_relevant_fact(parse_query("R('a',x)"), fact("R", "a", "c"))


def test_relevance_respects_minimality():
    # R(a,a) satisfies the first disjunct alone, so it never helps the second
    q = parse_query("R(x,x) | R(x,y), S(y)")
    assert is_relevant_fact(q, fact("R", "a", "a"))
    assert not is_relevant_fact(parse_query("R(x,x) | R(x,'a'), S('a')"), fact("S", "b"))

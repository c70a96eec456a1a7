import itertools
import random
from fractions import Fraction
from math import comb, factorial

import pytest
from hypothesis import given, settings, strategies as st

from instances import random_db
from shapval.counting import fgmc_vector
from shapval.errors import ConstructionError, HypothesisError
from shapval.query import parse_query
from shapval.reduction import (
    CASE3,
    CONTRIBUTES,
    ShSeries,
    compute_Z,
    construct_instances,
    direct_marginal,
    duplicate_support,
    encode_counts,
    factorial_matrix,
    fgmc_via_shapley,
    marginal_case,
    normalize_instance,
    reinflate,
    self_test_Z,
    solve_factorial_system,
)
from shapval.relational import Constant, PartitionedDatabase, constants_of, fact, sorted_facts
from shapval.shapley import QueryGame, shapley_permutations_all, shapley_subsets

Q_RST = parse_query("R(x), S(x,y), T(y)")
R = parse_query("R(x)")
STAR = PartitionedDatabase({fact("R", "a"), fact("S", "a", "b"), fact("T", "b")})
TWO_R = PartitionedDatabase({fact("R", "a"), fact("R", "b")})
DECOMP = parse_query("R(x,y), S(u,v)")
U = parse_query("U(x,y)")


def seeds():
    return st.integers(0, 10**9).map(random.Random)


def weight(m, N):
    return Fraction(factorial(m) * factorial(N - m - 1), factorial(N))


# ---------------------------------------------------------------------------
# arithmetic


def test_Z_self_test_passes():
    self_test_Z(10)


@pytest.mark.parametrize("i, n, t", [(0, 0, 0), (1, 0, 0), (2, 3, 1), (1, 2, 2), (3, 1, 0)])
def test_Z_against_coalition_listing(i, n, t):
    # players: n base facts, i copies of mu, t tail facts (mu itself excluded)
    N = n + i + 1 + t
    copies, tail = range(n, n + i), range(n + i, n + i + t)
    total = Fraction(0)
    for r in range(N):
        for B in itertools.combinations(range(N - 1), r):
            if set(B) & set(copies) or not set(tail) <= set(B):
                total += weight(len(B), N)
    assert compute_Z(i, n, t) == total


def test_Z_examples():
    assert compute_Z(0, 0, 0) == 0
    assert compute_Z(1, 0, 0) == Fraction(1, 2)


def test_factorial_matrix_example():
    assert factorial_matrix(1, 0) == [[Fraction(1, 2), Fraction(1, 2)], [Fraction(1, 3), Fraction(1, 6)]]


@given(st.lists(st.integers(0, 300), min_size=1, max_size=10), st.integers(0, 3))
def test_solve_inverts_encode(counts, t):
    assert list(solve_factorial_system(encode_counts(counts, t))) == counts


def test_solve_rejects_negative_counts():
    series = ShSeries((Fraction(-1, 2), Fraction(-1, 3)), 1, 0)
    with pytest.raises(ConstructionError):
        solve_factorial_system(series)


def test_solve_rejects_fractional_counts():
    with pytest.raises(ConstructionError):
        solve_factorial_system(ShSeries((Fraction(1, 7), Fraction(1, 5)), 1, 0))


def test_reinflate():
    assert reinflate([0, 1], 2) == (0, 1, 2, 1)
    assert reinflate([1, 0, 0], 0) == (1, 0, 0)


# ---------------------------------------------------------------------------
# the gadget


def test_duplicate_support_shape():
    S = {fact("R", "f"), fact("S", "f", "g"), fact("T", "g")}
    frag = duplicate_support(S, frozenset(), 2)
    assert frag.anchor == Constant("f")
    assert frag.copies[0] == {fact("R", "f"), fact("S", "f", "g")}
    assert frag.tail == {fact("T", "g")}
    assert frag.pivot in frag.copies[0]
    assert len(frag.pivot_copies) == 2
    for copy in frag.copies[1:]:
        assert len(copy) == 2 and not copy & frag.tail
        assert Constant("g") in constants_of(copy)


def test_endogenous_only_anchor_is_in_one_fact():
    S = {fact("R", "f"), fact("S", "f", "g"), fact("T", "g")}
    with pytest.raises(HypothesisError):
        duplicate_support(S, frozenset(), 1, endogenous_only=True)
    frag = duplicate_support({fact("R", "f")}, frozenset(), 3, endogenous_only=True)
    assert all(len(c) == 1 for c in frag.copies)


def check_instance_structure(inst, plain):
    frag = inst.fragment
    gadget_endo = {frag.pivot, *frag.pivot_copies} | frag.tail
    assert inst.db.endo == inst.base.endo | gadget_endo
    assert frag.pivot in frag.copies[0]
    assert not frag.tail & frozenset().union(*frag.copies)
    assert inst.base.endo == plain.endo


@given(seeds(), st.sampled_from(["q_RST", "R(x)"]), st.booleans())
@settings(max_examples=40)
def test_case_analysis_is_exhaustively_right(rng, family, endogenous_only):
    q = Q_RST if family == "q_RST" else R
    db = random_db(rng, family, max_endo=4, max_exo=2)
    if family == "q_RST" and endogenous_only:
        endogenous_only = False
    if q.evaluate(db.exo):
        return
    oracle_query, instances = construct_instances(q, db, "pseudo_connected", 2, endogenous_only=endogenous_only)
    for inst in instances:
        check_instance_structure(inst, db)
        others = sorted_facts(inst.db.endo - {inst.pivot})
        g = QueryGame(inst.db, oracle_query)
        N = len(inst.db.endo)
        case3 = Fraction(0)
        for r in range(len(others) + 1):
            for B in itertools.combinations(others, r):
                case = marginal_case(inst, B)
                assert (case == CONTRIBUTES) == (direct_marginal(oracle_query, inst, B) == 1)
                if case == CASE3:
                    case3 += weight(len(B), N)
        t = len(inst.fragment.tail)
        sh = shapley_subsets(g, inst.pivot)
        assert 1 - sh - compute_Z(inst.i, len(db.endo), t) == case3


@given(seeds())
@settings(max_examples=25)
def test_case_analysis_leak_mode(rng):
    q = parse_query("R(x), S(x,y), T(y)")
    db = random_db(rng, "q_RST", max_endo=4, max_exo=2)
    if q.evaluate(db.exo):
        return
    oracle_query, instances = construct_instances(q, db, "leak", 1, q_prime=U)
    for inst in instances:
        others = sorted_facts(inst.db.endo - {inst.pivot})
        for r in range(len(others) + 1):
            for B in itertools.combinations(others, r):
                assert (marginal_case(inst, B) == CONTRIBUTES) == (direct_marginal(oracle_query, inst, B) == 1)


# ---------------------------------------------------------------------------
# end to end


def test_examples():
    assert fgmc_via_shapley(Q_RST, STAR) == (0, 0, 0, 1)
    assert fgmc_via_shapley(R, TWO_R) == (0, 2, 1)
    assert fgmc_via_shapley(R, TWO_R, endogenous_only=True) == (0, 2, 1)
    db = PartitionedDatabase({fact("R", "a", "b"), fact("S", "c", "d"), fact("R", "b", "b")}, {fact("S", "a", "a")})
    assert fgmc_via_shapley(DECOMP, db, "decomposable") == fgmc_vector(DECOMP, db)


@given(seeds())
@settings(max_examples=20)
def test_pseudo_connected_mode(rng):
    db = random_db(rng, "q_RST", max_endo=5)
    assert fgmc_via_shapley(Q_RST, db) == fgmc_vector(Q_RST, db)


@given(seeds())
@settings(max_examples=20)
def test_rpq_island_mode(rng):
    q = parse_query("path 'a' 'c' : A B")
    db = random_db(rng, "rpq2", max_endo=4)
    assert fgmc_via_shapley(q, db) == fgmc_vector(q, db)


@given(seeds())
@settings(max_examples=15)
def test_leak_mode(rng):
    db = random_db(rng, "q_RST", max_endo=4)
    expected = fgmc_vector(Q_RST, db)
    assert fgmc_via_shapley(Q_RST, db, "leak", q_prime=U) == expected


@given(seeds())
@settings(max_examples=15)
def test_leak_mode_with_query_constants(rng):
    q = parse_query("R('a',x), S(x)")
    names = "abc"
    pool = [fact("R", u, v) for u in names for v in names] + [fact("S", u) for u in names]
    chosen = rng.sample(pool, rng.randint(0, 6))
    k = rng.randint(0, min(2, len(chosen)))
    db = PartitionedDatabase(frozenset(chosen[k:]), frozenset(chosen[:k]))
    assert fgmc_via_shapley(q, db, "leak", q_prime=parse_query("V(x,'a')")) == fgmc_vector(q, db)


@given(seeds())
@settings(max_examples=15)
def test_decomposable_mode(rng):
    db = random_db(rng, "decomposable", max_endo=5)
    assert fgmc_via_shapley(DECOMP, db, "decomposable") == fgmc_vector(DECOMP, db)


def test_decomposable_with_constants_needs_flag():
    q = parse_query("R('a',x), R('b',y)")
    db = PartitionedDatabase({fact("R", "a", "c"), fact("R", "b", "c"), fact("R", "c", "a")})
    with pytest.raises(HypothesisError):
        fgmc_via_shapley(q, db, "decomposable")
    assert fgmc_via_shapley(q, db, "decomposable", experimental=True) == fgmc_vector(q, db)


@given(seeds())
@settings(max_examples=15)
def test_endogenous_only_adds_no_exogenous_facts(rng):
    db = random_db(rng, "R(x)", max_endo=5, max_exo=0)
    trace = []
    assert fgmc_via_shapley(R, db, endogenous_only=True, trace=trace) == fgmc_vector(R, db)
    for rec in trace:
        assert not rec.instance.db.exo


def test_oracle_is_pluggable():
    calls = []

    def oracle(q, db, alpha):
        calls.append(alpha)
        return shapley_permutations_all(QueryGame(db, q))[alpha]

    assert fgmc_via_shapley(R, TWO_R, shapley_oracle=oracle) == (0, 2, 1)
    assert len(calls) == 3


def test_trace_records():
    trace = []
    fgmc_via_shapley(Q_RST, STAR, trace=trace)
    assert [r.i for r in trace] == [0, 1, 2, 3]
    first = trace[0].to_json()
    assert set(first) == {"i", "anchor", "pivot", "database", "oracle", "Z", "Sh_i"}
    assert first["Z"] == {"num": "1", "den": "2"}
    assert Fraction(int(first["Sh_i"]["num"]), int(first["Sh_i"]["den"])) == trace[0].Sh_i


# ---------------------------------------------------------------------------
# hypotheses


def test_leak_hypotheses_are_enforced():
    db = PartitionedDatabase({fact("R", "a", "b")})
    # (1): not variable-connected
    with pytest.raises(HypothesisError, match=r"\(1\)"):
        fgmc_via_shapley(parse_query("R(x,'a'), S('a',y)"), db, "leak", q_prime=U)
    # S' must be a minimal support of q'
    with pytest.raises(HypothesisError, match="minimal support"):
        fgmc_via_shapley(Q_RST, db, "leak", q_prime=U, s_prime={fact("U", "c", "d"), fact("U", "d", "e")})
    # (2a): S' satisfies q
    q_r = parse_query("R(x,y)")
    with pytest.raises(HypothesisError, match=r"\(2a\)"):
        fgmc_via_shapley(q_r, db, "leak", q_prime=parse_query("R(x,y)"), s_prime={fact("R", "c", "d")})
    # (2b): S' contains a q-leak
    q = parse_query("path x 'a' : A B | B A")
    with pytest.raises(HypothesisError, match=r"\(2b\)"):
        fgmc_via_shapley(q, db, "leak", q_prime=parse_query("A(x,'a')"), s_prime={fact("A", "b", "a")})


def test_modes_validated():
    with pytest.raises(ValueError):
        fgmc_via_shapley(R, TWO_R, "nonsense")
    with pytest.raises(HypothesisError):
        fgmc_via_shapley(Q_RST, STAR, "decomposable")
    with pytest.raises(HypothesisError):
        fgmc_via_shapley(parse_query("R('a','b')"), PartitionedDatabase({fact("R", "a", "b")}))


def test_normalisation():
    s_prime = {fact("U", "a", "z")}
    db = PartitionedDatabase({fact("R", "a"), fact("U", "a", "z")}, {fact("S", "a", "b")})
    norm = normalize_instance(Q_RST, U, s_prime, db)
    assert norm.dropped_endogenous == 0  # U(a,z) is renamed away before the overlap test
    assert not constants_of(norm.db.facts) & {Constant("a"), Constant("z")}
    shortcut = normalize_instance(R, None, (), PartitionedDatabase({fact("R", "b")}, {fact("R", "a")}))
    assert shortcut.shortcut == (1, 1)


def test_overlapping_support_is_dropped_and_reinflated():
    q = parse_query("R('a',x), S(x)")
    q_prime = parse_query("V(x,'a')")
    s_prime = {fact("V", "a", "a")}
    db = PartitionedDatabase({fact("R", "a", "b"), fact("S", "b"), fact("V", "a", "a")})
    norm = normalize_instance(q, q_prime, s_prime, db)
    assert norm.dropped_endogenous == 1
    assert fact("V", "a", "a") not in norm.db.facts
    assert fgmc_via_shapley(q, db, "leak", q_prime=q_prime, s_prime=s_prime) == fgmc_vector(q, db)


def test_counts_sum_when_exogenous_satisfies():
    db = PartitionedDatabase({fact("R", "b"), fact("R", "c")}, {fact("R", "a")})
    for mode in ("pseudo_connected", "leak"):
        kw = {"q_prime": U} if mode == "leak" else {}
        assert fgmc_via_shapley(R, db, mode, **kw) == tuple(comb(2, j) for j in range(3))

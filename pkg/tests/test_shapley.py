import itertools
import random
from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, strategies as st

from instances import FAMILIES, random_instance
from shapval.counting import fgmc_vector
from shapval.errors import HypothesisError
from shapval.query import is_relevant_fact, parse_query
from shapval.relational import Constant, PartitionedDatabase, fact, sorted_facts
from shapval.shapley import (
    ConstantPartition,
    QueryGame,
    fgmc_constants,
    fgmc_constants_vector,
    fgmc_constants_via_shapley,
    max_shapley,
    max_shapley_fast,
    shapley_all,
    shapley_constants,
    shapley_constants_via_fgmc,
    shapley_permutations,
    shapley_permutations_all,
    shapley_subsets,
    shapley_via_fgmc,
)

Q_RST = parse_query("R(x), S(x,y), T(y)")
STAR = PartitionedDatabase({fact("R", "a"), fact("S", "a", "b"), fact("T", "b")})
BRANCHING = PartitionedDatabase({fact("R", "a"), fact("S", "a", "b"), fact("S", "a", "c")})
RS = parse_query("R(x), S(x,y)")
AUTHORS = frozenset({fact("Pub", "a", "p"), fact("Pub", "b", "p"), fact("Kw", "p", "s")})
PUB = parse_query("Pub(x,y), Kw(y,'s')")
a, b, p, s = (Constant(n) for n in "abps")


def orderings_oracle(q, db, alpha):
    """Average marginal contribution over explicit orderings (no caching, no tables)."""
    players = sorted_facts(db.endo)
    total = 0
    for order in itertools.permutations(players):
        before = list(order[: order.index(alpha)])
        total += q.evaluate(db.exo | set(before) | {alpha}) - q.evaluate(db.exo | set(before))
    return Fraction(total, factorial(len(players)))


def seeds():
    return st.integers(0, 10**9).map(random.Random)


@pytest.mark.parametrize("route", ["permutations", "subsets", "fgmc"])
def test_examples_all_routes(route):
    fn = {"permutations": shapley_permutations, "subsets": shapley_subsets, "fgmc": shapley_via_fgmc}[route]
    g = QueryGame(STAR, Q_RST)
    assert all(fn(g, f) == Fraction(1, 3) for f in STAR.endo)
    g = QueryGame(PartitionedDatabase({fact("R", "a"), fact("R", "b")}), parse_query("R(x)"))
    assert fn(g, fact("R", "a")) == Fraction(1, 2)
    g = QueryGame(BRANCHING, RS)
    assert fn(g, fact("R", "a")) == Fraction(2, 3) == orderings_oracle(RS, BRANCHING, fact("R", "a"))
    assert fn(g, fact("S", "a", "b")) == Fraction(1, 6) == orderings_oracle(RS, BRANCHING, fact("S", "a", "b"))


def test_exogenous_middle_fact():
    db = PartitionedDatabase({fact("R", "a"), fact("T", "b")}, {fact("S", "a", "b")})
    g = QueryGame(db, Q_RST)
    assert shapley_all(g) == {fact("R", "a"): Fraction(1, 2), fact("T", "b"): Fraction(1, 2)}


def test_wealth():
    g = QueryGame(STAR, Q_RST)
    assert g.wealth(STAR.endo) == 1 and g.wealth(()) == 0
    g = QueryGame(PartitionedDatabase({fact("R", "b")}, {fact("R", "a")}), parse_query("R(x)"))
    assert g.wealth({fact("R", "b")}) == 0
    with pytest.raises(ValueError):
        g.wealth({fact("R", "a")})


def test_satisfied_by_exogenous_gives_zero():
    db = PartitionedDatabase({fact("R", "b"), fact("R", "c")}, {fact("R", "a")})
    g = QueryGame(db, parse_query("R(x)"))
    assert all(shapley_via_fgmc(g, f) == 0 for f in db.endo)


def test_non_player_rejected():
    g = QueryGame(STAR, Q_RST)
    for fn in (shapley_permutations, shapley_subsets, shapley_via_fgmc):
        with pytest.raises(ValueError):
            fn(g, fact("R", "z"))


def test_via_fgmc_makes_two_calls():
    calls = []

    def oracle(q, db):
        calls.append(db)
        return fgmc_vector(q, db)

    assert shapley_via_fgmc(QueryGame(STAR, Q_RST), fact("S", "a", "b"), oracle) == Fraction(1, 3)
    assert len(calls) == 2


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_routes_agree(rng, family):
    _, q, db = random_instance(rng, family, max_endo=6)
    g = QueryGame(db, q)
    perm = shapley_permutations_all(g)
    subs = shapley_all(g)
    for f in g.players():
        assert perm[f] == subs[f] == shapley_via_fgmc(g, f) == shapley_subsets(g, f)
    if g.players():
        f = rng.choice(g.players())
        assert perm[f] == orderings_oracle(q, db, f)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_efficiency(rng, family):
    _, q, db = random_instance(rng, family)
    g = QueryGame(db, q)
    assert sum(shapley_all(g).values(), Fraction(0)) == g.wealth(db.endo)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_null_player(rng, family):
    _, q, db = random_instance(rng, family, max_endo=6)
    g = QueryGame(db, q)
    values = shapley_all(g)
    for f in g.players():
        if not is_relevant_fact(q, f):
            assert values[f] == 0
        assert values[f] >= 0


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_symmetric_players_get_equal_values(rng, family):
    # swapping two facts that play identical roles leaves values unchanged
    _, q, db = random_instance(rng, family, max_endo=6)
    g = QueryGame(db, q)
    values = shapley_all(g)
    table = g.table()
    n = len(g.players())
    for i, j in itertools.combinations(range(n), 2):
        swap = lambda m: m ^ ((1 << i) | (1 << j)) if (m >> i & 1) != (m >> j & 1) else m
        if all(table[m] == table[swap(m)] for m in range(1 << n)):
            assert values[g.players()[i]] == values[g.players()[j]]


def test_max_shapley_examples():
    assert max_shapley(QueryGame(BRANCHING, RS)) == (fact("R", "a"), Fraction(2, 3))
    assert max_shapley(QueryGame(STAR, Q_RST)) == (fact("R", "a"), Fraction(1, 3))
    db = PartitionedDatabase({fact("R", "a"), fact("T", "b")})
    assert max_shapley(QueryGame(db, parse_query("R(x)"))) == (fact("R", "a"), Fraction(1))
    with pytest.raises(ValueError):
        max_shapley(QueryGame(PartitionedDatabase(), Q_RST))


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_singleton_support_attains_maximum(rng, family):
    _, q, db = random_instance(rng, family)
    g = QueryGame(db, q)
    if not g.players():
        return
    values = shapley_all(g)
    _, best = max_shapley(g)
    _, fast_value = max_shapley_fast(g)
    assert fast_value == best
    for f in g.players():
        if g.wealth({f}) == 1:
            assert values[f] == best


# ---------------------------------------------------------------------------
# constants


def test_constant_examples():
    cp = ConstantPartition.of(AUTHORS, {a, b})
    assert shapley_constants(PUB, AUTHORS, cp, a) == Fraction(1, 2)
    assert shapley_constants(PUB, AUTHORS, cp, b) == Fraction(1, 2)
    assert fgmc_constants(PUB, AUTHORS, cp, 1) == 2
    assert fgmc_constants(PUB, AUTHORS, cp, 0) == 0
    assert fgmc_constants(PUB, AUTHORS, cp, 5) == 0
    single = frozenset({fact("Pub", "a", "p"), fact("Kw", "p", "s")})
    assert shapley_constants(PUB, single, ConstantPartition.of(single, {a}), a) == 1


def test_constant_partition_validation():
    with pytest.raises(ValueError):
        ConstantPartition.of(AUTHORS, {Constant("zz")})
    with pytest.raises(ValueError):
        ConstantPartition({a}, {a})
    with pytest.raises(ValueError):
        shapley_constants(PUB, AUTHORS, ConstantPartition.of(AUTHORS, {a}), b)


def test_null_constant():
    facts = AUTHORS | {fact("Pub", "c", "q")}
    cp = ConstantPartition.of(facts, {a, b, Constant("c")})
    assert shapley_constants(PUB, facts, cp, Constant("c")) == 0


def test_constant_reductions_on_authors():
    cp = ConstantPartition.of(AUTHORS, {a, b})
    assert shapley_constants_via_fgmc(PUB, AUTHORS, cp, a) == Fraction(1, 2)
    with pytest.raises(HypothesisError):
        fgmc_constants_via_shapley(PUB, AUTHORS, cp)
    assert fgmc_constants_via_shapley(PUB, AUTHORS, cp, experimental=True) == fgmc_constants_vector(PUB, AUTHORS, cp) == (0, 2, 1)


CONSTANT_FREE = ["R(x), S(x,y)", "R(x), S(x,y), T(y)", "S(x,y), S(y,z)", "R(x)"]


@given(seeds(), st.sampled_from(CONSTANT_FREE))
def test_constant_game_reductions(rng, text):
    q = parse_query(text)
    names = "abcde"
    pool = [fact("R", u) for u in names] + [fact("T", u) for u in names]
    pool += [fact("S", u, v) for u in names for v in names]
    facts = frozenset(rng.sample(pool, rng.randint(0, 8)))
    consts = sorted({c for f in facts for c in f.args})
    endo = {c for c in consts if rng.random() < 0.7}
    cp = ConstantPartition.of(facts, endo)
    vec = fgmc_constants_vector(q, facts, cp)
    assert fgmc_constants_via_shapley(q, facts, cp) == vec
    for c in cp.players():
        assert shapley_constants(q, facts, cp, c) == shapley_constants_via_fgmc(q, facts, cp, c)

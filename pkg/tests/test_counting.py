import itertools
import random
from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, strategies as st

from instances import FAMILIES, random_instance
from shapval.counting import (
    BudgetExceeded,
    binomial_vector,
    fgmc,
    fgmc_vector,
    fgmc_vector_from_pqe,
    fgmc_via_fmc,
    fmc_vector,
    gmc,
    interpolate_counts,
    mc,
    pqe,
    satisfaction_table,
    sppqe_from_fgmc_vector,
)
from shapval.query import parse_query
from shapval.relational import PartitionedDatabase, ProbabilisticDatabase, fact, sorted_facts

Q_RST = parse_query("R(x), S(x,y), T(y)")
R = parse_query("R(x)")
TWO_R = PartitionedDatabase({fact("R", "a"), fact("R", "b")})


def brute_counts(q, db):
    players = sorted_facts(db.endo)
    out = [0] * (len(players) + 1)
    for k in range(len(players) + 1):
        for c in itertools.combinations(players, k):
            if q.evaluate(db.exo | set(c)):
                out[k] += 1
    return out


def brute_pqe(q, pdb):
    facts = sorted_facts(pdb.probs)
    total = Fraction(0)
    for bits in itertools.product((0, 1), repeat=len(facts)):
        w = Fraction(1)
        world = []
        for f, keep in zip(facts, bits):
            p = pdb.probs[f]
            w *= p if keep else 1 - p
            if keep:
                world.append(f)
        if w and q.evaluate(world):
            total += w
    return total


def seeds():
    return st.integers(0, 10**9).map(random.Random)


def test_spec_examples():
    assert gmc(R, TWO_R) == 3
    assert fgmc_vector(R, TWO_R) == (0, 2, 1)
    assert fgmc(R, TWO_R, 5) == 0
    assert fgmc_vector(Q_RST, PartitionedDatabase({fact("R", "a"), fact("S", "a", "b"), fact("T", "b")})) == (0, 0, 0, 1)
    pdb = ProbabilisticDatabase({fact("R", "a"): Fraction(1, 2), fact("R", "b"): Fraction(1, 2)})
    assert pqe(R, pdb) == Fraction(3, 4)
    assert fgmc_vector_from_pqe(R, TWO_R) == (0, 2, 1)
    q = parse_query("R(x), S(x,y)")
    assert fgmc_via_fmc(q, PartitionedDatabase({fact("R", "a")}, {fact("S", "a", "b")})) == (0, 1)


def test_mc_counts_all_facts():
    assert mc(R, TWO_R.endo) == 3
    assert fmc_vector(R, TWO_R.endo) == (0, 2, 1)


def test_exogenous_satisfaction_gives_binomials():
    db = PartitionedDatabase({fact("R", "b"), fact("U", "a")}, {fact("R", "a")})
    assert fgmc_vector(R, db) == binomial_vector(2) == (1, 2, 1)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_fgmc_matches_brute_force(rng, family):
    _, q, db = random_instance(rng, family, max_endo=7)
    assert list(fgmc_vector(q, db)) == brute_counts(q, db)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_lineage_and_direct_tables_agree(rng, family):
    _, q, db = random_instance(rng, family)
    if q.kind in ("CQ", "UCQ"):
        assert satisfaction_table(q, db, "lineage") == satisfaction_table(q, db, "direct")


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_total_count(rng, family):
    _, q, db = random_instance(rng, family)
    vec = fgmc_vector(q, db)
    assert sum(vec) == gmc(q, db)
    assert all(0 <= c <= comb(len(db.endo), j) for j, c in enumerate(vec))


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_counts_are_upward_closed(rng, family):
    # a monotone query: every superset of a support is a support
    _, q, db = random_instance(rng, family)
    vec = fgmc_vector(q, db)
    n = len(db.endo)
    for j in range(n):
        # each size-j support extends to n-j supports, each size-(j+1) one is hit at most j+1 times
        assert vec[j] * (n - j) <= vec[j + 1] * (j + 1)


@given(seeds(), st.sampled_from(sorted(FAMILIES)), st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(4, 5)]))
def test_uniform_probability_from_counts(rng, family, p):
    _, q, db = random_instance(rng, family, max_endo=6)
    pdb = ProbabilisticDatabase.uniform(db, p)
    expected = brute_pqe(q, pdb)
    assert pqe(q, pdb) == expected
    assert sppqe_from_fgmc_vector(fgmc_vector(q, db), p) == expected


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_pqe_with_mixed_probabilities(rng, family):
    _, q, db = random_instance(rng, family, max_endo=6)
    probs = {f: Fraction(rng.randint(1, 5), 6) for f in db.endo}
    probs.update({f: Fraction(1) for f in db.exo})
    pdb = ProbabilisticDatabase(probs)
    assert pqe(q, pdb) == brute_pqe(q, pdb)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_counts_from_probabilities(rng, family):
    _, q, db = random_instance(rng, family, max_endo=6)
    assert fgmc_vector_from_pqe(q, db, brute_pqe) == fgmc_vector(q, db)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_endogenous_recursion(rng, family):
    _, q, db = random_instance(rng, family, max_endo=6, max_exo=4)
    calls = []

    def oracle(query, facts):
        calls.append(facts)
        return fmc_vector(query, facts)

    assert fgmc_via_fmc(q, db, oracle) == fgmc_vector(q, db)
    assert len(calls) == 2 ** len(db.exo)


@given(seeds(), st.sampled_from(sorted(FAMILIES)))
def test_padding_with_irrelevant_facts(rng, family):
    # an irrelevant endogenous fact doubles every support, shifting sizes by one
    _, q, db = random_instance(rng, family, max_endo=6)
    pad = fact("Zzz", "a")
    vec = fgmc_vector(q, db)
    padded = fgmc_vector(q, PartitionedDatabase(db.endo | {pad}, db.exo))
    assert list(padded) == [vec.at(j) + vec.at(j - 1) for j in range(len(vec) + 1)]


@given(st.lists(st.integers(0, 20), min_size=1, max_size=8))
def test_interpolation_inverts_probabilities(counts):
    n = len(counts) - 1
    assert list(interpolate_counts(n, lambda p: sppqe_from_fgmc_vector(counts, p))) == counts


def test_budget():
    with pytest.raises(BudgetExceeded):
        fgmc_vector(R, TWO_R, budget=2)
    assert fgmc_vector(R, TWO_R, budget=4) == (0, 2, 1)


def test_budget_from_environment(monkeypatch):
    monkeypatch.setenv("SHAPVAL_BUDGET", "2")
    with pytest.raises(BudgetExceeded):
        fgmc_vector(R, TWO_R)


def test_sppqe_rejects_p_one():
    with pytest.raises(ValueError):
        sppqe_from_fgmc_vector([0, 1], 1)

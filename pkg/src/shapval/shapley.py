"""The query game: Shapley values of facts and of constants.

Three independent routes are provided for fact values: the permutation
average, the subset formula over a coalition table, and the reduction to
two fixed-size generalized model counts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Iterable

from shapval import kernels
from shapval.counting import (
    CountVector,
    binomial_vector,
    check_budget,
    fgmc_vector,
    satisfaction_table,
)
from shapval.errors import ConstructionError, HypothesisError
from shapval.linalg import as_integers, solve_exact
from shapval.query.model import Query
from shapval.query.supports import canonical_supports
from shapval.relational import (
    Constant,
    Fact,
    FreshConstants,
    PartitionedDatabase,
    constants_of,
    sorted_facts,
)

PERMUTATION_LIMIT = 9

FgmcOracle = Callable[[Query, PartitionedDatabase], Iterable[int]]


@dataclass(frozen=True)
class QueryGame:
    db: PartitionedDatabase
    q: Query

    def players(self) -> list[Fact]:
        return self.db.players()

    def wealth(self, coalition: Iterable[Fact]) -> int:
        """v(B) = [B + Dx |= q] - [Dx |= q]."""
        coalition = frozenset(coalition)
        if not coalition <= self.db.endo:
            raise ValueError(f"not endogenous: {sorted_facts(coalition - self.db.endo)}")
        exo = self.db.exo
        return int(self.q.evaluate(exo | coalition)) - int(self.q.evaluate(exo))

    def table(self, budget: int | None = None) -> bytearray:
        return satisfaction_table(self.q, self.db, budget=budget)


def _player_index(g: QueryGame, alpha: Fact) -> int:
    players = g.players()
    try:
        return players.index(alpha)
    except ValueError:
        raise ValueError(f"{alpha} is not an endogenous fact") from None


def size_weight(k: int, n: int) -> Fraction:
    """k!(n-k-1)!/n!, the weight of a size-k coalition in an n-player game."""
    return Fraction(factorial(k) * factorial(n - k - 1), factorial(n))


# ---------------------------------------------------------------------------
# permutation average (test oracle)


def _lazy_values(g: QueryGame):
    players = g.players()
    exo = g.db.exo
    cache: dict[int, int] = {}

    def value(mask: int) -> int:
        v = cache.get(mask)
        if v is None:
            coalition = [players[i] for i in range(len(players)) if mask >> i & 1]
            v = int(g.q.evaluate(exo.union(coalition)))
            cache[mask] = v
        return v

    return players, value


def shapley_permutations_all(g: QueryGame) -> dict[Fact, Fraction]:
    """Average marginal contribution over all orderings of the players."""
    players, value = _lazy_values(g)
    n = len(players)
    if n > PERMUTATION_LIMIT:
        raise ValueError(f"{n} players: permutation enumeration is limited to {PERMUTATION_LIMIT}")
    totals = [0] * n
    base = value(0)
    for perm in itertools.permutations(range(n)):
        mask = 0
        prev = base
        for p in perm:
            mask |= 1 << p
            cur = value(mask)
            totals[p] += cur - prev
            prev = cur
    count = factorial(n)
    return {players[i]: Fraction(totals[i], count) for i in range(n)}


def shapley_permutations(g: QueryGame, alpha: Fact) -> Fraction:
    i = _player_index(g, alpha)
    players, value = _lazy_values(g)
    n = len(players)
    if n > PERMUTATION_LIMIT:
        raise ValueError(f"{n} players: permutation enumeration is limited to {PERMUTATION_LIMIT}")
    total = 0
    bit = 1 << i
    for perm in itertools.permutations(range(n)):
        mask = 0
        for p in perm:
            if p == i:
                break
            mask |= 1 << p
        total += value(mask | bit) - value(mask)
    return Fraction(total, factorial(n))


# ---------------------------------------------------------------------------
# subset formula


def _value_from_pivots(pivots: list[int], n: int) -> Fraction:
    return sum((c * size_weight(k, n) for k, c in enumerate(pivots) if c), Fraction(0))


def shapley_subsets(g: QueryGame, alpha: Fact, budget: int | None = None) -> Fraction:
    i = _player_index(g, alpha)
    n = len(g.db.endo)
    table = g.table(budget)
    return _value_from_pivots(kernels.pivotal_counts(table, n, i), n)


def shapley_all(g: QueryGame, budget: int | None = None) -> dict[Fact, Fraction]:
    """Values of every endogenous fact from one coalition table."""
    players = g.players()
    n = len(players)
    if n == 0:
        return {}
    table = g.table(budget)
    rows = kernels.pivotal_counts_all(table, n)
    return {players[i]: _value_from_pivots(rows[i], n) for i in range(n)}


# ---------------------------------------------------------------------------
# via fixed-size generalized model counting


def shapley_via_fgmc(g: QueryGame, alpha: Fact, fgmc_oracle: FgmcOracle | None = None) -> Fraction:
    """Sh(alpha) = sum_j w_j (FGMC_j(Dn - a, Dx + a) - FGMC_j(Dn - a, Dx)).

    Exactly two oracle calls are made.
    """
    if alpha not in g.db.endo:
        raise ValueError(f"{alpha} is not an endogenous fact")
    oracle = fgmc_oracle or (lambda q, db: fgmc_vector(q, db))
    rest = g.db.endo - {alpha}
    with_alpha = CountVector(oracle(g.q, PartitionedDatabase(rest, g.db.exo | {alpha})))
    without = CountVector(oracle(g.q, PartitionedDatabase(rest, g.db.exo)))
    n = len(g.db.endo)
    total = Fraction(0)
    for j in range(n):
        diff = with_alpha.at(j) - without.at(j)
        if diff:
            total += diff * size_weight(j, n)
    return total


# ---------------------------------------------------------------------------
# maximum value


def _singleton_support(g: QueryGame, table: bytearray) -> int | None:
    if table[0]:
        return None
    for i in range(len(g.db.endo)):
        if table[1 << i]:
            return i
    return None


def max_shapley(g: QueryGame, budget: int | None = None) -> tuple[Fact, Fraction]:
    """A fact of maximum value and that value (ties: first in canonical order)."""
    players = g.players()
    if not players:
        raise ValueError("the game has no players")
    values = shapley_all(g, budget)
    best = max(values.values())
    for f in players:
        if values[f] == best:
            return f, best
    raise AssertionError("unreachable")


def max_shapley_fast(g: QueryGame, budget: int | None = None) -> tuple[Fact, Fraction]:
    """Like :func:`max_shapley`, but a fact that is a generalized support on
    its own is returned right away: its value is maximal in a monotone
    0/1 game."""
    players = g.players()
    if not players:
        raise ValueError("the game has no players")
    n = len(players)
    table = g.table(budget)
    s = _singleton_support(g, table)
    if s is None:
        return max_shapley(g, budget)
    return players[s], _value_from_pivots(kernels.pivotal_counts(table, n, s), n)


# ---------------------------------------------------------------------------
# constants as players


@dataclass(frozen=True)
class ConstantPartition:
    endo_consts: frozenset[Constant]
    exo_consts: frozenset[Constant]

    def __post_init__(self):
        object.__setattr__(self, "endo_consts", frozenset(self.endo_consts))
        object.__setattr__(self, "exo_consts", frozenset(self.exo_consts))
        both = self.endo_consts & self.exo_consts
        if both:
            raise ValueError(f"constants on both sides: {sorted(c.name for c in both)}")

    @classmethod
    def of(cls, facts: Iterable[Fact], endo_consts: Iterable[Constant]) -> ConstantPartition:
        """Partition of const(facts) with the given players; the rest is exogenous."""
        endo = frozenset(endo_consts)
        present = constants_of(facts)
        missing = endo - present
        if missing:
            raise ValueError(f"not constants of the database: {sorted(c.name for c in missing)}")
        return cls(endo, present - endo)

    def check(self, facts: Iterable[Fact]) -> None:
        present = constants_of(facts)
        if self.endo_consts | self.exo_consts != present:
            raise ValueError("constant partition does not cover exactly const(D)")

    def players(self) -> list[Constant]:
        return sorted(self.endo_consts)


def restrict(facts: Iterable[Fact], consts: frozenset[Constant]) -> frozenset[Fact]:
    """D|_C: facts all of whose constants are in ``consts``."""
    return frozenset(f for f in facts if f.constants() <= consts)


def constant_table(q: Query, facts: Iterable[Fact], cp: ConstantPartition, budget: int | None = None) -> bytearray:
    """``table[s] = [D|_(s + Cx) |= q]`` over the sorted endogenous constants."""
    facts = frozenset(facts)
    cp.check(facts)
    players = cp.players()
    n = len(players)
    check_budget(n, budget)
    table = bytearray(1 << n)
    for s in range(1 << n):
        # monotone: inherit from any one-smaller subset
        bits = s
        while bits:
            low = bits & -bits
            if table[s ^ low]:
                table[s] = 1
                break
            bits ^= low
        else:
            chosen = frozenset(players[i] for i in range(n) if s >> i & 1)
            table[s] = int(q.evaluate(restrict(facts, chosen | cp.exo_consts)))
    return table


def shapley_constants(
    q: Query, facts: Iterable[Fact], cp: ConstantPartition, c: Constant, budget: int | None = None
) -> Fraction:
    players = cp.players()
    if c not in cp.endo_consts:
        raise ValueError(f"{c} is not an endogenous constant")
    n = len(players)
    table = constant_table(q, facts, cp, budget)
    return _value_from_pivots(kernels.pivotal_counts(table, n, players.index(c)), n)


def fgmc_constants_vector(q: Query, facts: Iterable[Fact], cp: ConstantPartition, budget: int | None = None) -> CountVector:
    table = constant_table(q, facts, cp, budget)
    return CountVector(kernels.count_by_size(table, len(cp.endo_consts)))


def fgmc_constants(q: Query, facts: Iterable[Fact], cp: ConstantPartition, k: int, budget: int | None = None) -> int:
    return fgmc_constants_vector(q, facts, cp, budget).at(k)


def shapley_constants_via_fgmc(
    q: Query,
    facts: Iterable[Fact],
    cp: ConstantPartition,
    c: Constant,
    oracle: Callable[[Query, frozenset[Fact], ConstantPartition], Iterable[int]] | None = None,
) -> Fraction:
    """Two constant-counting calls: with ``c`` made exogenous, and with ``c`` removed."""
    if c not in cp.endo_consts:
        raise ValueError(f"{c} is not an endogenous constant")
    oracle = oracle or (lambda q_, d, p: fgmc_constants_vector(q_, d, p))
    facts = frozenset(facts)
    rest = cp.endo_consts - {c}
    with_c = CountVector(oracle(q, facts, ConstantPartition(rest, cp.exo_consts | {c})))
    # without c: drop its facts; constants that vanish with them stay players
    without_facts = frozenset(f for f in facts if c not in f.constants())
    without = CountVector(oracle(q, without_facts, _LoosePartition(rest, cp.exo_consts)))
    n = len(cp.endo_consts)
    total = Fraction(0)
    for j in range(n):
        diff = with_c.at(j) - without.at(j)
        if diff:
            total += diff * size_weight(j, n)
    return total


class _LoosePartition(ConstantPartition):
    """Partition that may also name constants absent from the database."""

    def check(self, facts: Iterable[Fact]) -> None:
        present = constants_of(facts)
        if not present <= self.endo_consts | self.exo_consts:
            raise ValueError("constant partition misses constants of D")


def fgmc_constants_via_shapley(
    q: Query,
    facts: Iterable[Fact],
    cp: ConstantPartition,
    shapley_oracle: Callable[[Query, frozenset[Fact], ConstantPartition, Constant], Fraction] | None = None,
    experimental: bool = False,
) -> CountVector:
    """Constant counts from Shapley values of constants.

    A support of ``q`` whose non-query constants are all merged into one
    fresh constant ``a`` is added, together with copies on ``a1..ai``; the
    value of ``a`` in the i-th database gives one equation of the usual
    factorial system.  Queries with constants need ``const(q)`` to be
    exogenous and are gated behind ``experimental``.
    """
    facts = frozenset(facts)
    cp.check(facts)
    oracle = shapley_oracle or (lambda q_, d, p, c: shapley_constants(q_, d, p, c))
    n = len(cp.endo_consts)
    qc = q.constants
    if qc:
        if not experimental:
            raise HypothesisError("experimental", "queries with constants need the experimental flag")
        if not qc <= cp.exo_consts:
            raise HypothesisError("const(q) within C_x", "the query's constants must all be exogenous")
    if q.evaluate(restrict(facts, cp.exo_consts)):
        return binomial_vector(n)
    supports = [s.facts for s in canonical_supports(q) if constants_of(s.facts) - qc]
    if not supports:
        # every support lives on query constants: no coalition changes anything
        return CountVector([0] * (n + 1))
    fresh = FreshConstants(constants_of(facts) | qc)
    base_support = supports[0]
    a = fresh()
    gadget = frozenset(f.substitute({x: a for x in f.constants() - qc}) for f in base_support)
    if any(a not in f.constants() for f in gadget):
        raise ConstructionError("support has a fact over query constants only")
    copies = [a] + [fresh() for _ in range(n)]
    rows, rhs = [], []
    for i in range(n + 1):
        extra = set()
        for b in copies[: i + 1]:
            extra |= {f.substitute({a: b}) for f in gadget}
        big = facts | extra
        part = _LoosePartition(cp.endo_consts | frozenset(copies[: i + 1]), cp.exo_consts | qc)
        value = Fraction(oracle(q, frozenset(big), part, a))
        total_players = n + i + 1
        # Sh(a) = sum over B within C_n of w(|B|) * (1 - [B is a generalized support])
        weights = [size_weight(j, total_players) for j in range(n + 1)]
        mass = sum(comb(n, j) * weights[j] for j in range(n + 1))
        rows.append(weights)
        rhs.append(mass - value)
    return CountVector(as_integers(solve_exact(rows, rhs), "constant count vector"))

"""Model counting (MC, GMC, FMC, FGMC) and probabilistic evaluation.

All counts are computed from a *satisfaction table*: for the canonical
ordering of the endogenous facts, ``table[s]`` records whether the facts in
coalition mask ``s`` together with the exogenous facts satisfy the query.
For unions of CQs the table is the upward closure of the homomorphism
lineage; for path queries every coalition not already implied by a smaller
one is evaluated directly.
"""

from __future__ import annotations

import os
from fractions import Fraction
from math import comb
from typing import Callable, Iterable

from shapval import kernels
from shapval.linalg import as_integers, solve_exact
from shapval.query.model import Query, cq_disjuncts
from shapval.relational import (
    Fact,
    PartitionedDatabase,
    ProbabilisticDatabase,
    iter_homomorphisms,
)

DEFAULT_BUDGET = 1 << 22


class BudgetExceeded(RuntimeError):
    pass


class CountVector(tuple):
    """``counts[j]`` = number of generalized supports of size ``j``."""

    def __new__(cls, counts: Iterable[int]):
        return super().__new__(cls, (int(c) for c in counts))

    @property
    def n(self) -> int:
        return len(self) - 1

    def at(self, j: int) -> int:
        """Count for size ``j``; zero outside ``0..n``."""
        return self[j] if 0 <= j < len(self) else 0

    def __repr__(self) -> str:
        return f"CountVector({list(self)})"

    def __str__(self) -> str:
        return str(list(self))


def current_budget(budget: int | None = None) -> int:
    if budget is not None:
        return budget
    env = os.environ.get("SHAPVAL_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


def check_budget(n: int, budget: int | None = None) -> None:
    limit = current_budget(budget)
    if (1 << n) > limit:
        raise BudgetExceeded(f"2^{n} subsets exceed the enumeration budget of {limit}")


def lineage_masks(q: Query, db: PartitionedDatabase, players: list[Fact] | None = None) -> list[int] | None:
    """Endogenous parts of all homomorphic images of the query, as masks.

    Returns ``None`` when ``q`` is not a union of CQs.
    """
    disjuncts = cq_disjuncts(q)
    if disjuncts is None:
        return None
    players = db.players() if players is None else players
    index = {f: i for i, f in enumerate(players)}
    facts = db.facts
    masks = set()
    for atoms in disjuncts:
        for h in iter_homomorphisms(atoms, facts):
            mask = 0
            for a in atoms:
                i = index.get(a.substitute(h))
                if i is not None:
                    mask |= 1 << i
            masks.add(mask)
            if mask == 0:
                return [0]
    return sorted(masks)


def direct_table(q: Query, db: PartitionedDatabase, players: list[Fact] | None = None) -> bytearray:
    """Satisfaction table by evaluating ``q`` on coalitions (monotone shortcut)."""
    players = db.players() if players is None else players
    n = len(players)
    exo = list(db.exo)
    table = bytearray(1 << n)
    for s in range(1 << n):
        bits = s
        implied = False
        while bits:
            low = bits & -bits
            if table[s ^ low]:
                implied = True
                break
            bits ^= low
        if implied:
            table[s] = 1
            continue
        coalition = [players[i] for i in range(n) if s >> i & 1]
        table[s] = 1 if q.evaluate(exo + coalition) else 0
    return table


def satisfaction_table(
    q: Query,
    db: PartitionedDatabase,
    method: str = "auto",
    budget: int | None = None,
) -> bytearray:
    """``table[s] = [coalition s plus Dx satisfies q]`` over ``db.players()``."""
    players = db.players()
    n = len(players)
    check_budget(n, budget)
    if method in ("auto", "lineage"):
        masks = lineage_masks(q, db, players)
        if masks is not None:
            return kernels.upward_closure(masks, n)
        if method == "lineage":
            raise ValueError(f"no homomorphism lineage for {q.kind} queries")
    elif method != "direct":
        raise ValueError(f"unknown method {method!r}")
    return direct_table(q, db, players)


def fgmc_vector(q: Query, db: PartitionedDatabase, method: str = "auto", budget: int | None = None) -> CountVector:
    table = satisfaction_table(q, db, method, budget)
    return CountVector(kernels.count_by_size(table, len(db.endo)))


def fgmc(q: Query, db: PartitionedDatabase, size: int, **kw) -> int:
    return fgmc_vector(q, db, **kw).at(size)


def gmc(q: Query, db: PartitionedDatabase, **kw) -> int:
    return sum(fgmc_vector(q, db, **kw))


def fmc_vector(q: Query, facts: Iterable[Fact], **kw) -> CountVector:
    return fgmc_vector(q, PartitionedDatabase(frozenset(facts)), **kw)


def mc(q: Query, facts: Iterable[Fact], **kw) -> int:
    return sum(fmc_vector(q, facts, **kw))


def binomial_vector(n: int) -> CountVector:
    return CountVector(comb(n, j) for j in range(n + 1))


# ---------------------------------------------------------------------------
# probabilistic evaluation


def pqe(q: Query, pdb: ProbabilisticDatabase, method: str = "auto", budget: int | None = None) -> Fraction:
    """Probability that ``q`` holds, summing over all worlds of the uncertain facts."""
    db = pdb.partitioned()
    players = db.players()
    table = satisfaction_table(q, db, method, budget)
    odds = [pdb.probs[f] / (1 - pdb.probs[f]) for f in players]
    weight = Fraction(1)
    for f in players:
        weight *= 1 - pdb.probs[f]
    weights = [weight] + [Fraction(0)] * ((1 << len(players)) - 1)
    total = weight if table[0] else Fraction(0)
    for s in range(1, 1 << len(players)):
        low = s & -s
        w = weights[s ^ low] * odds[low.bit_length() - 1]
        weights[s] = w
        if table[s]:
            total += w
    return total


def sppqe_from_fgmc_vector(counts: Iterable[int], p) -> Fraction:
    """Probability for uniform endogenous probability ``p`` from the size counts."""
    p = Fraction(p)
    if p == 1:
        raise ValueError("p = 1 is not a proper probability; evaluate the query on Dn and Dx instead")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0,1), got {p}")
    counts = list(counts)
    n = len(counts) - 1
    z = p / (1 - p)
    return sum((c * z**j for j, c in enumerate(counts)), Fraction(0)) / (1 + z) ** n


def interpolate_counts(n: int, probability_at: Callable[[Fraction], Fraction]) -> CountVector:
    """Recover size counts from probabilities at ``p = z/(1+z)``, ``z = 1..n+1``."""
    nodes = list(range(1, n + 2))
    matrix = [[Fraction(z) ** j for j in range(n + 1)] for z in nodes]
    rhs = [Fraction(1 + z) ** n * probability_at(Fraction(z, 1 + z)) for z in nodes]
    return CountVector(as_integers(solve_exact(matrix, rhs), "interpolated count vector"))


def fgmc_vector_from_pqe(
    q: Query,
    db: PartitionedDatabase,
    pqe_oracle: Callable[[Query, ProbabilisticDatabase], Fraction] | None = None,
) -> CountVector:
    """Size counts from n+1 single-proper-probability evaluations on ``db``."""
    oracle = pqe_oracle or pqe
    return interpolate_counts(
        len(db.endo), lambda p: Fraction(oracle(q, ProbabilisticDatabase.uniform(db, p)))
    )


def fgmc_via_fmc(
    q: Query,
    db: PartitionedDatabase,
    fmc_oracle: Callable[[Query, frozenset[Fact]], Iterable[int]] | None = None,
) -> CountVector:
    """Size counts using only purely endogenous calls (2^|Dx| of them).

    Supports of size j in (Dn, Dx) are the supports of size j+1 in
    (Dn + a, Dx - a) that contain a, for any exogenous a.
    """
    oracle = fmc_oracle or (lambda query, facts: fmc_vector(query, facts))

    def rec(endo: frozenset[Fact], exo: list[Fact]) -> list[int]:
        if not exo:
            vec = list(oracle(q, endo))
            if len(vec) != len(endo) + 1:
                raise ValueError("FMC oracle returned a vector of the wrong length")
            return vec
        alpha, rest = exo[0], exo[1:]
        with_alpha = rec(endo | {alpha}, rest)
        without = rec(endo, rest)
        return [
            with_alpha[j + 1] - (without[j + 1] if j + 1 < len(without) else 0)
            for j in range(len(endo) + 1)
        ]

    return CountVector(rec(frozenset(db.endo), sorted(db.exo, key=Fact.sort_key)))

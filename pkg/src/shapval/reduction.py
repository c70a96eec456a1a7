"""Computing fixed-size generalized model counts with a Shapley oracle.

For a partitioned database D, a support S of the query is added next to D
with a single endogenous fact ``mu`` and ``i`` copies ``mu^1..mu^i`` of the
part of S around a chosen constant ``a``.  The value of ``mu`` in the i-th
database A^i is an affine function of the counts FGMC_j(q, D); running
i = 0..|Dn| gives an invertible factorial system.

Three modes pick S and the query handed to the oracle:

* ``pseudo_connected``: S is a certified island support of q itself;
* ``leak``: q is conjoined with q', whose support S' is made exogenous;
* ``decomposable``: q = q1 AND q2, each half counted with a support of
  the other half as gadget, the halves then combined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Iterable

from shapval import dbformat
from shapval.analysis import (
    decompose,
    find_island_support,
    find_q_leak,
    is_variable_connected_query,
    unshared_constant,
)
from shapval.counting import (
    CountVector,
    binomial_vector,
    interpolate_counts,
    sppqe_from_fgmc_vector,
)
from shapval.errors import ConstructionError, HypothesisError
from shapval.linalg import as_integers, solve_exact
from shapval.query.model import Query, conjoin
from shapval.query.supports import (
    canonical_supports,
    is_minimal_support,
    is_relevant_fact,
)
from shapval.relational import (
    Constant,
    Fact,
    FreshConstants,
    PartitionedDatabase,
    constants_of,
    format_fact,
    rename_constants,
    renaming_avoiding,
    sorted_facts,
)
from shapval.shapley import QueryGame, shapley_subsets

ShapleyOracle = Callable[[Query, PartitionedDatabase, Fact], Fraction]

MODES = ("pseudo_connected", "leak", "decomposable")

CASE1, CASE2, CASE3, CONTRIBUTES = "Case1", "Case2", "Case3", "Contributes"


def default_shapley_oracle(q: Query, db: PartitionedDatabase, alpha: Fact) -> Fraction:
    return shapley_subsets(QueryGame(db, q), alpha)


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class Fragment:
    """S split around the anchor ``a``: S^0 (facts with a), its copies, and S^-."""

    anchor: Constant
    copies: tuple[frozenset[Fact], ...]  # S^0, S^1, ..., S^i
    tail: frozenset[Fact]  # S^-
    pivot: Fact  # mu, a fact of S^0
    pivot_copies: tuple[Fact, ...]  # mu^1..mu^i

    @property
    def i(self) -> int:
        return len(self.copies) - 1


@dataclass(frozen=True)
class ReductionInstance:
    base: PartitionedDatabase  # D' (the input after normalisation and completion)
    plain: PartitionedDatabase  # D, on which the counts are wanted
    fragment: Fragment
    db: PartitionedDatabase  # A^i
    case_query: Query  # query deciding Case 3
    negated: bool = False  # Case 3 when the plain part does NOT satisfy it

    @property
    def i(self) -> int:
        return self.fragment.i

    @property
    def pivot(self) -> Fact:
        return self.fragment.pivot


@dataclass(frozen=True)
class ShSeries:
    values: tuple[Fraction, ...]
    n_endo: int
    tail_size: int

    def __post_init__(self):
        if len(self.values) != self.n_endo + 1:
            raise ValueError("need one value per i = 0..|Dn|")


@dataclass(frozen=True)
class Normalized:
    db: PartitionedDatabase
    shortcut: CountVector | None = None
    dropped_endogenous: int = 0
    renaming: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# normalisation and completion


def normalize_instance(
    q: Query,
    q_prime: Query | None,
    s_prime: Iterable[Fact],
    db: PartitionedDatabase,
) -> Normalized:
    """Make D share only const(q) with S' and not contain S' facts.

    If Dx already satisfies q every subset counts, and the binomial vector is
    returned as a shortcut.  Facts of D that coincide with S' (they are
    irrelevant to q) are dropped; dropped endogenous ones are re-inserted
    into the final counts by the caller.
    """
    s_prime = frozenset(s_prime)
    if q.evaluate(db.exo):
        return Normalized(db, binomial_vector(len(db.endo)))
    C = q.constants | (q_prime.constants if q_prime is not None else frozenset())
    clash = (db.constants() & constants_of(s_prime)) - q.constants
    mapping = {}
    if clash:
        facts = db.facts
        keep = db.constants() - clash
        mapping = renaming_avoiding(facts, keep, constants_of(s_prime) | C)
        db = PartitionedDatabase(rename_constants(db.endo, mapping), rename_constants(db.exo, mapping))
    common = db.facts & s_prime
    dropped = len(common & db.endo)
    if common:
        db = PartitionedDatabase(db.endo - common, db.exo - common)
    return Normalized(db, None, dropped, mapping)


def complete_with_support(db: PartitionedDatabase, s_prime: Iterable[Fact], C: Iterable[Constant] = ()) -> PartitionedDatabase:
    """D' = D with S' added as exogenous facts."""
    s_prime = frozenset(s_prime)
    if db.facts & s_prime:
        raise ConstructionError("S' overlaps the database; normalise first")
    shared = (db.constants() & constants_of(s_prime)) - frozenset(C)
    if shared:
        raise ConstructionError(f"S' shares constants {sorted(c.name for c in shared)} with the database")
    return PartitionedDatabase(db.endo, db.exo | s_prime)


def reinflate(counts: CountVector, dropped: int) -> CountVector:
    """Counts after adding ``dropped`` endogenous facts irrelevant to the query."""
    vec = list(counts)
    for _ in range(dropped):
        vec = [(vec[j] if j < len(vec) else 0) + (vec[j - 1] if j >= 1 else 0) for j in range(len(vec) + 1)]
    return CountVector(vec)


# ---------------------------------------------------------------------------
# the gadget


def choose_anchor(S: Iterable[Fact], C: frozenset[Constant], endogenous_only: bool = False) -> Constant:
    S = list(S)
    if endogenous_only:
        a = unshared_constant(S, C)
        if a is None:
            raise HypothesisError(
                "unshared constant", "no constant outside const(q) occurs in exactly one fact of the support"
            )
        return a
    free = sorted(constants_of(S) - C)
    if not free:
        raise HypothesisError("const(S) not within C", "the support uses only query constants")
    return free[0]


def duplicate_support(
    S: Iterable[Fact],
    C: Iterable[Constant],
    i: int,
    endogenous_only: bool = False,
    avoid: Iterable[Constant] = (),
    anchor: Constant | None = None,
) -> Fragment:
    """Split S around an anchor constant and make ``i`` copies of S^0.

    Copies replace the anchor by fresh constants (the same ones for every
    ``i``, so A^i is a prefix of A^(i+1)).
    """
    S = frozenset(S)
    C = frozenset(C)
    a = anchor if anchor is not None else choose_anchor(S, C, endogenous_only)
    if a in C or a not in constants_of(S):
        raise HypothesisError("anchor", f"{a} is not a non-query constant of the support")
    s0 = frozenset(f for f in S if a in f.constants())
    tail = S - s0
    pivot = sorted_facts(s0)[0]
    fresh = FreshConstants(constants_of(S) | C | frozenset(avoid))
    copies = [s0]
    pivots = []
    for _ in range(i):
        b = fresh()
        copies.append(rename_constants(s0, {a: b}))
        pivots.append(pivot.substitute({a: b}))
    return Fragment(a, tuple(copies), tail, pivot, tuple(pivots))


def assemble_Ai(base: PartitionedDatabase, fragment: Fragment, C: Iterable[Constant] = ()) -> PartitionedDatabase:
    """A^i = D' + S^0 + ... + S^i + S^-, with mu, its copies and S^- endogenous."""
    C = frozenset(C)
    gadget = frozenset().union(*fragment.copies) | fragment.tail
    shared = (base.constants() & constants_of(gadget)) - C
    if shared:
        raise ConstructionError(f"gadget shares constants {sorted(c.name for c in shared)} with D'")
    if base.facts & gadget:
        raise ConstructionError("gadget facts collide with D'")
    anchors = [fragment.anchor] + [
        next(iter(p.constants() - fragment.pivot.constants())) for p in fragment.pivot_copies
    ]
    if len(set(anchors)) != len(anchors):
        raise ConstructionError("copies of the anchor are not distinct")
    for k, copy in enumerate(fragment.copies):
        if len(copy) != len(fragment.copies[0]):
            raise ConstructionError(f"copy S^{k} collapsed")
    endo_gadget = {fragment.pivot, *fragment.pivot_copies} | fragment.tail
    return PartitionedDatabase(base.endo | endo_gadget, base.exo | (gadget - endo_gadget))


def marginal_case(instance: ReductionInstance, B: Iterable[Fact]) -> str:
    """Which of the three zero-marginal cases B falls in, else Contributes."""
    B = frozenset(B)
    frag = instance.fragment
    if frag.pivot in B:
        raise ValueError("B must not contain the pivot")
    if any(m in B for m in frag.pivot_copies):
        return CASE1
    if not frag.tail <= B:
        return CASE2
    sat = instance.case_query.evaluate((B & instance.plain.endo) | instance.plain.exo)
    if sat != instance.negated:
        return CASE3
    return CONTRIBUTES


def direct_marginal(oracle_query: Query, instance: ReductionInstance, B: Iterable[Fact]) -> int:
    g = QueryGame(instance.db, oracle_query)
    B = frozenset(B)
    return g.wealth(B | {instance.pivot}) - g.wealth(B)


# ---------------------------------------------------------------------------
# arithmetic


def _w(m: int, N: int) -> Fraction:
    return Fraction(factorial(m) * factorial(N - m - 1), factorial(N))


def _compute_Z(i: int, n_endo: int, tail_size: int) -> Fraction:
    N = n_endo + i + 1 + tail_size
    total = Fraction(0)
    for m in range(N):
        count = comb(N - 1, m) - (comb(n_endo, m - tail_size) if m >= tail_size else 0)
        if count:
            total += count * _w(m, N)
    return total


def _enumerated_Z(i: int, n_endo: int, tail_size: int) -> Fraction:
    # players other than mu: n_endo base facts, i copies, tail_size tail facts
    N = n_endo + i + 1 + tail_size
    copies = ((1 << i) - 1) << n_endo
    tail = ((1 << tail_size) - 1) << (n_endo + i)
    total = Fraction(0)
    for B in range(1 << (N - 1)):
        if B & copies or (B & tail) != tail:
            total += _w(B.bit_count(), N)
    return total


_Z_CHECKED = False


def self_test_Z(max_N: int = 12) -> None:
    """Compare the closed form of Z with subset enumeration for N <= max_N."""
    for N in range(1, max_N + 1):
        for i in range(N):
            for t in range(N - i):
                n = N - 1 - i - t
                if _compute_Z(i, n, t) != _enumerated_Z(i, n, t):
                    raise ConstructionError(f"closed form of Z wrong at i={i}, n={n}, t={t}")


@lru_cache(maxsize=None)
def compute_Z(i: int, n_endo: int, tail_size: int) -> Fraction:
    """Total weight of the coalitions in Case 1 or Case 2.

    With N = n + i + 1 + t players, a coalition avoiding mu escapes both
    cases iff it holds all of S^- and no copy of mu, i.e. it is S^- plus a
    subset of Dn; there are C(n, m-t) of those of size m.
    """
    global _Z_CHECKED
    if not _Z_CHECKED:
        self_test_Z()
        _Z_CHECKED = True
    return _compute_Z(i, n_endo, tail_size)


def system_coefficient(i: int, j: int, n_endo: int, tail_size: int) -> Fraction:
    """(j+t)!(n+i-j)!/(n+i+t+1)!"""
    t = tail_size
    return Fraction(
        factorial(j + t) * factorial(n_endo + i - j), factorial(n_endo + i + t + 1)
    )


def factorial_matrix(n_endo: int, tail_size: int) -> list[list[Fraction]]:
    return [
        [system_coefficient(i, j, n_endo, tail_size) for j in range(n_endo + 1)]
        for i in range(n_endo + 1)
    ]


def encode_counts(counts: Iterable[int], tail_size: int) -> ShSeries:
    """Sh^i for i = 0..n from known counts (the forward direction)."""
    counts = list(counts)
    n = len(counts) - 1
    values = tuple(
        sum((system_coefficient(i, j, n, tail_size) * c for j, c in enumerate(counts)), Fraction(0))
        for i in range(n + 1)
    )
    return ShSeries(values, n, tail_size)


def solve_factorial_system(series: ShSeries) -> CountVector:
    matrix = factorial_matrix(series.n_endo, series.tail_size)
    try:
        sol = as_integers(solve_exact(matrix, series.values), "factorial system")
    except ArithmeticError as exc:
        raise ConstructionError(f"construction invalid: {exc}") from None
    if any(v < 0 for v in sol):
        raise ConstructionError(f"construction invalid: negative count in {sol}")
    return CountVector(sol)


# ---------------------------------------------------------------------------
# plans: everything fixed before the loop over i


@dataclass(frozen=True)
class Plan:
    oracle_query: Query
    plain: PartitionedDatabase
    base: PartitionedDatabase
    support: frozenset[Fact]
    anchor: Constant
    C: frozenset[Constant]
    case_query: Query
    negated: bool = False
    rule: str = ""

    @property
    def n(self) -> int:
        return len(self.plain.endo)

    def instance(self, i: int) -> ReductionInstance:
        frag = duplicate_support(
            self.support, self.C, i, anchor=self.anchor, avoid=self.base.constants()
        )
        db = assemble_Ai(self.base, frag, self.C)
        return ReductionInstance(self.base, self.plain, frag, db, self.case_query, self.negated)

    @property
    def tail_size(self) -> int:
        return len(self.support) - sum(1 for f in self.support if self.anchor in f.constants())


def _place_support(
    S: Iterable[Fact], C: frozenset[Constant], avoid: Iterable[Constant], anchor: Constant
) -> tuple[frozenset[Fact], Constant]:
    """C-isomorphic copy of S sharing no constant outside C with ``avoid``,
    and the image of the anchor."""
    S = frozenset(S)
    mapping = renaming_avoiding(S, C, frozenset(avoid) | C)
    return rename_constants(S, mapping), mapping.get(anchor, anchor)


def _pick_support(candidates: list[frozenset[Fact]], C, endogenous_only: bool, what: str) -> tuple[frozenset[Fact], Constant]:
    for S in candidates:
        if not constants_of(S) - C:
            continue
        if endogenous_only and unshared_constant(S, C) is None:
            continue
        return S, choose_anchor(S, C, endogenous_only)
    if endogenous_only:
        raise HypothesisError("unshared constant", f"no {what} has a constant occurring in exactly one fact")
    raise HypothesisError("const(S) not within C", f"no {what} uses a constant outside const(q)")


def plan_pseudo_connected(
    q: Query, db: PartitionedDatabase, endogenous_only: bool = False, bound: int | None = None
) -> Plan:
    island = find_island_support(q, bound)
    if island is None:
        raise HypothesisError("island support", "no implemented sufficient condition certifies an island support")
    S, rule = island
    C = q.constants
    candidates = [S]
    if rule == "connected-constant-free":
        # every minimal support is an island here
        candidates += [s.facts for s in canonical_supports(q, bound)]
    S, anchor = _pick_support(candidates, C, endogenous_only, "island support")
    placed, anchor = _place_support(S, C, db.constants(), anchor)
    return Plan(q, db, db, placed, anchor, C, q, False, rule)


def check_leak_hypotheses(
    q: Query, q_prime: Query | None, s_prime: frozenset[Fact], bound: int | None = None
) -> frozenset[Fact]:
    """Certify the leak-mode preconditions; returns a leak-free support of q."""
    C = q.constants
    if not is_variable_connected_query(q, bound):
        raise HypothesisError("(1) q is variable-connected")
    if q_prime is not None and not is_minimal_support(q_prime, s_prime):
        raise HypothesisError("S' is a minimal support of q'")
    if q_prime is None and s_prime:
        raise HypothesisError("S' is a minimal support of q'", "q' is the true query, so S' must be empty")
    if q.evaluate(s_prime):
        raise HypothesisError("(2a) S' does not satisfy q")
    leak = find_q_leak(q, s_prime, bound)
    if leak is not None:
        raise HypothesisError("(2b) S' has no q-leak", f"{leak.leak_fact} is a leak")
    for alpha in sorted_facts(s_prime):
        if alpha.constants() <= C and is_relevant_fact(q, alpha, bound):
            raise HypothesisError("(2c) relevant facts of S' use a non-query constant", str(alpha))
    for s in canonical_supports(q, bound):
        if find_q_leak(q, s.facts, bound) is None and constants_of(s.facts) - C:
            return s.facts
    raise HypothesisError("(3) q has a minimal support without q-leak")


# ---------------------------------------------------------------------------
# running a plan


@dataclass
class TraceRecord:
    i: int
    database: str
    oracle_value: Fraction
    Z: Fraction
    Sh_i: Fraction
    anchor: str
    pivot: str
    instance: ReductionInstance | None = None

    def to_json(self) -> dict:
        return {
            "i": self.i,
            "anchor": self.anchor,
            "pivot": self.pivot,
            "database": self.database,
            "oracle": _frac_json(self.oracle_value),
            "Z": _frac_json(self.Z),
            "Sh_i": _frac_json(self.Sh_i),
        }


def _frac_json(x: Fraction) -> dict:
    return {"num": str(x.numerator), "den": str(x.denominator)}


def run_plan(plan: Plan, oracle: ShapleyOracle, trace: list | None = None) -> CountVector:
    """Counts of Case-3 coalition groups: supports of the case query in the
    plain database (or non-supports when the plan is negated)."""
    n = plan.n
    t = plan.tail_size
    values = []
    for i in range(n + 1):
        inst = plan.instance(i)
        value = Fraction(oracle(plan.oracle_query, inst.db, inst.pivot))
        Z = compute_Z(i, n, t)
        sh = 1 - value - Z
        values.append(sh)
        if trace is not None:
            trace.append(
                TraceRecord(
                    i, dbformat.dumps(inst.db), value, Z, sh, plan.anchor.name, format_fact(inst.pivot), inst
                )
            )
    return solve_factorial_system(ShSeries(tuple(values), n, t))


def fgmc_via_shapley(
    q: Query,
    db: PartitionedDatabase,
    mode: str = "pseudo_connected",
    shapley_oracle: ShapleyOracle | None = None,
    q_prime: Query | None = None,
    s_prime: Iterable[Fact] | None = None,
    endogenous_only: bool = False,
    experimental: bool = False,
    bound: int | None = None,
    trace: list | None = None,
) -> CountVector:
    """FGMC vector of ``q`` on ``db`` using only Shapley-value oracle calls."""
    oracle = shapley_oracle or default_shapley_oracle
    if mode == "pseudo_connected":
        if q.evaluate(db.exo):
            return binomial_vector(len(db.endo))
        return run_plan(plan_pseudo_connected(q, db, endogenous_only, bound), oracle, trace)
    if mode == "leak":
        return _leak_mode(q, db, oracle, q_prime, s_prime, endogenous_only, bound, trace)
    if mode == "decomposable":
        return _decomposable_mode(q, db, oracle, endogenous_only, experimental, bound, trace)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def plan_leak(
    q: Query,
    db: PartitionedDatabase,
    q_prime: Query | None = None,
    s_prime: Iterable[Fact] | None = None,
    endogenous_only: bool = False,
    bound: int | None = None,
) -> tuple[Plan | None, Normalized]:
    """Certify the hypotheses, normalise, complete; ``None`` plan when the
    normalisation already settles the counts."""
    if s_prime is None:
        if q_prime is None:
            s_prime = frozenset()
        else:
            supports = canonical_supports(q_prime, bound)
            if not supports:
                raise HypothesisError("S' is a minimal support of q'", "q' has no support within the bound")
            s_prime = supports[0].facts
    s_prime = frozenset(s_prime)
    S = check_leak_hypotheses(q, q_prime, s_prime, bound)
    norm = normalize_instance(q, q_prime, s_prime, db)
    if norm.shortcut is not None:
        return None, norm
    C = q.constants
    C_all = C | (q_prime.constants if q_prime is not None else frozenset())
    base = complete_with_support(norm.db, s_prime, C)
    S, anchor = _pick_support([S], C, endogenous_only, "leak-free support")
    placed, anchor = _place_support(S, C, base.constants() | C_all, anchor)
    oracle_query = q if q_prime is None else conjoin(q, q_prime)
    return Plan(oracle_query, norm.db, base, placed, anchor, C, q, False, "leak"), norm


def _leak_mode(q, db, oracle, q_prime, s_prime, endogenous_only, bound, trace) -> CountVector:
    plan, norm = plan_leak(q, db, q_prime, s_prime, endogenous_only, bound)
    if plan is None:
        return norm.shortcut
    return reinflate(run_plan(plan, oracle, trace), norm.dropped_endogenous)


def _decomposable_mode(q, db, oracle, endogenous_only, experimental, bound, trace) -> CountVector:
    parts = decompose(q, experimental)
    if parts is None:
        raise HypothesisError("decomposable", "no decomposition into halves with disjoint supports found")
    q1, q2 = parts
    d1_endo, d1_exo, d2_endo, d2_exo = set(), set(), set(), set()
    for f in sorted_facts(db.facts):
        r1 = is_relevant_fact(q1, f, bound)
        r2 = is_relevant_fact(q2, f, bound)
        if r1 and r2:
            raise HypothesisError("decomposable", f"{f} is relevant to both halves")
        side = (d2_endo, d2_exo) if r2 else (d1_endo, d1_exo)
        side[0 if f in db.endo else 1].add(f)
    part1 = PartitionedDatabase(frozenset(d1_endo), frozenset(d1_exo))
    part2 = PartitionedDatabase(frozenset(d2_endo), frozenset(d2_exo))
    vec1 = _half_counts(q, q1, q2, part1, oracle, endogenous_only, bound, trace)
    vec2 = _half_counts(q, q2, q1, part2, oracle, endogenous_only, bound, trace)
    n = len(db.endo)

    def probability(p: Fraction) -> Fraction:
        return sppqe_from_fgmc_vector(vec1, p) * sppqe_from_fgmc_vector(vec2, p)

    return interpolate_counts(n, probability)


def _half_counts(q, qa, qb, part, oracle, endogenous_only, bound, trace) -> CountVector:
    """FGMC of ``qa`` on ``part`` with a support of ``qb`` as gadget."""
    n = len(part.endo)
    if qa.evaluate(part.exo):
        return binomial_vector(n)
    C = q.constants
    S, anchor = _pick_support(
        [s.facts for s in canonical_supports(qb, bound)], C, endogenous_only, "support of the other half"
    )
    placed, anchor = _place_support(S, C, part.constants(), anchor)
    plan = Plan(q, part, part, placed, anchor, C, qa, True, "decomposable")
    non_supports = run_plan(plan, oracle, trace)
    return CountVector(comb(n, j) - c for j, c in enumerate(non_supports))


def construct_instances(
    q: Query,
    db: PartitionedDatabase,
    mode: str = "pseudo_connected",
    max_i: int = 2,
    **kw,
) -> tuple[Query, list[ReductionInstance]]:
    """The oracle query and the instances A^0..A^max_i a run would build
    (pseudo-connected and leak modes), for validation."""
    bound = kw.get("bound")
    if mode == "pseudo_connected":
        plan = plan_pseudo_connected(q, db, kw.get("endogenous_only", False), bound)
    elif mode == "leak":
        plan, norm = plan_leak(q, db, kw.get("q_prime"), kw.get("s_prime"), kw.get("endogenous_only", False), bound)
        if plan is None:
            raise ValueError("Dx already satisfies q; no construction is run")
    else:
        raise ValueError(f"mode {mode!r} not supported here")
    return plan.oracle_query, [plan.instance(i) for i in range(max_i + 1)]

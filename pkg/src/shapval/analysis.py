"""Structural properties of queries and complexity verdicts for Shapley(q)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable

from shapval.query.model import (
    CQ,
    CRPQ,
    RPQ,
    PathAtom,
    Query,
    expansions,
)
from shapval.query.regex import alphabet
from shapval.query.supports import (
    canonical_supports,
    core,
    default_length_bound,
    minimize_union,
)
from shapval.relational import (
    Atom,
    Constant,
    Fact,
    Term,
    connected_components,
    constants_of,
    format_fact,
    is_connected_set,
    sorted_facts,
)

IN_FP = "InFP"
SHARP_P_HARD = "SharpPHard"
UNKNOWN = "Unknown"

RULES = (
    "hierarchical-sjf-CQ",
    "non-hierarchical-sjf-CQ",
    "rpq-word-length",
    "non-hierarchical-constant-free-CQ",
    "connected-ucq-unsafe",
    "cc-disjoint",
    "duplicable-singleton",
    "none-applicable",
)

_RULE_TEXT = {
    "hierarchical-sjf-CQ": "hierarchical sjf-CQ",
    "non-hierarchical-sjf-CQ": "non-hierarchical sjf-CQ",
    "non-hierarchical-constant-free-CQ": "non-hierarchical constant-free CQ",
    "none-applicable": "no applicable rule",
}

_VERDICT_TEXT = {IN_FP: "FP", SHARP_P_HARD: "#P-hard", UNKNOWN: "unknown"}


@dataclass(frozen=True)
class LeakWitness:
    leak_fact: Fact
    source_fact: Fact
    mapping: dict

    def check(self, query_constants: frozenset[Constant]) -> None:
        image = self.source_fact.substitute(self.mapping)
        assert image == self.leak_fact, "leak mapping does not send the source onto the leak"
        assert all(self.mapping.get(c, c) == c for c in query_constants & self.source_fact.constants())
        assert any(
            self.mapping[c] in query_constants
            for c in self.source_fact.constants() - query_constants
        ), "leak mapping collapses no free constant into C"

    def to_json(self) -> dict:
        return {
            "leak_fact": format_fact(self.leak_fact),
            "source_fact": format_fact(self.source_fact),
            "mapping": {str(k): str(v) for k, v in sorted(self.mapping.items(), key=lambda kv: kv[0].name)},
        }


@dataclass(frozen=True)
class ClassificationVerdict:
    verdict: str
    rule: str
    witness: Any = None
    reductions: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.verdict not in (IN_FP, SHARP_P_HARD, UNKNOWN):
            raise ValueError(f"bad verdict {self.verdict}")
        if self.rule not in RULES:
            raise ValueError(f"bad rule {self.rule}")
        if (self.verdict == UNKNOWN) != (self.rule == "none-applicable"):
            raise ValueError("Unknown goes with none-applicable and only with it")

    def describe(self) -> str:
        if self.rule == "rpq-word-length":
            detail = "RPQ with a word of length >= 3" if self.verdict == SHARP_P_HARD else "RPQ with words of length <= 2"
        else:
            detail = _RULE_TEXT[self.rule]
        return f"{_VERDICT_TEXT[self.verdict]} ({detail})"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "rule": self.rule,
            "witness": _witness_json(self.witness),
            "reductions": list(self.reductions),
        }


def _witness_json(w):
    if w is None:
        return None
    if isinstance(w, LeakWitness):
        return w.to_json()
    if isinstance(w, (frozenset, set)):
        return [format_fact(f) if f.is_fact else str(f) for f in sorted_facts(w)]
    if isinstance(w, (tuple, list)):
        return [_witness_json(x) for x in w]
    if isinstance(w, Atom):
        return str(w)
    return str(w)


# ---------------------------------------------------------------------------
# syntactic properties of CQs


def _atoms(q: Query | Iterable[Atom]) -> tuple[Atom, ...]:
    if isinstance(q, CQ):
        return q.atoms
    if isinstance(q, Query):
        raise TypeError(f"expected a CQ, got {q.kind}")
    return tuple(q)


def is_self_join_free(q: CQ) -> bool:
    atoms = _atoms(q)
    return len({a.relation for a in atoms}) == len(atoms)


def non_hierarchical_triple(q: CQ) -> tuple[Atom, Atom, Atom] | None:
    """Atoms a1, a2, a3 with vars(a1)&vars(a2) not within vars(a3) and
    vars(a3)&vars(a2) not within vars(a1), if any."""
    atoms = _atoms(q)
    vs = {a: a.variables() for a in atoms}
    for a1, a2, a3 in itertools.product(atoms, repeat=3):
        if not (vs[a1] & vs[a2]) <= vs[a3] and not (vs[a3] & vs[a2]) <= vs[a1]:
            return a1, a2, a3
    return None


def is_hierarchical(q: CQ) -> bool:
    return non_hierarchical_triple(q) is None


def is_variable_connected(q: CQ | Iterable[Atom]) -> bool:
    """Incidence graph stays connected once the constants are deleted."""
    atoms = _atoms(q)
    return len(connected_components(atoms, ignore=constants_of(atoms))) <= 1


def is_variable_connected_query(q: Query, bound: int | None = None) -> bool:
    """Every (non-redundant) finite approximant is variable-connected."""
    bound = default_length_bound(q) if bound is None else bound
    bodies = [b for _, b in minimize_union([e.atoms for e in expansions(q, bound)])]
    return all(is_variable_connected(b) for b in bodies)


def is_connected_query(q: Query, bound: int | None = None) -> bool:
    """All canonical supports are connected (sound for unions of CQs)."""
    return all(is_connected_set(s.facts) for s in canonical_supports(q, bound))


# ---------------------------------------------------------------------------
# leaks and island supports


def _single_fact_map(source: Fact, target: Fact, fixed: frozenset[Constant]) -> dict | None:
    if source.relation != target.relation or source.arity != target.arity:
        return None
    h: dict[Term, Constant] = {}
    for s, t in zip(source.args, target.args):
        if s in fixed:
            if s != t:
                return None
            continue
        if h.setdefault(s, t) != t:
            return None
    return h


def find_q_leak(q: Query, facts: Iterable[Fact], bound: int | None = None) -> LeakWitness | None:
    """A fact of ``facts`` onto which some canonical-support fact maps while
    sending one of its non-query constants into const(q)."""
    C = q.constants
    if not C:
        return None
    targets = sorted_facts(facts)
    for support in canonical_supports(q, bound):
        for src in sorted_facts(support.facts):
            for tgt in targets:
                h = _single_fact_map(src, tgt, C)
                if h is None:
                    continue
                if any(h[c] in C for c in src.constants() - C):
                    w = LeakWitness(tgt, src, h)
                    w.check(C)
                    return w
    return None


def has_duplicable_singleton_support(q: Query, bound: int | None = None) -> frozenset[Fact] | None:
    """A one-fact minimal support containing a constant outside const(q)."""
    for s in canonical_supports(q, bound):
        if len(s.facts) == 1 and constants_of(s.facts) - q.constants:
            return s.facts
    return None


def find_island_support(q: Query, bound: int | None = None) -> tuple[frozenset[Fact], str] | None:
    """A minimal support certified to be an island by a sufficient condition.

    ``None`` only means that no implemented condition applies.
    """
    supports = canonical_supports(q, bound)
    C = q.constants
    if not C and supports and all(is_connected_set(s.facts) for s in supports):
        return supports[0].facts, "connected-constant-free"
    if isinstance(q, RPQ):
        for s in supports:
            if len(s.facts) >= 2 and constants_of(s.facts) - C:
                return s.facts, "rpq-word-length"
    single = has_duplicable_singleton_support(q, bound)
    if single is not None:
        return single, "duplicable-singleton"
    return None


def unshared_constant(facts: Iterable[Fact], C: frozenset[Constant]) -> Constant | None:
    """First constant outside ``C`` occurring in exactly one fact."""
    facts = list(facts)
    for c in sorted(constants_of(facts) - C):
        if sum(1 for f in facts if c in f.constants()) == 1:
            return c
    return None


# ---------------------------------------------------------------------------
# decomposition


def _unifiable(a: Atom, b: Atom) -> bool:
    if a.relation != b.relation or a.arity != b.arity:
        return False
    # rename apart, then unify position by position
    parent: dict = {}

    def find(t):
        while t in parent:
            t = parent[t]
        return t

    for s, t in zip(a.args, b.args):
        s = find(("L", s) if s.is_var else s)
        t = find(("R", t) if t.is_var else t)
        if s == t:
            continue
        s_var = isinstance(s, tuple)
        t_var = isinstance(t, tuple)
        if not s_var and not t_var:
            return False
        if s_var:
            parent[s] = t
        else:
            parent[t] = s
    return True


def _blocks(units: list, linked) -> list[list]:
    parent = list(range(len(units)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(units)), 2):
        if linked(units[i], units[j]):
            parent[find(i)] = find(j)
    groups: dict[int, list] = {}
    for i, u in enumerate(units):
        groups.setdefault(find(i), []).append(u)
    return sorted(groups.values(), key=lambda g: min(units.index(u) for u in g))


def decompose(q: Query, experimental: bool = False) -> tuple[Query, Query] | None:
    """Split ``q`` into ``q1 AND q2`` whose minimal supports never share a fact.

    Variable-components are grouped whenever an atom of one could produce
    the same fact as an atom of another; two or more groups give a split
    (first group, the rest).  Queries with constants need ``experimental``.
    """
    if q.constants and not experimental:
        return None
    if isinstance(q, CQ):
        comps = connected_components(q.atoms, ignore=q.constants)
        if any(not constants_of(c) - q.constants and not any(a.variables() for a in c) for c in comps):
            # a ground component has all its constants in C
            return None

        def linked(x, y):
            return any(_unifiable(a, b) for a in x for b in y)

        groups = _blocks([tuple(c) for c in comps], linked)
        if len(groups) < 2:
            return None
        first = [a for comp in groups[0] for a in comp]
        rest = [a for g in groups[1:] for comp in g for a in comp]
        return CQ(tuple(first)), CQ(tuple(rest))
    if isinstance(q, CRPQ) and not q.constants:
        comps = _path_components(q.path_atoms)

        def linked(x, y):
            return bool(
                frozenset().union(*(alphabet(p.regex) for p in x))
                & frozenset().union(*(alphabet(p.regex) for p in y))
            )

        groups = _blocks([tuple(c) for c in comps], linked)
        if len(groups) < 2:
            return None
        first = tuple(p for comp in groups[0] for p in comp)
        rest = tuple(p for g in groups[1:] for comp in g for p in comp)
        return CRPQ(first), CRPQ(rest)
    return None


def _path_components(path_atoms: tuple[PathAtom, ...]) -> list[list[PathAtom]]:
    units = list(path_atoms)

    def linked(x, y):
        return bool({t for t in x.terms() if t.is_var} & {t for t in y.terms() if t.is_var})

    return _blocks(units, linked)


# ---------------------------------------------------------------------------
# verdicts


def _sjf_rule(q: CQ) -> ClassificationVerdict | None:
    if not is_self_join_free(q):
        return None
    triple = non_hierarchical_triple(q)
    if triple is None:
        return ClassificationVerdict(IN_FP, "hierarchical-sjf-CQ")
    return ClassificationVerdict(SHARP_P_HARD, "non-hierarchical-sjf-CQ", triple)


def _rpq_rule(q: Query) -> ClassificationVerdict | None:
    if not isinstance(q, RPQ):
        return None
    aut = q.path_atom.automaton
    if aut.has_word_of_length_at_least(3):
        word = next(w for w in aut.words(max(3, 2 * aut.num_states + 3)) if len(w) >= 3)
        return ClassificationVerdict(SHARP_P_HARD, "rpq-word-length", " ".join(word))
    return ClassificationVerdict(IN_FP, "rpq-word-length")


def _constant_free_rule(q: Query) -> ClassificationVerdict | None:
    if not isinstance(q, CQ) or q.constants:
        return None
    minimal = CQ(core(q.atoms))
    triple = non_hierarchical_triple(minimal)
    if triple is None:
        return None
    return ClassificationVerdict(SHARP_P_HARD, "non-hierarchical-constant-free-CQ", triple)


def derivable_verdicts(q: Query) -> list[ClassificationVerdict]:
    """Every verdict some rule would give, in priority order."""
    out = []
    if isinstance(q, CQ):
        v = _sjf_rule(q)
        if v is not None:
            out.append(v)
    v = _rpq_rule(q)
    if v is not None:
        out.append(v)
    v = _constant_free_rule(q)
    if v is not None:
        out.append(v)
    return out


def applicable_reductions(q: Query, bound: int | None = None) -> tuple[str, ...]:
    """Reductions from FGMC(q) to Shapley(q) whose hypotheses are certified."""
    found = []
    try:
        island = find_island_support(q, bound)
    except Exception:  # pragma: no cover - defensive: analysis is best effort
        island = None
    if island is not None:
        found.append(f"pseudo_connected ({island[1]})")
    if decompose(q) is not None:
        found.append("decomposable")
    return tuple(found)


def classify(q: Query, bound: int | None = None) -> ClassificationVerdict:
    """First applicable rule: sjf-CQ hierarchy, RPQ word length, constant-free
    non-hierarchical CQ; otherwise Unknown."""
    derivable = derivable_verdicts(q)
    reductions = applicable_reductions(q, bound)
    if derivable:
        v = derivable[0]
        return ClassificationVerdict(v.verdict, v.rule, v.witness, reductions)
    return ClassificationVerdict(UNKNOWN, "none-applicable", None, reductions)

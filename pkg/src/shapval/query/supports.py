"""Minimal supports, CQ cores, canonical supports and fact relevance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from shapval import kernels
from shapval.relational import (
    Atom,
    Constant,
    Fact,
    FreshConstants,
    PartitionedDatabase,
    Term,
    Variable,
    constants_of,
    iter_c_homomorphisms,
    sorted_facts,
    variables_of,
)
from shapval.query.model import Query, expansions, symbol_bound

DEFAULT_MAX_SUPPORTS = 256


class NoSupportError(ValueError):
    pass


def default_length_bound(q: Query) -> int:
    """max(2 * #regex symbols, 4), and 4 for queries without regexes."""
    return max(2 * symbol_bound(q), 4)


def minimal_supports_in(q: Query, facts: Iterable[Fact], budget: int | None = None) -> list[frozenset[Fact]]:
    """All inclusion-minimal subsets of ``facts`` that satisfy ``q``."""
    from shapval.counting import satisfaction_table

    db = PartitionedDatabase(frozenset(facts))
    players = db.players()
    table = satisfaction_table(q, db, budget=budget)
    out = []
    for mask in kernels.minimal_masks(table, len(players)):
        out.append(frozenset(players[i] for i in range(len(players)) if mask >> i & 1))
    return sorted(out, key=lambda s: (len(s), sorted_facts(s)))


def is_minimal_support(q: Query, facts: Iterable[Fact]) -> bool:
    facts = frozenset(facts)
    if not q.evaluate(facts):
        return False
    return all(not q.evaluate(facts - {f}) for f in facts)


# ---------------------------------------------------------------------------
# cores and UCQ minimisation


def _maps_into(source: Iterable[Atom], target: Iterable[Atom]) -> dict | None:
    # query constants are fixed, variables may go to any term of the target
    return next(iter_c_homomorphisms(source, target, remap_free=False), None)


def core(atoms: Iterable[Atom]) -> tuple[Atom, ...]:
    """Core of a CQ body: repeatedly retract onto a proper sub-body."""
    current = frozenset(atoms)
    changed = True
    while changed:
        changed = False
        for a in sorted(current, key=Atom.sort_key):
            h = _maps_into(current, current - {a})
            if h is not None:
                current = frozenset(x.substitute(h) for x in current)
                changed = True
                break
    return tuple(sorted(current, key=Atom.sort_key))


def minimize_union(bodies: list[tuple[Atom, ...]]) -> list[tuple[int, tuple[Atom, ...]]]:
    """Cores of the non-redundant disjuncts, with their original index.

    A disjunct is dropped when another one maps into it (it is then implied);
    among homomorphically equivalent disjuncts the first is kept.
    """
    cores = [core(b) for b in bodies]
    kept = []
    for i, ci in enumerate(cores):
        redundant = False
        for j, cj in enumerate(cores):
            if i == j:
                continue
            if _maps_into(cj, ci) is not None:
                equivalent = _maps_into(ci, cj) is not None
                if not equivalent or j < i:
                    redundant = True
                    break
        if not redundant:
            kept.append((i, ci))
    return kept


def instantiate(atoms: Iterable[Atom], fresh: FreshConstants) -> frozenset[Fact]:
    atoms = list(atoms)
    mapping = {v: fresh() for v in sorted(variables_of(atoms))}
    return frozenset(a.substitute(mapping) for a in atoms)


@dataclass(frozen=True)
class CanonicalSupport:
    facts: frozenset[Fact]
    tag: tuple

    def __iter__(self):
        return iter((self.facts, self.tag))


def canonical_supports(
    q: Query,
    length_bound: int | None = None,
    max_supports: int = DEFAULT_MAX_SUPPORTS,
) -> list[CanonicalSupport]:
    """Fresh instantiations of the (cores of the) query's disjuncts.

    Path atoms contribute one simple path per word of length <= bound.
    Each returned set satisfies ``q`` and has no proper satisfying subset.
    """
    bound = default_length_bound(q) if length_bound is None else length_bound
    exps = expansions(q, bound)
    out: list[CanonicalSupport] = []
    seen: set[frozenset[Fact]] = set()
    for idx, body in minimize_union([e.atoms for e in exps]):
        inst = instantiate(body, FreshConstants(q.constants))
        if inst in seen:
            continue
        if is_minimal_support(q, inst):
            seen.add(inst)
            out.append(CanonicalSupport(inst, exps[idx].tag))
            if len(out) >= max_supports:
                break
    return out


def first_canonical_support(q: Query, length_bound: int | None = None) -> CanonicalSupport:
    supports = canonical_supports(q, length_bound)
    if not supports:
        raise NoSupportError(f"no support of {q} within word length bound")
    return supports[0]


# ---------------------------------------------------------------------------
# relevance


def _assignments(variables: list[Variable], targets: list[Constant]) -> Iterator[dict[Term, object]]:
    """Map variables to existing targets or to fresh blocks (restricted growth)."""

    def rec(k: int, blocks: int, current: dict):
        if k == len(variables):
            yield dict(current)
            return
        v = variables[k]
        for t in targets:
            current[v] = t
            yield from rec(k + 1, blocks, current)
        for b in range(blocks + 1):
            current[v] = ("block", b)
            yield from rec(k + 1, max(blocks, b + 1), current)
        current.pop(v, None)

    yield from rec(0, 0, {})


def _unify_with_fact(atom: Atom, alpha: Fact) -> dict[Term, Constant] | None:
    if atom.relation != alpha.relation or atom.arity != alpha.arity:
        return None
    mapping: dict[Term, Constant] = {}
    for s, t in zip(atom.args, alpha.args):
        if s.is_var:
            if mapping.setdefault(s, t) != t:
                return None
        elif s != t:
            return None
    return mapping


def minimal_supports_through(q: Query, alpha: Fact, bound: int | None = None) -> Iterator[frozenset[Fact]]:
    """Minimal supports of ``q`` containing ``alpha`` (all of them for UCQs, up to
    renaming of the constants not in ``alpha`` or the query)."""
    if bound is None:
        bound = default_length_bound(q)
    exps = expansions(q, bound)
    bodies = [body for _, body in minimize_union([e.atoms for e in exps])]
    targets = sorted(alpha.constants() | q.constants)
    for body in bodies:
        for beta in body:
            base = _unify_with_fact(beta, alpha)
            if base is None:
                continue
            rest = sorted(variables_of(body) - base.keys())
            for extra in _assignments(rest, targets):
                fresh = FreshConstants(constants_of([alpha]) | q.constants)
                blocks: dict = {}
                mapping = dict(base)
                for v, t in extra.items():
                    if isinstance(t, tuple):
                        if t not in blocks:
                            blocks[t] = fresh()
                        t = blocks[t]
                    mapping[v] = t
                inst = frozenset(a.substitute(mapping) for a in body)
                if alpha in inst and is_minimal_support(q, inst):
                    yield inst


def is_relevant_fact(q: Query, alpha: Fact, bound: int | None = None) -> bool:
    """Whether ``alpha`` lies in some minimal support of ``q``.

    Exact for unions of CQs; for path queries only words up to ``bound`` are
    considered.
    """
    if not alpha.is_fact or alpha.relation not in q.relations():
        return False
    return next(minimal_supports_through(q, alpha, bound), None) is not None


__all__ = [
    "CanonicalSupport",
    "NoSupportError",
    "canonical_supports",
    "core",
    "default_length_bound",
    "first_canonical_support",
    "instantiate",
    "is_minimal_support",
    "is_relevant_fact",
    "minimal_supports_in",
    "minimal_supports_through",
    "minimize_union",
]

"""Terms, atoms, facts and (partitioned / probabilistic) databases.

Everything here is an immutable value.  Homomorphism search is a plain
backtracking matcher over relation-indexed fact sets; constants fixed by
the caller must map to themselves.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

FRESH_PREFIX = "__f"


@dataclass(frozen=True, slots=True, order=True)
class Constant:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("constant name must be non-empty")

    is_var = False

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Constant({self.name!r})"


@dataclass(frozen=True, slots=True, order=True)
class Variable:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")

    is_var = True

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Variable({self.name!r})"


Term = Constant | Variable


def term_key(t: Term) -> tuple[int, str]:
    """Sort key putting constants before variables."""
    return (1 if t.is_var else 0, t.name)


@dataclass(frozen=True, slots=True)
class Atom:
    relation: str
    args: tuple[Term, ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError(f"atom {self.relation} must have positive arity")

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_fact(self) -> bool:
        return not any(t.is_var for t in self.args)

    def constants(self) -> frozenset[Constant]:
        return frozenset(t for t in self.args if not t.is_var)

    def variables(self) -> frozenset[Variable]:
        return frozenset(t for t in self.args if t.is_var)

    def terms(self) -> frozenset[Term]:
        return frozenset(self.args)

    def sort_key(self):
        return (self.relation, tuple(term_key(t) for t in self.args))

    def substitute(self, mapping: Mapping[Term, Term]) -> Atom:
        return Atom(self.relation, tuple(mapping.get(t, t) for t in self.args))

    def __lt__(self, other: Atom) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        rendered = []
        for t in self.args:
            rendered.append(t.name if t.is_var else f"'{t.name}'")
        return f"{self.relation}({','.join(rendered)})"


# A fact is an atom whose arguments are all constants.
Fact = Atom


def fact(relation: str, *names: str) -> Fact:
    return Atom(relation, tuple(Constant(n) for n in names))


def format_fact(f: Fact) -> str:
    """Render a fact in the database text format (unquoted constants)."""
    return f"{f.relation}({','.join(t.name for t in f.args)})"


def sorted_facts(facts: Iterable[Atom]) -> list[Atom]:
    return sorted(facts, key=Atom.sort_key)


def constants_of(atoms: Iterable[Atom]) -> frozenset[Constant]:
    out: set[Constant] = set()
    for a in atoms:
        out.update(t for t in a.args if not t.is_var)
    return frozenset(out)


def variables_of(atoms: Iterable[Atom]) -> frozenset[Variable]:
    out: set[Variable] = set()
    for a in atoms:
        out.update(t for t in a.args if t.is_var)
    return frozenset(out)


def check_arities(atoms: Iterable[Atom]) -> dict[str, int]:
    """Return the relation -> arity schema, raising on a conflict."""
    schema: dict[str, int] = {}
    for a in atoms:
        known = schema.setdefault(a.relation, a.arity)
        if known != a.arity:
            raise ValueError(
                f"relation {a.relation} used with arities {known} and {a.arity}"
            )
    return schema


@dataclass(frozen=True)
class PartitionedDatabase:
    """A database split into endogenous (players) and exogenous facts."""

    endo: frozenset[Fact] = frozenset()
    exo: frozenset[Fact] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "endo", frozenset(self.endo))
        object.__setattr__(self, "exo", frozenset(self.exo))
        overlap = self.endo & self.exo
        if overlap:
            raise ValueError(f"facts both endogenous and exogenous: {sorted_facts(overlap)}")
        for f in self.endo | self.exo:
            if not f.is_fact:
                raise ValueError(f"{f} is not a fact")
        check_arities(self.endo | self.exo)

    @property
    def facts(self) -> frozenset[Fact]:
        return self.endo | self.exo

    def players(self) -> list[Fact]:
        """Endogenous facts in canonical order (bit i of a coalition mask)."""
        return sorted_facts(self.endo)

    def constants(self) -> frozenset[Constant]:
        return constants_of(self.facts)

    def with_exogenous(self, extra: Iterable[Fact]) -> PartitionedDatabase:
        return PartitionedDatabase(self.endo, self.exo | frozenset(extra))

    def move_to_exo(self, f: Fact) -> PartitionedDatabase:
        return PartitionedDatabase(self.endo - {f}, self.exo | {f})

    def drop(self, f: Fact) -> PartitionedDatabase:
        return PartitionedDatabase(self.endo - {f}, self.exo - {f})


@dataclass(frozen=True)
class ProbabilisticDatabase:
    """Tuple-independent probabilistic database with exact probabilities."""

    probs: Mapping[Fact, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for f, p in self.probs.items():
            p = Fraction(p)
            if not (0 < p <= 1):
                raise ValueError(f"probability of {f} must lie in (0,1], got {p}")
            if not f.is_fact:
                raise ValueError(f"{f} is not a fact")
            clean[f] = p
        check_arities(clean)
        object.__setattr__(self, "probs", clean)

    @classmethod
    def uniform(cls, db: PartitionedDatabase, p: Fraction) -> ProbabilisticDatabase:
        """Endogenous facts get ``p``, exogenous ones probability 1."""
        probs = {f: Fraction(p) for f in db.endo}
        probs.update({f: Fraction(1) for f in db.exo})
        return cls(probs)

    def partitioned(self) -> PartitionedDatabase:
        return PartitionedDatabase(
            frozenset(f for f, p in self.probs.items() if p != 1),
            frozenset(f for f, p in self.probs.items() if p == 1),
        )


# ---------------------------------------------------------------------------
# homomorphisms


def _index(target: Iterable[Atom]) -> dict[str, list[Atom]]:
    idx: dict[str, list[Atom]] = defaultdict(list)
    for f in sorted_facts(target):
        idx[f.relation].append(f)
    return idx


def _search_order(atoms: list[Atom]) -> list[Atom]:
    # Greedy: prefer atoms sharing variables with what is already bound.
    remaining = sorted(set(atoms), key=Atom.sort_key)
    order: list[Atom] = []
    bound: set[Term] = set()
    while remaining:
        best = max(
            range(len(remaining)),
            key=lambda i: (len(remaining[i].variables() & bound), -i),
        )
        a = remaining.pop(best)
        order.append(a)
        bound |= a.variables()
    return order


def iter_homomorphisms(
    source: Iterable[Atom],
    target: Iterable[Atom],
    fixed: Iterable[Constant] = (),
) -> Iterator[dict[Term, Constant]]:
    """Yield every match of query atoms ``source`` into ``target``.

    All constants of ``source`` map to themselves (query semantics).
    """
    yield from iter_c_homomorphisms(source, target, fixed, remap_free=False)


def iter_c_homomorphisms(
    source: Iterable[Atom],
    target: Iterable[Atom],
    fixed: Iterable[Constant] = (),
    remap_free: bool = True,
) -> Iterator[dict[Term, Constant]]:
    """Yield all mappings h with h(c)=c on ``fixed`` and h(source) within ``target``.

    With ``remap_free`` the source constants outside ``fixed`` behave like
    variables (this is the general C-homomorphism between fact sets).
    """
    fixed = frozenset(fixed)
    order = _search_order(list(source))
    idx = _index(target)
    mapping: dict[Term, Constant] = {}

    def movable(t: Term) -> bool:
        return t.is_var or (remap_free and t not in fixed)

    def extend(k: int) -> Iterator[dict[Term, Constant]]:
        if k == len(order):
            yield dict(mapping)
            return
        atom = order[k]
        for cand in idx.get(atom.relation, ()):
            if cand.arity != atom.arity:
                continue
            added = []
            ok = True
            for s, t in zip(atom.args, cand.args):
                if movable(s):
                    cur = mapping.get(s)
                    if cur is None:
                        mapping[s] = t
                        added.append(s)
                    elif cur != t:
                        ok = False
                        break
                elif s != t:
                    ok = False
                    break
            if ok:
                yield from extend(k + 1)
            for s in added:
                del mapping[s]

    yield from extend(0)


def find_c_homomorphism(
    source: Iterable[Atom],
    target: Iterable[Atom],
    fixed: Iterable[Constant] = (),
) -> dict[Term, Constant] | None:
    """First C-homomorphism from ``source`` into ``target`` or ``None``.

    Variables map anywhere; constants in ``fixed`` map to themselves; other
    constants of ``source`` may be remapped.  Fixed constants are included in
    the returned mapping as identities.
    """
    source = list(source)
    for h in iter_c_homomorphisms(source, target, fixed, remap_free=True):
        for c in constants_of(source):
            h.setdefault(c, c)
        return h
    return None


def is_connected_set(atoms: Iterable[Atom]) -> bool:
    """Connectivity of the incidence graph (atoms plus their terms).

    The empty set and singletons count as connected.
    """
    atoms = list(set(atoms))
    if len(atoms) <= 1:
        return True
    by_term: dict[Term, list[int]] = defaultdict(list)
    for i, a in enumerate(atoms):
        for t in a.terms():
            by_term[t].append(i)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for t in atoms[i].terms():
            for j in by_term[t]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
    return len(seen) == len(atoms)


def connected_components(
    atoms: Iterable[Atom], ignore: frozenset[Term] = frozenset()
) -> list[list[Atom]]:
    """Components of the incidence graph once the ``ignore`` terms are deleted."""
    atoms = sorted(set(atoms), key=Atom.sort_key)
    by_term: dict[Term, list[int]] = defaultdict(list)
    for i, a in enumerate(atoms):
        for t in a.terms():
            if t not in ignore:
                by_term[t].append(i)
    comps = []
    seen: set[int] = set()
    for start in range(len(atoms)):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            i = stack.pop()
            for t in atoms[i].terms():
                for j in by_term.get(t, ()):
                    if j not in seen:
                        seen.add(j)
                        comp.append(j)
                        stack.append(j)
        comps.append([atoms[i] for i in sorted(comp)])
    return comps


# ---------------------------------------------------------------------------
# fresh constants and renaming


class FreshConstants:
    """Deterministic supply of constants ``__f0, __f1, ...`` skipping taken names."""

    def __init__(self, avoid: Iterable[Constant] = (), prefix: str = FRESH_PREFIX):
        self.prefix = prefix
        self.avoid = {c.name for c in avoid}
        self.counter = 0

    def reserve(self, names: Iterable[Constant]) -> None:
        self.avoid.update(c.name for c in names)

    def __call__(self) -> Constant:
        while True:
            name = f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in self.avoid:
                self.avoid.add(name)
                return Constant(name)


def rename_constants(facts: Iterable[Fact], mapping: Mapping[Constant, Constant]) -> frozenset[Fact]:
    return frozenset(f.substitute(mapping) for f in facts)


def renaming_avoiding(
    facts: Iterable[Fact],
    keep: Iterable[Constant],
    avoid: Iterable[Constant],
    fresh: FreshConstants | None = None,
) -> dict[Constant, Constant]:
    """Injective renaming of every constant outside ``keep`` to a fresh one."""
    facts = list(facts)
    keep = frozenset(keep)
    present = constants_of(facts)
    if fresh is None:
        fresh = FreshConstants()
    fresh.reserve(present | keep | frozenset(avoid))
    mapping = {}
    for c in sorted(present - keep):
        mapping[c] = fresh()
    return mapping


def rename_avoiding(
    facts: Iterable[Fact],
    keep: Iterable[Constant] = (),
    avoid: Iterable[Constant] = (),
    fresh: FreshConstants | None = None,
) -> frozenset[Fact]:
    """Keep-isomorphic copy of ``facts`` whose other constants are all fresh."""
    facts = list(facts)
    return rename_constants(facts, renaming_avoiding(facts, keep, avoid, fresh))


def powerset(items: list) -> Iterator[tuple]:
    return itertools.chain.from_iterable(
        itertools.combinations(items, r) for r in range(len(items) + 1)
    )

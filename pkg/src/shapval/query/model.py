"""Boolean query ASTs (CQ, UCQ, RPQ, CRPQ, UCRPQ) and their satisfaction."""

from __future__ import annotations

import itertools
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from shapval.relational import (
    Atom,
    Constant,
    Term,
    Variable,
    check_arities,
    constants_of,
    iter_homomorphisms,
    variables_of,
)
from shapval.query.regex import Automaton, RegexNode, Symbol, alphabet, symbol_count


class Query:
    """Common surface of all query kinds."""

    kind = "query"

    @cached_property
    def constants(self) -> frozenset[Constant]:
        raise NotImplementedError

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        raise NotImplementedError

    def relations(self) -> frozenset[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class CQ(Query):
    atoms: tuple[Atom, ...]
    kind = "CQ"

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(sorted(set(self.atoms), key=Atom.sort_key)))
        if not self.atoms:
            raise ValueError("a CQ needs at least one atom")
        check_arities(self.atoms)

    @cached_property
    def constants(self) -> frozenset[Constant]:
        return constants_of(self.atoms)

    def variables(self) -> frozenset[Variable]:
        return variables_of(self.atoms)

    def relations(self) -> frozenset[str]:
        return frozenset(a.relation for a in self.atoms)

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        return next(iter_homomorphisms(self.atoms, facts), None) is not None

    def __str__(self) -> str:
        return ", ".join(str(a) for a in self.atoms)


@dataclass(frozen=True)
class UCQ(Query):
    disjuncts: tuple[CQ, ...]
    kind = "UCQ"

    def __post_init__(self):
        if not self.disjuncts:
            raise ValueError("a UCQ needs at least one disjunct")
        check_arities(a for d in self.disjuncts for a in d.atoms)

    @cached_property
    def constants(self) -> frozenset[Constant]:
        return frozenset().union(*(d.constants for d in self.disjuncts))

    def relations(self) -> frozenset[str]:
        return frozenset().union(*(d.relations() for d in self.disjuncts))

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        facts = frozenset(facts)
        return any(d.evaluate(facts) for d in self.disjuncts)

    def __str__(self) -> str:
        return " | ".join(str(d) for d in self.disjuncts)


@dataclass(frozen=True)
class PathAtom:
    regex: RegexNode
    src: Term
    dst: Term

    @cached_property
    def automaton(self) -> Automaton:
        return Automaton(self.regex)

    def terms(self) -> tuple[Term, Term]:
        return (self.src, self.dst)

    def __str__(self) -> str:
        def show(t):
            return t.name if t.is_var else f"'{t.name}'"

        return f"path {show(self.src)} {show(self.dst)} : ({self.regex})"


def _graph(facts: Iterable[Atom]) -> dict[Constant, list[tuple[str, Constant]]]:
    adj: dict[Constant, list[tuple[str, Constant]]] = defaultdict(list)
    for f in facts:
        if f.arity == 2:
            adj[f.args[0]].append((f.relation, f.args[1]))
    return adj


def reachable(atom: PathAtom, adj, source: Constant) -> frozenset[Constant]:
    """Nodes v such that some walk source -> v spells a word of the language."""
    aut = atom.automaton
    start = (source, 0)
    seen = {start}
    queue = deque([start])
    hits = set()
    while queue:
        node, state = queue.popleft()
        if state in aut.accepting:
            hits.add(node)
        for rel, nxt in adj.get(node, ()):
            for p in aut.step(state, rel):
                key = (nxt, p)
                if key not in seen:
                    seen.add(key)
                    queue.append(key)
    return frozenset(hits)


@dataclass(frozen=True)
class RPQ(Query):
    regex: RegexNode
    src: Constant
    dst: Constant
    kind = "RPQ"

    def __post_init__(self):
        if self.src.is_var or self.dst.is_var:
            raise ValueError("RPQ endpoints must be constants")

    @cached_property
    def path_atom(self) -> PathAtom:
        return PathAtom(self.regex, self.src, self.dst)

    @cached_property
    def constants(self) -> frozenset[Constant]:
        return frozenset([self.src, self.dst])

    def relations(self) -> frozenset[str]:
        return alphabet(self.regex)

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        return self.dst in reachable(self.path_atom, _graph(facts), self.src)

    def __str__(self) -> str:
        return str(self.path_atom)


@dataclass(frozen=True)
class CRPQ(Query):
    path_atoms: tuple[PathAtom, ...]
    kind = "CRPQ"

    def __post_init__(self):
        if not self.path_atoms:
            raise ValueError("a CRPQ needs at least one path atom")

    @cached_property
    def constants(self) -> frozenset[Constant]:
        return frozenset(t for p in self.path_atoms for t in p.terms() if not t.is_var)

    def variables(self) -> frozenset[Variable]:
        return frozenset(t for p in self.path_atoms for t in p.terms() if t.is_var)

    def relations(self) -> frozenset[str]:
        return frozenset().union(*(alphabet(p.regex) for p in self.path_atoms))

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        facts = list(facts)
        adj = _graph(facts)
        domain = sorted(constants_of(facts) | self.constants)
        cache: dict[tuple[int, Constant], frozenset[Constant]] = {}

        def reach(i: int, c: Constant) -> frozenset[Constant]:
            key = (i, c)
            if key not in cache:
                cache[key] = reachable(self.path_atoms[i], adj, c)
            return cache[key]

        # bind path atoms with a constant endpoint first
        order = sorted(
            range(len(self.path_atoms)),
            key=lambda i: (self.path_atoms[i].src.is_var, self.path_atoms[i].dst.is_var),
        )
        binding: dict[Term, Constant] = {}

        def value(t: Term):
            return t if not t.is_var else binding.get(t)

        def search(k: int) -> bool:
            if k == len(order):
                return True
            atom = self.path_atoms[order[k]]
            src = value(atom.src)
            sources = [src] if src is not None else domain
            for s in sources:
                new_src = src is None
                if new_src:
                    binding[atom.src] = s
                targets = reach(order[k], s)
                dst = value(atom.dst)
                if dst is not None:
                    if dst in targets and search(k + 1):
                        return True
                else:
                    for d in sorted(targets):
                        binding[atom.dst] = d
                        if search(k + 1):
                            return True
                    binding.pop(atom.dst, None)
                if new_src:
                    binding.pop(atom.src, None)
            return False

        return search(0)

    def __str__(self) -> str:
        return ", ".join(str(p) for p in self.path_atoms)


@dataclass(frozen=True)
class UCRPQ(Query):
    disjuncts: tuple[CRPQ, ...]
    kind = "UCRPQ"

    def __post_init__(self):
        if not self.disjuncts:
            raise ValueError("a UCRPQ needs at least one disjunct")

    @cached_property
    def constants(self) -> frozenset[Constant]:
        return frozenset().union(*(d.constants for d in self.disjuncts))

    def relations(self) -> frozenset[str]:
        return frozenset().union(*(d.relations() for d in self.disjuncts))

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        facts = frozenset(facts)
        return any(d.evaluate(facts) for d in self.disjuncts)

    def __str__(self) -> str:
        return " | ".join(str(d) for d in self.disjuncts)


@dataclass(frozen=True)
class Conjunction(Query):
    """Conjunction of two arbitrary queries (used when no flat form exists)."""

    left: Query
    right: Query
    kind = "AND"

    @cached_property
    def constants(self) -> frozenset[Constant]:
        return self.left.constants | self.right.constants

    def relations(self) -> frozenset[str]:
        return self.left.relations() | self.right.relations()

    def evaluate(self, facts: Iterable[Atom]) -> bool:
        facts = frozenset(facts)
        return self.left.evaluate(facts) and self.right.evaluate(facts)

    def __str__(self) -> str:
        return f"({self.left}) & ({self.right})"


# ---------------------------------------------------------------------------
# structural helpers


def cq_disjuncts(q: Query) -> list[tuple[Atom, ...]] | None:
    """Atom tuples of the disjuncts when ``q`` is a (union of) CQ(s)."""
    if isinstance(q, CQ):
        return [q.atoms]
    if isinstance(q, UCQ):
        return [d.atoms for d in q.disjuncts]
    if isinstance(q, Conjunction):
        left, right = cq_disjuncts(q.left), cq_disjuncts(q.right)
        if left is None or right is None:
            return None
        return [_merge_apart(a, b) for a, b in itertools.product(left, right)]
    return None


def _merge_apart(left: tuple[Atom, ...], right: tuple[Atom, ...]) -> tuple[Atom, ...]:
    taken = {v.name for v in variables_of(left)}
    mapping = {}
    for v in sorted(variables_of(right)):
        name = v.name
        k = 0
        while name in taken:
            k += 1
            name = f"{v.name}_{k}"
        taken.add(name)
        mapping[v] = Variable(name)
    return tuple(left) + tuple(a.substitute(mapping) for a in right)


def from_disjuncts(disjuncts: list[tuple[Atom, ...]]) -> Query:
    cqs = tuple(CQ(d) for d in disjuncts)
    return cqs[0] if len(cqs) == 1 else UCQ(cqs)


def conjoin(left: Query, right: Query) -> Query:
    """``left AND right`` with variables renamed apart, flattened when possible."""
    both = Conjunction(left, right)
    disjuncts = cq_disjuncts(both)
    if disjuncts is not None:
        return from_disjuncts(disjuncts)
    return both


@dataclass(frozen=True)
class Expansion:
    """One finite CQ approximant of a query (a disjunct with chosen words)."""

    atoms: tuple[Atom, ...]
    tag: tuple = field(default=())


def _path_chain(atom: PathAtom, word: tuple[str, ...], prefix: str) -> tuple[list[Atom], tuple[Term, Term] | None]:
    if not word:
        return [], (atom.src, atom.dst)
    nodes: list[Term] = [atom.src]
    for k in range(1, len(word)):
        nodes.append(Variable(f"{prefix}{k}"))
    nodes.append(atom.dst)
    return [Atom(r, (nodes[k], nodes[k + 1])) for k, r in enumerate(word)], None


def _unify_equalities(atoms: list[Atom], equalities: list[tuple[Term, Term]]):
    parent: dict[Term, Term] = {}

    def find(t):
        while parent.get(t, t) != t:
            t = parent[t]
        return t

    for a, b in equalities:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if not ra.is_var and not rb.is_var:
            return None
        if ra.is_var:
            parent[ra] = rb
        else:
            parent[rb] = ra
    mapping = {t: find(t) for t in list(parent)}
    return tuple(a.substitute(mapping) for a in atoms)


def expansions(q: Query, bound: int, max_expansions: int = 512) -> list[Expansion]:
    """Finite list of CQ approximants whose union agrees with ``q`` up to word length ``bound``.

    For CQ/UCQ these are exactly the disjuncts.  Path atoms are unfolded into
    chains of binary atoms, one per word of length <= ``bound``.
    """
    disjuncts = cq_disjuncts(q)
    if disjuncts is not None:
        return [Expansion(d, ("disjunct", i)) for i, d in enumerate(disjuncts)]
    if isinstance(q, RPQ):
        return expansions(CRPQ((q.path_atom,)), bound, max_expansions)
    if isinstance(q, UCRPQ):
        out = []
        for i, d in enumerate(q.disjuncts):
            for e in expansions(d, bound, max_expansions):
                out.append(Expansion(e.atoms, ("disjunct", i) + e.tag))
        return out[:max_expansions]
    if isinstance(q, CRPQ):
        word_lists = [
            list(p.automaton.words(bound, limit=max_expansions)) for p in q.path_atoms
        ]
        out = []
        for words in itertools.product(*word_lists):
            atoms: list[Atom] = []
            eqs = []
            for k, (p, w) in enumerate(zip(q.path_atoms, words)):
                chain, eq = _path_chain(p, w, f"_p{k}_")
                atoms.extend(chain)
                if eq is not None:
                    eqs.append(eq)
            unified = _unify_equalities(atoms, eqs)
            if unified is None:
                continue
            out.append(Expansion(unified, ("words", tuple(" ".join(w) for w in words))))
            if len(out) >= max_expansions:
                break
        return out
    if isinstance(q, Conjunction):
        out = []
        for a, b in itertools.product(expansions(q.left, bound), expansions(q.right, bound)):
            out.append(Expansion(_merge_apart(a.atoms, b.atoms), ("and", a.tag, b.tag)))
            if len(out) >= max_expansions:
                break
        return out
    raise TypeError(f"unsupported query {q!r}")


def is_path_query(q: Query) -> bool:
    if isinstance(q, (RPQ, CRPQ, UCRPQ)):
        return True
    if isinstance(q, Conjunction):
        return is_path_query(q.left) or is_path_query(q.right)
    return False


def as_path_atom(atom: Atom) -> PathAtom:
    if atom.arity != 2:
        raise ValueError(f"{atom} is not binary; cannot mix it with path atoms")
    return PathAtom(Symbol(atom.relation), atom.args[0], atom.args[1])


def path_atoms_of(q: Query) -> list[PathAtom]:
    if isinstance(q, RPQ):
        return [q.path_atom]
    if isinstance(q, CRPQ):
        return list(q.path_atoms)
    if isinstance(q, UCRPQ):
        return [p for d in q.disjuncts for p in d.path_atoms]
    if isinstance(q, Conjunction):
        return path_atoms_of(q.left) + path_atoms_of(q.right)
    return []


def symbol_bound(q: Query) -> int:
    """Total number of symbol occurrences over the query's regexes."""
    return sum(symbol_count(p.regex) for p in path_atoms_of(q))

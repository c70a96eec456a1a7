"""Regular expressions over binary relation names and their Glushkov automata."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator


@dataclass(frozen=True)
class Symbol:
    relation: str

    def __str__(self) -> str:
        return self.relation


@dataclass(frozen=True)
class Epsilon:
    def __str__(self) -> str:
        return "eps"


@dataclass(frozen=True)
class Concat:
    parts: tuple

    def __str__(self) -> str:
        return " ".join(_wrap(p, (Alt,)) for p in self.parts)


@dataclass(frozen=True)
class Alt:
    options: tuple

    def __str__(self) -> str:
        return " | ".join(str(o) for o in self.options)


@dataclass(frozen=True)
class Star:
    child: object

    def __str__(self) -> str:
        return _wrap(self.child, (Alt, Concat)) + "*"


RegexNode = Symbol | Epsilon | Concat | Alt | Star


def _wrap(node, kinds) -> str:
    return f"({node})" if isinstance(node, kinds) else str(node)


def alphabet(node: RegexNode) -> frozenset[str]:
    if isinstance(node, Symbol):
        return frozenset([node.relation])
    if isinstance(node, Epsilon):
        return frozenset()
    if isinstance(node, Star):
        return alphabet(node.child)
    children = node.parts if isinstance(node, Concat) else node.options
    out: frozenset[str] = frozenset()
    for c in children:
        out |= alphabet(c)
    return out


def symbol_count(node: RegexNode) -> int:
    """Number of symbol occurrences (Glushkov positions)."""
    if isinstance(node, Symbol):
        return 1
    if isinstance(node, Epsilon):
        return 0
    if isinstance(node, Star):
        return symbol_count(node.child)
    children = node.parts if isinstance(node, Concat) else node.options
    return sum(symbol_count(c) for c in children)


class Automaton:
    """Epsilon-free position automaton; state 0 is initial, states 1..m are positions."""

    def __init__(self, regex: RegexNode):
        self.regex = regex
        self.labels: list[str | None] = [None]
        self.follow: dict[int, set[int]] = {}
        nullable, first, last = self._build(regex)
        self.first = frozenset(first)
        self.accepting = frozenset(last | ({0} if nullable else set()))
        self.nullable = nullable
        self.follow = {p: frozenset(s) for p, s in self.follow.items()}

    def _build(self, node):
        # returns (nullable, first, last); fills labels / follow
        if isinstance(node, Symbol):
            p = len(self.labels)
            self.labels.append(node.relation)
            self.follow[p] = set()
            return False, {p}, {p}
        if isinstance(node, Epsilon):
            return True, set(), set()
        if isinstance(node, Star):
            _, first, last = self._build(node.child)
            for p in last:
                self.follow[p] |= first
            return True, first, last
        if isinstance(node, Alt):
            nullable, first, last = False, set(), set()
            for o in node.options:
                n, f, l = self._build(o)
                nullable |= n
                first |= f
                last |= l
            return nullable, first, last
        if isinstance(node, Concat):
            nullable, first, last = True, set(), set()
            for part in node.parts:
                n, f, l = self._build(part)
                for p in last:
                    self.follow[p] |= f
                if nullable:
                    first |= f
                last = (last | l) if n else l
                nullable = nullable and n
            return nullable, first, last
        raise TypeError(f"not a regex node: {node!r}")

    @property
    def num_states(self) -> int:
        return len(self.labels)

    def successors(self, state: int) -> frozenset[int]:
        return self.first if state == 0 else self.follow[state]

    def step(self, state: int, relation: str) -> list[int]:
        return [p for p in self.successors(state) if self.labels[p] == relation]

    def accepts(self, word) -> bool:
        current = {0}
        for r in word:
            current = {p for s in current for p in self.step(s, r)}
            if not current:
                return False
        return bool(current & self.accepting)

    @cached_property
    def useful_states(self) -> frozenset[int]:
        """States both reachable from 0 and co-reachable to acceptance."""
        reach = {0}
        stack = [0]
        while stack:
            s = stack.pop()
            for p in self.successors(s):
                if p not in reach:
                    reach.add(p)
                    stack.append(p)
        pred: dict[int, set[int]] = {s: set() for s in range(self.num_states)}
        for s in range(self.num_states):
            for p in self.successors(s):
                pred[p].add(s)
        co = set(self.accepting)
        stack = list(co)
        while stack:
            s = stack.pop()
            for p in pred[s]:
                if p not in co:
                    co.add(p)
                    stack.append(p)
        return frozenset(reach & co)

    def has_word_of_length_at_least(self, k: int) -> bool:
        """Reachability over (state, min(length, k)) pairs."""
        start = (0, 0)
        seen = {start}
        queue = deque([start])
        while queue:
            s, l = queue.popleft()
            if l == k and s in self.accepting:
                return True
            for p in self.successors(s):
                nxt = (p, min(l + 1, k))
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return False

    def is_empty(self) -> bool:
        return 0 not in self.useful_states

    def longest_word_length(self) -> int | None:
        """Length of the longest accepted word; ``None`` if unbounded, -1 if empty."""
        useful = self.useful_states
        if 0 not in useful:
            return -1
        # cycle among useful states means infinitely many words
        colour: dict[int, int] = {}

        def has_cycle(s: int) -> bool:
            colour[s] = 1
            for p in self.successors(s):
                if p not in useful:
                    continue
                c = colour.get(p, 0)
                if c == 1 or (c == 0 and has_cycle(p)):
                    return True
            colour[s] = 2
            return False

        if has_cycle(0):
            return None
        best: dict[int, int] = {}

        def longest_from(s: int) -> int:
            if s in best:
                return best[s]
            value = 0 if s in self.accepting else -(10**9)
            for p in self.successors(s):
                if p in useful:
                    value = max(value, 1 + longest_from(p))
            best[s] = value
            return value

        return longest_from(0)

    def words(self, max_length: int, limit: int | None = None) -> Iterator[tuple[str, ...]]:
        """Accepted words of length <= max_length, by length then lexicographically."""
        emitted = 0
        layer: dict[tuple[str, ...], frozenset[int]] = {(): frozenset([0])}
        for length in range(max_length + 1):
            for word in sorted(layer):
                if layer[word] & self.accepting:
                    yield word
                    emitted += 1
                    if limit is not None and emitted >= limit:
                        return
            if length == max_length:
                break
            nxt: dict[tuple[str, ...], set[int]] = {}
            useful = self.useful_states
            for word, states in layer.items():
                for s in states:
                    for p in self.successors(s):
                        if p in useful:
                            nxt.setdefault(word + (self.labels[p],), set()).add(p)
            layer = {w: frozenset(s) for w, s in nxt.items()}
            if not layer:
                break

"""Line-oriented database text format.

    R(a,b)          endogenous fact
    !R(a,b)         exogenous fact
    R(a,b) @ 1/2    fact with a probability (``p/q`` or ``1``)
    # comment

Constant names match ``[A-Za-z0-9_]+`` and may not use the reserved
fresh-constant prefix.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from shapval.relational import (
    FRESH_PREFIX,
    Constant,
    Fact,
    PartitionedDatabase,
    ProbabilisticDatabase,
    Atom,
    check_arities,
    format_fact,
    sorted_facts,
)

_LINE_RE = re.compile(
    r"^(?P<exo>!)?\s*(?P<rel>[A-Za-z_][A-Za-z0-9_]*)\s*\((?P<args>[^()]*)\)\s*"
    r"(?:@\s*(?P<prob>\S+))?\s*$"
)
_CONST_RE = re.compile(r"[A-Za-z0-9_]+\Z")
_RATIONAL_RE = re.compile(r"(?P<num>\d+)(?:/(?P<den>\d+))?\Z")


class DatabaseSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_rational(text: str) -> Fraction:
    """Exact rational from ``p/q`` or an integer literal (no decimals)."""
    m = _RATIONAL_RE.match(text.strip())
    if not m:
        raise ValueError(f"not a rational literal: {text!r}")
    den = int(m.group("den") or 1)
    if den == 0:
        raise ValueError("zero denominator")
    return Fraction(int(m.group("num")), den)


@dataclass
class DatabaseFile:
    endo: set[Fact] = field(default_factory=set)
    exo: set[Fact] = field(default_factory=set)
    probs: dict[Fact, Fraction] = field(default_factory=dict)

    def partitioned(self) -> PartitionedDatabase:
        """Plain and p<1 facts are endogenous; ``!`` and p=1 facts exogenous."""
        endo = set(self.endo)
        exo = set(self.exo)
        for f, p in self.probs.items():
            (exo if p == 1 else endo).add(f)
        return PartitionedDatabase(frozenset(endo), frozenset(exo))

    def probabilistic(self, default: Fraction | None = None) -> ProbabilisticDatabase:
        probs = dict(self.probs)
        for f in self.exo:
            probs[f] = Fraction(1)
        for f in self.endo:
            if default is None:
                raise ValueError(f"fact {format_fact(f)} has no probability (give a uniform one)")
            probs[f] = Fraction(default)
        return ProbabilisticDatabase(probs)

    @property
    def facts(self) -> frozenset[Fact]:
        return frozenset(self.endo) | frozenset(self.exo) | frozenset(self.probs)


def loads(text: str, allow_reserved: bool = False) -> DatabaseFile:
    out = DatabaseFile()
    seen: dict[Fact, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise DatabaseSyntaxError(f"cannot parse {line!r}", lineno)
        names = [a.strip() for a in m.group("args").split(",")]
        for name in names:
            if not _CONST_RE.match(name):
                raise DatabaseSyntaxError(f"invalid constant {name!r}", lineno)
            if name.startswith(FRESH_PREFIX) and not allow_reserved:
                raise DatabaseSyntaxError(f"constant {name!r} uses the reserved prefix {FRESH_PREFIX!r}", lineno)
        f = Atom(m.group("rel"), tuple(Constant(n) for n in names))
        if f in seen:
            raise DatabaseSyntaxError(f"fact {format_fact(f)} already given on line {seen[f]}", lineno)
        seen[f] = lineno
        prob = m.group("prob")
        if prob is not None:
            if m.group("exo"):
                raise DatabaseSyntaxError("exogenous facts cannot carry a probability", lineno)
            try:
                p = parse_rational(prob)
            except ValueError as exc:
                raise DatabaseSyntaxError(str(exc), lineno) from None
            if not 0 < p <= 1:
                raise DatabaseSyntaxError(f"probability {p} outside (0,1]", lineno)
            out.probs[f] = p
        elif m.group("exo"):
            out.exo.add(f)
        else:
            out.endo.add(f)
        try:
            check_arities(seen)
        except ValueError as exc:
            raise DatabaseSyntaxError(str(exc), lineno) from None
    return out


def load(path: str, allow_reserved: bool = False) -> DatabaseFile:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), allow_reserved)


def dumps(db: PartitionedDatabase | ProbabilisticDatabase | Iterable[Fact]) -> str:
    lines = []
    if isinstance(db, PartitionedDatabase):
        for f in sorted_facts(db.facts):
            lines.append(("!" if f in db.exo else "") + format_fact(f))
    elif isinstance(db, ProbabilisticDatabase):
        for f in sorted_facts(db.probs):
            p = db.probs[f]
            lines.append(f"{format_fact(f)} @ {p}")
    else:
        lines = [format_fact(f) for f in sorted_facts(db)]
    return "\n".join(lines) + ("\n" if lines else "")

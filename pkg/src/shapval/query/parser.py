"""Text syntax for queries.

    query    := disjunct ('|' disjunct)*
    disjunct := item (',' item)*
    item     := NAME '(' term (',' term)* ')'
              | 'path' term term ':' regex
    term     := NAME            -- variable
              | "'" NAME "'"    -- constant
    regex    := concat ('|' concat)*
    concat   := star+
    star     := primary '*'*
    primary  := NAME | 'eps' | '(' regex ')'

Inside a regex a ``|`` is alternation, unless it is followed by ``path`` or
by something shaped like an atom (``Name(x`` / ``Name('a'``), in which case
it separates disjuncts.  A top-level ``,`` ends the regex.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from shapval.relational import FRESH_PREFIX, Atom, Constant, Variable, check_arities
from shapval.query.model import (
    CQ,
    CRPQ,
    RPQ,
    UCQ,
    UCRPQ,
    PathAtom,
    Query,
    as_path_atom,
)
from shapval.query.regex import Alt, Concat, Epsilon, Star, Symbol

CONSTANT_RE = re.compile(r"[A-Za-z0-9_]+\Z")


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass
class Token:
    kind: str  # NAME, QUOTED, PUNCT, EOF
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<NAME>[A-Za-z_][A-Za-z0-9_]*)|'(?P<QUOTED>[^'\n]*)'|(?P<PUNCT>[(),|*:])"
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = pos + chunk.rfind("\n") + 1
        else:
            tokens.append(Token(kind, m.group(kind), line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise QuerySyntaxError(message, tok.line, tok.column)

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text or tok.kind not in ("PUNCT", "NAME"):
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind == "PUNCT" and tok.text == text

    # -- grammar ---------------------------------------------------------

    def query(self) -> list[list]:
        disjuncts = [self.disjunct()]
        while self.at("|"):
            self.next()
            disjuncts.append(self.disjunct())
        if self.peek().kind != "EOF":
            self.error(f"unexpected {self.peek().text!r}")
        return disjuncts

    def disjunct(self) -> list:
        items = [self.item()]
        while self.at(","):
            self.next()
            items.append(self.item())
        return items

    def item(self):
        tok = self.peek()
        if tok.kind == "NAME" and tok.text == "path" and not self.at("(", 1):
            self.next()
            src = self.term()
            dst = self.term()
            self.expect(":")
            return PathAtom(self.regex(), src, dst)
        if tok.kind != "NAME":
            self.error(f"expected an atom, found {tok.text or 'end of input'!r}")
        self.next()
        self.expect("(")
        args = [self.term()]
        while self.at(","):
            self.next()
            args.append(self.term())
        self.expect(")")
        return Atom(tok.text, tuple(args))

    def term(self):
        tok = self.next()
        if tok.kind == "NAME":
            return Variable(tok.text)
        if tok.kind == "QUOTED":
            if not CONSTANT_RE.match(tok.text):
                self.error(f"invalid constant name {tok.text!r}", tok)
            if tok.text.startswith(FRESH_PREFIX):
                self.error(f"constant names may not start with {FRESH_PREFIX!r}", tok)
            return Constant(tok.text)
        self.error(f"expected a term, found {tok.text or 'end of input'!r}", tok)

    def _union_ahead(self) -> bool:
        # called while positioned on '|'
        nxt = self.peek(1)
        if nxt.kind == "NAME" and nxt.text == "path":
            return True
        if nxt.kind == "NAME" and self.at("(", 2):
            arg = self.peek(3)
            if arg.kind == "QUOTED":
                return True
            if arg.kind == "NAME" and arg.text[:1].islower():
                return self.at(",", 4) or self.at(")", 4)
        return False

    def regex(self, nested: bool = False):
        options = [self.concat()]
        while self.at("|") and (nested or not self._union_ahead()):
            self.next()
            options.append(self.concat())
        return options[0] if len(options) == 1 else Alt(tuple(options))

    def concat(self):
        parts = []
        while True:
            tok = self.peek()
            if tok.kind == "NAME" or self.at("("):
                parts.append(self.star())
            else:
                break
        if not parts:
            self.error("empty regular expression")
        return parts[0] if len(parts) == 1 else Concat(tuple(parts))

    def star(self):
        node = self.primary()
        while self.at("*"):
            self.next()
            node = Star(node)
        return node

    def primary(self):
        tok = self.next()
        if tok.kind == "NAME":
            return Epsilon() if tok.text == "eps" else Symbol(tok.text)
        if tok.kind == "PUNCT" and tok.text == "(":
            node = self.regex(nested=True)
            self.expect(")")
            return node
        self.error(f"unexpected {tok.text!r} in regular expression", tok)


def _build(disjuncts: list[list]) -> Query:
    all_atoms = [i for d in disjuncts for i in d if isinstance(i, Atom)]
    check_arities(all_atoms)
    has_paths = any(isinstance(i, PathAtom) for d in disjuncts for i in d)
    if not has_paths:
        cqs = tuple(CQ(tuple(d)) for d in disjuncts)
        return cqs[0] if len(cqs) == 1 else UCQ(cqs)
    crpqs = []
    for d in disjuncts:
        crpqs.append(CRPQ(tuple(i if isinstance(i, PathAtom) else as_path_atom(i) for i in d)))
    if len(crpqs) == 1:
        (only,) = crpqs
        if len(only.path_atoms) == 1:
            p = only.path_atoms[0]
            if not p.src.is_var and not p.dst.is_var:
                return RPQ(p.regex, p.src, p.dst)
        return only
    return UCRPQ(tuple(crpqs))


def parse_query(text: str) -> Query:
    """Parse query text into a :class:`Query`; raises :class:`QuerySyntaxError`."""
    parser = _Parser(text)
    disjuncts = parser.query()
    try:
        return _build(disjuncts)
    except ValueError as exc:
        if isinstance(exc, QuerySyntaxError):
            raise
        raise QuerySyntaxError(str(exc), 1, 1) from None

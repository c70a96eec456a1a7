from shapval.query.model import (
    CQ,
    CRPQ,
    RPQ,
    UCQ,
    UCRPQ,
    Conjunction,
    PathAtom,
    Query,
    conjoin,
    cq_disjuncts,
    expansions,
)
from shapval.query.parser import QuerySyntaxError, parse_query
from shapval.query.regex import Alt, Automaton, Concat, Epsilon, Star, Symbol
from shapval.query.supports import (
    canonical_supports,
    core,
    is_minimal_support,
    is_relevant_fact,
    minimal_supports_in,
)

__all__ = [
    "CQ", "CRPQ", "RPQ", "UCQ", "UCRPQ", "Conjunction", "PathAtom", "Query",
    "conjoin", "cq_disjuncts", "expansions", "QuerySyntaxError", "parse_query",
    "Alt", "Automaton", "Concat", "Epsilon", "Star", "Symbol",
    "canonical_supports", "core", "is_minimal_support", "is_relevant_fact",
    "minimal_supports_in", "evaluate",
]


def evaluate(q: Query, facts) -> bool:
    """Whether the fact set satisfies ``q``."""
    return q.evaluate(facts)

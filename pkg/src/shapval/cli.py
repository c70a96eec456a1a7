"""The ``shapval`` command line.

Exit codes: 0 success, 1 a ``verify`` property or a ``reduce --check``
comparison failed, 2 input error, 3 budget exceeded or a reduction
hypothesis could not be certified.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any, Callable

from shapval import dbformat
from shapval.analysis import classify, decompose, find_island_support
from shapval.counting import (
    BudgetExceeded,
    CountVector,
    fgmc_vector,
    fgmc_vector_from_pqe,
    fgmc_via_fmc,
    fmc_vector,
    pqe,
    sppqe_from_fgmc_vector,
)
from shapval.errors import ConstructionError, HypothesisError
from shapval.query import QuerySyntaxError, parse_query
from shapval.query.model import Query
from shapval.query.supports import NoSupportError
from shapval.reduction import MODES, fgmc_via_shapley
from shapval.relational import (
    Constant,
    Fact,
    PartitionedDatabase,
    ProbabilisticDatabase,
    constants_of,
    format_fact,
)
from shapval.shapley import (
    PERMUTATION_LIMIT,
    ConstantPartition,
    QueryGame,
    fgmc_constants_vector,
    max_shapley,
    shapley_all,
    shapley_constants,
    shapley_constants_via_fgmc,
    shapley_permutations_all,
    shapley_via_fgmc,
)

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rendering


def fmt_rational(x: Fraction, approx: bool = False) -> str:
    x = Fraction(x)
    s = str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if approx:
        s += f" (~{float(x):.6g})"
    return s


def json_rational(x: Fraction, approx: bool = False) -> dict:
    x = Fraction(x)
    out: dict[str, Any] = {"num": str(x.numerator), "den": str(x.denominator)}
    if approx:
        out["approx"] = float(x)
    return out


def fmt_vector(v) -> str:
    return str([int(c) for c in v])


def json_vector(v) -> list[str]:
    return [str(int(c)) for c in v]


# ---------------------------------------------------------------------------
# inputs


def parse_fact(text: str) -> Fact:
    try:
        parsed = dbformat.loads(text)
    except dbformat.DatabaseSyntaxError as exc:
        raise InputError(f"bad fact {text!r}: {exc}") from None
    facts = parsed.facts
    if len(facts) != 1:
        raise InputError(f"expected exactly one fact, got {text!r}")
    return next(iter(facts))


def parse_facts(text: str) -> list[Fact]:
    """Facts separated by ';' or newlines."""
    return [parse_fact(part) for part in text.replace(";", "\n").splitlines() if part.strip()]


def read_query(args) -> Query:
    if args.query is not None and args.query_file is not None:
        raise InputError("give either --query or --query-file, not both")
    text = args.query
    if args.query_file is not None:
        with open(args.query_file, encoding="utf-8") as fh:
            text = fh.read()
    if text is None:
        raise InputError("a query is required (--query or --query-file)")
    return parse_query(text.strip())


def read_db(args) -> dbformat.DatabaseFile:
    if args.db is None:
        raise InputError("--db is required for this command")
    return dbformat.load(args.db)


def select_facts(db: PartitionedDatabase, texts: list[str]) -> list[Fact]:
    out = []
    for t in texts:
        f = parse_fact(t)
        if f not in db.facts:
            raise InputError(f"fact {format_fact(f)} is not in the database")
        if f not in db.endo:
            raise InputError(f"fact {format_fact(f)} is exogenous and has no Shapley value")
        out.append(f)
    return out


def constant_partition(args, q: Query, facts: frozenset[Fact]) -> ConstantPartition:
    present = constants_of(facts)
    if args.endo_consts is not None:
        names = [c.strip() for c in args.endo_consts.split(",") if c.strip()]
        endo = {Constant(c) for c in names}
        missing = endo - present
        if missing:
            raise InputError(f"not constants of the database: {', '.join(sorted(c.name for c in missing))}")
    else:
        endo = present - q.constants
    return ConstantPartition.of(facts, endo)


# ---------------------------------------------------------------------------
# commands


def cmd_shapley(args, out: "Report") -> int:
    q, db = read_query(args), read_db(args).partitioned()
    g = QueryGame(db, q)
    if args.all == bool(args.fact):
        raise InputError("give --fact (possibly repeated) or --all")
    facts = g.players() if args.all else select_facts(db, args.fact)
    if args.method == "subsets":
        values = shapley_all(g, args.budget)
    elif args.method == "permutations":
        if len(db.endo) > PERMUTATION_LIMIT:
            raise InputError(f"permutation method supports at most {PERMUTATION_LIMIT} endogenous facts")
        values = shapley_permutations_all(g)
    else:
        values = {f: shapley_via_fgmc(g, f) for f in facts}
    rows = [(f, values[f]) for f in facts]
    if args.json:
        out.json({
            "command": "shapley",
            "query": str(q),
            "method": args.method,
            "values": [{"fact": format_fact(f), "value": json_rational(v, args.approx)} for f, v in rows],
        })
    elif len(rows) == 1 and not args.all:
        out.line(fmt_rational(rows[0][1], args.approx))
    else:
        for f, v in rows:
            out.line(f"{format_fact(f)}\t{fmt_rational(v, args.approx)}")
    return EXIT_OK


def cmd_max_shapley(args, out: "Report") -> int:
    q, db = read_query(args), read_db(args).partitioned()
    f, v = max_shapley(QueryGame(db, q), args.budget)
    if args.json:
        out.json({"command": "max-shapley", "query": str(q), "fact": format_fact(f),
                  "value": json_rational(v, args.approx)})
    else:
        out.line(f"{format_fact(f)}\t{fmt_rational(v, args.approx)}")
    return EXIT_OK


def cmd_shapley_const(args, out: "Report") -> int:
    q = read_query(args)
    facts = read_db(args).facts
    cp = constant_partition(args, q, facts)
    if args.all == bool(args.constant):
        raise InputError("give --constant (possibly repeated) or --all")
    if args.all:
        consts = cp.players()
    else:
        consts = [Constant(c) for c in args.constant]
        for c in consts:
            if c not in cp.endo_consts:
                raise InputError(f"constant {c} is not an endogenous constant")
    if args.method == "fgmc":
        values = [(c, shapley_constants_via_fgmc(q, facts, cp, c)) for c in consts]
    else:
        values = [(c, shapley_constants(q, facts, cp, c, args.budget)) for c in consts]
    if args.json:
        out.json({
            "command": "shapley-const",
            "query": str(q),
            "endogenous_constants": [c.name for c in cp.players()],
            "values": [{"constant": c.name, "value": json_rational(v, args.approx)} for c, v in values],
        })
    elif len(values) == 1 and not args.all:
        out.line(fmt_rational(values[0][1], args.approx))
    else:
        for c, v in values:
            out.line(f"{c.name}\t{fmt_rational(v, args.approx)}")
    return EXIT_OK


def _count_vector(args, q: Query, dbf: dbformat.DatabaseFile) -> CountVector:
    command = args.command
    if command in ("mc", "fmc"):
        if dbf.exo or any(p == 1 for p in dbf.probs.values()):
            raise InputError(f"{command} counts over purely endogenous databases; use g{command} instead")
        return fmc_vector(q, dbf.facts, budget=args.budget)
    return fgmc_vector(q, dbf.partitioned(), budget=args.budget)


def cmd_count(args, out: "Report") -> int:
    q, dbf = read_query(args), read_db(args)
    if args.constants:
        cp = constant_partition(args, q, dbf.facts)
        vec = fgmc_constants_vector(q, dbf.facts, cp, args.budget)
    else:
        vec = _count_vector(args, q, dbf)
    fixed_size = args.command in ("fmc", "fgmc")
    report: dict[str, Any] = {"command": args.command, "query": str(q)}
    if fixed_size:
        if args.vector == (args.size is not None):
            raise InputError("give exactly one of --size k and --vector")
        if args.vector:
            report["vector"] = json_vector(vec)
            text = fmt_vector(vec)
        else:
            if args.size < 0:
                raise InputError("--size must be non-negative")
            report["size"] = args.size
            report["count"] = str(vec.at(args.size))
            text = str(vec.at(args.size))
    else:
        if args.vector or args.size is not None:
            raise InputError(f"{args.command} takes neither --size nor --vector")
        total = sum(vec)
        report["count"] = str(total)
        text = str(total)
    if args.json:
        out.json(report)
    else:
        out.line(text)
    return EXIT_OK


def cmd_pqe(args, out: "Report") -> int:
    q, dbf = read_query(args), read_db(args)
    default = None
    if args.p is not None:
        try:
            default = dbformat.parse_rational(args.p)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if not 0 < default <= 1:
            raise InputError(f"--p must lie in (0,1], got {default}")
    try:
        pdb = dbf.probabilistic(default)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    value = pqe(q, pdb, budget=args.budget)
    if args.json:
        out.json({"command": "pqe", "query": str(q), "probability": json_rational(value, args.approx)})
    else:
        out.line(fmt_rational(value, args.approx))
    return EXIT_OK


def cmd_classify(args, out: "Report") -> int:
    q = read_query(args)
    verdict = classify(q, args.bound)
    if args.json:
        report = {"command": "classify", "query": str(q), "description": verdict.describe()}
        report.update(verdict.to_json())
        out.json(report)
    else:
        out.line(verdict.describe())
        if args.verbose:
            if verdict.witness is not None:
                out.line(f"witness: {verdict.to_json()['witness']}")
            out.line("reductions: " + (", ".join(verdict.reductions) or "none certified"))
    return EXIT_OK


def cmd_reduce(args, out: "Report") -> int:
    q, db = read_query(args), read_db(args).partitioned()
    q_prime = parse_query(args.q_prime) if args.q_prime else None
    s_prime = parse_facts(args.s_prime) if args.s_prime else None
    trace: list | None = [] if args.trace else None
    vec = fgmc_via_shapley(
        q, db, args.mode,
        q_prime=q_prime, s_prime=s_prime,
        endogenous_only=args.endogenous_only,
        experimental=args.experimental,
        bound=args.bound,
        trace=trace,
    )
    report: dict[str, Any] = {"command": "reduce", "query": str(q), "mode": args.mode,
                              "vector": json_vector(vec)}
    if trace is not None:
        report["trace"] = [r.to_json() for r in trace]
    if args.check:
        expected = fgmc_vector(q, db, budget=args.budget)
        report["matches_direct"] = list(expected) == list(vec)
    if args.json:
        out.json(report)
    else:
        out.line(fmt_vector(vec))
        for r in trace or []:
            out.line(f"# i={r.i} anchor={r.anchor} pivot={r.pivot} oracle={fmt_rational(r.oracle_value)} "
                     f"Z={fmt_rational(r.Z)} Sh_i={fmt_rational(r.Sh_i)}")
            for line in r.database.splitlines():
                out.line(f"#   {line}")
        if args.check:
            out.line("matches direct count" if report["matches_direct"] else "MISMATCH with direct count")
    if args.check and not report["matches_direct"]:
        return EXIT_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def verification_suite(q: Query, db: PartitionedDatabase, budget: int | None = None) -> list[tuple[str, Callable[[], str | None]]]:
    """Named checks on one instance; each returns None or a failure detail."""
    g = QueryGame(db, q)
    state: dict[str, Any] = {}

    def values():
        if "values" not in state:
            state["values"] = shapley_all(g, budget)
        return state["values"]

    def vector():
        if "vector" not in state:
            state["vector"] = fgmc_vector(q, db, budget=budget)
        return state["vector"]

    def efficiency():
        total = sum(values().values(), Fraction(0))
        wealth = g.wealth(db.endo)
        return None if total == wealth else f"sum of values {total} != wealth {wealth}"

    def routes_agree():
        vals = values()
        if len(db.endo) <= PERMUTATION_LIMIT:
            perm = shapley_permutations_all(g)
            for f in g.players():
                if perm[f] != vals[f]:
                    return f"{format_fact(f)}: permutations {perm[f]} != subsets {vals[f]}"
        for f in g.players():
            via = shapley_via_fgmc(g, f)
            if via != vals[f]:
                return f"{format_fact(f)}: via counts {via} != subsets {vals[f]}"
        return None

    def null_player():
        for f in g.players():
            if not any(f in s for s in _minimal_generalized_supports(g)) and values()[f] != 0:
                return f"{format_fact(f)} is in no minimal support but has value {values()[f]}"
        return None

    def counts_sum():
        gmc_total = sum(vector())
        brute = sum(1 for _ in _generalized_supports(g))
        return None if gmc_total == brute else f"sum of size counts {gmc_total} != {brute} supports"

    def interpolation():
        back = fgmc_vector_from_pqe(q, db)
        if list(back) != list(vector()):
            return f"from probabilities {list(back)} != direct {list(vector())}"
        if db.endo:
            half = Fraction(1, 2)
            a = sppqe_from_fgmc_vector(vector(), half)
            b = pqe(q, ProbabilisticDatabase.uniform(db, half), budget=budget)
            if a != b:
                return f"probability at 1/2: from counts {a} != direct {b}"
        return None

    def endogenous_recursion():
        if len(db.exo) > 10:
            return None
        got = fgmc_via_fmc(q, db)
        return None if list(got) == list(vector()) else f"recursion {list(got)} != direct {list(vector())}"

    def max_value():
        f, v = max_shapley(g, budget)
        best = max(values().values())
        return None if v == best == values()[f] else f"max_shapley gave {format_fact(f)} with {v}, max is {best}"

    checks = [
        ("efficiency", efficiency),
        ("shapley-routes-agree", routes_agree),
        ("null-player", null_player),
        ("count-total", counts_sum),
        ("probability-interpolation", interpolation),
        ("endogenous-recursion", endogenous_recursion),
    ]
    if db.endo:
        checks.append(("max-shapley", max_value))

    def reduction(mode):
        def run():
            got = fgmc_via_shapley(q, db, mode)
            return None if list(got) == list(vector()) else f"{mode} reduction {list(got)} != direct {list(vector())}"
        return run

    try:
        island = find_island_support(q)
    except Exception:
        island = None
    if island is not None:
        checks.append(("reduction-pseudo-connected", reduction("pseudo_connected")))
    if decompose(q) is not None:
        checks.append(("reduction-decomposable", reduction("decomposable")))
    return checks


def _generalized_supports(g: QueryGame):
    players = g.players()
    exo = g.db.exo
    for mask in range(1 << len(players)):
        chosen = frozenset(players[i] for i in range(len(players)) if mask >> i & 1)
        if g.q.evaluate(exo | chosen):
            yield chosen


def _minimal_generalized_supports(g: QueryGame):
    sups = list(_generalized_supports(g))
    return [s for s in sups if not any(t < s for t in sups)]


def cmd_verify(args, out: "Report") -> int:
    q, db = read_query(args), read_db(args).partitioned()
    results = []
    failed = None
    for name, check in verification_suite(q, db, args.budget):
        detail = check()
        results.append({"property": name, "ok": detail is None, "detail": detail})
        if detail is not None:
            failed = name
            break
    if args.json:
        out.json({"command": "verify", "query": str(q), "passed": failed is None, "checks": results})
    else:
        for r in results:
            out.line(f"{'ok  ' if r['ok'] else 'FAIL'} {r['property']}" + (f": {r['detail']}" if r["detail"] else ""))
        out.line(f"all {len(results)} checks passed" if failed is None else f"first failing property: {failed}")
    return EXIT_OK if failed is None else EXIT_FAILED


# ---------------------------------------------------------------------------
# plumbing


class Report:
    def __init__(self, stream):
        self.stream = stream

    def line(self, text: str) -> None:
        print(text, file=self.stream)

    def json(self, obj) -> None:
        print(json.dumps(obj, indent=2), file=self.stream)


def _common(p: argparse.ArgumentParser, db: bool = True) -> None:
    if db:
        p.add_argument("--db", help="database file")
    p.add_argument("--query", "-q", help="query text")
    p.add_argument("--query-file", help="file containing the query")
    p.add_argument("--json", action="store_true", help="emit a JSON report")
    p.add_argument("--approx", action="store_true", help="add decimal renderings next to exact values")
    p.add_argument("--budget", type=int, help="maximum number of enumerated subsets (default 2^22, env SHAPVAL_BUDGET)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapval", description="Exact Shapley values and model counts for Boolean queries.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shapley", help="Shapley value of endogenous facts")
    _common(p)
    p.add_argument("--fact", action="append", default=[], help="fact such as 'S(a,b)' (repeatable)")
    p.add_argument("--all", action="store_true", help="every endogenous fact")
    p.add_argument("--method", choices=("subsets", "permutations", "fgmc"), default="subsets")
    p.set_defaults(func=cmd_shapley)

    p = sub.add_parser("max-shapley", help="a fact of maximum Shapley value")
    _common(p)
    p.set_defaults(func=cmd_max_shapley)

    p = sub.add_parser("shapley-const", help="Shapley value of constants")
    _common(p)
    p.add_argument("--constant", action="append", default=[], help="constant name (repeatable)")
    p.add_argument("--all", action="store_true")
    p.add_argument("--endo-consts", help="comma-separated endogenous constants (default: all outside the query)")
    p.add_argument("--method", choices=("subsets", "fgmc"), default="subsets")
    p.set_defaults(func=cmd_shapley_const)

    for name, desc in (("mc", "number of satisfying subsets"), ("gmc", "number of generalized supports"),
                       ("fmc", "satisfying subsets by size"), ("fgmc", "generalized supports by size")):
        p = sub.add_parser(name, help=desc)
        _common(p)
        p.add_argument("--size", "-k", type=int, help="subset size")
        p.add_argument("--vector", action="store_true", help="all sizes 0..n")
        p.add_argument("--constants", action="store_true", help="count subsets of endogenous constants instead of facts")
        p.add_argument("--endo-consts", help="with --constants: comma-separated endogenous constants")
        p.set_defaults(func=cmd_count)

    p = sub.add_parser("pqe", help="query probability")
    _common(p)
    p.add_argument("--p", help="uniform probability p/q for facts without one")
    p.set_defaults(func=cmd_pqe)

    p = sub.add_parser("classify", help="complexity verdict for Shapley values of the query")
    _common(p, db=False)
    p.add_argument("--bound", type=int, help="word-length bound for path queries")
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("reduce", help="size counts computed through Shapley-value oracle calls")
    _common(p)
    p.add_argument("--mode", choices=MODES, default="pseudo_connected")
    p.add_argument("--q-prime", help="leak mode: the query conjoined with q")
    p.add_argument("--s-prime", help="leak mode: a minimal support of q', facts separated by ';'")
    p.add_argument("--endogenous-only", action="store_true", help="add no exogenous facts to the constructed databases")
    p.add_argument("--experimental", action="store_true", help="allow queries with constants where only sketched")
    p.add_argument("--bound", type=int, help="word-length bound for path queries")
    p.add_argument("--trace", action="store_true", help="report every constructed database and oracle answer")
    p.add_argument("--check", action="store_true", help="compare with the direct count")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("verify", help="run the invariant checks on an instance")
    _common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args, Report(stdout))
    except (BudgetExceeded, HypothesisError, NoSupportError, ConstructionError) as exc:
        print(f"shapval: {exc}", file=stderr)
        return EXIT_LIMIT
    except (InputError, QuerySyntaxError, dbformat.DatabaseSyntaxError, OSError, ValueError) as exc:
        print(f"shapval: {exc}", file=stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

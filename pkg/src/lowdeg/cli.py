"""Command-line surface.

Exit codes: 0 ok; 1 query false / tuple absent (test); 2 usage; 3 query
outside the supported fragment; 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import run_bench
from .counting import count_answers
from .enumeration import EnumConfig, build_enumerator
from .errors import LowdegError, ResourceCapExceeded, UnsupportedFragment
from .fixtures import corpus, run_corpus
from .formulas import parse_query
from .generate import DEFAULT_RELATIONS, generate_database, parse_relation_spec, parse_schedule
from .instrument import read
from .model import format_database, gaifman_graph, load_database
from .reduction import dump_reduced, eliminate_quantifiers
from .tester import build_tester


def _add_db_query_flags(sub, query: bool = True):
    sub.add_argument("--db", required=True, help="fact file")
    if query:
        group = sub.add_mutually_exclusive_group(required=True)
        group.add_argument("--query", help="query text")
        group.add_argument("--query-file", help="file containing the query text")
    sub.add_argument("--epsilon", type=float, default=0.5)
    sub.add_argument("--cap-neighborhood", type=int, default=24)
    sub.add_argument("--dump-reduced", metavar="FILE", help="write the reduced graph and mapping")


def _load(args):
    with open(args.db) as fh:
        return load_database(fh)


def _query_text(args) -> str:
    if args.query is not None:
        return args.query
    with open(args.query_file) as fh:
        return fh.read().strip()


def _preprocess(args):
    db = _load(args)
    phi = parse_query(_query_text(args))
    ri = eliminate_quantifiers(
        db, phi, args.epsilon, neighborhood_cap=args.cap_neighborhood
    )
    if args.dump_reduced:
        dump_reduced(ri, args.dump_reduced)
    return db, phi, ri


def cmd_ingest(args) -> int:
    db = _load(args)
    degree = gaifman_graph(db, db.signature.names()).degree()
    print(f"domain {db.n}")
    for name, arity in db.signature.relations:
        print(f"{name}/{arity}: {len(db.tuples[name])} facts")
    print(f"degree {degree}")
    return 0


def cmd_count(args) -> int:
    db, phi, ri = _preprocess(args)
    print(count_answers(db, phi, args.epsilon, ri=ri))
    return 0


def cmd_test(args) -> int:
    db, phi, ri = _preprocess(args)
    if args.tuple.strip():
        abar = tuple(int(p) for p in args.tuple.split(","))
    else:
        abar = ()
    tester = build_tester(db, phi, args.epsilon, ri=ri)
    verdict = tester.test(abar)
    print("true" if verdict else "false")
    return 0 if verdict else 1


def cmd_enumerate(args) -> int:
    db, phi, ri = _preprocess(args)
    prep_steps = read()
    enum = build_enumerator(db, phi, args.epsilon, ri=ri, config=EnumConfig(epsilon=args.epsilon))
    prep_steps = read()
    emitted = 0
    max_delay = 0
    while args.limit is None or emitted < args.limit:
        before = read()
        answer = enum.next()
        delay = read() - before
        if answer is None:
            break
        max_delay = max(max_delay, delay)
        print(" ".join(str(c) for c in answer))
        emitted += 1
    if args.stats:
        stats = {"prep_steps": prep_steps, "max_delay_steps": max_delay, "answers": emitted}
        print(json.dumps(stats))
    return 0


def cmd_gen(args) -> int:
    relations = parse_relation_spec(args.rels) if args.rels else DEFAULT_RELATIONS
    db = generate_database(args.n, parse_schedule(args.schedule), relations, seed=args.seed)
    text = format_database(db)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    db = _load(args)
    report = run_bench(
        db,
        _query_text(args),
        args.epsilon,
        args.mode,
        limit=args.limit,
        samples=args.samples,
        seed=args.seed,
    )
    print(json.dumps(report))
    return 0


def cmd_check(args) -> int:
    cases = corpus()
    if args.quick:
        cases = cases[:: max(1, len(cases) // 40)]
    failures = 0
    for result in run_corpus(cases):
        status = "PASS" if result.ok else "FAIL"
        print(f"{status} {result.name} ({result.detail})")
        if not result.ok:
            failures += 1
    print(f"{len(cases) - failures}/{len(cases)} cases passed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowdeg",
        description="first-order query engine for low-degree databases",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("ingest", help="load a fact file and print statistics")
    sub.add_argument("--db", required=True)
    sub.set_defaults(func=cmd_ingest)

    sub = subs.add_parser("count", help="exact answer count")
    _add_db_query_flags(sub)
    sub.set_defaults(func=cmd_count)

    sub = subs.add_parser("test", help="membership test for one tuple")
    _add_db_query_flags(sub)
    sub.add_argument("--tuple", default="", help="comma-separated components")
    sub.set_defaults(func=cmd_test)

    sub = subs.add_parser("enumerate", help="stream the answers")
    _add_db_query_flags(sub)
    sub.add_argument("--limit", type=int, default=None)
    sub.add_argument("--stats", action="store_true")
    sub.set_defaults(func=cmd_enumerate)

    sub = subs.add_parser("gen", help="generate a random low-degree database")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--schedule", default="const:3", help="const:d | log_pow:c | poly:delta")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--rels", help="NAME:ARITY[:prob],... (default E:2,B:1:0.5,R:1:0.5)")
    sub.add_argument("--out")
    sub.set_defaults(func=cmd_gen)

    sub = subs.add_parser("bench", help="instrumented run, JSON report")
    _add_db_query_flags(sub)
    sub.add_argument("--mode", choices=("count", "test", "enumerate"), required=True)
    sub.add_argument("--limit", type=int, default=20_000)
    sub.add_argument("--samples", type=int, default=50)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=cmd_bench)

    sub = subs.add_parser("check", help="engine vs oracle over the built-in corpus")
    sub.add_argument("--quick", action="store_true")
    sub.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedFragment as exc:
        print(f"unsupported query fragment: {exc}", file=sys.stderr)
        return 3
    except ResourceCapExceeded as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 4
    except LowdegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver.

Exit codes: 0 success, 1 bad input, 2 validation mismatch (or usage error),
3 internal merge conflict.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

from .analysis import rw_report, swap_relation
from .corpus import UnknownFixture, fixture_names, load_fixture
from .equivalence import StateUniverse, oracle_swappable
from .executor import Block, StepConflict, exec_parallel, reorder_greedy_parallel
from .files import LoadError, encode_key, load_genesis, load_transactions, state_to_doc
from .net import build_net, export_net, net_to_doc
from .semantics import ConfigurationError, Genesis, Transaction, exec_chain, initial_state
from .state import ChainState, encode_value
from .workloads import WORKLOADS

EXIT_OK, EXIT_LOAD, EXIT_MISMATCH, EXIT_CONFLICT = 0, 1, 2, 3


@dataclass
class CliConfig:
    genesis: Genesis
    start: ChainState
    transactions: list[Transaction]
    workers: int = 1
    depth: int = 3
    fmt: str = "text"
    reorder: str = "none"
    pool: list[Transaction] = field(default_factory=list)

    @property
    def contracts(self):
        return self.genesis.contracts


def _load(args) -> CliConfig:
    if getattr(args, "workers", 1) < 1:
        raise LoadError("--workers must be at least 1")
    if getattr(args, "depth", 0) < 0:
        raise LoadError("--depth must be non-negative")
    if args.fixture:
        try:
            fx = load_fixture(args.fixture)
        except UnknownFixture as exc:
            raise LoadError(str(exc.args[0])) from None
        genesis, start, txs, pool = fx.genesis, fx.start_state, list(fx.block), fx.pool
    else:
        if not args.genesis:
            raise LoadError("either --fixture or --genesis is required")
        genesis = load_genesis(args.genesis, args.contracts or ())
        txs = load_transactions(args.txs, genesis) if args.txs else []
        for i, t in enumerate(txs):
            try:
                genesis.check_transaction(t)
            except ConfigurationError as exc:
                raise LoadError(f"{args.txs}[{i}]: {exc}") from None
        start, pool = initial_state(genesis), txs
    if getattr(args, "reorder", "none") == "greedy-parallel":
        txs = reorder_greedy_parallel(txs, genesis.contracts)
    return CliConfig(
        genesis, start, txs,
        workers=getattr(args, "workers", 1),
        depth=getattr(args, "depth", 3),
        fmt=args.format,
        reorder=getattr(args, "reorder", "none"),
        pool=pool,
    )


def _emit(cfg_fmt: str, doc, text: str):
    if cfg_fmt == "json":
        print(json.dumps(doc, indent=2))
    else:
        print(text)


def _state_text(sigma: ChainState) -> str:
    lines = []
    for a in sigma.addresses:
        for k, v in sorted(sigma.store(a).items()):
            lines.append(f"{a.name}.{k.encode()} = {encode_value(v)}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = _load(args)
    sigma = exec_chain(cfg.start, cfg.transactions, cfg.contracts)
    doc = {"state": state_to_doc(sigma), "digest": sigma.digest()}
    _emit(cfg.fmt, doc, _state_text(sigma) + f"\ndigest {doc['digest']}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load(args)
    rep = rw_report(cfg.transactions, cfg.contracts)
    lines = []
    for t in rep["transactions"]:
        lines.append(f"T{t['index']}: {t['tx']}")
        for side in ("reads", "writes"):
            s = t[side]
            keys = s["keys"] + [f"{a}.*" for a in s["whole_stores"]]
            if s["all_balances"]:
                keys.append("*.balance")
            lines.append(f"  {side}: {{{', '.join(keys)}}}")
    lines.append("relation: " + " ".join(f"({i},{j})" for i, j in rep["relation"]))
    _emit(cfg.fmt, rep, "\n".join(lines))
    return EXIT_OK


def cmd_net(args) -> int:
    cfg = _load(args)
    net = build_net(cfg.transactions, swap_relation(cfg.transactions, cfg.contracts))
    if cfg.fmt == "json":
        print(json.dumps(net_to_doc(net), indent=2))
    else:
        print(export_net(net, "dot"), end="")
    return EXIT_OK


def _block(cfg: CliConfig) -> Block:
    return Block(cfg.transactions, cfg.genesis, cfg.start)


def cmd_exec_par(args) -> int:
    cfg = _load(args)
    try:
        sigma, report = exec_parallel(
            _block(cfg), workers=cfg.workers, width=args.width, backend=args.backend
        )
    except StepConflict as exc:
        print(f"internal conflict: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    doc = {"state": state_to_doc(sigma), "report": report.to_doc()}
    sched = " ".join("{" + ",".join(f"T{i}" for i in u) + "}" for u in report.schedule)
    _emit(cfg.fmt, doc, _state_text(sigma) + f"\nschedule {sched}\ndigest {report.digest}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    expected = args.digest
    if expected is None:
        expected = exec_chain(cfg.start, cfg.pool if args.against_original else cfg.transactions,
                              cfg.contracts).digest()
    try:
        _, report = exec_parallel(_block(cfg), workers=cfg.workers, backend=args.backend)
    except StepConflict as exc:
        print(f"internal conflict: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    ok = report.digest == expected.lower()
    doc = {"ok": ok, "expected": expected, "actual": report.digest}
    _emit(cfg.fmt, doc, ("ok" if ok else "mismatch") + f"\nexpected {expected}\nactual   {report.digest}")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_oracle(args) -> int:
    cfg = _load(args)
    n = len(cfg.transactions)
    i, j = args.i, args.j
    if i == j:
        print("oracle: the two positions must differ", file=sys.stderr)
        return EXIT_MISMATCH
    if not (1 <= i <= n and 1 <= j <= n):
        raise LoadError(f"positions must be within 1..{n}")
    pool = cfg.pool or cfg.transactions
    universe = StateUniverse.bounded_reachable(cfg.start, pool, cfg.contracts, cfg.depth)
    t, u = cfg.transactions[i - 1], cfg.transactions[j - 1]
    if t == u:
        v_doc = {"pair": [i, j], "verdict": "identical transactions", "universe": len(universe)}
        _emit(cfg.fmt, v_doc, "identical transactions are trivially interchangeable")
        return EXIT_OK
    v = oracle_swappable(t, u, universe, cfg.contracts)
    doc = {
        "pair": [i, j],
        "verdict": "swappable" if v.swappable else "not-swappable",
        "universe": len(universe),
        "witness": state_to_doc(v.witness) if v.witness is not None else None,
        "key": encode_key(v.key) if v.key is not None else None,
    }
    if v.swappable:
        text = f"T{i}, T{j}: swappable on {len(universe)} reachable states (depth {cfg.depth})"
    else:
        text = f"T{i}, T{j}: not swappable; differs at {v.key} from\n" + _state_text(v.witness)
    _emit(cfg.fmt, doc, text)
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip() and int(s) > 0]
    workers = [int(w) for w in args.workers_list.split(",")]
    rows = []
    for n in sizes:
        wl = WORKLOADS[args.workload](n)
        block = Block(wl.transactions, wl.genesis)
        t0 = time.perf_counter()
        serial = exec_chain(block.start_state(), block.transactions, block.contracts)
        serial_s = time.perf_counter() - t0
        for w in workers:
            best = None
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                sigma, rep = exec_parallel(block, workers=w, backend=args.backend)
                dt = time.perf_counter() - t0
                best = dt if best is None else min(best, dt)
            rows.append({
                "workload": wl.name, "n": n, "workers": w, "backend": args.backend,
                "serial_seconds": serial_s, "parallel_seconds": best,
                "exec_seconds": sum(rep.step_seconds), "steps": len(rep.schedule),
                "digest_match": sigma == serial, "digest": rep.digest,
            })
    lines = [f"{'workload':<12}{'n':>6}{'workers':>8}{'steps':>7}{'serial s':>10}{'parallel s':>11}  match"]
    for r in rows:
        lines.append(
            f"{r['workload']:<12}{r['n']:>6}{r['workers']:>8}{r['steps']:>7}"
            f"{r['serial_seconds']:>10.4f}{r['parallel_seconds']:>11.4f}  {r['digest_match']}"
        )
    _emit(args.format, rows, "\n".join(lines) if rows else "(no sizes)")
    return EXIT_OK if all(r["digest_match"] for r in rows) else EXIT_MISMATCH


def cmd_fixtures(args) -> int:
    docs = []
    for name in fixture_names():
        fx = load_fixture(name)
        docs.append({"name": name, "description": fx.description, "transactions": len(fx.block)})
    _emit(args.format, docs, "\n".join(f"{d['name']:<20} {d['description']}" for d in docs))
    return EXIT_OK


def _inputs(p: argparse.ArgumentParser, workers=False, depth=False, reorder=True):
    p.add_argument("--fixture", help="use a bundled fixture instead of input files")
    p.add_argument("--genesis", help="genesis file {balances, contracts}")
    p.add_argument("--contracts", nargs="*", default=[], help="extra contract source files")
    p.add_argument("--txs", help="transaction file (array of records)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    if reorder:
        p.add_argument("--reorder", choices=["none", "greedy-parallel"], default="none")
    if workers:
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--backend", choices=["thread", "process"], default="thread")
    if depth:
        p.add_argument("--depth", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="txnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="serial execution")
    _inputs(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="read/write sets and strong-swap relation")
    _inputs(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("net", help="occurrence net (dot, or json with --format json)")
    _inputs(p)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("exec-par", help="parallel execution via the occurrence net")
    _inputs(p, workers=True)
    p.add_argument("--width", type=int, default=None, help="at most this many transactions per step")
    p.set_defaults(func=cmd_exec_par)

    p = sub.add_parser("validate", help="re-execute and compare the final digest")
    _inputs(p, workers=True)
    p.add_argument("--digest", help="expected digest (default: serial digest of the block)")
    p.add_argument("--against-original", action="store_true",
                   help="with --reorder, compare against the block in its received order")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="brute-force swappability of positions I and J")
    _inputs(p, depth=True, reorder=False)
    p.add_argument("i", type=int)
    p.add_argument("j", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="serial vs parallel timings on synthetic workloads")
    p.add_argument("--workload", choices=sorted(WORKLOADS), default="independent")
    p.add_argument("--sizes", default="0,100,1000")
    p.add_argument("--workers", dest="workers_list", default="1,2,4")
    p.add_argument("--backend", choices=["thread", "process"], default="thread")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixtures", help="list bundled fixtures")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())

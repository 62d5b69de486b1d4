"""Acceptance criteria, one test each, with wall-clock budgets.

Every test records a ``PASS``/``FAIL`` line; pytest prints them in the
terminal summary and ``python3 tests/test_acceptance.py`` prints them
directly.
"""

import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _support import random_pair_case  # noqa: E402
from txnet.analysis import strongly_swappable, swap_relation, tx_rw_sets  # noqa: E402
from txnet.corpus import load_fixture  # noqa: E402
from txnet.equivalence import (  # noqa: E402
    check_safe_read_approx, check_safe_write_approx, index_relation_to_transactions,
    mazurkiewicz_class, oracle_swappable,
)
from txnet.executor import Block, exec_parallel, exec_serial, exec_step, explore_schedules, validate_block  # noqa: E402
from txnet.net import build_net, validate_occurrence_net  # noqa: E402
from txnet.semantics import exec_chain, initial_state  # noqa: E402
from txnet.state import same_value  # noqa: E402
from txnet.workloads import (  # noqa: E402
    all_blocks, mixed_workload, random_deployment, random_transaction, template_family,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []


class CriterionFailed(AssertionError):
    pass


def criterion(number: int, title: str, budget: float):
    """Time the wrapped check, enforce ``budget`` seconds, record one line."""

    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            problems, detail = [], ""
            try:
                detail = fn(problems.append) or ""
            except Exception as exc:  # a crash is a failure, reported as such
                problems.append(f"{type(exc).__name__}: {exc}")
            dt = time.perf_counter() - t0
            if dt > budget:
                problems.append(f"took {dt:.1f}s, budget {budget:.0f}s")
            status = "FAIL" if problems else "PASS"
            line = f"{status} criterion {number:>2}: {title} ({dt:.2f}s)"
            if detail:
                line += f" [{detail}]"
            if problems:
                line += " -- " + "; ".join(problems)
            ACCEPTANCE_LINES.append(line)
            print(line)
            if problems:
                raise CriterionFailed("; ".join(problems))

        run.__name__, run.__doc__ = fn.__name__, fn.__doc__
        run.criterion = number
        return run

    return wrap


@criterion(1, "three-transaction example final state", 1)
def test_c01_example_final_state(fail):
    fx = load_fixture("three-transactions")
    s = exec_chain(initial_state(fx.genesis), fx.block, fx.contracts)
    want = {"cA.x": 1, "A.balance": 0, "B.balance": 1, "cA.balance": 1}
    for k, v in want.items():
        if not same_value(s.get(fx.key(k)), v):
            fail(f"{k} = {s.get(fx.key(k))}, expected {v}")
    # nothing else changes: the state is genesis plus exactly these bindings
    expected = initial_state(fx.genesis).apply({fx.key(k): v for k, v in want.items()})
    if s != expected:
        fail("extra bindings in final state")


@criterion(2, "oracle verdicts on the three-transaction example", 10)
def test_c02_oracle_verdicts(fail):
    fx = load_fixture("three-transactions")
    u = fx.universe(depth=3)
    T0, T1, T2 = fx.block
    out = []
    for name, (t, v), want in [("T0,T2", (T0, T2), True), ("T1,T2", (T1, T2), True),
                               ("T0,T1", (T0, T1), False)]:
        verdict = oracle_swappable(t, v, u, fx.contracts)
        out.append(f"{name}={'S' if verdict else 'NS'}")
        if bool(verdict) != want:
            where = "" if verdict else f" (witness {verdict.witness!r}, key {verdict.key})"
            fail(f"({name}) expected {'Swappable' if want else 'NotSwappable'}{where}")
        if not verdict and not want:
            w = verdict.witness
            x = w.get(fx.key("cA.x"))
            if not (w.balance(fx.address("A")) >= 1 and (x is None or same_value(x, 0))):
                fail(f"({name}) witness lacks A.balance >= 1 and cA.x = 0: {w!r}")
    return f"{len(u)} states; " + " ".join(out)


@criterion(3, "trace class of T0T1T2 under the strong relation", 10)
def test_c03_mazurkiewicz_class(fail):
    fx = load_fixture("three-transactions")
    T0, T1, T2 = fx.block
    rel = swap_relation(fx.block, fx.contracts)
    indep = index_relation_to_transactions(fx.block, rel)
    cls = mazurkiewicz_class(fx.block, indep)
    expected = {(T0, T1, T2), (T0, T2, T1), (T2, T0, T1)}
    names = {T0: "T0", T1: "T1", T2: "T2"}
    got = sorted("".join(names[t] for t in w) for w in cls)
    if cls != expected:
        fail(f"class is {{{', '.join(got)}}}, expected {{T0T1T2, T0T2T1, T2T0T1}}")
    u = fx.universe()
    for w in sorted(expected, key=lambda w: [names[t] for t in w]):
        bad = [s for s in u if exec_chain(s, w, fx.contracts) != exec_chain(s, fx.block, fx.contracts)]
        if bad:
            fail(f"{''.join(names[t] for t in w)} differs from T0T1T2 on {len(bad)}/{len(u)} "
                 f"states, e.g. {bad[0]!r}")
    return "class " + ",".join(got)


@criterion(4, "strong swappability is sound on 1000 random pairs", 300)
def test_c04_soundness(fail):
    strong = unsound = 0
    for seed in range(1000):
        g, t, u, universe = random_pair_case(seed)
        if strongly_swappable(t, u, g.contracts):
            strong += 1
            v = oracle_swappable(t, u, universe, g.contracts)
            if not v:
                unsound += 1
                fail(f"seed {seed}: {t} / {u} refuted at {v.key}")
    return f"{strong} strongly swappable, {unsound} refuted"


@criterion(5, "swappable but not strongly swappable", 10)
def test_c05_strictness(fail):
    fx = load_fixture("swap-not-strong")
    t, u = fx.tx(1), fx.tx(2)
    if not oracle_swappable(t, u, fx.universe(), fx.contracts):
        fail("oracle refutes the pair")
    if strongly_swappable(t, u, fx.contracts):
        fail("pair is reported strongly swappable")


@criterion(6, "constructed nets are occurrence nets; worked-example order places", 60)
def test_c06_occurrence_nets(fail):
    rng = random.Random(6)
    for k in range(1000):
        g = random_deployment(rng)
        n = rng.randint(0, 10)
        b = [random_transaction(rng, g) for _ in range(n)]
        pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        rel = {p for p in pairs if rng.random() < rng.random()}
        v = validate_occurrence_net(build_net(b, rel))
        if not v:
            fail(f"case {k}: {v.violations}")
            break
    for name in ("petri-1", "erc721-block"):
        fx = load_fixture(name)
        net = build_net(fx.block, swap_relation(fx.block, fx.contracts))
        want = [tuple(p) for p in fx.expect["order_places"]]
        if net.order_places != want:
            fail(f"{name}: order places {net.order_places}, expected {want}")


@criterion(7, "every maximal step sequence agrees with serial execution", 600)
def test_c07_exhaustive_schedules(fail):
    g, templates = template_family()
    s0 = initial_state(g)
    blocks = sequences = 0
    for b in all_blocks(templates, 6):
        blocks += 1
        net = build_net(b, swap_relation(b, g.contracts))
        ex = explore_schedules(net, s0, g.contracts)
        sequences += ex.sequences
        serial = exec_chain(s0, b, g.contracts)
        if ex.final_states() != {serial} or not ex.confluent:
            fail(f"block {[t.function for t in b]}: {len(ex.final_states())} final states")
            break
    return f"{blocks} blocks, {sequences} sequences"


@criterion(8, "step semantics on the three-function example", 5)
def test_c08_step_values(fail):
    fx = load_fixture("petri-1")
    s = fx.start_state
    f, h, g = fx.block
    cases = [((f, h), {"cA.y": 1, "cA.z": 1}), ((g, h), {"cA.x": 1, "cA.z": 1}),
             ((f, g), {"cA.y": 1, "cA.x": 1})]
    for step, changes in cases:
        got = exec_step(s, list(step), fx.contracts)
        want = s.apply({fx.key(k): v for k, v in changes.items()})
        if got != want:
            fail(f"{{{', '.join(t.function for t in step)}}} gave {got!r}")
    both = exec_step(s, [f, g], fx.contracts)
    for order in ([f, g], [g, f]):
        if both == exec_chain(s, order, fx.contracts):
            fail(f"{{f, g}} equals serial {''.join(t.function for t in order)}")


@criterion(9, "token block end to end", 30)
def test_c09_erc721(fail):
    fx = load_fixture("erc721-block")
    rel = swap_relation(fx.block, fx.contracts)
    if rel != {(1, 2), (2, 4), (3, 4)}:
        fail(f"relation {sorted(rel)}")
    block = Block(fx.block, fx.genesis, fx.start_state)
    state, report = exec_parallel(block, workers=2)
    if report.schedule != [[1, 2], [3, 4]]:
        fail(f"schedule {report.schedule}")
    if report.digest != exec_serial(block).digest():
        fail("parallel digest differs from serial")
    u = fx.universe()
    for row in fx.expect["rw_include"]:
        t = fx.tx(row["index"])
        rw = tx_rw_sets(t, fx.contracts)
        if not rw.reads.covers_all(fx.keys(row["reads"])) or not rw.writes.covers_all(fx.keys(row["writes"])):
            fail(f"T{row['index']}: computed sets miss reference keys")
        if not check_safe_write_approx(rw.writes, t, u, fx.contracts):
            fail(f"T{row['index']}: write set refuted")
        if not check_safe_read_approx(rw.reads, t, u, fx.contracts):
            fail(f"T{row['index']}: read set refuted")
    return f"{len(u)} universe states"


@criterion(10, "validator detects reordering only when it matters", 10)
def test_c10_validator(fail):
    three = load_fixture("three-transactions")
    T0, T1, T2 = three.block
    miner = exec_chain(three.start_state, three.block, three.contracts).digest()
    swapped = Block([T1, T0, T2], three.genesis, three.start_state)
    if validate_block(swapped, None, miner).ok:
        fail("transposing T0,T1 kept the digest")
    erc = load_fixture("erc721-block")
    t1, t2, t3, t4 = erc.block
    miner = exec_chain(erc.start_state, erc.block, erc.contracts).digest()
    swapped = Block([t1, t2, t4, t3], erc.genesis, erc.start_state)
    if not validate_block(swapped, None, miner).ok:
        fail("transposing T3,T4 changed the digest")


@criterion(11, "digest is deterministic under four workers", 120)
def test_c11_determinism(fail):
    w = mixed_workload(500, seed=11)
    block = Block(w.transactions, w.genesis)
    serial = exec_serial(block).digest()
    digests = {exec_parallel(block, workers=4)[1].digest for _ in range(50)}
    if digests != {serial}:
        fail(f"{len(digests)} distinct digests; serial among them: {serial in digests}")
    return f"{len(digests)} unique digest"


def main() -> int:
    tests = sorted((f for f in globals().values() if hasattr(f, "criterion")), key=lambda f: f.criterion)
    failed = 0
    for t in tests:
        try:
            t()
        except CriterionFailed:
            failed += 1
    print(f"{len(tests) - failed}/{len(tests)} criteria passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

"""Update collectors, step semantics and the parallel block pipeline.

A step is a set of transitions run against one shared snapshot.  Each
transaction's effect is collected as a state update; the updates are merged
with the disjoint union and applied at once.  :func:`exec_parallel` derives
the steps from the strong-swappability net of the block, so the merge never
meets overlapping domains and the result equals serial execution.
"""

from __future__ import annotations

import enum
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass

from .analysis import bernstein_disjoint, swap_relation, tx_rw_sets
from .net import Transition, build_net, greedy_maximal_schedule
from .semantics import Contracts, Genesis, Transaction, exec_chain, initial_state, run_tx
from .state import ChainState, StateUpdate, same_value


class Collector(str, enum.Enum):
    LEAST = "least"
    INSTRUMENTED = "instrumented"


def collect_least(sigma: ChainState, t: Transaction, contracts: Contracts) -> StateUpdate:
    """Exactly the keys whose value ``t`` changes.

    Filtering the interpreter's write buffer gives the same update as diffing
    the states before and after, without scanning untouched stores.
    """
    writes = run_tx(sigma, t, contracts)
    if not writes:
        return StateUpdate()
    return StateUpdate({q: v for q, v in writes.items() if not same_value(v, sigma.get(q))})


def collect_instrumented(sigma: ChainState, t: Transaction, contracts: Contracts) -> StateUpdate:
    """Every key assigned or balance-adjusted during a successful run."""
    writes = run_tx(sigma, t, contracts)
    return StateUpdate(writes or {})


_COLLECTORS = {Collector.LEAST: collect_least, Collector.INSTRUMENTED: collect_instrumented}


def collect(sigma, t, contracts, collector=Collector.LEAST) -> StateUpdate:
    return _COLLECTORS[Collector(collector)](sigma, t, contracts)


class StepConflict(RuntimeError):
    """Two members of a step produced updates with overlapping domains."""

    def __init__(self, pair, keys):
        self.pair = pair
        self.keys = frozenset(keys)
        listed = ", ".join(sorted(str(k) for k in self.keys))
        super().__init__(f"conflicting updates from t{pair[0]} and t{pair[1]} on {listed}")


def _members(u) -> list[tuple[int, Transaction]]:
    out = []
    for k, x in enumerate(u):
        if isinstance(x, Transition):
            out.append((x.index, x.tx))
        elif isinstance(x, Transaction):
            out.append((k + 1, x))
        else:
            out.append(tuple(x))
    return sorted(out, key=lambda m: m[0])


def merge_step(updates: Sequence[tuple[int, StateUpdate]]) -> StateUpdate:
    merged, owner = {}, {}
    for i, pi in updates:
        for q, v in pi.items():
            if q in merged:
                j = owner[q]
                clash = {k for k in pi if k in merged and owner[k] == j}
                raise StepConflict((j, i), clash)
            merged[q] = v
            owner[q] = i
    return StateUpdate(merged)


def _collect_chunk(sigma, chunk, contracts, collector):
    return [(i, collect(sigma, t, contracts, collector)) for i, t in chunk]


def _chunks(items: list, k: int) -> list[list]:
    k = max(1, min(k, len(items)))
    return [items[i::k] for i in range(k)]


def step_update(
    sigma: ChainState,
    u: Iterable,
    contracts: Contracts,
    collector=Collector.LEAST,
    pool: Executor | None = None,
    workers: int = 1,
) -> StateUpdate:
    """Merged update of the step ``u`` collected against ``sigma``.

    Members may be :class:`Transition`, ``(index, tx)`` pairs or bare
    transactions (numbered by position).  With ``pool`` the collection is
    split into ``workers`` chunks run concurrently.
    """
    members = _members(u)
    if pool is None or workers <= 1 or len(members) <= 1:
        updates = _collect_chunk(sigma, members, contracts, collector)
    else:
        futures = [
            pool.submit(_collect_chunk, sigma, chunk, contracts, collector)
            for chunk in _chunks(members, workers)
        ]
        updates = sorted((x for f in futures for x in f.result()), key=lambda m: m[0])
    return merge_step(updates)


def exec_step(sigma, u, contracts, collector=Collector.LEAST, pool=None, workers=1) -> ChainState:
    return sigma.apply(step_update(sigma, u, contracts, collector, pool, workers))


def exec_step_sequence(sigma, steps, contracts, collector=Collector.LEAST, pool=None, workers=1):
    for u in steps:
        sigma = exec_step(sigma, u, contracts, collector, pool, workers)
    return sigma


@dataclass
class Block:
    """Plain ordered transactions plus the deployment they run against."""

    transactions: tuple[Transaction, ...]
    genesis: Genesis
    parent: ChainState | None = None

    def __post_init__(self):
        self.transactions = tuple(self.transactions)

    @property
    def contracts(self) -> Contracts:
        return self.genesis.contracts

    def start_state(self) -> ChainState:
        return initial_state(self.genesis) if self.parent is None else self.parent


@dataclass
class ExecutionReport:
    schedule: list[list[int]]
    step_seconds: list[float]
    update_sizes: list[int]
    digest: str
    conflicts: int = 0
    workers: int = 1
    backend: str = "thread"
    analysis_seconds: float = 0.0
    total_seconds: float = 0.0
    related_pairs: int = 0

    def to_doc(self) -> dict:
        return asdict(self)


def _make_pool(backend: str, workers: int) -> Executor | None:
    if workers <= 1:
        return None
    if backend == "thread":
        return ThreadPoolExecutor(max_workers=workers)
    if backend == "process":
        return ProcessPoolExecutor(max_workers=workers)
    raise ValueError(f"unknown backend {backend!r}")


def exec_parallel(
    block: Block,
    contracts: Contracts | None = None,
    workers: int = 1,
    width: int | None = None,
    backend: str = "thread",
    collector=Collector.LEAST,
) -> tuple[ChainState, ExecutionReport]:
    """Relation, net, greedy schedule, then step-by-step execution."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    contracts = block.contracts if contracts is None else contracts
    t0 = time.perf_counter()
    rel = swap_relation(block.transactions, contracts)
    net = build_net(block.transactions, rel)
    steps = greedy_maximal_schedule(net, width)
    t1 = time.perf_counter()
    sigma = block.start_state()
    durations, sizes = [], []
    pool = _make_pool(backend, workers)
    try:
        for u in steps:
            s = time.perf_counter()
            pi = step_update(sigma, u, contracts, collector, pool, workers)
            sigma = sigma.apply(pi)
            durations.append(time.perf_counter() - s)
            sizes.append(len(pi))
    finally:
        if pool is not None:
            pool.shutdown()
    report = ExecutionReport(
        schedule=[sorted(t.index for t in u) for u in steps],
        step_seconds=durations,
        update_sizes=sizes,
        digest=sigma.digest(),
        workers=workers,
        backend=backend,
        analysis_seconds=t1 - t0,
        total_seconds=time.perf_counter() - t0,
        related_pairs=len(rel),
    )
    return sigma, report


def exec_serial(block: Block, contracts: Contracts | None = None) -> ChainState:
    contracts = block.contracts if contracts is None else contracts
    return exec_chain(block.start_state(), block.transactions, contracts)


@dataclass(frozen=True)
class BlockValidation:
    ok: bool
    expected: str
    actual: str

    def to_doc(self):
        return {"ok": self.ok, "expected": self.expected, "actual": self.actual}


def validate_block(
    block: Block, contracts: Contracts | None, expected_digest: str, workers: int = 1, **kw
) -> BlockValidation:
    """Re-execute ``block`` in parallel and compare digests with the miner's."""
    _, report = exec_parallel(block, contracts, workers, **kw)
    return BlockValidation(report.digest == expected_digest.lower(), expected_digest, report.digest)


def reorder_greedy_parallel(txs: Sequence[Transaction], contracts: Contracts) -> list[Transaction]:
    """Move a maximal pairwise strongly swappable group to the front.

    Scans in received order; a transaction joins the front group when it is
    strongly swappable with every member so far.  The remaining transactions
    keep their received order.  All front members are enabled in the first
    step of the resulting net.
    """
    rw = [tx_rw_sets(t, contracts) for t in txs]
    front, rest = [], []
    for k, t in enumerate(txs):
        if all(t != txs[j] and bernstein_disjoint(rw[k], rw[j]) for j in front):
            front.append(k)
        else:
            rest.append(k)
    return [txs[k] for k in front + rest]


__all__ = [
    "Block", "BlockValidation", "Collector", "ExecutionReport", "StepConflict",
    "collect", "collect_instrumented", "collect_least", "exec_parallel", "exec_serial",
    "exec_step", "exec_step_sequence", "merge_step", "reorder_greedy_parallel",
    "step_update", "validate_block", "Exploration", "explore_schedules",
]


@dataclass
class Exploration:
    """Outcome of running every maximal step firing sequence of a net."""

    finals: dict  # terminal marking -> set of final states
    sequences: int
    nodes: int

    @property
    def confluent(self) -> bool:
        return all(len(states) == 1 for states in self.finals.values())

    def final_states(self) -> set[ChainState]:
        return set().union(*self.finals.values()) if self.finals else set()


def explore_schedules(net, sigma: ChainState, contracts: Contracts, collector=Collector.LEAST) -> Exploration:
    """Execute all maximal step firing sequences of ``net`` from ``sigma``.

    Sequences are explored as paths through (marking, state) pairs; pairs
    reached along several paths are expanded once, yet every path is
    accounted for, so the set of final states is exactly the set produced
    by enumerating sequences one by one.
    """
    from .net import enabled_steps, fire_step

    counts: dict = {}
    finals: dict = {}
    by_index = {t.index: t.tx for t in net.transitions}

    def visit(m, s) -> int:
        node = (m, s)
        if node in counts:
            return counts[node]
        steps = enabled_steps(net, m)
        if not steps:
            finals.setdefault(m, set()).add(s)
            total = 1
        else:
            total = 0
            for u in steps:
                s2 = exec_step(s, [(i, by_index[i]) for i in sorted(u)], contracts, collector)
                total += visit(fire_step(net, m, u), s2)
        counts[node] = total
        return total

    n = visit(net.initial, sigma)
    return Exploration(finals, n, len(counts))

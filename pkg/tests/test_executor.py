import random

import pytest
from hypothesis import given, strategies as st

from txnet.analysis import swap_relation
from txnet.executor import (
    Block, Collector, StepConflict, collect, collect_instrumented, collect_least, exec_parallel,
    exec_serial, exec_step, explore_schedules, merge_step, reorder_greedy_parallel,
    validate_block,
)
from txnet.net import build_net, greedy_maximal_schedule, maximal_step_sequences
from txnet.semantics import exec_chain, exec_tx, initial_state
from txnet.state import StateUpdate, qkey
from txnet.workloads import (
    conflicting_workload, independent_workload, mixed_workload, random_deployment,
    random_transaction,
)


def random_block(seed, n=6):
    rng = random.Random(seed)
    g = random_deployment(rng)
    return Block([random_transaction(rng, g) for _ in range(n)], g)


@given(st.integers(0, 100_000))
def test_collectors_replay(seed):
    b = random_block(seed, 1)
    s, t = b.start_state(), b.transactions[0]
    least = collect_least(s, t, b.contracts)
    inst = collect_instrumented(s, t, b.contracts)
    assert s.apply(least) == s.apply(inst) == exec_tx(s, t, b.contracts)
    assert least.is_sub_update(inst)
    assert collect(s, t, b.contracts, "least") == least


def test_merge_step_conflict(petri):
    x = petri.key("cA.x")
    with pytest.raises(StepConflict) as err:
        merge_step([(1, StateUpdate({x: 1})), (3, StateUpdate({x: 2}))])
    assert err.value.pair == (1, 3) and x in err.value.keys


def test_step_values(petri):
    s = petri.start_state
    f, h, g = petri.block
    k = petri.key

    def only(state, changes):
        return state == s.apply({k(q): v for q, v in changes.items()})

    assert only(exec_step(s, [f, h], petri.contracts), {"cA.y": 1, "cA.z": 1})
    assert only(exec_step(s, [g, h], petri.contracts), {"cA.x": 1, "cA.z": 1})
    both = exec_step(s, [f, g], petri.contracts)
    assert only(both, {"cA.x": 1, "cA.y": 1})
    assert both != exec_chain(s, [f, g], petri.contracts)
    assert both != exec_chain(s, [g, f], petri.contracts)


def test_instrumented_collector_conflicts_where_least_does_not(three):
    # f0 rewrites x := 1 when x is already 1: only the instrumented update mentions x
    T0 = three.tx(1)
    s = exec_tx(three.start_state, T0, three.contracts)
    assert exec_step(s, [(1, T0), (2, T0)], three.contracts) == s
    with pytest.raises(StepConflict):
        exec_step(s, [(1, T0), (2, T0)], three.contracts, Collector.INSTRUMENTED)


@given(st.integers(0, 100_000), st.integers(1, 3))
def test_parallel_equals_serial(seed, workers):
    b = random_block(seed)
    state, report = exec_parallel(b, workers=workers)
    assert state == exec_serial(b)
    assert sorted(i for u in report.schedule for i in u) == list(range(1, 7))


@pytest.mark.parametrize("make,steps", [
    (independent_workload, 1), (conflicting_workload, 40),
])
def test_workload_shapes(make, steps):
    w = make(40)
    b = Block(w.transactions, w.genesis)
    state, report = exec_parallel(b, workers=2)
    assert len(report.schedule) == steps
    assert state == exec_serial(b)


def test_process_backend_and_width():
    w = mixed_workload(60, seed=3)
    b = Block(w.transactions, w.genesis)
    serial = exec_serial(b)
    s1, r1 = exec_parallel(b, workers=2, backend="process")
    s2, r2 = exec_parallel(b, workers=2, width=3)
    assert s1 == s2 == serial
    assert max(len(u) for u in r2.schedule) <= 3
    with pytest.raises(ValueError):
        exec_parallel(b, workers=0)
    with pytest.raises(ValueError):
        exec_parallel(b, workers=2, backend="gpu")


def test_report_fields():
    w = independent_workload(5)
    _, r = exec_parallel(Block(w.transactions, w.genesis))
    doc = r.to_doc()
    assert doc["related_pairs"] == 10 and doc["update_sizes"] == [5]
    assert len(doc["digest"]) == 64


def test_validate_block(erc721):
    b = Block(erc721.block, erc721.genesis, erc721.start_state)
    digest = exec_serial(b).digest()
    assert validate_block(b, None, digest).ok
    assert not validate_block(b, None, "0" * 64).ok


def test_reorder_puts_swappable_group_first(erc721):
    txs = reorder_greedy_parallel(erc721.block, erc721.contracts)
    assert sorted(map(str, txs)) == sorted(map(str, erc721.block))
    rel = swap_relation(txs, erc721.contracts)
    first = greedy_maximal_schedule(build_net(txs, rel))[0]
    assert len(first) >= 2


def test_explore_small_block(petri):
    net = build_net(petri.block, petri.relation)
    ex = explore_schedules(net, petri.start_state, petri.contracts)
    assert ex.confluent
    assert ex.final_states() == {petri.final_state()}
    # memoized path counting agrees with literal enumeration
    assert ex.sequences == len(list(maximal_step_sequences(net))) == 5

#!/usr/bin/env python3
"""Walk through the three-transaction fixture: serial run, oracle, analysis, net."""

from txnet.analysis import swap_relation, tx_rw_sets
from txnet.corpus import load_fixture
from txnet.equivalence import oracle_swappable
from txnet.net import build_net, export_net, greedy_maximal_schedule, step_indices
from txnet.semantics import exec_chain


def main():
    fx = load_fixture("three-transactions")
    print(fx.description)
    for i, t in enumerate(fx.block):
        print(f"  T{i}: {t}")

    final = exec_chain(fx.start_state, fx.block, fx.contracts)
    print("\nserial final state:", final)

    u = fx.universe()
    print(f"\noracle over {len(u)} reachable states:")
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        v = oracle_swappable(fx.block[i], fx.block[j], u, fx.contracts)
        print(f"  T{i}, T{j}: {v.describe()}")

    print("\nstatic read/write sets:")
    for i, t in enumerate(fx.block):
        rw = tx_rw_sets(t, fx.contracts)
        print(f"  T{i}: reads {rw.reads} writes {rw.writes}")

    rel = swap_relation(fx.block, fx.contracts)
    net = build_net(fx.block, rel)
    print("\nstrongly swappable positions:", sorted(rel))
    print("schedule:", step_indices(greedy_maximal_schedule(net)))
    print("\n" + export_net(net, "dot"))


if __name__ == "__main__":
    main()

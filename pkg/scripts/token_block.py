#!/usr/bin/env python3
"""Miner and validator on the token block: analysis, parallel run, transposition."""

from txnet.analysis import rw_report
from txnet.corpus import load_fixture
from txnet.executor import Block, exec_parallel, exec_serial, validate_block


def main():
    fx = load_fixture("erc721-block")
    block = Block(fx.block, fx.genesis, fx.start_state)
    rep = rw_report(fx.block, fx.contracts)
    for row in rep["transactions"]:
        print(f"T{row['index']}: {row['tx']}")
        print(f"   reads  {row['reads']['keys']}")
        print(f"   writes {row['writes']['keys']}")
    print("relation:", rep["relation"])

    miner = exec_serial(block).digest()
    state, report = exec_parallel(block, workers=2)
    print("\nschedule:", report.schedule)
    print("miner digest:    ", miner)
    print("validator digest:", report.digest)

    t1, t2, t3, t4 = fx.block
    for label, order in [("T3/T4 swapped", [t1, t2, t4, t3]), ("T1/T3 swapped", [t3, t2, t1, t4])]:
        v = validate_block(Block(order, fx.genesis, fx.start_state), None, miner)
        print(f"{label}: {'ok' if v.ok else 'mismatch'}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Serial against parallel timings on the synthetic workloads.

Thin wrapper over ``txnet bench`` that sweeps every workload.
"""

import argparse

from txnet.cli import main as cli_main
from txnet.workloads import WORKLOADS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="100,1000")
    ap.add_argument("--workers", default="1,2,4")
    ap.add_argument("--backend", choices=["thread", "process"], default="thread")
    args = ap.parse_args()
    for name in sorted(WORKLOADS):
        cli_main(["bench", "--workload", name, "--sizes", args.sizes,
                  "--workers", args.workers, "--backend", args.backend, "--repeat", "1"])
        print()


if __name__ == "__main__":
    main()

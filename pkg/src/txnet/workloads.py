"""Synthetic blocks for benchmarks and randomized checks.

All generators take an explicit seed or ``random.Random`` so every block is
reproducible.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .files import build_genesis
from .semantics import Genesis, Transaction

BANK = """
contract Bank {
  fun bump(k) { cnt[k] := cnt[k] + 1 }
  fun move(a, b) {
    require(cnt[a] > 0);
    cnt[a] := cnt[a] - 1;
    cnt[b] := cnt[b] + 1
  }
  fun pay(to) { send(value, to) }
}
"""


@dataclass
class Workload:
    name: str
    genesis: Genesis
    transactions: list[Transaction]

    @property
    def contracts(self):
        return self.genesis.contracts


def _bank(n_users: int, funds: int = 10) -> Genesis:
    balances = {f"U{i}": funds for i in range(n_users)}
    balances["Bank"] = 0
    return build_genesis(balances, [("Bank", BANK)])


def independent_workload(n: int) -> Workload:
    """``n`` transactions with pairwise disjoint keys: one step."""
    g = _bank(max(n, 1))
    bank = g.address("Bank")
    txs = [Transaction(g.address(f"U{i}"), bank, "bump", 0, (i,)) for i in range(n)]
    return Workload("independent", g, txs)


def conflicting_workload(n: int) -> Workload:
    """Every transaction bumps the same counter: ``n`` singleton steps."""
    g = _bank(max(n, 1))
    bank = g.address("Bank")
    txs = [Transaction(g.address(f"U{i}"), bank, "bump", 0, (0,)) for i in range(n)]
    return Workload("conflicting", g, txs)


def mixed_workload(n: int, seed: int = 0, users: int = 64, slots: int = 256) -> Workload:
    """Counter bumps, counter moves and native payments over shared keys."""
    rng = random.Random(seed)
    g = _bank(users)
    bank = g.address("Bank")
    people = [g.address(f"U{i}") for i in range(users)]
    txs = []
    for _ in range(n):
        s = rng.choice(people)
        r = rng.random()
        if r < 0.5:
            txs.append(Transaction(s, bank, "bump", 0, (rng.randrange(slots),)))
        elif r < 0.8:
            a, b = rng.sample(range(slots), 2)
            txs.append(Transaction(s, bank, "move", 0, (a, b)))
        else:
            txs.append(Transaction(s, bank, "pay", rng.randint(0, 2), (rng.choice(people),)))
    return Workload("mixed", g, txs)


WORKLOADS = {
    "independent": independent_workload,
    "conflicting": conflicting_workload,
    "mixed": mixed_workload,
}


# -- random small contracts ------------------------------------------------------

_ARGS = ("0", "1", "@A", "@B")


def _key(rng: random.Random, dynamic: bool = True) -> str:
    r = rng.random()
    if r < 0.3:
        return "x"
    if r < 0.55:
        return "y"
    if dynamic and r < 0.65:
        return "m[x]"
    return "m[" + rng.choice(["p", "0", "1", "sender"]) + "]"


def _expr(rng: random.Random) -> str:
    r = rng.random()
    if r < 0.25:
        return str(rng.randint(0, 2))
    if r < 0.4:
        return "p"
    if r < 0.5:
        return "value"
    if r < 0.75:
        return _key(rng)
    return f"{_key(rng)} + 1"


def _cond(rng: random.Random) -> str:
    r = rng.random()
    if r < 0.4:
        return f"{_key(rng)} == {rng.randint(0, 1)}"
    if r < 0.6:
        return f"{_key(rng)} < p"
    if r < 0.8:
        return "sender == @" + rng.choice("AB")
    return f"balance > {rng.randint(0, 2)}"


def _stmt(rng: random.Random, depth: int) -> str:
    r = rng.random()
    if depth > 0 and r < 0.25:
        alt = f" else {_stmt(rng, depth - 1)}" if rng.random() < 0.5 else ""
        return f"if {_cond(rng)} then {_stmt(rng, depth - 1)}{alt}"
    if r < 0.6:
        return f"{_key(rng)} := {_expr(rng)}"
    if r < 0.8:
        amount = rng.choice(["0", "1", "value"])
        to = rng.choice(["@A", "@B", "p"])
        return f"send({amount}, {to})"
    if r < 0.92:
        return f"require({_cond(rng)})"
    return rng.choice(["skip", "throw"])


def random_contract_source(rng: random.Random, name: str, functions: int = 3) -> str:
    funs = []
    for k in range(functions):
        body = "; ".join(_stmt(rng, 2) for _ in range(rng.randint(1, 3)))
        funs.append(f"  fun f{k}(p) {{ {body} }}")
    return f"contract {name} {{\n" + "\n".join(funs) + "\n}\n"


def random_deployment(rng: random.Random, contracts: int = 2) -> Genesis:
    names = [f"C{i}" for i in range(contracts)]
    sources = [(n, random_contract_source(rng, n)) for n in names]
    balances = {"A": 2, "B": 2}
    balances.update({n: rng.randint(0, 1) for n in names})
    return build_genesis(balances, sources)


def random_transaction(rng: random.Random, g: Genesis) -> Transaction:
    contracts = sorted(g.contracts, key=lambda a: a.name)
    callee = rng.choice(contracts)
    fun = rng.choice(sorted(g.contracts[callee].functions))
    arg = rng.choice(_ARGS)
    arg = g.address(arg[1:]) if arg.startswith("@") else int(arg)
    return Transaction(g.address(rng.choice("AB")), callee, fun, rng.randint(0, 1), (arg,))


# -- template family for exhaustive schedule checks ----------------------------

FAMILY_C = """
contract C {
  fun setx() { x := 1 }
  fun incy() { if x == 0 then y := y + 1 else throw }
}
"""

FAMILY_D = """
contract D {
  fun incz() { z := z + 1 }
  fun pay() { if z > 1 then send(1, @A) }
  fun sety() { y := 3 }
}
"""


def template_family() -> tuple[Genesis, list[Transaction]]:
    """Two contracts, keys x/y/z, five transaction templates."""
    g = build_genesis({"A": 3, "B": 3, "C": 0, "D": 0}, [("C", FAMILY_C), ("D", FAMILY_D)])
    A, B, C, D = (g.address(n) for n in "ABCD")
    templates = [
        Transaction(A, C, "setx"),
        Transaction(A, C, "incy"),
        Transaction(B, D, "incz"),
        Transaction(B, D, "pay", 1),
        Transaction(A, D, "sety"),
    ]
    return g, templates


def all_blocks(templates, max_len: int):
    for n in range(1, max_len + 1):
        yield from itertools.product(templates, repeat=n)

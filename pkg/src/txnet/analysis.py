"""Static over-approximation of the keys a transaction reads and writes.

Analysis runs in two phases.  :func:`analyze_function` walks a function body
once and records key *templates* whose indices may mention parameters,
``sender`` or ``value``.  :func:`tx_rw_sets` instantiates the templates with
a transaction's concrete arguments.  Indices computed from anything else
(lookups, arithmetic) cannot be resolved statically and widen to the whole
store of the contract; a send to a computed recipient widens to every
balance.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

from .lang import (
    Assign,
    BinOp,
    Contract,
    Expr,
    If,
    KeyExpr,
    Lit,
    Lookup,
    MsgValue,
    Neg,
    Not,
    Param,
    Send,
    Sender,
    Seq,
    Skip,
    Stmt,
    Throw,
    account_contract,
)
from .semantics import Contracts, Transaction
from .state import BALANCE, Address, CompositeKey, QualifiedKey, balance_key


@dataclass(frozen=True)
class KeyApprox:
    """A set of qualified keys: an exact part plus optional widened parts.

    ``contracts`` lists addresses whose whole store is included;
    ``all_balances`` includes the native balance of every address.
    """

    exact: frozenset = frozenset()
    contracts: frozenset = frozenset()
    all_balances: bool = False

    @property
    def is_exact(self) -> bool:
        return not self.contracts and not self.all_balances

    def covers(self, q: QualifiedKey) -> bool:
        if q in self.exact or q.address in self.contracts:
            return True
        return self.all_balances and q.key.base == BALANCE and not q.key.indices

    __contains__ = covers

    def covers_all(self, keys: Iterable[QualifiedKey]) -> bool:
        return all(self.covers(q) for q in keys)

    def intersects(self, other: KeyApprox) -> bool:
        if self.exact & other.exact:
            return True
        if self.contracts & other.contracts:
            return True
        if any(other.covers(q) for q in self.exact) or any(self.covers(q) for q in other.exact):
            return True
        if self.all_balances and (other.all_balances or other.contracts):
            return True
        return other.all_balances and bool(self.contracts)

    def __or__(self, other: KeyApprox) -> KeyApprox:
        return KeyApprox(
            self.exact | other.exact,
            self.contracts | other.contracts,
            self.all_balances or other.all_balances,
        )

    def __le__(self, other: KeyApprox) -> bool:
        """Inclusion: every key of ``self`` is a key of ``other``."""
        if self.all_balances and not other.all_balances:
            return False
        if not self.contracts <= other.contracts:
            return False
        return other.covers_all(self.exact)

    def __str__(self):
        parts = sorted(q.encode() for q in self.exact)
        parts += [f"{a}.*" for a in sorted(self.contracts)]
        if self.all_balances:
            parts.append("*.balance")
        return "{" + ", ".join(parts) + "}"


EMPTY = KeyApprox()


def exact(keys: Iterable[QualifiedKey]) -> KeyApprox:
    return KeyApprox(frozenset(keys))


def top_contract(a: Address) -> KeyApprox:
    return KeyApprox(contracts=frozenset({a}))


@dataclass(frozen=True)
class RWSets:
    reads: KeyApprox = EMPTY
    writes: KeyApprox = EMPTY

    @property
    def touched(self) -> KeyApprox:
        return self.reads | self.writes


# -- phase one: per-function templates ----------------------------------------

SELF = None


@dataclass(frozen=True)
class KeyTemplate:
    """Key of the callee's store, or the balance of ``owner`` when set.

    ``static`` is false when some index needs run-time values; for balance
    templates it means the owner address itself is computed.
    """

    base: str
    indices: tuple = ()
    owner: Expr | None = SELF
    static: bool = True


@dataclass(frozen=True)
class SymbolicRW:
    function: str
    params: tuple[str, ...]
    reads: frozenset = field(default_factory=frozenset)
    writes: frozenset = field(default_factory=frozenset)


class UnknownFunction(LookupError):
    pass


def _static_expr(e: Expr) -> bool:
    return isinstance(e, (Lit, Param, Sender, MsgValue))


def _template(k: KeyExpr) -> KeyTemplate:
    static = all(_static_expr(i) for i in k.indices)
    return KeyTemplate(k.base, k.indices if static else (), SELF, static)


class _Walker:
    def __init__(self):
        self.reads: set[KeyTemplate] = set()
        self.writes: set[KeyTemplate] = set()

    def expr(self, e: Expr):
        if isinstance(e, Lookup):
            self.reads.add(_template(e.key))
            for i in e.key.indices:
                self.expr(i)
        elif isinstance(e, BinOp):
            self.expr(e.left)
            self.expr(e.right)
        elif isinstance(e, (Not, Neg)):
            self.expr(e.operand)

    def stmt(self, s: Stmt):
        if isinstance(s, Seq):
            self.stmt(s.first)
            self.stmt(s.second)
        elif isinstance(s, Assign):
            self.writes.add(_template(s.key))
            for i in s.key.indices:
                self.expr(i)
            self.expr(s.expr)
        elif isinstance(s, If):
            self.expr(s.cond)
            self.stmt(s.then)
            self.stmt(s.orelse)
        elif isinstance(s, Send):
            self.expr(s.amount)
            self.expr(s.recipient)
            own = KeyTemplate(BALANCE)
            self.reads.add(own)
            self.writes.add(own)
            self.writes.add(KeyTemplate(BALANCE, (), s.recipient, _static_expr(s.recipient)))
        elif isinstance(s, (Skip, Throw)):
            pass
        else:
            raise TypeError(s)


@lru_cache(maxsize=None)
def analyze_function(c: Contract, f: str) -> SymbolicRW:
    fun = c.function(f)
    if fun is None:
        raise UnknownFunction(f"{c.name} has no function {f!r}")
    w = _Walker()
    w.stmt(fun.body)
    return SymbolicRW(f, fun.params, frozenset(w.reads), frozenset(w.writes))


# -- phase two: instantiation -------------------------------------------------

class _Unresolved(Exception):
    pass


def _resolve(e: Expr, env: dict):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Param):
        return env[e.name]
    if isinstance(e, Sender):
        return env["sender"]
    if isinstance(e, MsgValue):
        return env["value"]
    raise _Unresolved


def _instantiate(templates, env, callee: Address):
    keys, contracts, all_balances = set(), set(), False
    for t in templates:
        if t.owner is SELF and t.base == BALANCE and not t.indices and t.static:
            keys.add(balance_key(callee))
        elif t.owner is not SELF:
            if not t.static:
                all_balances = True
                continue
            owner = _resolve(t.owner, env)
            # a non-address recipient makes the send (and the call) fail
            if isinstance(owner, Address):
                keys.add(balance_key(owner))
        elif not t.static:
            contracts.add(callee)
        else:
            idx = tuple(_resolve(i, env) for i in t.indices)
            keys.add(QualifiedKey(callee, CompositeKey(t.base, idx)))
    return KeyApprox(frozenset(keys), frozenset(contracts), all_balances)


def _contract_of(t: Transaction, contracts: Contracts) -> Contract | None:
    c = contracts.get(t.callee)
    if c is None and not t.callee.is_contract:
        c = account_contract(t.callee)
    return c


def tx_rw_sets(t: Transaction, contracts: Contracts) -> RWSets:
    c = _contract_of(t, contracts)
    try:
        if c is None:
            raise UnknownFunction(t.function)
        sym = analyze_function(c, t.function)
    except UnknownFunction:
        top = top_contract(t.callee)
        return RWSets(top, top)
    if len(sym.params) != len(t.args):
        top = top_contract(t.callee)
        return RWSets(top, top)
    env = dict(zip(sym.params, t.args))
    env["sender"] = t.sender
    env["value"] = t.value
    reads = _instantiate(sym.reads, env, t.callee)
    writes = _instantiate(sym.writes, env, t.callee)
    if t.value > 0:
        reads = reads | exact({balance_key(t.sender)})
        writes = writes | exact({balance_key(t.sender), balance_key(t.callee)})
    return RWSets(reads, writes)


def bernstein_disjoint(a: RWSets, b: RWSets) -> bool:
    """Neither side writes a key the other reads or writes."""
    return not a.touched.intersects(b.writes) and not b.touched.intersects(a.writes)


def strongly_swappable(t: Transaction, u: Transaction, contracts: Contracts) -> bool:
    if t == u:
        raise ValueError("strong swappability relates distinct transactions only")
    return bernstein_disjoint(tx_rw_sets(t, contracts), tx_rw_sets(u, contracts))


def swap_relation(b: Sequence[Transaction], contracts: Contracts, rw=None) -> frozenset:
    """All position pairs ``(i, j)``, ``1 <= i < j <= n``, that are strongly swappable.

    Identical transactions are never related.  ``rw`` may supply
    precomputed :class:`RWSets` per position.
    """
    txs = list(b)
    n = len(txs)
    if rw is None:
        rw = [tx_rw_sets(t, contracts) for t in txs]
    conflicts = conflict_pairs(rw)
    positions = defaultdict(list)
    for i, t in enumerate(txs, start=1):
        positions[t].append(i)
    for ps in positions.values():
        conflicts.update(itertools.combinations(ps, 2))
    return frozenset(itertools.combinations(range(1, n + 1), 2)) - conflicts


def conflict_pairs(rw: Sequence[RWSets]) -> set[tuple[int, int]]:
    """Position pairs (1-based, ``i < j``) violating the disjointness check.

    Exact sets go through an inverted key index; widened sets are compared
    pairwise with everything.
    """
    n = len(rw)
    writers = defaultdict(list)
    touchers = defaultdict(list)
    widened = []
    for i, s in enumerate(rw):
        if not (s.reads.is_exact and s.writes.is_exact):
            widened.append(i)
            continue
        for q in s.writes.exact:
            writers[q].append(i)
        for q in s.touched.exact:
            touchers[q].append(i)
    out = set()
    for q, ws in writers.items():
        for i in ws:
            for j in touchers[q]:
                if i != j:
                    out.add((min(i, j) + 1, max(i, j) + 1))
    for i in widened:
        for j in range(n):
            if i != j and not bernstein_disjoint(rw[i], rw[j]):
                out.add((min(i, j) + 1, max(i, j) + 1))
    return out


def rw_report(b: Sequence[Transaction], contracts: Contracts) -> dict:
    rw = [tx_rw_sets(t, contracts) for t in b]
    rel = swap_relation(b, contracts, rw)

    def enc(k: KeyApprox):
        return {
            "keys": sorted(q.encode() for q in k.exact),
            "whole_stores": sorted(a.name for a in k.contracts),
            "all_balances": k.all_balances,
        }

    return {
        "transactions": [
            {"index": i, "tx": str(t), "reads": enc(s.reads), "writes": enc(s.writes)}
            for i, (t, s) in enumerate(zip(b, rw), start=1)
        ],
        "relation": [list(p) for p in sorted(rel)],
    }

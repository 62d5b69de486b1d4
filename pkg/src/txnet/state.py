"""Values, addresses, qualified keys, chain states and state updates.

A chain state maps every declared address to a key-value store.  Values are
Python ``int``, ``bool`` or :class:`Address`.  Because ``True == 1`` in
Python, every comparison of stored values goes through :func:`same_value`,
which also compares the value's type.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

ACCOUNT = "account"
CONTRACT = "contract"
BALANCE = "balance"


@dataclass(frozen=True, order=True)
class Address:
    """An account or contract address.

    Names are unique within a deployment, so equality and ordering use the
    name only; ``kind`` is carried along as metadata.
    """

    name: str
    kind: str = field(default=ACCOUNT, compare=False)

    def __post_init__(self):
        if self.kind not in (ACCOUNT, CONTRACT):
            raise ValueError(f"unknown address kind {self.kind!r}")

    @property
    def is_contract(self) -> bool:
        return self.kind == CONTRACT

    def __str__(self) -> str:
        return self.name


Value = Union[int, bool, Address]


def check_value(v) -> Value:
    if isinstance(v, (bool, int, Address)):
        return v
    raise TypeError(f"not a value: {v!r}")


def value_tag(v):
    """Hashable, type-distinguishing form of a value (``None`` for unbound)."""
    if v is None:
        return None
    if isinstance(v, bool):
        return ("b", v)
    if isinstance(v, int):
        return ("i", v)
    if isinstance(v, Address):
        return ("a", v.name)
    raise TypeError(f"not a value: {v!r}")


def same_value(a, b) -> bool:
    return type(a) is type(b) and a == b


def encode_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Address):
        return "@" + v.name
    raise TypeError(f"not a value: {v!r}")


class CompositeKey:
    """Store key: a base name plus an ordered tuple of value indices.

    ``CompositeKey("balance")`` is the native balance; ``owner[1]`` is
    ``CompositeKey("owner", (1,))``.
    """

    __slots__ = ("base", "indices", "_tag", "_hash")

    def __init__(self, base: str, indices: Iterable[Value] = ()):
        self.base = base
        self.indices = tuple(check_value(v) for v in indices)
        self._tag = (base, tuple(value_tag(v) for v in self.indices))
        self._hash = hash(self._tag)

    def __eq__(self, other):
        if not isinstance(other, CompositeKey):
            return NotImplemented
        return self._tag == other._tag

    def __hash__(self):
        return self._hash

    def __lt__(self, other: CompositeKey):
        return self.sort_key() < other.sort_key()

    def sort_key(self):
        return (self.base, tuple(_sortable(t) for t in self._tag[1]))

    def __reduce__(self):
        return (CompositeKey, (self.base, self.indices))

    def __repr__(self):
        return f"CompositeKey({self.encode()!r})"

    def encode(self) -> str:
        return self.base + "".join(f"[{encode_value(v)}]" for v in self.indices)

    __str__ = encode


def _sortable(tag):
    kind, payload = tag
    return (kind, str(payload) if kind == "a" else int(payload))


BALANCE_KEY = CompositeKey(BALANCE)


@dataclass(frozen=True, order=True)
class QualifiedKey:
    address: Address
    key: CompositeKey

    def encode(self) -> str:
        return f"{self.address.name}.{self.key.encode()}"

    def __str__(self):
        return self.encode()


def qkey(address: Address, base: str, *indices: Value) -> QualifiedKey:
    return QualifiedKey(address, CompositeKey(base, indices))


def balance_key(address: Address) -> QualifiedKey:
    return QualifiedKey(address, BALANCE_KEY)


class StateUpdate(Mapping):
    """Finite partial map from qualified keys to values (immutable)."""

    __slots__ = ("_bindings",)

    def __init__(self, bindings: Mapping[QualifiedKey, Value] | Iterable = ()):
        self._bindings = dict(bindings)
        for v in self._bindings.values():
            check_value(v)

    def __getitem__(self, q: QualifiedKey) -> Value:
        return self._bindings[q]

    def __iter__(self) -> Iterator[QualifiedKey]:
        return iter(self._bindings)

    def __len__(self) -> int:
        return len(self._bindings)

    def __eq__(self, other):
        if not isinstance(other, StateUpdate):
            return NotImplemented
        return self.keys() == other.keys() and all(
            same_value(v, other[q]) for q, v in self._bindings.items()
        )

    def __hash__(self):
        return hash(frozenset((q, value_tag(v)) for q, v in self._bindings.items()))

    def key_set(self) -> frozenset[QualifiedKey]:
        return frozenset(self._bindings)

    def is_sub_update(self, other: StateUpdate) -> bool:
        """Set inclusion when updates are read as sets of bindings."""
        return all(q in other and same_value(v, other[q]) for q, v in self.items())

    def __repr__(self):
        inner = ", ".join(f"{q}↦{encode_value(v)}" for q, v in sorted(self.items()))
        return "{" + inner + "}"


EMPTY_UPDATE = StateUpdate()


class MergeConflict(Exception):
    """Raised when two merged updates bind a common qualified key."""

    def __init__(self, keys, origin=None):
        self.keys = frozenset(keys)
        self.origin = origin
        listed = ", ".join(sorted(str(k) for k in self.keys))
        super().__init__(f"overlapping update domains: {listed}")


class BalanceUnderflow(ValueError):
    pass


class ChainState:
    """Immutable blockchain state: address -> (key -> value).

    Every address has ``balance`` bound.  Lookups of unbound keys return
    ``None``.
    """

    __slots__ = ("_stores", "_hash")

    def __init__(self, stores: Mapping[Address, Mapping[CompositeKey, Value]]):
        built = {}
        for addr, store in stores.items():
            store = dict(store)
            bal = store.get(BALANCE_KEY)
            if type(bal) is not int or bal < 0:
                raise ValueError(f"{addr}: balance must be a non-negative integer")
            if not addr.is_contract and set(store) != {BALANCE_KEY}:
                raise ValueError(f"account {addr} may only bind balance")
            for v in store.values():
                check_value(v)
            built[addr] = store
        self._stores = built
        self._hash = None

    @classmethod
    def _trusted(cls, stores: dict) -> ChainState:
        obj = cls.__new__(cls)
        obj._stores = stores
        obj._hash = None
        return obj

    @classmethod
    def from_balances(cls, balances: Mapping[Address, int]) -> ChainState:
        return cls({a: {BALANCE_KEY: b} for a, b in balances.items()})

    @property
    def addresses(self) -> tuple[Address, ...]:
        return tuple(sorted(self._stores))

    def address(self, name: str) -> Address:
        for a in self._stores:
            if a.name == name:
                return a
        raise KeyError(name)

    def __contains__(self, a: Address) -> bool:
        return a in self._stores

    def store(self, a: Address) -> Mapping[CompositeKey, Value]:
        return dict(self._stores[a])

    def get(self, q: QualifiedKey):
        store = self._stores.get(q.address)
        if store is None:
            return None
        return store.get(q.key)

    __getitem__ = get

    def balance(self, a: Address) -> int:
        return self._stores[a][BALANCE_KEY]

    def bound_keys(self) -> Iterator[QualifiedKey]:
        for a, store in self._stores.items():
            for k in store:
                yield QualifiedKey(a, k)

    def items(self) -> Iterator[tuple[QualifiedKey, Value]]:
        for a, store in self._stores.items():
            for k, v in store.items():
                yield QualifiedKey(a, k), v

    def apply(self, pi: Mapping[QualifiedKey, Value]) -> ChainState:
        if not pi:
            return self
        stores = dict(self._stores)
        copied = set()
        for q, v in pi.items():
            a = q.address
            if a not in copied:
                if a not in stores:
                    raise KeyError(f"unknown address {a}")
                stores[a] = dict(stores[a])
                copied.add(a)
            stores[a][q.key] = v
        for a in copied:
            bal = stores[a].get(BALANCE_KEY)
            if type(bal) is not int or bal < 0:
                raise ValueError(f"{a}: balance must stay a non-negative integer")
            if not a.is_contract and len(stores[a]) != 1:
                raise ValueError(f"account {a} may only bind balance")
        return ChainState._trusted(stores)

    def adjust_balance(self, a: Address, delta: int) -> ChainState:
        new = self.balance(a) + delta
        if new < 0:
            raise BalanceUnderflow(f"{a}.balance would become {new}")
        if delta == 0:
            return self
        return self.apply({balance_key(a): new})

    def total_balance(self) -> int:
        return sum(s[BALANCE_KEY] for s in self._stores.values())

    def _canonical(self):
        return tuple(
            (a.name, tuple(sorted((k.sort_key(), value_tag(v)) for k, v in s.items())))
            for a, s in sorted(self._stores.items())
        )

    def __eq__(self, other):
        if not isinstance(other, ChainState):
            return NotImplemented
        if self._stores.keys() != other._stores.keys():
            return False
        for a, s in self._stores.items():
            o = other._stores[a]
            if s.keys() != o.keys():
                return False
            if not all(same_value(v, o[k]) for k, v in s.items()):
                return False
        return True

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._canonical())
        return self._hash

    def __reduce__(self):
        return (ChainState._trusted, (self._stores,))

    def __repr__(self):
        parts = []
        for a in self.addresses:
            inner = ", ".join(
                f"{k}={encode_value(v)}" for k, v in sorted(self._stores[a].items())
            )
            parts.append(f"{a}: {{{inner}}}")
        return "ChainState(" + "; ".join(parts) + ")"

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in self.addresses:
            h.update(b"A" + a.name.encode() + b"\0")
            for k, v in sorted(self._stores[a].items()):
                h.update(k.encode().encode() + b"=" + encode_value(v).encode() + b"\0")
        return h.hexdigest()


def apply_update(sigma: ChainState, pi: Mapping[QualifiedKey, Value]) -> ChainState:
    return sigma.apply(pi)


def adjust_balance(sigma: ChainState, a: Address, delta: int) -> ChainState:
    return sigma.adjust_balance(a, delta)


def merge_updates(*updates: Mapping[QualifiedKey, Value]) -> StateUpdate:
    """Union of updates with pairwise-disjoint domains.

    Raises :class:`MergeConflict` on any overlap.
    """
    merged = {}
    for pi in updates:
        clash = merged.keys() & pi.keys()
        if clash:
            raise MergeConflict(clash)
        merged.update(pi)
    return StateUpdate(merged)


def state_diff(after: ChainState, before: ChainState) -> StateUpdate:
    """Least update turning ``before`` into ``after``."""
    diff = {}
    for a in after.addresses:
        new = after._stores[a]
        old = before._stores.get(a, {})
        for k, v in new.items():
            if not same_value(v, old.get(k)):
                diff[QualifiedKey(a, k)] = v
        missing = old.keys() - new.keys()
        if missing:
            # states never unbind keys; a diff cannot express removal
            raise ValueError(f"{a}: keys unbound in later state: {sorted(missing)}")
    return StateUpdate(diff)


def state_digest(sigma: ChainState) -> str:
    return sigma.digest()

"""Observational equivalence and brute-force oracles over finite state universes.

Every definition here quantifies over a :class:`StateUniverse` instead of
all reachable states, so a positive verdict only holds on that universe
while a refutation carries a concrete witness and is sound for good.
"""

from __future__ import annotations

import itertools
from collections import deque
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .semantics import Contracts, Transaction, exec_chain, exec_tx
from .state import ChainState, QualifiedKey, Value, same_value, state_diff


class _AllKeys:
    """The set of every qualified key."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __contains__(self, q):
        return isinstance(q, QualifiedKey)

    def __repr__(self):
        return "ALL_KEYS"

    def __reduce__(self):
        return (_AllKeys, ())


ALL_KEYS = _AllKeys()


def key_set(keys) -> frozenset | _AllKeys:
    """Normalize ``keys`` into a set usable by :func:`equiv_on`.

    Accepts ``ALL_KEYS``, any iterable of qualified keys, or any object with a
    ``covers`` predicate (such as an analysis ``KeyApprox``).
    """
    if keys is ALL_KEYS or hasattr(keys, "covers"):
        return keys
    return frozenset(keys)


def _member(keys) -> Callable[[QualifiedKey], bool]:
    if hasattr(keys, "covers"):
        return keys.covers
    return keys.__contains__


def _is_finite(keys) -> bool:
    if isinstance(keys, frozenset):
        return True
    return bool(getattr(keys, "is_exact", False))


def _finite_keys(keys) -> Iterable[QualifiedKey]:
    return keys if isinstance(keys, frozenset) else keys.exact


def differing_keys(s: ChainState, t: ChainState, within=ALL_KEYS) -> list[QualifiedKey]:
    """Keys of ``within`` where ``s`` and ``t`` disagree (unbound counts as a value)."""
    within = key_set(within)
    if _is_finite(within):
        candidates = set(_finite_keys(within))
    else:
        member = _member(within)
        candidates = {q for q in itertools.chain(s.bound_keys(), t.bound_keys()) if member(q)}
    return sorted(q for q in candidates if not same_value(s.get(q), t.get(q)))


def equiv_on(s: ChainState, t: ChainState, q=ALL_KEYS) -> bool:
    if q is ALL_KEYS:
        return s == t
    return not differing_keys(s, t, q)


# -- universes ----------------------------------------------------------------

@dataclass(frozen=True)
class StateUniverse:
    states: tuple[ChainState, ...]
    description: str = "explicit"

    def __post_init__(self):
        seen, unique = set(), []
        for s in self.states:
            if s not in seen:
                seen.add(s)
                unique.append(s)
        object.__setattr__(self, "states", tuple(unique))

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    @classmethod
    def explicit(cls, states: Iterable[ChainState]) -> StateUniverse:
        return cls(tuple(states))

    @classmethod
    def bounded_reachable(
        cls,
        start: ChainState | Iterable[ChainState],
        pool: Iterable[Transaction],
        contracts: Contracts,
        depth: int = 3,
    ) -> StateUniverse:
        """States produced by at most ``depth`` transactions drawn (with
        repetition) from ``pool``, starting from ``start``."""
        if depth < 0:
            raise ValueError("depth must be non-negative")
        pool = list(dict.fromkeys(pool))
        starts = [start] if isinstance(start, ChainState) else list(start)
        seen = dict.fromkeys(starts)
        frontier = list(seen)
        for _ in range(depth):
            nxt = []
            for s in frontier:
                for t in pool:
                    s2 = exec_tx(s, t, contracts)
                    if s2 not in seen:
                        seen[s2] = None
                        nxt.append(s2)
            frontier = nxt
        return cls(tuple(seen), f"reachable(depth={depth}, pool={len(pool)})")

    @classmethod
    def product(
        cls, base: ChainState, choices: Mapping[QualifiedKey, Sequence[Value | None]]
    ) -> StateUniverse:
        """Every assignment of ``choices`` over ``base``; ``None`` leaves a key unbound.

        Keys listed with ``None`` must be unbound in ``base``.
        """
        keys = list(choices)
        states = []
        for combo in itertools.product(*(choices[k] for k in keys)):
            pi = {k: v for k, v in zip(keys, combo) if v is not None}
            states.append(base.apply(pi))
        return cls(tuple(states), f"product({len(keys)} keys)")


# -- swappability oracle --------------------------------------------------------

@dataclass(frozen=True)
class SwapVerdict:
    swappable: bool
    witness: ChainState | None = None
    key: QualifiedKey | None = None
    checked: int = 0

    def __bool__(self):
        return self.swappable

    def describe(self) -> str:
        if self.swappable:
            return f"swappable on universe ({self.checked} states)"
        return f"not swappable: witness digest {self.witness.digest()[:12]}, differs at {self.key}"


def oracle_swappable(
    t: Transaction, u: Transaction, universe: Iterable[ChainState], contracts: Contracts
) -> SwapVerdict:
    """Compare ``t u`` against ``u t`` on every state of ``universe``."""
    if t == u:
        raise ValueError("swappability relates distinct transactions only")
    n = 0
    for s in universe:
        n += 1
        a = exec_tx(exec_tx(s, t, contracts), u, contracts)
        b = exec_tx(exec_tx(s, u, contracts), t, contracts)
        if a != b:
            return SwapVerdict(False, s, differing_keys(a, b)[0], n)
    return SwapVerdict(True, checked=n)


@dataclass(frozen=True)
class ChainVerdict:
    equivalent: bool
    witness: ChainState | None = None
    key: QualifiedKey | None = None


def chains_equivalent(
    b0: Sequence[Transaction], b1: Sequence[Transaction],
    universe: Iterable[ChainState], contracts: Contracts,
) -> ChainVerdict:
    for s in universe:
        x = exec_chain(s, b0, contracts)
        y = exec_chain(s, b1, contracts)
        if x != y:
            return ChainVerdict(False, s, differing_keys(x, y)[0])
    return ChainVerdict(True)


# -- Mazurkiewicz classes -----------------------------------------------------

class BoundExceeded(Exception):
    pass


def symmetric(rel: Iterable[tuple]) -> frozenset:
    pairs = set()
    for a, b in rel:
        if a == b:
            raise ValueError(f"independence relation must be irreflexive: {a}")
        pairs.add((a, b))
        pairs.add((b, a))
    return frozenset(pairs)


def index_relation_to_transactions(b: Sequence[Transaction], rel) -> frozenset:
    """Lift 1-based position pairs of ``b`` to pairs of transactions."""
    return symmetric((b[i - 1], b[j - 1]) for i, j in rel if b[i - 1] != b[j - 1])


def mazurkiewicz_class(
    b: Sequence[Transaction], indep, bound: int = 8, cap: int = 100_000
) -> set[tuple[Transaction, ...]]:
    """All sequences reachable from ``b`` by swapping adjacent independent elements."""
    b = tuple(b)
    if len(b) > bound:
        raise BoundExceeded(f"blockchain length {len(b)} exceeds bound {bound}")
    indep = symmetric(indep)
    seen = {b}
    queue = deque([b])
    while queue:
        w = queue.popleft()
        for i in range(len(w) - 1):
            if (w[i], w[i + 1]) in indep:
                v = w[:i] + (w[i + 1], w[i]) + w[i + 2:]
                if v not in seen:
                    seen.add(v)
                    if len(seen) > cap:
                        raise BoundExceeded(f"class exceeds cap of {cap} sequences")
                    queue.append(v)
    return seen


# -- safe approximations --------------------------------------------------------

@dataclass(frozen=True)
class ApproxVerdict:
    safe: bool
    witness: tuple[ChainState, ...] = field(default=())
    key: QualifiedKey | None = None

    def __bool__(self):
        return self.safe


def check_safe_write_approx(
    q, t: Transaction, universe: Iterable[ChainState], contracts: Contracts
) -> ApproxVerdict:
    """Refute ``q`` when ``t`` changes a key outside it on some universe state."""
    member = _member(key_set(q))
    for s in universe:
        for k in state_diff(exec_tx(s, t, contracts), s):
            if not member(k):
                return ApproxVerdict(False, (s,), k)
    return ApproxVerdict(True)


def check_safe_read_approx(
    r, t: Transaction, universe: Iterable[ChainState], contracts: Contracts
) -> ApproxVerdict:
    """Refute ``r`` with states agreeing on ``r`` and on some key ``k`` whose
    values differ after running ``t``."""
    r = key_set(r)
    states = list(universe)
    outs = [exec_tx(s, t, contracts) for s in states]
    for i, j in itertools.combinations(range(len(states)), 2):
        s, s2 = states[i], states[j]
        if not equiv_on(s, s2, r):
            continue
        for k in differing_keys(outs[i], outs[j]):
            if same_value(s.get(k), s2.get(k)):
                return ApproxVerdict(False, (s, s2), k)
    return ApproxVerdict(True)

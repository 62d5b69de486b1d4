"""Occurrence nets built from a blockchain and an independence relation.

Transition ``i`` stands for the ``i``-th transaction (1-based).  Every
transition gets a start place ``(*, i)`` marked initially and an end place
``(i, *)``; positions ``i < j`` that are *not* related get an order place
``(i, j)`` forcing ``i`` to fire before ``j``.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter, defaultdict, deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

from .semantics import Transaction


class Transition(NamedTuple):
    index: int
    tx: Transaction | None = None

    def __str__(self):
        return f"t{self.index}"


class Place(NamedTuple):
    """``src`` / ``dst`` are transition indices; ``None`` stands for ``*``."""

    src: int | None
    dst: int | None

    @property
    def kind(self) -> str:
        if self.src is None:
            return "start"
        if self.dst is None:
            return "end"
        return "order"

    def __str__(self):
        a = "*" if self.src is None else f"t{self.src}"
        b = "*" if self.dst is None else f"t{self.dst}"
        return f"({a},{b})"


def start(i: int) -> Place:
    return Place(None, i)


def end(i: int) -> Place:
    return Place(i, None)


def order(i: int, j: int) -> Place:
    return Place(i, j)


class Marking(Mapping):
    """Immutable multiset of places."""

    __slots__ = ("_counts", "_hash")

    def __init__(self, counts: Mapping[Place, int] | Iterable[Place] = ()):
        if isinstance(counts, Mapping):
            c = {p: n for p, n in counts.items() if n}
        else:
            c = dict(Counter(counts))
        if any(n < 0 for n in c.values()):
            raise ValueError("marking counts must be non-negative")
        self._counts = c
        self._hash = None

    def __getitem__(self, p):
        return self._counts.get(p, 0)

    def __iter__(self):
        return iter(self._counts)

    def __len__(self):
        return len(self._counts)

    def __contains__(self, p):
        return self._counts.get(p, 0) > 0

    def __eq__(self, other):
        if isinstance(other, Marking):
            return self._counts == other._counts
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def covers(self, need: Mapping[Place, int]) -> bool:
        return all(self[p] >= n for p, n in need.items())

    def __repr__(self):
        inner = ", ".join(
            str(p) if n == 1 else f"{p}x{n}" for p, n in sorted(self._counts.items(), key=_place_order)
        )
        return "Marking{" + inner + "}"


def _place_order(item):
    p = item[0] if isinstance(item, tuple) and isinstance(item[0], Place) else item
    return (p.kind != "start", p.kind == "end", p.src or 0, p.dst or 0)


Arc = tuple  # (Place, int) for place -> transition, (int, Place) for transition -> place


@dataclass(frozen=True)
class Net:
    transitions: tuple[Transition, ...]
    places: tuple[Place, ...]
    arcs: tuple[Arc, ...]
    initial: Marking
    _pre: dict = field(init=False, repr=False, compare=False)
    _post: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pre, post = defaultdict(Counter), defaultdict(Counter)
        for a, b in self.arcs:
            if isinstance(a, Place):
                pre[b][a] += 1
            else:
                post[a][b] += 1
        object.__setattr__(self, "_pre", dict(pre))
        object.__setattr__(self, "_post", dict(post))

    def transition(self, i: int) -> Transition:
        return self.transitions[i - 1]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(t.index for t in self.transitions)

    def pre(self, t) -> Counter:
        return self._pre.get(_idx(t), Counter())

    def post(self, t) -> Counter:
        return self._post.get(_idx(t), Counter())

    def pre_step(self, u) -> Counter:
        total = Counter()
        for t in u:
            total.update(self.pre(t))
        return total

    def post_step(self, u) -> Counter:
        total = Counter()
        for t in u:
            total.update(self.post(t))
        return total

    @property
    def order_places(self) -> list[tuple[int, int]]:
        return sorted((p.src, p.dst) for p in self.places if p.kind == "order")

    def final_marking(self) -> Marking:
        return Marking(end(t.index) for t in self.transitions)


def _idx(t) -> int:
    return t.index if isinstance(t, Transition) else t


class RelationReflexive(ValueError):
    pass


class RelationNotSymmetric(ValueError):
    pass


def normalize_relation(rel: Iterable[tuple[int, int]], n: int) -> frozenset:
    """Check a position relation and return it as pairs ``(i, j)`` with ``i < j``.

    A relation listing only pairs with ``i < j`` is read as unordered;
    otherwise every pair must appear in both directions.
    """
    rel = rel if isinstance(rel, (set, frozenset)) else set(rel)
    lower = False
    for i, j in rel:
        if i == j:
            raise RelationReflexive(f"relation relates position {i} to itself")
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"pair ({i}, {j}) outside positions 1..{n}")
        if i > j:
            lower = True
    if not lower:
        return frozenset(rel)
    missing = sorted((j, i) for i, j in rel if (j, i) not in rel)
    if missing:
        raise RelationNotSymmetric(f"missing symmetric pairs {missing}")
    return frozenset((min(i, j), max(i, j)) for i, j in rel)


def build_net(b: Sequence[Transaction], rel: Iterable[tuple[int, int]]) -> Net:
    b = list(b)
    n = len(b)
    related = normalize_relation(rel, n)
    transitions = tuple(Transition(i, t) for i, t in enumerate(b, start=1))
    places, arcs = [], []
    for i in range(1, n + 1):
        places += [start(i), end(i)]
        arcs += [(start(i), i), (i, end(i))]
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if (i, j) not in related:
                p = order(i, j)
                places.append(p)
                arcs += [(i, p), (p, j)]
    return Net(transitions, tuple(places), tuple(arcs), Marking(start(i) for i in range(1, n + 1)))


# -- structural validation ----------------------------------------------------

@dataclass(frozen=True)
class Validation:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok


def validate_occurrence_net(net: Net) -> Validation:
    problems = []
    known_p = set(net.places)
    known_t = set(net.indices)
    consumers, producers = defaultdict(list), defaultdict(list)
    for a, b in net.arcs:
        if isinstance(a, Place):
            p, t = a, b
            consumers[p].append(t)
        else:
            p, t = b, a
            producers[p].append(t)
        if p not in known_p or t not in known_t:
            problems.append(f"arc {a}->{b} mentions an unknown node")
    dup = [arc for arc, c in Counter(net.arcs).items() if c > 1]
    for arc in dup:
        problems.append(f"(iii) flow is not a relation: arc {arc[0]}->{arc[1]} repeated")
    for p in net.places:
        if len(consumers[p]) > 1:
            problems.append(f"(i) place {p} has {len(consumers[p])} consumers")
        marked = net.initial[p] > 0
        if marked and producers[p]:
            problems.append(f"(ii) initially marked place {p} has a producer")
        if not marked and len(producers[p]) != 1:
            problems.append(f"(ii) unmarked place {p} has {len(producers[p])} producers")
    cycle = _find_cycle(net)
    if cycle:
        problems.append("(iv) flow has a cycle: " + " -> ".join(str(x) for x in cycle))
    return Validation(not problems, tuple(problems))


def _find_cycle(net: Net):
    succ = defaultdict(set)
    nodes = set()
    for a, b in net.arcs:
        na = ("p", a) if isinstance(a, Place) else ("t", a)
        nb = ("p", b) if isinstance(b, Place) else ("t", b)
        succ[na].add(nb)
        nodes |= {na, nb}
    indeg = Counter()
    for a in succ:
        for b in succ[a]:
            indeg[b] += 1
    queue = deque(x for x in nodes if indeg[x] == 0)
    removed = set()
    while queue:
        x = queue.popleft()
        removed.add(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                queue.append(y)
    rest = nodes - removed
    if not rest:
        return None
    # walk inside the residual graph until a node repeats
    x = min(rest, key=str)
    path, pos = [], {}
    while x not in pos:
        pos[x] = len(path)
        path.append(x)
        x = min((y for y in succ[x] if y in rest), key=str)
    labels = [f"t{v}" if k == "t" else str(v) for k, v in path[pos[x]:]]
    return labels + [labels[0]]


# -- firing -------------------------------------------------------------------

class StepNotEnabled(ValueError):
    def __init__(self, missing):
        self.missing = missing
        super().__init__("step not enabled; missing " + ", ".join(f"{p}" for p in sorted(missing, key=_place_order)))


class Stuck(RuntimeError):
    def __init__(self, remaining):
        self.remaining = remaining
        super().__init__(f"no transition enabled; {len(remaining)} never fired")


def enabled(net: Net, m: Marking) -> frozenset[Transition]:
    return frozenset(t for t in net.transitions if m.covers(net.pre(t)))


def fire_step(net: Net, m: Marking, u: Iterable) -> Marking:
    u = [_idx(t) for t in u]
    if not u:
        raise ValueError("a step must contain at least one transition")
    need = net.pre_step(u)
    missing = {p for p, n in need.items() if m[p] < n}
    if missing:
        raise StepNotEnabled(missing)
    counts = Counter(dict(m.items()))
    counts.subtract(need)
    counts.update(net.post_step(u))
    return Marking(counts)


def fire_sequence(net: Net, steps: Iterable, m: Marking | None = None) -> Marking:
    m = net.initial if m is None else m
    for u in steps:
        m = fire_step(net, m, u)
    return m


def greedy_maximal_schedule(net: Net, width: int | None = None) -> list[frozenset[Transition]]:
    """Fire the whole enabled set (or its ``width`` lowest positions) until done.

    Works by counting unmarked preset places per transition, which is linear
    in the number of arcs; equivalent to repeated :func:`enabled` calls.
    """
    if width is not None and width < 1:
        raise ValueError("width must be positive")
    consumers = defaultdict(list)
    waiting = {}
    marked = set(net.initial)
    for t in net.transitions:
        pre = net.pre(t)
        waiting[t.index] = sum(1 for p in pre if p not in marked)
        for p in pre:
            consumers[p].append(t.index)
    ready = sorted(i for i, c in waiting.items() if c == 0)
    fired = set()
    steps = []
    while ready:
        step, ready = (ready, []) if width is None else (ready[:width], ready[width:])
        produced = []
        for i in step:
            fired.add(i)
            for p in net.post(i):
                for j in consumers[p]:
                    waiting[j] -= 1
                    if waiting[j] == 0:
                        produced.append(j)
        steps.append(frozenset(net.transition(i) for i in step))
        ready = sorted(ready + produced)
    if len(fired) != len(net.transitions):
        raise Stuck([i for i in net.indices if i not in fired])
    return steps


def sequential_schedule(net: Net) -> list[frozenset[Transition]]:
    return [frozenset({t}) for t in net.transitions]


def step_indices(steps) -> list[list[int]]:
    return [sorted(_idx(t) for t in u) for u in steps]


# -- export / import ------------------------------------------------------------

def export_net(net: Net, fmt: str = "dot") -> str:
    if fmt == "dot":
        return _to_dot(net)
    if fmt in ("json", "structured"):
        return json.dumps(net_to_doc(net), indent=2)
    raise ValueError(f"unknown net format {fmt!r}")


def net_to_doc(net: Net) -> dict:
    from .files import tx_to_doc

    return {
        "transitions": [
            {"index": t.index, "tx": tx_to_doc(t.tx) if t.tx is not None else None}
            for t in net.transitions
        ],
        "order_places": [list(p) for p in net.order_places],
    }


def import_net(doc, addresses=None) -> Net:
    """Rebuild a construction net from its structured export."""
    from .files import tx_from_doc

    if isinstance(doc, str):
        doc = json.loads(doc)
    entries = sorted(doc["transitions"], key=lambda e: e["index"])
    n = len(entries)
    if [e["index"] for e in entries] != list(range(1, n + 1)):
        raise ValueError("transition indices must be 1..n")
    txs = [
        None if e["tx"] is None else tx_from_doc(e["tx"], addresses or {}, f"transitions[{k}]")
        for k, e in enumerate(entries)
    ]
    ordered = {tuple(p) for p in doc["order_places"]}
    rel = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)} - ordered
    return build_net(txs, rel)


def _dot_id(p: Place) -> str:
    a = "s" if p.src is None else str(p.src)
    b = "e" if p.dst is None else str(p.dst)
    return f"p_{a}_{b}"


def _to_dot(net: Net) -> str:
    lines = ["digraph occurrence_net {", "  rankdir=LR;"]
    for p in net.places:
        token = "&#9679;" if net.initial[p] else ""
        lines.append(f'  {_dot_id(p)} [shape=circle, label="{token}", xlabel="{p}"];')
    for t in net.transitions:
        label = f"t{t.index}" if t.tx is None else f"t{t.index}\\n{t.tx.function}"
        lines.append(f'  t{t.index} [shape=box, label="{label}"];')
    for a, b in net.arcs:
        src = _dot_id(a) if isinstance(a, Place) else f"t{a}"
        dst = _dot_id(b) if isinstance(b, Place) else f"t{b}"
        lines.append(f"  {src} -> {dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- exhaustive exploration -------------------------------------------------------

def enabled_steps(net: Net, m: Marking) -> list[frozenset[int]]:
    """Every nonempty set of transition indices enabled as one step at ``m``."""
    ready = sorted(t.index for t in enabled(net, m))
    out = []
    for r in range(1, len(ready) + 1):
        for combo in itertools.combinations(ready, r):
            if m.covers(net.pre_step(combo)):
                out.append(frozenset(combo))
    return out


def maximal_step_sequences(net: Net, m: Marking | None = None):
    """Yield every step firing sequence from ``m`` that ends with nothing enabled.

    The count grows like the ordered set partitions of the transitions; meant
    for nets with a handful of transitions.
    """
    m = net.initial if m is None else m
    steps = enabled_steps(net, m)
    if not steps:
        yield []
        return
    for u in steps:
        for rest in maximal_step_sequences(net, fire_step(net, m, u)):
            yield [u] + rest

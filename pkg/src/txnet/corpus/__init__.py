"""Worked-example fixtures stored as contract sources plus JSON files.

Each fixture directory holds ``genesis.json``, one ``.ctr`` file per
contract, ``block.json``, optional ``setup.json`` (transactions run before
the block) and ``expect.json`` with machine-checkable expectations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

from ..equivalence import StateUniverse
from ..files import decode_key, decode_value, load_genesis, load_transactions
from ..semantics import Genesis, Transaction, exec_chain, initial_state
from ..state import ChainState, QualifiedKey

DATA = Path(str(resources.files(__package__) / "data"))


class UnknownFixture(KeyError):
    pass


def fixture_names() -> list[str]:
    return sorted(p.name for p in DATA.iterdir() if (p / "expect.json").is_file())


@dataclass
class Fixture:
    name: str
    path: Path
    genesis: Genesis
    block: list[Transaction]
    setup: list[Transaction] = field(default_factory=list)
    expect: dict = field(default_factory=dict)

    @property
    def contracts(self):
        return self.genesis.contracts

    @property
    def addresses(self):
        return self.genesis.addresses

    @property
    def description(self) -> str:
        return self.expect.get("description", "")

    @property
    def sources(self) -> dict[str, str]:
        return {p.name: p.read_text() for p in sorted(self.path.glob("*.ctr"))}

    def address(self, name):
        return self.genesis.address(name)

    def tx(self, i: int) -> Transaction:
        """The ``i``-th block transaction (1-based)."""
        return self.block[i - 1]

    def key(self, text: str) -> QualifiedKey:
        return decode_key(text, self.addresses)

    def value(self, v):
        return decode_value(v, self.addresses)

    def keys(self, texts) -> frozenset[QualifiedKey]:
        return frozenset(self.key(t) for t in texts)

    @cached_property
    def start_state(self) -> ChainState:
        """Genesis state after the setup transactions."""
        return exec_chain(initial_state(self.genesis), self.setup, self.contracts)

    def final_state(self) -> ChainState:
        return exec_chain(self.start_state, self.block, self.contracts)

    def expected_final(self) -> dict[QualifiedKey, object]:
        return {self.key(k): self.value(v) for k, v in self.expect.get("final", {}).items()}

    @property
    def pool(self) -> list[Transaction]:
        conf = self.expect.get("universe", {})
        if "pool" in conf:
            return load_transactions(self.path / conf["pool"], self.genesis)
        return list(self.block)

    def universe(self, depth: int | None = None) -> StateUniverse:
        conf = self.expect.get("universe", {"kind": "reachable", "depth": 3})
        if conf["kind"] == "product":
            choices = {self.key(k): [self.value(v) for v in vs] for k, vs in conf["choices"].items()}
            return StateUniverse.product(self.start_state, choices)
        d = conf.get("depth", 3) if depth is None else depth
        return StateUniverse.bounded_reachable(self.start_state, self.pool, self.contracts, d)

    @property
    def relation(self) -> frozenset[tuple[int, int]]:
        return frozenset(tuple(p) for p in self.expect.get("relation", []))

    @property
    def schedule(self) -> list[list[int]] | None:
        return self.expect.get("schedule")


def load_fixture(name: str) -> Fixture:
    path = DATA / name
    if not (path / "expect.json").is_file():
        raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(fixture_names())}")
    genesis = load_genesis(path / "genesis.json")
    setup = load_transactions(path / "setup.json", genesis) if (path / "setup.json").exists() else []
    block = load_transactions(path / "block.json", genesis)
    expect = json.loads((path / "expect.json").read_text())
    return Fixture(name, path, genesis, block, setup, expect)

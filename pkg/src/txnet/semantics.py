"""Transaction and blockchain semantics.

A transaction first moves ``value`` units from the sender to the callee,
then runs the called function.  If the sender cannot pay or the body is
undefined, the transaction leaves the state exactly as it was.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .lang import Bottom, Contract, Failure, Frame, account_contract, exec_in, make_env
from .state import (
    ACCOUNT,
    Address,
    ChainState,
    QualifiedKey,
    Value,
    check_value,
    encode_value,
    same_value,
    value_tag,
)

Contracts = Mapping[Address, Contract]


@dataclass(frozen=True)
class Transaction:
    sender: Address
    callee: Address
    function: str
    value: int = 0
    args: tuple = ()
    _tag: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if type(self.value) is not int or self.value < 0:
            raise ValueError(f"transferred value must be a non-negative integer: {self.value!r}")
        args = tuple(check_value(a) for a in self.args)
        object.__setattr__(self, "args", args)
        object.__setattr__(
            self, "_tag",
            (self.sender, self.callee, self.function, self.value,
             tuple(value_tag(a) for a in args)),
        )

    def __eq__(self, other):
        if not isinstance(other, Transaction):
            return NotImplemented
        return self._tag == other._tag

    def __hash__(self):
        return hash(self._tag)

    def __str__(self):
        args = ", ".join(encode_value(a) for a in self.args)
        return f"{self.sender} --{self.value}:{self.function}({args})--> {self.callee}"


class ConfigurationError(ValueError):
    pass


@dataclass
class Genesis:
    """Initial balances of every declared address plus deployed contracts."""

    balances: dict[Address, int]
    contracts: dict[Address, Contract] = field(default_factory=dict)

    def __post_init__(self):
        names = {}
        for a, b in self.balances.items():
            if a.name in names:
                raise ConfigurationError(f"duplicate address {a.name}")
            names[a.name] = a
            if type(b) is not int or b < 0:
                raise ConfigurationError(f"{a}: initial balance must be a non-negative integer")
        for a in self.contracts:
            if a not in self.balances:
                raise ConfigurationError(f"contract {a} has no declared balance")

    @property
    def addresses(self) -> dict[str, Address]:
        return {a.name: a for a in self.balances}

    def address(self, name: str) -> Address:
        try:
            return self.addresses[name]
        except KeyError:
            raise ConfigurationError(f"undeclared address {name!r}") from None

    def check_transaction(self, t: Transaction) -> None:
        for a in (t.sender, t.callee, *[x for x in t.args if isinstance(x, Address)]):
            if a not in self.balances:
                raise ConfigurationError(f"undeclared address {a} in {t}")
        if self.addresses[t.sender.name].kind != ACCOUNT:
            raise ConfigurationError(f"sender {t.sender} is not an account")


def initial_state(g: Genesis) -> ChainState:
    return ChainState.from_balances(g.balances)


def _contract_for(contracts: Contracts, a: Address) -> Contract | None:
    c = contracts.get(a)
    if c is None and not a.is_contract:
        return account_contract(a)
    return c


def run_tx(sigma: ChainState, t: Transaction, contracts: Contracts) -> dict | None:
    """Execute ``t`` against ``sigma`` and return the buffer of writes.

    ``None`` means the transaction aborted and has no effect.  The buffer
    holds every key the run assigned, including unchanged rewrites.
    """
    contract = _contract_for(contracts, t.callee)
    if contract is None:
        return None
    fun = contract.function(t.function)
    if fun is None or t.sender not in sigma or t.callee not in sigma:
        return None
    if sigma.balance(t.sender) < t.value:
        return None
    frame = Frame(sigma)
    try:
        env = make_env(fun, t.sender, t.value, t.args)
        if t.value:
            frame.transfer(t.sender, t.callee, t.value)
        exec_in(fun.body, frame, env, t.callee)
    except (Bottom, Failure):
        return None
    return frame.writes


def exec_tx(sigma: ChainState, t: Transaction, contracts: Contracts) -> ChainState:
    writes = run_tx(sigma, t, contracts)
    if writes is None:
        return sigma
    return sigma.apply(writes)


def exec_chain(sigma: ChainState, b: Iterable[Transaction], contracts: Contracts) -> ChainState:
    for t in b:
        sigma = exec_tx(sigma, t, contracts)
    return sigma


@dataclass(frozen=True)
class Blockchain:
    transactions: tuple[Transaction, ...] = ()

    def __iter__(self):
        return iter(self.transactions)

    def __len__(self):
        return len(self.transactions)

    def __getitem__(self, i):
        return self.transactions[i]


def changed_keys(sigma: ChainState, t: Transaction, contracts: Contracts) -> dict[QualifiedKey, Value]:
    """Keys whose value ``t`` actually changes, with their new values."""
    writes = run_tx(sigma, t, contracts)
    if not writes:
        return {}
    return {q: v for q, v in writes.items() if not same_value(v, sigma.get(q))}


"""Text and JSON encodings: qualified keys, values, states, genesis, transactions.

Qualified keys are written ``addr.base`` or ``addr.base[i1][i2]``; values
as JSON integers, JSON booleans, or ``"@name"`` strings for addresses.
"""

from __future__ import annotations

import json
import re
from collections.abc import Mapping
from pathlib import Path

from .lang import ParseError, parse_contract
from .state import (
    ACCOUNT,
    CONTRACT,
    Address,
    ChainState,
    CompositeKey,
    QualifiedKey,
    Value,
)
from .semantics import ConfigurationError, Genesis, Transaction

Addresses = Mapping[str, Address]

_KEY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[[^\[\]]+\])*)$")
_INDEX = re.compile(r"\[([^\[\]]+)\]")


class LoadError(ValueError):
    """Malformed input file; the message names the offending location."""


def decode_value(text, addresses: Addresses) -> Value:
    if isinstance(text, bool):
        return text
    if isinstance(text, int):
        return text
    if not isinstance(text, str):
        raise ValueError(f"not a value: {text!r}")
    text = text.strip()
    if text in ("true", "false"):
        return text == "true"
    if text.startswith("@"):
        name = text[1:]
        if name not in addresses:
            raise ValueError(f"undeclared address {text}")
        return addresses[name]
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"not a value: {text!r}") from None


def value_to_json(v: Value):
    if isinstance(v, Address):
        return "@" + v.name
    return v


def decode_composite(text: str, addresses: Addresses) -> CompositeKey:
    m = _KEY.match(text.strip())
    if not m:
        raise ValueError(f"malformed key {text!r}")
    indices = [decode_value(i, addresses) for i in _INDEX.findall(m.group(2))]
    return CompositeKey(m.group(1), indices)


def decode_key(text: str, addresses: Addresses) -> QualifiedKey:
    addr, sep, rest = text.strip().partition(".")
    if not sep:
        raise ValueError(f"qualified key needs an address prefix: {text!r}")
    if addr not in addresses:
        raise ValueError(f"undeclared address {addr!r} in key {text!r}")
    return QualifiedKey(addresses[addr], decode_composite(rest, addresses))


def encode_key(q: QualifiedKey) -> str:
    return q.encode()


def state_to_doc(sigma: ChainState) -> dict:
    return {
        a.name: {k.encode(): value_to_json(v) for k, v in sorted(sigma.store(a).items())}
        for a in sigma.addresses
    }


def state_from_doc(doc: Mapping, addresses: Addresses) -> ChainState:
    stores = {}
    for name, store in doc.items():
        if name not in addresses:
            raise LoadError(f"state: undeclared address {name!r}")
        stores[addresses[name]] = {
            decode_composite(k, addresses): decode_value(v, addresses) for k, v in store.items()
        }
    return ChainState(stores)


def tx_to_doc(t: Transaction) -> dict:
    return {
        "sender": t.sender.name,
        "callee": t.callee.name,
        "function": t.function,
        "value": t.value,
        "args": [value_to_json(a) for a in t.args],
    }


def tx_from_doc(doc: Mapping, addresses: Addresses, where: str = "transaction") -> Transaction:
    if not isinstance(doc, Mapping):
        raise LoadError(f"{where}: expected an object")
    unknown = set(doc) - {"sender", "callee", "function", "value", "args"}
    if unknown:
        raise LoadError(f"{where}: unknown fields {sorted(unknown)}")
    try:
        sender = addresses[doc["sender"]]
        callee = addresses[doc["callee"]]
        function = doc["function"]
        value = doc.get("value", 0)
        args = tuple(decode_value(a, addresses) for a in doc.get("args", []))
    except KeyError as exc:
        raise LoadError(f"{where}: missing or undeclared {exc}") from None
    except (ValueError, TypeError) as exc:
        raise LoadError(f"{where}: {exc}") from None
    if not isinstance(function, str):
        raise LoadError(f"{where}: function must be a string")
    if sender.kind != ACCOUNT:
        raise LoadError(f"{where}: sender {sender} is not an account")
    try:
        return Transaction(sender, callee, function, value, args)
    except (ValueError, TypeError) as exc:
        raise LoadError(f"{where}: {exc}") from None


def txs_from_doc(doc, addresses: Addresses, source: str = "transactions") -> list[Transaction]:
    if not isinstance(doc, list):
        raise LoadError(f"{source}: expected an array of transaction records")
    return [tx_from_doc(d, addresses, f"{source}[{i}]") for i, d in enumerate(doc)]


def txs_to_doc(txs) -> list[dict]:
    return [tx_to_doc(t) for t in txs]


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise LoadError(f"{path}: {exc.strerror}") from None


def _contract_name(source: str) -> str:
    code = re.sub(r"//[^\n]*", "", source)
    m = re.search(r"\bcontract\s+([A-Za-z_][A-Za-z0-9_]*)", code)
    if not m:
        raise LoadError("contract source has no 'contract <name>' header")
    return m.group(1)


def build_genesis(balances: Mapping[str, int], sources: list[tuple[str, str]]) -> Genesis:
    """Build a genesis from ``{name: balance}`` and ``(label, source)`` pairs.

    Names that head a contract source are contract addresses; every other
    name is an account.  Contracts without a listed balance start at 0.
    """
    contract_names = {}
    for label, src in sources:
        name = _contract_name(src)
        if name in contract_names:
            raise LoadError(f"{label}: contract {name} deployed twice")
        contract_names[name] = (label, src)
    addresses = {}
    for name in balances:
        kind = CONTRACT if name in contract_names else ACCOUNT
        addresses[name] = Address(name, kind)
    for name in contract_names:
        addresses.setdefault(name, Address(name, CONTRACT))
    contracts = {}
    for name, (label, src) in contract_names.items():
        try:
            c = parse_contract(src, addresses)
        except ParseError as exc:
            raise LoadError(f"{label}:{exc}") from None
        contracts[c.address] = c
    bal = {}
    for name, a in addresses.items():
        b = balances.get(name, 0)
        if type(b) is not int or b < 0:
            raise LoadError(f"balance of {name} must be a non-negative integer")
        bal[a] = b
    try:
        return Genesis(bal, contracts)
    except ConfigurationError as exc:
        raise LoadError(str(exc)) from None


def load_genesis(path, contract_paths=()) -> Genesis:
    """Load a genesis file ``{"balances": {...}, "contracts": [paths]}``.

    Contract paths are resolved relative to the genesis file; extra
    ``contract_paths`` are appended.
    """
    path = Path(path)
    doc = _read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("balances", {}), dict):
        raise LoadError(f"{path}: expected {{'balances': {{...}}, 'contracts': [...]}}")
    files = [path.parent / p for p in doc.get("contracts", [])] + [Path(p) for p in contract_paths]
    sources = []
    for f in files:
        try:
            sources.append((str(f), f.read_text()))
        except OSError as exc:
            raise LoadError(f"{f}: {exc.strerror}") from None
    return build_genesis(doc.get("balances", {}), sources)


def load_transactions(path, genesis: Genesis) -> list[Transaction]:
    return txs_from_doc(_read_json(path), genesis.addresses, str(path))


def load_state(path, addresses: Addresses) -> ChainState:
    return state_from_doc(_read_json(path), addresses)

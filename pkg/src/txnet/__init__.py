"""Serial and occurrence-net-parallel execution of smart-contract blocks."""

from .state import (
    Address,
    ChainState,
    CompositeKey,
    MergeConflict,
    QualifiedKey,
    StateUpdate,
    apply_update,
    balance_key,
    merge_updates,
    qkey,
    state_diff,
    state_digest,
)
from .lang import Contract, FunctionDef, ParseError, parse_contract
from .semantics import Blockchain, Genesis, Transaction, exec_chain, exec_tx, initial_state

__version__ = "0.1.0"

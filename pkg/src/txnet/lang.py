"""A small contract language: syntax tree, parser, printer, interpreter.

Source format::

    contract Token {
      fun setApprovalForAll(operator, approved) {
        operatorApprovals[sender][operator] := approved
      }
    }

Statements: ``skip``, ``throw``, ``k := e``, ``require(e)``, ``send(e, e)``,
``if e then s [else s]``, ``{ s; s; ... }``.  Expressions: integer,
``true``/``false`` and ``@name`` literals, parameters, ``sender``, ``value``,
key lookups ``k`` / ``k[e]...``, ``+ - == != < <= > >= && ||`` and unary
``!``/``-``.  An identifier that is not a parameter names a key of the
contract's own store; bare ``balance`` is the contract's native balance.
"""

from __future__ import annotations

import re
from functools import lru_cache
from dataclasses import dataclass
from typing import Union

from .state import (
    ACCOUNT,
    BALANCE,
    CONTRACT,
    Address,
    CompositeKey,
    QualifiedKey,
    Value,
    balance_key,
    encode_value,
    same_value,
    value_tag,
)

RESERVED = frozenset(
    {"sender", "value", "true", "false", "skip", "throw", "require", "send",
     "if", "then", "else", "fun", "contract"}
)


# -- syntax tree ------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: Value

    def __eq__(self, other):
        return isinstance(other, Lit) and value_tag(self.value) == value_tag(other.value)

    def __hash__(self):
        return hash(value_tag(self.value))


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Sender:
    pass


@dataclass(frozen=True)
class MsgValue:
    pass


@dataclass(frozen=True)
class KeyExpr:
    base: str
    indices: tuple = ()


@dataclass(frozen=True)
class Lookup:
    key: KeyExpr


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Lit, Param, Sender, MsgValue, Lookup, BinOp, Not, Neg]


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Throw:
    pass


@dataclass(frozen=True)
class Assign:
    key: KeyExpr
    expr: Expr


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt" = Skip()


@dataclass(frozen=True)
class Send:
    amount: Expr
    recipient: Expr


Stmt = Union[Skip, Throw, Assign, Seq, If, Send]


def require(cond: Expr) -> If:
    return If(cond, Skip(), Throw())


def seq(*stmts: Stmt) -> Stmt:
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    body: Stmt


@dataclass(eq=False)
class Contract:
    """Functions deployed at a contract address (identity equality)."""

    address: Address
    functions: dict[str, FunctionDef]

    @property
    def name(self) -> str:
        return self.address.name

    def function(self, name: str) -> FunctionDef | None:
        return self.functions.get(name)


ACCOUNT_FUNCTION = "receive"
_ACCOUNT_FUN = FunctionDef(ACCOUNT_FUNCTION, (), Skip())


@lru_cache(maxsize=None)
def account_contract(a: Address) -> Contract:
    """The one-function contract every account implicitly carries."""
    return Contract(a, {ACCOUNT_FUNCTION: _ACCOUNT_FUN})


# -- parser -------------------------------------------------------------------

class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


class ArityError(ParseError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|//[^\n]*)
  | (?P<nl>\n)
  | (?P<int>\d+)
  | (?P<addr>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|>=|&&|\|\||[-+<>!(){}\[\];,])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            tokens.append((kind, m.group(), line, pos - start + 1))
        pos = m.end()
    tokens.append(("eof", "", line, pos - start + 1))
    return tokens


_BINARY = [("||",), ("&&",), ("==", "!=", "<", "<=", ">", ">="), ("+", "-")]


class _Parser:
    def __init__(self, text: str, addresses):
        self.toks = _tokenize(text)
        self.i = 0
        self.addresses = addresses
        self.params: frozenset[str] = frozenset()
        self.arity: dict[str, int] = {}

    # token helpers
    def peek(self, ahead=0):
        return self.toks[self.i + ahead]

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok[2], tok[3])

    def at(self, text):
        kind, val = self.peek()[:2]
        return val == text and kind in ("op", "id")

    def take(self, text=None, kind=None):
        tok = self.peek()
        if text is not None and not (tok[1] == text and tok[0] in ("op", "id")):
            raise self.error(f"expected {text!r}, found {tok[1] or 'end of input'!r}")
        if kind is not None and tok[0] != kind:
            raise self.error(f"expected {kind}, found {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok

    def ident(self):
        tok = self.take(kind="id")
        if tok[1] in RESERVED:
            raise self.error(f"reserved name {tok[1]!r}", tok)
        return tok[1]

    # grammar
    def contract(self) -> tuple[str, list[FunctionDef]]:
        self.take("contract")
        name = self.ident()
        self.take("{")
        funs = []
        while not self.at("}"):
            funs.append(self.function())
        self.take("}")
        self.take(kind="eof")
        return name, funs

    def function(self) -> FunctionDef:
        self.take("fun")
        name = self.ident()
        self.take("(")
        params = []
        while not self.at(")"):
            ptok = self.peek()
            p = self.ident()
            if p in params:
                raise self.error(f"duplicate parameter {p!r}", ptok)
            params.append(p)
            if not self.at(")"):
                self.take(",")
        self.take(")")
        self.params = frozenset(params)
        body = self.block()
        self.params = frozenset()
        return FunctionDef(name, tuple(params), body)

    def block(self) -> Stmt:
        self.take("{")
        stmts = []
        while not self.at("}"):
            if self.at(";"):
                self.take(";")
                continue
            stmts.append(self.stmt())
            # a statement ending in a brace needs no separator
            if not self.at("}") and self.toks[self.i - 1][1] != "}":
                self.take(";")
        self.take("}")
        return seq(*stmts)

    def stmt(self) -> Stmt:
        tok = self.peek()
        if self.at("{"):
            return self.block()
        if self.at("skip"):
            self.take()
            return Skip()
        if self.at("throw"):
            self.take()
            return Throw()
        if self.at("require"):
            self.take()
            self.take("(")
            cond = self.expr()
            self.take(")")
            return require(cond)
        if self.at("send"):
            self.take()
            self.take("(")
            amount = self.expr()
            self.take(",")
            to = self.expr()
            self.take(")")
            return Send(amount, to)
        if self.at("if"):
            self.take()
            cond = self.expr()
            self.take("then")
            then = self.stmt()
            orelse = Skip()
            if self.at("else"):
                self.take()
                orelse = self.stmt()
            return If(cond, then, orelse)
        if tok[0] == "id":
            key = self.key(self.ident(), tok)
            if key.base == BALANCE and not key.indices:
                raise self.error("the native balance can only change through send", tok)
            self.take(":=")
            return Assign(key, self.expr())
        raise self.error(f"unexpected {tok[1] or 'end of input'!r}")

    def key(self, base: str, tok) -> KeyExpr:
        if base in self.params:
            raise self.error(f"parameter {base!r} used as a key", tok)
        indices = []
        while self.at("["):
            self.take("[")
            indices.append(self.expr())
            self.take("]")
        if not (base == BALANCE and not indices):
            known = self.arity.setdefault(base, len(indices))
            if known != len(indices):
                raise ArityError(
                    f"key {base!r} used with {len(indices)} indices, earlier {known}",
                    tok[2], tok[3],
                )
        return KeyExpr(base, tuple(indices))

    def expr(self, level=0) -> Expr:
        if level == len(_BINARY):
            return self.unary()
        left = self.expr(level + 1)
        ops = _BINARY[level]
        while self.peek()[0] == "op" and self.peek()[1] in ops:
            op = self.take()[1]
            right = self.expr(level + 1)
            left = BinOp(op, left, right)
            if level == 2 and self.peek()[0] == "op" and self.peek()[1] in ops:
                raise self.error("comparisons do not chain; use parentheses")
        return left

    def unary(self) -> Expr:
        if self.at("!"):
            self.take()
            return Not(self.unary())
        if self.at("-"):
            self.take()
            if self.peek()[0] == "int":
                return Lit(-int(self.take()[1]))
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        kind, text = tok[:2]
        if kind == "int":
            self.take()
            return Lit(int(text))
        if kind == "addr":
            self.take()
            return Lit(self.resolve(text[1:], tok))
        if self.at("("):
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if self.at("true") or self.at("false"):
            self.take()
            return Lit(text == "true")
        if self.at("sender"):
            self.take()
            return Sender()
        if self.at("value"):
            self.take()
            return MsgValue()
        if kind == "id":
            name = self.ident()
            if name in self.params:
                if self.at("["):
                    raise self.error(f"parameter {name!r} cannot be indexed")
                return Param(name)
            return Lookup(self.key(name, tok))
        raise self.error(f"unexpected {text or 'end of input'!r}")

    def resolve(self, name: str, tok) -> Address:
        if self.addresses is None:
            return Address(name)
        if name not in self.addresses:
            raise self.error(f"undeclared address @{name}", tok)
        return self.addresses[name]


def parse_contract(text: str, addresses=None) -> Contract:
    """Parse one contract.

    ``addresses`` maps declared names to :class:`Address`; when given, address
    literals must be declared.  Without it they default to account kind.
    """
    p = _Parser(text, addresses)
    name, funs = p.contract()
    table = {}
    for f in funs:
        if f.name in table:
            raise ParseError(f"duplicate function {f.name!r}")
        table[f.name] = f
    if addresses is not None and name in addresses:
        addr = addresses[name]
    else:
        addr = Address(name, CONTRACT)
    if not addr.is_contract:
        raise ParseError(f"{name} is declared as an account")
    return Contract(addr, table)


def parse_stmt(text: str, params=(), addresses=None) -> Stmt:
    p = _Parser("{" + text + "}", addresses)
    p.params = frozenset(params)
    body = p.block()
    p.take(kind="eof")
    return body


def parse_expr(text: str, params=(), addresses=None) -> Expr:
    p = _Parser(text, addresses)
    p.params = frozenset(params)
    e = p.expr()
    p.take(kind="eof")
    return e


# -- printer ------------------------------------------------------------------

_PREC = {op: i for i, ops in enumerate(_BINARY) for op in ops}


def format_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Lit):
        v = e.value
        return f"({v})" if type(v) is int and v < 0 else encode_value(v)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Sender):
        return "sender"
    if isinstance(e, MsgValue):
        return "value"
    if isinstance(e, Lookup):
        return format_key(e.key)
    if isinstance(e, Not):
        return "!" + format_expr(e.operand, len(_BINARY))
    if isinstance(e, Neg):
        return "-" + format_expr(e.operand, len(_BINARY))
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # left-assoc: right operand binds one level tighter
        right_prec = p + 1
        text = f"{format_expr(e.left, p if p != 2 else 3)} {e.op} {format_expr(e.right, right_prec)}"
        return f"({text})" if p < prec else text
    raise TypeError(e)


def format_key(k: KeyExpr) -> str:
    return k.base + "".join(f"[{format_expr(i)}]" for i in k.indices)


def _flatten(s: Stmt):
    while isinstance(s, Seq):
        yield from _flatten(s.first)
        s = s.second
    yield s


def format_stmt(s: Stmt, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(s, Seq):
        return ";\n".join(format_stmt(x, indent) for x in _flatten(s))
    if isinstance(s, Skip):
        return pad + "skip"
    if isinstance(s, Throw):
        return pad + "throw"
    if isinstance(s, Assign):
        return f"{pad}{format_key(s.key)} := {format_expr(s.expr)}"
    if isinstance(s, Send):
        return f"{pad}send({format_expr(s.amount)}, {format_expr(s.recipient)})"
    if isinstance(s, If):
        out = f"{pad}if {format_expr(s.cond)} then {{\n{format_stmt(s.then, indent + 1)}\n{pad}}}"
        if s.orelse != Skip():
            out += f" else {{\n{format_stmt(s.orelse, indent + 1)}\n{pad}}}"
        return out
    raise TypeError(s)


def format_contract(c: Contract) -> str:
    lines = [f"contract {c.name} {{"]
    for f in c.functions.values():
        lines.append(f"  fun {f.name}({', '.join(f.params)}) {{")
        lines.append(format_stmt(f.body, 2))
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- interpreter --------------------------------------------------------------

class Failure(Exception):
    """Evaluation error; the enclosing statement's result is undefined."""


class Bottom(Exception):
    """Undefined statement result (throw, failed send, evaluation error)."""


class Frame:
    """Execution context: snapshot plus a buffer of writes made so far.

    ``writes`` keeps every assigned or balance-adjusted key, including writes
    that leave the value unchanged.
    """

    __slots__ = ("base", "writes")

    def __init__(self, base, writes=None):
        self.base = base
        self.writes = {} if writes is None else writes

    def get(self, q: QualifiedKey):
        if q in self.writes:
            return self.writes[q]
        return self.base.get(q)

    def set(self, q: QualifiedKey, v: Value):
        self.writes[q] = v

    def balance(self, a: Address) -> int:
        if a not in self.base:
            raise Failure(f"unknown address {a}")
        return self.get(balance_key(a))

    def transfer(self, src: Address, dst: Address, n: int):
        self.set(balance_key(src), self.balance(src) - n)
        self.set(balance_key(dst), self.balance(dst) + n)

    def state(self):
        return self.base.apply(self.writes)


def _int(v) -> int:
    if type(v) is not int:
        raise Failure(f"expected integer, got {v!r}")
    return v


def _bool(v) -> bool:
    if type(v) is not bool:
        raise Failure(f"expected boolean, got {v!r}")
    return v


def key_of(k: KeyExpr, frame: Frame, env, self_addr: Address) -> QualifiedKey:
    idx = tuple(eval_in(i, frame, env, self_addr) for i in k.indices)
    return QualifiedKey(self_addr, CompositeKey(k.base, idx))


def eval_in(e: Expr, frame: Frame, env, self_addr: Address) -> Value:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Lookup):
        v = frame.get(key_of(e.key, frame, env, self_addr))
        # unbound keys read as 0, mirroring Solidity mapping defaults
        return 0 if v is None else v
    if isinstance(e, Param):
        try:
            return env[e.name]
        except KeyError:
            raise Failure(f"unbound parameter {e.name}") from None
    if isinstance(e, Sender):
        return env["sender"]
    if isinstance(e, MsgValue):
        return env["value"]
    if isinstance(e, Not):
        return not _bool(eval_in(e.operand, frame, env, self_addr))
    if isinstance(e, Neg):
        return -_int(eval_in(e.operand, frame, env, self_addr))
    if isinstance(e, BinOp):
        op = e.op
        left = eval_in(e.left, frame, env, self_addr)
        if op == "&&":
            return _bool(left) and _bool(eval_in(e.right, frame, env, self_addr))
        if op == "||":
            return _bool(left) or _bool(eval_in(e.right, frame, env, self_addr))
        right = eval_in(e.right, frame, env, self_addr)
        if op == "==":
            return same_value(left, right)
        if op == "!=":
            return not same_value(left, right)
        a, b = _int(left), _int(right)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise Failure(f"unknown operator {op}")
    raise TypeError(e)


def exec_in(s: Stmt, frame: Frame, env, self_addr: Address) -> None:
    """Run ``s`` for its effect on ``frame``; raise :class:`Bottom` on error."""
    try:
        _exec(s, frame, env, self_addr)
    except Failure as exc:
        raise Bottom(str(exc)) from exc


def _exec(s: Stmt, frame: Frame, env, self_addr: Address) -> None:
    if isinstance(s, Seq):
        _exec(s.first, frame, env, self_addr)
        _exec(s.second, frame, env, self_addr)
    elif isinstance(s, Assign):
        q = key_of(s.key, frame, env, self_addr)
        frame.set(q, eval_in(s.expr, frame, env, self_addr))
    elif isinstance(s, If):
        branch = s.then if _bool(eval_in(s.cond, frame, env, self_addr)) else s.orelse
        _exec(branch, frame, env, self_addr)
    elif isinstance(s, Send):
        n = _int(eval_in(s.amount, frame, env, self_addr))
        to = eval_in(s.recipient, frame, env, self_addr)
        if not isinstance(to, Address):
            raise Failure(f"send recipient is not an address: {to!r}")
        if n < 0:
            raise Failure("negative send amount")
        if frame.balance(self_addr) < n:
            raise Bottom(f"{self_addr} cannot send {n}")
        frame.transfer(self_addr, to, n)
    elif isinstance(s, Skip):
        pass
    elif isinstance(s, Throw):
        raise Bottom("throw")
    else:
        raise TypeError(s)


def eval_expr(e: Expr, sigma, rho, self_addr: Address) -> Value:
    """Evaluate ``e`` in state ``sigma``; raises :class:`Failure`."""
    return eval_in(e, Frame(sigma), rho, self_addr)


def exec_stmt(s: Stmt, sigma, rho, self_addr: Address):
    """Statement semantics: the final state, or ``None`` when undefined."""
    frame = Frame(sigma)
    try:
        exec_in(s, frame, rho, self_addr)
    except Bottom:
        return None
    return frame.state()


def make_env(fun: FunctionDef, sender: Address, value: int, args) -> dict:
    if len(args) != len(fun.params):
        raise Failure(f"{fun.name} expects {len(fun.params)} arguments, got {len(args)}")
    env = dict(zip(fun.params, args))
    env["sender"] = sender
    env["value"] = value
    return env


__all__ = [
    "ACCOUNT", "ACCOUNT_FUNCTION", "ArityError", "Assign", "BinOp", "Bottom", "Contract",
    "Failure", "Frame", "FunctionDef", "If", "KeyExpr", "Lit", "Lookup", "MsgValue",
    "Neg", "Not", "Param", "ParseError", "Send", "Sender", "Seq", "Skip", "Throw",
    "account_contract", "eval_expr", "exec_stmt", "format_contract", "format_expr",
    "format_stmt", "parse_contract", "parse_expr", "parse_stmt", "require", "seq",
]

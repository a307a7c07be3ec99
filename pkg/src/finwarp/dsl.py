"""Expression DSL for metric functions of (x0, r, s, z) and named parameters.

Grammar (EBNF, whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          # right-associative
    atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Precedence: '^' > unary '-' > '*' '/' > '+' '-'.  IDENT is a reserved
variable (x0, r, s, z), a declared parameter, or one of the functions
sqrt, exp, log, arctan, sin, cos.  There is no implicit multiplication.

Expressions evaluate over plain floats (`eval_value`) or over jets
(`eval_jet`); constant subtrees stay scalar in the jet path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

from . import jets
from .errors import (
    DivisionByZero,
    DomainError,
    DslSyntaxError,
    InvalidFamilyParameter,
    UnknownIdentifier,
)

RESERVED_VARIABLES = ("x0", "r", "s", "z")
FUNCTIONS = jets.ELEMENTARY_FUNCTIONS


# --- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


Expression = Union[Num, Var, Param, Neg, BinOp, Call]
ParameterEnv = Mapping[str, float]


# --- tokenizer / parser ---------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | lparen | rparen | end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    out = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise DslSyntaxError(f"bad number literal {lit!r}", i) from None
            out.append(_Token("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            out.append(_Token("ident", text[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            out.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            out.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            out.append(_Token("rparen", c, i))
            i += 1
            continue
        raise DslSyntaxError(f"unexpected character {c!r}", i)
    out.append(_Token("end", "", n))
    return out


class _Parser:
    def __init__(self, text: str, params: frozenset[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.params = params

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise DslSyntaxError(f"expected {want!r}, found {tok.text or 'end of input'!r}", tok.offset)
        return self.advance()

    def parse(self) -> Expression:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise DslSyntaxError(f"unexpected trailing input {tok.text!r}", tok.offset)
        return e

    def expr(self) -> Expression:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expression:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "lparen":
            node = self.expr()
            self.expect("rparen")
            return node
        if tok.kind == "ident":
            name = tok.text
            if self.peek().kind == "lparen":
                if name not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {name!r} at offset {tok.offset}")
                self.advance()
                arg = self.expr()
                self.expect("rparen")
                return Call(name, arg)
            if name in RESERVED_VARIABLES:
                return Var(name)
            if name in self.params:
                return Param(name)
            raise UnknownIdentifier(f"undeclared identifier {name!r} at offset {tok.offset}")
        raise DslSyntaxError(f"expected a value, found {tok.text or 'end of input'!r}", tok.offset)


def parse(text: str, params: ParameterEnv | frozenset[str] | tuple[str, ...] = ()) -> Expression:
    """Parse expression text into an AST; `params` declares the legal parameter names."""
    names = frozenset(params.keys() if isinstance(params, Mapping) else params)
    for bad in names & set(RESERVED_VARIABLES):
        raise InvalidFamilyParameter(f"parameter {bad!r} shadows a reserved variable")
    return _Parser(text, names).parse()


# --- printer --------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_string(e: Expression) -> str:
    """Render an AST back to parseable text (minimal parentheses)."""

    def prec_of(node: Expression) -> int:
        if isinstance(node, Num):
            return _PRECEDENCE["atom"] if node.value >= 0 else _PRECEDENCE["neg"]
        if isinstance(node, (Var, Param, Call)):
            return _PRECEDENCE["atom"]
        if isinstance(node, Neg):
            return _PRECEDENCE["neg"]
        return _PRECEDENCE[node.op]

    def go(node: Expression, min_prec: int) -> str:
        p = prec_of(node)
        if isinstance(node, Num):
            text = repr(node.value)
        elif isinstance(node, (Var, Param)):
            text = node.name
        elif isinstance(node, Call):
            text = f"{node.fn}({go(node.arg, 0)})"
        elif isinstance(node, Neg):
            text = f"-{go(node.arg, p)}"
        elif node.op == "^":
            # right-associative: parenthesize an equal-precedence left child
            text = f"{go(node.left, p + 1)}^{go(node.right, p)}"
        else:
            text = f"{go(node.left, p)}{node.op}{go(node.right, p + 1)}"
        return f"({text})" if p < min_prec else text

    return go(e, 0)


def substitute(e: Expression, mapping: Mapping[str, Expression]) -> Expression:
    """Replace Param references by expression subtrees (used to compose families)."""
    if isinstance(e, Param) and e.name in mapping:
        return mapping[e.name]
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return e


def free_variables(e: Expression) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, (Num, Param)):
        return frozenset()
    if isinstance(e, Neg):
        return free_variables(e.arg)
    if isinstance(e, Call):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


# --- evaluation -------------------------------------------------------------------


def _scalar_apply(fn: str, x: float) -> float:
    if fn == "sqrt":
        if x <= 0.0:
            raise DomainError(f"sqrt of non-positive value {x!r}")
        return math.sqrt(x)
    if fn == "log":
        if x <= 0.0:
            raise DomainError(f"log of non-positive value {x!r}")
        return math.log(x)
    if fn == "exp":
        return math.exp(x)
    if fn == "arctan":
        return math.atan(x)
    if fn == "sin":
        return math.sin(x)
    if fn == "cos":
        return math.cos(x)
    raise UnknownIdentifier(f"unknown function {fn!r}")


def _pow_any(base, expo):
    """Power with the DSL's rules: integer -> repeated multiplication,
    non-integer -> exp(p*log(base)), jet exponent -> exp(b*log(a))."""
    if isinstance(expo, jets.Jet):
        log_base = jets.jet_apply("log", base) if isinstance(base, jets.Jet) else _scalar_apply("log", base)
        inner = expo * log_base
        return jets.jet_apply("exp", inner) if isinstance(inner, jets.Jet) else math.exp(inner)
    p = float(expo)
    if p.is_integer():
        ip = int(p)
        if isinstance(base, jets.Jet):
            return base ** ip
        if ip < 0 and base == 0.0:
            raise DivisionByZero("0 raised to a negative power")
        return base ** ip
    if isinstance(base, jets.Jet):
        return jets.jet_apply("exp", float(p) * jets.jet_apply("log", base))
    return math.exp(p * _scalar_apply("log", base))


def _eval(e: Expression, env: Mapping[str, object], params: ParameterEnv):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnknownIdentifier(f"variable {e.name!r} not bound") from None
    if isinstance(e, Param):
        try:
            return float(params[e.name])
        except KeyError:
            raise UnknownIdentifier(f"parameter {e.name!r} not supplied") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, env, params)
    if isinstance(e, Call):
        x = _eval(e.arg, env, params)
        if isinstance(x, jets.Jet):
            return jets.jet_apply(e.fn, x)
        return _scalar_apply(e.fn, x)
    a = _eval(e.left, env, params)
    if e.op == "^":
        return _pow_any(a, _eval(e.right, env, params))
    b = _eval(e.right, env, params)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    # division
    if isinstance(b, jets.Jet):
        return a / b  # Jet.__truediv__ raises DivisionByZero on zero base
    if b == 0.0:
        raise DivisionByZero("division by zero")
    return a / b


def eval_jet(e: Expression, env: Mapping[str, jets.Jet], params: ParameterEnv = ()) -> jets.Jet:
    """Evaluate over jets; all variables the expression uses must be bound in env."""
    result = _eval(e, env, dict(params) if not isinstance(params, Mapping) else params)
    if isinstance(result, jets.Jet):
        return result
    space = next(iter(env.values())).space
    return jets.jet_const(space, float(result))


def eval_value(e: Expression, env: Mapping[str, float], params: ParameterEnv = ()) -> float:
    """Plain float evaluation (the order-0 path; also the finite-difference oracle target)."""
    result = _eval(e, env, dict(params) if not isinstance(params, Mapping) else params)
    return float(result)


# --- built-in families -------------------------------------------------------------


def builtin(name: str, **params) -> Expression:
    """Closed expression for a built-in metric function family."""
    if name == "euclidean":
        return parse("sqrt(z^2+1)")
    if name == "randers":
        c = float(params.get("c", 0.0))
        if not abs(c) < 1.0:
            raise InvalidFamilyParameter(f"randers drift must satisfy |c| < 1, got {c!r}")
        return BinOp("+", parse("sqrt(z^2+1)"), BinOp("*", Num(c), Var("z")))
    if name == "unicorn":
        from . import unicorn as _unicorn  # deferred; unicorn builds on this module

        return _unicorn.unicorn_phi(**params)
    raise InvalidFamilyParameter(f"unknown metric family {name!r}")

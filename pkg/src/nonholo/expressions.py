"""A small expression language for config files.

Grammar (whitespace-insensitive):

    expr    :  term (('+' | '-') term)*        left associative
    term    :  unary (('*' | '/') unary)*      left associative
    unary   :  '-' unary | power
    power   :  atom ['^' ['-'] digits]         integer exponents only
    atom    :  number | identifier | identifier '(' expr ')' | '(' expr ')'

Calls are restricted to sin, cos, exp, sqrt.  Identifiers must resolve to
declared variable or parameter names at parse time.  ``print_expression``
is a canonical printer; parsing its output reproduces the tree.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from . import autodiff as ad
from .errors import ParseError

FUNCTIONS = ("sin", "cos", "exp", "sqrt")
_FUNCTION_TABLE = {"sin": ad.sin, "cos": ad.cos, "exp": ad.exp,
                   "sqrt": ad.sqrt}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class Token:
    kind: str   # number | ident | op | lparen | rparen | end
    text: str
    pos: int


def _tokenize(text: str):
    tokens = []
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
            tokens.append(Token("number", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            tokens.append(Token("op", c, i))
            i += 1
            continue
        if c == "(":
            tokens.append(Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            tokens.append(Token("rparen", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, names):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.names = frozenset(names)

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, text=None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise ParseError(f"expected {text or kind}, found "
                             f"{tok.text or 'end of input'!r}", tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected trailing input {tok.text!r}",
                             tok.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        exponents = []
        while self.peek().kind == "op" and self.peek().text == "^":
            caret = self.advance()
            exponents.append(self.exponent(caret))
        if exponents:
            # integer exponents chain right-associatively: x^a^b = x^(a^b)
            combined = exponents[-1]
            for e in reversed(exponents[:-1]):
                combined = e ** combined
                if not isinstance(combined, int):
                    raise ParseError("chained exponent is not an integer",
                                     self.peek().pos)
            node = Pow(node, combined)
        return node

    def exponent(self, caret: Token) -> int:
        sign = 1
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            sign = -1
        tok = self.peek()
        if tok.kind != "number":
            raise ParseError("exponent must be an integer literal", tok.pos)
        if any(ch in tok.text for ch in ".eE"):
            raise ParseError(f"non-integer exponent {tok.text!r}", tok.pos)
        self.advance()
        return sign * int(tok.text)

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.peek().kind == "lparen":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}",
                                     tok.pos)
                self.advance()
                arg = self.expr()
                self.expect("rparen", ")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                raise ParseError(f"{tok.text!r} must be called with an "
                                 f"argument", tok.pos)
            if tok.text not in self.names:
                raise ParseError(f"unknown identifier {tok.text!r}", tok.pos)
            return Var(tok.text)
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen", ")")
            return node
        raise ParseError(f"expected a value, found "
                         f"{tok.text or 'end of input'!r}", tok.pos)


def parse_expression(text: str, names: Sequence[str]) -> Expr:
    """Parse ``text`` over the given variable/parameter names."""
    return _Parser(text, names).parse()


_PREC = {"+": 0, "-": 0, "*": 1, "/": 1, "neg": 2, "pow": 3, "atom": 4}


def _print(node: Expr, parent_prec: int, right_side: bool) -> str:
    if isinstance(node, Num):
        out, prec = repr(node.value), _PREC["atom"]
        if node.value < 0 or out.startswith("-"):
            prec = _PREC["neg"]
    elif isinstance(node, Var):
        out, prec = node.name, _PREC["atom"]
    elif isinstance(node, Call):
        out = f"{node.fn}({_print(node.arg, -1, False)})"
        prec = _PREC["atom"]
    elif isinstance(node, Neg):
        out = f"-{_print(node.child, _PREC['neg'], False)}"
        prec = _PREC["neg"]
    elif isinstance(node, Pow):
        out = f"{_print(node.base, _PREC['pow'] + 1, False)}^{node.exponent}"
        prec = _PREC["pow"]
    elif isinstance(node, BinOp):
        prec = _PREC[node.op]
        left = _print(node.left, prec, False)
        right = _print(node.right, prec + 1, True)
        out = f"{left} {node.op} {right}"
    else:
        raise TypeError(f"not an expression node: {node!r}")
    if prec < parent_prec:
        return f"({out})"
    return out


def print_expression(node: Expr) -> str:
    """Canonical text form; parsing it reproduces the tree."""
    return _print(node, -1, False)


def evaluate(node: Expr, env: Mapping[str, object]):
    """Evaluate over an environment of scalars (floats or duals)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.child, env)
    if isinstance(node, Pow):
        return evaluate(node.base, env) ** node.exponent
    if isinstance(node, Call):
        return _FUNCTION_TABLE[node.fn](evaluate(node.arg, env))
    if isinstance(node, BinOp):
        left = evaluate(node.left, env)
        right = evaluate(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    raise TypeError(f"not an expression node: {node!r}")


def compile_vector(asts: Sequence[Expr], names: Sequence[str],
                   constants: Mapping[str, float] = None):
    """Closure evaluating a list of expressions over ordered variables."""
    constants = dict(constants or {})
    names = list(names)

    def fn(xs):
        env = dict(constants)
        env.update(zip(names, xs))
        return [evaluate(a, env) for a in asts]

    return fn

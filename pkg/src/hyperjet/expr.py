"""Analytic scalar expression DSL.

Grammar (EBNF)::

    expr     = term , { ("+" | "-") , term } ;
    term     = factor , { ("*" | "/") , factor } ;
    factor   = [ "-" | "+" ] , power ;
    power    = atom , [ "^" , [ "-" ] , integer ] ;
    atom     = number | variable | call | "(" , expr , ")" ;
    call     = ident , "(" , expr , ")" ;          (* exp log sin cos sqrt *)
    variable = "x" , integer ;                     (* x0 .. x_{dim-1} *)
    number   = integer | integer "." digits ;      (* decimals are exact *)

Parse errors carry the byte offset of the offending token.  Printing a tree
and re-parsing it reproduces the tree exactly (structural identity).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple, Union

from .jets import Jet

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*', '/'
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, BinOp, Neg, Pow, Call]


def free_vars(e: Expr) -> set:
    if isinstance(e, Num):
        return set()
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, Pow):
        return free_vars(e.base)
    if isinstance(e, Call):
        return free_vars(e.arg)
    raise TypeError(f"not an Expr: {e!r}")


def print_expr(e: Expr) -> str:
    """Serialize with explicit parentheses so parsing is structurally exact."""
    if isinstance(e, Num):
        v = e.value
        if v.denominator == 1:
            return str(v.numerator) if v >= 0 else f"({v.numerator})"
        s = f"{v.numerator}/{v.denominator}"
        return f"({s})"
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, BinOp):
        return f"({print_expr(e.left)} {e.op} {print_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(-{print_expr(e.operand)})"
    if isinstance(e, Pow):
        exp = str(e.exponent) if e.exponent >= 0 else f"-{-e.exponent}"
        return f"{print_expr(e.base)}^{exp}"
    if isinstance(e, Call):
        return f"{e.func}({print_expr(e.arg)})"
    raise TypeError(f"not an Expr: {e!r}")


# --------------------------------------------------------------------------
# Tokenizer / recursive-descent parser
# --------------------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(source: str):
    tokens = []  # (kind, text, offset); kind in {num, ident, op}
    data = source.encode("utf-8").decode("utf-8")  # validate UTF-8 round trip
    i, n = 0, len(data)
    while i < n:
        ch = data[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (data[j].isdigit() or (data[j] == "." and not seen_dot)):
                if data[j] == ".":
                    seen_dot = True
                j += 1
            text = data[i:j]
            if text == ".":
                raise ParseError("stray '.'", i)
            tokens.append(("num", text, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (data[j].isalnum() or data[j] == "_"):
                j += 1
            tokens.append(("ident", data[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int) -> None:
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.source.encode("utf-8")))
        self.pos += 1
        return tok

    def _expect_op(self, op: str):
        tok = self._next()
        if tok[0] != "op" or tok[1] != op:
            raise ParseError(f"expected {op!r}, found {tok[1]!r}", tok[2])

    def parse(self) -> Expr:
        e = self.expr()
        tok = self._peek()
        if tok is not None:
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])
        return e

    def expr(self) -> Expr:
        node = self.term()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "+-":
                self._next()
                node = BinOp(tok[1], node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "*/":
                self._next()
                node = BinOp(tok[1], node, self.factor())
            else:
                return node

    def factor(self) -> Expr:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] in "+-":
            self._next()
            inner = self.factor()
            return inner if tok[1] == "+" else Neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self._next()
            sign = 1
            tok2 = self._peek()
            if tok2 and tok2[0] == "op" and tok2[1] == "-":
                self._next()
                sign = -1
            tok3 = self._next()
            if tok3[0] != "num" or "." in tok3[1]:
                raise ParseError("exponent must be an integer", tok3[2])
            return Pow(base, sign * int(tok3[1]))
        return base

    def atom(self) -> Expr:
        tok = self._next()
        kind, text, offset = tok
        if kind == "num":
            return Num(Fraction(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self._expect_op(")")
            return node
        if kind == "ident":
            if text.startswith("x") and text[1:].isdigit():
                index = int(text[1:])
                if index >= self.dim:
                    raise ParseError(
                        f"variable x{index} exceeds chart dimension {self.dim}", offset
                    )
                return Var(index)
            if text in FUNCTIONS:
                self._expect_op("(")
                arg = self.expr()
                self._expect_op(")")
                return Call(text, arg)
            raise ParseError(f"unknown identifier {text!r}", offset)
        raise ParseError(f"unexpected token {text!r}", offset)


def parse_expr(source: str, dim: int | None = None) -> Expr:
    """Parse ``source``; when ``dim`` is given, variables are range-checked."""
    if dim is not None and dim < 0:
        raise ValueError("dim must be >= 0")
    bound = float("inf") if dim is None else dim
    return _Parser(source, bound).parse()


# --------------------------------------------------------------------------
# Jet evaluation
# --------------------------------------------------------------------------


def jet_eval(e: Expr, base: Tuple, degree: int, backend: str, dim: int | None = None) -> Jet:
    """Evaluate an expression as a jet at ``base`` through ``degree``."""
    if dim is None:
        dim = len(base)
    if len(base) != dim:
        raise ValueError("base point length must equal chart dimension")

    def go(node: Expr) -> Jet:
        if isinstance(node, Num):
            return Jet.constant(node.value, dim, degree, backend)
        if isinstance(node, Var):
            return Jet.variable(node.index, dim, degree, backend, base=base[node.index])
        if isinstance(node, Neg):
            return -go(node.operand)
        if isinstance(node, Pow):
            return go(node.base) ** node.exponent
        if isinstance(node, BinOp):
            left, right = go(node.left), go(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            return left / right
        if isinstance(node, Call):
            arg = go(node.arg)
            return getattr(arg, node.func)()
        raise TypeError(f"not an Expr: {node!r}")

    return go(e)

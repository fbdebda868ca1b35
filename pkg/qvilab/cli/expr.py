"""
Arithmetic expression language for model coefficients.

Grammar (precedence from loosest to tightest)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ['^' unary]          # right associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Evaluation is vectorized over numpy arrays in the environment.
"""

import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..core.errors import ExprEvalError, ExprSyntaxError, UnknownIdentifierError

Number = Union[float, np.ndarray]

VARIABLES: FrozenSet[str] = frozenset({"t", "x1", "x2", "e1", "e2", "y", "z1", "z2"})

# name -> (min arity, max arity or None for variadic)
FUNCTIONS: Dict[str, Tuple[int, Optional[int]]] = {
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "sin": (1, 1),
    "cos": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "pow": (2, 2),
}


# AST

@dataclass(frozen=True)
class Expr:
    """Base class of expression nodes; ``offset`` is the byte offset in the source."""
    offset: int

    def variables(self) -> FrozenSet[str]:
        return frozenset()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def variables(self) -> FrozenSet[str]:
        return frozenset({self.name})


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def variables(self) -> FrozenSet[str]:
        return self.operand.variables()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def variables(self) -> FrozenSet[str]:
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: Tuple[Expr, ...]

    def variables(self) -> FrozenSet[str]:
        out: FrozenSet[str] = frozenset()
        for arg in self.args:
            out = out | arg.variables()
        return out


# Tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Token:
    kind: str      # number | name | op | end
    text: str
    offset: int


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            tokens.append(Token("end", "", _byte_offset(text, pos)))
            return tokens
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos),
                                  {"number", "name", "(", "-"})
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), _byte_offset(text, match.start(kind))))
        pos = match.end()


# Parser

_ATOM_START = {"number", "name", "(", "-"}


class Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, text: str, variables: Iterable[str]):
        self.tokens = tokenize(text)
        self.pos = 0
        self.variables = frozenset(variables)

    @property
    def token(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _at(self, text: str) -> bool:
        return self.token.kind == "op" and self.token.text == text

    def _expect(self, text: str) -> Token:
        if not self._at(text):
            raise ExprSyntaxError(f"unexpected {self._describe()}", self.token.offset, {text})
        return self._advance()

    def _describe(self) -> str:
        return "end of input" if self.token.kind == "end" else f"'{self.token.text}'"

    def parse(self) -> Expr:
        tree = self.expr()
        if self.token.kind != "end":
            raise ExprSyntaxError(f"unexpected {self._describe()}", self.token.offset,
                                  {"+", "-", "*", "/", "^", "end of input"})
        return tree

    def expr(self) -> Expr:
        left = self.term()
        while self._at("+") or self._at("-"):
            op = self._advance()
            left = BinOp(op.offset, op.text, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self._at("*") or self._at("/"):
            op = self._advance()
            left = BinOp(op.offset, op.text, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self._at("-"):
            op = self._advance()
            return Neg(op.offset, self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._at("^"):
            op = self._advance()
            return BinOp(op.offset, "^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.token
        if tok.kind == "number":
            self._advance()
            return Num(tok.offset, float(tok.text))
        if tok.kind == "name":
            self._advance()
            if tok.text in FUNCTIONS:
                return self._call(tok)
            if tok.text not in self.variables:
                raise UnknownIdentifierError(tok.text, tok.offset)
            return Var(tok.offset, tok.text)
        if self._at("("):
            self._advance()
            inner = self.expr()
            self._expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected {self._describe()}", tok.offset, _ATOM_START)

    def _call(self, name: Token) -> Expr:
        self._expect("(")
        args = [self.expr()]
        while self._at(","):
            self._advance()
            args.append(self.expr())
        self._expect(")")
        low, high = FUNCTIONS[name.text]
        if len(args) < low or (high is not None and len(args) > high):
            arity = str(low) if high == low else f"at least {low}"
            raise ExprSyntaxError(f"{name.text} takes {arity} arguments, got {len(args)}", name.offset)
        return Call(name.offset, name.text, tuple(args))


def parse_expr(text: str, variables: Iterable[str] = VARIABLES) -> Expr:
    """
    Parse expression text.

    Args:
        text: Expression source
        variables: Identifiers accepted as variables

    Returns:
        Expression tree

    Raises:
        ExprSyntaxError: Malformed text (offset and expected tokens attached)
        UnknownIdentifierError: Name that is neither a variable nor a function
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, _ATOM_START)
    return Parser(text, variables).parse()


# Printer

def to_text(node: Expr) -> str:
    """Fully parenthesized source that parses back to an equivalent tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# Evaluator

def _check(value: Number, node: Expr, what: str = "non-finite result") -> Number:
    if not np.all(np.isfinite(value)):
        raise ExprEvalError(what, to_text(node))
    return value


def _eval(node: Expr, env: Mapping[str, Number]) -> Number:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        with np.errstate(all="ignore"):
            if node.op == "+":
                return _check(np.add(left, right), node)
            if node.op == "-":
                return _check(np.subtract(left, right), node)
            if node.op == "*":
                return _check(np.multiply(left, right), node)
            if node.op == "/":
                if np.any(np.asarray(right) == 0):
                    raise ExprEvalError("division by zero", to_text(node))
                return _check(np.divide(left, right), node)
            return _check(np.power(np.asarray(left, dtype=float), right), node, "power outside its domain")
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        with np.errstate(all="ignore"):
            if node.name == "log":
                if np.any(np.asarray(args[0]) <= 0):
                    raise ExprEvalError("log of a non-positive number", to_text(node))
                return np.log(args[0])
            if node.name == "sqrt":
                if np.any(np.asarray(args[0]) < 0):
                    raise ExprEvalError("sqrt of a negative number", to_text(node))
                return np.sqrt(args[0])
            if node.name == "min":
                out = args[0]
                for a in args[1:]:
                    out = np.minimum(out, a)
                return out
            if node.name == "max":
                out = args[0]
                for a in args[1:]:
                    out = np.maximum(out, a)
                return out
            if node.name == "pow":
                return _check(np.power(np.asarray(args[0], dtype=float), args[1]), node,
                              "power outside its domain")
            func = {"exp": np.exp, "abs": np.abs, "sin": np.sin, "cos": np.cos}[node.name]
            return _check(func(args[0]), node)
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr(node: Expr, env: Mapping[str, Number]) -> Number:
    """
    Evaluate a tree on scalars or arrays.

    Raises:
        KeyError: A variable of the tree is missing from env
        ExprEvalError: Domain error, with the offending subexpression
    """
    missing = node.variables() - set(env)
    if missing:
        raise KeyError(f"missing variables: {', '.join(sorted(missing))}")
    out = _eval(node, env)
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return float(out)
    return out if isinstance(out, np.ndarray) else float(out)

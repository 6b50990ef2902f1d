"""Money-function expressions: parser, printer, evaluator and separability.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ "^" unary ] ;            (* right associative *)
    atom    = number | variable | constant | "ln" "(" expr ")" | "(" expr ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
    variable = "l" digits ;                   (* l1 .. ln *)
    constant = letter { letter | digit } ;    (* [a-z][a-z0-9]*, not a variable *)

``a - b`` is stored as ``a + (-1)*b`` and ``a / b`` as ``a * b^(-1)``; there is
no subtraction or division node.  Power exponents must not reference variables.
Constants stay symbolic and are bound at evaluation time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    EvaluationDomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
    VariableIndexError,
)

__all__ = [
    "Num",
    "Const",
    "Var",
    "Add",
    "Mul",
    "Pow",
    "Log",
    "MoneyExpr",
    "parse_money_fn",
    "to_text",
    "evaluate",
    "eval_money_fn",
    "detect_separability",
    "additive_terms",
    "variables_of",
    "constants_of",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Add:
    left: "MoneyExpr"
    right: "MoneyExpr"


@dataclass(frozen=True)
class Mul:
    left: "MoneyExpr"
    right: "MoneyExpr"


@dataclass(frozen=True)
class Pow:
    base: "MoneyExpr"
    exponent: "MoneyExpr"


@dataclass(frozen=True)
class Log:
    arg: "MoneyExpr"


MoneyExpr = Union[Num, Const, Var, Add, Mul, Pow, Log]

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_IDENT_RE = re.compile(r"[a-z][a-z0-9]*\Z")
_VAR_RE = re.compile(r"l(\d+)\Z")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n_vars: int, constants):
        self.text = text
        self.n_vars = n_vars
        self.constants = constants
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.tok
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, self.text)
        self.advance()

    def parse(self) -> MoneyExpr:
        node = self.expr()
        kind, val, pos = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self) -> MoneyExpr:
        node = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.advance()[1]
            rhs = self.term()
            node = Add(node, rhs if op == "+" else _negate(rhs))
        return node

    def term(self) -> MoneyExpr:
        node = self.unary()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.advance()[1]
            rhs = self.unary()
            node = Mul(node, rhs if op == "*" else Pow(rhs, Num(-1.0)))
        return node

    def unary(self) -> MoneyExpr:
        kind, val, _ = self.tok
        if kind == "op" and val == "-":
            self.advance()
            return _negate(self.unary())
        if kind == "op" and val == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> MoneyExpr:
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            pos = self.advance()[2]
            exponent = self.unary()
            if variables_of(exponent):
                raise ExprSyntaxError(
                    "power exponent must not depend on variables", pos, self.text
                )
            if isinstance(exponent, Num) and not math.isfinite(exponent.value):
                raise ExprSyntaxError("power exponent must be finite", pos, self.text)
            return Pow(base, exponent)
        return base

    def atom(self) -> MoneyExpr:
        kind, val, pos = self.advance()
        if kind == "num":
            value = float(val)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"number {val!r} is not finite", pos, self.text)
            return Num(value)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if self.tok[0] == "op" and self.tok[1] == "(":
                if val != "ln":
                    raise UnknownIdentifierError(
                        f"unknown function {val!r} at position {pos}; only ln(...) is supported"
                    )
                self.advance()
                node = self.expr()
                self.expect(")")
                return Log(node)
            if val == "ln":
                raise ExprSyntaxError("ln must be followed by '('", pos + 2, self.text)
            if not _IDENT_RE.match(val):
                raise UnknownIdentifierError(
                    f"invalid identifier {val!r} at position {pos}; identifiers match [a-z][a-z0-9]*"
                )
            m = _VAR_RE.match(val)
            if m:
                index = int(m.group(1))
                if not 1 <= index <= self.n_vars:
                    raise VariableIndexError(
                        f"variable {val} at position {pos} is out of range: n_vars = {self.n_vars}"
                    )
                return Var(index)
            if self.constants is not None and val not in self.constants:
                raise UnknownIdentifierError(
                    f"unknown constant {val!r} at position {pos}"
                )
            return Const(val)
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos, self.text)


def _negate(node: MoneyExpr) -> MoneyExpr:
    if isinstance(node, Num):
        return Num(-node.value)
    return Mul(Num(-1.0), node)


def parse_money_fn(text: str, n_vars: int, constants: Mapping[str, float] | None = None) -> MoneyExpr:
    """Parse ``text`` into a :data:`MoneyExpr` over variables ``l1..l{n_vars}``.

    If ``constants`` is given, every named constant must be one of its keys.

    >>> parse_money_fn("c1*l1^2", 1)
    Mul(left=Const(name='c1'), right=Pow(base=Var(index=1), exponent=Num(value=2.0)))
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text if isinstance(text, str) else "")
    if n_vars < 1:
        raise ValueError(f"n_vars must be a positive integer, got {n_vars}")
    return _Parser(text, n_vars, constants).parse()


# -- printing ---------------------------------------------------------------

def _fmt_num(value: float) -> str:
    return repr(float(value))


def to_text(node: MoneyExpr) -> str:
    """Canonical text form; ``parse_money_fn(to_text(e), n)`` rebuilds ``e`` exactly."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return f"l{node.index}"
    if isinstance(node, Log):
        return f"ln({to_text(node.arg)})"
    if isinstance(node, Add):
        right = to_text(node.right)
        if isinstance(node.right, Add):
            right = f"({right})"
        return f"{to_text(node.left)} + {right}"
    if isinstance(node, Mul):
        left = to_text(node.left)
        right = to_text(node.right)
        if isinstance(node.left, Add):
            left = f"({left})"
        if isinstance(node.right, (Add, Mul)):
            right = f"({right})"
        return f"{left}*{right}"
    if isinstance(node, Pow):
        return f"{_atom_text(node.base)}^{_atom_text(node.exponent)}"
    raise TypeError(f"not a MoneyExpr node: {node!r}")


def _atom_text(node: MoneyExpr) -> str:
    text = to_text(node)
    if isinstance(node, (Const, Var, Log)) or (isinstance(node, Num) and node.value >= 0):
        return text
    return f"({text})"


# -- evaluation -------------------------------------------------------------

def evaluate(node: MoneyExpr, variables: Sequence, constants: Mapping[str, float]):
    """Vectorized evaluation; ``variables[i-1]`` holds values of ``l{i}``.

    Arrays broadcast against each other with the usual numpy rules.  The
    result has the broadcast shape of the variables it references (a plain
    float for variable-free subtrees).
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        try:
            return float(constants[node.name])
        except KeyError:
            raise UnknownIdentifierError(f"missing value for constant {node.name!r}") from None
    if isinstance(node, Var):
        if node.index > len(variables):
            raise VariableIndexError(
                f"l{node.index} referenced but only {len(variables)} coordinates given"
            )
        return variables[node.index - 1]
    if isinstance(node, Add):
        return evaluate(node.left, variables, constants) + evaluate(node.right, variables, constants)
    if isinstance(node, Mul):
        return evaluate(node.left, variables, constants) * evaluate(node.right, variables, constants)
    if isinstance(node, Log):
        arg = evaluate(node.arg, variables, constants)
        if np.any(np.asarray(arg) <= 0):
            raise EvaluationDomainError(f"ln of non-positive value in {to_text(node)}")
        return np.log(arg)
    if isinstance(node, Pow):
        base = evaluate(node.base, variables, constants)
        exponent = evaluate(node.exponent, variables, constants)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = np.power(np.asarray(base, dtype=float), exponent)
        if np.any(np.isnan(out)) and not np.any(np.isnan(np.asarray(base, dtype=float))):
            raise EvaluationDomainError(f"non-real power in {to_text(node)}")
        return out if np.ndim(out) else float(out)
    raise TypeError(f"not a MoneyExpr node: {node!r}")


def eval_money_fn(node: MoneyExpr, point: Sequence[float], constants: Mapping[str, float]) -> float:
    """Value of the money function at a single point."""
    n_used = max(variables_of(node), default=0)
    if len(point) < n_used:
        raise VariableIndexError(
            f"point has {len(point)} coordinates but the expression references l{n_used}"
        )
    return float(evaluate(node, [float(v) for v in point], constants))


# -- structure --------------------------------------------------------------

def variables_of(node: MoneyExpr) -> frozenset[int]:
    if isinstance(node, Var):
        return frozenset((node.index,))
    if isinstance(node, (Num, Const)):
        return frozenset()
    if isinstance(node, Log):
        return variables_of(node.arg)
    if isinstance(node, Pow):
        return variables_of(node.base) | variables_of(node.exponent)
    return variables_of(node.left) | variables_of(node.right)


def constants_of(node: MoneyExpr) -> frozenset[str]:
    if isinstance(node, Const):
        return frozenset((node.name,))
    if isinstance(node, (Num, Var)):
        return frozenset()
    if isinstance(node, Log):
        return constants_of(node.arg)
    if isinstance(node, Pow):
        return constants_of(node.base) | constants_of(node.exponent)
    return constants_of(node.left) | constants_of(node.right)


def additive_terms(node: MoneyExpr) -> list[MoneyExpr]:
    """Flatten nested ``Add`` nodes into the list of summands."""
    if isinstance(node, Add):
        return additive_terms(node.left) + additive_terms(node.right)
    return [node]


def _sum(terms: Sequence[MoneyExpr]) -> MoneyExpr:
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def detect_separability(node: MoneyExpr) -> list[frozenset[int]]:
    """Partition the referenced variables into additively independent groups.

    Summands that share a variable are merged (union-find over the flattened
    sum).  Groups come back sorted by their smallest index.
    """
    parent: dict[int, int] = {}

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for term in additive_terms(node):
        vs = sorted(variables_of(term))
        for v in vs:
            parent.setdefault(v, v)
        for v in vs[1:]:
            ra, rb = find(vs[0]), find(v)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, set[int]] = {}
    for v in parent:
        groups.setdefault(find(v), set()).add(v)
    return sorted((frozenset(g) for g in groups.values()), key=min)


def split_by_groups(node: MoneyExpr, groups: Sequence[frozenset[int]]) -> tuple[MoneyExpr | None, list[MoneyExpr]]:
    """Return (variable-free part, per-group sub-expressions) of an additive split."""
    const_terms: list[MoneyExpr] = []
    per_group: list[list[MoneyExpr]] = [[] for _ in groups]
    for term in additive_terms(node):
        vs = variables_of(term)
        if not vs:
            const_terms.append(term)
            continue
        for k, g in enumerate(groups):
            if vs <= g:
                per_group[k].append(term)
                break
        else:
            raise ValueError(f"term {to_text(term)} straddles separability groups")
    const = _sum(const_terms) if const_terms else None
    return const, [_sum(ts) for ts in per_group]

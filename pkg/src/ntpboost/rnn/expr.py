"""Transition-function expression trees.

The only internal operators are relu of a weighted sum, product, and
reciprocal of a weighted sum; leaves are constants and references to
incoming-neighbor values at the previous time step.  Indicator gadgets
built from these are exact on integer inputs because the machine
precision constant is a power of two.

Case selectors (sums of value*condition products) assume nonnegative
branch values, which holds for every graph this package constructs;
relu of such a sum is then exact.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ValidationError

MACHINE_EPS = 2.0**-32  # indicator window; inputs here are always integers

Term = tuple[float, "Expr"]


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Node(Expr):
    name: str


@dataclass(frozen=True)
class Relu(Expr):
    """relu(bias + sum coef * child)."""

    bias: float
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class Recip(Expr):
    """1 / (bias + sum coef * child); denominator must be nonzero."""

    bias: float
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class Prod(Expr):
    factors: tuple[Expr, ...]


# -- construction helpers ---------------------------------------------------


def const(v: float) -> Const:
    return Const(float(v))


def node(name) -> Expr:
    return name if isinstance(name, Expr) else Node(name)


def relu(bias: float, *terms: tuple[float, Expr]) -> Relu:
    return Relu(float(bias), tuple((float(c), node(e)) for c, e in terms))


def recip(bias: float, *terms: tuple[float, Expr]) -> Recip:
    return Recip(float(bias), tuple((float(c), node(e)) for c, e in terms))


def prod(*factors) -> Expr:
    fs = tuple(node(f) for f in factors)
    if len(fs) == 1:
        return fs[0]
    return Prod(fs)


def add(*terms: tuple[float, Expr], bias: float = 0.0) -> Relu:
    """Weighted sum of nonnegative quantities, realized as an exact relu."""
    return relu(bias, *terms)


def ind_eq(x, c: float) -> Expr:
    """1 if x == c else 0; exact for integer-valued x."""
    x = node(x)
    inv = 1.0 / MACHINE_EPS
    above = relu(-c, (1.0, x))
    below = relu(c, (-1.0, x))
    return relu(1.0, (-inv, above), (-inv, below))


def ind_le(x, c: float) -> Expr:
    """1 if x <= c else 0; exact for integer-valued x."""
    x = node(x)
    inv = 1.0 / MACHINE_EPS
    return relu(0.0, (inv, relu(c + MACHINE_EPS, (-1.0, x))), (-inv, relu(c, (-1.0, x))))


def ind_ge(x, c: float) -> Expr:
    """1 if x >= c else 0; exact for integer-valued x."""
    x = node(x)
    inv = 1.0 / MACHINE_EPS
    return relu(0.0, (inv, relu(MACHINE_EPS - c, (1.0, x))), (-inv, relu(-c, (1.0, x))))


def ind_between(x, lo: float, hi: float) -> Expr:
    return prod(ind_ge(x, lo), ind_le(x, hi))


def lnot(b: Expr) -> Expr:
    return relu(1.0, (-1.0, b))


def land(*bs) -> Expr:
    return prod(*bs)


def case_select(cases: list[tuple[Expr, Expr]], default: Expr) -> Expr:
    """First-match if/elif/else chain over {0,1} conditions.

    Evaluates as sum_i value_i * cond_i * prod_{j<i}(1 - cond_j) plus the
    default guarded by all negations.  Branch values must be nonnegative.
    """
    terms = []
    blockers: list[Expr] = []
    for cond, value in cases:
        terms.append((1.0, prod(value, cond, *blockers)))
        blockers.append(lnot(cond))
    terms.append((1.0, prod(default, *blockers)))
    return relu(0.0, *terms)


def hold(name: str) -> Expr:
    return Node(name)


# -- inspection -------------------------------------------------------------


def free_nodes(expr: Expr) -> set[str]:
    out: set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Node):
            out.add(e.name)
        elif isinstance(e, (Relu, Recip)):
            stack.extend(child for _, child in e.terms)
        elif isinstance(e, Prod):
            stack.extend(e.factors)
    return out


def depth(expr: Expr) -> int:
    if isinstance(expr, (Const, Node)):
        return 0
    if isinstance(expr, (Relu, Recip)):
        return 1 + max((depth(c) for _, c in expr.terms), default=0)
    if isinstance(expr, Prod):
        return 1 + max(depth(f) for f in expr.factors)
    raise ValidationError(f"unknown expression {expr!r}")


def substitute(expr: Expr, mapping: dict[str, str]) -> Expr:
    """Rename node references; names absent from the mapping are kept."""
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Node):
        return Node(mapping.get(expr.name, expr.name))
    if isinstance(expr, Relu):
        return Relu(expr.bias, tuple((c, substitute(e, mapping)) for c, e in expr.terms))
    if isinstance(expr, Recip):
        return Recip(expr.bias, tuple((c, substitute(e, mapping)) for c, e in expr.terms))
    if isinstance(expr, Prod):
        return Prod(tuple(substitute(f, mapping) for f in expr.factors))
    raise ValidationError(f"unknown expression {expr!r}")


def evaluate(expr: Expr, values: dict[str, float]) -> float:
    """Reference tree-walk evaluation (the engine compiles instead)."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Node):
        return values[expr.name]
    if isinstance(expr, Relu):
        acc = expr.bias
        for c, child in expr.terms:
            acc += c * evaluate(child, values)
        return acc if acc > 0.0 else 0.0
    if isinstance(expr, Recip):
        acc = expr.bias
        for c, child in expr.terms:
            acc += c * evaluate(child, values)
        if acc == 0.0:
            raise ZeroDivisionError("reciprocal of zero")
        return 1.0 / acc
    if isinstance(expr, Prod):
        acc = 1.0
        for f in expr.factors:
            acc *= evaluate(f, values)
        return acc
    raise ValidationError(f"unknown expression {expr!r}")


# -- s-expression serialization --------------------------------------------


def to_sexpr(expr: Expr) -> str:
    if isinstance(expr, Const):
        return f"(const {expr.value!r})"
    if isinstance(expr, Node):
        return f"(node {expr.name})"
    if isinstance(expr, (Relu, Recip)):
        head = "relu" if isinstance(expr, Relu) else "recip"
        parts = " ".join(f"({c!r} {to_sexpr(e)})" for c, e in expr.terms)
        return f"({head} {expr.bias!r}{' ' + parts if parts else ''})"
    if isinstance(expr, Prod):
        return "(prod " + " ".join(to_sexpr(f) for f in expr.factors) + ")"
    raise ValidationError(f"unknown expression {expr!r}")


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def from_sexpr(text: str) -> Expr:
    tokens = _tokenize(text)
    expr, rest = _parse(tokens)
    if rest:
        raise ValidationError(f"trailing tokens in expression: {rest[:5]}")
    return expr


def _parse(tokens: list[str]):
    if not tokens or tokens[0] != "(":
        raise ValidationError(f"expected '(' in expression near {tokens[:5]}")
    head = tokens[1]
    rest = tokens[2:]
    if head == "const":
        return Const(float(rest[0])), rest[2:]
    if head == "node":
        return Node(rest[0]), rest[2:]
    if head in ("relu", "recip"):
        bias = float(rest[0])
        rest = rest[1:]
        terms = []
        while rest and rest[0] == "(" and rest[1] != ")":
            if rest[1] in ("const", "node", "relu", "recip", "prod"):
                raise ValidationError("weighted term must be (coef expr)")
            coef = float(rest[1])
            child, rest2 = _parse(rest[2:])
            if not rest2 or rest2[0] != ")":
                raise ValidationError("unterminated weighted term")
            terms.append((coef, child))
            rest = rest2[1:]
        if not rest or rest[0] != ")":
            raise ValidationError(f"unterminated {head}")
        cls = Relu if head == "relu" else Recip
        return cls(bias, tuple(terms)), rest[1:]
    if head == "prod":
        factors = []
        while rest and rest[0] == "(":
            child, rest = _parse(rest)
            factors.append(child)
        if not rest or rest[0] != ")":
            raise ValidationError("unterminated prod")
        return Prod(tuple(factors)), rest[1:]
    raise ValidationError(f"unknown operator {head!r}")

"""Rational-function expressions over attribute positions and nulls.

Expressions are immutable trees compared structurally; nothing is simplified.
Evaluation is duck-typed: leaves are turned into numbers by ``num`` and then
combined with the ordinary Python operators, so the same code evaluates over
floats, exact ``Fraction``s, or the symbolic values used by the lifting and
oracle modules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Sequence, Set, Tuple

from .errors import DivByZero, MissingNull, UnboundVariable
from .model import Null


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True, slots=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, eq=True, slots=True)
class Attr(Expr):
    pos: int

    def __post_init__(self):
        if not isinstance(self.pos, int) or self.pos < 1:
            raise ValueError(f"attribute positions start at 1, got {self.pos!r}")


@dataclass(frozen=True, eq=True, slots=True)
class NullVar(Expr):
    null: int


@dataclass(frozen=True, eq=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr


BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Null):
        return NullVar(x.id)
    return Const(x)


def neg(e: Expr) -> Expr:
    """Structural negation: ``0 - e``, undoing an outer negation instead of stacking one.

    ``a - b`` negates to ``b - a``, which is exact in floating point.
    """
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Sub):
        if isinstance(e.left, Const) and e.left.value == 0.0:
            return e.right
        return Sub(e.right, e.left)
    return Sub(Const(0.0), e)


def free_vars(e: Expr) -> Tuple[Set[int], Set[int]]:
    """(attribute positions, null ids) occurring in ``e``."""
    attrs: Set[int] = set()
    nulls: Set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Attr):
            attrs.add(node.pos)
        elif isinstance(node, NullVar):
            nulls.add(node.null)
        elif not isinstance(node, Const):
            stack.append(node.left)
            stack.append(node.right)
    return attrs, nulls


def max_attr(e: Expr) -> int:
    attrs, _ = free_vars(e)
    return max(attrs, default=0)


def size(e: Expr) -> int:
    if isinstance(e, (Const, Attr, NullVar)):
        return 1
    return 1 + size(e.left) + size(e.right)


@dataclass(frozen=True)
class Assignment:
    attr_values: Mapping[int, Any]
    null_values: Mapping[Any, Any]


def compile_expr(e: Expr, num: Callable[[float], Any] = float) -> Callable[[Sequence[Any], Mapping[Any, Any]], Any]:
    """Turn ``e`` into ``f(row, nulls)``; ``row[pos-1]`` binds ``$pos``.

    ``nulls`` may be keyed by ``Null`` objects or by bare ids.
    """
    if isinstance(e, Const):
        value = num(e.value)
        return lambda row, nulls: value
    if isinstance(e, Attr):
        i = e.pos - 1

        def attr(row, nulls):
            try:
                return row[i]
            except (IndexError, KeyError):
                raise UnboundVariable(f"${i + 1} is not bound") from None

        return attr
    if isinstance(e, NullVar):
        key, nid = Null(e.null), e.null

        def null(row, nulls):
            try:
                return nulls[key]
            except KeyError:
                try:
                    return nulls[nid]
                except KeyError:
                    raise UnboundVariable(f"n{nid} is not bound") from None

        return null
    left = compile_expr(e.left, num)
    right = compile_expr(e.right, num)
    if isinstance(e, Add):
        return lambda row, nulls: left(row, nulls) + right(row, nulls)
    if isinstance(e, Sub):
        return lambda row, nulls: left(row, nulls) - right(row, nulls)
    if isinstance(e, Mul):
        return lambda row, nulls: left(row, nulls) * right(row, nulls)

    def div(row, nulls):
        d = right(row, nulls)
        if d == 0:
            raise DivByZero(f"division by zero in {to_text(e)}")
        return left(row, nulls) / d

    return div


class _AttrRow:
    """Adapter presenting a position->value mapping as a 1-based row."""

    __slots__ = ("m",)

    def __init__(self, m):
        self.m = m

    def __getitem__(self, i):
        return self.m[i + 1]


def eval_expr(e: Expr, a: Optional[Assignment] = None, num: Callable[[float], Any] = float):
    """Evaluate ``e`` under assignment ``a``; raises DivByZero or UnboundVariable."""
    if a is None:
        a = Assignment({}, {})
    return compile_expr(e, num)(_AttrRow(a.attr_values), a.null_values)


def substitute_nulls(e: Expr, v: Mapping[Any, float]) -> Expr:
    """Replace every null variable by the constant it takes under ``v``."""
    if isinstance(e, NullVar):
        if Null(e.null) in v:
            return Const(v[Null(e.null)])
        if e.null in v:
            return Const(v[e.null])
        raise MissingNull(f"valuation does not cover n{e.null}")
    if isinstance(e, (Const, Attr)):
        return e
    return type(e)(substitute_nulls(e.left, v), substitute_nulls(e.right, v))


def substitute_attrs(e: Expr, columns: Sequence[Expr]) -> Expr:
    """Replace ``$i`` by ``columns[i-1]``."""
    if isinstance(e, Attr):
        return columns[e.pos - 1]
    if isinstance(e, (Const, NullVar)):
        return e
    return type(e)(substitute_attrs(e.left, columns), substitute_attrs(e.right, columns))


def _num_text(x: float) -> str:
    text = repr(float(x))
    return text


def to_text(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Const):
        return _num_text(e.value)
    if isinstance(e, Attr):
        return f"${e.pos}"
    if isinstance(e, NullVar):
        return f"n{e.null}"
    return f"({to_text(e.left)} {BINARY[type(e)]} {to_text(e.right)})"

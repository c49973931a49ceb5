"""Rewrite extended queries into the core operator set.

Everything produced here uses only Base, Literal, Project, Select over
Eq / Lt / IsConst atoms, Product, UnionAll, ExceptAll, Apply and SumGroup
(plus Let / Ref, which are passed through). The evaluator runs the sugar
natively as well; tests check that both routes agree.
"""

from __future__ import annotations

from typing import Mapping

from .expr import Attr, Const, Div, Expr
from .query import (
    And,
    Apply,
    Arities,
    Avg,
    Cmp,
    Count,
    Dedup,
    Eq,
    ExceptAll,
    InInterval,
    Let,
    Lt,
    Max,
    Min,
    Not,
    Or,
    Product,
    Project,
    Query,
    Select,
    SumGroup,
    UnionAll,
    arity_check,
    children,
    cmp,
    is_core_condition,
)


def desugar(q: Query, schema: Mapping[str, int]) -> Query:
    """Core-only query equivalent to ``q`` over databases with this schema."""
    return _Desugarer(arity_check(q, schema)).run(q)


def _span(a, b):
    return tuple(range(a, b + 1))


class _Desugarer:
    def __init__(self, arities: Arities):
        self.arities = arities

    def run(self, q: Query) -> Query:
        if isinstance(q, Let):
            return Let(tuple((n, self.run(b)) for n, b in q.bindings), self.run(q.body))
        kids = children(q)
        if not kids:
            return q
        new = [self.run(k) for k in kids]
        n = self.arities[kids[0]]
        if isinstance(q, Select):
            return self.select(q.cond, new[0], n)
        if isinstance(q, Dedup):
            return dedup(new[0], n)
        if isinstance(q, Count):
            return SumGroup(q.groups, n + 1, Apply(Const(1.0), new[0]))
        if isinstance(q, Avg):
            return average(q.groups, q.column, new[0], n)
        if isinstance(q, (Min, Max)):
            return extremum(q.groups, q.column, new[0], smallest=isinstance(q, Min))
        if isinstance(q, (Product, UnionAll, ExceptAll)):
            if new[0] is q.left and new[1] is q.right:
                return q
            return type(q)(new[0], new[1])
        if new[0] is q.child:
            return q
        if isinstance(q, Project):
            return Project(q.positions, new[0])
        if isinstance(q, Apply):
            return Apply(q.fn, new[0])
        if isinstance(q, SumGroup):
            return SumGroup(q.groups, q.column, new[0])
        raise TypeError(f"unexpected node {q!r}")

    def select(self, c, child: Query, n: int) -> Query:
        """``child`` filtered by ``c``; ``child`` has arity ``n``."""
        if isinstance(c, Cmp):
            c = cmp(c.left, c.op, c.right)
        if is_core_condition(c):
            return Select(c, child)
        if isinstance(c, And):
            return self.select(c.right, self.select(c.left, child, n), n)
        if isinstance(c, Or):
            a = self.select(c.left, child, n)
            b = self.select(c.right, child, n)
            return ExceptAll(UnionAll(a, b), self.select(c.right, a, n))
        if isinstance(c, Not):
            return ExceptAll(child, self.select(c.inner, child, n))
        if isinstance(c, InInterval):
            inner = interval_condition(c)
            return child if inner is None else self.select(inner, child, n)
        if isinstance(c, Cmp):
            return compare(c.left, c.op, c.right, child, n)
        raise TypeError(f"not a condition: {c!r}")


def interval_condition(c: InInterval):
    """Conjunction of endpoint comparisons; ``None`` when the interval is everything."""
    x = Attr(c.i)
    parts = []
    spec = c.spec
    if spec.lo is not None:
        parts.append(Cmp(spec.lo, "<=" if spec.lo_closed else "<", x))
    if spec.hi is not None:
        parts.append(Cmp(x, "<=" if spec.hi_closed else "<", spec.hi))
    if not parts:
        return None
    return parts[0] if len(parts) == 1 else And(parts[0], parts[1])


def compare(f: Expr, op: str, g: Expr, child: Query, n: int) -> Query:
    """Selection on ``f op g`` by appending both sides as columns and comparing them."""
    if op == "!=":
        return ExceptAll(child, compare(f, "=", g, child, n))
    if op == "<=":
        return ExceptAll(child, compare(f, ">", g, child, n))
    if op == ">=":
        return ExceptAll(child, compare(f, "<", g, child, n))
    # column n+1 holds f, column n+2 holds g
    extended = Apply(g, Apply(f, child))
    atom = {"=": Eq(n + 1, n + 2), "<": Lt(n + 1, n + 2), ">": Lt(n + 2, n + 1)}[op]
    return Project(_span(1, n), Select(atom, extended))


def dedup(child: Query, n: int) -> Query:
    counted = SumGroup(_span(1, n), n + 1, Apply(Const(1.0), child))
    if n == 0:
        # grouping by nothing turns an empty input into (0); drop that row
        counted = Select(Lt(2, 1), Apply(Const(0.0), counted))
    return Project(_span(1, n), counted)


def _group_join(left: Query, right: Query, k: int) -> Query:
    """Product of two grouped results (k keys + 1 value each) matched on the keys."""
    joined: Query = Product(left, right)
    for i in range(1, k + 1):
        joined = Select(Eq(i, k + 1 + i), joined)
    return joined


def average(groups, column: int, child: Query, n: int) -> Query:
    k = len(groups)
    sums = SumGroup(groups, column, child)
    counts = SumGroup(groups, n + 1, Apply(Const(1.0), child))
    joined = _group_join(sums, counts, k)
    ratio = Apply(Div(Attr(k + 1), Attr(2 * k + 2)), joined)
    return Project(_span(1, k) + (2 * k + 3,), ratio)


def extremum(groups, column: int, child: Query, smallest: bool) -> Query:
    """Per-group minimum (or maximum): values with no strictly better partner in their group."""
    k = len(groups)
    values = Project(tuple(groups) + (column,), child)
    pairs = _group_join(values, values, k)
    better = Lt(2 * k + 2, k + 1) if smallest else Lt(k + 1, 2 * k + 2)
    beaten = Project(_span(1, k + 1), Select(better, pairs))
    return ExceptAll(dedup(values, k + 1), dedup(beaten, k + 1))

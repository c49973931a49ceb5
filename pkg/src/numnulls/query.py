"""Abstract syntax of the extended relational algebra and its arity checker.

Core operators: Base, Literal, Project, Select (Eq / Lt / IsConst atoms),
Product, UnionAll, ExceptAll, Apply, SumGroup, plus Let/Ref for sharing a
subquery by name. Count, Avg, Min, Max, Dedup and extended selection
conditions are sugar removed by :mod:`numnulls.desugar`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Tuple

from .errors import QueryTypeError
from .expr import Expr, max_attr

# -- conditions -------------------------------------------------------------


class Condition:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Eq(Condition):
    i: int
    j: int


@dataclass(frozen=True, slots=True)
class Lt(Condition):
    i: int
    j: int


@dataclass(frozen=True, slots=True)
class IsConst(Condition):
    i: int


CMP_OPS = ("=", "!=", "<", ">", "<=", ">=")


@dataclass(frozen=True, slots=True)
class Cmp(Condition):
    left: Expr
    op: str
    right: Expr

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True, slots=True)
class IntervalSpec:
    """Interval with RatExpr endpoints; ``None`` stands for -inf / +inf."""

    lo: Optional[Expr] = None
    hi: Optional[Expr] = None
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        # closedness is meaningless on an infinite side
        if self.lo is None and self.lo_closed:
            object.__setattr__(self, "lo_closed", False)
        if self.hi is None and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    @classmethod
    def closed(cls, lo, hi):
        from .expr import as_expr

        return cls(as_expr(lo), as_expr(hi), True, True)

    @classmethod
    def open(cls, lo, hi):
        from .expr import as_expr

        return cls(None if lo is None else as_expr(lo), None if hi is None else as_expr(hi), False, False)

    @classmethod
    def point(cls, c):
        return cls.closed(c, c)

    @classmethod
    def everything(cls):
        return cls()


IntervalTuple = Tuple[IntervalSpec, ...]


@dataclass(frozen=True, slots=True)
class InInterval(Condition):
    i: int
    spec: IntervalSpec


@dataclass(frozen=True, slots=True)
class And(Condition):
    left: Condition
    right: Condition


@dataclass(frozen=True, slots=True)
class Or(Condition):
    left: Condition
    right: Condition


@dataclass(frozen=True, slots=True)
class Not(Condition):
    inner: Condition


CORE_ATOMS = (Eq, Lt, IsConst)


def cmp(left: Expr, op: str, right: Expr) -> Condition:
    """Comparison that collapses to a core atom when both sides are attributes."""
    from .expr import Attr

    if isinstance(left, Attr) and isinstance(right, Attr):
        if op == "=":
            return Eq(left.pos, right.pos)
        if op == "<":
            return Lt(left.pos, right.pos)
        if op == ">":
            return Lt(right.pos, left.pos)
    return Cmp(left, op, right)


def cond_positions(c: Condition) -> int:
    """Largest attribute position mentioned by ``c`` (0 if none)."""
    if isinstance(c, (Eq, Lt)):
        return max(c.i, c.j)
    if isinstance(c, IsConst):
        return c.i
    if isinstance(c, Cmp):
        return max(max_attr(c.left), max_attr(c.right))
    if isinstance(c, InInterval):
        ends = [e for e in (c.spec.lo, c.spec.hi) if e is not None]
        return max([c.i] + [max_attr(e) for e in ends])
    if isinstance(c, (And, Or)):
        return max(cond_positions(c.left), cond_positions(c.right))
    if isinstance(c, Not):
        return cond_positions(c.inner)
    raise TypeError(f"not a condition: {c!r}")


def is_core_condition(c: Condition) -> bool:
    return isinstance(c, CORE_ATOMS)


# -- queries ----------------------------------------------------------------


class Query:
    __slots__ = ()

    def __str__(self):
        from .parser import to_text

        return to_text(self)


@dataclass(frozen=True, slots=True)
class Base(Query):
    name: str


@dataclass(frozen=True, slots=True)
class Literal(Query):
    """Inline bag whose entries are expressions; a bare null variable stays a null."""

    arity: int
    rows: Tuple[Tuple[Tuple[Expr, ...], int], ...]


@dataclass(frozen=True, slots=True)
class Project(Query):
    positions: Tuple[int, ...]
    child: Query


@dataclass(frozen=True, slots=True)
class Select(Query):
    cond: Condition
    child: Query


@dataclass(frozen=True, slots=True)
class Product(Query):
    left: Query
    right: Query


@dataclass(frozen=True, slots=True)
class UnionAll(Query):
    left: Query
    right: Query


@dataclass(frozen=True, slots=True)
class ExceptAll(Query):
    left: Query
    right: Query


@dataclass(frozen=True, slots=True)
class Apply(Query):
    fn: Expr
    child: Query


@dataclass(frozen=True, slots=True)
class SumGroup(Query):
    groups: Tuple[int, ...]
    column: int
    child: Query


@dataclass(frozen=True, slots=True)
class Count(Query):
    groups: Tuple[int, ...]
    child: Query


@dataclass(frozen=True, slots=True)
class Avg(Query):
    groups: Tuple[int, ...]
    column: int
    child: Query


@dataclass(frozen=True, slots=True)
class Min(Query):
    groups: Tuple[int, ...]
    column: int
    child: Query


@dataclass(frozen=True, slots=True)
class Max(Query):
    groups: Tuple[int, ...]
    column: int
    child: Query


@dataclass(frozen=True, slots=True)
class Dedup(Query):
    child: Query


@dataclass(frozen=True, slots=True)
class Let(Query):
    """Sequential bindings ``%name = query`` visible in later bindings and ``body``."""

    bindings: Tuple[Tuple[str, Query], ...]
    body: Query


@dataclass(frozen=True, slots=True)
class Ref(Query):
    name: str


UNARY = (Project, Select, Apply, SumGroup, Count, Avg, Min, Max, Dedup)
BINARY = (Product, UnionAll, ExceptAll)
SUGAR = (Count, Avg, Min, Max, Dedup)


def children(q: Query) -> Tuple[Query, ...]:
    if isinstance(q, UNARY):
        return (q.child,)
    if isinstance(q, BINARY):
        return (q.left, q.right)
    if isinstance(q, Let):
        return tuple(b for _, b in q.bindings) + (q.body,)
    return ()


def with_children(q: Query, kids) -> Query:
    """``q`` with its children replaced (same order as :func:`children`)."""
    kids = tuple(kids)
    if all(a is b for a, b in zip(kids, children(q))):
        return q
    if isinstance(q, UNARY):
        return replace(q, child=kids[0])
    if isinstance(q, BINARY):
        return replace(q, left=kids[0], right=kids[1])
    if isinstance(q, Let):
        return Let(tuple((n, k) for (n, _), k in zip(q.bindings, kids)), kids[-1])
    return q


def let_names(q: Query) -> set:
    out = set()
    stack = [q]
    while stack:
        node = stack.pop()
        if isinstance(node, Let):
            out.update(n for n, _ in node.bindings)
        stack.extend(children(node))
    return out


def node_count(q: Query) -> int:
    """Number of operator nodes (a literal counts as one node)."""
    total = 0
    stack = [q]
    while stack:
        node = stack.pop()
        total += 1
        stack.extend(children(node))
    return total


def base_names(q: Query) -> set:
    out = set()
    stack = [q]
    while stack:
        node = stack.pop()
        if isinstance(node, Base):
            out.add(node.name)
        stack.extend(children(node))
    return out


def is_core(q: Query) -> bool:
    stack = [q]
    while stack:
        node = stack.pop()
        if isinstance(node, SUGAR):
            return False
        if isinstance(node, Select) and not is_core_condition(node.cond):
            return False
        stack.extend(children(node))
    return True


# -- arity checking -----------------------------------------------------------


class Arities:
    """Output arity per node, keyed by node identity."""

    def __init__(self):
        self._by_id: Dict[int, int] = {}
        self._keep = []

    def set(self, node, arity):
        self._by_id[id(node)] = arity
        self._keep.append(node)

    def __getitem__(self, node) -> int:
        return self._by_id[id(node)]

    def __contains__(self, node):
        return id(node) in self._by_id


def _positions_ok(node, positions, arity):
    for p in positions:
        if not isinstance(p, int) or p < 1 or p > arity:
            raise QueryTypeError(f"position ${p} out of range 1..{arity} in {_describe(node)}")


def _describe(node) -> str:
    text = str(node)
    return text if len(text) <= 80 else text[:77] + "..."


def arity_check(q: Query, schema: Mapping[str, int]) -> Arities:
    """Annotate every node of ``q`` with its output arity or raise QueryTypeError."""
    arities = Arities()
    _check(q, dict(schema), {}, arities)
    return arities


def arity_of(q: Query, schema: Mapping[str, int]) -> int:
    return arity_check(q, schema)[q]


def _check(q, schema, env, arities) -> int:
    if isinstance(q, Base):
        if q.name not in schema:
            raise QueryTypeError(f"unknown relation {q.name!r}")
        n = schema[q.name]
    elif isinstance(q, Ref):
        if q.name not in env:
            raise QueryTypeError(f"unbound reference {q.name}")
        n = env[q.name]
    elif isinstance(q, Literal):
        for row, k in q.rows:
            if len(row) != q.arity:
                raise QueryTypeError(f"literal row {row} does not have arity {q.arity}")
            if not isinstance(k, int) or k < 1:
                raise QueryTypeError(f"literal multiplicity must be positive, got {k!r}")
            for e in row:
                if max_attr(e):
                    raise QueryTypeError("literal entries cannot reference attributes")
        n = q.arity
    elif isinstance(q, Let):
        local = dict(env)
        for name, bound in q.bindings:
            local[name] = _check(bound, schema, local, arities)
        n = _check(q.body, schema, local, arities)
    elif isinstance(q, BINARY):
        a = _check(q.left, schema, env, arities)
        b = _check(q.right, schema, env, arities)
        if isinstance(q, Product):
            n = a + b
        elif a != b:
            raise QueryTypeError(f"{type(q).__name__} of arities {a} and {b} in {_describe(q)}")
        else:
            n = a
    else:
        c = _check(q.child, schema, env, arities)
        if isinstance(q, Project):
            _positions_ok(q, q.positions, c)
            n = len(q.positions)
        elif isinstance(q, Select):
            p = cond_positions(q.cond)
            if p > c:
                raise QueryTypeError(f"condition refers to ${p} but input arity is {c} in {_describe(q)}")
            n = c
        elif isinstance(q, Apply):
            p = max_attr(q.fn)
            if p > c:
                raise QueryTypeError(f"function refers to ${p} but input arity is {c} in {_describe(q)}")
            n = c + 1
        elif isinstance(q, (SumGroup, Avg, Min, Max)):
            _positions_ok(q, q.groups + (q.column,), c)
            n = len(q.groups) + 1
        elif isinstance(q, Count):
            _positions_ok(q, q.groups, c)
            n = len(q.groups) + 1
        elif isinstance(q, Dedup):
            n = c
        else:
            raise QueryTypeError(f"unknown query node {q!r}")
    arities.set(q, n)
    return n

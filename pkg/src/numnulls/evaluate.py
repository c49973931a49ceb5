"""Bag-semantics evaluation, naive evaluation over nulls, and consistency counting.

One :class:`Engine` serves every value domain. Entries are combined with the
ordinary Python operators, so the engine runs over floats, exact
``Fraction``s, and the symbolic entries of :mod:`numnulls.condworld` and
:mod:`numnulls.oracle`. In naive mode a ``Null`` is an ordinary constant for
equality and grouping, and any ordering or arithmetic on it is an error.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from .errors import ConfigError, DivByZero, EvalError, NullComparison, QueryTypeError, UnboundVariable
from .expr import Attr, Const, Expr, NullVar, compile_expr, free_vars
from .model import Bag, IncompleteDatabase, Null, Row, apply_valuation, check_multiplicity
from .query import (
    And,
    Apply,
    Avg,
    Base,
    Cmp,
    Condition,
    Count,
    Dedup,
    Eq,
    ExceptAll,
    InInterval,
    IntervalSpec,
    IsConst,
    Let,
    Literal,
    Lt,
    Max,
    Min,
    Not,
    Or,
    Product,
    Project,
    Query,
    Ref,
    Select,
    SumGroup,
    UnionAll,
    arity_check,
)

MODES = ("complete", "naive")


def _add(counts: Dict[Row, int], row: Row, k: int):
    counts[row] = check_multiplicity(counts.get(row, 0) + k)


def _no_null_order(a, b):
    if type(a) is Null or type(b) is Null:
        raise NullComparison(f"cannot order {a!r} and {b!r}")


def bag_sum(pairs: Sequence[Tuple[Any, int]], zero):
    """Multiplicity-weighted sum of ``(value, multiplicity)`` pairs.

    Float sums are correctly rounded, hence independent of iteration order;
    other domains add exactly.
    """
    if not pairs:
        return zero
    if all(type(v) is float for v, _ in pairs):
        if all(m == 1 for _, m in pairs):
            return math.fsum(v for v, _ in pairs)
        return float(sum(Fraction(v) * m for v, m in pairs))
    total = None
    for v, m in pairs:
        if type(v) is Null:
            raise NullComparison(f"cannot sum over the null {v!r}")
        term = v if m == 1 else v * m
        total = term if total is None else total + term
    return total


class Engine:
    """Evaluator over one value domain.

    ``num`` turns a float constant into a domain value; ``naive`` permits nulls
    as entries; ``nulls`` binds null variables mentioned inside query
    expressions (normally none).
    """

    def __init__(self, num: Callable[[float], Any] = float, naive: bool = False,
                 nulls: Optional[Mapping[Any, Any]] = None):
        self.num = num
        self.naive = naive
        self.nulls = nulls or {}
        self._compiled: Dict[int, Tuple[Any, Any]] = {}

    # -- compiled pieces ---------------------------------------------------

    def _cached(self, node, build):
        hit = self._compiled.get(id(node))
        if hit is not None and hit[0] is node:
            return hit[1]
        fn = build(node)
        self._compiled[id(node)] = (node, fn)
        return fn

    def function(self, e: Expr) -> Callable[[Row], Any]:
        """``row -> value`` for an expression over the row's attributes."""
        return self._cached(e, self._build_function)

    def _build_function(self, e: Expr):
        nulls = self.nulls
        if isinstance(e, Attr):
            i = e.pos - 1
            return lambda row: row[i]
        if isinstance(e, Const):
            value = self.num(e.value)
            return lambda row: value
        f = compile_expr(e, self.num)
        attrs = sorted(p - 1 for p in free_vars(e)[0])

        def apply(row):
            for i in attrs:
                if type(row[i]) is Null:
                    raise NullComparison(f"arithmetic on the null {row[i]!r}")
            try:
                return f(row, nulls)
            except TypeError as exc:
                raise EvalError(f"cannot evaluate {e}: {exc}") from None

        return apply

    def predicate(self, c: Condition) -> Callable[[Row], bool]:
        return self._cached(c, self._build_predicate)

    def _build_predicate(self, c):
        if isinstance(c, Eq):
            i, j = c.i - 1, c.j - 1
            return lambda row: row[i] == row[j]
        if isinstance(c, Lt):
            i, j = c.i - 1, c.j - 1

            def lt(row):
                a, b = row[i], row[j]
                _no_null_order(a, b)
                return a < b

            return lt
        if isinstance(c, IsConst):
            i = c.i - 1
            return lambda row: type(row[i]) is not Null
        if isinstance(c, Cmp):
            f, g = self.function(c.left), self.function(c.right)
            return _comparator(c.op, f, g)
        if isinstance(c, InInterval):
            return self._interval_predicate(c.i - 1, c.spec)
        if isinstance(c, And):
            a, b = self.predicate(c.left), self.predicate(c.right)
            return lambda row: a(row) and b(row)
        if isinstance(c, Or):
            a, b = self.predicate(c.left), self.predicate(c.right)
            return lambda row: a(row) or b(row)
        if isinstance(c, Not):
            a = self.predicate(c.inner)
            return lambda row: not a(row)
        raise TypeError(f"not a condition: {c!r}")

    def _interval_predicate(self, i, spec: IntervalSpec):
        lo = None if spec.lo is None else self.function(spec.lo)
        hi = None if spec.hi is None else self.function(spec.hi)
        lo_closed, hi_closed = spec.lo_closed, spec.hi_closed

        def member(row):
            x = row[i]
            if lo is not None:
                a = lo(row)
                _no_null_order(a, x)
                if not (a <= x if lo_closed else a < x):
                    return False
            if hi is not None:
                b = hi(row)
                _no_null_order(x, b)
                if not (x <= b if hi_closed else x < b):
                    return False
            return True

        return member

    def literal_value(self, e: Expr):
        if isinstance(e, NullVar):
            return Null(e.null)
        if isinstance(e, Const):
            return self.num(e.value)
        try:
            return compile_expr(e, self.num)((), self.nulls)
        except UnboundVariable as exc:
            if self.naive:
                raise NullComparison(f"arithmetic on nulls in literal entry {e}") from None
            raise EvalError(f"literal entry {e} is not a constant: {exc}") from None

    # -- evaluation ----------------------------------------------------------

    def run(self, q: Query, relations: Mapping[str, Bag], env: Optional[Mapping[str, Bag]] = None) -> Bag:
        env = env or {}
        if isinstance(q, Base):
            try:
                return relations[q.name]
            except KeyError:
                raise QueryTypeError(f"unknown relation {q.name!r}") from None
        if isinstance(q, Ref):
            try:
                return env[q.name]
            except KeyError:
                raise QueryTypeError(f"unbound reference {q.name}") from None
        if isinstance(q, Literal):
            counts: Dict[Row, int] = {}
            for row, k in q.rows:
                _add(counts, tuple(self.literal_value(e) for e in row), k)
            return Bag.wrap(q.arity, counts)
        if isinstance(q, Let):
            local = dict(env)
            for name, bound in q.bindings:
                local[name] = self.run(bound, relations, local)
            return self.run(q.body, relations, local)
        if isinstance(q, (Product, UnionAll, ExceptAll)):
            return self.binary(q, self.run(q.left, relations, env), self.run(q.right, relations, env))
        return self.unary(q, self.run(q.child, relations, env))

    def binary(self, q: Query, left: Bag, right: Bag) -> Bag:
        if isinstance(q, Product):
            counts = {}
            for r1, k1 in left.counts.items():
                for r2, k2 in right.counts.items():
                    counts[r1 + r2] = check_multiplicity(k1 * k2)
            return Bag.wrap(left.arity + right.arity, counts)
        if isinstance(q, UnionAll):
            counts = dict(left.counts)
            for r, k in right.counts.items():
                _add(counts, r, k)
            return Bag.wrap(left.arity, counts)
        if isinstance(q, ExceptAll):
            counts = {}
            for r, k in left.counts.items():
                rest = k - right.counts.get(r, 0)
                if rest > 0:
                    counts[r] = rest
            return Bag.wrap(left.arity, counts)
        raise TypeError(f"not a binary operator: {q!r}")

    def unary(self, q: Query, bag: Bag) -> Bag:
        counts: Dict[Row, int] = {}
        if isinstance(q, Project):
            idx = [p - 1 for p in q.positions]
            for r, k in bag.counts.items():
                _add(counts, tuple(r[i] for i in idx), k)
            return Bag.wrap(len(idx), counts)
        if isinstance(q, Select):
            keep = self.predicate(q.cond)
            return Bag.wrap(bag.arity, {r: k for r, k in bag.counts.items() if keep(r)})
        if isinstance(q, Apply):
            f = self.function(q.fn)
            for r, k in bag.counts.items():
                _add(counts, r + (f(r),), k)
            return Bag.wrap(bag.arity + 1, counts)
        if isinstance(q, Dedup):
            return Bag.wrap(bag.arity, {r: 1 for r in bag.counts})
        if isinstance(q, (SumGroup, Count, Avg, Min, Max)):
            return self._aggregate(q, bag)
        raise TypeError(f"not a unary operator: {q!r}")

    def _aggregate(self, q, bag: Bag) -> Bag:
        gidx = [g - 1 for g in q.groups]
        col = None if isinstance(q, Count) else q.column - 1
        groups: Dict[Row, List[Tuple[Any, int]]] = {}
        for r, k in bag.counts.items():
            key = tuple(r[i] for i in gidx)
            groups.setdefault(key, []).append((r[col] if col is not None else None, k))
        zero = self.num(0.0)
        one = self.num(1.0)
        if not groups and not gidx and isinstance(q, (SumGroup, Count, Avg)):
            groups[()] = []
        out: Dict[Row, int] = {}
        for key, pairs in groups.items():
            if isinstance(q, SumGroup):
                value = bag_sum(pairs, zero)
                mult = 1
            elif isinstance(q, Count):
                value = bag_sum([(one, m) for _, m in pairs], zero)
                mult = 1
            elif isinstance(q, Avg):
                total = bag_sum(pairs, zero)
                n = bag_sum([(one, m) for _, m in pairs], zero)
                if n == 0:
                    raise DivByZero("average over an empty input")
                value = total / n
                mult = 1
            else:
                value = pairs[0][0]
                for v, _ in pairs[1:]:
                    _no_null_order(v, value)
                    if (v < value) if isinstance(q, Min) else (value < v):
                        value = v
                if len(pairs) == 1 and type(value) is Null:
                    raise NullComparison(f"cannot order the null {value!r}")
                mult = 1
            out[key + (value,)] = mult
        return Bag.wrap(len(gidx) + 1, out)


def _comparator(op, f, g):
    if op == "=":
        return lambda row: f(row) == g(row)
    if op == "!=":
        return lambda row: not (f(row) == g(row))

    def ordered(row):
        a, b = f(row), g(row)
        _no_null_order(a, b)
        if op == "<":
            return a < b
        if op == ">":
            return b < a
        if op == "<=":
            return not (b < a)
        return not (a < b)

    return ordered


def evaluate(q: Query, db: IncompleteDatabase, mode: str = "complete", exact: bool = False,
             desugared: bool = False) -> Bag:
    """Evaluate ``q`` over ``db``.

    ``complete`` mode requires a null-free database. ``exact`` evaluates over
    ``Fraction``s (results hold Fractions). ``desugared`` runs the core-only
    translation instead of the native sugar operators.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    schema = db.schema()
    arity_check(q, schema)
    if mode == "complete" and not db.is_complete():
        raise EvalError("complete-mode evaluation needs a database without nulls")
    if desugared:
        from .desugar import desugar

        q = desugar(q, schema)
    if exact:
        db = apply_valuation({}, db, exact=True) if mode == "complete" else _exact_naive(db)
    engine = Engine(num=Fraction if exact else float, naive=(mode == "naive"))
    return engine.run(q, db.relations)


def _exact_naive(db: IncompleteDatabase) -> IncompleteDatabase:
    relations = {
        name: Bag.wrap(bag.arity, {tuple(x if type(x) is Null else Fraction(x) for x in r): k
                                   for r, k in bag.counts.items()})
        for name, bag in db.relations.items()
    }
    return IncompleteDatabase(relations, db.annotations or None)


# -- interval tuples -------------------------------------------------------


class Grounded(NamedTuple):
    """An interval with numeric endpoints; ``None`` is an infinite side."""

    lo: Optional[Any]
    hi: Optional[Any]
    lo_closed: bool
    hi_closed: bool

    def contains(self, x) -> bool:
        if type(x) is Null:
            raise NullComparison(f"cannot test whether {x!r} lies in an interval")
        if self.lo is not None and not (self.lo <= x if self.lo_closed else self.lo < x):
            return False
        if self.hi is not None and not (x <= self.hi if self.hi_closed else x < self.hi):
            return False
        return True


def ground(spec: IntervalSpec, v: Mapping[Any, Any], num: Callable[[float], Any] = float) -> Grounded:
    """Evaluate the endpoints of ``spec`` under the valuation ``v``."""
    ends = []
    for e in (spec.lo, spec.hi):
        ends.append(None if e is None else compile_expr(e, num)((), v))
    return Grounded(ends[0], ends[1], spec.lo_closed, spec.hi_closed)


def ground_all(intervals: Sequence[IntervalSpec], v, arity: int, num=float) -> List[Grounded]:
    """Ground an interval tuple; the empty tuple stands for no constraint at any arity."""
    if not intervals and arity:
        return [Grounded(None, None, False, False)] * arity
    if len(intervals) != arity:
        raise QueryTypeError(f"interval tuple has {len(intervals)} entries, answer arity is {arity}")
    return [ground(s, v, num) for s in intervals]


def interval_nulls(intervals: Sequence[IntervalSpec]) -> set:
    out = set()
    for s in intervals:
        for e in (s.lo, s.hi):
            if e is not None:
                out |= free_vars(e)[1]
    return {Null(i) for i in out}


def count_grounded(grounded: Sequence[Grounded], bag: Bag) -> int:
    total = 0
    for row, k in bag.counts.items():
        if all(g.contains(x) for g, x in zip(grounded, row)):
            total += k
    return total


def count_consistent(intervals: Sequence[IntervalSpec], v: Mapping[Any, Any], bag: Bag) -> int:
    """Multiplicity-weighted number of tuples of ``bag`` lying in ``v(intervals)``."""
    return count_grounded(ground_all(intervals, v, bag.arity), bag)

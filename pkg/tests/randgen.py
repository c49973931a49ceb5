"""Seeded generators of small databases, queries and likelihood instances for the randomized suites."""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Tuple

from numnulls.approx import LikelihoodQuery
from numnulls.expr import Add, Attr, Const, Mul, NullVar, Sub
from numnulls.model import Bag, Exponential, IncompleteDatabase, Normal, Null, Uniform
from numnulls.query import (
    And,
    Apply,
    Avg,
    Base,
    Cmp,
    Count,
    Dedup,
    Eq,
    ExceptAll,
    InInterval,
    IntervalSpec,
    IsConst,
    Literal,
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
    arity_of,
    children,
)

SCHEMA = {"R": 2, "S": 1}
MAX_ARITY = 4


def random_dist(rng: random.Random):
    kind = rng.choice(("normal", "uniform", "exponential"))
    if kind == "normal":
        return Normal(rng.choice((-1.0, 0.0, 1.0, 2.0)), rng.choice((0.5, 1.0)))
    if kind == "uniform":
        low = rng.choice((-1.0, 0.0, 1.0))
        return Uniform(low, low + rng.choice((1.0, 2.0)))
    return Exponential(rng.choice((0.5, 1.0, 2.0)))


def random_db(rng: random.Random, max_nulls: int = 3, max_tuples: int = 5,
              complete: bool = False) -> IncompleteDatabase:
    """Relations R (arity 2) and S (arity 1) over small integers and up to ``max_nulls`` nulls."""
    pool = [] if complete else [Null(i) for i in range(1, rng.randint(1, max_nulls) + 1)]

    def entry():
        if pool and rng.random() < 0.4:
            return rng.choice(pool)
        return float(rng.randint(-1, 3))

    relations = {}
    for name, arity in SCHEMA.items():
        rows = [tuple(entry() for _ in range(arity)) for _ in range(rng.randint(0, max_tuples))]
        relations[name] = Bag(arity, rows)
    used = set()
    for bag in relations.values():
        used |= bag.nulls()
    return IncompleteDatabase(relations, {n: random_dist(rng) for n in sorted(used)})


def random_term(rng: random.Random, n: int, depth: int = 2):
    """Arithmetic over attributes 1..n and small constants (no division)."""
    if depth == 0 or rng.random() < 0.4:
        if n and rng.random() < 0.7:
            return Attr(rng.randint(1, n))
        return Const(float(rng.randint(-2, 3)))
    op = rng.choice((Add, Sub, Mul))
    return op(random_term(rng, n, depth - 1), random_term(rng, n, depth - 1))


def random_interval(rng: random.Random, nulls: List[Null] = ()) -> IntervalSpec:
    def bound():
        if rng.random() < 0.25:
            return None
        c = Const(float(rng.randint(-1, 4)) + rng.choice((0.0, 0.5)))
        if nulls and rng.random() < 0.3:
            return Add(NullVar(rng.choice(nulls).id), c)
        return c

    lo, hi = bound(), bound()
    return IntervalSpec(lo, hi, rng.random() < 0.5, rng.random() < 0.5)


def random_condition(rng: random.Random, n: int, sugar: bool, depth: int = 1):
    choices = ["eq", "lt", "const"]
    if sugar:
        choices += ["cmp", "interval"] + (["and", "or", "not"] if depth else [])
    kind = rng.choice(choices)
    i, j = rng.randint(1, n), rng.randint(1, n)
    if kind == "eq":
        return Eq(i, j)
    if kind == "lt":
        return Lt(i, j)
    if kind == "const":
        return IsConst(i)
    if kind == "cmp":
        op = rng.choice(("<", "<=", ">", ">=", "=", "!="))
        return Cmp(random_term(rng, n, 1), op, random_term(rng, n, 1))
    if kind == "interval":
        return InInterval(i, random_interval(rng))
    if kind == "not":
        return Not(random_condition(rng, n, sugar, depth - 1))
    op = And if kind == "and" else Or
    return op(random_condition(rng, n, sugar, depth - 1), random_condition(rng, n, sugar, depth - 1))


def _fit(rng: random.Random, q: Query, n_from: int, n_to: int) -> Query:
    """Project ``q`` (arity n_from ≥ 1) to arity n_to."""
    return Project(tuple(rng.randint(1, n_from) for _ in range(n_to)), q)


def random_query(rng: random.Random, depth: int, sugar: bool = True,
                 schema: Dict[str, int] = SCHEMA) -> Tuple[Query, int]:
    """A random query of nesting depth ≤ ``depth`` whose every subquery has arity 1..MAX_ARITY."""
    if depth == 0 or rng.random() < 0.15:
        if rng.random() < 0.1:
            arity = rng.randint(1, 2)
            rows = tuple((tuple(Const(float(rng.randint(0, 2))) for _ in range(arity)), rng.randint(1, 2))
                         for _ in range(rng.randint(0, 2)))
            return Literal(arity, rows), arity
        name = rng.choice(sorted(schema))
        return Base(name), schema[name]
    ops = ["project", "select", "product", "union", "except", "apply", "sum"]
    if sugar:
        ops += ["count", "avg", "min", "max", "dedup"]
    op = rng.choice(ops)
    child, n = random_query(rng, depth - 1, sugar, schema)
    if op == "project":
        k = rng.randint(1, min(n + 1, 3))
        return _fit(rng, child, n, k), k
    if op == "select":
        return Select(random_condition(rng, n, sugar), child), n
    if op == "product":
        right, m = random_query(rng, depth - 1, sugar, schema)
        if n + m > MAX_ARITY:
            right, m = _fit(rng, right, m, 1), 1
        if n + m > MAX_ARITY:
            child, n = _fit(rng, child, n, MAX_ARITY - 1), MAX_ARITY - 1
        return Product(child, right), n + m
    if op in ("union", "except"):
        right, m = random_query(rng, depth - 1, sugar, schema)
        right = right if m == n else _fit(rng, right, m, n)
        return (UnionAll if op == "union" else ExceptAll)(child, right), n
    if op == "apply":
        if n >= MAX_ARITY:
            return Apply(random_term(rng, MAX_ARITY - 1), _fit(rng, child, n, MAX_ARITY - 1)), MAX_ARITY
        return Apply(random_term(rng, n), child), n + 1
    if op == "dedup":
        return Dedup(child), n
    groups = tuple(sorted(rng.sample(range(1, n + 1), rng.randint(0, min(n, 2)))))
    column = rng.randint(1, n)
    if op == "sum":
        return SumGroup(groups, column, child), len(groups) + 1
    if op == "count":
        return Count(groups, child), len(groups) + 1
    if op == "avg":
        # grouping keeps Avg away from division by an empty count
        groups = groups or (rng.randint(1, n),)
        return Avg(groups, column, child), len(groups) + 1
    return (Min if op == "min" else Max)(groups, column, child), len(groups) + 1


def gen_query(rng: random.Random, depth: int, sugar: bool = True) -> Tuple[Query, int]:
    q, _ = random_query(rng, depth, sugar)
    return q, arity_of(q, SCHEMA)


def contains_lt(q: Query) -> bool:
    if isinstance(q, Select):
        c = q.cond
        if isinstance(c, Lt) or (isinstance(c, Cmp) and c.op == "<"):
            return True
    return any(contains_lt(k) for k in children(q))


def random_likelihood(rng: random.Random, db: IncompleteDatabase, depth: int = 3,
                      sugar: bool = True, cmp: Optional[str] = None) -> LikelihoodQuery:
    q, n = gen_query(rng, depth, sugar)
    nulls = db.sorted_nulls()
    intervals = () if rng.random() < 0.3 else tuple(random_interval(rng, nulls) for _ in range(n))
    return LikelihoodQuery(q, cmp or rng.choice("<=>"), rng.randint(0, 3), intervals)

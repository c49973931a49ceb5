"""Small instances with known answers, shared by tests, benchmarks and the CLI demo files."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

from .approx import LikelihoodQuery
from .condworld import ALWAYS, CondDB, ConditionalWorld, Entry
from .model import Bag, Distribution, Exponential, IncompleteDatabase, Normal, Null, Uniform
from .parser import parse
from .query import IntervalSpec


@dataclass(frozen=True)
class Fixture:
    name: str
    db: IncompleteDatabase
    likelihood: LikelihoodQuery
    target: Optional[float]


def one_null_below(dist: Distribution, name: str, target: float, bound: float = 1.0) -> Fixture:
    """R = {(⊥₁)}, event: σ_{$1<bound}(R) returns exactly one tuple."""
    db = IncompleteDatabase({"R": Bag(1, [(Null(1),)])}, {Null(1): dist})
    L = LikelihoodQuery(parse(f"select($1 < {bound!r}, R)"), "=", 1)
    return Fixture(name, db, L, target)


def exponential() -> Fixture:
    return one_null_below(Exponential(1.0), "exponential", 1.0 - math.exp(-1.0))


def uniform() -> Fixture:
    return one_null_below(Uniform(0.0, 2.0), "uniform", 0.5)


def two_uniform() -> Fixture:
    """Two independent Uniform(0,1) nulls, both below 0.5."""
    db = IncompleteDatabase(
        {"R": Bag(2, [(Null(1), Null(2))])},
        {Null(1): Uniform(0.0, 1.0), Null(2): Uniform(0.0, 1.0)},
    )
    L = LikelihoodQuery(parse("select($1 < 0.5 and $2 < 0.5, R)"), "=", 1)
    return Fixture("two-uniform", db, L, 0.25)


def intro_sum() -> Fixture:
    """SELECT $1, SUM($2) WHERE $2 >= 2 GROUP BY $1 over {(1,1),(1,⊥)}, ⊥ ~ Normal(2, 0.5).

    The sum lies in [2.5, 3.5] exactly when ⊥ does, so the target is Φ(3) − Φ(1).
    """
    db = IncompleteDatabase({"R": Bag(2, [(1.0, 1.0), (1.0, Null(1))])}, {Null(1): Normal(2.0, 0.5)})
    q = parse("sum[$1; $2](select($2 >= 2, R))")
    L = LikelihoodQuery(q, "=", 1, (IntervalSpec.everything(), IntervalSpec.closed(2.5, 3.5)))
    phi = NormalDist()
    return Fixture("intro-sum", db, L, phi.cdf(3.0) - phi.cdf(1.0))


def join_example() -> IncompleteDatabase:
    """R = {(1, ⊥)} and S = {(1, 2), (1, 3)}."""
    return IncompleteDatabase(
        {"R": Bag(2, [(1.0, Null(1))]), "S": Bag(2, [(1.0, 2.0), (1.0, 3.0)])},
        {Null(1): Normal(0.0, 1.0)},
    )


def split_world() -> ConditionalWorld:
    """One pair: A = {(⊥₁, 0), (⊥₁, ⊥₁), (⊥₃, ⊥₁ + ⊥₃)} under the always-true condition."""
    from .expr import NullVar

    rows = {
        (Entry.var(1), Entry.const(0.0)): 1,
        (Entry.var(1), Entry.var(1)): 1,
        (Entry.var(3), Entry(NullVar(1) + NullVar(3))): 1,
    }
    annotations = {Null(1): Normal(0.0, 1.0), Null(3): Normal(0.0, 1.0)}
    return ConditionalWorld((CondDB({"R": Bag.wrap(2, rows)}, ALWAYS),), annotations)


def split_database() -> IncompleteDatabase:
    """Three tuples whose columns compare as a constant, a single null, and two unrelated nulls."""
    return IncompleteDatabase(
        {"R": Bag(2, [(Null(1), 0.0), (Null(1), Null(1)), (Null(3), Null(4))])},
        {Null(1): Normal(0.0, 1.0), Null(3): Normal(0.0, 1.0), Null(4): Uniform(-1.0, 1.0)},
    )


CELL_DECOMPOSABLE = (exponential, uniform, two_uniform, intro_sum)

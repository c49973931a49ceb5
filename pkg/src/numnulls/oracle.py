"""Reference likelihoods for small instances, independent of the sampler.

``exact_likelihood_cells`` splits the null space into boxes on which the
event indicator is constant and adds up their probability masses. The
breakpoints are discovered by evaluating the query symbolically: every null
enters as an affine form, and each comparison between forms over a single
null records where its outcome can change. Evaluation is repeated at the
midpoints of the refined cells until no new breakpoint appears. Comparisons
that involve two nulls, or products of nulls, make the instance not
cell-decomposable.

``grid_likelihood`` is a quadrature fallback for up to three nulls on an
equal-probability grid, refined adaptively near the event boundary.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .approx import LikelihoodQuery, compare
from .errors import CellLimit, DivByZero, NotCellDecomposable, QueryTypeError, TooManyNulls
from .evaluate import Engine, count_grounded, ground_all, interval_nulls
from .model import Distribution, IncompleteDatabase, Null, apply_valuation

DEFAULT_CELL_LIMIT = 100_000
DEFAULT_RESOLUTION = 10_000
TRUNCATION = 1e-6
MAX_GRID_NULLS = 3


# -- symbolic affine values ------------------------------------------------------


class _Context:
    """The point being evaluated and the breakpoints discovered so far."""

    def __init__(self, point: Mapping[int, Fraction]):
        self.point = point
        self.found: Dict[int, Set[Fraction]] = {}


class Sym:
    """``coef · x_null + const`` (or a constant), with exact rational coefficients."""

    __slots__ = ("null", "coef", "const", "ctx")

    def __init__(self, null: Optional[int], coef: Fraction, const: Fraction, ctx: _Context):
        if null is not None and coef == 0:
            null = None
        self.null = null
        self.coef = coef if null is not None else Fraction(0)
        self.const = const
        self.ctx = ctx

    def _lift(self, x) -> "Sym":
        if isinstance(x, Sym):
            return x
        if isinstance(x, (int, float, Fraction)) and not isinstance(x, bool):
            return Sym(None, Fraction(0), Fraction(x), self.ctx)
        raise TypeError(f"cannot combine a symbolic value with {x!r}")

    def _combine(self, o: "Sym", sign: int) -> "Sym":
        if self.null is not None and o.null is not None and self.null != o.null:
            raise NotCellDecomposable(f"expression mixes n{self.null} and n{o.null}")
        null = self.null if self.null is not None else o.null
        return Sym(null, self.coef + sign * o.coef, self.const + sign * o.const, self.ctx)

    def __add__(self, other):
        return self._combine(self._lift(other), 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(self._lift(other), -1)

    def __rsub__(self, other):
        return self._lift(other)._combine(self, -1)

    def __neg__(self):
        return Sym(self.null, -self.coef, -self.const, self.ctx)

    def __mul__(self, other):
        o = self._lift(other)
        if self.null is not None and o.null is not None:
            raise NotCellDecomposable("product of two null-dependent values")
        if o.null is None:
            return Sym(self.null, self.coef * o.const, self.const * o.const, self.ctx)
        return Sym(o.null, o.coef * self.const, o.const * self.const, self.ctx)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o.null is not None:
            raise NotCellDecomposable("division by a null-dependent value")
        if o.const == 0:
            raise DivByZero("division by zero")
        return Sym(self.null, self.coef / o.const, self.const / o.const, self.ctx)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def value(self) -> Fraction:
        if self.null is None:
            return self.const
        return self.coef * self.ctx.point[self.null] + self.const

    def _sign_of_difference(self, other) -> int:
        d = self - self._lift(other)
        if d.null is not None:
            root = -d.const / d.coef
            self.ctx.found.setdefault(d.null, set()).add(root)
        v = d.value()
        return (v > 0) - (v < 0)

    def __lt__(self, other):
        return self._sign_of_difference(other) < 0

    def __le__(self, other):
        return self._sign_of_difference(other) <= 0

    def __gt__(self, other):
        return self._sign_of_difference(other) > 0

    def __ge__(self, other):
        return self._sign_of_difference(other) >= 0

    def __eq__(self, other):
        try:
            o = self._lift(other)
        except TypeError:
            return NotImplemented
        # equal as functions; a one-null crossing point is a breakpoint of measure zero
        same = self.null == o.null and self.coef == o.coef and self.const == o.const
        if not same:
            self._sign_of_difference(o)
        return same

    def __hash__(self):
        if self.null is None:
            return hash(self.const)
        return hash((self.null, self.coef, self.const))

    def __repr__(self):
        if self.null is None:
            return f"Sym({self.const})"
        return f"Sym({self.coef}*n{self.null} + {self.const})"


def _indicator(L: LikelihoodQuery, db: IncompleteDatabase, v, engine: Engine, arity: int) -> bool:
    answer = engine.run(L.q, apply_valuation(v, db).relations)
    return compare(count_grounded(ground_all(L.intervals, v, arity), answer), L.cmp, L.k)


def _prepare(L: LikelihoodQuery, db: IncompleteDatabase):
    db.require_annotated()
    arity = L.check(db.schema())
    extra = interval_nulls(L.intervals) - set(db.nulls())
    if extra:
        raise QueryTypeError(f"interval endpoints mention nulls not in the database: {sorted(extra)}")
    return arity, db.sorted_nulls()


# -- exact cells -------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    value: float
    mode: str
    uncertainty: float
    cells: int

    def to_json(self) -> Dict:
        return {"value": self.value, "mode": self.mode, "uncertainty": self.uncertainty, "cells": self.cells}


def _cell_point(d: Distribution, lo: float, hi: float) -> Fraction:
    """A point strictly inside (lo, hi): the conditional median when it is usable."""
    a, b = d.cdf(lo), d.cdf(hi)
    x = d.ppf((a + b) / 2) if b > a else math.nan
    if not (lo < x < hi) or not math.isfinite(x):
        if math.isinf(lo) and math.isinf(hi):
            x = 0.0
        elif math.isinf(lo):
            x = hi - 1.0
        elif math.isinf(hi):
            x = lo + 1.0
        else:
            return (Fraction(lo) + Fraction(hi)) / 2
    return Fraction(x)


def exact_likelihood_cells(L: LikelihoodQuery, db: IncompleteDatabase,
                           cell_limit: int = DEFAULT_CELL_LIMIT) -> OracleResult:
    """Likelihood as a sum of box masses on which the event is constant."""
    arity, nulls = _prepare(L, db)
    dists = [db.annotations[n] for n in nulls]
    breaks: List[Set[Fraction]] = [set() for _ in nulls]
    engine = Engine()
    while True:
        edges = []
        for d, bs in zip(dists, breaks):
            lo, hi = d.support()
            inner = sorted(float(b) for b in bs if lo < b < hi)
            edges.append([lo] + sorted(set(inner)) + [hi])
        total_cells = math.prod(len(e) - 1 for e in edges)
        if total_cells > cell_limit:
            raise CellLimit(f"{total_cells} cells exceed the limit {cell_limit}")
        points = [[_cell_point(d, e[c], e[c + 1]) for c in range(len(e) - 1)] for d, e in zip(dists, edges)]
        new_found = False
        results = []
        for idx in itertools.product(*(range(len(e) - 1) for e in edges)):
            ctx = _Context({n.id: points[k][c] for k, (n, c) in enumerate(zip(nulls, idx))})
            v = {n: Sym(n.id, Fraction(1), Fraction(0), ctx) for n in nulls}
            holds = _indicator(L, db, v, engine, arity)
            for k, n in enumerate(nulls):
                fresh = {b for b in ctx.found.get(n.id, ()) if b not in breaks[k]}
                if fresh:
                    breaks[k] |= fresh
                    new_found = True
            results.append((idx, holds))
        if new_found:
            continue
        value = 0.0
        for idx, holds in results:
            if holds:
                mass = 1.0
                for d, e, c in zip(dists, edges, idx):
                    mass *= d.cdf(e[c + 1]) - d.cdf(e[c])
                value += mass
        return OracleResult(min(1.0, value), "cells", 0.0, total_cells)


# -- adaptive grid -----------------------------------------------------------------


class _Axis:
    """Equal-probability grid for one null, truncated on unbounded sides only."""

    def __init__(self, d: Distribution, resolution: int):
        lo, hi = d.support()
        self.p_lo = TRUNCATION if math.isinf(lo) else 0.0
        self.p_hi = 1.0 - TRUNCATION if math.isinf(hi) else 1.0
        self.d = d
        self.n = resolution
        self.bounds = (lo, hi)
        self._edges: Dict[int, float] = {}
        self._mids: Dict[int, float] = {}

    def tail(self) -> float:
        return self.p_lo + (1.0 - self.p_hi)

    def _at(self, p: float) -> float:
        return self.d.ppf(p)

    def edge(self, i: int) -> float:
        x = self._edges.get(i)
        if x is None:
            if i == 0 and not math.isinf(self.bounds[0]):
                x = self.bounds[0]
            elif i == self.n and not math.isinf(self.bounds[1]):
                x = self.bounds[1]
            else:
                x = self._at(self.p_lo + (self.p_hi - self.p_lo) * i / self.n)
            self._edges[i] = x
        return x

    def mid(self, i: int) -> float:
        x = self._mids.get(i)
        if x is None:
            x = self._at(self.p_lo + (self.p_hi - self.p_lo) * (i + 0.5) / self.n)
            self._mids[i] = x
        return x

    def mass(self, i0: int, i1: int) -> float:
        return (self.p_hi - self.p_lo) * (i1 - i0) / self.n


def grid_likelihood(L: LikelihoodQuery, db: IncompleteDatabase,
                    resolution: int = DEFAULT_RESOLUTION) -> OracleResult:
    """Midpoint-rule likelihood with boundary-cell and tail mass reported as uncertainty."""
    arity, nulls = _prepare(L, db)
    if len(nulls) > MAX_GRID_NULLS:
        raise TooManyNulls(f"grid quadrature supports at most {MAX_GRID_NULLS} nulls, got {len(nulls)}")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    engine = Engine()
    if not nulls:
        holds = _indicator(L, db, {}, engine, arity)
        return OracleResult(1.0 if holds else 0.0, "grid", 0.0, 1)
    axes = [_Axis(db.annotations[n], resolution) for n in nulls]
    cache: Dict[Tuple, bool] = {}

    def at(point: Tuple[float, ...]) -> bool:
        hit = cache.get(point)
        if hit is None:
            hit = _indicator(L, db, dict(zip(nulls, point)), engine, arity)
            cache[point] = hit
        return hit

    def mid_of(box):
        return tuple(ax.mid((a + b - 1) // 2) for ax, (a, b) in zip(axes, box))

    def corners(box):
        return [tuple(ax.edge(i) for ax, i in zip(axes, c)) for c in itertools.product(*box)]

    def box_mass(box):
        return math.prod(ax.mass(a, b) for ax, (a, b) in zip(axes, box))

    start = max(1, resolution // 16)
    value = 0.0
    uncertainty = sum(ax.tail() for ax in axes)
    cells = 0
    stack = [tuple((0, resolution) for _ in axes)]
    while stack:
        box = stack.pop()
        sizes = [b - a for a, b in box]
        centre = at(mid_of(box))
        if max(sizes) == 1:
            cells += 1
            m = box_mass(box)
            if centre:
                value += m
            if any(at(c) != centre for c in corners(box)):
                uncertainty += m
            continue
        if max(sizes) <= start and all(at(c) == centre for c in corners(box)):
            cells += 1
            if centre:
                value += box_mass(box)
            continue
        halves = []
        for a, b in box:
            if b - a == 1:
                halves.append([(a, b)])
            else:
                m = (a + b) // 2
                halves.append([(a, m), (m, b)])
        stack.extend(itertools.product(*halves))
    return OracleResult(value, "grid", uncertainty, cells)


def likelihood(L: LikelihoodQuery, db: IncompleteDatabase, mode: str = "auto",
               resolution: int = DEFAULT_RESOLUTION, cell_limit: int = DEFAULT_CELL_LIMIT) -> OracleResult:
    """Dispatch between the exact and grid oracles; ``auto`` prefers exact cells."""
    if mode == "cells":
        return exact_likelihood_cells(L, db, cell_limit)
    if mode == "grid":
        return grid_likelihood(L, db, resolution)
    if mode != "auto":
        raise ValueError(f"unknown oracle mode {mode!r}")
    try:
        return exact_likelihood_cells(L, db, cell_limit)
    except NotCellDecomposable:
        return grid_likelihood(L, db, resolution)

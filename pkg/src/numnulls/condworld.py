"""Conditional worlds: symbolic answer spaces over nulls.

A conditional world is a finite list of (arithmetic database, condition set)
pairs. Entries are rational expressions over nulls; a condition set is a
conjunction of strict inequalities ``e < 0``. Queries are lifted pair by
pair, except ``$i < $j`` selections, which split each pair according to the
sign of every non-constant difference ``t_i - t_j``.

Entries compare by their rational function (exact normal form), so
``⊥₁ - ⊥₁`` is the constant 0 and ``-(-⊥₁)`` is ``⊥₁``. The expression kept
for printing is the first one built.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import BlowupLimit, DivByZero, MultiBranch, NoBranch, SchemaError, WorldError
from .evaluate import Engine, evaluate
from .expr import Const, Expr, NullVar, compile_expr, free_vars, neg, to_text
from .model import (
    Bag,
    Distribution,
    IncompleteDatabase,
    Null,
    apply_valuation,
    distribution_from_json,
)
from .query import Base, Let, Literal, Lt, Query, Ref, Select, children, is_core
from .ratfunc import RatFunc, from_expr
from .rng import draw_matrix

DEFAULT_BLOWUP_CAP = 4096
BOUNDARY_TOLERANCE = 1e-12
ANSWER = "answer"


class Entry:
    """A rational expression over nulls, equal to another iff their functions agree."""

    __slots__ = ("expr", "rf", "_fns")

    def __init__(self, expr: Expr, rf: Optional[RatFunc] = None):
        self.expr = expr
        self.rf = from_expr(expr) if rf is None else rf
        self._fns = {}

    @classmethod
    def const(cls, c) -> "Entry":
        return cls(Const(float(c)), RatFunc.const(Fraction(float(c))))

    @classmethod
    def var(cls, null_id: int) -> "Entry":
        return cls(NullVar(null_id), RatFunc.var(null_id))

    @classmethod
    def of(cls, x) -> "Entry":
        if isinstance(x, Entry):
            return x
        if isinstance(x, Null):
            return cls.var(x.id)
        if isinstance(x, Expr):
            return cls(x)
        return cls.const(x)

    def is_const(self) -> bool:
        return self.rf.is_const()

    def const_value(self) -> Fraction:
        return self.rf.const_value()

    def nulls(self):
        return self.rf.nulls()

    def _is_zero_const(self) -> bool:
        return isinstance(self.expr, Const) and self.expr.value == 0.0

    def __add__(self, other):
        o = Entry.of(other)
        if o._is_zero_const():
            return self
        if self._is_zero_const():
            return o
        return Entry(self.expr + o.expr, self.rf + o.rf)

    def __radd__(self, other):
        return Entry.of(other) + self

    def __sub__(self, other):
        o = Entry.of(other)
        if o._is_zero_const():
            return self
        if self._is_zero_const():
            return -o
        return Entry(self.expr - o.expr, self.rf - o.rf)

    def __rsub__(self, other):
        return Entry.of(other) - self

    def __mul__(self, other):
        o = Entry.of(other)
        return Entry(self.expr * o.expr, self.rf * o.rf)

    def __rmul__(self, other):
        return Entry.of(other) * self

    def __truediv__(self, other):
        o = Entry.of(other)
        if o.rf.is_zero():
            raise DivByZero(f"division by {to_text(o.expr)}, which is identically zero")
        return Entry(self.expr / o.expr, self.rf / o.rf)

    def __rtruediv__(self, other):
        return Entry.of(other) / self

    def __neg__(self):
        return Entry(neg(self.expr), -self.rf)

    def __eq__(self, other):
        if isinstance(other, Entry):
            return self.rf == other.rf
        if isinstance(other, (int, float, Fraction)) and not isinstance(other, bool):
            return self.rf == RatFunc.const(Fraction(other))
        return NotImplemented

    def __hash__(self):
        return hash(self.rf)

    def __lt__(self, other):
        raise WorldError("ordering symbolic entries requires a condition split")

    __le__ = __gt__ = __ge__ = __lt__

    def __repr__(self):
        return to_text(self.expr)

    def evaluator(self, num=float):
        fn = self._fns.get(num)
        if fn is None:
            f = compile_expr(self.expr, num)
            fn = self._fns[num] = lambda v: f((), v)
        return fn


Conditions = FrozenSet[Entry]


@dataclass(frozen=True)
class CondDB:
    """One conditional database: relations of entries and a set of members read as ``e < 0``."""

    relations: Mapping[str, Bag]
    conditions: Conditions

    def nulls(self) -> set:
        out = set()
        for bag in self.relations.values():
            for row in bag.counts:
                for x in row:
                    out |= x.nulls()
        for e in self.conditions:
            out |= e.nulls()
        return out


@dataclass(frozen=True)
class ConditionalWorld:
    pairs: Tuple[CondDB, ...]
    annotations: Mapping[Null, Distribution] = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def nulls(self) -> List[Null]:
        ids = set()
        for p in self.pairs:
            ids |= p.nulls()
        return sorted(Null(i) for i in ids)


ALWAYS = frozenset({Entry.const(-1.0)})


def lift_bag(bag: Bag) -> Bag:
    counts = {}
    for row, k in bag.counts.items():
        new = tuple(Entry.of(x) for x in row)
        counts[new] = counts.get(new, 0) + k
    return Bag.wrap(bag.arity, counts)


def world_of(db: IncompleteDatabase) -> ConditionalWorld:
    """The single-pair world ``{(D, {-1})}``: D with entries lifted, under an always-true condition."""
    relations = {name: lift_bag(bag) for name, bag in db.relations.items()}
    return ConditionalWorld((CondDB(relations, ALWAYS),), dict(db.annotations))


def cond_holds(c: Iterable[Entry], v: Mapping[Any, Any]) -> bool:
    """True iff every member evaluates below zero under ``v``."""
    return all(e.evaluator()(v) < 0 for e in c)


# -- lifting ---------------------------------------------------------------


class _LiftEngine(Engine):
    def __init__(self):
        super().__init__(num=Entry.const)

    def literal_value(self, e: Expr):
        return Entry.of(e)


Lifted = List[Tuple[Bag, Conditions]]


def lift(q: Query, world: ConditionalWorld, cap: int = DEFAULT_BLOWUP_CAP,
         schema: Optional[Mapping[str, int]] = None) -> ConditionalWorld:
    """The world of answers of ``q``; each pair holds its answer as relation ``answer``."""
    if not is_core(q):
        from .desugar import desugar

        if schema is None:
            schema = {n: b.arity for n, b in world.pairs[0].relations.items()} if world.pairs else {}
        q = desugar(q, schema)
    lifter = _Lifter(world, cap)
    out = lifter.run(q, {})
    return ConditionalWorld(tuple(CondDB({ANSWER: bag}, c) for bag, c in out), world.annotations)


class _Lifter:
    def __init__(self, world: ConditionalWorld, cap: int):
        self.world = world
        self.cap = cap
        self.engine = _LiftEngine()

    def _check(self, n):
        if n > self.cap:
            raise BlowupLimit(n, self.cap)

    def run(self, q: Query, env) -> Lifted:
        if isinstance(q, Base):
            try:
                return [(p.relations[q.name], p.conditions) for p in self.world.pairs]
            except KeyError:
                raise SchemaError(f"unknown relation {q.name!r}") from None
        if isinstance(q, Ref):
            return env[q.name]
        if isinstance(q, Literal):
            return [(self.engine.run(q, {}), frozenset())]
        if isinstance(q, Let):
            local = dict(env)
            for name, bound in q.bindings:
                local[name] = self.run(bound, local)
            return self.run(q.body, local)
        kids = children(q)
        if len(kids) == 2:
            left, right = self.run(kids[0], env), self.run(kids[1], env)
            self._check(len(left) * len(right))
            return [(self.engine.binary(q, a, b), ca | cb) for a, ca in left for b, cb in right]
        inner = self.run(kids[0], env)
        if isinstance(q, Select) and isinstance(q.cond, Lt):
            return self.split(q.cond, inner)
        return [(self.engine.unary(q, bag), c) for bag, c in inner]

    def split(self, cond: Lt, inner: Lifted) -> Lifted:
        i, j = cond.i - 1, cond.j - 1
        plans = []
        total = 0
        for bag, c in inner:
            diffs = {}
            members: Dict[Entry, None] = {}
            for row in bag.counts:
                d = row[i] - row[j]
                diffs[row] = d
                if not d.is_const():
                    members.setdefault(d)
            members = list(members)
            total += 2 ** len(members)
            self._check(total)
            plans.append((bag, c, diffs, members))
        out: Lifted = []
        for bag, c, diffs, members in plans:
            for mask in itertools.product((False, True), repeat=len(members)):
                chosen = {m for m, keep in zip(members, mask) if keep}
                cb = frozenset(m if keep else -m for m, keep in zip(members, mask))
                kept = {}
                for row, k in bag.counts.items():
                    d = diffs[row]
                    if (d.const_value() < 0) if d.is_const() else (d in chosen):
                        kept[row] = k
                out.append((Bag.wrap(bag.arity, kept), c | cb))
        return out


# -- pruning and validation ----------------------------------------------------


def contradictory(c: Conditions) -> bool:
    """Syntactically unsatisfiable: a nonnegative constant member, or both e and -e."""
    for e in c:
        if e.is_const() and e.rf.const_value() >= 0:
            return True
        if -e in c:
            return True
    return False


def prune(world: ConditionalWorld) -> ConditionalWorld:
    return ConditionalWorld(tuple(p for p in world.pairs if not contradictory(p.conditions)), world.annotations)


@dataclass
class ValidationReport:
    n_samples: int
    coverage_hits: int = 0
    coverage_misses: int = 0
    disjointness_violations: int = 0
    boundary_resamples: int = 0

    @property
    def violations(self) -> int:
        return self.coverage_misses + self.disjointness_violations

    def to_json(self) -> Dict:
        return {
            "n_samples": self.n_samples,
            "coverage_hits": self.coverage_hits,
            "coverage_misses": self.coverage_misses,
            "disjointness_violations": self.disjointness_violations,
            "violations": self.violations,
            "boundary_resamples": self.boundary_resamples,
        }


class _Valuations:
    """Counter-based valuations of a fixed null list, with resampling past the first block."""

    def __init__(self, nulls: Sequence[Null], annotations: Mapping[Null, Distribution], seed: int, n: int):
        missing = [x for x in nulls if x not in annotations]
        if missing:
            raise SchemaError(f"no distribution for {missing}")
        self.nulls = list(nulls)
        self.dists = [annotations[x] for x in self.nulls]
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.next_index = n
        self.block = draw_matrix(self.seed, self.nulls, self.dists, 0, n)

    def first(self, s: int) -> Dict[Null, float]:
        return {x: col[s] for x, col in zip(self.nulls, self.block)}

    def fresh(self) -> Dict[Null, float]:
        cols = draw_matrix(self.seed, self.nulls, self.dists, self.next_index, 1)
        self.next_index += 1
        return {x: col[0] for x, col in zip(self.nulls, cols)}


def _near_boundary(values: Iterable[float]) -> bool:
    return any(abs(x) < BOUNDARY_TOLERANCE for x in values)


MAX_RESAMPLES = 1000


def validate_world(world: ConditionalWorld, n_samples: int, seed: int) -> ValidationReport:
    """Count, per sampled valuation, how many condition sets hold (exactly one is required)."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    nulls = world.nulls()
    draws = _Valuations(nulls, world.annotations, seed, n_samples)
    compiled = [[e.evaluator() for e in p.conditions] for p in world.pairs]
    report = ValidationReport(n_samples)
    for s in range(n_samples):
        v = draws.first(s)
        for _ in range(MAX_RESAMPLES):
            try:
                values = [[f(v) for f in fs] for fs in compiled]
            except DivByZero:
                values = None
            if values is not None and not _near_boundary(x for vs in values for x in vs):
                break
            report.boundary_resamples += 1
            v = draws.fresh()
        else:
            raise WorldError("could not draw a valuation away from the condition boundaries")
        holding = sum(1 for vs in values if all(x < 0 for x in vs))
        if holding == 0:
            report.coverage_misses += 1
        else:
            report.coverage_hits += 1
            if holding > 1:
                report.disjointness_violations += 1
    return report


def _condition_plan(world: ConditionalWorld):
    """Distinct condition members of ``world`` and, per pair, the indices of its members (cached)."""
    plan = world.__dict__.get("_plan")
    if plan is None:
        position: Dict[Entry, int] = {}
        index = [tuple(position.setdefault(e, len(position)) for e in p.conditions) for p in world.pairs]
        plan = (list(position), index)
        object.__setattr__(world, "_plan", plan)
    return plan


def _branch(world: ConditionalWorld, v, num) -> CondDB:
    members, index = _condition_plan(world)
    vv = {k: num(x) for k, x in v.items()}
    negative = [e.evaluator(num)(vv) < 0 for e in members]
    holding = [p for p, idx in zip(world.pairs, index) if all(negative[i] for i in idx)]
    if not holding:
        raise NoBranch("no condition of the world holds under this valuation")
    if len(holding) > 1:
        raise MultiBranch(f"{len(holding)} conditions of the world hold under this valuation")
    return holding[0]


def instantiate(world: ConditionalWorld, v: Mapping[Null, float], exact: bool = False) -> Dict[str, Bag]:
    """The database of the unique pair whose condition holds, with entries evaluated under ``v``.

    ``exact`` evaluates conditions and entries in rational arithmetic.
    """
    num = Fraction if exact else float
    pair = _branch(world, v, num)
    vv = {k: num(x) for k, x in v.items()}
    out = {}
    for name, bag in pair.relations.items():
        counts = {}
        for row, k in bag.counts.items():
            new = tuple(compile_expr(e.expr, num)((), vv) for e in row)
            counts[new] = counts.get(new, 0) + k
        out[name] = Bag.wrap(bag.arity, counts)
    return out


@dataclass
class ExtensionReport:
    n_samples: int
    pairs: int
    pairs_after_prune: int
    mismatches: int = 0
    prune_mismatches: int = 0
    boundary_resamples: int = 0
    examples: List[Dict] = field(default_factory=list)

    def to_json(self) -> Dict:
        return {
            "n_samples": self.n_samples,
            "pairs": self.pairs,
            "pairs_after_prune": self.pairs_after_prune,
            "mismatches": self.mismatches,
            "prune_mismatches": self.prune_mismatches,
            "boundary_resamples": self.boundary_resamples,
            "examples": self.examples,
        }


def check_trivial_extension(q: Query, db: IncompleteDatabase, n_samples: int, seed: int,
                            cap: int = DEFAULT_BLOWUP_CAP) -> ExtensionReport:
    """Compare direct evaluation on sampled instances with instantiation of the lifted world.

    Both sides run in exact rational arithmetic on the sampled (binary64) values,
    so agreement is checked exactly rather than up to rounding.
    """
    from .desugar import desugar

    db.require_annotated()
    core = desugar(q, db.schema())
    lifted = lift(core, world_of(db), cap)
    pruned = prune(lifted)
    report = ExtensionReport(n_samples, len(lifted), len(pruned))
    draws = _Valuations(db.sorted_nulls(), db.annotations, seed, n_samples)
    members = list({e: None for p in lifted.pairs for e in p.conditions})
    for s in range(n_samples):
        v = draws.first(s)
        for _ in range(MAX_RESAMPLES):
            try:
                exact_v = {k: Fraction(x) for k, x in v.items()}
                if any(e.evaluator(Fraction)(exact_v) == 0 for e in members):
                    raise DivByZero("valuation on a condition boundary")
                expected = evaluate(core, apply_valuation(v, db, exact=True), exact=True)
                got = instantiate(pruned, v, exact=True)[ANSWER]
                unpruned = instantiate(lifted, v, exact=True)[ANSWER]
                break
            except DivByZero:
                report.boundary_resamples += 1
                v = draws.fresh()
        else:
            raise WorldError("could not draw a valuation away from the condition boundaries")
        if expected != got:
            report.mismatches += 1
            if len(report.examples) < 5:
                report.examples.append({
                    "valuation": {str(k.id): x for k, x in v.items()},
                    "expected": repr(expected),
                    "got": repr(got),
                })
        if unpruned != got:
            report.prune_mismatches += 1
    return report


# -- JSON --------------------------------------------------------------------


def _bag_json(bag: Bag) -> Dict:
    rows = list(bag.counts.items())
    return {
        "arity": bag.arity,
        "tuples": [[to_text(e.expr) for e in row] for row, _ in rows],
        "multiplicities": [k for _, k in rows],
    }


def world_to_json(world: ConditionalWorld, flag_pruned: bool = True) -> Dict:
    pairs = []
    for p in world.pairs:
        doc = {
            "relations": {name: _bag_json(bag) for name, bag in p.relations.items()},
            "conditions": sorted(to_text(e.expr) for e in p.conditions),
        }
        if flag_pruned:
            doc["pruned"] = contradictory(p.conditions)
        pairs.append(doc)
    return {
        "pairs": pairs,
        "nulls": {str(n.id): d.to_json() for n, d in sorted(world.annotations.items())},
    }


def world_from_json(doc: Mapping) -> ConditionalWorld:
    from .parser import parse_expr

    def entry(text):
        e = parse_expr(str(text))
        if free_vars(e)[0]:
            raise SchemaError(f"world entries cannot mention attributes: {text!r}")
        return Entry(e)

    try:
        pairs = []
        for p in doc["pairs"]:
            relations = {}
            for name, rel in p["relations"].items():
                mults = rel.get("multiplicities") or [1] * len(rel["tuples"])
                counts = {}
                for row, k in zip(rel["tuples"], mults):
                    key = tuple(entry(x) for x in row)
                    if len(key) != rel["arity"]:
                        raise SchemaError(f"tuple {row!r} does not have arity {rel['arity']}")
                    counts[key] = counts.get(key, 0) + int(k)
                relations[name] = Bag.wrap(int(rel["arity"]), counts)
            pairs.append(CondDB(relations, frozenset(entry(c) for c in p["conditions"])))
        annotations = {Null(int(i)): distribution_from_json(d) for i, d in doc.get("nulls", {}).items()}
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed world document: {exc}") from None
    return ConditionalWorld(tuple(pairs), annotations)

"""Compile a whole sampling run into one query over the incomplete database.

The sampled values are embedded as a literal relation ``%_rand`` holding one
row ``(⊥, v₁(⊥), …, v_γ(⊥))`` per null. For sample ``i`` every base relation
``R`` is replaced by a gadget that maps each entry through a two-column
lookup table (constants map to themselves, nulls to their ``i``-th draw), so
naive evaluation of the compiled query equals evaluation of the original
query on ``vᵢ(D)``. Subqueries are bound with ``let`` so that shared parts
appear once in the text.

Sample indices here are 1-based: sample ``i`` reads column ``i + 1`` of
``%_rand`` and corresponds to draw index ``i - 1`` of the sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from .approx import LikelihoodQuery, check_epsilon, resolve_gamma
from .desugar import dedup, desugar
from .errors import ArityOverflow, EvalError, RewriteError, SampleError
from .evaluate import Grounded, ground_all, interval_nulls
from .expr import Attr, Const, Div, NullVar
from .model import IncompleteDatabase, Null
from .query import (
    Apply,
    Base,
    Eq,
    ExceptAll,
    IsConst,
    Let,
    Literal,
    Lt,
    Product,
    Project,
    Query,
    Ref,
    Select,
    SumGroup,
    UnionAll,
    arity_of,
    children,
    let_names,
    node_count,
    with_children,
)
from .rng import draw_matrix

DEFAULT_ARITY_CAP = 300
RAND = "%_rand"
_PREFIX = "%_"


def _span(a, b):
    return tuple(range(a, b + 1))


def build_rand(db: IncompleteDatabase, gamma: int, seed: int) -> Literal:
    """Literal of arity γ+1 with the first γ draws of every null under ``seed``."""
    db.require_annotated()
    nulls = db.sorted_nulls()
    columns = draw_matrix(seed, nulls, [db.annotations[n] for n in nulls], 0, gamma)
    rows = tuple(((NullVar(n.id),) + tuple(Const(x) for x in col), 1) for n, col in zip(nulls, columns))
    return Literal(gamma + 1, rows)


def rand_valuation(rand: Literal, i: int) -> Dict[Null, float]:
    """The ``i``-th (1-based) valuation stored in a Rand literal."""
    return {Null(row[0].null): row[i].value for row, _ in rand.rows}


def union_all(parts: Sequence[Query]) -> Query:
    """Balanced UnionAll tree (keeps nesting depth logarithmic)."""
    if not parts:
        raise RewriteError("cannot form the union of zero queries")
    parts = list(parts)
    while len(parts) > 1:
        paired = [UnionAll(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            paired.append(parts[-1])
        parts = paired
    return parts[0]


@dataclass(frozen=True)
class RewrittenQuery:
    """A compiled query plus the data needed to reproduce and audit it.

    ``provenance`` maps each 1-based sample index to the let-bound name of the
    subquery that encodes that sample.
    """

    ast: Query
    gamma: int
    seed: int
    kind: str
    provenance: Dict[int, str] = field(default_factory=dict)

    def text(self, indent: Optional[int] = 2) -> str:
        from .parser import to_text

        return to_text(self.ast, indent)

    def node_count(self) -> int:
        return node_count(self.ast)

    def sidecar(self) -> Dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "gamma": self.gamma,
            "provenance": {str(i): name for i, name in sorted(self.provenance.items())},
            "node_count": self.node_count(),
        }


class _Builder:
    """Accumulates let bindings for one compiled query."""

    def __init__(self, schema: Mapping[str, int], rand: Literal, arity_cap: int):
        self.schema = dict(schema)
        self.rand = rand
        self.arity_cap = arity_cap
        self.bindings: List = [(RAND, rand)]
        self.names = {RAND}
        self._const_maps: Dict = {}
        self._gadgets: Dict = {}

    def bind(self, name: str, q: Query) -> Ref:
        if name in self.names:
            raise RewriteError(f"duplicate binding {name}")
        self.names.add(name)
        self.bindings.append((name, q))
        return Ref(name)

    def finish(self, body: Query) -> Let:
        return Let(tuple(self.bindings), body)

    def _const_map(self, rel: str, j: int) -> Ref:
        """Pairs (c, c) for every constant c in column j of ``rel`` (shared by all samples)."""
        key = (rel, j)
        if key not in self._const_maps:
            col = Project((j,), Base(rel))
            q = Select(Eq(1, 2), Select(IsConst(1), Product(col, col)))
            self._const_maps[key] = self.bind(f"{_PREFIX}c_{rel}_{j}", q)
        return self._const_maps[key]

    def gadget(self, rel: str, i: int) -> Ref:
        """``rel`` with every null replaced by its value in sample ``i``."""
        key = (rel, i)
        if key in self._gadgets:
            return self._gadgets[key]
        m = self.schema[rel]
        if m == 0:
            raise RewriteError(f"relation {rel} has arity 0; such relations cannot be rewritten")
        if 3 * m > self.arity_cap:
            raise ArityOverflow(f"gadget for {rel} needs arity {3 * m}, above the cap {self.arity_cap}")
        draws = Project((1, i + 1), Ref(RAND))
        joined: Query = Base(rel)
        for j in range(1, m + 1):
            lookup = dedup(UnionAll(self._const_map(rel, j), draws), 2)
            name = self.bind(f"{_PREFIX}m{i}_{rel}_{j}", lookup)
            joined = Product(joined, name)
        for j in range(1, m + 1):
            joined = Select(Eq(j, m + 2 * j - 1), joined)
        values = Project(tuple(m + 2 * j for j in range(1, m + 1)), joined)
        ref = self.bind(f"{_PREFIX}r{i}_{rel}", values)
        self._gadgets[key] = ref
        return ref

    def substitute(self, q: Query, i: int) -> Query:
        """``q`` with base relations swapped for their sample-``i`` gadgets."""
        if isinstance(q, Base):
            return self.gadget(q.name, i)
        kids = children(q)
        if not kids:
            return q
        return with_children(q, [self.substitute(k, i) for k in kids])


def _prepare(q: Query, db: IncompleteDatabase) -> Query:
    clash = {n for n in let_names(q) if n.startswith(_PREFIX)}
    if clash:
        raise RewriteError(f"let names starting with {_PREFIX} are reserved: {sorted(clash)}")
    return desugar(q, db.schema())


def compile_valuation(q: Query, i: int, rand: Literal, schema: Mapping[str, int],
                      arity_cap: int = DEFAULT_ARITY_CAP) -> Query:
    """Query whose naive evaluation over D equals evaluating ``q`` on ``vᵢ(D)``.

    ``rand`` is the literal from :func:`build_rand`; ``i`` is 1-based.
    """
    if not 1 <= i < rand.arity:
        raise RewriteError(f"sample index {i} outside 1..{rand.arity - 1}")
    clash = {n for n in let_names(q) if n.startswith(_PREFIX)}
    if clash:
        raise RewriteError(f"let names starting with {_PREFIX} are reserved: {sorted(clash)}")
    b = _Builder(schema, rand, arity_cap)
    body = b.substitute(desugar(q, schema), i)
    return b.finish(body)


def _interval_select(b: _Builder, name: str, current: Query, n: int, pos: int, g: Grounded) -> Query:
    """Restrict column ``pos`` of ``current`` (arity n) to the grounded interval ``g``."""
    keep = _span(1, n)

    def compare(c, atom):
        return Project(keep, Select(atom, Apply(Const(c), current)))

    c_col = n + 1
    if g.lo is not None:
        if g.lo_closed:  # c <= x  is  everything except x < c
            current = b.bind(f"{name}_lo", ExceptAll(current, compare(g.lo, Lt(pos, c_col))))
        else:
            current = b.bind(f"{name}_lo", compare(g.lo, Lt(c_col, pos)))
    if g.hi is not None:
        if g.hi_closed:  # x <= c  is  everything except c < x
            current = b.bind(f"{name}_hi", ExceptAll(current, compare(g.hi, Lt(c_col, pos))))
        else:
            current = b.bind(f"{name}_hi", compare(g.hi, Lt(pos, c_col)))
    return current


def _counted(b: _Builder, q: Query, i: int, n: int) -> Ref:
    """Bind COUNT grouped by all n attributes of the compiled sample-i query."""
    compiled = b.substitute(q, i)
    return b.bind(f"{_PREFIX}q{i}", SumGroup(_span(1, n), n + 1, Apply(Const(1.0), compiled)))


def _prologue(q: Query, db: IncompleteDatabase, epsilon: float, seed: int, gamma: Optional[int], arity_cap: int):
    epsilon = check_epsilon(epsilon)
    gamma = resolve_gamma(epsilon, gamma)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    core = _prepare(q, db)
    rand = build_rand(db, gamma, seed)
    return core, gamma, seed, _Builder(db.schema(), rand, arity_cap)


def build_apx_query(L: LikelihoodQuery, db: IncompleteDatabase, epsilon: float, seed: int,
                    gamma: Optional[int] = None, arity_cap: int = DEFAULT_ARITY_CAP) -> RewrittenQuery:
    """One query computing the sampling estimate of ``L`` (same samples as like_apx)."""
    core, gamma, seed, b = _prologue(L.q, db, epsilon, seed, gamma, arity_cap)
    n = L.check(db.schema())
    extra = interval_nulls(L.intervals) - set(db.nulls())
    if extra:
        raise RewriteError(f"interval endpoints mention nulls not in the database: {sorted(extra)}")
    k = Const(float(L.k))
    atom = {"<": Lt(1, 2), "=": Eq(1, 2), ">": Lt(2, 1)}[L.cmp]
    provenance = {}
    flags = []
    for i in range(1, gamma + 1):
        v = rand_valuation(b.rand, i)
        try:
            grounded = ground_all(L.intervals, v, n)
        except EvalError as exc:
            raise SampleError(i - 1, exc) from exc
        current: Query = _counted(b, core, i, n)
        for pos, g in enumerate(grounded, start=1):
            current = _interval_select(b, f"{_PREFIX}a{i}_{pos}", current, n + 1, pos, g)
        consistent = SumGroup((), 1, Project((n + 1,), current))
        holds = Project((), Select(atom, Apply(k, consistent)))
        name = f"{_PREFIX}b{i}"
        flags.append(b.bind(name, SumGroup((), 1, Apply(Const(1.0), holds))))
        provenance[i] = name
    everything = b.bind(f"{_PREFIX}all", union_all(flags))
    average = Project((3,), Apply(Div(Attr(1), Attr(2)), Product(
        SumGroup((), 1, everything), SumGroup((), 2, Apply(Const(1.0), everything)))))
    return RewrittenQuery(b.finish(average), gamma, seed, "apx", provenance)


def build_compute_query(q: Query, db: IncompleteDatabase, epsilon: float, seed: int,
                        gamma: Optional[int] = None, arity_cap: int = DEFAULT_ARITY_CAP) -> RewrittenQuery:
    """One query listing rows (t̄, b, p): p is the fraction of samples where t̄ occurs exactly b times."""
    core, gamma, seed, b = _prologue(q, db, epsilon, seed, gamma, arity_cap)
    n = arity_of(core, db.schema())
    provenance = {}
    parts = []
    for i in range(1, gamma + 1):
        ref = _counted(b, core, i, n)
        provenance[i] = ref.name
        parts.append(ref)
    everything = b.bind(f"{_PREFIX}all", union_all(parts))
    counted = SumGroup(_span(1, n + 1), n + 2, Apply(Const(1.0), everything))
    body = Project(_span(1, n + 1) + (n + 3,), Apply(Div(Attr(n + 2), Const(float(gamma))), counted))
    return RewrittenQuery(b.finish(body), gamma, seed, "compute", provenance)

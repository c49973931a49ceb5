"""Values, marked nulls, distributions, bag relations and incomplete databases."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Any, Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union

from .errors import MissingNull, MultiplicityOverflow, SchemaError

MAX_MULTIPLICITY = 2**64 - 1


@dataclass(frozen=True, order=True)
class Null:
    """The marked null with subscript ``id``; repeated occurrences denote one unknown."""

    id: int

    def __post_init__(self):
        if not isinstance(self.id, int) or self.id < 0:
            raise SchemaError(f"null id must be a non-negative integer, got {self.id!r}")

    def __repr__(self):
        return f"n{self.id}"


Value = Union[float, Null]
Row = Tuple[Any, ...]
Valuation = Dict[Null, float]


# -- distributions ---------------------------------------------------------


class Distribution:
    kind: str
    code: int

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def ppf(self, p: float) -> float:
        raise NotImplementedError

    def support(self) -> Tuple[float, float]:
        raise NotImplementedError

    def params(self) -> Tuple[float, float]:
        raise NotImplementedError

    def to_json(self) -> Dict[str, Any]:
        raise NotImplementedError


def _finite(name, x):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{name} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise SchemaError(f"{name} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float
    sigma: float

    kind = "normal"
    code = 0

    def __post_init__(self):
        object.__setattr__(self, "mu", _finite("mu", self.mu))
        object.__setattr__(self, "sigma", _finite("sigma", self.sigma))
        if self.sigma <= 0:
            raise SchemaError("normal sigma must be positive")

    def cdf(self, x):
        if x == math.inf:
            return 1.0
        if x == -math.inf:
            return 0.0
        return 0.5 * math.erfc(-(x - self.mu) / (self.sigma * math.sqrt(2.0)))

    def ppf(self, p):
        if p <= 0.0:
            return -math.inf
        if p >= 1.0:
            return math.inf
        return NormalDist(self.mu, self.sigma).inv_cdf(p)

    def support(self):
        return (-math.inf, math.inf)

    def params(self):
        return (self.mu, self.sigma)

    def to_json(self):
        return {"kind": "normal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float
    high: float

    kind = "uniform"
    code = 1

    def __post_init__(self):
        object.__setattr__(self, "low", _finite("low", self.low))
        object.__setattr__(self, "high", _finite("high", self.high))
        if not self.low < self.high:
            raise SchemaError("uniform interval needs low < high")

    def cdf(self, x):
        if x <= self.low:
            return 0.0
        if x >= self.high:
            return 1.0
        return (x - self.low) / (self.high - self.low)

    def ppf(self, p):
        if p <= 0.0:
            return self.low
        if p >= 1.0:
            return self.high
        return self.low + p * (self.high - self.low)

    def support(self):
        return (self.low, self.high)

    def params(self):
        return (self.low, self.high)

    def to_json(self):
        return {"kind": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float

    kind = "exponential"
    code = 2

    def __post_init__(self):
        object.__setattr__(self, "rate", _finite("rate", self.rate))
        if self.rate <= 0:
            raise SchemaError("exponential rate must be positive")

    def cdf(self, x):
        if x <= 0.0:
            return 0.0
        if x == math.inf:
            return 1.0
        return -math.expm1(-self.rate * x)

    def ppf(self, p):
        if p <= 0.0:
            return 0.0
        if p >= 1.0:
            return math.inf
        return -math.log1p(-p) / self.rate

    def support(self):
        return (0.0, math.inf)

    def params(self):
        return (self.rate, 0.0)

    def to_json(self):
        return {"kind": "exponential", "rate": self.rate}


def distribution_from_json(doc: Mapping[str, Any]) -> Distribution:
    if not isinstance(doc, Mapping) or "kind" not in doc:
        raise SchemaError(f"distribution must be an object with a 'kind', got {doc!r}")
    kind = doc["kind"]
    try:
        if kind == "normal":
            return Normal(doc["mu"], doc["sigma"])
        if kind == "uniform":
            return Uniform(doc.get("low", doc.get("l")), doc.get("high", doc.get("u")))
        if kind == "exponential":
            return Exponential(doc.get("rate", doc.get("lambda")))
    except KeyError as exc:
        raise SchemaError(f"distribution {kind!r} is missing parameter {exc}") from None
    raise SchemaError(f"unknown distribution kind {kind!r}")


# -- bags --------------------------------------------------------------------


def check_multiplicity(k: int) -> int:
    if k > MAX_MULTIPLICITY:
        raise MultiplicityOverflow(f"multiplicity {k} exceeds 64-bit range")
    return k


class Bag:
    """A finite multiset of equal-arity tuples, stored as tuple -> multiplicity.

    Instances are treated as immutable once built; ``counts`` must not be mutated.
    """

    __slots__ = ("arity", "counts")

    def __init__(self, arity: int, rows: Union[Mapping[Row, int], Iterable[Row], None] = None):
        if not isinstance(arity, int) or arity < 0:
            raise SchemaError(f"arity must be a non-negative integer, got {arity!r}")
        self.arity = arity
        counts: Dict[Row, int] = {}
        if rows is None:
            rows = ()
        items = rows.items() if isinstance(rows, Mapping) else ((r, 1) for r in rows)
        for row, k in items:
            row = tuple(_coerce(x) for x in row)
            if len(row) != arity:
                raise SchemaError(f"tuple {row!r} does not have arity {arity}")
            if not isinstance(k, int) or k < 0:
                raise SchemaError(f"multiplicity must be a non-negative integer, got {k!r}")
            if k:
                counts[row] = check_multiplicity(counts.get(row, 0) + k)
        self.counts = counts

    @classmethod
    def wrap(cls, arity: int, counts: Dict[Row, int]) -> "Bag":
        """Adopt ``counts`` without validation; callers guarantee the invariants."""
        bag = cls.__new__(cls)
        bag.arity = arity
        bag.counts = counts
        return bag

    def __iter__(self) -> Iterator[Row]:
        for row, k in self.counts.items():
            for _ in range(k):
                yield row

    def items(self):
        return self.counts.items()

    def __len__(self):
        return len(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def multiplicity(self, row: Row) -> int:
        return self.counts.get(tuple(row), 0)

    def __eq__(self, other):
        if not isinstance(other, Bag):
            return NotImplemented
        return self.arity == other.arity and self.counts == other.counts

    def __hash__(self):
        return hash((self.arity, frozenset(self.counts.items())))

    def __repr__(self):
        body = ", ".join(
            f"{_fmt_row(r)}" + (f"x{k}" if k != 1 else "") for r, k in self.counts.items()
        )
        return f"Bag[{self.arity}]{{{body}}}"

    def nulls(self):
        return {x for row in self.counts for x in row if type(x) is Null}


def _coerce(x):
    if type(x) is int:
        return float(x)
    if type(x) is float and not math.isfinite(x):
        raise SchemaError(f"relation entries must be finite, got {x!r}")
    return x


def _fmt_row(row):
    return "(" + ", ".join(repr(x) for x in row) + ")"


# -- databases ----------------------------------------------------------------


class IncompleteDatabase:
    """Named bag relations over reals and marked nulls, with one distribution per null."""

    __slots__ = ("relations", "annotations", "_nulls")

    def __init__(self, relations: Mapping[str, Bag], annotations: Optional[Mapping[Null, Distribution]] = None):
        self.relations: Dict[str, Bag] = dict(relations)
        self.annotations: Dict[Null, Distribution] = dict(annotations or {})
        found = set()
        for name, bag in self.relations.items():
            if not isinstance(bag, Bag):
                raise SchemaError(f"relation {name!r} is not a Bag")
            found |= bag.nulls()
        self._nulls = frozenset(found)
        # A database without any annotation is allowed for naive evaluation;
        # a partially annotated one is rejected.
        if self.annotations and not found <= set(self.annotations):
            raise SchemaError(f"nulls without a distribution: {sorted(found - set(self.annotations))}")

    def nulls(self) -> frozenset:
        return self._nulls

    def schema(self) -> Dict[str, int]:
        return {name: bag.arity for name, bag in self.relations.items()}

    def is_complete(self) -> bool:
        return not self._nulls

    def require_annotated(self):
        missing = self._nulls - set(self.annotations)
        if missing:
            raise SchemaError(f"nulls without a distribution: {sorted(missing)}")

    def sorted_nulls(self):
        return sorted(self._nulls)

    def __eq__(self, other):
        if not isinstance(other, IncompleteDatabase):
            return NotImplemented
        return self.relations == other.relations and self.annotations == other.annotations

    def __repr__(self):
        return f"IncompleteDatabase({self.relations!r}, {self.annotations!r})"


def nulls_of(db: IncompleteDatabase) -> frozenset:
    return db.nulls()


def apply_valuation(v: Mapping[Null, Any], db: IncompleteDatabase, exact: bool = False) -> IncompleteDatabase:
    """Replace every null of ``db`` by its value under ``v``.

    Tuples that become identical are merged and their multiplicities added.
    With ``exact`` every real is converted to a ``Fraction`` so that later
    evaluation runs in exact rational arithmetic.
    """
    missing = db.nulls() - set(v)
    if missing:
        raise MissingNull(f"valuation does not cover {sorted(missing)}")
    relations = {}
    for name, bag in db.relations.items():
        if not exact and not (bag.nulls()):
            relations[name] = bag
            continue
        out: Dict[Row, int] = {}
        for row, k in bag.counts.items():
            if exact:
                new = tuple(Fraction(v[x]) if type(x) is Null else Fraction(x) for x in row)
            else:
                new = tuple(v[x] if type(x) is Null else x for x in row)
            out[new] = out.get(new, 0) + k
        relations[name] = Bag.wrap(bag.arity, out)
    result = IncompleteDatabase.__new__(IncompleteDatabase)
    result.relations = relations
    result.annotations = {}
    result._nulls = frozenset()
    return result


# -- JSON ---------------------------------------------------------------------


def value_from_json(x) -> Value:
    if isinstance(x, Mapping):
        if set(x) != {"null"}:
            raise SchemaError(f"null entries look like {{'null': id}}, got {x!r}")
        return Null(int(x["null"]))
    return _finite("entry", x)


def value_to_json(x):
    if type(x) is Null:
        return {"null": x.id}
    return float(x)


def bag_from_json(doc: Mapping[str, Any]) -> Bag:
    try:
        arity = doc["arity"]
        tuples = doc["tuples"]
    except (KeyError, TypeError):
        raise SchemaError("relation needs 'arity' and 'tuples'") from None
    mults = doc.get("multiplicities") or [1] * len(tuples)
    if len(mults) != len(tuples):
        raise SchemaError("'multiplicities' must match 'tuples' in length")
    rows = {}
    for t, k in zip(tuples, mults):
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise SchemaError(f"multiplicity must be a positive integer, got {k!r}")
        row = tuple(value_from_json(x) for x in t)
        rows[row] = rows.get(row, 0) + k
    return Bag(arity, rows)


def bag_to_json(bag: Bag) -> Dict[str, Any]:
    tuples, mults = [], []
    for row, k in bag.counts.items():
        tuples.append([value_to_json(x) for x in row])
        mults.append(k)
    return {"arity": bag.arity, "tuples": tuples, "multiplicities": mults}


def database_from_json(doc: Mapping[str, Any]) -> IncompleteDatabase:
    if not isinstance(doc, Mapping) or "relations" not in doc:
        raise SchemaError("database document needs a 'relations' object")
    relations = {name: bag_from_json(rel) for name, rel in doc["relations"].items()}
    annotations = {Null(int(k)): distribution_from_json(d) for k, d in (doc.get("nulls") or {}).items()}
    db = IncompleteDatabase(relations, annotations)
    db.require_annotated()
    return db


def database_to_json(db: IncompleteDatabase) -> Dict[str, Any]:
    return {
        "relations": {name: bag_to_json(bag) for name, bag in db.relations.items()},
        "nulls": {str(n.id): d.to_json() for n, d in sorted(db.annotations.items())},
    }


def load_database(path) -> IncompleteDatabase:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return database_from_json(doc)

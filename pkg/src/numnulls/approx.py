"""Sampling-based likelihood estimation with additive error.

``like_apx`` draws γ = ⌈1/ε²⌉ valuations, evaluates the query on each
instantiated database, and reports the fraction of samples whose answer has
``∘ k`` tuples consistent with the grounded interval tuple. By Hoeffding the
estimate is within ε of the true likelihood with probability at least 0.75.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, EvalError, QueryTypeError, SampleError
from .evaluate import Engine, count_grounded, ground_all, interval_nulls
from .model import IncompleteDatabase, Null, apply_valuation
from .query import IntervalSpec, Query, arity_of
from .rng import RandomStream, draw_matrix

log = logging.getLogger(__name__)

COMPARATORS = {"<": "<", "=": "=", ">": ">", "lt": "<", "eq": "=", "gt": ">"}


def normalize_cmp(op: str) -> str:
    try:
        return COMPARATORS[op]
    except KeyError:
        raise ConfigError(f"comparator must be one of <, =, > (or lt, eq, gt), got {op!r}") from None


def compare(count: int, op: str, k: int) -> bool:
    if op == "<":
        return count < k
    if op == "=":
        return count == k
    return count > k


@dataclass(frozen=True)
class LikelihoodQuery:
    """Probability that ``q`` returns ``∘ k`` tuples inside the interval tuple."""

    q: Query
    cmp: str
    k: int
    intervals: Tuple[IntervalSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cmp", normalize_cmp(self.cmp))
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise ConfigError(f"k must be a non-negative integer, got {self.k!r}")

    def check(self, schema) -> int:
        """Arity of ``q``; raises QueryTypeError if the interval tuple does not match."""
        n = arity_of(self.q, schema)
        if self.intervals and len(self.intervals) != n:
            raise QueryTypeError(f"interval tuple has {len(self.intervals)} entries, query arity is {n}")
        return n

    def with_cmp(self, op: str) -> "LikelihoodQuery":
        return LikelihoodQuery(self.q, op, self.k, self.intervals)


@dataclass(frozen=True)
class Estimate:
    value: float
    epsilon: float
    gamma: int
    seed: int
    failures: int = 0
    count: int = 0
    trials: int = 1

    def fraction(self) -> Fraction:
        """The estimate as an exact ratio of sample counts."""
        return Fraction(self.count, self.gamma - self.failures)

    def to_json(self) -> Dict:
        return {
            "value": self.value,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "seed": self.seed,
            "failures": self.failures,
            "count": self.count,
            "trials": self.trials,
        }


def check_epsilon(epsilon) -> float:
    if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)) or not 0 < epsilon <= 1:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return float(epsilon)


def gamma_for(epsilon: float) -> int:
    """⌈ε⁻²⌉ computed exactly on the decimal reading of ε (0.1 gives 100, not 101)."""
    e = Fraction(repr(check_epsilon(epsilon)))
    return math.ceil(1 / (e * e))


def resolve_gamma(epsilon: float, gamma: Optional[int]) -> int:
    if gamma is None:
        return gamma_for(epsilon)
    if isinstance(gamma, bool) or not isinstance(gamma, int) or gamma < 1:
        raise ConfigError(f"gamma must be a positive integer, got {gamma!r}")
    return gamma


def val_sampler(db: IncompleteDatabase, rng: RandomStream) -> Dict[Null, float]:
    """One independent draw per null of ``db`` (empty for a complete database)."""
    db.require_annotated()
    return rng.valuation(db)


class _Sampler:
    """Per-sample consistency counts for one (query, database, interval tuple)."""

    def __init__(self, L: LikelihoodQuery, db: IncompleteDatabase):
        db.require_annotated()
        self.arity = L.check(db.schema())
        self.L = L
        self.db = db
        self.nulls = db.sorted_nulls()
        self.dists = [db.annotations[n] for n in self.nulls]
        extra = interval_nulls(L.intervals) - set(self.nulls)
        if extra:
            raise QueryTypeError(f"interval endpoints mention nulls not in the database: {sorted(extra)}")
        self.engine = Engine()

    def counts(self, seed: int, start: int, count: int, skip_bad: bool) -> List[Optional[int]]:
        """Consistent-tuple count per sample index in ``start .. start+count-1``; None marks a failure."""
        columns = draw_matrix(seed, self.nulls, self.dists, start, count)
        out: List[Optional[int]] = []
        for j in range(count):
            v = {n: col[j] for n, col in zip(self.nulls, columns)}
            try:
                answer = self.engine.run(self.L.q, apply_valuation(v, self.db).relations)
                grounded = ground_all(self.L.intervals, v, self.arity)
                out.append(count_grounded(grounded, answer))
            except EvalError as exc:
                if not skip_bad:
                    raise SampleError(start + j, exc) from exc
                log.debug("sample %d skipped: %s", start + j, exc)
                out.append(None)
        return out


def _block(args):
    L, db, seed, start, count, skip_bad = args
    return _Sampler(L, db).counts(seed, start, count, skip_bad)


def sample_counts(L: LikelihoodQuery, db: IncompleteDatabase, seed: int, gamma: int, start: int = 0,
                  skip_bad_samples: bool = False, workers: int = 1) -> List[Optional[int]]:
    """Consistent-tuple counts for samples ``start .. start+gamma-1`` (serial and parallel agree)."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if workers <= 1 or gamma < 2 * workers:
        return _Sampler(L, db).counts(seed, start, gamma, skip_bad_samples)
    size = math.ceil(gamma / workers)
    jobs = [(L, db, seed, s, min(size, start + gamma - s), skip_bad_samples)
            for s in range(start, start + gamma, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_block, jobs))
    return [c for part in parts for c in part]


def estimate_from_counts(counts: Sequence[Optional[int]], op: str, k: int, epsilon: float, seed: int) -> Estimate:
    op = normalize_cmp(op)
    gamma = len(counts)
    failures = sum(1 for c in counts if c is None)
    if failures == gamma:
        raise SampleError(None, "every sample failed")
    hits = sum(1 for c in counts if c is not None and compare(c, op, k))
    return Estimate(hits / (gamma - failures), epsilon, gamma, seed, failures, hits)


def like_apx(L: LikelihoodQuery, db: IncompleteDatabase, epsilon: float, seed: int, gamma: Optional[int] = None,
             skip_bad_samples: bool = False, trials: int = 1, workers: int = 1) -> Estimate:
    """Additive-error estimate of the likelihood of ``L`` over ``db``.

    With ``trials > 1`` the median of independent runs (disjoint sample
    indices) is returned; the default single run is the plain estimator.
    """
    epsilon = check_epsilon(epsilon)
    gamma = resolve_gamma(epsilon, gamma)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    runs = []
    for t in range(trials):
        counts = sample_counts(L, db, seed, gamma, t * gamma, skip_bad_samples, workers)
        runs.append(estimate_from_counts(counts, L.cmp, L.k, epsilon, seed))
    if trials == 1:
        return runs[0]
    runs.sort(key=lambda e: e.value)
    mid = runs[(trials - 1) // 2]
    return Estimate(mid.value, epsilon, gamma, seed, mid.failures, mid.count, trials)


ABOVE, NOT_ABOVE, INCONCLUSIVE = "AboveThreshold", "NotAbove", "Inconclusive"


@dataclass(frozen=True)
class ThresholdResult:
    decision: str
    delta: float
    estimate: Estimate = field(repr=False)

    def to_json(self) -> Dict:
        return {"decision": self.decision, "delta": self.delta, "estimate": self.estimate.to_json()}


def decide(estimate: Estimate, delta: float) -> str:
    if estimate.value - estimate.epsilon > delta:
        return ABOVE
    if estimate.value + estimate.epsilon <= delta:
        return NOT_ABOVE
    return INCONCLUSIVE


def threshold(L: LikelihoodQuery, delta: float, db: IncompleteDatabase, epsilon: float, seed: int,
              **options) -> ThresholdResult:
    """Three-way answer to "is the likelihood above δ?" backed by an ε-estimate."""
    if isinstance(delta, bool) or not isinstance(delta, (int, float)) or not 0 <= delta <= 1:
        raise ConfigError(f"delta must lie in [0, 1], got {delta!r}")
    if L.cmp == "<" and L.k == 0:
        raise ConfigError("the comparison '< 0' is never satisfied; the threshold question is trivial")
    est = like_apx(L, db, epsilon, seed, **options)
    return ThresholdResult(decide(est, float(delta)), float(delta), est)

"""The ten acceptance criteria, each at its stated tolerance.

Every criterion records a one-line PASS/FAIL summary; ``conftest.py`` prints
them at the end of the pytest run, and running this file directly prints them
as they complete.
"""

import random
import time
from fractions import Fraction
from statistics import NormalDist

import pytest

from numnulls import fixtures
from numnulls.approx import like_apx
from numnulls.condworld import Entry, check_trivial_extension, lift, prune, validate_world
from numnulls.errors import NumNullsError
from numnulls.evaluate import evaluate
from numnulls.model import apply_valuation
from numnulls.oracle import exact_likelihood_cells, grid_likelihood
from numnulls.parser import parse
from numnulls.rewrite import build_apx_query, build_rand, compile_valuation, rand_valuation

from randgen import contains_lt, gen_query, random_db, random_likelihood

RESULTS = {}


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    RESULTS[n] = line
    return ok, line


def coverage(fixture, target, epsilon, seeds):
    hits = sum(abs(like_apx(fixture.likelihood, fixture.db, epsilon, s).value - target) <= epsilon
               for s in range(seeds))
    return hits / seeds


def outcome(thunk):
    """The value of ``thunk()``, or the name of the library error it raised."""
    try:
        return thunk()
    except NumNullsError as exc:
        return type(exc).__name__


def criterion_1():
    f = fixtures.exponential()
    start = time.perf_counter()
    cov = coverage(f, 0.6321206, 0.05, 500)
    elapsed = time.perf_counter() - start
    return record(1, cov >= 0.70 and elapsed <= 60,
                  f"exponential coverage {cov:.3f} (>= 0.70) in {elapsed:.1f}s (<= 60s)")


def criterion_2():
    f = fixtures.uniform()
    target = exact_likelihood_cells(f.likelihood, f.db).value
    start = time.perf_counter()
    cov = coverage(f, target, 0.05, 500)
    elapsed = time.perf_counter() - start
    return record(2, cov >= 0.70 and elapsed <= 60 and target == 0.5,
                  f"uniform target {target} coverage {cov:.3f} (>= 0.70) in {elapsed:.1f}s")


def criterion_3():
    f = fixtures.uniform()
    target = exact_likelihood_cells(f.likelihood, f.db).value
    eps = (0.05, 0.1, 0.2)
    covs = [coverage(f, target, e, 500) for e in eps]
    monotone = all(b >= a - 0.05 for a, b in zip(covs, covs[1:]))
    detail = ", ".join(f"eps={e}: {c:.3f}" for e, c in zip(eps, covs))
    return record(3, min(covs) >= 0.70 and monotone, f"coverage {detail}; non-decreasing within 0.05")


def criterion_4():
    compared = mismatches = errors = 0
    for s in range(50):
        rng = random.Random(1000 + s)
        db = random_db(rng)
        L = random_likelihood(rng, db)
        for seed in range(3):
            def via_rewrite():
                (row,) = evaluate(build_apx_query(L, db, 0.2, seed).ast, db, mode="naive").counts
                return row[0]

            direct = outcome(lambda: like_apx(L, db, 0.2, seed).value)
            compared += 1
            errors += isinstance(direct, str)
            mismatches += outcome(via_rewrite) != direct
    return record(4, mismatches == 0 and compared == 150,
                  f"{compared} rewrite runs ({errors} raising the same error on both routes), {mismatches} mismatches")


def criterion_5():
    compared = mismatches = 0
    gamma = 25
    for s in range(50):
        rng = random.Random(2000 + s)
        db = random_db(rng)
        q, _ = gen_query(rng, 3)
        rand = build_rand(db, gamma, s)
        for i in range(1, gamma + 1):
            got = outcome(lambda: evaluate(compile_valuation(q, i, rand, db.schema()), db, mode="naive"))
            want = outcome(lambda: evaluate(q, apply_valuation(rand_valuation(rand, i), db)))
            compared += 1
            mismatches += got != want
    return record(5, mismatches == 0, f"{compared} compiled samples over 50 cases, {mismatches} mismatches")


def criterion_6():
    lifted = lift(parse("select($1 < $2, R)"), fixtures.split_world())
    x1 = Entry.var(1)
    flagged = [p for p in lifted.pairs if {x1, -x1} <= p.conditions]
    pruned = prune(lifted)
    dropped = all(p not in pruned.pairs for p in flagged) and len(pruned) == len(lifted) - len(flagged)
    report = validate_world(lifted, 10_000, 0)
    ok = len(lifted) == 4 and flagged and dropped and report.violations == 0
    return record(6, bool(ok), f"{len(lifted)} pairs before pruning, {len(flagged)} contradictory pruned, "
                               f"{report.violations} violations over 10^4 samples")


def criterion_7():
    cases = mismatches = valuations = 0
    s = 0
    while cases < 20:
        rng = random.Random(3000 + s)
        s += 1
        db = random_db(rng, max_nulls=3, max_tuples=5)
        q, _ = gen_query(rng, 4)
        if not contains_lt(q):
            continue
        rep = check_trivial_extension(q, db, 100, s)
        cases += 1
        valuations += rep.n_samples
        mismatches += rep.mismatches
    return record(7, mismatches == 0, f"{cases} cases x 100 valuations ({valuations} total), {mismatches} mismatches")


def criterion_8():
    worst = 0.0
    bad = []
    for make in fixtures.CELL_DECOMPOSABLE:
        f = make()
        exact = exact_likelihood_cells(f.likelihood, f.db)
        grid = grid_likelihood(f.likelihood, f.db, 10_000)
        worst = max(worst, grid.uncertainty)
        if abs(grid.value - exact.value) > grid.uncertainty or grid.uncertainty > 5e-4:
            bad.append(f.name)
    return record(8, not bad, f"{len(fixtures.CELL_DECOMPOSABLE)} fixtures, largest uncertainty {worst:.2e}"
                              + (f", disagree: {bad}" if bad else ""))


def criterion_9():
    exact = 0
    for s in range(50):
        rng = random.Random(4000 + s)
        db = random_db(rng)
        L = random_likelihood(rng, db, sugar=False)
        parts = [like_apx(L.with_cmp(op), db, 0.2, s) for op in "<=>"]
        exact += sum(p.fraction() for p in parts) == Fraction(1)
    return record(9, exact == 50, f"{exact}/50 cases sum to exactly 1")


def criterion_10():
    f = fixtures.intro_sum()
    phi = NormalDist()
    target = phi.cdf(3.0) - phi.cdf(1.0)
    oracle = exact_likelihood_cells(f.likelihood, f.db).value
    cov = coverage(f, target, 0.05, 200)
    ok = abs(oracle - target) <= 1e-12 and cov >= 0.70
    return record(10, ok, f"oracle {oracle:.7f} vs Phi(3)-Phi(1) {target:.7f}, coverage {cov:.3f} at eps=0.05")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_criterion(check):
    ok, line = check()
    print(line)
    assert ok, line


if __name__ == "__main__":
    for check in CRITERIA:
        print(check()[1], flush=True)

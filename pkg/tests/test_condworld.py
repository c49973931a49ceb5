import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numnulls import fixtures
from numnulls.condworld import (
    ALWAYS,
    ANSWER,
    CondDB,
    ConditionalWorld,
    Entry,
    check_trivial_extension,
    cond_holds,
    contradictory,
    instantiate,
    lift,
    prune,
    validate_world,
    world_from_json,
    world_of,
    world_to_json,
)
from numnulls.errors import BlowupLimit, MultiBranch, NoBranch
from numnulls.model import Bag, IncompleteDatabase, Normal, Null, apply_valuation
from numnulls.parser import parse, parse_expr, to_text

from randgen import contains_lt, gen_query, random_db

N1, N3 = Null(1), Null(3)
x1 = Entry.var(1)


def entry(text):
    return Entry(parse_expr(text))


def world_with(*conds, rel=None):
    rel = rel or Bag(0)
    return ConditionalWorld(tuple(CondDB({"R": rel}, frozenset(c)) for c in conds), {N1: Normal(0, 1)})


class TestWorldOf:
    def test_single_always_true_pair(self):
        db = IncompleteDatabase({"R": Bag(2, [(N1, 2.0)])}, {N1: Normal(0, 1)})
        w = world_of(db)
        assert len(w) == 1 and w.pairs[0].conditions == ALWAYS
        assert w.pairs[0].relations["R"].counts == {(Entry.var(1), Entry.const(2.0)): 1}
        assert cond_holds(ALWAYS, {N1: 123.0})

    def test_complete_database(self):
        db = IncompleteDatabase({"R": Bag(1, [(1.0,)])})
        (pair,) = world_of(db).pairs
        assert all(e.is_const() for row in pair.relations["R"].counts for e in row)


class TestConditions:
    def test_contradiction(self):
        c = {x1, -x1}
        assert contradictory(c)
        assert not any(cond_holds(c, {N1: v}) for v in (-1.0, 0.5, 3.0))

    def test_shifted_member(self):
        assert cond_holds({entry("n1 - 2")}, {N1: 1.0})

    def test_normal_form_equality(self):
        assert entry("(n1 + n3) - n3") == x1
        assert entry("0 - (n3 - (n3 + n1))") == x1


class TestLift:
    def test_worked_example_splits_four_ways(self):
        lifted = lift(parse("select($1 < $2, R)"), fixtures.split_world())
        assert len(lifted) == 4
        conds = [p.conditions - ALWAYS for p in lifted.pairs]
        assert sorted(len(c) for c in conds) == [1, 1, 2, 2]
        empty = [p for p in lifted.pairs if not p.relations[ANSWER].counts]
        assert any(p.conditions - ALWAYS == {x1, -x1} for p in empty)
        pruned = prune(lifted)
        assert len(pruned) == 2
        assert all(not contradictory(p.conditions) for p in pruned.pairs)

    def test_unary_on_singleton_world(self):
        db = IncompleteDatabase({"R": Bag(2, [(1.0, 2.0), (1.0, 3.0)])})
        (pair,) = lift(parse("project[$1](R)"), world_of(db)).pairs
        assert pair.conditions == ALWAYS
        assert pair.relations[ANSWER].counts == {(Entry.const(1.0),): 2}

    def test_binary_takes_cross_product(self):
        rel = Bag.wrap(1, {(x1,): 1})
        two = ConditionalWorld(tuple(CondDB({"A": rel, "B": rel}, frozenset({c})) for c in (x1, -x1)),
                               {N1: Normal(0, 1)})
        assert len(lift(parse("A"), two)) == 2
        assert len(lift(parse("A + B"), two)) == 4

    def test_union_multiplies_pair_counts(self):
        db = IncompleteDatabase({"R": Bag(2, [(N1, 0.0), (Null(2), 0.0)])}, {N1: Normal(0, 1), Null(2): Normal(0, 1)})
        one = parse("select($1 < $2, project[$1, $2](R))")
        # left splits on one member (2 pairs), right on two (4 pairs)
        left = parse("select($1 < $2, select($1 = $1, literal[2]{(n1, 0)}))")
        lw, rw = lift(left, world_of(db)), lift(one, world_of(db))
        assert (len(lw), len(rw)) == (2, 4)
        assert len(lift(parse("union(%s, %s)" % (to_text(left), to_text(one))), world_of(db))) == 8

    def test_literal_lifts_as_single_pair(self):
        db = IncompleteDatabase({"R": Bag(1, [(1.0,)])})
        (pair,) = lift(parse("literal[1]{(2)}"), world_of(db)).pairs
        assert pair.conditions == frozenset()

    def test_blowup_cap(self):
        db = IncompleteDatabase({"R": Bag(2, [(Null(i), 0.0) for i in range(1, 7)])},
                                {Null(i): Normal(0, 1) for i in range(1, 7)})
        with pytest.raises(BlowupLimit) as info:
            lift(parse("select($1 < $2, R)"), world_of(db), cap=32)
        assert info.value.pairs == 64 and info.value.cap == 32


class TestValidation:
    def test_world_of_database(self):
        rep = validate_world(world_of(fixtures.split_database()), 500, 1)
        assert rep.coverage_hits == 500 and rep.violations == 0

    def test_lifted_worked_example(self):
        lifted = lift(parse("select($1 < $2, R)"), fixtures.split_world())
        rep = validate_world(lifted, 10_000, 2)
        assert rep.violations == 0 and rep.coverage_hits == 10_000

    def test_overlapping_world_detected(self):
        rep = validate_world(world_with({entry("n1 - 1")}, {entry("n1 - 2")}), 2000, 3)
        assert rep.disjointness_violations > 0

    def test_gap_detected(self):
        rep = validate_world(world_with({entry("n1 - 1")}), 2000, 3)
        assert rep.coverage_misses > 0


class TestInstantiate:
    def test_world_of_is_substitution(self):
        db = fixtures.split_database()
        v = {N1: 0.25, N3: -1.0, Null(4): 0.5}
        assert instantiate(world_of(db), v)["R"] == apply_valuation(v, db).relations["R"]

    def test_worked_example_branch(self):
        lifted = prune(lift(parse("select($1 < $2, R)"), fixtures.split_world()))
        got = instantiate(lifted, {N1: 0.5, N3: 0.0})[ANSWER]
        assert got == Bag(2, [(0.0, 0.5)])

    def test_no_and_multiple_branches(self):
        with pytest.raises(NoBranch):
            instantiate(world_with({entry("n1 - 1")}), {N1: 2.0})
        with pytest.raises(MultiBranch):
            instantiate(world_with({entry("n1 - 1")}, {entry("n1 - 2")}), {N1: 0.0})

    def test_exact_entries(self):
        w = ConditionalWorld((CondDB({"R": Bag.wrap(1, {(Entry(parse_expr("n1 / 3")),): 1})}, ALWAYS),))
        assert instantiate(w, {N1: 1.0}, exact=True)["R"].counts == {(Fraction(1, 3),): 1}


class TestTrivialExtension:
    def test_projection(self):
        db = fixtures.split_database()
        rep = check_trivial_extension(parse("project[$1](R)"), db, 100, 0)
        assert rep.mismatches == 0 and rep.pairs == 1

    def test_worked_example(self):
        db = fixtures.split_database()
        rep = check_trivial_extension(parse("select($1 < $2, R)"), db, 200, 1)
        assert rep.mismatches == 0 and rep.prune_mismatches == 0
        assert rep.pairs == 4

    def test_complete_database(self):
        db = IncompleteDatabase({"R": Bag(2, [(1.0, 2.0), (3.0, 0.0)])})
        q = parse("sum[; $2](select($1 < $2, R))")
        rep = check_trivial_extension(q, db, 5, 0)
        assert rep.mismatches == 0 and rep.pairs == 1

    def test_aggregates_over_nulls(self):
        db = IncompleteDatabase({"R": Bag(2, [(N1, 1.0), (N3, 2.0), (1.0, N1)])}, {N1: Normal(0, 1), N3: Normal(1, 1)})
        for text in ("max[; $1](R)", "avg[$2; $1](R)", "select($1 * $2 > 1, R)", "dedup(apply($1 + $2, R))"):
            assert check_trivial_extension(parse(text), db, 60, 4).mismatches == 0, text

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**9))
    def test_random(self, seed):
        rng = random.Random(seed)
        while True:
            db = random_db(rng)
            q, _ = gen_query(rng, 3)
            if contains_lt(q):
                break
        try:
            rep = check_trivial_extension(q, db, 30, seed, cap=512)
        except BlowupLimit:
            return
        assert rep.mismatches == 0 and rep.prune_mismatches == 0


class TestJson:
    def test_round_trip(self):
        lifted = lift(parse("select($1 < $2, R)"), fixtures.split_world())
        doc = world_to_json(lifted)
        assert [p["pruned"] for p in doc["pairs"]].count(True) == 2
        back = world_from_json(doc)
        assert len(back) == 4
        for a, b in zip(lifted.pairs, back.pairs):
            assert a.conditions == b.conditions
            assert a.relations[ANSWER] == b.relations[ANSWER]
        assert back.annotations == lifted.annotations


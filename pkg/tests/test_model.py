import math
from statistics import NormalDist

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numnulls.errors import MultiplicityOverflow, SchemaError
from numnulls.fixtures import join_example
from numnulls.model import (
    Bag,
    Exponential,
    IncompleteDatabase,
    Normal,
    Null,
    Uniform,
    apply_valuation,
    database_from_json,
    database_to_json,
    distribution_from_json,
    nulls_of,
)

N1 = Null(1)


def per_occurrence(v, bag):
    """Oracle: expand to a list of rows, substitute each occurrence, re-count."""
    rows = []
    for row in bag:
        rows.append(tuple(v[x] if isinstance(x, Null) else x for x in row))
    out = {}
    for r in rows:
        out[r] = out.get(r, 0) + 1
    return out


class TestNulls:
    def test_nulls_of_single(self):
        db = IncompleteDatabase({"R": Bag(2, [(1, N1), (1, 1)])}, {N1: Normal(0, 1)})
        assert nulls_of(db) == {N1}

    def test_complete_database_has_no_nulls(self):
        db = IncompleteDatabase({"R": Bag(1, [(1,), (2,)])})
        assert nulls_of(db) == frozenset()
        assert db.is_complete()

    def test_join_example(self):
        assert nulls_of(join_example()) == {N1}

    def test_null_repr_and_order(self):
        assert repr(Null(3)) == "n3"
        assert Null(1) < Null(2)


class TestValuation:
    def test_substitutes(self):
        db = IncompleteDatabase({"R": Bag(2, [(1, N1)])}, {N1: Normal(0, 1)})
        assert apply_valuation({N1: 3.0}, db).relations["R"] == Bag(2, [(1.0, 3.0)])

    def test_collapse_adds_multiplicities(self):
        bag = Bag(2, [(1, N1), (1, 1)])
        db = IncompleteDatabase({"R": bag}, {N1: Normal(0, 1)})
        out = apply_valuation({N1: 1.0}, db).relations["R"]
        assert out.counts == {(1.0, 1.0): 2}
        assert out.counts == per_occurrence({N1: 1.0}, bag)

    def test_empty_valuation_on_complete(self):
        db = IncompleteDatabase({"R": Bag(1, [(1,), (1,)])})
        assert apply_valuation({}, db) == db

    @settings(max_examples=60, deadline=None)
    @given(
        rows=st.lists(st.tuples(st.sampled_from([0.0, 1.0, N1, Null(2)]), st.sampled_from([0.0, N1])),
                      max_size=6),
        a=st.sampled_from([0.0, 1.0, 2.5]),
        b=st.sampled_from([0.0, 1.0]),
    )
    def test_matches_per_occurrence_oracle(self, rows, a, b):
        bag = Bag(2, rows)
        v = {N1: a, Null(2): b}
        db = IncompleteDatabase({"R": bag}, {N1: Normal(0, 1), Null(2): Normal(0, 1)})
        assert apply_valuation(v, db).relations["R"].counts == per_occurrence(v, bag)


class TestBag:
    def test_ints_coerced(self):
        assert Bag(1, [(1,)]) == Bag(1, [(1.0,)])

    def test_multiplicity_overflow(self):
        with pytest.raises(MultiplicityOverflow):
            Bag(1, {(1.0,): 2**64})

    def test_arity_mismatch(self):
        with pytest.raises(SchemaError):
            Bag(2, [(1.0,)])

    def test_expansion_size(self):
        bag = Bag(1, {(1.0,): 3, (2.0,): 1})
        assert len(list(bag)) == bag.total() == 4


class TestDistributions:
    def test_exponential_cdf(self):
        assert Exponential(1.0).cdf(1.0) == pytest.approx(0.6321206, abs=1e-7)

    def test_uniform_midpoint(self):
        assert Uniform(0, 2).cdf(1.0) == 0.5

    def test_normal_symmetry(self):
        assert Normal(2, 0.5).cdf(2.0) == 0.5

    def test_normal_cdf_matches_stdlib(self):
        assert Normal(2, 0.5).cdf(2.5) == pytest.approx(NormalDist().cdf(1.0))

    @pytest.mark.parametrize("d", [Normal(1, 2), Uniform(-1, 3), Exponential(0.5)])
    def test_ppf_inverts_cdf(self, d):
        for p in (0.01, 0.3, 0.5, 0.9):
            assert d.cdf(d.ppf(p)) == pytest.approx(p, abs=1e-12)

    @pytest.mark.parametrize("bad", [
        {"kind": "normal", "mu": 0, "sigma": 0},
        {"kind": "uniform", "low": 1, "high": 1},
        {"kind": "exponential", "rate": -1},
        {"kind": "normal", "mu": math.inf, "sigma": 1},
    ])
    def test_rejects_bad_parameters(self, bad):
        with pytest.raises(SchemaError):
            distribution_from_json(bad)

    def test_unknown_kind(self):
        with pytest.raises(SchemaError):
            distribution_from_json({"kind": "cauchy"})


class TestJson:
    def test_round_trip(self):
        db = join_example()
        assert database_from_json(database_to_json(db)) == db

    def test_unannotated_null_rejected(self):
        doc = {"relations": {"R": {"arity": 1, "tuples": [[{"null": 1}]]}}, "nulls": {}}
        with pytest.raises(SchemaError):
            database_from_json(doc)

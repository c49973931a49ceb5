import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numnulls.errors import ParseError, QueryTypeError
from numnulls.expr import Add, Attr, Const, Mul, NullVar
from numnulls.parser import intervals_from_json, intervals_to_json, parse, parse_expr, to_text
from numnulls.query import (
    Apply,
    Base,
    Cmp,
    Count,
    Eq,
    InInterval,
    IntervalSpec,
    Let,
    Lt,
    Product,
    Project,
    Ref,
    Select,
    SumGroup,
    UnionAll,
    arity_of,
)

from randgen import SCHEMA, gen_query


class TestParse:
    def test_select_lt(self):
        assert parse("select($1 < $2, R)") == Select(Lt(1, 2), Base("R"))

    def test_count_encoding(self):
        assert parse("sum[$1; $3](apply(1, R))") == SumGroup((1,), 3, Apply(Const(1.0), Base("R")))

    def test_unclosed(self):
        with pytest.raises(ParseError) as info:
            parse("project[$1]( R ×")
        assert info.value.line == 1 and info.value.column > 1
        assert info.value.expected

    def test_error_position_on_later_line(self):
        with pytest.raises(ParseError) as info:
            parse("union(R,\n  S S)")
        assert info.value.line == 2

    def test_unicode_and_ascii_operators(self):
        assert parse("R × S ∪ T") == parse("R * S + T") == UnionAll(Product(Base("R"), Base("S")), Base("T"))

    def test_comparison_of_attributes_is_core(self):
        assert parse("select($2 = $1, R)") == Select(Eq(2, 1), Base("R"))
        assert parse("select($1 > $2, R)") == Select(Lt(2, 1), Base("R"))

    def test_arithmetic_comparison(self):
        q = parse("select($1 * 2 >= n1, R)")
        assert q == Select(Cmp(Mul(Attr(1), Const(2.0)), ">=", NullVar(1)), Base("R"))

    def test_interval_membership(self):
        q = parse("select($1 in [2.5, +inf), R)")
        assert q == Select(InInterval(1, IntervalSpec(Const(2.5), None, True, False)), Base("R"))

    def test_power_expands(self):
        assert parse_expr("$1^3") == Mul(Mul(Attr(1), Attr(1)), Attr(1))

    def test_let_scoping(self):
        q = parse("let %a = R, %b = union(%a, %a) in %b")
        assert q == Let((("%a", Base("R")), ("%b", UnionAll(Ref("%a"), Ref("%a")))), Ref("%b"))
        with pytest.raises(ParseError):
            parse("union(%a, R)")

    def test_literal_with_multiplicity(self):
        q = parse("literal[2]{(1, n1) # 3, (2, 2)}")
        assert q.rows == (((Const(1.0), NullVar(1)), 3), ((Const(2.0), Const(2.0)), 1))

    def test_literal_arity_mismatch(self):
        with pytest.raises(ParseError):
            parse("literal[2]{(1)}")

    def test_comments(self):
        assert parse("## header\nR ## trailing") == Base("R")

    @pytest.mark.parametrize("text", ["select($0 < $1, R)", "select($1 <, R)", "sum[$1](R)", "R S", ""])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse(text)


class TestArity:
    def test_product(self):
        assert arity_of(parse("R × S"), {"R": 2, "S": 1}) == 3

    def test_union_mismatch(self):
        with pytest.raises(QueryTypeError):
            arity_of(parse("union(R, T)"), {"R": 2, "T": 3})

    def test_empty_grouping(self):
        assert arity_of(parse("sum[; $1](S)"), {"S": 1}) == 1

    def test_apply_and_count(self):
        assert arity_of(Count((1,), Apply(Add(Attr(1), Const(1.0)), Base("R"))), {"R": 2}) == 2

    def test_position_out_of_range(self):
        with pytest.raises(QueryTypeError):
            arity_of(Project((3,), Base("R")), {"R": 2})


class TestRoundTrip:
    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 10**9), depth=st.integers(0, 4), indent=st.sampled_from([None, 2]))
    def test_print_parse_fixpoint(self, seed, depth, indent):
        q, n = gen_query(random.Random(seed), depth)
        once = parse(to_text(q, indent))
        assert parse(to_text(once, indent)) == once
        assert arity_of(once, SCHEMA) == n

    def test_parsed_ast_is_fixpoint(self):
        text = "let %x = select(not ($1 = 2 or $2 in (n1 + 1, 4]), R) in avg[$1; $2](%x × S)"
        q = parse(text)
        assert parse(to_text(q)) == q
        assert parse(to_text(q, indent=2)) == q

    def test_intervals_json(self):
        spec = (IntervalSpec(Add(NullVar(1), Const(3.0)), Const(4.0), True, True), IntervalSpec())
        assert intervals_from_json(intervals_to_json(spec)) == spec

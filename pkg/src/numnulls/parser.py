"""Recursive-descent parser and printer for the query text syntax.

See ``docs/grammar.md`` for the EBNF. The printer emits prefix forms only, and
``parse(to_text(q)) == q`` holds for every AST the parser can produce.
"""

from __future__ import annotations

import math
import re
from typing import List, NamedTuple, Optional

from .errors import ParseError
from .expr import Add, Attr, Const, Div, Expr, Mul, NullVar, Sub, neg, to_text as expr_text
from .query import (
    And,
    Apply,
    Avg,
    Base,
    Cmp,
    Count,
    Dedup,
    Eq,
    ExceptAll,
    InInterval,
    IntervalSpec,
    IsConst,
    Let,
    Literal,
    Lt,
    Max,
    Min,
    Not,
    Or,
    Product,
    Project,
    Query,
    Ref,
    Select,
    SumGroup,
    UnionAll,
    cmp,
)


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


KEYWORDS = {
    "select", "project", "product", "union", "except", "apply", "sum", "count",
    "avg", "min", "max", "dedup", "literal", "let", "in", "and", "or", "not",
    "const", "inf",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<attr>\$\d+)
  | (?P<ref>%[A-Za-z_][A-Za-z0-9_]*)
  | (?P<null>n\d+\b)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|!=|<>|≤|≥|≠|[()\[\]{},;+\-*/^=<>×∪∖\\#])
    """,
    re.VERBOSE,
)

_ALIASES = {"≤": "<=", "≥": ">=", "≠": "!=", "<>": "!=", "∖": "\\"}


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            if kind == "ident" and value in KEYWORDS:
                kind = value
            elif kind == "op":
                kind = _ALIASES.get(value, value)
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.scopes: List[set] = [set()]

    # -- helpers -----------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message, expected=()):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{message}, found {found}", t.line, t.col, expected)

    def accept(self, *kinds) -> Optional[Token]:
        if self.tok.kind in kinds:
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, *kinds) -> Token:
        t = self.accept(*kinds)
        if t is None:
            self.error("unexpected token", kinds)
        return t

    def done(self):
        if self.tok.kind != "eof":
            self.error("trailing input", ("eof",))

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        e = self.term()
        while True:
            t = self.accept("+", "-")
            if t is None:
                return e
            r = self.term()
            e = Add(e, r) if t.kind == "+" else Sub(e, r)

    def term(self) -> Expr:
        e = self.power()
        while True:
            t = self.accept("*", "/")
            if t is None:
                return e
            r = self.power()
            e = Mul(e, r) if t.kind == "*" else Div(e, r)

    def power(self) -> Expr:
        e = self.unary()
        if self.accept("^"):
            t = self.expect("num")
            if not t.text.isdigit() or int(t.text) < 1:
                raise ParseError("exponent must be a positive integer", t.line, t.col)
            base = e
            for _ in range(int(t.text) - 1):
                e = Mul(e, base)
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            if self.tok.kind == "num":
                return Const(-float(self.expect("num").text))
            return neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if self.accept("num"):
            return Const(float(t.text))
        if self.accept("attr"):
            pos = int(t.text[1:])
            if pos < 1:
                raise ParseError("attribute positions start at $1", t.line, t.col)
            return Attr(pos)
        if self.accept("null"):
            return NullVar(int(t.text[1:]))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected an expression", ("num", "attr", "null", "("))

    def position(self) -> int:
        t = self.expect("attr")
        pos = int(t.text[1:])
        if pos < 1:
            raise ParseError("attribute positions start at $1", t.line, t.col)
        return pos

    def positions(self, closer) -> tuple:
        out = []
        if self.tok.kind == closer:
            return ()
        out.append(self.position())
        while self.accept(","):
            out.append(self.position())
        return tuple(out)

    # -- conditions --------------------------------------------------------

    def cond(self):
        c = self.conj()
        while self.accept("or"):
            c = Or(c, self.conj())
        return c

    def conj(self):
        c = self.neg_cond()
        while self.accept("and"):
            c = And(c, self.neg_cond())
        return c

    def neg_cond(self):
        if self.accept("not"):
            return Not(self.neg_cond())
        return self.atom()

    def atom(self):
        if self.accept("const"):
            self.expect("(")
            i = self.position()
            self.expect(")")
            return IsConst(i)
        if self.tok.kind == "(":
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.expect("(")
            c = self.cond()
            self.expect(")")
            return c
        return self.comparison()

    def comparison(self):
        left = self.expr()
        if self.accept("in"):
            if not isinstance(left, Attr):
                self.error("interval membership needs an attribute on the left")
            return InInterval(left.pos, self.interval())
        t = self.expect("=", "!=", "<", ">", "<=", ">=")
        right = self.expr()
        return cmp(left, t.kind, right)

    def bound(self, side):
        save = self.i
        sign = self.accept("-", "+")
        if self.accept("inf"):
            if sign is None:
                return None if side == "hi" else self._bad_inf()
            if (sign.kind == "-") != (side == "lo"):
                self._bad_inf()
            return None
        self.i = save
        return self.expr()

    def _bad_inf(self):
        self.error("lower bound may only be -inf and upper bound only +inf")

    def interval(self) -> IntervalSpec:
        opener = self.expect("[", "(")
        lo = self.bound("lo")
        self.expect(",")
        hi = self.bound("hi")
        closer = self.expect("]", ")")
        return IntervalSpec(lo, hi, opener.kind == "[", closer.kind == "]")

    # -- queries -----------------------------------------------------------

    def query(self) -> Query:
        q = self.product_chain()
        while True:
            t = self.accept("∪", "+", "\\", "-")
            if t is None:
                return q
            r = self.product_chain()
            q = UnionAll(q, r) if t.kind in ("∪", "+") else ExceptAll(q, r)

    def product_chain(self) -> Query:
        q = self.primary_query()
        while self.accept("×", "*"):
            q = Product(q, self.primary_query())
        return q

    def group_spec(self):
        self.expect("[")
        groups = self.positions(";")
        self.expect(";")
        column = self.position()
        self.expect("]")
        return groups, column

    def paren_query(self) -> Query:
        self.expect("(")
        q = self.query()
        self.expect(")")
        return q

    def primary_query(self) -> Query:
        t = self.tok
        k = t.kind
        if k == "ident":
            self.i += 1
            return Base(t.text)
        if k == "ref":
            self.i += 1
            if not any(t.text in s for s in self.scopes):
                raise ParseError(f"unbound reference {t.text}", t.line, t.col)
            return Ref(t.text)
        if k == "(":
            return self.paren_query()
        if self.accept("select"):
            self.expect("(")
            c = self.cond()
            self.expect(",")
            q = self.query()
            self.expect(")")
            return Select(c, q)
        if self.accept("project"):
            self.expect("[")
            pos = self.positions("]")
            self.expect("]")
            return Project(pos, self.paren_query())
        if k in ("product", "union", "except"):
            self.i += 1
            self.expect("(")
            a = self.query()
            self.expect(",")
            b = self.query()
            self.expect(")")
            return {"product": Product, "union": UnionAll, "except": ExceptAll}[k](a, b)
        if self.accept("apply"):
            self.expect("(")
            f = self.expr()
            self.expect(",")
            q = self.query()
            self.expect(")")
            return Apply(f, q)
        if k in ("sum", "avg", "min", "max"):
            self.i += 1
            groups, column = self.group_spec()
            node = {"sum": SumGroup, "avg": Avg, "min": Min, "max": Max}[k]
            return node(groups, column, self.paren_query())
        if self.accept("count"):
            self.expect("[")
            groups = self.positions("]")
            self.expect("]")
            return Count(groups, self.paren_query())
        if self.accept("dedup"):
            return Dedup(self.paren_query())
        if self.accept("literal"):
            return self.literal()
        if self.accept("let"):
            return self.let()
        self.error("expected a query", ("ident", "ref", "(", "select", "project", "product", "union",
                                        "except", "apply", "sum", "count", "avg", "min", "max",
                                        "dedup", "literal", "let"))

    def literal(self) -> Literal:
        self.expect("[")
        t = self.expect("num")
        if not t.text.isdigit():
            raise ParseError("literal arity must be an integer", t.line, t.col)
        arity = int(t.text)
        self.expect("]")
        self.expect("{")
        rows = []
        if self.tok.kind != "}":
            rows.append(self.literal_row(arity))
            while self.accept(","):
                rows.append(self.literal_row(arity))
        self.expect("}")
        return Literal(arity, tuple(rows))

    def literal_row(self, arity):
        start = self.tok
        self.expect("(")
        row = []
        if self.tok.kind != ")":
            row.append(self.expr())
            while self.accept(","):
                row.append(self.expr())
        self.expect(")")
        if len(row) != arity:
            raise ParseError(f"literal row has {len(row)} entries, arity is {arity}", start.line, start.col)
        k = 1
        if self.accept("#"):
            t = self.expect("num")
            if not t.text.isdigit() or int(t.text) < 1:
                raise ParseError("multiplicity must be a positive integer", t.line, t.col)
            k = int(t.text)
        return tuple(row), k

    def let(self) -> Let:
        bindings = []
        self.scopes.append(set())
        while True:
            name = self.expect("ref").text
            self.expect("=")
            bound = self.query()
            self.scopes[-1].add(name)
            bindings.append((name, bound))
            if not self.accept(","):
                break
        self.expect("in")
        body = self.query()
        self.scopes.pop()
        return Let(tuple(bindings), body)


def parse(text: str) -> Query:
    p = Parser(text)
    q = p.query()
    p.done()
    return q


def parse_expr(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    p.done()
    return e


def parse_condition(text: str):
    p = Parser(text)
    c = p.cond()
    p.done()
    return c


def parse_bound(text: str, side: str):
    """An interval endpoint: an expression, or -inf / +inf."""
    p = Parser(text)
    b = p.bound(side)
    p.done()
    return b


# -- printing -----------------------------------------------------------------


def _positions(ps) -> str:
    return ", ".join(f"${p}" for p in ps)


def bound_text(e, side) -> str:
    if e is None:
        return "-inf" if side == "lo" else "+inf"
    return expr_text(e)


def interval_text(spec: IntervalSpec) -> str:
    return (
        ("[" if spec.lo_closed else "(")
        + bound_text(spec.lo, "lo")
        + ", "
        + bound_text(spec.hi, "hi")
        + ("]" if spec.hi_closed else ")")
    )


def cond_text(c) -> str:
    if isinstance(c, Eq):
        return f"${c.i} = ${c.j}"
    if isinstance(c, Lt):
        return f"${c.i} < ${c.j}"
    if isinstance(c, IsConst):
        return f"const(${c.i})"
    if isinstance(c, Cmp):
        return f"{expr_text(c.left)} {c.op} {expr_text(c.right)}"
    if isinstance(c, InInterval):
        return f"${c.i} in {interval_text(c.spec)}"
    if isinstance(c, And):
        return f"({cond_text(c.left)} and {cond_text(c.right)})"
    if isinstance(c, Or):
        return f"({cond_text(c.left)} or {cond_text(c.right)})"
    if isinstance(c, Not):
        return f"not ({cond_text(c.inner)})"
    raise TypeError(f"not a condition: {c!r}")


def to_text(q: Query, indent: Optional[int] = None) -> str:
    """Prefix-form text of ``q``; ``indent`` pretty-prints let bindings on separate lines."""
    parts: List[str] = []
    _emit(q, parts, indent, 0)
    return "".join(parts)


def _emit(q, out, indent, depth):
    w = out.append
    if isinstance(q, Base):
        w(q.name)
    elif isinstance(q, Ref):
        w(q.name)
    elif isinstance(q, Literal):
        rows = []
        for row, k in q.rows:
            text = "(" + ", ".join(expr_text(e) for e in row) + ")"
            rows.append(text + (f" # {k}" if k != 1 else ""))
        w(f"literal[{q.arity}]{{" + ", ".join(rows) + "}")
    elif isinstance(q, Project):
        w(f"project[{_positions(q.positions)}](")
        _emit(q.child, out, indent, depth)
        w(")")
    elif isinstance(q, Select):
        w(f"select({cond_text(q.cond)}, ")
        _emit(q.child, out, indent, depth)
        w(")")
    elif isinstance(q, (Product, UnionAll, ExceptAll)):
        w({Product: "product(", UnionAll: "union(", ExceptAll: "except("}[type(q)])
        _emit(q.left, out, indent, depth)
        w(", ")
        _emit(q.right, out, indent, depth)
        w(")")
    elif isinstance(q, Apply):
        w(f"apply({expr_text(q.fn)}, ")
        _emit(q.child, out, indent, depth)
        w(")")
    elif isinstance(q, (SumGroup, Avg, Min, Max)):
        name = {SumGroup: "sum", Avg: "avg", Min: "min", Max: "max"}[type(q)]
        w(f"{name}[{_positions(q.groups)}; ${q.column}](")
        _emit(q.child, out, indent, depth)
        w(")")
    elif isinstance(q, Count):
        w(f"count[{_positions(q.groups)}](")
        _emit(q.child, out, indent, depth)
        w(")")
    elif isinstance(q, Dedup):
        w("dedup(")
        _emit(q.child, out, indent, depth)
        w(")")
    elif isinstance(q, Let):
        sep = ",\n" + " " * (indent * (depth + 1)) if indent is not None else ", "
        lead = "\n" + " " * (indent * (depth + 1)) if indent is not None else " "
        w("let" + lead)
        for n, (name, bound) in enumerate(q.bindings):
            if n:
                w(sep)
            w(f"{name} = ")
            _emit(bound, out, indent, depth + 1)
        w(("\n" + " " * (indent * depth) if indent is not None else " ") + "in ")
        _emit(q.body, out, indent, depth)
    else:
        raise TypeError(f"not a query: {q!r}")


# -- interval tuples as JSON -----------------------------------------------------


def _bound_from_json(x, side):
    from .errors import SchemaError

    if isinstance(x, bool) or x is None:
        raise SchemaError(f"interval bound must be a number or expression text, got {x!r}")
    if isinstance(x, (int, float)):
        if math.isinf(x):
            if (x < 0) != (side == "lo"):
                raise SchemaError(f"{x} is not a valid {side} bound")
            return None
        return Const(float(x))
    if isinstance(x, str):
        try:
            return parse_bound(x, side)
        except ParseError as exc:
            raise SchemaError(f"bad interval bound {x!r}: {exc}") from None
    raise SchemaError(f"interval bound must be a number or expression text, got {x!r}")


def intervals_from_json(doc) -> tuple:
    """Interval tuple from ``[{"lo": ..., "hi": ..., "lo_closed": ..., "hi_closed": ...}, ...]``."""
    from .errors import SchemaError

    if not isinstance(doc, list):
        raise SchemaError("an interval tuple is a JSON array")
    out = []
    for item in doc:
        if not isinstance(item, dict):
            raise SchemaError(f"interval entries are objects, got {item!r}")
        unknown = set(item) - {"lo", "hi", "lo_closed", "hi_closed"}
        if unknown:
            raise SchemaError(f"unknown interval keys {sorted(unknown)}")
        lo = _bound_from_json(item.get("lo", "-inf"), "lo")
        hi = _bound_from_json(item.get("hi", "+inf"), "hi")
        flags = [item.get("lo_closed", False), item.get("hi_closed", False)]
        if not all(isinstance(f, bool) for f in flags):
            raise SchemaError("lo_closed and hi_closed must be booleans")
        out.append(IntervalSpec(lo, hi, flags[0], flags[1]))
    return tuple(out)


def intervals_to_json(intervals) -> list:
    return [
        {
            "lo": bound_text(s.lo, "lo"),
            "hi": bound_text(s.hi, "hi"),
            "lo_closed": s.lo_closed,
            "hi_closed": s.hi_closed,
        }
        for s in intervals
    ]

"""Exact rational functions over nulls with rational coefficients.

Used as the equality notion of the arithmetic domain RAT[nulls]: two
expressions are the same value iff their rational functions are equal,
decided exactly by cross-multiplication. Hashing evaluates the function at a
fixed point modulo a Mersenne prime, which equal functions always agree on.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Mapping, Tuple

from .errors import DivByZero
from .expr import Add, Attr, Const, Div, Expr, Mul, NullVar, Sub

Monomial = Tuple[Tuple[int, int], ...]  # sorted (null id, exponent) pairs

_P = (1 << 61) - 1


def _point(null_id: int) -> int:
    # fixed pseudo-random evaluation point per null, never 0 mod P
    z = (null_id * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 29
    return z % (_P - 1) + 1


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms: Dict[Monomial, Fraction]):
        self.terms = {m: c for m, c in terms.items() if c}

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    @classmethod
    def var(cls, null_id: int) -> "Poly":
        return cls({((null_id, 1),): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(not m for m in self.terms)

    def const_value(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    def scale(self, c: Fraction) -> "Poly":
        return Poly({m: v * c for m, v in self.terms.items()})

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def mod_eval(self) -> int:
        total = 0
        for m, c in self.terms.items():
            t = c.numerator % _P * pow(c.denominator % _P, -1, _P) % _P
            for v, e in m:
                t = t * pow(_point(v), e, _P) % _P
            total += t
        return total % _P

    def nulls(self):
        return {v for m in self.terms for v, _ in m}

    def at(self, values: Mapping[int, Fraction]) -> Fraction:
        """Exact value with null ``i`` set to ``values[i]``."""
        total = Fraction(0)
        for m, c in self.terms.items():
            t = c
            for v, e in m:
                t *= values[v] ** e
            total += t
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items()):
            mono = "*".join(f"n{v}" + (f"^{e}" if e != 1 else "") for v, e in m)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


class RatFunc:
    """``num / den`` with ``den`` never the zero polynomial."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Poly, den: Poly):
        if den.is_zero():
            raise DivByZero("rational function with zero denominator")
        if den.is_const():
            c = den.const_value()
            if c != 1:
                num = num.scale(1 / c)
                den = Poly.const(1)
        self.num = num
        self.den = den
        self._hash = None

    @classmethod
    def const(cls, c) -> "RatFunc":
        return cls(Poly.const(c), Poly.const(1))

    @classmethod
    def var(cls, null_id: int) -> "RatFunc":
        return cls(Poly.var(null_id), Poly.const(1))

    def is_const(self) -> bool:
        return self.num.is_const() and self.den.is_const()

    def const_value(self) -> Fraction:
        return self.num.const_value() / self.den.const_value()

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __add__(self, other: "RatFunc") -> "RatFunc":
        if self.den == other.den:
            return RatFunc(self.num + other.num, self.den)
        return RatFunc(self.num * other.den + other.num * self.den, self.den * other.den)

    def __sub__(self, other: "RatFunc") -> "RatFunc":
        return self + (-other)

    def __neg__(self) -> "RatFunc":
        return RatFunc(-self.num, self.den)

    def __mul__(self, other: "RatFunc") -> "RatFunc":
        return RatFunc(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "RatFunc") -> "RatFunc":
        if other.is_zero():
            raise DivByZero("division by the zero function")
        return RatFunc(self.num * other.den, self.den * other.num)

    def __eq__(self, other):
        if not isinstance(other, RatFunc):
            return NotImplemented
        if self.den == other.den:
            return self.num == other.num
        return self.num * other.den == other.num * self.den

    def __hash__(self):
        if self._hash is None:
            d = self.den.mod_eval()
            self._hash = hash(("rf", self.num.mod_eval() * pow(d, -1, _P) % _P)) if d else hash("rf-singular")
        return self._hash

    def nulls(self):
        return self.num.nulls() | self.den.nulls()

    def __repr__(self):
        if self.den.is_const():
            return f"RatFunc({self.num!r})"
        return f"RatFunc(({self.num!r}) / ({self.den!r}))"


def from_expr(e: Expr) -> RatFunc:
    if isinstance(e, Const):
        return RatFunc.const(e.value)
    if isinstance(e, NullVar):
        return RatFunc.var(e.null)
    if isinstance(e, Attr):
        raise ValueError("attribute references have no rational function over nulls")
    left, right = from_expr(e.left), from_expr(e.right)
    if isinstance(e, Add):
        return left + right
    if isinstance(e, Sub):
        return left - right
    if isinstance(e, Mul):
        return left * right
    if isinstance(e, Div):
        return left / right
    raise TypeError(f"not an expression: {e!r}")

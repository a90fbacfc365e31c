"""Real quadratic fields Q(sqrt(m)): exact elements, continued-fraction
fundamental units, class data via cycles of reduced indefinite forms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .arith import ResourceLimitError, is_perfect_square, is_squarefree
from . import forms

CF_ITERATION_CAP = 10**6
DEFAULT_DISC_BOUND = 10**7


@dataclass(frozen=True)
class QuadField:
    m: int

    def __post_init__(self):
        if self.m <= 1 or not is_squarefree(self.m):
            raise ValueError(f"QuadField needs a squarefree integer > 1, got {self.m}")

    @property
    def disc(self) -> int:
        return self.m if self.m % 4 == 1 else 4 * self.m


class QuadElem:
    """(a + b*sqrt(m))/den with integer a, b and positive integer den.

    Canonical form: gcd(a, b, den) = 1, den > 0.  Algebraic integers of the
    maximal order always canonicalize to den in {1, 2}; general arithmetic
    (inverses of non-units) may produce larger denominators.
    """

    __slots__ = ("a", "b", "den", "field")

    def __init__(self, a: int, b: int, den: int, field: QuadField):
        if den == 0:
            raise ZeroDivisionError("den = 0")
        if den < 0:
            a, b, den = -a, -b, -den
        g = math.gcd(math.gcd(a, b), den)
        self.a = a // g
        self.b = b // g
        self.den = den // g
        self.field = field

    @classmethod
    def from_fractions(cls, a: Fraction, b: Fraction, field: QuadField) -> "QuadElem":
        den = math.lcm(a.denominator, b.denominator)
        return cls(int(a * den), int(b * den), den, field)

    def coords(self) -> tuple[Fraction, Fraction]:
        return Fraction(self.a, self.den), Fraction(self.b, self.den)

    def __eq__(self, other):
        if isinstance(other, int):
            other = QuadElem(other, 0, 1, self.field)
        return (
            isinstance(other, QuadElem)
            and self.field == other.field
            and (self.a, self.b, self.den) == (other.a, other.b, other.den)
        )

    def __hash__(self):
        return hash((self.a, self.b, self.den, self.field.m))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __neg__(self):
        return QuadElem(-self.a, -self.b, self.den, self.field)

    def __add__(self, other):
        if isinstance(other, int):
            other = QuadElem(other, 0, 1, self.field)
        self._same(other)
        return QuadElem(
            self.a * other.den + other.a * self.den,
            self.b * other.den + other.b * self.den,
            self.den * other.den,
            self.field,
        )

    def __sub__(self, other):
        return self + (-other if isinstance(other, QuadElem) else -QuadElem(other, 0, 1, self.field))

    def __mul__(self, other):
        if isinstance(other, int):
            return QuadElem(self.a * other, self.b * other, self.den, self.field)
        self._same(other)
        m = self.field.m
        return QuadElem(
            self.a * other.a + m * self.b * other.b,
            self.a * other.b + self.b * other.a,
            self.den * other.den,
            self.field,
        )

    __rmul__ = __mul__

    def conj(self) -> "QuadElem":
        return QuadElem(self.a, -self.b, self.den, self.field)

    def norm(self) -> Fraction:
        return Fraction(self.a * self.a - self.field.m * self.b * self.b, self.den * self.den)

    def trace(self) -> Fraction:
        return Fraction(2 * self.a, self.den)

    def inv(self) -> "QuadElem":
        # 1/x = conj(x)/N(x) = den*(a - b*sqrt(m)) / (a^2 - m*b^2)
        if not self:
            raise ZeroDivisionError("inverse of zero")
        n = self.a * self.a - self.field.m * self.b * self.b
        return QuadElem(self.den * self.a, -self.den * self.b, n, self.field)

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        out = QuadElem(1, 0, 1, self.field)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def is_integral(self) -> bool:
        if self.den == 1:
            return True
        return self.den == 2 and self.field.m % 4 == 1 and (self.a - self.b) % 2 == 0

    def _same(self, other: "QuadElem"):
        if self.field != other.field:
            raise ValueError("mixed fields")

    def __float__(self):
        return (self.a + self.b * math.sqrt(self.field.m)) / self.den

    def __repr__(self):
        return f"({self.a}+{self.b}*sqrt({self.field.m}))/{self.den}"


def quad_arith(x: QuadElem, y: QuadElem | None, op: str):
    """Dispatch form of the element operations (add/mul/conj/norm/inv)."""
    if op == "add":
        return x + y
    if op == "mul":
        return x * y
    if op == "conj":
        return x.conj()
    if op == "norm":
        return x.norm()
    if op == "inv":
        return x.inv()
    raise ValueError(f"unknown op {op!r}")


@dataclass(frozen=True)
class FundUnit:
    value: QuadElem
    norm: int  # +1 or -1
    cf_period: int


def _matprod(terms: list[int], lo: int, hi: int) -> tuple[int, int, int, int]:
    # product of [[a,1],[1,0]] over terms[lo:hi], balanced for big entries
    if hi - lo == 1:
        return terms[lo], 1, 1, 0
    mid = (lo + hi) // 2
    a, b, c, d = _matprod(terms, lo, mid)
    e, f, g, h = _matprod(terms, mid, hi)
    return a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h


@lru_cache(maxsize=None)
def fundamental_unit(m: int) -> FundUnit:
    """Fundamental unit of the maximal order of Q(sqrt(m)).

    Continued fraction of sqrt(m), or (1+sqrt(m))/2 when m = 1 (mod 4);
    the expansion becomes purely periodic at index 1, the period ell is
    detected by state recurrence, and the unit is p - q*conj(omega) built
    from the convergent p/q at index ell-1.  norm = (-1)^ell.
    """
    if m <= 1 or not is_squarefree(m):
        raise ValueError(f"need squarefree m > 1, got {m}")
    field = QuadField(m)
    s = math.isqrt(m)
    if m % 4 == 1:
        P, Q = 1, 2
    else:
        P, Q = 0, 1
    a0 = (P + s) // Q
    terms = [a0]
    P1 = a0 * Q - P
    Q1 = (m - P1 * P1) // Q
    state1 = (P1, Q1)
    Pk, Qk = state1
    while True:
        a = (Pk + s) // Qk
        terms.append(a)
        Pn = a * Qk - Pk
        Qn = (m - Pn * Pn) // Qk
        if (Pn, Qn) == state1:
            break
        Pk, Qk = Pn, Qn
        if len(terms) > CF_ITERATION_CAP:
            raise ResourceLimitError(f"continued fraction of sqrt({m}) exceeded {CF_ITERATION_CAP} steps")
    ell = len(terms) - 1
    p, _, q, _ = _matprod(terms, 0, ell)
    if m % 4 == 1:
        value = QuadElem(2 * p - q, q, 2, field)
    else:
        value = QuadElem(p, q, 1, field)
    norm = -1 if ell % 2 else 1
    assert value.norm() == norm, (m, value, norm)
    return FundUnit(value=value, norm=norm, cf_period=ell)


@dataclass(frozen=True)
class ClassData:
    m: int
    h: int
    h_narrow: int
    h2: int
    structure: tuple[int, ...] | None = None  # elementary divisors of the 2-class group


@lru_cache(maxsize=None)
def _class_data_cached(m: int, disc_bound: int, with_structure: bool) -> ClassData:
    field = QuadField(m)
    D = field.disc
    if D > disc_bound:
        raise ResourceLimitError(f"discriminant {D} exceeds bound {disc_bound}")
    h_narrow = forms.narrow_class_number(D)
    unit = fundamental_unit(m)
    if unit.norm == -1:
        h = h_narrow
    else:
        assert h_narrow % 2 == 0, (m, h_narrow)
        h = h_narrow // 2
    h2 = 1
    while h % (2 * h2) == 0:
        h2 *= 2
    structure = None
    if with_structure:
        structure = forms.wide_two_sylow(D, unit.norm)
    return ClassData(m=m, h=h, h_narrow=h_narrow, h2=h2, structure=structure)


def class_number(m: int, disc_bound: int = DEFAULT_DISC_BOUND, with_structure: bool = False) -> ClassData:
    """Wide and narrow class data of Q(sqrt(m)) via reduced-form cycles.

    h_narrow counts cycles of reduced indefinite forms of the fundamental
    discriminant; h follows from the fundamental unit norm; h2 is the
    2-part of h.  Work above disc_bound raises ResourceLimitError.
    """
    from . import cache as _cache

    cached = _cache.lookup_class_data(m) if not with_structure else None
    if cached is not None:
        return cached
    data = _class_data_cached(m, disc_bound, with_structure)
    if not with_structure:
        _cache.store_class_data(data, fundamental_unit(m))
    return data


def _rational_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    rn = is_perfect_square(x.numerator)
    rd = is_perfect_square(x.denominator)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)


def square_in_quad(u: QuadElem) -> QuadElem | None:
    """Exact square root of u inside Q(sqrt(m)), or None.

    Needs N(u) to be a rational square c^2; then x^2 = (A +- c)/2 must be a
    rational square, where u = A + B*sqrt(m).  The returned root squares to
    u exactly.
    """
    if not u:
        raise ValueError("square root of 0 requested")
    A, B = u.coords()
    if B == 0:
        r = _rational_sqrt(A)
        if r is None:
            return None
        return QuadElem.from_fractions(r, Fraction(0), u.field)
    c = _rational_sqrt(u.norm())
    if c is None:
        return None
    for cc in (c, -c):
        x2 = (A + cc) / 2
        x = _rational_sqrt(x2)
        if x is None or x == 0:
            continue
        z = B / (2 * x)
        cand = QuadElem.from_fractions(x, z, u.field)
        if cand * cand == u:
            return cand
    return None

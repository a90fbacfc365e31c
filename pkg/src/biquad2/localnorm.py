"""Local norm computations over completions of real quadratic fields.

Supplies the independent rank oracle: ramified places of K = F(sqrt(d))
over F = Q(sqrt(m)), Hilbert symbols of units at those places, the unit
norm index e as an F2 matrix rank, and rank(A(K)) = t - 1 - e.

Dyadic places of F come in three shapes (m mod 8): split (two copies of
Q_2), inert (the unramified quadratic extension), ramified (one of the
ramified quadratic extensions).  Nonsplit dyadic symbols are decided by
exhaustive residue search with quadratic Hensel certification, and
cross-checked against the projection formula (N(u), d)_2 on every call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .arith import factor, kronecker, sqrt_mod_prime
from .quad import DEFAULT_DISC_BOUND, QuadElem, QuadField, class_number, fundamental_unit


class QOError(ValueError):
    """The base field does not have odd class number."""


@dataclass(frozen=True)
class RamifiedPrime:
    rational_prime: int  # 2 marks the dyadic place
    split_type_in_F: str  # 'split' | 'inert' | 'ramified'
    count_in_F: int  # number of places of F over the rational prime
    ramifies_in_K: bool
    conj: int = 0  # selects the place when split_type_in_F == 'split'

    def label(self) -> str:
        if self.split_type_in_F == "split":
            return f"{self.rational_prime}{'ab'[self.conj]}"
        return str(self.rational_prime)


@dataclass
class SymbolMatrix:
    row_labels: list[str]  # generators of E_F modulo squares
    col_labels: list[str]  # ramified places
    entries: list[list[int]]  # +1 / -1

    def f2_rank(self) -> int:
        basis: list[int] = []
        for r in self.entries:
            v = 0
            for j, x in enumerate(r):
                if x == -1:
                    v |= 1 << j
            for b in basis:
                v = min(v, v ^ b)
            if v:
                basis.append(v)
                basis.sort(reverse=True)
        return len(basis)


@dataclass
class RankCertificate:
    t: int
    e: int
    rank: int
    method: str
    matrix: SymbolMatrix


# ---------------------------------------------------------------------------
# rational Hilbert symbols


def _split_val(x: int, p: int) -> tuple[int, int]:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v, x


def hilbert_qp(a, b, p: int | None) -> int:
    """Quadratic Hilbert symbol (a, b)_p over Q_p; p=None is the real place."""
    a = Fraction(a)
    b = Fraction(b)
    if a == 0 or b == 0:
        raise ValueError("Hilbert symbol needs nonzero arguments")
    x = a.numerator * a.denominator
    y = b.numerator * b.denominator
    if p is None:
        return -1 if x < 0 and y < 0 else 1
    if p == 2:
        al, x0 = _split_val(x, 2)
        be, y0 = _split_val(y, 2)
        eps = ((x0 - 1) // 2) * ((y0 - 1) // 2)
        om = al * ((y0 * y0 - 1) // 8) + be * ((x0 * x0 - 1) // 8)
        return -1 if (eps + om) % 2 else 1
    al, x0 = _split_val(x, p)
    be, y0 = _split_val(y, p)
    s = 1
    if al % 2 and be % 2 and (p - 1) // 2 % 2:
        s = -s
    if be % 2:
        s *= kronecker(x0, p)
    if al % 2:
        s *= kronecker(y0, p)
    return s


# ---------------------------------------------------------------------------
# dyadic completions


def dyadic_split_type(m: int) -> str:
    if m % 8 == 1:
        return "split"
    if m % 8 == 5:
        return "inert"
    return "ramified"


@lru_cache(maxsize=None)
def _hensel_sqrt_odd(m: int, k: int) -> int:
    """The 2-adic square root of m = 1 (mod 8) lifted from 1, mod 2^k."""
    assert m % 8 == 1
    r = 1
    for j in range(3, k):
        if (r * r - m) % (1 << (j + 1)):
            r += 1 << (j - 1)
    return r % (1 << k)


class _DyadicRing:
    """O/2^k arithmetic for the single dyadic completion of Q(sqrt(m)),
    m = 5 (mod 8) (inert, e=1) or m = 2,3 (mod 4) (ramified, e=2)."""

    def __init__(self, m: int, k: int = 10):
        self.m = m
        self.k = k
        self.mod = 1 << k
        if m % 8 == 5:
            self.e = 1
            self.kind = "inert"
            self.c = (m - 1) // 4  # omega^2 = omega + c
        elif m % 4 in (2, 3):
            self.e = 2
            self.kind = "ramified"
        else:
            raise ValueError(f"m={m} has a split dyadic place")

    # elements are (a, b): a + b*omega (inert) or a + b*sqrt(m) (ramified)

    def from_quad(self, x: QuadElem) -> tuple[int, int]:
        a, b, den = x.a, x.b, x.den
        if self.kind == "inert":
            # sqrt(m) = 2*omega - 1 with omega = (1 + sqrt(m))/2
            if den == 2:
                a, b = (a - b) // 2, b
            else:
                a, b = a - b, 2 * b
        else:
            assert den == 1, "m = 2,3 (mod 4) has no half-integral elements"
        return a % self.mod, b % self.mod

    def from_int(self, n: int) -> tuple[int, int]:
        return n % self.mod, 0

    def add(self, x, y):
        return (x[0] + y[0]) % self.mod, (x[1] + y[1]) % self.mod

    def neg(self, x):
        return (-x[0]) % self.mod, (-x[1]) % self.mod

    def mul(self, x, y):
        a1, b1 = x
        a2, b2 = y
        if self.kind == "inert":
            return (
                (a1 * a2 + self.c * b1 * b2) % self.mod,
                (a1 * b2 + a2 * b1 + b1 * b2) % self.mod,
            )
        return (
            (a1 * a2 + self.m * b1 * b2) % self.mod,
            (a1 * b2 + a2 * b1) % self.mod,
        )

    def val(self, z) -> int:
        """pi-adic valuation, reliable below ~2k-4; raises on (0, 0)."""
        a, b = z
        if a == 0 and b == 0:
            raise ArithmeticError("valuation of 0 residue")
        v2a = (a & -a).bit_length() - 1 if a else self.k
        v2b = (b & -b).bit_length() - 1 if b else self.k
        if self.kind == "inert":
            return min(v2a, v2b)
        if self.m % 2 == 0:
            return min(2 * v2a, 2 * v2b + 1)
        n = (a * a - self.m * b * b) % (1 << (self.k + 1))
        if n == 0:
            raise ArithmeticError("valuation beyond ring precision")
        return (n & -n).bit_length() - 1

    def red(self, z, M: int):
        """Canonical key of z modulo pi^M."""
        a, b = z
        if self.kind == "inert":
            return a % (1 << M), b % (1 << M)
        j, odd = divmod(M, 2)
        if not odd:
            return a % (1 << j), b % (1 << j)
        if self.m % 2 == 0:
            return a % (1 << (j + 1)), b % (1 << j)
        t = (a >> j) & 1
        h = t << j
        return (a - h) % (1 << (j + 1)), (b - h) % (1 << (j + 1))

    @lru_cache(maxsize=64)
    def _squares(self, M: int) -> frozenset:
        if self.kind == "inert":
            kx = M - 1
        else:
            kx = (M - 2 + 1) // 2 + 1  # x mod 2^kx fixes x^2 mod pi^(2kx+2)
        kx = max(kx, 1)
        n = 1 << kx
        out = set()
        for a in range(n):
            for b in range(n):
                out.add(self.red(self.mul((a, b), (a, b)), M))
        return frozenset(out)

    def sq_solvable(self, w, M: int) -> bool:
        return self.red(w, M) in self._squares(M)

    def is_square(self, w) -> bool:
        v = self.val(w)
        if v % 2:
            return False
        return self.sq_solvable(w, v + 2 * self.e + 1)

    def is_unramified_class(self, w) -> bool:
        """F_P(sqrt(w))/F_P unramified (split included)."""
        v = self.val(w)
        if v % 2:
            return False
        return self.sq_solvable(w, v + 2 * self.e)

    def is_norm(self, u: QuadElem, d: int) -> int:
        """+1 iff u is a norm from F_P(sqrt(d)): u = x^2 - d*y^2 solvable.

        Exhaustive residue search over y with quadratic Hensel
        certification of x^2 = u + d*y^2; scaling by 4 once covers all
        denominators.
        """
        ue = self.from_quad(u)
        de = self.from_int(d)
        if self.is_square(de):
            return 1  # split extension: everything is a norm
        if self.is_square(ue):
            return 1
        mud = self.mul(self.neg(ue), de)
        if self.is_square(mud):
            return 1  # u = -d*y^2
        vd = self.val(de)
        e = self.e
        vw_max = 2 + 2 * e  # proven bound once the square shortcuts fail
        Mw = vw_max + 2 * e + 1
        if self.kind == "inert":
            j = max(Mw - 1 - vd, 1)
        else:
            j = max((Mw - 2 - vd + 1) // 2, 1)
        n = 1 << j
        for t in (0, 1):
            c = self.mul(ue, self.from_int(1 << (2 * t)))
            for a in range(n):
                for b in range(n):
                    w = self.add(c, self.mul(de, self.mul((a, b), (a, b))))
                    if w == (0, 0):
                        continue
                    v = self.val(w)
                    if v % 2 or v > vw_max:
                        continue
                    if self.sq_solvable(w, v + 2 * e + 1):
                        return 1
        return -1


@lru_cache(maxsize=None)
def _ring(m: int) -> _DyadicRing:
    return _DyadicRing(m)


def _dyadic_ramified_in_K(m: int, d: int) -> bool:
    st = dyadic_split_type(m)
    v2, d0 = _split_val(d, 2)
    if st == "split":
        return v2 == 1 or d0 % 4 == 3
    if st == "inert":
        return v2 == 1 or d0 % 4 == 3
    return not _ring(m).is_unramified_class(_ring(m).from_int(d))


# ---------------------------------------------------------------------------
# places, symbols, rank


def ramified_primes(F: QuadField, d: int) -> tuple[list[RamifiedPrime], int]:
    """Places of F ramified in K = F(sqrt(d)), with t = how many.

    Infinite places never ramify here (both fields totally real).  Odd
    primes dividing gcd(d, m) carry even valuation and stay unramified.
    """
    m = F.m
    from .arith import is_squarefree, squarefree_part

    if d <= 0 or not is_squarefree(d):
        raise ValueError(f"d must be a positive squarefree integer, got {d}")
    if d == 1 or d == m:
        raise ValueError(f"F(sqrt({d})) is a degenerate extension of Q(sqrt({m}))")
    places: list[RamifiedPrime] = []
    for p in factor(d).primes():
        if p == 2 or m % p == 0:
            continue
        chi = kronecker(m, p)
        if chi == 1:
            places.append(RamifiedPrime(p, "split", 2, True, 0))
            places.append(RamifiedPrime(p, "split", 2, True, 1))
        else:
            places.append(RamifiedPrime(p, "inert", 1, True))
    if _dyadic_ramified_in_K(m, d):
        st = dyadic_split_type(m)
        if st == "split":
            places.append(RamifiedPrime(2, "split", 2, True, 0))
            places.append(RamifiedPrime(2, "split", 2, True, 1))
        else:
            places.append(RamifiedPrime(2, st, 1, True))
    places.sort(key=lambda P: (P.rational_prime, P.conj))
    return places, len(places)


def _embed_split_odd(u: QuadElem, p: int, conj: int) -> int:
    r = sqrt_mod_prime(u.field.m % p, p)
    rho = min(r, p - r) if conj == 0 else max(r, p - r)
    val = (u.a + u.b * rho) * pow(u.den, -1, p) % p
    if val == 0:
        raise ArithmeticError(f"unit has positive valuation at split place over {p}")
    return val


def _embed_split_dyadic(u: QuadElem, conj: int, k: int = 12) -> int:
    rho = _hensel_sqrt_odd(u.field.m, k + 2)
    if conj == 1:
        rho = (1 << (k + 2)) - rho
    w = (u.a + u.b * rho) % (1 << (k + 2))
    if u.den == 2:
        assert w % 2 == 0
        w //= 2
    w %= 1 << k
    assert w % 2 == 1, "unit embedded with positive valuation"
    return w


def hilbert_quad_local(u: QuadElem, d: int, P: RamifiedPrime) -> int:
    """Norm residue symbol (u, d / P) over the completion F_P.

    Split odd places embed u p-adically and use the tame formula; inert
    and F-ramified odd places reduce to the quadratic character of the
    residue norm; dyadic places run the residue-search norm test (nonsplit)
    or the rational symbol after embedding (split), with the projection
    formula (N(u), d)_2 asserted against the nonsplit result.
    """
    m = u.field.m
    p = P.rational_prime
    if p != 2:
        v = 1 if d % p == 0 else 0
        if P.split_type_in_F == "split":
            if v == 0:
                return 1
            return kronecker(_embed_split_odd(u, p, P.conj), p)
        # inert or ramified over p: symbol = chi(residue norm)^v_P(d)
        vP = v if P.split_type_in_F == "inert" else 2 * v
        if vP % 2 == 0:
            return 1
        n = (u.a * u.a - m * u.b * u.b) * pow(u.den * u.den, -1, p) % p
        return kronecker(n, p)
    if P.split_type_in_F == "split":
        return hilbert_qp(_embed_split_dyadic(u, P.conj), d, 2)
    out = _ring(m).is_norm(u, d)
    nrm = Fraction(u.a * u.a - m * u.b * u.b, u.den * u.den)
    assert out == hilbert_qp(nrm, d, 2), (u, d, m, out)
    return out


def ambiguous_rank(
    F: QuadField, d: int, disc_bound: int = DEFAULT_DISC_BOUND
) -> RankCertificate:
    """rank(A(K)) = t - 1 - e for K = F(sqrt(d)) over a QO base field F.

    t counts ramified places; 2^e = [E_F : E_F cap N(K*)] is computed as
    the F2-rank of the Hilbert-symbol matrix of {-1, eps_F} against the
    ramified places.  Rejects base fields with even class number.
    """
    cd = class_number(F.m, disc_bound)
    if cd.h2 != 1:
        raise QOError(f"Q(sqrt({F.m})) has even class number h={cd.h}")
    places, t = ramified_primes(F, d)
    eps = fundamental_unit(F.m).value
    minus_one = QuadElem(-1, 0, 1, F)
    rows = []
    for u in (minus_one, eps):
        row = [hilbert_quad_local(u, d, P) for P in places]
        prod = 1
        for x in row:
            prod *= x
        assert prod == 1, f"product formula violated for u={u}, d={d}: {row}"
        rows.append(row)
    matrix = SymbolMatrix(
        row_labels=["-1", "eps"],
        col_labels=[P.label() for P in places],
        entries=rows,
    )
    e = matrix.f2_rank()
    rank = t - 1 - e
    assert rank >= 0
    return RankCertificate(t=t, e=e, rank=rank, method="local-norm-oracle", matrix=matrix)

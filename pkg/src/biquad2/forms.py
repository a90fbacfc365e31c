"""Cycles of reduced indefinite binary quadratic forms.

A form (a, b, c) has b^2 - 4ac = D > 0 nonsquare.  Reduced means
0 < b < sqrt(D) and |sqrt(D) - 2|a|| < b; the rho operator permutes the
reduced forms of a class cyclically, and the narrow class number is the
number of cycles.  Composition (Cohen alg. 5.4.7) gives the group law.
"""

from __future__ import annotations

import math
from functools import lru_cache

from .arith import kronecker, sqrt_mod_prime, xgcd

Form = tuple[int, int, int]


def is_reduced(f: Form, D: int) -> bool:
    a, b, c = f
    if b <= 0 or b * b >= D:
        return False
    t = 2 * abs(a)
    if (b + t) ** 2 <= D:
        return False
    return t <= b or (t - b) ** 2 < D


def _rho_r(b: int, c: int, s: int) -> int:
    # largest r = -b (mod 2|c|) with r <= s; lands in (sqrt(D)-2|c|, sqrt(D))
    m2 = 2 * abs(c)
    return s - (s + b) % m2


def rho(f: Form, D: int, s: int) -> Form:
    a, b, c = f
    r = _rho_r(b, c, s)
    return (c, r, (r * r - D) // (4 * c))


def reduce_form(f: Form, D: int) -> Form:
    """Apply rho-style reduction until the form is reduced."""
    s = math.isqrt(D)
    a, b, c = f
    while not is_reduced((a, b, c), D):
        ac = abs(c)
        if ac > s:
            r = -b % (2 * ac)
            if r > ac:
                r -= 2 * ac
        else:
            r = _rho_r(b, c, s)
        a, b, c = c, r, (r * r - D) // (4 * c)
    return (a, b, c)


def _factored_progression(D: int) -> list[tuple[int, list[tuple[int, int]]]]:
    """(b, factorization of (D - b^2)/4) for b in 0 < b < sqrt(D), b^2 = D mod 4."""
    s = math.isqrt(D)
    b0 = 2 if D % 4 == 0 else 1
    bs = list(range(b0, s + 1, 2))
    if not bs:
        return []
    vals = [(D - b * b) >> 2 for b in bs]
    facs: list[list[tuple[int, int]]] = [[] for _ in bs]
    maxn = vals[0]
    lim = math.isqrt(maxn)
    from .arith import primes_below

    for p in primes_below(lim + 1):
        if p == 2:
            continue
        if D % p == 0:
            roots = [0]
        elif kronecker(D, p) == 1:
            u = sqrt_mod_prime(D % p, p)
            roots = [u, p - u]
        else:
            continue
        inv2 = (p + 1) // 2
        for u in roots:
            i = ((u - b0) * inv2) % p
            while i < len(bs):
                v = vals[i]
                e = 0
                while v % p == 0:
                    v //= p
                    e += 1
                if e:
                    vals[i] = v
                    facs[i].append((p, e))
                i += p
    out = []
    for i, b in enumerate(bs):
        v = vals[i]
        fac = facs[i]
        e2 = 0
        while v % 2 == 0:
            v //= 2
            e2 += 1
        if e2:
            fac.append((2, e2))
        if v > 1:
            fac.append((v, 1))  # cofactor beyond the sieve limit is prime
        out.append((b, fac))
    return out


def _divisors(fac: list[tuple[int, int]]) -> list[int]:
    divs = [1]
    for p, e in fac:
        pk = 1
        new = []
        for _ in range(e):
            pk *= p
            new.extend(d * pk for d in divs)
        divs.extend(new)
    return divs


def reduced_forms(D: int) -> list[Form]:
    """Every reduced form of discriminant D."""
    out: list[Form] = []
    for b, fac in _factored_progression(D):
        n = 1
        for p, e in fac:
            n *= p**e
        for d in _divisors(fac):
            # window sqrt(D) - b < 2d < sqrt(D) + b, exactly
            t = 2 * d
            if (t + b) ** 2 <= D:
                continue
            if t > b and (t - b) ** 2 >= D:
                continue
            out.append((d, b, -(n // d)))
            out.append((-d, b, n // d))
    return out


class CycleTable:
    """Reduced forms of discriminant D partitioned into rho-cycles."""

    def __init__(self, D: int):
        self.D = D
        self.s = math.isqrt(D)
        self.form_cycle: dict[Form, int] = {}
        self.reps: list[Form] = []
        forms = reduced_forms(D)
        seen = self.form_cycle
        for f in forms:
            if f in seen:
                continue
            cid = len(self.reps)
            self.reps.append(f)
            g = f
            while True:
                seen[g] = cid
                g = rho(g, D, self.s)
                if g == f:
                    break

    @property
    def h_narrow(self) -> int:
        return len(self.reps)

    def cycle_of(self, f: Form) -> int:
        return self.form_cycle[reduce_form(f, self.D)]

    def principal(self) -> int:
        b0 = self.D % 2
        return self.cycle_of((1, b0, (b0 * b0 - self.D) // 4))

    def negative_unit(self) -> int:
        # class of the form representing -1
        b0 = self.D % 2
        return self.cycle_of((-1, b0, (self.D - b0 * b0) // 4))

    def _pos_rep(self, cid: int) -> Form:
        f = self.reps[cid]
        while f[0] < 0:
            f = rho(f, self.D, self.s)
        return f

    def compose(self, i: int, j: int) -> int:
        f3 = compose_forms(self._pos_rep(i), self._pos_rep(j))
        return self.cycle_of(f3)

    def square_map(self) -> list[int]:
        return [self.compose(i, i) for i in range(len(self.reps))]


def compose_forms(f1: Form, f2: Form) -> Form:
    """Dirichlet/Gauss composition of two primitive forms of equal
    discriminant with positive leading coefficients (Cohen alg. 5.4.7)."""
    if f1[0] > f2[0]:
        f1, f2 = f2, f1
    a1, b1, c1 = f1
    a2, b2, c2 = f2
    assert a1 > 0 and a2 > 0
    s = (b1 + b2) // 2
    n = b2 - s
    if a2 % a1 == 0:
        y1, d = 0, a1
    else:
        u, _, d = xgcd(a2, a1)
        y1 = u
    if s % d == 0:
        y2, x2, d1 = -1, 0, d
    else:
        u, v, d1 = xgcd(s, d)
        x2 = u
        y2 = -v
    v1 = a1 // d1
    v2 = a2 // d1
    r = (y1 * y2 * n - x2 * c2) % v1
    b3 = b2 + 2 * v2 * r
    a3 = v1 * v2
    num = c2 * d1 + r * (b2 + v2 * r)
    assert num % v1 == 0
    c3 = num // v1
    return (a3, b3, c3)


@lru_cache(maxsize=4096)
def _table(D: int) -> CycleTable:
    return CycleTable(D)


def narrow_class_number(D: int) -> int:
    return _table(D).h_narrow


def narrow_two_rank(D: int) -> int:
    """2-rank of the narrow class group, from squares of cycle representatives."""
    tab = _table(D)
    sq = tab.square_map()
    p0 = tab.principal()
    count = sum(1 for t in sq if t == p0)
    rank = count.bit_length() - 1
    assert 1 << rank == count
    return rank


def _divisors_from_counts(counts: list[int]) -> tuple[int, ...]:
    # counts[k] = #elements of order dividing 2^k; recover elementary divisors
    ranks = []
    for k in range(1, len(counts)):
        r = (counts[k] // counts[k - 1]).bit_length() - 1
        ranks.append(r)
    out = []
    for k, r in enumerate(ranks, start=1):
        nxt = ranks[k] if k < len(ranks) else 0
        out.extend([1 << k] * (r - nxt))
    return tuple(sorted(out, reverse=True))


def wide_two_sylow(D: int, unit_norm: int) -> tuple[int, ...]:
    """Elementary divisors of the 2-Sylow of the wide class group.

    The narrow group comes from the cycle table; when the fundamental unit
    has norm +1 the wide group is the quotient by the class of the form
    representing -1.
    """
    tab = _table(D)
    sq = tab.square_map()
    p0 = tab.principal()
    if unit_norm == -1:
        H = {p0}
    else:
        H = {p0, tab.negative_unit()}
    n = len(sq)
    cur = list(range(n))
    counts = [1]  # only the identity has order dividing 2^0
    while True:
        cur = [sq[x] for x in cur]
        c = sum(1 for x in cur if x in H) // len(H)
        counts.append(c)
        if len(counts) >= 2 and counts[-1] == counts[-2]:
            break
    return _divisors_from_counts(counts)

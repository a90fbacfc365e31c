"""Multiquadratic fields Q(sqrt(m1),...,sqrt(mn)), n in {2,3}.

Exact power-basis arithmetic over the basis prod_{i in S} sqrt(m_i),
square detection by sign-pattern reconstruction with certified integer
intervals, Wada's fundamental-system algorithm, and Kuroda's 2-class
number formula h2(K) = q(K) * prod h2(k_i) / 2^v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .arith import is_squarefree, squarefree_part
from .quad import (
    DEFAULT_DISC_BOUND,
    QuadElem,
    QuadField,
    class_number,
    fundamental_unit,
    square_in_quad,
)

# Kuroda divisor exponents for real multiquadratic fields: v = n(2^(n-1)-1)
KURODA_V = {2: 2, 3: 9}

DEFAULT_PRECISION_BITS = 1 << 14


class PrecisionError(RuntimeError):
    """Square reconstruction stayed ambiguous at the precision cap."""


class ConsistencyError(AssertionError):
    """An exact identity that must hold failed; indicates a real finding."""


@dataclass(frozen=True)
class MultiQuadField:
    gens: tuple[int, ...]

    def __post_init__(self):
        n = len(self.gens)
        if n not in (2, 3):
            raise ValueError("only degree 4 and 8 multiquadratic fields supported")
        for g in self.gens:
            if g <= 1 or not is_squarefree(g):
                raise ValueError(f"generator {g} is not a squarefree integer > 1")
        cls = [squarefree_part(self._subset_prod(S)) for S in range(1, 1 << n)]
        if 1 in cls or len(set(cls)) != len(cls):
            raise ValueError(f"generators {self.gens} are not multiplicatively independent")

    def _subset_prod(self, S: int) -> int:
        out = 1
        for i, g in enumerate(self.gens):
            if S >> i & 1:
                out *= g
        return out

    @property
    def n(self) -> int:
        return len(self.gens)

    @property
    def degree(self) -> int:
        return 1 << len(self.gens)

    def basis_norm(self, S: int) -> int:
        """N_S with basis element B_S = sqrt(N_S) (not squarefree-reduced)."""
        return self._subset_prod(S)

    def square_classes(self) -> list[int]:
        return sorted(squarefree_part(self._subset_prod(S)) for S in range(1, self.degree))

    def class_mask(self, c: int) -> int:
        """Subset mask whose product has squarefree part c."""
        for S in range(1, self.degree):
            if squarefree_part(self._subset_prod(S)) == c:
                return S
        raise ValueError(f"{c} is not a square class of {self.gens}")

    def one(self) -> "MQElem":
        coords = [Fraction(0)] * self.degree
        coords[0] = Fraction(1)
        return MQElem(self, tuple(coords))

    def from_rational(self, x) -> "MQElem":
        coords = [Fraction(0)] * self.degree
        coords[0] = Fraction(x)
        return MQElem(self, tuple(coords))

    def embed_sqrt(self, c: int) -> "MQElem":
        """sqrt(c) as an element, for c a square class of the field."""
        S = self.class_mask(c)
        g = math.isqrt(self._subset_prod(S) // c)
        coords = [Fraction(0)] * self.degree
        coords[S] = Fraction(1, g)
        return MQElem(self, tuple(coords))

    def embed_quad(self, x: QuadElem) -> "MQElem":
        """Embed an element of a quadratic subfield."""
        root = self.embed_sqrt(x.field.m)
        A, B = x.coords()
        return self.from_rational(A) + root * self.from_rational(B)


def subfield_square_classes(K: MultiQuadField) -> list[int]:
    """Squarefree representatives of the 2^n - 1 quadratic subfields, ascending."""
    return K.square_classes()


def first_layer(K: MultiQuadField) -> MultiQuadField:
    """K(sqrt(2)), the next field up the 2-power cyclotomic tower."""
    if K.n != 2:
        raise ValueError("first_layer is defined for biquadratic fields")
    if 2 in K.square_classes():
        raise ValueError(f"{K.gens} already contains sqrt(2)")
    return MultiQuadField(K.gens + (2,))


class MQElem:
    __slots__ = ("field", "coords")

    def __init__(self, field: MultiQuadField, coords: tuple[Fraction, ...]):
        self.field = field
        self.coords = coords

    def __eq__(self, other):
        return (
            isinstance(other, MQElem)
            and self.field == other.field
            and self.coords == other.coords
        )

    def __hash__(self):
        return hash((self.field, self.coords))

    def __bool__(self):
        return any(self.coords)

    def __neg__(self):
        return MQElem(self.field, tuple(-c for c in self.coords))

    def __add__(self, other):
        return MQElem(self.field, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return MQElem(self.field, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __mul__(self, other):
        K = self.field
        deg = K.degree
        out = [Fraction(0)] * deg
        for S, cs in enumerate(self.coords):
            if not cs:
                continue
            for T, ct in enumerate(other.coords):
                if not ct:
                    continue
                inter = S & T
                out[S ^ T] += cs * ct * K._subset_prod(inter)
        return MQElem(K, tuple(out))

    def conj(self, sigma: int) -> "MQElem":
        """Galois conjugate: sigma's bit i flips the sign of sqrt(gens[i])."""
        out = []
        for S, c in enumerate(self.coords):
            flips = bin(S & sigma).count("1")
            out.append(-c if flips % 2 else c)
        return MQElem(self.field, tuple(out))

    def inv(self) -> "MQElem":
        if not self:
            raise ZeroDivisionError
        prod = self.field.one()
        for sigma in range(1, self.field.degree):
            prod = prod * self.conj(sigma)
        nrm = (self * prod).coords[0]
        return MQElem(self.field, tuple(c / nrm for c in prod.coords))

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        out = self.field.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def support(self) -> int:
        mask = 0
        for S, c in enumerate(self.coords):
            if c:
                mask |= 1 << S
        return mask

    def embed_interval(self, sigma: int, k: int) -> tuple[Fraction, Fraction]:
        """Certified enclosure of the real embedding selected by sigma."""
        lo = hi = Fraction(0)
        for S, c in enumerate(self.coords):
            if not c:
                continue
            n = self.field._subset_prod(S)
            rl, rh = _sqrt_interval(n, k)
            if bin(S & sigma).count("1") % 2:
                c = -c
            if c >= 0:
                lo += c * rl
                hi += c * rh
            else:
                lo += c * rh
                hi += c * rl
        return lo, hi

    def __float__(self):
        lo, hi = self.embed_interval(0, 64)
        return float((lo + hi) / 2)

    def __repr__(self):
        K = self.field
        parts = []
        for S, c in enumerate(self.coords):
            if c:
                parts.append(f"{c}*r{K._subset_prod(S)}" if S else f"{c}")
        return " + ".join(parts) or "0"


@lru_cache(maxsize=100_000)
def _sqrt_interval(n: int, k: int) -> tuple[Fraction, Fraction]:
    # L/2^k <= sqrt(n) <= (L+1)/2^k, from integer sqrt of n*4^k
    L = math.isqrt(n << (2 * k))
    return Fraction(L, 1 << k), Fraction(L + 1, 1 << k)


def _fr_sqrt_down(x: Fraction, k: int) -> Fraction:
    t = (x.numerator << (2 * k)) // x.denominator
    return Fraction(math.isqrt(t), 1 << k)


def _fr_sqrt_up(x: Fraction, k: int) -> Fraction:
    t = -((-(x.numerator << (2 * k))) // x.denominator)  # ceil
    r = math.isqrt(t)
    if r * r < t:
        r += 1
    return Fraction(r, 1 << k)


def mq_square_test(
    u: MQElem, max_bits: int = DEFAULT_PRECISION_BITS
) -> MQElem | None:
    """Exact square root of u in its field, or a certified None.

    Elements supported inside a quadratic subfield go through the relative
    test over that subfield; everything else uses embedding reconstruction:
    each sign pattern of sqrt(u) across the real embeddings pins the basis
    coordinates inside certified intervals, candidates are verified by
    exact squaring, and a pattern dies when its interval excludes every
    admissible denominator or its unique candidate fails.
    """
    if not u:
        raise ValueError("square test of 0")
    K = u.field
    # clear denominators: root of (u * den^2) integral => coordinate
    # denominators divide 2^n * N_S
    den = 1
    for c in u.coords:
        den = math.lcm(den, c.denominator)
    v = u * K.from_rational(den * den)
    y = _mq_square_integral(v, max_bits)
    if y is None:
        return None
    return y * K.from_rational(Fraction(1, den))


def _quad_subfield_of_support(u: MQElem) -> tuple[int, int] | None:
    """(mask, class) if all nonzero coordinates sit in {1, B_S} for one S."""
    mask = u.support() & ~1
    if mask == 0:
        return (0, 1)
    if mask & (mask - 1):
        return None
    S = mask.bit_length() - 1
    return (S, squarefree_part(u.field._subset_prod(S)))


def _mq_square_integral(u: MQElem, max_bits: int) -> MQElem | None:
    K = u.field
    sub = _quad_subfield_of_support(u)
    if sub is not None:
        return _relative_square_test(u, sub, max_bits)
    return _pattern_square_test(u, max_bits)


def _rational_square_root(t: Fraction) -> Fraction | None:
    if t < 0:
        return None
    rn = math.isqrt(t.numerator)
    rd = math.isqrt(t.denominator)
    if rn * rn == t.numerator and rd * rd == t.denominator:
        return Fraction(rn, rd)
    return None


def _relative_square_test(u: MQElem, sub: tuple[int, int], max_bits: int) -> MQElem | None:
    """u lies in a quadratic subfield k (or Q).  sqrt(u) is in K exactly
    when u/e is a square in k for some square class e of K, e rational."""
    K = u.field
    S, c = sub
    classes = [1] + K.square_classes()
    if c == 1:
        x = u.coords[0]
        for e in classes:
            r = _rational_square_root(x / e)
            if r is None:
                continue
            root = K.from_rational(r)
            if e > 1:
                root = root * K.embed_sqrt(e)
            if root * root == u:
                return root
        return None
    k = QuadField(c)
    g = math.isqrt(K._subset_prod(S) // c)
    x = QuadElem.from_fractions(u.coords[0], u.coords[S] * g, k)
    for e in classes:
        w = square_in_quad(x * QuadElem(1, 0, e, k))
        if w is not None:
            root = K.embed_quad(w)
            if e > 1:
                root = root * K.embed_sqrt(e)
            if root * root == u:
                return root
    return None


def _pattern_square_test(u: MQElem, max_bits: int) -> MQElem | None:
    K = u.field
    n = K.n
    deg = K.degree
    sigmas = list(range(deg))
    patterns = list(range(1 << (deg - 1)))  # sign of embedding 0 fixed +
    alive = set(patterns)
    denoms = [deg * K._subset_prod(S) for S in range(deg)]
    k = 128
    while k <= max_bits:
        embs = [u.embed_interval(s, k) for s in sigmas]
        if any(hi < 0 for lo, hi in embs):
            return None  # a certified negative embedding: not totally positive
        if any(lo <= 0 for lo, hi in embs):
            k *= 2
            continue
        roots = [(_fr_sqrt_down(lo, k), _fr_sqrt_up(hi, k)) for lo, hi in embs]
        next_alive = set()
        for pat in alive:
            cand: list[Fraction] = []
            ambiguous = dead = False
            for S in range(deg):
                lo = hi = Fraction(0)
                for j, sig in enumerate(sigmas):
                    sgn = 1
                    if j and (pat >> (j - 1)) & 1:
                        sgn = -sgn
                    if bin(S & sig).count("1") % 2:
                        sgn = -sgn
                    rl, rh = roots[j]
                    if sgn > 0:
                        lo += rl
                        hi += rh
                    else:
                        lo -= rh
                        hi -= rl
                # coordinate * denominator = (sum) * sqrt(N_S) / ... : multiply by sqrt(N_S)
                nl, nh = _sqrt_interval(K._subset_prod(S), k)
                tl = min(lo * nl, lo * nh, hi * nl, hi * nh)
                th = max(lo * nl, lo * nh, hi * nl, hi * nh)
                a = math.ceil(tl)
                b = math.floor(th)
                if a > b:
                    dead = True
                    break
                if a < b:
                    ambiguous = True
                    break
                cand.append(Fraction(a, denoms[S]))
            if dead:
                continue
            if ambiguous:
                next_alive.add(pat)
                continue
            y = MQElem(K, tuple(cand))
            if y * y == u:
                return y
            # unique candidate failed exactly: the pattern cannot hold
        alive = next_alive
        if not alive:
            return None
        k *= 2
    raise PrecisionError(f"square reconstruction ambiguous at {max_bits} bits")


@dataclass
class UnitSystem:
    field: MultiQuadField
    generators: list[tuple[MQElem, str]]  # (unit, provenance tag)
    q_index: int
    quad_units: dict[int, MQElem]
    adjoined: list[tuple[tuple[int, ...], MQElem]]  # exponent vector over (-1, eps...), root


def _f2_reduce(vec: int, basis: list[int]) -> int:
    # basis vectors carry distinct leading bits, kept sorted descending
    for b in basis:
        lead = 1 << (b.bit_length() - 1)
        if vec & lead:
            vec ^= b
    return vec


def _f2_insert(vec: int, basis: list[int]) -> bool:
    vec = _f2_reduce(vec, basis)
    if vec == 0:
        return False
    basis.append(vec)
    basis.sort(key=int.bit_length, reverse=True)
    return True


def wada_unit_system(
    K: MultiQuadField,
    max_bits: int = DEFAULT_PRECISION_BITS,
) -> UnitSystem:
    """Fundamental system of units and Hasse index q(K) = [E_K : prod E_ki].

    Degree 4: every unit squared falls in the group generated by -1 and the
    three quadratic-subfield units, so scan the 15 nontrivial square classes
    for squares in K and adjoin roots greedily.  Degree 8: recurse through
    the three quartic subfields fixed by involutions sharing one quadratic
    subfield (sqrt(2) when present), assemble the intermediate group, and
    scan its 255 square classes.
    """
    if K.n == 2:
        return _wada_quartic(K, max_bits)
    return _wada_octic(K, max_bits)


def _search_square_classes(
    K: MultiQuadField,
    gens: list[MQElem],
    max_bits: int,
) -> list[tuple[int, MQElem]]:
    """Square classes of <gens> that are squares in K, as a greedy F2-basis.

    gens[0] must be -1 and the gens' square classes independent.  Returns
    (mask, root) pairs; masks index gens and carry distinct leading bits.
    """
    found: list[tuple[int, MQElem]] = []
    basis: list[int] = []
    memo: set[int] = set()
    nmask = 1 << len(gens)
    for i in range(1, nmask):
        mask = i ^ (i >> 1)  # Gray order
        red = _f2_reduce(mask, basis)
        if red == 0 or red in memo:
            continue
        u = K.one()
        for j in range(len(gens)):
            if red >> j & 1:
                u = u * gens[j]
        y = mq_square_test(u, max_bits)
        if y is not None:
            found.append((red, y))
            _f2_insert(red, basis)
        else:
            memo.add(red)
    return found


def _mask_tuple(mask: int, width: int) -> tuple[int, ...]:
    return tuple(mask >> i & 1 for i in range(width))


def _fundamental_system(
    ordered: list[tuple[MQElem, str]],
    found: list[tuple[int, MQElem]],
) -> list[tuple[MQElem, str]]:
    """Replace, per adjoined root, the generator at its mask's leading bit.

    ordered[0] is -1 (torsion); found masks have distinct leading bits > 0,
    so each replacement hits a distinct non-torsion slot.
    """
    system = list(ordered)
    for mask, root in found:
        pivot = mask.bit_length() - 1
        if pivot == 0:
            raise ConsistencyError("-1 reported as a square in a totally real field")
        system[pivot] = (root, "adjoined square root")
    return [t for t in system[1:]]


def _wada_quartic(K: MultiQuadField, max_bits: int) -> UnitSystem:
    classes = K.square_classes()
    quad_units = {c: K.embed_quad(fundamental_unit(c).value) for c in classes}
    ordered = [(-K.one(), "torsion")] + [
        (quad_units[c], "subfield fundamental unit") for c in classes
    ]
    found = _search_square_classes(K, [e for e, _ in ordered], max_bits)
    return UnitSystem(
        field=K,
        generators=_fundamental_system(ordered, found),
        q_index=1 << len(found),
        quad_units=quad_units,
        adjoined=[(_mask_tuple(mask, len(ordered)), root) for mask, root in found],
    )


def _wada_octic(K: MultiQuadField, max_bits: int) -> UnitSystem:
    classes = K.square_classes()  # 7, sorted
    quad_units = {c: K.embed_quad(fundamental_unit(c).value) for c in classes}
    slot = {c: i + 1 for i, c in enumerate(classes)}  # slot 0 is -1

    # three quartic subfields fixed by involutions sharing one quadratic
    # subfield; sqrt(2) is the shared one when present (the tower layers)
    gens = list(K.gens)
    g1 = 2 if 2 in gens else gens[0]
    o1, o2 = [g for g in gens if g != g1]
    quartic_gens = [(g1, o1), (g1, o2), (g1, squarefree_part(o1 * o2))]

    # quartic-level adjoined roots as square-class vectors over
    # (-1, eps_c1..eps_c7); keep an independent subset
    adjoined: list[tuple[int, MQElem]] = []
    vecs: list[int] = []
    for pair in quartic_gens:
        sub = MultiQuadField(tuple(sorted(pair)))
        us = wada_unit_system(sub, max_bits)
        sub_classes = sub.square_classes()
        for vec, root in us.adjoined:
            mask = vec[0]  # -1 slot
            for i, c in enumerate(sub_classes):
                if vec[i + 1]:
                    mask |= 1 << slot[c]
            if _f2_insert(mask, vecs):
                adjoined.append((mask, _embed_subfield_elem(K, sub, root)))

    # ordered basis of the intermediate group modulo squares:
    # -1, the quadratic units at non-pivot slots, then the quartic roots
    pivots = set()
    red_basis: list[int] = []
    for mask, _ in adjoined:
        red = _f2_reduce(mask, red_basis)
        pivots.add(red.bit_length() - 1)
        _f2_insert(red, red_basis)
    ordered: list[tuple[MQElem, str]] = [(-K.one(), "torsion")]
    for s in range(1, 8):
        if s not in pivots:
            ordered.append((quad_units[classes[s - 1]], "subfield fundamental unit"))
    ordered.extend((root, "adjoined square root") for _, root in adjoined)

    found = _search_square_classes(K, [e for e, _ in ordered], max_bits)
    q_index = (1 << len(adjoined)) * (1 << len(found))
    return UnitSystem(
        field=K,
        generators=_fundamental_system(ordered, found),
        q_index=q_index,
        quad_units=quad_units,
        adjoined=[(_mask_tuple(m, 8), r) for m, r in adjoined]
        + [(_mask_tuple(m, len(ordered)), r) for m, r in found],
    )


def _embed_subfield_elem(K: MultiQuadField, sub: MultiQuadField, x: MQElem) -> MQElem:
    """Rewrite an element of a quartic subfield in K's power basis."""
    out = K.from_rational(0)
    for S, c in enumerate(x.coords):
        if not c:
            continue
        term = K.from_rational(c)
        for i in range(sub.n):
            if S >> i & 1:
                term = term * K.embed_sqrt(sub.gens[i])
        out = out + term
    return out


def kuroda_h2(
    K: MultiQuadField,
    disc_bound: int = DEFAULT_DISC_BOUND,
    max_bits: int = DEFAULT_PRECISION_BITS,
) -> int:
    """2-part of the class number of K by the class number formula.

    h2(K) = q(K) * prod_i h2(k_i) / 2^v over the 2^n - 1 quadratic
    subfields, v = 2 for degree 4 and v = 9 for degree 8.  A non-integral
    intermediate is a hard failure.
    """
    v = KURODA_V[K.n]
    us = wada_unit_system(K, max_bits)
    num = us.q_index
    for c in K.square_classes():
        num *= class_number(c, disc_bound).h2
    if num % (1 << v):
        raise ConsistencyError(
            f"Kuroda formula non-integral for {K.gens}: q={us.q_index}, product={num}, divisor=2^{v}"
        )
    return num >> v

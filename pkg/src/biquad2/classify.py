"""Executable encodings of the classification statements.

Each operation takes a validated family input, evaluates the printed
congruence and symbol conditions, and returns the matched clause with the
predicted rank of the 2-class group at layers 0/1, the predicted rank or
structure of the Iwasawa module, and a full condition trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

from .arith import is_perfect_square, is_prime, is_squarefree, kronecker, quartic_symbol
from .multiquad import ConsistencyError, MultiQuadField, wada_unit_system
from .quad import DEFAULT_DISC_BOUND, class_number, fundamental_unit


class LExcludedError(ValueError):
    """The field is one of the excluded r = 1 (mod 8) split-prime shapes."""


@dataclass
class FamilyInput:
    """A field from one of the enumerated families, with named primes.

    The second generator is (2 if two else 1) * d where d multiplies delta
    with the primes r, s, t that are present.
    """

    form: str  # 'D' | 'E' | 'F' | 'SM1' | 'SM2' | 'SM3'
    p: int | None = None
    q: int | None = None
    q1: int | None = None
    q2: int | None = None
    r: int | None = None
    s: int | None = None
    t: int | None = None
    delta: int = 1
    eta1: int = 1
    eta2: int = 1
    nu: int | None = None
    two: bool = False

    def rs_primes(self) -> list[int]:
        return [x for x in (self.r, self.s, self.t) if x is not None]

    @property
    def d(self) -> int:
        out = self.delta
        for x in self.rs_primes():
            out *= x
        return out

    def gens(self) -> tuple[int, int]:
        if self.form in ("D", "E"):
            return self.q1 * self.q2, (2 if self.two else 1) * self.d
        if self.form == "F":
            if self.q1 is not None:
                return self.p, self.q1 * self.q2
            return self.p, self.d
        if self.form == "SM1":
            return self.eta1 * self.q, self.eta2 * self.r
        if self.form == "SM2":
            return self.eta1 * self.q1 * self.q2, self.eta2 * self.delta * self.r
        if self.form == "SM3":
            return self.p, self.r
        raise ValueError(f"unknown form {self.form}")

    def validate(self) -> "FamilyInput":
        if self.form in ("D", "E"):
            self._validate_de()
        elif self.form == "F":
            self._validate_f()
        elif self.form == "SM1":
            _need(is_prime(self.q) and self.q % 4 == 3, f"q={self.q} must be prime, 3 mod 4")
            _need(is_prime(self.r) and self.r % 2 == 1 and self.r != self.q, f"r={self.r} invalid")
            _need(self.eta1 in (1, 2) and self.eta2 in (1, 2), "eta in {1,2}")
        elif self.form == "SM2":
            _need(is_prime(self.q1) and self.q1 % 4 == 3, f"q1={self.q1} must be prime, 3 mod 4")
            _need(is_prime(self.q2) and self.q2 % 8 == 3, f"q2={self.q2} must be prime, 3 mod 8")
            _need(is_prime(self.r) and self.r not in (self.q1, self.q2, 2), f"r={self.r} invalid")
            _need(self.delta in (1, self.q1, self.q2), f"delta={self.delta} invalid")
            _need(self.delta * self.r % 4 == 1, "delta*r must be 1 mod 4")
            _need(self.eta1 in (1, 2) and self.eta2 in (1, 2), "eta in {1,2}")
        elif self.form == "SM3":
            _need(is_prime(self.p) and self.p % 4 == 1, f"p1={self.p} must be prime, 1 mod 4")
            _need(is_prime(self.r) and self.r % 4 == 1 and self.r != self.p, f"p2={self.r} invalid")
        else:
            raise ValueError(f"unknown form {self.form}")
        return self

    def _validate_de(self):
        q1, q2 = self.q1, self.q2
        _need(is_prime(q1) and is_prime(q2) and q1 != q2, f"q1={q1}, q2={q2} must be distinct primes")
        _need(q1 % 4 == 3 and q2 % 8 == 3, f"need q1 = 3 mod 4 and q2 = 3 mod 8")
        if self.form == "D":
            _need(q1 % 8 == 7, f"form D needs q1 = 7 mod 8, got {q1}")
        else:
            _need(q1 % 8 == 3, f"form E needs q1 = 3 mod 8, got {q1}")
        rs = self.rs_primes()
        _need(1 <= len(rs) <= 3, "between one and three primes r, s, t")
        _need(len(set(rs)) == len(rs), "r, s, t must be distinct")
        for x in rs:
            _need(is_prime(x) and x % 2 == 1 and x not in (q1, q2), f"bad prime {x}")
        _need(self.delta in (1, q1, q2), f"delta={self.delta} not in {{1, q1, q2}}")
        d = self.d
        _need(is_squarefree(d), f"d={d} not squarefree")
        _need(d % 4 == 3, f"d={d} must be 3 mod 4")
        if not self.two and len(rs) + (self.delta != 1) == 2:
            # exclusion of L = Q(sqrt(q1q2), sqrt(r*s')) with a split prime 1 mod 8
            for x in rs:
                if x % 8 == 1 and kronecker(q1 * q2, x) == 1:
                    raise LExcludedError(
                        f"Q(sqrt({q1 * q2}), sqrt({d})) is an excluded field: "
                        f"{x} = 1 mod 8 splits in the quadratic subfield"
                    )

    def _validate_f(self):
        _need(is_prime(self.p) and self.p % 4 == 1, f"p={self.p} must be prime, 1 mod 4")
        if self.q1 is not None:
            q1, q2 = self.q1, self.q2
            _need(is_prime(q1) and is_prime(q2) and q1 != q2, "q1, q2 must be distinct primes")
            _need(q1 % 4 == 3 and q2 % 4 == 3, "q1, q2 must be 3 mod 4")
            _need(
                kronecker(q2, self.p) == -1 or q2 % 8 == 3 or q1 % 8 == 3,
                "form F with d = q1*q2 needs (q2/p) = -1 or a factor 3 mod 8",
            )
        else:
            _need(self.r is not None and is_prime(self.r) and self.r % 2 == 1, "d must be an odd prime")
            _need(self.r != self.p, "p and d must differ")
            d = self.r
            if d % 4 == 3:
                _need(
                    kronecker(self.p, d) == -1 or self.p % 8 == 5,
                    "form F with d = 3 mod 4 needs (p/d) = -1 or p = 5 mod 8",
                )


def _need(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def make_form_d(
    q1: int, q2: int, rs: tuple[int, ...], delta: int | None = None, two: bool = False
) -> FamilyInput:
    """Build and validate a form D/E input; delta defaults to the choice
    that makes d = 3 (mod 4), preferring 1 then q1."""
    if q1 % 8 == 3 and q2 % 8 == 7:
        q1, q2 = q2, q1
    prod = 1
    for x in rs:
        prod *= x
    if delta is None:
        delta = 1 if prod % 4 == 3 else q1
    kw = dict(zip(("r", "s", "t"), rs))
    form = "D" if q1 % 8 == 7 else "E"
    return FamilyInput(form=form, q1=q1, q2=q2, delta=delta, two=two, **kw).validate()


@dataclass
class Classification:
    statement_id: str
    matched: bool
    predicted_rank_A: int | None = None
    predicted_rank_Ainf: int | None = None
    predicted_structure: str | None = None
    trace: list[str] = dfield(default_factory=list)
    flags: list[str] = dfield(default_factory=list)
    values: dict = dfield(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statement_id": self.statement_id,
            "matched": self.matched,
            "predicted_rank_A": self.predicted_rank_A,
            "predicted_rank_Ainf": self.predicted_rank_Ainf,
            "predicted_structure": self.predicted_structure,
            "trace": self.trace,
            "flags": self.flags,
            "values": {k: str(v) for k, v in self.values.items()},
        }


# ---------------------------------------------------------------------------
# shared symbol helpers


def _sym(q1q2: int, q1: int, x: int) -> tuple[int, int, int]:
    """((q1q2/x), (q1/x), (-1/x))."""
    return kronecker(q1q2, x), kronecker(q1, x), kronecker(-1, x)


def remark_conditions(q1: int, q2: int, r: int, s: int, which: str) -> tuple[bool, list[str]]:
    """The three exclusion conditions gating the rank lemmas, as printed.

    The (r, s) order matters: C1 and C3 require (q1q2/r) = 1 and
    (q1q2/s) = -1; C2 requires both +1 but its bullets single out r.
    """
    _need(q1 % 4 == 3 and q2 % 8 == 3, "need q1 = 3 mod 4, q2 = 3 mod 8")
    m = q1 * q2
    cr, c1r, cm1r = _sym(m, q1, r)
    cs, c1s, cm1s = _sym(m, q1, s)
    trace = [
        f"(q1q2/r)={cr}", f"(q1q2/s)={cs}", f"(q1/r)={c1r}", f"(q1/s)={c1s}",
        f"r%8={r % 8}", f"s%8={s % 8}", f"q1%8={q1 % 8}",
    ]
    if which == "C1":
        ok = cr == 1 and cs == -1 and (
            (q1 % 8 == 7 and r % 4 == 1 and c1r == 1)
            or (q1 % 8 == 3 and c1r == cm1r)
        )
    elif which == "C2":
        ok = q1 % 8 == 7 and cr == 1 and cs == 1 and (
            (r % 4 == 1 and s % 4 == 1)
            or (r % 4 == 1 and c1r == 1)
            or (c1r == 1 and c1s == 1)
            or (r % 4 == 3 and s % 4 == 3 and c1r == -1 and c1s == -1)
        )
    elif which == "C3":
        ok = cr == 1 and cs == -1 and (
            (q1 % 8 == 7 and r % 4 == 1 and c1r == 1)
            or (q1 % 8 == 3 and c1r == 1)
        )
    else:
        raise ValueError(f"which must be C1, C2 or C3, got {which!r}")
    return ok, trace


def _excluded_pair(q1: int, q2: int, x: int, y: int, names: tuple[str, str]) -> bool:
    """Does {x, y} satisfy either exclusion condition, under either order?"""
    for a, b in ((x, y), (y, x)):
        if remark_conditions(q1, q2, a, b, names[0])[0]:
            return True
        if remark_conditions(q1, q2, a, b, names[1])[0]:
            return True
    return False


def _normalize_mixed(m: int, x: int, y: int) -> tuple[int, int] | None:
    """(r, s) with (q1q2/r) = -1 and (q1q2/s) = +1, or None."""
    cx, cy = kronecker(m, x), kronecker(m, y)
    if cx == -1 and cy == 1:
        return x, y
    if cx == 1 and cy == -1:
        return y, x
    return None


# ---------------------------------------------------------------------------
# layer-0 rank (forms D and E)


def rank_bounds_form_D(K: FamilyInput, check_excluded: bool = True) -> Classification:
    """Rank of the 2-class group of Q(sqrt(q1q2), sqrt(d)) or sqrt(2d).

    d = 3 (mod 4) squarefree.  The clauses follow the case analysis of the
    ambiguous-class-number derivation, keyed on q1q2 mod 8 (the printed
    single-prime criterion merges the two congruence classes incorrectly;
    both readings agree except when (q1/r) = (-1/r) = -1 with q1q2 = 5 mod
    8, where t - 1 - e forces rank 1).  Shapes with two or more primes
    have rank >= 2; a None prediction means rank > 2.
    """
    q1, q2 = K.q1, K.q2
    m = q1 * q2
    rs = K.rs_primes()
    trace = [f"d={K.d}", f"two={K.two}", f"delta={K.delta}", f"q1%8={q1 % 8}"]
    pre = "Rank2D" if K.two else "RankD"

    if len(rs) == 1:
        r = rs[0]
        cr, c1r, cm1r = _sym(m, q1, r)
        trace += [f"(q1q2/r)={cr}", f"(q1/r)={c1r}", f"(-1/r)={cm1r}", f"r%4={r % 4}"]
        if not K.two:
            if cr == -1:
                return Classification(f"{pre}-r-a", True, predicted_rank_A=1, trace=trace)
            if q1 % 8 == 7:
                rank1 = not (c1r == 1 and cm1r == 1)
            else:
                rank1 = c1r != cm1r
            if rank1:
                return Classification(f"{pre}-r-b", True, predicted_rank_A=1, trace=trace)
            return Classification(f"{pre}-r-2", True, predicted_rank_A=2, trace=trace)
        if q1 % 8 == 3 and cr == 1 and c1r == 1:
            return Classification(f"{pre}-r-a", True, predicted_rank_A=2, trace=trace)
        if q1 % 8 == 7 and r % 4 == 1 and cr == 1 and c1r == 1:
            return Classification(f"{pre}-r-b", True, predicted_rank_A=2, trace=trace)
        return Classification(f"{pre}-r-1", True, predicted_rank_A=1, trace=trace)

    if len(rs) == 2:
        x, y = rs
        names = ("C1", "C2") if not K.two else ("C2", "C3")
        if check_excluded and _excluded_pair(q1, q2, x, y, names):
            return Classification(
                f"{pre}-rs-excluded", True, predicted_rank_A=None, trace=trace + ["rank > 2"]
            )
        cx, cy = kronecker(m, x), kronecker(m, y)
        trace += [f"(q1q2/{x})={cx}", f"(q1q2/{y})={cy}"]
        if not K.two:
            rank2, clause = _rank_d_rs(q1, m, x, y, cx, cy, trace)
        else:
            rank2, clause = _rank_2d_rs(q1, m, x, y, cx, cy, trace)
        if rank2:
            return Classification(f"{pre}-rs-{clause}", True, predicted_rank_A=2, trace=trace)
        return Classification(
            f"{pre}-rs-gt2", True, predicted_rank_A=None, trace=trace + ["rank > 2"]
        )

    return Classification(f"{pre}-big", True, predicted_rank_A=None, trace=trace + ["rank > 2"])


def _rank_d_rs(q1, m, x, y, cx, cy, trace) -> tuple[bool, str]:
    if cx == -1 and cy == -1:
        return True, "a"
    mixed = _normalize_mixed(m, x, y)
    if mixed is not None:
        _, s = mixed  # the split (+1) prime carries the condition
        c1s, cm1s = kronecker(q1, s), kronecker(-1, s)
        trace.append(f"split prime {s}: (q1/s)={c1s}, (-1/s)={cm1s}")
        if q1 % 8 == 7 and (c1s == -1 or cm1s == -1):
            return True, "b"
        if q1 % 8 == 3 and c1s != cm1s:
            return True, "b"
        return False, ""
    if q1 % 8 == 7:  # both split; q1q2 = 1 mod 8 with both split exceeds the shape bound
        for r, s in ((x, y), (y, x)):
            c1r, cm1r = kronecker(q1, r), kronecker(-1, r)
            c1s, cm1s = kronecker(q1, s), kronecker(-1, s)
            if c1s == -1 and c1r == 1 and cm1r == -1:
                trace.append(f"(r,s)=({r},{s}) clause c first branch")
                return True, "c"
            if c1s == -1 and cm1r == -1 and cm1s == 1:
                trace.append(f"(r,s)=({r},{s}) clause c second branch")
                return True, "c"
    return False, ""


def _rank_2d_rs(q1, m, x, y, cx, cy, trace) -> tuple[bool, str]:
    if cx == -1 and cy == -1:
        return True, "a"
    mixed = _normalize_mixed(m, x, y)
    if mixed is not None:
        _, r_pos = mixed  # the split (+1) prime carries the condition
        c1r = kronecker(q1, r_pos)
        trace.append(f"split prime {r_pos}: (q1/r)={c1r}, r%4={r_pos % 4}")
        if q1 % 8 == 3 and c1r == -1:
            return True, "b"
        if q1 % 8 == 7 and (r_pos % 4 == 3 or c1r == -1):
            return True, "c"
        return False, ""
    if cx == 1 and cy == 1 and q1 % 8 == 7:
        for r, s in ((x, y), (y, x)):
            c1r, c1s = kronecker(q1, r), kronecker(q1, s)
            if r % 4 == 3 and c1r == 1 and c1s == -1:
                trace.append(f"(r,s)=({r},{s}) clause d-i")
                return True, "d"
            if r % 4 == 3 and s % 4 == 1 and c1s == -1:
                trace.append(f"(r,s)=({r},{s}) clause d-ii")
                return True, "d"
    return False, ""


# ---------------------------------------------------------------------------
# layer-1 rank tables (triquadratic K1 = K(sqrt(2)))


def rank_K1(K: FamilyInput) -> Classification:
    """Rank of the 2-class group at the first tower layer, from the
    printed tables; keyed on the odd part of d (both branches share K1)."""
    q1, q2 = K.q1, K.q2
    _need(q1 % 8 == 7 and q2 % 8 == 3, "table needs q1 = 7 mod 8, q2 = 3 mod 8")
    m = q1 * q2
    rs = K.rs_primes()
    trace = [f"d_odd={K.d}"]

    if len(rs) == 1:
        r = rs[0]
        c1r = kronecker(q1, r)
        trace += [f"r%8={r % 8}", f"(q1/r)={c1r}"]
        if r % 8 == 3:
            return Classification("K1-1-b1", True, predicted_rank_A=1, trace=trace)
        if r % 8 == 5 and c1r == -1:
            return Classification("K1-1-b2", True, predicted_rank_A=1, trace=trace)
        return Classification("K1-1-rank2", True, predicted_rank_A=2, trace=trace)

    if len(rs) == 2:
        x, y = rs
        rank2 = _k1_pair_rank2(m, q1, x, y, trace)
        if rank2:
            return Classification(f"K1-2-rank2-{rank2}", True, predicted_rank_A=2, trace=trace)
        rank3 = _k1_pair_rank3(m, q1, x, y, trace)
        if rank3:
            return Classification(f"K1-2-rank3-{rank3}", True, predicted_rank_A=3, trace=trace)
        return Classification("K1-2-rank45", True, predicted_rank_A=None, trace=trace + ["rank in {4,5}"])

    cs = sorted(kronecker(m, x) for x in rs)
    if cs in ([-1, -1, -1], [-1, -1, 1]):
        return Classification("K1-3", True, predicted_rank_A=None, trace=trace + ["rank in {4,5,6}"])
    return Classification("K1-3-nomatch", False, trace=trace)


def _k1_pair_rank2(m, q1, x, y, trace) -> str | None:
    cx, cy = kronecker(m, x), kronecker(m, y)
    if cx == -1 and cy == -1:
        for r, s in ((x, y), (y, x)):
            c1r, c1s = kronecker(q1, r), kronecker(q1, s)
            if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                trace.append(f"C1 r={r} s={s}")
                return "C1"
            if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
                trace.append(f"C1 r={r} s={s}")
                return "C1"
        return None
    mixed = _normalize_mixed(m, x, y)
    if mixed is not None:
        r, s = mixed  # (q1q2/r) = -1, (q1q2/s) = +1
        c1r, c1s = kronecker(q1, r), kronecker(q1, s)
        if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
            return "C2"
        if r % 8 == 3 and s % 8 == 5 and c1s == -1:
            return "C2"
        if r % 8 == 5 and s % 8 == 3 and c1r == -1:
            return "C2"
        return None
    if cx == 1 and cy == 1:
        for r, s in ((x, y), (y, x)):
            c1r, c1s = kronecker(q1, r), kronecker(q1, s)
            if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
                return "C3"
            if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                return "C3"
    return None


def _k1_pair_rank3(m, q1, x, y, trace) -> str | None:
    cx, cy = kronecker(m, x), kronecker(m, y)
    if cx == -1 and cy == -1:
        for r, s in ((x, y), (y, x)):
            c1r, c1s = kronecker(q1, r), kronecker(q1, s)
            r8, s8 = r % 8, s % 8
            if (
                (r8 == 5 and s8 == 3 and c1r == 1)
                or (r8 == 5 and s8 == 5 and (c1r == -1 or c1s == -1))
                or (r8 == 3 and s8 == 3 and c1r == c1s)
                or (r8 == 3 and s8 == 7)
                or (r8 == 5 and s8 == 7 and c1r == -1)
                or (r8 == 5 and s8 == 1 and c1r == -1)
                or (r8 == 3 and s8 == 1)
            ):
                return "C1"
        return None
    mixed = _normalize_mixed(m, x, y)
    if mixed is not None:
        r, s = mixed
        c1r, c1s = kronecker(q1, r), kronecker(q1, s)
        r8, s8 = r % 8, s % 8
        if (
            (r8 == 5 and s8 == 5 and (c1r == -1 or c1s == -1))
            or (r8 == 3 and s8 == 3 and c1r == c1s)
            or (r8 == 3 and s8 == 5 and c1s == 1)
            or (r8 == 5 and s8 == 3 and c1r == 1)
            or (r8 == 1 and s8 == 5 and c1s == -1)
        ):
            return "C2"
        return None
    if cx == 1 and cy == 1:
        for r, s in ((x, y), (y, x)):
            c1r, c1s = kronecker(q1, r), kronecker(q1, s)
            r8, s8 = r % 8, s % 8
            if (
                (r8 == 7 and s8 == 5 and c1s == -1)
                or (r8 == 7 and s8 == 3 and c1r != c1s)
                or (r8 == 3 and s8 == 3 and c1r == c1s)
                or (r8 == 5 and s8 == 5 and (c1r == -1 or c1s == -1))
                or (r8 == 5 and s8 == 3 and c1r == 1)
            ):
                return "C3"
    return None


# ---------------------------------------------------------------------------
# the stable-rank classification (items 1-12)


def classify_first_main(K: FamilyInput, disc_bound: int = DEFAULT_DISC_BOUND) -> Classification:
    """Match against the twelve stable-rank families; the predicted value
    is rank(A at every layer) on a match, and a no-match means stability
    with rank <= 2 fails for this field."""
    if K.form == "E":
        raise ValueError("fields with q1 = q2 = 3 (mod 8) are outside this classification")
    matches = (
        _match_items_d(K) if K.form == "D" else _match_items_f(K, disc_bound)
    )
    if not matches:
        return Classification("Thm1-nomatch", False)
    out = matches[0]
    if len(matches) > 1:
        out.flags.append("multiple clauses matched: " + ", ".join(c.statement_id for c in matches))
    return out


def _match_items_d(K: FamilyInput) -> list[Classification]:
    q1, q2 = K.q1, K.q2
    m = q1 * q2
    rs = K.rs_primes()
    out: list[Classification] = []

    if len(rs) == 1:
        r = rs[0]
        cr, c1r, _ = _sym(m, q1, r)
        trace = [f"delta={K.delta}", f"r={r}", f"r%8={r % 8}", f"(q1q2/r)={cr}", f"(q1/r)={c1r}"]
        if not K.two:
            if r % 8 == 3 and cr == -1:
                out.append(Classification("Thm1-item1-C1", True, 1, 1, trace=trace))
            if r % 8 == 3 and cr == 1 and c1r == 1:
                out.append(Classification("Thm1-item1-C2", True, 1, 1, trace=trace))
            if r % 8 == 5 and c1r == -1:
                out.append(Classification("Thm1-item1-C3", True, 1, 1, trace=trace))
            if K.delta == q1 and r % 4 == 1 and cr == 1 and c1r == 1:
                out.append(Classification("Thm1-item2", True, 2, 2, trace=trace))
        else:
            if r % 8 == 3:
                out.append(Classification("Thm1-item5-C1", True, 1, 1, trace=trace))
            if r % 8 == 5 and c1r == -1:
                out.append(Classification("Thm1-item5-C2", True, 1, 1, trace=trace))
            if K.delta == q1 and r % 8 == 5 and cr == 1 and c1r == 1:
                out.append(Classification("Thm1-item6", True, 2, 2, trace=trace))
    elif len(rs) == 2:
        x, y = rs
        cx, cy = kronecker(m, x), kronecker(m, y)
        trace = [f"delta={K.delta}", f"(q1q2/{x})={cx}", f"(q1q2/{y})={cy}"]
        mixed = _normalize_mixed(m, x, y)
        if not K.two:
            if cx == -1 and cy == -1:
                for r, s in ((x, y), (y, x)):
                    c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                    if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                        out.append(Classification("Thm1-item3-C1", True, 2, 2, trace=trace + [f"r={r},s={s}"]))
                        break
                    if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
                        out.append(Classification("Thm1-item3-C2", True, 2, 2, trace=trace + [f"r={r},s={s}"]))
                        break
            elif mixed is not None:
                r, s = mixed
                c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                tr = trace + [f"r={r},s={s}", f"(q1/r)={c1r}", f"(q1/s)={c1s}"]
                if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
                    out.append(Classification("Thm1-item4-C1", True, 2, 2, trace=tr))
                if r % 8 == 3 and s % 8 == 5 and c1s == -1:
                    out.append(Classification("Thm1-item4-C2", True, 2, 2, trace=tr))
                if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                    out.append(Classification("Thm1-item4-C3", True, 2, 2, trace=tr))
        else:
            if K.d % 8 != 3:
                return out
            if cx == -1 and cy == -1:
                for r, s in ((x, y), (y, x)):
                    c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                    if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                        out.append(Classification("Thm1-item7-C1", True, 2, 2, trace=trace + [f"r={r},s={s}"]))
                        break
                    if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
                        out.append(Classification("Thm1-item7-C2", True, 2, 2, trace=trace + [f"r={r},s={s}"]))
                        break
            elif mixed is not None:
                r, s = mixed
                c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                tr = trace + [f"r={r},s={s}", f"(q1/r)={c1r}", f"(q1/s)={c1s}"]
                if r % 8 == 3 and s % 8 == 3 and c1r != c1s:
                    out.append(Classification("Thm1-item8-C1", True, 2, 2, trace=tr))
                if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                    out.append(Classification("Thm1-item8-C2", True, 2, 2, trace=tr))
                if r % 8 == 3 and s % 8 == 5 and c1s == -1:
                    out.append(Classification("Thm1-item8-C3", True, 2, 2, trace=tr))
            else:
                for r, s in ((x, y), (y, x)):
                    c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                    if r % 8 == 3 and s % 8 == 3 and c1r == 1 and c1s == -1:
                        out.append(Classification("Thm1-item9-C1", True, 2, 2, trace=trace + [f"r={r},s={s}"]))
                        break
                    if r % 8 == 5 and s % 8 == 3 and c1r == -1:
                        out.append(Classification("Thm1-item9-C2", True, 2, 2, trace=trace + [f"r={r},s={s}"]))
                        break
    return out


def _match_items_f(K: FamilyInput, disc_bound: int) -> list[Classification]:
    p = K.p
    out: list[Classification] = []
    if K.q1 is not None:
        for a, b in ((K.q1, K.q2), (K.q2, K.q1)):
            # a plays q1, b plays q2 in the statement
            if not (b % 8 == 3 and a % 4 == 3 and kronecker(b, p) == -1):
                continue
            c1p = kronecker(a, p)
            trace = [f"p%8={p % 8}", f"q1={a}", f"q2={b}", f"(q2/p)={kronecker(b, p)}", f"(q1/p)={c1p}"]
            if p % 8 == 5 and a % 8 == 3 and c1p == 1:
                out.append(Classification("Thm1-item10-C1", True, 0, 0, trace=trace))
                break
            if p % 8 == 5 and a % 8 == 7 and c1p == -1:
                out.append(Classification("Thm1-item10-C2", True, 0, 0, trace=trace))
                break
        return out
    d = K.r
    if d % 4 == 3:
        if p % 8 == 5:
            out.append(Classification("Thm1-item11", True, 0, 0, trace=[f"p%8={p % 8}", f"d%4={d % 4}"]))
        return out
    # p = d = 1 (mod 4): the computational clause
    sym = kronecker(p, d)
    trace = [f"(p/d)={sym}"]
    if sym == 1:
        qp, qd = quartic_symbol(p, d), quartic_symbol(d, p)
        trace += [f"(p/d)_4={qp}", f"(d/p)_4={qd}"]
        if qp == qd:
            return out
    h2_2pd = class_number(2 * p * d, disc_bound).h2
    trace.append(f"h2(2pd)={h2_2pd}")
    if h2_2pd != 4:
        return out
    qk1 = wada_unit_system(MultiQuadField((2, p * d))).q_index
    trace.append(f"q(k1)={qk1}")
    if qk1 != 1:
        return out
    out.append(Classification("Thm1-item12", True, 0, 0, trace=trace))
    return out


# ---------------------------------------------------------------------------
# rank-3 families


def rank3_families(K: FamilyInput) -> Classification:
    """The rank-3 layer-0 shapes and, where they apply, the two stable
    rank-3 families; q1 = 7 (mod 8) throughout."""
    q1, q2 = K.q1, K.q2
    _need(K.form == "D", "rank-3 families need form D")
    m = q1 * q2
    rs = K.rs_primes()
    lemma = _rank3_lemma(m, q1, rs)
    if lemma is None:
        return Classification("Rank3Lemma-nomatch", False)
    cid, trace = lemma
    out = Classification(cid, True, predicted_rank_A=3, trace=trace)
    prop = _rank3_prop(m, q1, rs) if len(rs) == 2 else None
    if prop is not None:
        out.statement_id = f"{cid}+{prop}"
        out.predicted_rank_Ainf = 3
    return out


def _rank3_lemma(m, q1, rs) -> tuple[str, list[str]] | None:
    if len(rs) == 2:
        x, y = rs
        cx, cy = kronecker(m, x), kronecker(m, y)
        mixed = _normalize_mixed(m, x, y)
        if mixed is not None:
            r, s = mixed
            if s % 4 == 1 and kronecker(q1, s) == 1:
                return "Rank3Lemma-1", [f"r={r}", f"s={s}", "(q1/s)=1", f"s%4=1"]
            return None
        if cx == 1 and cy == 1:
            for r, s in ((x, y), (y, x)):
                c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                tr = [f"r={r}", f"s={s}", f"(q1/r)={c1r}", f"(q1/s)={c1s}"]
                if r % 4 == 1 and c1r == 1 and c1s == -1:
                    return "Rank3Lemma-2-b1", tr
                if r % 4 == 3 and c1r == 1 and c1s == 1:
                    return "Rank3Lemma-2-b2", tr
                if r % 4 == 1 and s % 4 == 1 and c1r == -1:
                    return "Rank3Lemma-2-b3", tr
                if r % 4 == 3 and s % 4 == 3 and c1r * c1s == 1:
                    return "Rank3Lemma-2-b4", tr
                if r % 4 == 3 and s % 4 == 1 and c1s == 1:
                    return "Rank3Lemma-2-b5", tr
        return None
    if len(rs) == 3:
        syms = [kronecker(m, x) for x in rs]
        neg = [x for x, c in zip(rs, syms) if c == -1]
        pos = [x for x, c in zip(rs, syms) if c == 1]
        if len(neg) == 3:
            return "Rank3Lemma-5", [f"all (q1q2/.)=-1: {rs}"]
        if len(neg) == 1 and len(pos) == 2:
            t = neg[0]
            for r, s in ((pos[0], pos[1]), (pos[1], pos[0])):
                c1r, c1s = kronecker(q1, r), kronecker(q1, s)
                tr = [f"r={r}", f"s={s}", f"t={t}", f"(q1/r)={c1r}", f"(q1/s)={c1s}"]
                if r % 4 == 3 and c1s == -1 and c1r == 1:
                    return "Rank3Lemma-3-b1", tr
                if r % 4 == 3 and s % 4 == 1 and c1s == -1:
                    return "Rank3Lemma-3-b2", tr
            return None
        if len(neg) == 2 and len(pos) == 1:
            s = pos[0]
            c1s = kronecker(q1, s)
            tr = [f"s={s}", f"(q1/s)={c1s}", f"s%4={s % 4}"]
            if s % 4 == 3:
                return "Rank3Lemma-4-b1", tr
            if c1s == -1:
                return "Rank3Lemma-4-b2", tr
        return None
    return None


def _rank3_prop(m, q1, rs) -> str | None:
    x, y = rs
    cx, cy = kronecker(m, x), kronecker(m, y)
    if cx == 1 and cy == 1:
        for r, s in ((x, y), (y, x)):
            c1r, c1s = kronecker(q1, r), kronecker(q1, s)
            if r % 8 == 3 and s % 8 == 3 and c1r == c1s:
                return "Rank3Prop-1-b1"
            if r % 8 == 5 and s % 8 == 5 and c1r == -1:
                return "Rank3Prop-1-b2"
            if r % 8 == 5 and s % 8 == 3 and c1r == 1:
                return "Rank3Prop-1-b3"
        return None
    mixed = _normalize_mixed(m, x, y)
    if mixed is not None:
        r, s = mixed
        c1r, c1s = kronecker(q1, r), kronecker(q1, s)
        if r % 8 == 5 and s % 8 == 5 and c1s == 1 and c1r == -1:
            return "Rank3Prop-2-b1"
        if r % 8 == 3 and s % 8 == 5 and c1s == 1:
            return "Rank3Prop-2-b2"
    return None


# ---------------------------------------------------------------------------
# triviality of the Iwasawa module


def classify_trivial_iwasawa(K: FamilyInput, disc_bound: int = DEFAULT_DISC_BOUND) -> Classification:
    """Match against the three families with trivial module; inputs with
    q1 = q2 = 3 (mod 8) and d = 3 (mod 4) are always classified
    non-trivial (their first layer has even class number)."""
    if K.form == "E":
        return Classification(
            "FormE-nontrivial", True, predicted_structure="nontrivial",
            trace=[f"q1={K.q1}", f"q2={K.q2}", f"d={K.d}"],
        )
    if K.form == "SM1":
        q, r = K.q, K.r
        for a, b in ((q, r), (r, q)):
            if a % 4 != 3 or not is_prime(a):
                continue
            trace = [f"q={a}", f"r={b}", f"r%8={b % 8}", f"q%8={a % 8}"]
            if b % 8 in (3, 5):
                return Classification("SecondMain-1-C1", True, predicted_structure="trivial", trace=trace)
            if b % 8 == 7 and a % 8 == 3:
                return Classification("SecondMain-1-C2", True, predicted_structure="trivial", trace=trace)
        return Classification("SecondMain-nomatch", False)
    if K.form == "SM2":
        return _match_sm2(K)
    if K.form == "SM3":
        return _match_sm3(K, disc_bound)
    return Classification("SecondMain-nomatch", False)


def _match_sm2(K: FamilyInput) -> Classification:
    r = K.r
    pairs = [(K.q1, K.q2)]
    if K.q2 % 4 == 3 and K.q1 % 8 == 3:
        pairs.append((K.q2, K.q1))
    for q1, q2 in pairs:
        if not (q1 % 4 == 3 and q2 % 8 == 3):
            continue
        m = q1 * q2
        cr, c1r, _ = _sym(m, q1, r)
        trace = [f"q1={q1}", f"q2={q2}", f"r%8={r % 8}", f"(q1q2/r)={cr}", f"(q1/r)={c1r}"]
        if r % 8 == 3:
            return Classification("SecondMain-2-C1", True, predicted_structure="trivial", trace=trace)
        if r % 8 == 5 and q1 % 8 == 3 and cr == -1:
            return Classification("SecondMain-2-C2", True, predicted_structure="trivial", trace=trace)
        if r % 8 == 5 and q1 % 8 == 7 and c1r == -1:
            return Classification("SecondMain-2-C3", True, predicted_structure="trivial", trace=trace)
        if r % 8 == 7 and q1 % 8 == 3:
            return Classification("SecondMain-2-C4", True, predicted_structure="trivial", trace=trace)
    return Classification("SecondMain-nomatch", False)


def _match_sm3(K: FamilyInput, disc_bound: int) -> Classification:
    p1, p2 = K.p, K.r
    sym = kronecker(p1, p2)
    trace = [f"(p1/p2)={sym}"]
    if sym == 1:
        qa, qb = quartic_symbol(p1, p2), quartic_symbol(p2, p1)
        trace += [f"(p1/p2)_4={qa}", f"(p2/p1)_4={qb}"]
        if qa == qb:
            return Classification("SecondMain-nomatch", False, trace=trace)
    h2v = class_number(2 * p1 * p2, disc_bound).h2
    trace.append(f"h2(2*p1*p2)={h2v}")
    if h2v != 4:
        return Classification("SecondMain-nomatch", False, trace=trace)
    qk1 = wada_unit_system(MultiQuadField((2, p1 * p2))).q_index
    trace.append(f"q(k1)={qk1}")
    if qk1 != 1:
        return Classification("SecondMain-nomatch", False, trace=trace)
    return Classification("SecondMain-3", True, predicted_structure="trivial", trace=trace)


# ---------------------------------------------------------------------------
# the unit trichotomy and the structure theorem


@dataclass
class LemgenCase:
    case: str  # 'a' | 'b' | 'c'
    a: int
    b: int
    witness: int  # the one perfect square among the three integers
    b1: int
    b2: int
    values: tuple[int, int, int]


def _lemgen_validate(q: int, r: int, s: int, nu: int):
    _need(nu in (1, 2), "nu in {1, 2}")
    _need(is_prime(q) and q % 8 == 7, f"q={q} must be prime, 7 mod 8")
    _need(is_prime(r) and r % 8 == 3, f"r={r} must be prime, 3 mod 8")
    _need(is_prime(s) and s % 8 == 3, f"s={s} must be prime, 3 mod 8")
    _need(len({q, r, s}) == 3, "q, r, s distinct")
    want = -1 if nu == 2 else 1
    _need(kronecker(q, s) == want and kronecker(q, r) == want, f"(q/r) = (q/s) = {want} required")
    _need(kronecker(s, r) == 1, "(s/r) = 1 required")


def lemgen_case(q: int, r: int, s: int, nu: int) -> LemgenCase:
    """The unit trichotomy for eps = a + b*sqrt(nu*q*r*s).

    Exactly one of 2^d1*r*(a+(-1)^d1), 2^d2*q*(a-1), 2^d2*s*(a+(-1)^d1)
    is a perfect square (d1, d2 the indicators of nu = 1, 2); returns the
    case with the root expansion coefficients, all verified exactly.
    """
    _lemgen_validate(q, r, s, nu)
    m = nu * q * r * s
    fu = fundamental_unit(m)
    assert fu.value.den == 1 and fu.norm == 1
    a, b = fu.value.a, fu.value.b
    d1 = 1 if nu == 1 else 0
    d2 = 1 - d1
    sgn = -1 if nu == 1 else 1  # (-1)^d1
    vals = (
        2**d1 * r * (a + sgn),
        2**d2 * q * (a - 1),
        2**d2 * s * (a + sgn),
    )
    roots = [is_perfect_square(v) for v in vals]
    hits = [i for i, w in enumerate(roots) if w is not None]
    if len(hits) != 1:
        raise ConsistencyError(
            f"trichotomy failed for (q,r,s,nu)=({q},{r},{s},{nu}): values {vals}, squares at {hits}"
        )
    i = hits[0]
    case = "abc"[i]
    if case == "a":
        scale = 2**d1 * r
        b1 = roots[0] // scale
        assert scale * b1 * b1 == a + sgn
        if nu == 1:
            assert b % (2 * b1) == 0
            b2 = b // (2 * b1)
            assert r * b1 * b1 + q * s * b2 * b2 == a
        else:
            assert b % b1 == 0
            b2 = b // b1
            assert r * b1 * b1 + 2 * q * s * b2 * b2 == 2 * a
        ident = 2**d2 == sgn * r * b1 * b1 + (-1) ** d2 * nu * q * s * b2 * b2
    elif case == "b":
        scale = 2**d2 * q
        b1 = roots[1] // scale
        assert scale * b1 * b1 == a - 1
        assert b % b1 == 0
        b2 = b // b1
        assert nu * q * b1 * b1 + r * s * b2 * b2 == 2 * a
        ident = 2 == -(2**d2) * q * b1 * b1 + r * s * b2 * b2
    else:
        scale = 2**d2 * s
        b1 = roots[2] // scale
        assert scale * b1 * b1 == a + sgn
        assert b % b1 == 0
        b2 = b // b1
        assert nu * s * b1 * b1 + q * r * b2 * b2 == 2 * a
        ident = 2 == sgn * 2**d2 * s * b1 * b1 + (-1) ** d2 * q * r * b2 * b2
    if not ident:
        raise ConsistencyError(f"expansion identity failed for case {case}, (q,r,s,nu)=({q},{r},{s},{nu})")
    return LemgenCase(case=case, a=a, b=b, witness=vals[i], b1=b1, b2=b2, values=vals)


def lemgen_companion(q: int, r: int, s: int, nu: int) -> tuple[int, int, int]:
    """For the companion unit eps = x + y*sqrt(rho*q*r*s), rho != nu,
    2^d2*q*(x-1) is always the square; returns (x, y1, y2) verified."""
    _lemgen_validate(q, r, s, nu)
    rho = 3 - nu
    d2 = 1 if nu == 2 else 0
    m = rho * q * r * s
    fu = fundamental_unit(m)
    assert fu.value.den == 1 and fu.norm == 1
    x, y = fu.value.a, fu.value.b
    T = 2**d2 * q * (x - 1)
    w = is_perfect_square(T)
    if w is None:
        raise ConsistencyError(f"companion square 2^d2*q*(x-1)={T} not a square for ({q},{r},{s},{nu})")
    scale = 2**d2 * q
    y1 = w // scale
    assert scale * y1 * y1 == x - 1
    den = 2 * y1 if rho == 1 else y1
    assert y % den == 0
    y2 = y // den
    assert q * y1 * y1 + rho * r * s * y2 * y2 == rho * x
    assert rho == -q * y1 * y1 + rho * r * s * y2 * y2
    return x, y1, y2


def third_main_predict(
    q: int, r: int, s: int, nu: int, disc_bound: int = DEFAULT_DISC_BOUND
) -> Classification:
    """Predicted module structure over Q(sqrt(nu*q), sqrt(rs)) when the
    q(a-1)-type integer is not a square: A = Z/2 x Z/2^(m-2) at every
    layer, cyclic companions, and the first-layer class number relations."""
    case = lemgen_case(q, r, s, nu)
    if case.case == "b":
        return Classification(
            "ThirdMain-nomatch", False,
            trace=[f"2^d2*q*(a-1)={case.values[1]} is a perfect square"],
        )
    h2v = class_number(nu * q * r * s, disc_bound).h2
    mexp = h2v.bit_length() - 1
    out = Classification(
        f"ThirdMain-nu{nu}", True,
        predicted_rank_A=2, predicted_rank_Ainf=2,
        predicted_structure=f"Z/2 x Z/2^{mexp - 2}",
        trace=[f"case={case.case}", f"a={case.a}", f"h2({nu * q * r * s})=2^{mexp}"],
        values={
            "m": mexp,
            "h2_nuqrs": h2v,
            "h2_K": h2v // 2,
            "h2_K1": h2v // 2,
            "q_K": 2,
            "q_K1": 32,
            "h2_F1": h2v,
            "companion_structure": f"Z/2^{mexp - 1}",
        },
    )
    if mexp < 3:
        out.flags.append(f"finding: h2(nu*q*r*s)=2^{mexp} < 8 contradicts rank 2 at layer 0")
    return out


# ---------------------------------------------------------------------------
# stability inference


def fukuda_stable(values: list[tuple[int, int]], kind: str = "h2") -> str | None:
    """Fukuda-style inference: equality at consecutive layers n, n+1
    (n >= 0, everything totally ramified) propagates to all layers."""
    if len(values) < 2:
        raise ValueError("need two consecutive layers")
    (n0, v0), (n1, v1) = values[0], values[1]
    if n1 != n0 + 1:
        raise ValueError(f"layers {n0}, {n1} are not consecutive")
    if v0 == v1:
        return f"{kind} stable from layer {n0}"
    return None

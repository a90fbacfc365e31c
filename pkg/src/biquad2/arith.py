"""Exact integer kernels: factorization, residue symbols, square detection.

Everything here is deterministic and allocation-light; these functions sit on
the hot path of every congruence test in the classifiers and sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

TRIAL_BOUND = 10**6

# Deterministic Miller-Rabin witness set, valid for n < 3_317_044_064_679_887_385_961_981.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_LIMIT = 3_317_044_064_679_887_385_961_981


class ResourceLimitError(RuntimeError):
    """A configurable work bound was exceeded."""


def primes_below(n: int) -> list[int]:
    """All primes < n by a plain sieve."""
    if n <= 2:
        return []
    sieve = bytearray([1]) * n
    sieve[0] = sieve[1] = 0
    for p in range(2, math.isqrt(n - 1) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
    return [i for i in range(n) if sieve[i]]


_SMALL_PRIMES = primes_below(10_000)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES[:60]:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n >= _MR_LIMIT:
        # desk-scale inputs never get here; fall through with the same bases
        # plus a few more rounds rather than failing hard
        bases = _MR_BASES + tuple(_SMALL_PRIMES[12:40])
    else:
        bases = _MR_BASES
    d = n - 1
    r = (d & -d).bit_length() - 1
    d >>= r
    for a in bases:
        a %= n
        if a == 0:
            continue
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    """A nontrivial factor of composite odd n (Brent's variant)."""
    if n % 2 == 0:
        return 2
    seed = 1
    while True:
        y, c, m = 2 + seed, 1 + seed * 3, 128
        g = r = q = 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r <<= 1
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g
        seed += 1


@dataclass(frozen=True)
class Factorization:
    n: int
    sign: int
    factors: tuple[tuple[int, int], ...]  # (prime, exponent), primes increasing

    def value(self) -> int:
        v = self.sign
        for p, e in self.factors:
            v *= p**e
        return v

    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]


@lru_cache(maxsize=200_000)
def factor(n: int) -> Factorization:
    """Exact prime factorization of a nonzero integer."""
    if n == 0:
        raise ValueError("factor(0) is undefined")
    sign = 1 if n > 0 else -1
    m = abs(n)
    fac: dict[int, int] = {}
    for p in _SMALL_PRIMES:
        if p * p > m:
            break
        while m % p == 0:
            fac[p] = fac.get(p, 0) + 1
            m //= p
    if m > 1 and m < 10_000 * 10_000:
        # below the small-prime square, whatever is left is prime
        fac[m] = fac.get(m, 0) + 1
        m = 1
    # mid-range trial division up to TRIAL_BOUND
    if m > 1:
        p = 10_001
        while p * p <= m and p < TRIAL_BOUND:
            while m % p == 0:
                fac[p] = fac.get(p, 0) + 1
                m //= p
            p += 2
        if 1 < m and (p * p > m or is_prime(m)):
            fac[m] = fac.get(m, 0) + 1
            m = 1
    # rho on whatever survives
    stack = [m] if m > 1 else []
    while stack:
        t = stack.pop()
        if t == 1:
            continue
        if is_prime(t):
            fac[t] = fac.get(t, 0) + 1
            continue
        g = _pollard_rho(t)
        stack.append(g)
        stack.append(t // g)
    out = Factorization(n, sign, tuple(sorted(fac.items())))
    assert out.value() == n
    return out


def is_squarefree(n: int) -> bool:
    if n == 0:
        raise ValueError("is_squarefree(0) is undefined")
    if n % 4 == 0:
        return False
    return all(e == 1 for _, e in factor(n).factors)


def squarefree_part(n: int) -> int:
    """The squarefree integer in the square class of n (sign preserved)."""
    if n == 0:
        raise ValueError("squarefree_part(0) is undefined")
    out = factor(n).sign
    for p, e in factor(n).factors:
        if e % 2:
            out *= p
    return out


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n), the full extension of Legendre/Jacobi."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    t = (n & -n).bit_length() - 1
    n >>= t
    if t:
        if a % 2 == 0:
            return 0
        if t % 2 and a % 8 in (3, 5):
            result = -result
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def quartic_symbol(a: int, p: int) -> int:
    """Quartic residue symbol a^((p-1)/4) mod p, reported as +1 or -1.

    Only defined when p = 1 (mod 4) and a is a quadratic residue mod p;
    anything else is a caller bug and raises.
    """
    if p % 4 != 1 or not is_prime(p):
        raise ValueError(f"quartic symbol needs a prime p = 1 (mod 4), got {p}")
    if kronecker(a, p) != 1:
        raise ValueError(f"quartic symbol needs (a/p) = 1, got a={a}, p={p}")
    r = pow(a, (p - 1) // 4, p)
    if r == 1:
        return 1
    if r == p - 1:
        return -1
    raise AssertionError(f"a^((p-1)/4) not +-1 for a={a}, p={p}")


def is_perfect_square(n: int) -> int | None:
    """Integer square root of n if n is a perfect square, else None."""
    if n < 0:
        return None
    r = math.isqrt(n)
    return r if r * r == n else None


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """(u, v, g) with u*a + v*b = g = gcd(a, b), g >= 0."""
    u0, v0, g0 = 1, 0, a
    u1, v1, g1 = 0, 1, b
    while g1:
        q = g0 // g1
        u0, u1 = u1, u0 - q * u1
        v0, v1 = v1, v0 - q * v1
        g0, g1 = g1, g0 - q * g1
    if g0 < 0:
        return -u0, -v0, -g0
    return u0, v0, g0


def sqrt_mod_prime(a: int, p: int) -> int | None:
    """A square root of a modulo an odd prime p, or None (Tonelli-Shanks)."""
    a %= p
    if a == 0:
        return 0
    if kronecker(a, p) != 1:
        return None
    if p % 4 == 3:
        x = pow(a, (p + 1) // 4, p)
        return x
    # p = 1 (mod 4)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while kronecker(z, p) != -1:
        z += 1
    m, c, t, x = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, x = t * c % p, x * b % p
    return x

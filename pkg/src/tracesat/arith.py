"""Exact integer and modular primitives: multiplicative functions, Ramanujan
and Kloosterman sums, Legendre/Jacobi symbols.

Everything here is a pure function.  Integer-valued sums (Ramanujan) are
computed by exact multiplicative formulas; complex exponential sums
(Kloosterman) stay floating, with phases reduced mod q before the single
cmath.exp call per term.
"""

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import InputError

TWO_PI = 2.0 * math.pi

# Deterministic Miller-Rabin witness set, valid for all n < 2^64.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_up_to(n: int) -> list:
    """All primes <= n by sieve."""
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
    return [i for i in range(n + 1) if sieve[i]]


def prime_factorization(n: int) -> list:
    """Sorted [(p, e), ...] for n >= 1, by trial division (desk scale)."""
    if n < 1:
        raise InputError(f"prime_factorization needs n >= 1, got {n}")
    out = []
    for p in (2, 3):
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
    f = 5
    while f * f <= n:
        for p in (f, f + 2):
            if n % p == 0:
                e = 0
                while n % p == 0:
                    n //= p
                    e += 1
                out.append((p, e))
        f += 6
    if n > 1:
        out.append((n, 1))
    return out


def euler_phi(n: int) -> int:
    phi = 1
    for p, e in prime_factorization(n):
        phi *= (p - 1) * p ** (e - 1)
    return phi


def mobius(n: int) -> int:
    fac = prime_factorization(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def divisor_count(n: int) -> int:
    out = 1
    for _, e in prime_factorization(n):
        out *= e + 1
    return out


def divisors(n: int) -> list:
    """Sorted positive divisors of n >= 1."""
    out = [1]
    for p, e in prime_factorization(n):
        out = [d * p**k for d in out for k in range(e + 1)]
    return sorted(out)


def squarefree_part(n: int) -> int:
    """Squarefree d with n = d*m^2; sign of n is preserved."""
    if n == 0:
        raise InputError("squarefree_part undefined at 0")
    sign = -1 if n < 0 else 1
    d = 1
    for p, e in prime_factorization(abs(n)):
        if e % 2:
            d *= p
    return sign * d


def valuation(n: int, p: int) -> int:
    """v_p(n) for n != 0."""
    if n == 0:
        raise InputError("valuation undefined at 0")
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class StandardFunctions:
    phi: int
    mobius: int
    divisor_count: int
    squarefree_part: int
    prime_factorization: tuple


def standard_functions(n: int) -> StandardFunctions:
    if n < 1:
        raise InputError(f"standard_functions needs n >= 1, got {n}")
    return StandardFunctions(
        phi=euler_phi(n),
        mobius=mobius(n),
        divisor_count=divisor_count(n),
        squarefree_part=squarefree_part(n),
        prime_factorization=tuple(prime_factorization(n)),
    )


@dataclass(frozen=True)
class ResidueClass:
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise InputError(f"modulus must be >= 1, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            raise InputError(f"residue {self.value} out of range mod {self.modulus}")


@dataclass(frozen=True)
class PrimePower:
    p: int
    ell: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise InputError(f"{self.p} is not prime")
        if self.ell < 1:
            raise InputError(f"exponent must be >= 1, got {self.ell}")

    @property
    def q(self) -> int:
        return self.p**self.ell


def _ramanujan_prime_power(p: int, ell: int, x: int) -> int:
    # c_{p^ell}(x): p^{ell-1}(p-1) if p^ell | x; -p^{ell-1} if p^{ell-1} || x; else 0.
    pl1 = p ** (ell - 1)
    if x % (pl1 * p) == 0:
        return pl1 * (p - 1)
    if x % pl1 == 0:
        return -pl1
    return 0


def ramanujan_sum(q: int, x: int) -> int:
    """c_q(x) = sum over units r mod q of e_q(r x), exactly."""
    if q < 1:
        raise InputError(f"ramanujan_sum needs q >= 1, got {q}")
    out = 1
    for p, e in prime_factorization(q):
        out *= _ramanujan_prime_power(p, e, x)
        if out == 0:
            return 0
    return out


def ramanujan_sum_direct(q: int, x: int) -> complex:
    """Oracle: the defining complex sum over units mod q."""
    total = 0.0 + 0.0j
    for r in range(q):
        if math.gcd(r, q) == 1:
            total += cmath.exp(2j * math.pi * ((r * x) % q) / q)
    return total


def legendre_symbol(a: int, p: int) -> int:
    if p == 2 or not is_prime(p):
        raise InputError(f"legendre_symbol needs an odd prime, got {p}")
    a %= p
    if a == 0:
        return 0
    t = pow(a, (p - 1) // 2, p)
    return 1 if t == 1 else -1


def jacobi_symbol(a: int, n: int) -> int:
    """(a/n) for odd n >= 1, by quadratic reciprocity."""
    if n < 1 or n % 2 == 0:
        raise InputError(f"jacobi_symbol needs odd n >= 1, got {n}")
    a %= n
    result = 1
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def kronecker_symbol(a: int, n: int) -> int:
    """Kronecker extension of the Jacobi symbol to all n != 0."""
    if n == 0:
        raise InputError("kronecker_symbol undefined at n = 0")
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 and a % 8 in (3, 5):
            result = -result
    return result * jacobi_symbol(a, n)


def mod_inverse(a: int, m: int) -> int:
    return pow(a, -1, m)


def unit_phase(num: int, den: int) -> complex:
    """e(num/den) with the argument reduced mod den before the exp call."""
    return cmath.exp(2j * math.pi * (num % den) / den)


@lru_cache(maxsize=4096)
def _units(q: int) -> tuple:
    return tuple(r for r in range(1, q + 1) if math.gcd(r, q) == 1) if q > 1 else (0,)


def kloosterman_sum(a: int, b: int, q: int) -> complex:
    """Sum over units r mod q of e_q(a r + b rbar)."""
    if q < 1:
        raise InputError(f"kloosterman_sum needs q >= 1, got {q}")
    if q == 1:
        return 1.0 + 0.0j
    total = 0.0 + 0.0j
    for r in _units(q):
        rbar = pow(r, -1, q)
        total += unit_phase(a * r + b * rbar, q)
    return total


def restricted_kloosterman_sum(J: int, K: int, L: int, q: int, q0: int, r0: int) -> complex:
    """Sum over units r mod q with r = r0 (mod q0) of e_q(J r + K rbar + L).

    Empty constraint sets (gcd(r0, q0) > 1) give 0.
    """
    if q < 1:
        raise InputError(f"restricted_kloosterman_sum needs q >= 1, got {q}")
    if q0 < 1 or q % q0 != 0:
        raise InputError(f"q0 = {q0} does not divide q = {q}")
    total = 0.0 + 0.0j
    if q == 1:
        return unit_phase(L, 1)
    for r in _units(q):
        if (r - r0) % q0 != 0:
            continue
        rbar = pow(r, -1, q)
        total += unit_phase(J * r + K * rbar + L, q)
    return total

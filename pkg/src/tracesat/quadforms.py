"""Class numbers of integral binary quadratic forms with positive nonsquare
discriminant, including imprimitive forms, and the conjugacy-class count
H(t) = h(t^2 - 4) with its Prime Geodesic Theorem trend.

h_primitive(D) is the number of cycles of reduced indefinite forms under
the Gauss rho operation; imprimitive classes are added by summing over
square divisors of D.  All predicates are integer-exact: for nonsquare D
and s = isqrt(D), "b < sqrt(D)" is "b <= s" and so on.
"""

import math
from dataclasses import dataclass

import numpy as np

from .arith import divisors, prime_factorization
from .errors import BudgetExceededError, InputError
from .sl2 import GroupElement

RHO_STEP_CAP = 10_000


def _check_discriminant(D: int) -> int:
    if D <= 0 or D % 4 not in (0, 1):
        raise InputError(f"invalid discriminant {D}")
    s = math.isqrt(D)
    if s * s == D:
        raise InputError(f"discriminant {D} is a perfect square")
    return s


@dataclass(frozen=True)
class QuadraticForm:
    """a*x^2 + b*x*y + c*y^2 with positive nonsquare discriminant."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        _check_discriminant(self.discriminant)

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_reduced(self) -> bool:
        return is_reduced(self.a, self.b, self.c)

    def rho(self) -> "QuadraticForm":
        return QuadraticForm(*rho_step(self.a, self.b, self.c))


def is_reduced(a: int, b: int, c: int) -> bool:
    """0 < b < sqrt(D) and sqrt(D) - b < 2|a| < sqrt(D) + b, integer-exactly."""
    D = b * b - 4 * a * c
    if D <= 0:
        return False
    s = math.isqrt(D)
    if s * s == D:
        return False
    if not 1 <= b <= s:
        return False
    ta = 2 * abs(a)
    return s - b + 1 <= ta <= s + b


def rho_step(a: int, b: int, c: int):
    """One Gauss reduction step (a, b, c) -> (c, r, (r^2 - D)/(4c)) with
    r = -b mod 2|c| chosen in the reduction window."""
    D = b * b - 4 * a * c
    s = math.isqrt(D)
    tc = 2 * abs(c)
    if abs(c) <= s:
        # window sqrt(D) - 2|c| < r < sqrt(D)
        r = s - ((s + b) % tc)
    else:
        # window -|c| < r <= |c|
        r = (-b) % tc
        if r > abs(c):
            r -= tc
    return c, r, (r * r - D) // (4 * c)


def reduce_form(a: int, b: int, c: int):
    """Iterate rho until the form is reduced (cap guards termination)."""
    for _ in range(RHO_STEP_CAP):
        if is_reduced(a, b, c):
            return a, b, c
        a, b, c = rho_step(a, b, c)
    raise BudgetExceededError(f"reduction of ({a},{b},{c}) exceeded {RHO_STEP_CAP} steps")


def reduced_forms(D: int) -> list:
    """All reduced forms of discriminant D, sorted."""
    s = _check_discriminant(D)
    out = []
    for b in range(1 if D % 2 else 2, s + 1, 2):
        if (D - b * b) % 4:
            continue
        n = (D - b * b) // 4  # = -a*c > 0
        lo = (s - b) // 2 + 1  # smallest |a| with 2|a| >= s - b + 1
        hi = (s + b) // 2  # largest |a| with 2|a| <= s + b
        for a in range(lo, hi + 1):
            if n % a == 0:
                c = -(n // a)
                out.append((a, b, c))
                out.append((-a, b, -c))
    out.sort()
    return out


def _cycle_count(forms) -> int:
    remaining = set(forms)
    cycles = 0
    while remaining:
        start = remaining.pop()
        cycles += 1
        cur = rho_step(*start)
        steps = 0
        while cur != start:
            if cur in remaining:
                remaining.remove(cur)
            cur = rho_step(*cur)
            steps += 1
            if steps > RHO_STEP_CAP:
                raise BudgetExceededError("rho cycle walk exceeded step cap")
    return cycles


def primitive_class_number(D: int) -> int:
    """Cycles of reduced primitive forms of discriminant D."""
    forms = [f for f in reduced_forms(D) if math.gcd(math.gcd(f[0], f[1]), f[2]) == 1]
    return _cycle_count(forms)


def square_divisors(D: int) -> list:
    """All f >= 1 with f^2 | D, from the factorization of D."""
    F = 1
    for p, e in prime_factorization(D):
        F *= p ** (e // 2)
    return divisors(F)


def class_number(D: int) -> int:
    """SL2(Z)-classes of forms of discriminant D, imprimitive included:
    sum of primitive class numbers h(D/f^2) over f with f^2 | D and
    D/f^2 = 0, 1 (mod 4)."""
    _check_discriminant(D)
    total = 0
    for f in square_divisors(D):
        if (D // (f * f)) % 4 in (0, 1):
            total += primitive_class_number(D // (f * f))
    return total


def conjugacy_count(t: int) -> int:
    """H(t) = h(t^2 - 4) for |t| > 2."""
    if abs(t) <= 2:
        raise InputError(f"|t| must exceed 2, got {t}")
    return class_number(t * t - 4)


# ---------------------------------------------------------------------------
# Independent verification through matrix conjugacy
# ---------------------------------------------------------------------------


@dataclass
class ConjugacyVerification:
    classes_found: int
    complete: bool


def _trace_t_elements(t: int, ball_bound: int) -> list:
    """SL2(Z) elements with trace t and frobenius_norm_sq <= ball_bound^2,
    by direct scan over (a, bc-factorizations)."""
    out = []
    nb2 = ball_bound * ball_bound
    amax = math.isqrt(nb2)
    for a in range(-amax, amax + 1):
        d = t - a
        m = a * d - 1  # = b*c
        if a * a + d * d > nb2:
            continue
        if m == 0:
            out.append(GroupElement(a, 0, 0, d))
            continue
        for b in divisors(abs(m)):
            for bb in (b, -b):
                cc = m // bb
                if a * a + d * d + bb * bb + cc * cc <= nb2:
                    out.append(GroupElement(a, bb, cc, d))
    return out


def verify_conjugacy_count(t: int, ball_bound: int, slack: int = 4) -> ConjugacyVerification:
    """Group the trace-t elements of a ball under observed conjugations.

    The union-find runs over the trace-t elements of the slack-enlarged
    ball, with one conjugation move per element and elementary conjugator
    (S, T, T^-1); classes are counted among components meeting the core
    ball.  complete is True when the count matches the class-number route.
    """
    if abs(t) <= 2:
        raise InputError(f"|t| must exceed 2, got {t}")
    core = _trace_t_elements(t, ball_bound)
    pool = _trace_t_elements(t, slack * ball_bound)
    index = {g.entries(): i for i, g in enumerate(pool)}
    parent = list(range(len(pool)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    conjugators = [GroupElement(0, -1, 1, 0), GroupElement(1, 1, 0, 1), GroupElement(1, -1, 0, 1)]
    for g in pool:
        i = index[g.entries()]
        for w in conjugators:
            h = w @ g @ w.inverse()
            j = index.get(h.entries())
            if j is not None:
                union(i, j)
    classes_found = len({find(index[g.entries()]) for g in core})
    return ConjugacyVerification(
        classes_found=classes_found,
        complete=classes_found == conjugacy_count(t),
    )


# ---------------------------------------------------------------------------
# Bulk PGT scan
# ---------------------------------------------------------------------------


def _bulk_reduced_forms(t_values):
    """reduced_forms(t^2-4) for many t at once.

    Outer loop over |a|; for each modulus M = 4a the square roots mod M are
    sorted once, so each (t, a) pair costs a binary search instead of a
    divisor hunt.  Matches reduced_forms exactly (tested against it).
    """
    t_values = sorted(t_values)
    t_arr = np.array(t_values, dtype=np.int64)
    d_arr = t_arr * t_arr - 4
    s_arr = np.array([math.isqrt(int(D)) for D in d_arr], dtype=np.int64)
    forms = {t: [] for t in t_values}
    a_max = int(s_arr.max())
    for a in range(1, a_max + 1):
        M = 4 * a
        x = np.arange(M, dtype=np.int64)
        xx = (x * x) % M
        order = np.argsort(xx, kind="stable")
        xx_sorted = xx[order]
        rem = d_arr % M
        left = np.searchsorted(xx_sorted, rem, side="left")
        right = np.searchsorted(xx_sorted, rem, side="right")
        for i in np.nonzero(right > left)[0]:
            t = int(t_arr[i])
            D = int(d_arr[i])
            s = int(s_arr[i])
            if 2 * a > 2 * s:  # 2a <= s + b <= 2s is impossible
                continue
            lo = max(1, s - 2 * a + 1, 2 * a - s)
            bucket = forms[t]
            for j in range(left[i], right[i]):
                xr = int(order[j])
                b = xr if xr >= lo else xr + M * ((lo - xr + M - 1) // M)
                while b <= s:
                    c = (b * b - D) // (4 * a)
                    bucket.append((a, b, c))
                    bucket.append((-a, b, -c))
                    b += M
    return forms


def _gcd3(f) -> int:
    return math.gcd(math.gcd(f[0], f[1]), f[2])


def pgt_rows(N: int):
    """Rows (t, H(t), running_sum, pgt_prediction) for 2 < t < N."""
    if N < 4:
        raise InputError("N must be at least 4")
    ts = list(range(3, N))
    bulk = _bulk_reduced_forms(ts)
    running = 0
    rows = []
    for t in ts:
        D = t * t - 4
        square_parts = [f for f in square_divisors(D) if (D // (f * f)) % 4 in (0, 1)]
        if square_parts == [1]:
            h = _cycle_count(bulk[t])  # no square divisor: all forms primitive
        else:
            h = 0
            for f in square_parts:
                if f == 1:
                    h += _cycle_count([g for g in bulk[t] if _gcd3(g) == 1])
                else:
                    h += primitive_class_number(D // (f * f))
        running += h
        rows.append((t, h, running, t * t / (2.0 * math.log(t))))
    return rows


def pgt_ratio(N: int) -> float:
    """sum_{2<t<N} H(t) * (2 log N) / N^2."""
    rows = pgt_rows(N)
    total = rows[-1][2]
    return total * 2.0 * math.log(N) / (N * N)

"""Circle-method exponential sums: the normalized two-variable sums over
residues, their closed-form factorization, paired unit sums, and the
auxiliary integer quantities used in the minor-arc counting.

Phases are assembled as exact residues (one cmath.exp per term).  Inverse
lifts (rbar, Ebar) are chosen at the stated moduli; well-definedness under
changing the lift is asserted in tests rather than assumed.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .arith import euler_phi, unit_phase
from .errors import BudgetExceededError, InputError, NotApplicableError
from .sl2 import GroupElement, LinearForm, shifted_form

DIRECT_Q_CAP = 10_000


@dataclass(frozen=True)
class ExpSumParams:
    q: int
    r: int
    k: int
    ell: int
    gamma: GroupElement
    L: LinearForm
    P: int

    def __post_init__(self):
        if self.q < 1:
            raise InputError(f"modulus must be >= 1, got {self.q}")
        if math.gcd(self.r, self.q) != 1:
            raise InputError(f"r = {self.r} is not a unit mod {self.q}")


def expsum_direct(params: ExpSumParams, slow: bool = False) -> complex:
    """(1/q^2) * sum over x, y mod q of e_q(r*f(x,y) + k*x + ell*y).

    Default path separates the y sum (a full geometric sum that vanishes
    unless a congruence in x holds), costing O(q); slow=True runs the
    literal O(q^2) reference loop.
    """
    q, r, k, ell = params.q, params.r, params.k, params.ell
    if q > DIRECT_Q_CAP:
        raise BudgetExceededError(f"q = {q} exceeds direct-evaluation cap {DIRECT_Q_CAP}")
    f = shifted_form(params.L, params.P, params.gamma)
    if slow:
        total = 0j
        for x in range(q):
            for y in range(q):
                total += unit_phase(r * f.evaluate(x, y) + k * x + ell * y, q)
        return total / (q * q)
    # y-sum vanishes unless r*(y_coeff + xy_coeff*x) + ell = 0 (mod q).
    base = (r * f.y_coeff + ell) % q
    step = (r * f.xy_coeff) % q
    total = 0j
    for x in range(q):
        if (base + step * x) % q == 0:
            total += unit_phase(r * (f.const_term + f.x_coeff * x) + k * x, q)
    return total / q


def expsum_closed_form(params: ExpSumParams) -> complex:
    """Closed form: gcd prefactor, two congruence indicators mod q1, and an
    explicit phase with denominator q*q1.

    q1 = (B*c*P^2, q), q = q1*q2, B*c*P^2 = q1*E with E*Ebar = 1 (mod q2).
    Needs B*c != 0; otherwise the separated direct path must be used.
    """
    q, r, k, ell = params.q, params.r, params.k, params.ell
    L, P, g = params.L, params.P, params.gamma
    A, B, C, D = L.A, L.B, L.C, L.D
    a, b, c, d = g.a, g.b, g.c, g.d
    if B * c == 0:
        raise NotApplicableError("closed form needs B * c != 0")
    bcp2 = B * c * P * P
    q1 = math.gcd(abs(bcp2), q)
    q2 = q // q1
    E = bcp2 // q1
    ebar = pow(E % q2, -1, q2) if q2 > 1 else 0
    u = P * r * (B * a + D * c) + ell
    v = P * r * (A * c + B * d) + k
    if u % q1 or v % q1:
        return 0j
    rbar = pow(r, -1, q * q1) if q * q1 > 1 else 0
    phase_num = q1 * r * L.evaluate(g) - rbar * ebar * u * v
    return (q1 / q) * unit_phase(phase_num, q * q1)


@dataclass(frozen=True)
class PairSumAux:
    """Assembled quantities for a paired unit sum: gcd splits for both
    matrices and the phase integers J, K, L_term of the folded sum."""

    q: int
    q1: int
    q2: int
    E: int
    Ebar: int
    q1p: int
    q2p: int
    Ep: int
    Epbar: int
    J: int
    K: int
    L_term: int


def pair_sum_aux(q, k, ell, gamma, kp, ellp, gammap, L, P) -> PairSumAux:
    A, B, C, D = L.A, L.B, L.C, L.D
    a, b, c, d = gamma.a, gamma.b, gamma.c, gamma.d
    ap, bp, cp, dp = gammap.a, gammap.b, gammap.c, gammap.d
    if B * c == 0 or B * cp == 0:
        raise NotApplicableError("pair sum closed form needs B*c and B*c' nonzero")
    bcp2 = B * c * P * P
    bcp2p = B * cp * P * P
    q1 = math.gcd(abs(bcp2), q)
    q2 = q // q1
    E = bcp2 // q1
    ebar = pow(E % q2, -1, q2) if q2 > 1 else 0
    q1p = math.gcd(abs(bcp2p), q)
    q2p = q // q1p
    Ep = bcp2p // q1p
    epbar = pow(Ep % q2p, -1, q2p) if q2p > 1 else 0
    J = (
        q1 * q1p * (A * a + B * b + C * c + D * d)
        - q1 * q1p * (A * ap + B * bp + C * cp + D * dp)
        - q1p * ebar * (q1 * E * a * A + a * B * B * d * P * P + A * c * c * D * P * P + q1 * E * d * D)
        + q1 * epbar * (q1p * Ep * ap * A + ap * B * B * dp * P * P + A * cp * cp * D * P * P + q1p * Ep * dp * D)
    )
    K = -q1p * ebar * ell * k + q1 * epbar * ellp * kp
    L_term = (
        -q1p * ebar * P * (A * c * ell + B * a * k + B * d * ell + D * c * k)
        + q1 * epbar * P * (A * cp * ellp + B * ap * kp + B * dp * ellp + D * cp * kp)
    )
    return PairSumAux(q, q1, q2, E, ebar, q1p, q2p, Ep, epbar, J, K, L_term)


def pair_r_sum_direct(q, k, ell, gamma, kp, ellp, gammap, L, P) -> complex:
    """Route (i): literal sum over units r of S_q(r,k,ell;g) * conj(S_q(r,k',ell';g'))."""
    total = 0j
    for r in range(1, q + 1):
        if math.gcd(r, q) != 1:
            continue
        s1 = expsum_direct(ExpSumParams(q, r % q if q > 1 else 0, k, ell, gamma, L, P))
        s2 = expsum_direct(ExpSumParams(q, r % q if q > 1 else 0, kp, ellp, gammap, L, P))
        total += s1 * s2.conjugate()
    return total


def pair_r_sum_formula(q, k, ell, gamma, kp, ellp, gammap, L, P) -> complex:
    """Route (ii): the folded sum over units mod q*q1*q1' with the four
    congruence indicators and phase e(r*J + rbar*K + L_term)."""
    aux = pair_sum_aux(q, k, ell, gamma, kp, ellp, gammap, L, P)
    A, B, C, D = L.A, L.B, L.C, L.D
    a, c, d = gamma.a, gamma.c, gamma.d
    ap, cp, dp = gammap.a, gammap.c, gammap.d
    Q = q * aux.q1 * aux.q1p
    prefactor = (aux.q1 / q) * (aux.q1p / q) * (euler_phi(q) / euler_phi(Q))
    total = 0j
    for r in range(1, Q + 1):
        if math.gcd(r, Q) != 1:
            continue
        if (P * r * (B * a + D * c) + ell) % aux.q1:
            continue
        if (P * r * (A * c + B * d) + k) % aux.q1:
            continue
        if (P * r * (B * ap + D * cp) + ellp) % aux.q1p:
            continue
        if (P * r * (A * cp + B * dp) + kp) % aux.q1p:
            continue
        rbar = pow(r, -1, Q)
        total += unit_phase(r * aux.J + rbar * aux.K + aux.L_term, Q)
    return prefactor * total


def pair_r_sum(q, k, ell, gamma, kp, ellp, gammap, L, P):
    """Both routes, for comparison: (direct, formula)."""
    return (
        pair_r_sum_direct(q, k, ell, gamma, kp, ellp, gammap, L, P),
        pair_r_sum_formula(q, k, ell, gamma, kp, ellp, gammap, L, P),
    )


@dataclass(frozen=True)
class JModCheck:
    modulus: int
    J_mod: int
    predicted: int

    @property
    def equal(self) -> bool:
        return self.J_mod == self.predicted


def j_mod_check(gamma, gammap, L, P, q, k=0, ell=0, kp=0, ellp=0) -> JModCheck:
    """J mod (q2, q2') against Ebar*Ebar'*B*P^4*(c-c')*(B^2 - Delta*c*c')."""
    aux = pair_sum_aux(q, k, ell, gamma, kp, ellp, gammap, L, P)
    g = math.gcd(aux.q2, aux.q2p)
    B = L.B
    predicted = aux.Ebar * aux.Epbar * B * P**4 * (gamma.c - gammap.c) * (B * B - L.delta * gamma.c * gammap.c)
    return JModCheck(modulus=g, J_mod=aux.J % g, predicted=predicted % g)


def z_quantity(k, ell, kp, ellp, gamma, gammap, L, P) -> int:
    """Z = (A c l + B a k + B d l + D c k) - (A c l' + B a' k' + B d' l' + D c k'),
    with the shared c entry taken from the first matrix (the two matrices
    share it in the intended use)."""
    A, B, D = L.A, L.B, L.D
    c = gamma.c
    first = A * c * ell + B * gamma.a * k + B * gamma.d * ell + D * c * k
    second = A * c * ellp + B * gammap.a * kp + B * gammap.d * ellp + D * c * kp
    return first - second


def count_nm(m, k, ell, kp, ellp, gamma, gammap, L, P) -> int:
    """Number of units r mod m satisfying all four congruences
    -l = P r (B a + D c), -k = P r (A c + B d), and primed versions."""
    if m < 1:
        raise InputError(f"m must be >= 1, got {m}")
    if m == 1:
        return 1
    A, B, D = L.A, L.B, L.D
    a, c, d = gamma.a, gamma.c, gamma.d
    ap, dp = gammap.a, gammap.d
    count = 0
    for r in range(1, m + 1):
        if math.gcd(r, m) != 1:
            continue
        if (P * r * (B * a + D * c) + ell) % m:
            continue
        if (P * r * (A * c + B * d) + k) % m:
            continue
        if (P * r * (B * ap + D * c) + ellp) % m:
            continue
        if (P * r * (A * c + B * dp) + kp) % m:
            continue
        count += 1
    return count


def count_solutions_z1(c, Z1, k, ell, kp, ellp, a, d, L, P, T) -> int:
    """Matrices (a' b'; c d') with |a'|, |b'|, |d'| in [T/2, T], integer b',
    and Z = 0 (mod Z1), counted exactly.

    The scan runs over residues a' mod Z1 solving the folded quadratic
    congruence, lifted to the range; each candidate is checked against the
    literal Z.  Needs Z1 | c and k*ell = k'*ell'.
    """
    if c == 0 or Z1 < 1 or c % Z1 != 0:
        raise InputError("need Z1 >= 1 dividing a nonzero c")
    if k * ell != kp * ellp:
        raise InputError("count_solutions_z1 needs k*ell = k'*ell'")
    B = L.B
    roots = [
        a0 for a0 in range(Z1)
        if (B * kp * a0 * a0 - (B * a * k + B * d * ell) * a0 + B * ellp) % Z1 == 0
    ]
    if not roots:
        return 0
    lo, hi = (T + 1) // 2, T
    count = 0
    for a0 in roots:
        for sign in (1, -1):
            # a' = sign*ap with ap in [lo, hi] and a' = a0 (mod Z1)
            res = (sign * a0) % Z1
            first = lo + ((res - lo) % Z1)
            for ap in range(first, hi + 1, Z1):
                count += _count_dprime(sign * ap, c, lo, hi, k, ell, kp, ellp, a, d, L, Z1)
    return count


def _count_dprime(av, c, lo, hi, k, ell, kp, ellp, a, d, L, Z1) -> int:
    """Count d' with a'*d' = 1 (mod c), b' = (a'd'-1)/c and |b'|, |d'| in
    [lo, hi], and the literal Z divisible by Z1."""
    A, B, D = L.A, L.B, L.D
    cabs = abs(c)
    total = 0
    if cabs == 1:
        dcands = [dv for s in (1, -1) for dv in range(s * lo, s * (hi + 1), s)]
    else:
        if math.gcd(av % cabs, cabs) != 1:
            return 0
        d0 = pow(av % cabs, -1, cabs)
        dcands = []
        first = lo + ((d0 - lo) % cabs)
        dcands.extend(range(first, hi + 1, cabs))
        first_neg = -hi + ((d0 + hi) % cabs)
        dcands.extend(dv for dv in range(first_neg, -lo + 1, cabs))
    for dv in dcands:
        if not (lo <= abs(dv) <= hi):
            continue
        num = av * dv - 1
        if num % c:
            continue
        bv = num // c
        if not (lo <= abs(bv) <= hi):
            continue
        z = (A * c * ell + B * a * k + B * d * ell + D * c * k) - (
            A * c * ellp + B * av * kp + B * dv * ellp + D * c * kp
        )
        if z % Z1 == 0:
            total += 1
    return total


def split_q1_q2(q: int, q1: int):
    """(Q1, Q2) with q = Q1*Q2, (Q1, Q2) = 1, Q1 | q1, and every prime of
    Q1 contributing its full power in q; Q2 collects the primes of q2."""
    if q % q1:
        raise InputError(f"q1 = {q1} does not divide q = {q}")
    q2 = q // q1
    Q2 = 1
    rest = q
    for p in _prime_support(q):
        if q2 % p == 0:
            pe = 1
            while rest % p == 0:
                rest //= p
                pe *= p
            Q2 *= pe
    return q // Q2, Q2


def _prime_support(n: int) -> list:
    out = []
    m = n
    f = 2
    while f * f <= m:
        if m % f == 0:
            out.append(f)
            while m % f == 0:
                m //= f
        f += 1
    if m > 1:
        out.append(m)
    return out


def parseval_mass(q: int, r: int, gamma, L, P) -> float:
    """sum over k, ell mod q of |S_q(r,k,ell;gamma)|^2 (equals 1 exactly)."""
    total = 0.0
    for k in range(q):
        for ell in range(q):
            total += abs(expsum_direct(ExpSumParams(q, r, k, ell, gamma, L, P))) ** 2
    return total

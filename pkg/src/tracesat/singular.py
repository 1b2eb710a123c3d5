"""Singular series: exact S_q(n), local factors, the Euler-product value
with a truncation interval, short sums, and dyadic-block averages.

All prime-power values are exact rationals (fractions.Fraction); floats
appear only when a product or mean is finally reported.  Good odd primes
use the closed forms; p = 2 and bad primes always go through the density
route over the actual mod-p^ell image.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arith import legendre_symbol, prime_factorization, primes_up_to, ramanujan_sum, valuation
from .errors import InputError, NoStabilizationError, NotApplicableError, TracesatError
from .groups import (
    ModQGroup,
    SubgroupSpec,
    bad_prime_certificate,
    effective_saturation_level,
    reduce_mod_q,
)
from .sl2 import LinearForm


class DegenerateCharacterError(TracesatError):
    """n^2 - 4*delta is a perfect square: the character is principal-degenerate."""


# ---------------------------------------------------------------------------
# Brute-force values (the oracle side of the module's core guarantee)
# ---------------------------------------------------------------------------


def sq_bruteforce(image: ModQGroup, L: LinearForm, q: int, n: int) -> Fraction:
    """(1/|image|) * sum over the image of c_q(L(g) - n), exactly.

    Counts are aggregated through the exact value histogram, so full
    SL2(Z/q) images need one q^2-cell scan rather than a q^3 element walk.
    """
    if q != image.modulus:
        raise InputError(f"q={q} does not match image modulus {image.modulus}")
    hist = image.value_histogram(L)
    total = 0
    for v in range(q):
        h = int(hist[v])
        if h:
            total += h * ramanujan_sum(q, v - n)
    return Fraction(total, image.size)


def sq_bruteforce_all(image: ModQGroup, L: LinearForm, p: int, ell: int) -> list:
    """S_{p^ell}(n) for every n mod p^ell, from one histogram.

    Uses c_{p^ell}(x) = p^ell*[x=0 mod p^ell] - p^(ell-1)*[x=0 mod p^(ell-1)]
    summed against the histogram.
    """
    q = p**ell
    if q != image.modulus:
        raise InputError(f"image modulus {image.modulus} is not {p}^{ell}")
    hist = image.value_histogram(L)
    coarse = hist.reshape(p, p ** (ell - 1)).sum(axis=0) if ell > 1 else None
    out = []
    for n in range(q):
        top = p**ell * int(hist[n])
        low = p ** (ell - 1) * int(coarse[n % p ** (ell - 1)] if ell > 1 else image.size)
        out.append(Fraction(top - low, image.size))
    return out


def sq_bruteforce_literal(image: ModQGroup, L: LinearForm, q: int, n: int) -> Fraction:
    """Element-by-element reference sum (small explicit images only)."""
    if image.is_full:
        raise InputError("literal sum needs a materialized image")
    total = 0
    for (a, b, c, d) in image.elements:
        total += ramanujan_sum(q, L.A * a + L.B * b + L.C * c + L.D * d - n)
    return Fraction(total, image.size)


# ---------------------------------------------------------------------------
# Closed forms at good odd primes
# ---------------------------------------------------------------------------


def sq_closed_form(L: LinearForm, p: int, ell: int, n: int, good: bool = True) -> Fraction:
    """Exact S_{p^ell}(n) for a good odd prime from the case table.

    Delta = 0 mod p:   ell = 1 gives -1/(p+1) or 1/(p^2-1); ell >= 2 gives 0.
    Delta != 0 mod p:  ell = 1 is (1 + p*chi)/(p^2-1) with chi the Legendre
    symbol of n^2-4*Delta; ell >= 2 is keyed on the parity of ell and on
    v_p(n^2-4*Delta) against ell-1, ell.
    """
    if not good or p == 2:
        raise NotApplicableError("closed forms need a good odd prime; use the density route")
    if ell < 1:
        raise InputError(f"ell must be >= 1, got {ell}")
    delta = L.delta
    if delta % p == 0:
        if ell >= 2:
            return Fraction(0)
        if n % p == 0:
            return Fraction(-1, p + 1)
        return Fraction(1, p * p - 1)
    disc = n * n - 4 * delta
    if ell == 1:
        return Fraction(1 + p * legendre_symbol(disc, p), p * p - 1)
    Lval = math.inf if disc == 0 else valuation(disc, p)
    if Lval <= ell - 2:
        return Fraction(0)
    if ell % 2 == 1:
        if Lval >= ell:
            return Fraction(0)
        # ell odd, Lval = ell - 1
        chi = legendre_symbol(disc // p**Lval, p)
        return Fraction(chi, p ** ((ell - 3) // 2) * (p * p - 1))
    if Lval >= ell:
        return Fraction(1, p ** ((ell - 2) // 2) * (p + 1))
    # ell even, Lval = ell - 1
    return Fraction(-1, p ** ((ell - 2) // 2) * (p * p - 1))


def good_local_factor_exact(L: LinearForm, p: int, n: int) -> Fraction:
    """1 + sum over ell of S_{p^ell}(n) at a good odd prime, exactly.

    The sum is finite: with Delta != 0 mod p only ell <= v_p(n^2-4D) + 1
    contribute, and with n^2 = 4*Delta the surviving even-ell geometric
    tail sums to p/((p+1)(p-1)).
    """
    delta = L.delta
    total = Fraction(1)
    if delta % p == 0:
        return total + sq_closed_form(L, p, 1, n)
    disc = n * n - 4 * delta
    if disc == 0:
        total += sq_closed_form(L, p, 1, n)
        return total + Fraction(p, (p + 1) * (p - 1))
    top = valuation(disc, p) + 1
    for ell in range(1, top + 1):
        total += sq_closed_form(L, p, ell, n)
    return total


# ---------------------------------------------------------------------------
# Density route (p = 2 and bad primes)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _image_at(spec: SubgroupSpec, q: int, budget=None) -> ModQGroup:
    return reduce_mod_q(spec, q, budget=budget)


@lru_cache(maxsize=None)
def _histogram_at(spec: SubgroupSpec, q: int, L: LinearForm, budget=None):
    """(histogram, image size); the array is shared, treat as read-only."""
    image = _image_at(spec, q, budget)
    return image.value_histogram(L), image.size


def density_value(spec: SubgroupSpec, L: LinearForm, p: int, ell: int, n: int, budget=None) -> Fraction:
    """p^ell * (fraction of the mod-p^ell image with L = n), exactly.

    This is the right-hand side of the density identity
    1 + S_p + ... + S_{p^ell} = p^ell * hits / |image|.
    """
    if ell == 0:
        return Fraction(1)
    q = p**ell
    hist, size = _histogram_at(spec, q, L, budget)
    return Fraction(p**ell * int(hist[n % q]), size)


def sq_bad_prime(spec: SubgroupSpec, L: LinearForm, p: int, ell: int, n: int,
                 k_p=None, budget=None) -> Fraction:
    """S_{p^ell}(n) at p = 2 or a bad prime, as a density difference.

    Levels past twice the (form-adjusted) saturation level vanish and are
    returned as exact 0 without computing the image.
    """
    if ell < 1:
        raise InputError(f"ell must be >= 1, got {ell}")
    if k_p is not None and L.B != 0:
        k_eff = max(k_p, valuation(L.B, p) + 1)
        if ell > 2 * k_eff + 2:
            return Fraction(0)
    return density_value(spec, L, p, ell, n, budget) - density_value(spec, L, p, ell - 1, n, budget)


def bad_local_factor_exact(spec: SubgroupSpec, L: LinearForm, p: int, n: int,
                           k_p=None, budget=None, max_ell: int = 12):
    """(factor, values) at p = 2 or a bad prime via stabilized densities.

    The factor is the limiting density p^ell * hits / |image|; it has
    stabilized once two consecutive levels agree past the guard level
    (v_p of the shifted discriminant, when it is nonzero).
    """
    disc = n * n - 4 * L.delta
    guard = 1 if disc == 0 else valuation(disc, p) + 1
    if k_p is not None and L.B != 0:
        guard = max(guard, 2 * max(k_p, valuation(L.B, p) + 1))
    values = []
    prev = Fraction(1)
    streak = 0
    for ell in range(1, max_ell + 1):
        cur = density_value(spec, L, p, ell, n, budget)
        values.append((ell, cur - prev))
        if cur == prev and ell >= guard:
            streak += 1
            if streak >= 2:
                return cur, values
        else:
            streak = 0
        prev = cur
        if cur == 0:
            return Fraction(0), values
    raise NoStabilizationError(f"density at p={p} did not stabilize by ell={max_ell}")


# ---------------------------------------------------------------------------
# Assembled singular series
# ---------------------------------------------------------------------------


@dataclass
class LocalFactorReport:
    p: int
    classification: str  # good_delta_zero | good_delta_nonzero | bad
    values: list  # [(ell, Fraction)]
    factor: Fraction
    L: object = None  # v_p(n^2 - 4 delta) when defined
    route: str = "closed_form"


@dataclass
class SingularSeriesValue:
    n: int
    product_value: float
    interval: tuple
    prime_cap: int
    per_prime: list = field(default_factory=list)
    admissible: bool = True
    metadata: dict = field(default_factory=dict)


# Oscillation constant for the uncertified Delta != 0 tail band, measured by
# the `tracesat calibrate` grid (max |log drift| between cap and 4*cap Euler
# products over n <= 2000, doubled).
TAIL_OSC_CONSTANT = 4.0


def _tail_interval(n: int, L: LinearForm, prime_cap: int) -> tuple:
    """Multiplier band covering primes beyond the cap.

    Delta = 0 factors are 1 + 1/(p^2-1) (or p/(p+1) at p | n), so the band
    is certified.  Delta != 0 keeps a heuristic square-root-cancellation
    band; it is reported, not certified.
    """
    if L.delta == 0:
        hi = math.exp(1.0 / prime_cap)
        r = max(1, int(math.log(max(abs(n), 2)) / math.log(prime_cap)) + 1)
        lo = (1.0 - 1.0 / prime_cap) ** r
        return lo, hi, True
    disc = abs(n * n - 4 * L.delta)
    r_disc = max(1, int(math.log(max(disc, 2)) / math.log(prime_cap)) + 1)
    w = TAIL_OSC_CONSTANT / math.sqrt(prime_cap) + 4.0 * r_disc / math.sqrt(prime_cap)
    return math.exp(-w), math.exp(w), False


def local_factor(spec: SubgroupSpec, L: LinearForm, p: int, n: int,
                 bad_levels=None, budget=None) -> LocalFactorReport:
    """One prime's contribution.  bad_levels maps p -> k_p for certificate
    primes; p = 2 and certificate primes go through the density route."""
    bad_levels = bad_levels or {}
    delta = L.delta
    if p != 2 and p not in bad_levels:
        disc = n * n - 4 * delta
        if delta % p == 0:
            return LocalFactorReport(
                p=p, classification="good_delta_zero",
                values=[(1, sq_closed_form(L, p, 1, n))],
                factor=good_local_factor_exact(L, p, n),
                L=None, route="closed_form",
            )
        vp = None if disc == 0 else valuation(disc, p)
        top = 2 if disc == 0 else vp + 1
        values = [(ell, sq_closed_form(L, p, ell, n)) for ell in range(1, top + 1)]
        return LocalFactorReport(
            p=p, classification="good_delta_nonzero", values=values,
            factor=good_local_factor_exact(L, p, n), L=vp, route="closed_form",
        )
    k_p = bad_levels.get(p)
    factor, values = bad_local_factor_exact(spec, L, p, n, k_p=k_p, budget=budget)
    vp = None
    disc = n * n - 4 * delta
    if disc != 0 and delta % p != 0:
        vp = valuation(disc, p)
    return LocalFactorReport(
        p=p, classification="bad" if p in bad_levels else "good_delta_nonzero" if delta % p else "good_delta_zero",
        values=values, factor=factor, L=vp, route="density",
    )


def singular_series(spec: SubgroupSpec, L: LinearForm, n: int, prime_cap: int,
                    certificate=None, budget=None) -> SingularSeriesValue:
    """Euler product over p <= prime_cap, exact per prime, with a tail band.

    A vanishing bad-prime factor detects inadmissibility and makes the
    whole product exactly 0.
    """
    if prime_cap < 3:
        raise InputError("prime_cap must be >= 3")
    if certificate is None:
        certificate = bad_prime_certificate(spec, budget=budget)
    bad_levels = dict(certificate)
    reports = []
    product = Fraction(1)
    admissible = True
    for p in primes_up_to(prime_cap):
        rep = local_factor(spec, L, p, n, bad_levels=bad_levels, budget=budget)
        reports.append(rep)
        product *= rep.factor
        if rep.factor == 0 and rep.classification == "bad":
            admissible = False
    value = float(product)
    lo_mult, hi_mult, certified = _tail_interval(n, L, prime_cap)
    if product == 0:
        interval = (0.0, 0.0)
    else:
        bounds = sorted((value * lo_mult, value * hi_mult))
        interval = (bounds[0], bounds[1])
    meta = {
        "tail_certified": certified,
        "tail_osc_constant": None if certified else TAIL_OSC_CONSTANT,
        "bad_primes": sorted(bad_levels),
        "spectral_gap_theta0": None,
        "eta0": None,
        "growth_constant_C": None,
    }
    return SingularSeriesValue(
        n=n, product_value=value, interval=interval, prime_cap=prime_cap,
        per_prime=reports, admissible=admissible, metadata=meta,
    )


def _prime_power_value(spec: SubgroupSpec, L: LinearForm, p: int, e: int, n: int,
                       bad_levels, budget=None) -> Fraction:
    if p == 2 or p in bad_levels:
        return sq_bad_prime(spec, L, p, e, n, k_p=bad_levels.get(p), budget=budget)
    return sq_closed_form(L, p, e, n)


def sq_value(spec: SubgroupSpec, L: LinearForm, q: int, n: int,
             certificate=None, budget=None) -> Fraction:
    """S_q(n) assembled multiplicatively from prime-power values."""
    if q < 1:
        raise InputError(f"q must be >= 1, got {q}")
    if certificate is None:
        certificate = bad_prime_certificate(spec, budget=budget)
    bad_levels = dict(certificate)
    out = Fraction(1)
    for p, e in prime_factorization(q):
        out *= _prime_power_value(spec, L, p, e, n, bad_levels, budget)
        if out == 0:
            return out
    return out


def short_sum(spec: SubgroupSpec, L: LinearForm, n: int, Q0: int,
              certificate=None, budget=None) -> float:
    """sum_{q <= Q0} S_q(n), each S_q by multiplicativity."""
    if Q0 < 1:
        raise InputError(f"Q0 must be >= 1, got {Q0}")
    if certificate is None:
        certificate = bad_prime_certificate(spec, budget=budget)
    bad_levels = dict(certificate)
    cache = {}
    total = Fraction(0)
    for q in range(1, Q0 + 1):
        term = Fraction(1)
        for p, e in prime_factorization(q):
            if (p, e) not in cache:
                cache[(p, e)] = _prime_power_value(spec, L, p, e, n, bad_levels, budget)
            term *= cache[(p, e)]
            if term == 0:
                break
        total += term
    return float(total)


def average_block_l2(spec: SubgroupSpec, L: LinearForm, N: int, H: int,
                     certificate=None, budget=None) -> float:
    """(1/N) * sum_{n <= N} |sum_{H <= q < 2H} S_q(n)|^2."""
    if N < 1 or H < 1:
        raise InputError("N and H must be >= 1")
    if certificate is None:
        certificate = bad_prime_certificate(spec, budget=budget)
    bad_levels = dict(certificate)
    ns = np.arange(1, N + 1)
    # Per prime power p^e <= 2H, the value vector over n mod p^e.
    ppow_vecs = {}
    for q in range(H, 2 * H):
        for p, e in prime_factorization(q):
            pe = p**e
            if (p, e) not in ppow_vecs:
                vec = np.array(
                    [float(_prime_power_value(spec, L, p, e, m, bad_levels, budget)) for m in range(pe)]
                )
                ppow_vecs[(p, e)] = vec
    block = np.zeros(N, dtype=float)
    for q in range(H, 2 * H):
        vals = np.ones(N, dtype=float)
        for p, e in prime_factorization(q):
            vec = ppow_vecs[(p, e)]
            vals = vals * vec[ns % (p**e)]
        block += vals
    return float(np.mean(block * block))


def l_one_chi(n: int, delta: int, cap: int):
    """Truncated Euler product for L(1, chi_n) with a heuristic interval.

    Returns (value, (lo, hi)).  The character is the Kronecker symbol of
    n^2 - 4*delta; a perfect-square discriminant is degenerate.
    """
    from .arith import kronecker_symbol

    if cap < 3:
        raise InputError("cap must be >= 3")
    disc = n * n - 4 * delta
    if disc >= 0 and math.isqrt(abs(disc)) ** 2 == abs(disc):
        raise DegenerateCharacterError(f"n^2-4*delta = {disc} is a perfect square")
    value = 1.0
    for p in primes_up_to(cap):
        chi = kronecker_symbol(disc, p)
        if chi:
            value *= 1.0 / (1.0 - chi / p)
    width = 2.0 / cap
    return value, (value * (1.0 - width), value * (1.0 + width))


def character_sum_reference(disc: int, terms: int) -> float:
    """Independent oracle: partial sum of sum_m chi(m)/m for the Kronecker
    character of disc (converges for nonsquare disc)."""
    from .arith import kronecker_symbol

    period = 4 * abs(disc)
    pattern = np.zeros(period)
    for m in range(1, period):
        pattern[m] = kronecker_symbol(disc, m)
    m = np.arange(1, terms + 1)
    chi = pattern[m % period]
    partial = np.cumsum(chi / m)
    # Average the last full period to damp the oscillating boundary term.
    return float(np.mean(partial[-period:]))

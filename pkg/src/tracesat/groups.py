"""Finitely generated subgroups of SL2(Z): ball enumeration, ensembles,
mod-q reductions, saturation levels, admissibility.

Ball enumeration is breadth-first closure over the generators and their
inverses.  Word norms are not monotone, so the frontier is allowed to grow
past the requested bound by a slack factor before children are discarded;
completeness under this pruning is oracle-tested at small bounds.
"""

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from typing import Optional

from .arith import is_prime, prime_factorization, valuation
from .errors import (
    BudgetExceededError,
    InputError,
    NoStabilizationError,
    check_budget,
)
from .sl2 import IDENTITY, GroupElement, LinearForm

BFS_SLACK = 4


@dataclass(frozen=True)
class SubgroupSpec:
    """Generators plus the designated parabolic step P with (1 P; 0 1) in
    the group.  P is declared; verify_parabolic does a bounded word search
    when the declaration is not taken on trust."""

    generators: tuple
    parabolic_step: int
    trusted_parabolic: bool = True

    def __post_init__(self):
        if not self.generators:
            raise InputError("generator list must be nonempty")
        if self.parabolic_step == 0:
            raise InputError("parabolic step must be a positive integer")

    def generator_list(self) -> list:
        gens = []
        for g in self.generators:
            if g not in gens:
                gens.append(g)
            gi = g.inverse()
            if gi not in gens:
                gens.append(gi)
        return gens

    def verify_parabolic(self, depth: int = 12) -> bool:
        """Word search for (1 P; 0 1) up to the given word length."""
        target = GroupElement.parabolic(self.parabolic_step)
        gens = self.generator_list()
        seen = {IDENTITY}
        frontier = [IDENTITY]
        for _ in range(depth):
            nxt = []
            for w in frontier:
                for g in gens:
                    wg = w @ g
                    if wg == target:
                        return True
                    if wg not in seen and wg.frobenius_norm_sq() <= 4 * target.frobenius_norm_sq() + 64:
                        seen.add(wg)
                        nxt.append(wg)
            frontier = nxt
        return False

    @staticmethod
    def from_text(text: str) -> "SubgroupSpec":
        """Spec file format: header line "P <int>", then one generator
        "a b c d" per line.  Blank lines and #-comments are skipped."""
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines or not lines[0].startswith("P"):
            raise InputError("spec file must start with a 'P <int>' header line")
        head = lines[0].split()
        if len(head) != 2:
            raise InputError(f"bad header line {lines[0]!r}")
        try:
            step = int(head[1])
        except ValueError as exc:
            raise InputError(f"bad parabolic step in {lines[0]!r}") from exc
        gens = tuple(GroupElement.from_text(ln) for ln in lines[1:])
        if not gens:
            raise InputError("spec file has no generators")
        return SubgroupSpec(gens, step)

    @staticmethod
    def from_file(path) -> "SubgroupSpec":
        try:
            with open(path) as fh:
                return SubgroupSpec.from_text(fh.read())
        except OSError as exc:
            raise InputError(f"cannot read spec file {path}: {exc}") from exc


def sl2z_spec() -> SubgroupSpec:
    """The full modular group, generated by S and T."""
    return SubgroupSpec((GroupElement(0, -1, 1, 0), GroupElement(1, 1, 0, 1)), 1)


def lubotzky_spec() -> SubgroupSpec:
    """The Lubotzky 1-2-3 group, generated by (1 3; 0 1) and (1 0; 3 1)."""
    return SubgroupSpec((GroupElement(1, 3, 0, 1), GroupElement(1, 0, 3, 1)), 3)


def congruence_like_spec(q: int) -> SubgroupSpec:
    """The thin group generated by (1 q; 0 1) and (1 0; q 1)."""
    return SubgroupSpec((GroupElement(1, q, 0, 1), GroupElement(1, 0, q, 1)), q)


def hecke_like_spec(m: int, extra_parabolic=None) -> SubgroupSpec:
    """S and its two conjugates by (1 +-m; 0 1); optionally adjoin a large
    translation (1 P; 0 1) to kill congruence obstructions."""
    s = GroupElement(0, -1, 1, 0)
    n = GroupElement.parabolic(m)
    ni = GroupElement.parabolic(-m)
    gens = [s, n @ s @ ni, ni @ s @ n]
    step = extra_parabolic if extra_parabolic else 1
    if extra_parabolic:
        gens.append(GroupElement.parabolic(extra_parabolic))
    return SubgroupSpec(tuple(gens), step, trusted_parabolic=extra_parabolic is not None)


# ---------------------------------------------------------------------------
# Ball enumeration (vectorized BFS with pruning slack)
# ---------------------------------------------------------------------------

_PACK_BITS = 16
_PACK_OFFSET = 1 << (_PACK_BITS - 1)
_PACK_LIMIT = _PACK_OFFSET - 1


def _pack(rows: np.ndarray) -> np.ndarray:
    key = np.zeros(len(rows), dtype=np.int64)
    for j in range(4):
        key = (key << _PACK_BITS) | (rows[:, j].astype(np.int64) + _PACK_OFFSET)
    return key


def _unpack(keys: np.ndarray) -> np.ndarray:
    out = np.empty((len(keys), 4), dtype=np.int64)
    k = keys.copy()
    for j in range(3, -1, -1):
        out[:, j] = (k & ((1 << _PACK_BITS) - 1)) - _PACK_OFFSET
        k >>= _PACK_BITS
    return out


@lru_cache(maxsize=32)
def _ball_rows_cached(spec: SubgroupSpec, norm_bound: int, budget, slack: int):
    """All elements with frobenius_norm_sq <= norm_bound**2, as an array of
    rows (a, b, c, d) in lexicographic order.  Cached per (spec, bound)."""
    if norm_bound < 2:
        raise InputError(f"norm bound must be >= 2, got {norm_bound}")
    gens = spec.generator_list()
    max_gen_norm = max(math.isqrt(g.frobenius_norm_sq()) + 1 for g in gens)
    explore_norm = slack * norm_bound * max_gen_norm
    if explore_norm > _PACK_LIMIT:
        raise BudgetExceededError(
            f"explore norm {explore_norm} exceeds packed-entry limit {_PACK_LIMIT}"
        )
    explore_sq = explore_norm * explore_norm
    gen_mats = np.array([g.entries() for g in gens], dtype=np.int64)

    frontier = np.array([IDENTITY.entries()], dtype=np.int64)
    seen = set(_pack(frontier).tolist())
    while len(frontier):
        children = []
        fa, fb, fc, fd = (frontier[:, j] for j in range(4))
        for ga, gb, gc, gd in gen_mats:
            child = np.empty((len(frontier), 4), dtype=np.int64)
            child[:, 0] = fa * ga + fb * gc
            child[:, 1] = fa * gb + fb * gd
            child[:, 2] = fc * ga + fd * gc
            child[:, 3] = fc * gb + fd * gd
            norms = (child * child).sum(axis=1)
            children.append(child[norms <= explore_sq])
        cand = np.concatenate(children)
        if not len(cand):
            break
        fresh = set(_pack(cand).tolist()) - seen
        if not fresh:
            break
        seen |= fresh
        check_budget(len(seen), budget, "enumerate_ball")
        frontier = _unpack(np.fromiter(fresh, dtype=np.int64, count=len(fresh)))
    rows = _unpack(np.fromiter(seen, dtype=np.int64, count=len(seen)))
    norms = (rows * rows).sum(axis=1)
    rows = rows[norms <= norm_bound * norm_bound]
    order = np.lexsort((rows[:, 3], rows[:, 2], rows[:, 1], rows[:, 0]))
    rows = rows[order]
    rows.setflags(write=False)
    return rows


def _ball_rows(spec: SubgroupSpec, norm_bound: int, budget=None, slack: int = BFS_SLACK) -> np.ndarray:
    return _ball_rows_cached(spec, norm_bound, budget, slack)


def enumerate_ball(spec: SubgroupSpec, norm_bound: int, budget=None, slack: int = BFS_SLACK) -> list:
    rows = _ball_rows(spec, norm_bound, budget=budget, slack=slack)
    return [GroupElement(*map(int, r)) for r in rows]


def sl2z_ball_oracle(norm_bound: int) -> list:
    """Direct entry-range scan of all integer matrices with det 1 and
    frobenius_norm_sq <= norm_bound**2 (oracle for SL2(Z) enumeration)."""
    out = []
    nb2 = norm_bound * norm_bound
    r = norm_bound
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            ab = a * a + b * b
            if ab > nb2:
                continue
            for c in range(-r, r + 1):
                abc = ab + c * c
                if abc > nb2:
                    continue
                for d in range(-r, r + 1):
                    if a * d - b * c == 1 and abc + d * d <= nb2:
                        out.append(GroupElement(a, b, c, d))
    out.sort()
    return out


def value_set(spec: SubgroupSpec, L: LinearForm, norm_bound: int, budget=None) -> list:
    """Sorted distinct values of L on the ball."""
    rows = _ball_rows(spec, norm_bound, budget=budget)
    vals = L.A * rows[:, 0] + L.B * rows[:, 1] + L.C * rows[:, 2] + L.D * rows[:, 3]
    return sorted(int(v) for v in np.unique(vals))


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


@dataclass
class Ensemble:
    """Multiset of products g1*g2 from two dyadic norm windows, with every
    entry of the product exceeding T/100 (T = T1*T2)."""

    elements: Counter
    T1: int
    T2: int

    @property
    def T(self) -> int:
        return self.T1 * self.T2

    def total(self) -> int:
        return sum(self.elements.values())

    def support(self) -> int:
        return len(self.elements)


def _window_rows(spec: SubgroupSpec, bound: int, budget) -> np.ndarray:
    rows = _ball_rows(spec, bound, budget=budget)
    norms = (rows * rows).sum(axis=1)
    lo = bound * bound / 4.0
    return rows[(norms >= lo) & (norms < bound * bound)]


def build_ensemble(spec: SubgroupSpec, T1: int, T2: int, budget=None) -> Ensemble:
    if T1 < 2 or T2 < 2:
        raise InputError("window bounds must be >= 2")
    rows1 = _window_rows(spec, T1, budget)
    rows2 = _window_rows(spec, T2, budget)
    entry_floor = (T1 * T2) / 100.0
    counts = Counter()
    total = 0
    for a, b, c, d in rows1:
        prod = np.empty((len(rows2), 4), dtype=np.int64)
        prod[:, 0] = a * rows2[:, 0] + b * rows2[:, 2]
        prod[:, 1] = a * rows2[:, 1] + b * rows2[:, 3]
        prod[:, 2] = c * rows2[:, 0] + d * rows2[:, 2]
        prod[:, 3] = c * rows2[:, 1] + d * rows2[:, 3]
        keep = prod[(prod > entry_floor).all(axis=1)]
        total += len(keep)
        check_budget(total, budget, "build_ensemble")
        for row in map(tuple, keep.tolist()):
            counts[row] += 1
    return Ensemble(elements=counts, T1=T1, T2=T2)


def residue_progression_count(ensemble: Ensemble, q: int, r: int) -> int:
    """Multiplicity-weighted count of ensemble elements with c = r (mod q)."""
    if q < 1:
        raise InputError(f"modulus must be >= 1, got {q}")
    return sum(m for (a, b, c, d), m in ensemble.elements.items() if (c - r) % q == 0)


# ---------------------------------------------------------------------------
# Mod-q reductions
# ---------------------------------------------------------------------------


def sl2_group_order(q: int) -> int:
    """|SL2(Z/q)| = q^3 * prod_{p|q} (1 - p^-2)."""
    order = q**3
    for p, _ in prime_factorization(q):
        order = order // (p * p) * (p * p - 1)
    return order


@dataclass
class ModQGroup:
    """Image of the group in SL2(Z/q).  For images certified to be all of
    SL2(Z/q) the element set is not materialized (elements is None)."""

    modulus: int
    elements: Optional[frozenset]
    generator_images: tuple
    size: int

    @property
    def is_full(self) -> bool:
        return self.elements is None

    def __contains__(self, g) -> bool:
        q = self.modulus
        key = (g[0] % q, g[1] % q, g[2] % q, g[3] % q)
        if self.is_full:
            return (key[0] * key[3] - key[1] * key[2]) % q == 1
        return key in self.elements

    def element_rows(self) -> np.ndarray:
        if self.is_full:
            raise BudgetExceededError(
                f"full SL2(Z/{self.modulus}) with {self.size} elements is not materialized"
            )
        return np.array(sorted(self.elements), dtype=np.int64)

    def value_histogram(self, L: LinearForm) -> np.ndarray:
        """counts[v] = #{g in image : L(g) = v (mod q)}, exactly."""
        if self.is_full:
            return _full_sl2_value_histogram(self.modulus, L)
        rows = self.element_rows()
        vals = (L.A * rows[:, 0] + L.B * rows[:, 1] + L.C * rows[:, 2] + L.D * rows[:, 3]) % self.modulus
        return np.bincount(vals, minlength=self.modulus).astype(np.int64)


def _full_sl2_value_histogram(q: int, L: LinearForm) -> np.ndarray:
    """Exact histogram of L over all of SL2(Z/q) by an aggregated scan.

    Pairs (a, d) and (b, c) are scanned once each (q^2 cells), binned by
    determinant contribution and linear-form contribution, and combined by
    a circular convolution.  The convolution runs in float64 FFTs whose
    total mass (about q^3) stays far below the 2^53 rounding ceiling; the
    result is rounded to exact integers and certified by mass checks.
    """
    if q > 4096:
        raise BudgetExceededError(f"full-group histogram needs q <= 4096, got {q}")
    A, B, C, D = L.A % q, L.B % q, L.C % q, L.D % q
    idx = np.arange(q, dtype=np.int64)
    u, v = np.meshgrid(idx, idx, indexing="ij")
    # (a, d) pairs: key ad-1 mod q, offset A*a + D*d mod q.
    det_ad = (u * v - 1) % q
    off_ad = (A * u + D * v) % q
    cmat = np.bincount((det_ad * q + off_ad).ravel(), minlength=q * q).reshape(q, q)
    # (b, c) pairs: key bc mod q, offset B*b + C*c mod q.
    det_bc = (u * v) % q
    off_bc = (B * u + C * v) % q
    wmat = np.bincount((det_bc * q + off_bc).ravel(), minlength=q * q).reshape(q, q)
    fc = np.fft.rfft(cmat.astype(np.float64), axis=1)
    fw = np.fft.rfft(wmat.astype(np.float64), axis=1)
    hist_f = np.fft.irfft((fc * fw).sum(axis=0), n=q)
    hist = np.rint(hist_f).astype(np.int64)
    resid = float(np.max(np.abs(hist_f - hist)))
    if resid > 1e-2:
        raise ArithmeticError(f"histogram rounding residual {resid} too large at q={q}")
    if int(hist.sum()) != sl2_group_order(q):
        raise ArithmeticError(f"histogram mass mismatch at q={q}")
    return hist


# Surjectivity onto SL2(Z/p^e) at these levels certifies surjectivity at
# every level of the same prime (closed-subgroup lifting in SL2(Z_p)).
_LIFT_LEVEL = {2: 3, 3: 2}


def _closure(gen_tuples, q, budget, stop_at=None):
    seen = set(gen_tuples)
    seen.add((1 % q, 0, 0, 1 % q))
    frontier = list(seen)
    gens = list(gen_tuples)
    while frontier:
        nxt = []
        for (a, b, c, d) in frontier:
            for (e, f, g, h) in gens:
                prod = ((a * e + b * g) % q, (a * f + b * h) % q, (c * e + d * g) % q, (c * f + d * h) % q)
                if prod not in seen:
                    seen.add(prod)
                    nxt.append(prod)
        check_budget(len(seen), budget, f"reduce_mod_q({q})")
        if stop_at is not None and len(seen) >= stop_at:
            return seen
        frontier = nxt
    return seen


def _proper_subgroup_ceiling(p: int) -> int:
    # Largest order of a proper subgroup of SL2(p): the Borel p(p-1), the
    # torus normalizers 2(p+-1), or an exceptional subgroup (order <= 120).
    return max(p * (p - 1), 2 * (p + 1), 120)


def _surjective_mod_p(gen_imgs_mod_p, p: int, budget) -> bool:
    """Partial closure larger than every proper subgroup proves fullness."""
    ceiling = _proper_subgroup_ceiling(p)
    partial = _closure(gen_imgs_mod_p, p, budget, stop_at=ceiling + 1)
    return len(partial) > ceiling or len(partial) == sl2_group_order(p)


def reduce_mod_q(spec: SubgroupSpec, q: int, budget=None) -> ModQGroup:
    """Subgroup of SL2(Z/q) generated by the reduced generators.

    For prime powers p^ell, surjectivity mod p^min(ell, e_p) (e_p = 3, 2, 1
    for p = 2, 3, >=5) certifies the full group without materializing it.
    """
    if q < 2:
        raise InputError(f"modulus must be >= 2, got {q}")
    gen_imgs = []
    for g in spec.generator_list():
        gen_imgs.append((g.a % q, g.b % q, g.c % q, g.d % q))
    gen_imgs = tuple(dict.fromkeys(gen_imgs))
    fac = prime_factorization(q)
    if len(fac) == 1:
        p, ell = fac[0]
        probe = min(ell, _LIFT_LEVEL.get(p, 1))
        qp = p**probe
        probe_gens = tuple(dict.fromkeys(tuple(x % qp for x in g) for g in gen_imgs))
        if probe == 1:
            full = _surjective_mod_p(probe_gens, p, budget)
        else:
            full = len(_closure(probe_gens, qp, budget)) == sl2_group_order(qp)
        if full:
            return ModQGroup(q, None, gen_imgs, sl2_group_order(q))
    full_order = sl2_group_order(q)
    elements = _closure(gen_imgs, q, budget, stop_at=full_order)
    if len(elements) == full_order:
        return ModQGroup(q, None, gen_imgs, full_order)
    return ModQGroup(q, frozenset(elements), gen_imgs, len(elements))


def saturation_level(spec: SubgroupSpec, p: int, max_level: int = 8, budget=None) -> int:
    """0 if the reduction mod p^ell is onto for all ell; otherwise the first
    level k at which the image at p^(k+1) (and p^(k+2)) is the full lift of
    the image at p^k."""
    if not is_prime(p):
        raise InputError(f"{p} is not prime")
    if reduce_mod_q(spec, p, budget=budget).is_full:
        probe = reduce_mod_q(spec, p ** _LIFT_LEVEL.get(p, 2), budget=budget)
        if probe.is_full:
            return 0
    sizes = {}

    def size_at(level):
        if level not in sizes:
            sizes[level] = reduce_mod_q(spec, p**level, budget=budget).size
        return sizes[level]

    cube = p**3
    for k in range(1, max_level + 1):
        if size_at(k + 1) == cube * size_at(k) and size_at(k + 2) == cube * size_at(k + 1):
            return k
    raise NoStabilizationError(f"no saturation level ≤ {max_level} at p={p}")


def effective_saturation_level(spec: SubgroupSpec, p: int, L: LinearForm, **kw) -> int:
    """Saturation level raised above v_p(B) when a form with B != 0 is
    attached (the vanishing cutoff for high prime powers needs this)."""
    k = saturation_level(spec, p, **kw)
    if L.B != 0:
        k = max(k, valuation(L.B, p) + 1)
    return k


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

DEFAULT_BAD_PRIME_BOUND = 97


def candidate_bad_primes(spec: SubgroupSpec, bound: int = DEFAULT_BAD_PRIME_BOUND) -> list:
    """Heuristic search list: all p <= bound plus primes dividing any
    generator's entrywise difference from the identity."""
    ps = set(p for p in range(2, bound + 1) if is_prime(p))
    for g in spec.generators:
        for diff in (g.a - 1, g.b, g.c, g.d - 1):
            if diff:
                ps.update(p for p, _ in prime_factorization(abs(diff)))
    return sorted(ps)


def bad_prime_certificate(spec: SubgroupSpec, bound: int = DEFAULT_BAD_PRIME_BOUND, budget=None) -> list:
    """[(p, k_p)] over the search list, keeping only genuinely bad primes."""
    cert = []
    for p in candidate_bad_primes(spec, bound):
        k = saturation_level(spec, p, budget=budget)
        if k > 0:
            cert.append((p, k))
    return cert


def admissible_classes(spec: SubgroupSpec, L: LinearForm, p: int, k_p: int,
                       max_extra: int = 6, budget=None):
    """Stabilized value classes of L at a bad prime: the smallest level m
    (two consecutive stable levels required) with modulus p^m and the set
    of attained residues.  Returns (p**m, frozenset)."""
    values = {}

    def value_set_at(level):
        if level not in values:
            image = reduce_mod_q(spec, p**level, budget=budget)
            hist = image.value_histogram(L)
            values[level] = frozenset(int(v) for v in np.nonzero(hist)[0])
        return values[level]

    start = max(k_p, 1)
    for m in range(start, start + max_extra):
        v0, v1, v2 = value_set_at(m), value_set_at(m + 1), value_set_at(m + 2)
        if len(v1) == p * len(v0) and len(v2) == p * len(v1):
            return p**m, value_set_at(m)
    raise NoStabilizationError(f"value set did not stabilize at p={p}")


def admissible_set(spec: SubgroupSpec, L: LinearForm, certificate, n_range, budget=None) -> set:
    """Integers in n_range passing every congruence obstruction recorded in
    the certificate.  Good primes impose no condition: a full image attains
    every residue class of a primitive form (verified in tests on the
    smallest good prime)."""
    lo, hi = n_range
    admissible = set(range(lo, hi + 1))
    for p, k_p in certificate:
        modulus, classes = admissible_classes(spec, L, p, k_p, budget=budget)
        admissible = {n for n in admissible if n % modulus in classes}
    return admissible


def estimate_growth_exponent(spec: SubgroupSpec, bounds, budget=None) -> float:
    """Least-squares slope of log(ball count) against log(bound)."""
    if len(bounds) < 3 or sorted(bounds) != list(bounds):
        raise InputError("need at least 3 increasing bounds")
    counts = [len(_ball_rows(spec, b, budget=budget)) for b in bounds]
    xs = np.log(np.array(bounds, dtype=float))
    ys = np.log(np.array(counts, dtype=float))
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)

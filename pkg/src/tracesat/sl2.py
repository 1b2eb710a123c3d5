"""Exact 2x2 integer matrices, linear forms, and the parabolic-shifted
bilinear forms they induce.

Python integers make every product exact, so there is no overflow contract
to enforce here; the determinant is the only construction-time invariant.
"""

import math
from dataclasses import dataclass

from .errors import InputError


@dataclass(frozen=True, order=True)
class GroupElement:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise InputError(f"determinant != 1: {(self.a, self.b, self.c, self.d)}")

    @property
    def trace(self) -> int:
        return self.a + self.d

    def frobenius_norm_sq(self) -> int:
        return self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def entries(self) -> tuple:
        return (self.a, self.b, self.c, self.d)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @staticmethod
    def identity() -> "GroupElement":
        return GroupElement(1, 0, 0, 1)

    @staticmethod
    def parabolic(step: int) -> "GroupElement":
        """The upper-triangular translation (1 step; 0 1)."""
        return GroupElement(1, step, 0, 1)

    @staticmethod
    def from_text(line: str) -> "GroupElement":
        parts = line.split()
        if len(parts) != 4:
            raise InputError(f"expected four integers 'a b c d', got {line!r}")
        try:
            a, b, c, d = (int(x) for x in parts)
        except ValueError as exc:
            raise InputError(f"non-integer matrix entry in {line!r}") from exc
        return GroupElement(a, b, c, d)


def multiply(g1: GroupElement, g2: GroupElement) -> GroupElement:
    return g1 @ g2


IDENTITY = GroupElement(1, 0, 0, 1)


@dataclass(frozen=True)
class LinearForm:
    """g -> A*a + B*b + C*c + D*d, normalized so gcd(A,B,C,D) = 1.

    Coefficients are stored postdivided by their (positive) gcd; the zero
    form is rejected.  The discriminant A*D - B*C of the normalized
    coefficients is cached as .delta.
    """

    A: int
    B: int
    C: int
    D: int

    def __post_init__(self):
        g = math.gcd(math.gcd(self.A, self.B), math.gcd(self.C, self.D))
        if g == 0:
            raise InputError("linear form must have a nonzero coefficient")
        if g > 1:
            object.__setattr__(self, "A", self.A // g)
            object.__setattr__(self, "B", self.B // g)
            object.__setattr__(self, "C", self.C // g)
            object.__setattr__(self, "D", self.D // g)

    @property
    def delta(self) -> int:
        return self.A * self.D - self.B * self.C

    def coefficients(self) -> tuple:
        return (self.A, self.B, self.C, self.D)

    def evaluate(self, g: GroupElement) -> int:
        return self.A * g.a + self.B * g.b + self.C * g.c + self.D * g.d

    def coefficient_matrix(self) -> tuple:
        """Entries of the matrix (A C; B D) whose twisted trace realizes
        the form (no determinant constraint)."""
        return (self.A, self.C, self.B, self.D)

    @staticmethod
    def from_text(text: str) -> "LinearForm":
        parts = text.split()
        if len(parts) != 4:
            raise InputError(f"expected four integers 'A B C D', got {text!r}")
        try:
            return LinearForm(*(int(x) for x in parts))
        except ValueError as exc:
            raise InputError(f"non-integer form coefficient in {text!r}") from exc


TRACE_FORM = LinearForm(1, 0, 0, 1)


def evaluate_form(L: LinearForm, g: GroupElement) -> int:
    return L.evaluate(g)


def evaluate_form_via_product(L: LinearForm, g: GroupElement) -> int:
    """Same value as tr(g * (A C; B D)); used as an independent oracle."""
    ca, cb, cc, cd = L.A, L.C, L.B, L.D
    return (g.a * ca + g.b * cc) + (g.c * cb + g.d * cd)


@dataclass(frozen=True)
class ShiftedFormCoefficients:
    """f(x, y) = const + x_coeff*x + y_coeff*y + xy_coeff*x*y."""

    const_term: int
    x_coeff: int
    y_coeff: int
    xy_coeff: int

    def evaluate(self, x: int, y: int) -> int:
        return self.const_term + self.x_coeff * x + self.y_coeff * y + self.xy_coeff * x * y


def shifted_form(L: LinearForm, P: int, g: GroupElement) -> ShiftedFormCoefficients:
    """Coefficients of (x, y) -> L(n_P^x * g * n_P^y)."""
    if P == 0:
        raise InputError("parabolic step P must be nonzero")
    return ShiftedFormCoefficients(
        const_term=L.evaluate(g),
        x_coeff=(L.A * g.c + L.B * g.d) * P,
        y_coeff=(L.B * g.a + L.D * g.c) * P,
        xy_coeff=L.B * g.c * P * P,
    )


def shifted_form_direct(L: LinearForm, P: int, g: GroupElement, x: int, y: int) -> int:
    """Oracle evaluation by the actual conjugated product."""
    return L.evaluate(GroupElement.parabolic(P * x) @ g @ GroupElement.parabolic(P * y))


def two_parabolic_trace(g: GroupElement, P: int, x: int, y: int) -> int:
    """tr(n_P^x * g * n_P^y * g) by direct matrix computation."""
    return (GroupElement.parabolic(P * x) @ g @ GroupElement.parabolic(P * y) @ g).trace


def two_parabolic_trace_polynomial(g: GroupElement, P: int, x: int, y: int) -> int:
    """Closed quadratic form of the same trace in (x, y)."""
    a, b, c, d = g.a, g.b, g.c, g.d
    return a * a + 2 * b * c + d * d + (a + d) * c * P * (x + y) + c * c * P * P * x * y


def frobenius_norm_sq(g: GroupElement) -> int:
    return g.frobenius_norm_sq()


def hyperbolic_length(t: int) -> float:
    """Geodesic length 2*arccosh(|t|/2) of a hyperbolic class; display helper."""
    if abs(t) <= 2:
        raise InputError(f"trace {t} is not hyperbolic")
    return 2.0 * math.acosh(abs(t) / 2.0)

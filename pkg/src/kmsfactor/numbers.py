"""Exact scalar arithmetic for arrow potentials and detour weights.

Potentials enter the analysis twice: as floats for matrix numerics, and --
when the input file declares ``rationals = true`` -- as exact values of the
form

    q0 + sum_p c_p * ln(p)        (q0 and c_p rational, p prime)

Plain rationals cover hand-written files.  The log terms are needed because
the shipped two-arrow ray presets parametrize the second arrow through a
ratio value ``lam`` via ``F = 1 - ln(lam)``; sums and differences of such
potentials stay exactly representable here, so lattice detection can use
integer gcd arithmetic instead of float tolerances.

The set {1, ln 2, ln 3, ln 5, ...} is linearly independent over the
rationals, so an ExactReal is zero iff all its coordinates are zero, and
rank computations over the coordinates decide commensurability exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath

_FACTOR_LIMIT = 10**7


class FactorLimitError(ValueError):
    """Raised when an exact log argument has a prime factor too large to extract."""


def parse_number(text: str) -> Fraction:
    """Parse a decimal or p/q literal into an exact Fraction."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _factorize(n: int) -> dict[int, int]:
    """Trial-division factorization; inputs come from small file literals."""
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
        if d > _FACTOR_LIMIT:
            raise FactorLimitError(f"prime factor of {n} exceeds factor limit")
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class ExactReal:
    """A number q0 + sum c_p*ln(p) with rational q0, c_p and prime p.

    ``logs`` is a sorted tuple of (prime, coefficient) with no zero
    coefficients, so equality and hashing are structural.
    """

    rat: Fraction = Fraction(0)
    logs: tuple[tuple[int, Fraction], ...] = ()

    @staticmethod
    def from_fraction(q: Fraction | int) -> "ExactReal":
        return ExactReal(Fraction(q), ())

    @staticmethod
    def ln(q: Fraction | int) -> "ExactReal":
        """Exact ln(q) for a positive rational q."""
        q = Fraction(q)
        if q <= 0:
            raise ValueError("ln argument must be positive")
        coeffs: dict[int, Fraction] = {}
        for p, e in _factorize(q.numerator).items():
            coeffs[p] = coeffs.get(p, Fraction(0)) + e
        for p, e in _factorize(q.denominator).items():
            coeffs[p] = coeffs.get(p, Fraction(0)) - e
        return ExactReal(Fraction(0), _normalize(coeffs))

    def __add__(self, other: "ExactReal") -> "ExactReal":
        coeffs = dict(self.logs)
        for p, c in other.logs:
            coeffs[p] = coeffs.get(p, Fraction(0)) + c
        return ExactReal(self.rat + other.rat, _normalize(coeffs))

    def __sub__(self, other: "ExactReal") -> "ExactReal":
        return self + (-other)

    def __neg__(self) -> "ExactReal":
        return ExactReal(-self.rat, tuple((p, -c) for p, c in self.logs))

    def scale(self, q: Fraction | int) -> "ExactReal":
        q = Fraction(q)
        if q == 0:
            return ExactReal()
        return ExactReal(self.rat * q, _normalize({p: c * q for p, c in self.logs}))

    def is_zero(self) -> bool:
        return self.rat == 0 and not self.logs

    def __float__(self) -> float:
        x = float(self.rat)
        for p, c in self.logs:
            x += float(c) * math.log(p)
        return x

    def mpf(self, dps: int = 60) -> mpmath.mpf:
        with mpmath.workdps(dps):
            x = mpmath.mpf(self.rat.numerator) / self.rat.denominator
            for p, c in self.logs:
                x += mpmath.log(p) * mpmath.mpf(c.numerator) / c.denominator
            return x

    def sign(self) -> int:
        """Sign of the value; exact zero is decided structurally."""
        if self.is_zero():
            return 0
        if not self.logs:
            return 1 if self.rat > 0 else -1
        # Numeric evaluation; coordinates are independent so the value is
        # nonzero, and 60 digits dwarf any cancellation in file-sized inputs.
        v = self.mpf()
        return 1 if v > 0 else -1

    def __abs__(self) -> "ExactReal":
        return self if self.sign() >= 0 else -self

    def div_exact(self, other: "ExactReal") -> Fraction | None:
        """Return q with self == q*other, or None if no rational q exists."""
        if other.is_zero():
            return Fraction(0) if self.is_zero() else None
        if self.is_zero():
            return Fraction(0)
        sc = dict(self.logs)
        oc = dict(other.logs)
        if other.rat != 0:
            q = self.rat / other.rat
        else:
            p0 = next(iter(oc))
            if p0 not in sc:
                return None
            q = sc[p0] / oc[p0]
        for p in set(sc) | set(oc):
            if sc.get(p, Fraction(0)) != q * oc.get(p, Fraction(0)):
                return None
        if self.rat != q * other.rat:
            return None
        return q

    def exp_as_fraction(self) -> Fraction | None:
        """exp(self) as an exact rational, when it is one."""
        if self.rat != 0:
            return None
        out = Fraction(1)
        for p, c in self.logs:
            if c.denominator != 1:
                return None
            out *= Fraction(p) ** c.numerator
        return out

    def describe(self) -> str:
        parts = []
        if self.rat != 0 or not self.logs:
            parts.append(str(self.rat))
        for p, c in self.logs:
            parts.append(f"{c}*ln({p})" if c != 1 else f"ln({p})")
        return " + ".join(parts)


def _normalize(coeffs: dict[int, Fraction]) -> tuple[tuple[int, Fraction], ...]:
    return tuple(sorted((p, c) for p, c in coeffs.items() if c != 0))


def fraction_gcd(values: Iterable[Fraction]) -> Fraction:
    """gcd over rationals: the largest q with every value an integer multiple."""
    vals = [abs(Fraction(v)) for v in values if v != 0]
    if not vals:
        return Fraction(0)
    den = 1
    for v in vals:
        den = den * v.denominator // math.gcd(den, v.denominator)
    num = 0
    for v in vals:
        num = math.gcd(num, v.numerator * (den // v.denominator))
    return Fraction(num, den)


def float_gcd(values: Sequence[float], eps: float = 1e-9) -> float:
    """Tolerance-based gcd of |values| by Euclidean reduction.

    Remainders below the snap cutoff count as exact divisions; a divisor
    that shrinks below eps without snapping signals incommensurable inputs
    and returns 0.0 (the dense case).  Returns 0.0 as well when every value
    is below the zero cutoff.
    """
    vals = sorted(abs(v) for v in values)
    if not vals:
        return 0.0
    snap = max(eps * 1e-3, 1e-14 * vals[-1])
    vals = [v for v in vals if v > snap]
    if not vals:
        return 0.0

    def pair(a: float, b: float) -> float:
        a, b = max(a, b), min(a, b)
        while b > snap:
            r = math.fmod(a, b)
            r = min(r, b - r)
            a, b = b, r
            if a <= eps:
                return 0.0  # reduction fell through the resolution: dense
        return a

    g = vals[0]
    for v in vals[1:]:
        g = pair(g, v)
        if g == 0.0:
            return 0.0
    # The running gcd can shrink late; a second pass revalidates.
    for v in vals:
        g = pair(g, v)
        if g == 0.0:
            return 0.0
    return g

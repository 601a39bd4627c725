"""Generating-function coefficients, Euler characteristics and CSM calculus.

The three coefficient families are read off truncated power series:

* ``c_n[d_1..d_r]``: coefficient of z^n in 1/(1-z)^2 * prod d_i z/(1+(d_i-1)z),
  the Euler characteristic of a generic complete intersection in CP^n;
* ``bt_n[d_1..d_r]``: same with each factor d_i z replaced by (1-z), the
  Euler characteristic of CP^n minus the union of generic hypersurfaces;
* ``b_i[d_1..d_r] = bt_i[1, d_1..d_r]``: the affine variant, coefficient of
  z^i in 1/(1-z) * prod (1-z)/(1+(d_i-1)z).

Adding generic hypersurfaces of degrees ``degs`` to a hyperplane arrangement
with characteristic polynomial sum a_i t^i leaves the complement with Euler
characteristic sum a_i b_i[degs]; the Milnor-number analogue for hypersurface
arrangements is :func:`chi_from_milnor`.  Everything is exact big-integer
arithmetic.

Chow-ring convention used throughout: h^i . [CP^n] = [CP^{n-i}], and the
"degree" of a class sum gamma_i h^i is gamma_n, its coefficient against the
point class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

from .arrangement import CharPoly
from .errors import InputError, ParityWarning


# ---------------------------------------------------------------------------
# Truncated integer power series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedSeries:
    """Power series modulo z^{order+1}; coefficients are exact ints/Fractions."""

    coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_coeffs(cls, coeffs: Sequence, order: int) -> "TruncatedSeries":
        c = list(coeffs)[: order + 1]
        c += [0] * (order + 1 - len(c))
        return cls(tuple(c))

    @classmethod
    def one(cls, order: int) -> "TruncatedSeries":
        return cls.from_coeffs([1], order)

    @classmethod
    def geometric(cls, a, order: int) -> "TruncatedSeries":
        """1/(1 + a z) = sum (-a)^m z^m."""
        out, c = [], 1
        for _ in range(order + 1):
            out.append(c)
            c = c * (-a)
        return cls(tuple(out))

    def _check(self, other: "TruncatedSeries") -> None:
        if self.order != other.order:
            raise InputError("series truncation orders differ")

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        n = self.order
        out = [0] * (n + 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j in range(n + 1 - i):
                b = other.coeffs[j]
                if b != 0:
                    out[i + j] += a * b
        return TruncatedSeries(tuple(out))

    def scale(self, c) -> "TruncatedSeries":
        return TruncatedSeries(tuple(c * a for a in self.coeffs))

    def shift(self, r: int) -> "TruncatedSeries":
        """Multiply by z^r."""
        return TruncatedSeries(tuple([0] * r + list(self.coeffs))[: self.order + 1])

    def reciprocal(self) -> "TruncatedSeries":
        """1/self; integer arithmetic when the constant term is a unit (+-1),
        exact rational fallback otherwise."""
        c0 = self.coeffs[0]
        if c0 == 0:
            raise InputError("series reciprocal needs a nonzero constant term")
        unit = c0 in (1, -1)
        inv0 = c0 if unit else Fraction(1, 1) / c0
        out = [inv0]
        for m in range(1, self.order + 1):
            acc = sum(self.coeffs[j] * out[m - j] for j in range(1, m + 1))
            out.append(-inv0 * acc if unit else -acc * inv0)
        return TruncatedSeries(tuple(out))

    def coefficient(self, i: int) -> int:
        if not 0 <= i <= self.order:
            raise InputError(f"coefficient index {i} out of range 0..{self.order}")
        c = self.coeffs[i]
        if isinstance(c, Fraction):
            if c.denominator != 1:
                raise InputError("coefficient is not an integer")
            return int(c)
        return int(c)


def _check_degrees(degs: Sequence[int]) -> tuple[int, ...]:
    """Degrees are positive integers; 0 is tolerated and means a constant
    factor (an absent hypersurface), which the series absorb as 1."""
    out = tuple(int(d) for d in degs)
    if any(d < 0 for d in out):
        raise InputError("hypersurface degrees must be nonnegative integers")
    return out


def _one_minus_z(order: int) -> TruncatedSeries:
    return TruncatedSeries.from_coeffs([1, -1], order)


def _inv_one_minus_z(order: int) -> TruncatedSeries:
    return TruncatedSeries(tuple([1] * (order + 1)))


def c_coefficient(n: int, degs: Sequence[int]) -> int:
    """Euler characteristic of a generic complete intersection of the given
    degrees in CP^n (0 when there are more degrees than dimensions)."""
    degs = _check_degrees(degs)
    if n < 0:
        raise InputError("dimension must be nonnegative")
    s = _inv_one_minus_z(n) * _inv_one_minus_z(n)
    for d in degs:
        s = (s * TruncatedSeries.geometric(d - 1, n)).shift(1).scale(d)
    return s.coefficient(n)


def c_coefficient_residue_form(n: int, degs: Sequence[int]) -> int:
    """Same coefficient from the pre-substitution pipeline
    (1+z)^{n+1} * prod d_i z/(1 + d_i z); independent cross-check of
    :func:`c_coefficient`."""
    degs = _check_degrees(degs)
    binom = TruncatedSeries.from_coeffs([comb(n + 1, j) for j in range(n + 2)], n)
    s = binom
    for d in degs:
        s = (s * TruncatedSeries.geometric(d, n)).shift(1).scale(d)
    return s.coefficient(n)


def b_tilde_coefficient(n: int, degs: Sequence[int]) -> int:
    """Euler characteristic of CP^n minus generic hypersurfaces of the given degrees."""
    degs = _check_degrees(degs)
    if n < 0:
        raise InputError("dimension must be nonnegative")
    s = _inv_one_minus_z(n) * _inv_one_minus_z(n)
    for d in degs:
        s = s * _one_minus_z(n) * TruncatedSeries.geometric(d - 1, n)
    return s.coefficient(n)


def _b_series(order: int, degs: Sequence[int]) -> TruncatedSeries:
    s = _inv_one_minus_z(order)
    for d in degs:
        s = s * _one_minus_z(order) * TruncatedSeries.geometric(d - 1, order)
    return s


def b_coefficient(i: int, degs: Sequence[int]) -> int:
    """Affine variant: chi of C^i minus generic hypersurfaces of the given degrees."""
    degs = _check_degrees(degs)
    if i < 0:
        raise InputError("index must be nonnegative")
    return _b_series(i, degs).coefficient(i)


def b_coefficients(upto: int, degs: Sequence[int]) -> list[int]:
    """b_0..b_upto in one series pass."""
    degs = _check_degrees(degs)
    s = _b_series(upto, degs)
    return [s.coefficient(i) for i in range(upto + 1)]


def chi_arrangement_plus_generic(chi: CharPoly, degs: Sequence[int]) -> int:
    """Euler characteristic of the arrangement complement with generic
    hypersurfaces of the given degrees removed: sum a_i b_i[degs].

    With a single degree d this collapses to chi(1-d); with no degrees it is
    chi(1)."""
    b = b_coefficients(chi.degree, degs)
    return sum(a * bi for a, bi in zip(chi.coeffs, b))


# ---------------------------------------------------------------------------
# Milnor vectors and CSM classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MilnorVector:
    """Polar-map degrees mu^0..mu^n of a projective divisor; mu^0 is always 1."""

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals or vals[0] != 1:
            raise InputError("Milnor vector must start with mu^0 = 1")
        if any(v < 0 for v in vals):
            raise InputError("Milnor numbers are nonnegative")

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i: int) -> int:
        return self.values[i]


@dataclass(frozen=True)
class CsmClass:
    """Class sum gamma_i h^i in the Chow ring of CP^n; degree = gamma_n."""

    n: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.n + 1:
            raise InputError("CSM class needs n+1 coefficients")
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        """Euler characteristic: coefficient against the point class h^n."""
        return self.coeffs[self.n]


def csm_from_milnor(mu: MilnorVector) -> CsmClass:
    """CSM class of the divisor complement:
    sum (-1)^i mu^i h^i (1+h)^{n-i}, truncated at h^n."""
    n = mu.n
    coeffs = [0] * (n + 1)
    for i, m in enumerate(mu):
        sign = -1 if i % 2 else 1
        for j in range(n - i + 1):
            coeffs[i + j] += sign * m * comb(n - i, j)
    return CsmClass(n, tuple(coeffs))


def csm_remove_generic(cls: CsmClass, d: int) -> CsmClass:
    """Remove one generic degree-d hypersurface: multiply by 1/(1+dh)
    (d = 0 removes nothing)."""
    if d < 0:
        raise InputError("hypersurface degree must be nonnegative")
    inv = TruncatedSeries.geometric(d, cls.n)
    prod = TruncatedSeries.from_coeffs(cls.coeffs, cls.n) * inv
    return CsmClass(cls.n, tuple(prod.coefficient(i) for i in range(cls.n + 1)))


def chi_from_milnor(mu: MilnorVector, degs: Sequence[int]) -> int:
    """Euler characteristic of the hypersurface-arrangement complement with
    generic hypersurfaces added: sum (-1)^{n-i} mu^{n-i} b_i[degs]."""
    n = mu.n
    b = b_coefficients(n, degs)
    total = 0
    for i in range(n + 1):
        sign = -1 if (n - i) % 2 else 1
        total += sign * mu[n - i] * b[i]
    return total


def region_bound_complex(mu: MilnorVector) -> int:
    """Upper bound on real regions: the total count of complex critical
    points, sum of all Milnor numbers."""
    return sum(mu)


def region_bound_bezout(d: int, n: int) -> int:
    """Coarser bound ((d+1)^{n+1} - 1)/d for a divisor of affine degree d."""
    if d < 1 or n < 1:
        raise InputError("need d >= 1 and n >= 1")
    num = (d + 1) ** (n + 1) - 1
    assert num % d == 0
    return num // d


def region_bound_morse(mu_sum: int, chi_real: int) -> int:
    """Morse-theoretic bound (mu_sum + chi_real)/2.

    The quantity counts even-index critical points, an integer, so a
    consistent input pair has even sum; an odd sum signals measurement error
    and is rounded up with a :class:`ParityWarning`."""
    total = mu_sum + chi_real
    if total % 2 != 0:
        warnings.warn(
            ParityWarning(f"mu_sum + chi_real = {total} is odd; rounding up"),
            stacklevel=2,
        )
        return (total + 1) // 2
    return total // 2

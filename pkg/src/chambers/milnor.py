"""Milnor numbers of projective divisors via polar-map degrees.

mu^i(F) is the topological degree of the gradient (polar) map of F restricted
to a generic i-dimensional linear subspace of CP^n.  Numerically: pull F back
along a random rational embedding CP^i -> CP^n, fix the affine chart where
the last slice coordinate is 1, and count preimages of a generic direction z
by solving

    dG_j(y_0..y_{i-1}, 1) = lambda * z_j      (j = 0..i)

for (y, lambda) with a total-degree homotopy.  Solutions with the gradient
(equivalently lambda) near zero sit on the indeterminacy locus and are
discarded.  Every level is computed twice with independent slices; a
disagreement triggers a redraw, and persistent disagreement is surfaced as
:class:`SliceDegenerate` rather than guessed away.

For products of linear forms the combinatorial route
(:func:`milnor_from_charpoly`) reads the same numbers off the characteristic
polynomial of the central arrangement of the factors.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .arrangement import Arrangement, CharPoly, char_poly_mobius
from .errors import (
    InputError,
    NotProductOfLinearForms,
    SliceDegenerate,
)
from .eulercalc import MilnorVector
from .polysys import PolySystem, SparsePoly, homogenize_divisor
from .tracker import TrackOptions, total_degree_solve

SLICE_BUDGET = 5
LAMBDA_TOL = 1e-8


@dataclass(frozen=True)
class ProjectiveDivisor:
    """Hypersurface V(F) in CP^n given by a homogeneous F in x0..xn."""

    F: SparsePoly

    def __post_init__(self):
        if self.F.is_zero():
            raise InputError("divisor polynomial must be nonzero")
        if not self.F.is_homogeneous():
            raise InputError("divisor polynomial must be homogeneous")

    @property
    def n(self) -> int:
        """Projective dimension of the ambient space."""
        return self.F.n - 1

    @property
    def degree(self) -> int:
        return self.F.total_degree()


def divisor_for_arrangement(fs: Sequence[SparsePoly], n: int | None = None) -> ProjectiveDivisor:
    """Divisor hf * x0 for f the product of the given affine polynomials."""
    if not fs and n is None:
        raise InputError("empty factor list needs an explicit ambient dimension")
    if n is None:
        n = fs[0].n
    prod = SparsePoly.constant(n, Fraction(1))
    for f in fs:
        if f.n != n:
            raise InputError("factors must share the variable count")
        prod = prod * f
    return ProjectiveDivisor(homogenize_divisor(prod))


def _substitute_one(poly: SparsePoly, var: int) -> SparsePoly:
    """Set variable ``var`` to 1, dropping it from the exponent tuples."""
    terms: dict = {}
    for e, c in poly.terms.items():
        ne = e[:var] + e[var + 1 :]
        terms[ne] = terms.get(ne, 0) + c
    return SparsePoly(poly.n - 1, terms)


def _embed_with_lambda(poly: SparsePoly) -> SparsePoly:
    """View a polynomial in y_0..y_{i-1} inside (y_0..y_{i-1}, lambda)."""
    return SparsePoly(poly.n + 1, {e + (0,): c for e, c in poly.terms.items()})


def _random_matrix(rng: random.Random, rows: int, cols: int) -> list[list[Fraction]]:
    return [[Fraction(rng.randint(-9, 9)) for _ in range(cols)] for _ in range(rows)]


def _polar_fiber_count(
    divisor: ProjectiveDivisor, level: int, rng: random.Random, seed: int,
    opts: TrackOptions,
) -> int | None:
    """Preimage count of one random slice/target draw; None when the draw
    degenerates (pullback degree drops, or ambiguous singular endpoints)."""
    F = divisor.F
    D = divisor.degree
    M = _random_matrix(rng, F.n, level + 1)
    G = F.substitute_linear(M)
    if G.is_zero() or G.total_degree() != D:
        return None
    cmax = max(abs(Fraction(c)) for c in G.terms.values())
    G = G.map_coefficients(lambda c: Fraction(c) / cmax)  # keeps lambda O(1)
    grads = [G.diff(j) for j in range(level + 1)]
    z = [Fraction(rng.choice([v for v in range(-9, 10) if v])) for _ in range(level + 1)]
    lam = SparsePoly.variable(level, level + 1)
    equations = []
    for j in range(level + 1):
        chart = _substitute_one(grads[j], level)
        if chart.total_degree() != D - 1:
            return None  # chart at infinity meets the fiber; redraw
        equations.append(_embed_with_lambda(chart) - lam * z[j])
    system = PolySystem.from_polys(equations)
    sols = total_degree_solve(system, opts=opts, seed=seed)
    zmax = float(max(abs(v) for v in z))
    count = 0
    for point, singular in zip(sols.points, sols.singular):
        lam_val = abs(point[level]) * zmax
        grad_scale = 1.0 + _gradient_magnitude(grads, point[:level], level)
        if lam_val <= LAMBDA_TOL * grad_scale:
            continue  # indeterminacy locus
        if singular:
            return None  # ambiguous multiplicity: force a redraw
        count += 1
    return count


def _gradient_magnitude(grads: list[SparsePoly], y: np.ndarray, level: int) -> float:
    point = list(y) + [1.0]
    total = 0.0
    for g in grads:
        for e, c in g.terms.items():
            term = abs(complex(c))
            for xi, ei in zip(point, e):
                if ei:
                    term *= abs(xi) ** ei
            total += term
    return total


def milnor_numbers(
    divisor: ProjectiveDivisor,
    seed: int = 0,
    opts: TrackOptions | None = None,
) -> MilnorVector:
    """Numerical Milnor vector (mu^0..mu^n) of a projective divisor.

    Each level is accepted once two independent draws agree; after
    ``SLICE_BUDGET`` draws without agreement the level is reported as
    degenerate.  The Bezout guard inside the solver rejects levels with more
    than 10^4 start paths.
    """
    opts = opts or TrackOptions()
    n = divisor.n
    D = divisor.degree
    values = [1]
    if D == 1:
        return MilnorVector(tuple([1] + [0] * n))
    rng = random.Random(seed)
    for level in range(1, n + 1):
        counts: list[int] = []
        accepted = None
        for draw in range(SLICE_BUDGET):
            c = _polar_fiber_count(divisor, level, rng, seed=seed * 1009 + 31 * level + draw, opts=opts)
            if c is None:
                continue
            counts.append(c)
            if len(counts) >= 2 and counts[-1] == counts[-2]:
                accepted = counts[-1]
                break
        if accepted is None:
            raise SliceDegenerate(
                f"level {level}: draws gave counts {counts}; no two consecutive agree"
            )
        values.append(accepted)
    return MilnorVector(tuple(values))


def milnor_from_charpoly(central: Arrangement) -> MilnorVector:
    """Milnor vector of a product of linear forms, combinatorially.

    Input: the central arrangement in C^{n+1} cut out by the linear factors
    of the divisor (for an affine arrangement this is its cone, i.e. the
    factors of hf * x0).  The quotient chi(z)/(z-1) equals
    sum (-1)^i mu^i z^{n-i}.
    """
    if central.k == 0:
        raise NotProductOfLinearForms("central arrangement needs at least one hyperplane")
    for i, h in enumerate(central.hyperplanes):
        if h.offset != 0:
            raise NotProductOfLinearForms(f"hyperplane {i} has nonzero offset; not a linear form")
    chi = char_poly_mobius(central)
    quotient, remainder = _divide_by_z_minus_one(chi)
    if remainder != 0:
        raise NotProductOfLinearForms("characteristic polynomial not divisible by z-1")
    n = len(quotient) - 1
    values = []
    for i in range(n + 1):
        coeff = quotient[n - i]
        signed = coeff if i % 2 == 0 else -coeff
        if signed < 0:
            raise NotProductOfLinearForms("coefficient signs violate the Milnor pattern")
        values.append(signed)
    return MilnorVector(tuple(values))


def _divide_by_z_minus_one(chi: CharPoly) -> tuple[list[int], int]:
    coeffs = list(chi.coeffs)
    quotient = [0] * (len(coeffs) - 1)
    carry = 0
    for i in range(len(coeffs) - 1, 0, -1):
        carry = coeffs[i] + carry
        quotient[i - 1] = carry
    remainder = coeffs[0] + carry
    return quotient, remainder


def cone_arrangement(affine: Arrangement) -> Arrangement:
    """Central arrangement in C^{n+1} of the factors of hf * x0: homogenized
    hyperplanes plus the hyperplane at infinity (x0 first)."""
    n = affine.n
    rows = [[Fraction(1)] + [Fraction(0)] * n + [Fraction(0)]]
    for h in affine.hyperplanes:
        rows.append([-h.offset] + list(h.normal) + [Fraction(0)])
    return Arrangement.from_coefficients(n + 1, rows)

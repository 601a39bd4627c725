"""Exact combinatorics of affine hyperplane arrangements.

Everything in this module runs over exact rationals: the intersection poset,
Mobius function, characteristic polynomial (three independent routes) and the
region counts derived from it.  Floating point only appears in
:func:`sign_vector_at`, which evaluates at user-supplied real points.

A hyperplane with normal ``a`` and offset ``b`` is the zero set of
``f(x) = a.x - b``; sign vectors and the JSON file format use the same
convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import gcd
from typing import Iterable, Sequence

from .errors import (
    BadPrime,
    DuplicateHyperplane,
    InputError,
    OnBoundary,
    SubsetBudgetExceeded,
)

Row = tuple[Fraction, ...]

WHITNEY_MAX_HYPERPLANES = 24

_SIGN_CHARS = {1: "+", -1: "-"}


def _to_fraction(value) -> Fraction:
    """Accept int, Fraction, or decimal/'p/q' strings; reject floats (lossy)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse rational {value!r}: {exc}") from None
    raise InputError(f"rational expected, got {type(value).__name__} {value!r}")


# ---------------------------------------------------------------------------
# Exact linear algebra on augmented rows [a | b] for equations a.x = b.
# An RREF state is a tuple of rows sorted by pivot column, each with leading
# coefficient 1; it is a canonical form for the affine span it defines.
# ---------------------------------------------------------------------------


def _reduce_row(row: Sequence[Fraction], rref: Sequence[Row]) -> list[Fraction]:
    out = list(row)
    for r in rref:
        piv = _pivot(r)
        if out[piv] != 0:
            c = out[piv]
            for j in range(piv, len(out)):
                out[j] -= c * r[j]
    return out


def _pivot(row: Sequence[Fraction]) -> int:
    for j, v in enumerate(row):
        if v != 0:
            return j
    raise ValueError("zero row has no pivot")


def rref_insert(rref: tuple[Row, ...], row: Sequence[Fraction]) -> tuple[Row, ...] | None:
    """Insert one augmented row into an RREF state.

    Returns the new canonical state, the unchanged state if the row is
    dependent, or ``None`` if the system becomes inconsistent (pivot lands in
    the offset column).
    """
    ncols = len(row)
    red = _reduce_row(row, rref)
    piv = None
    for j, v in enumerate(red):
        if v != 0:
            piv = j
            break
    if piv is None:
        return rref
    if piv == ncols - 1:
        return None
    inv = Fraction(1) / red[piv]
    newrow = tuple(v * inv for v in red)
    rows = [list(r) for r in rref]
    for r in rows:
        if r[piv] != 0:
            c = r[piv]
            for j in range(piv, ncols):
                r[j] -= c * newrow[j]
    rows.append(list(newrow))
    rows.sort(key=lambda r: _pivot(r))
    return tuple(tuple(v for v in r) for r in rows)


def rref_contains(rref: Sequence[Row], row: Sequence[Fraction]) -> bool:
    """True if the equation ``row`` is implied by the RREF system."""
    return all(v == 0 for v in _reduce_row(row, rref))


# ---------------------------------------------------------------------------
# Hyperplanes and arrangements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyperplane:
    """Affine hyperplane {x : normal.x = offset} with exact rational data."""

    normal: tuple[Fraction, ...]
    offset: Fraction

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(_to_fraction(v) for v in self.normal))
        object.__setattr__(self, "offset", _to_fraction(self.offset))
        if all(v == 0 for v in self.normal):
            raise InputError("hyperplane normal must be nonzero")

    @property
    def n(self) -> int:
        return len(self.normal)

    def row(self) -> Row:
        return self.normal + (self.offset,)

    def evaluate(self, x: Sequence) -> Fraction | float:
        """f(x) = normal.x - offset, exact when x is exact."""
        acc = sum(a * xi for a, xi in zip(self.normal, x))
        return acc - self.offset

    def canonical_key(self) -> tuple:
        """Scale-invariant key: two hyperplanes are equal as sets iff keys match."""
        vec = list(self.normal) + [self.offset]
        den = 1
        for v in vec:
            den = den * v.denominator // gcd(den, v.denominator)
        ints = [int(v * den) for v in vec]
        g = 0
        for v in ints:
            g = gcd(g, abs(v))
        ints = [v // g for v in ints]
        lead = next(v for v in ints if v != 0)
        if lead < 0:
            ints = [-v for v in ints]
        return tuple(ints)


@dataclass(frozen=True)
class Arrangement:
    """Finite ordered list of pairwise-distinct hyperplanes in Q^n."""

    n: int
    hyperplanes: tuple[Hyperplane, ...]

    def __post_init__(self):
        object.__setattr__(self, "hyperplanes", tuple(self.hyperplanes))
        seen = {}
        for i, h in enumerate(self.hyperplanes):
            if h.n != self.n:
                raise InputError(f"hyperplane {i} lives in dimension {h.n}, expected {self.n}")
            key = h.canonical_key()
            if key in seen:
                raise DuplicateHyperplane(
                    f"hyperplanes {seen[key]} and {i} define the same set (scalar multiples)"
                )
            seen[key] = i

    @property
    def k(self) -> int:
        return len(self.hyperplanes)

    @classmethod
    def from_coefficients(cls, n: int, rows: Iterable[Sequence]) -> "Arrangement":
        """Each row is (a_1, ..., a_n, b) for the hyperplane a.x = b."""
        hps = []
        for row in rows:
            row = [_to_fraction(v) for v in row]
            if len(row) != n + 1:
                raise InputError(f"coefficient row needs {n + 1} entries, got {len(row)}")
            hps.append(Hyperplane(tuple(row[:n]), row[n]))
        return cls(n, tuple(hps))

    @classmethod
    def from_dict(cls, data: dict) -> "Arrangement":
        try:
            n = int(data["n"])
            raw = data["hyperplanes"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"arrangement JSON needs 'n' and 'hyperplanes': {exc}") from None
        hps = []
        for entry in raw:
            hps.append(
                Hyperplane(
                    tuple(_to_fraction(v) for v in entry["normal"]),
                    _to_fraction(entry.get("offset", 0)),
                )
            )
        return cls(n, tuple(hps))

    @classmethod
    def from_json(cls, text: str) -> "Arrangement":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid arrangement JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "hyperplanes": [
                {"normal": [str(v) for v in h.normal], "offset": str(h.offset)}
                for h in self.hyperplanes
            ],
        }

    def delete(self, i: int) -> "Arrangement":
        hps = self.hyperplanes[:i] + self.hyperplanes[i + 1 :]
        return Arrangement(self.n, hps)

    def restrict(self, i: int) -> "Arrangement":
        """Arrangement induced on hyperplane i, in coordinates of that hyperplane.

        Traces of the other hyperplanes are collapsed when they coincide and
        dropped when empty (parallel), matching the set-theoretic definition.
        """
        h = self.hyperplanes[i]
        point, basis = _solve_affine(rref_insert((), h.row()), self.n)
        rows = []
        keys = set()
        for j, other in enumerate(self.hyperplanes):
            if j == i:
                continue
            a = [
                sum(other.normal[r] * basis[r][c] for r in range(self.n))
                for c in range(len(basis[0]))
            ]
            b = other.offset - sum(other.normal[r] * point[r] for r in range(self.n))
            if all(v == 0 for v in a):
                continue  # parallel to h: empty trace
            hp = Hyperplane(tuple(a), b)
            key = hp.canonical_key()
            if key not in keys:
                keys.add(key)
                rows.append(hp)
        return Arrangement(self.n - 1, tuple(rows))


def _solve_affine(rref: Sequence[Row], n: int) -> tuple[list[Fraction], list[list[Fraction]]]:
    """Particular point and direction basis (as columns) of an RREF system."""
    pivots = [_pivot(r) for r in rref]
    free = [j for j in range(n) if j not in pivots]
    point = [Fraction(0)] * n
    for r, piv in zip(rref, pivots):
        point[piv] = r[-1]
    basis_cols = []
    for f in free:
        col = [Fraction(0)] * n
        col[f] = Fraction(1)
        for r, piv in zip(rref, pivots):
            col[piv] = -r[f]
        basis_cols.append(col)
    # rows indexed by ambient coordinate, columns by free direction
    basis = [[col[r] for col in basis_cols] for r in range(n)]
    if not basis_cols:
        basis = [[] for _ in range(n)]
    return point, basis


# ---------------------------------------------------------------------------
# Intersection poset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Flat:
    """Nonempty intersection of a subset of hyperplanes.

    ``rows`` is the canonical RREF of the defining equations, ``generators``
    the set of *all* hyperplane indices containing the flat.  Flats are equal
    iff their generator sets are equal (each flat is the intersection of its
    generators).
    """

    rows: tuple[Row, ...]
    dim: int
    generators: frozenset[int]
    ambient: int

    @cached_property
    def point(self) -> tuple[Fraction, ...]:
        return tuple(_solve_affine(self.rows, self.ambient)[0])

    @cached_property
    def basis(self) -> tuple[tuple[Fraction, ...], ...]:
        """Direction basis as rows-of-coordinates: basis[r][c] = coord r of direction c."""
        return tuple(tuple(r) for r in _solve_affine(self.rows, self.ambient)[1])


class IntersectionPoset:
    """All nonempty intersections of subsets of hyperplanes, ordered by reverse inclusion.

    ``flats[0]`` is the ambient space (the empty intersection).  ``mobius[i]``
    is mu(ambient, flats[i]); ``covers[i]`` lists the indices covering flat i.
    """

    def __init__(self, arrangement: Arrangement, flats: list[Flat]):
        self.arrangement = arrangement
        # deterministic order: by codimension, then by generator set
        flats = sorted(flats, key=lambda f: (len(f.rows), sorted(f.generators)))
        self.flats = flats
        self._below: list[list[int]] = []
        for j, fj in enumerate(flats):
            below = [
                i
                for i, fi in enumerate(flats)
                if fi.generators < fj.generators
            ]
            self._below.append(below)
        self.mobius: list[int] = [0] * len(flats)
        for j in range(len(flats)):
            if not self._below[j]:
                self.mobius[j] = 1
            else:
                self.mobius[j] = -sum(self.mobius[i] for i in self._below[j])
        self.covers: list[list[int]] = [[] for _ in flats]
        for j, fj in enumerate(flats):
            for i in self._below[j]:
                if flats[i].dim == fj.dim + 1:
                    self.covers[i].append(j)

    def __len__(self) -> int:
        return len(self.flats)

    def strictly_below(self, j: int) -> list[int]:
        return self._below[j]

    def zero_sum_check(self) -> bool:
        """Interval zero-sums: sum of mu over [ambient, x] vanishes for x > ambient."""
        for j in range(len(self.flats)):
            if not self._below[j]:
                continue
            total = self.mobius[j] + sum(self.mobius[i] for i in self._below[j])
            if total != 0:
                return False
        return True


def build_poset(arrangement: Arrangement) -> IntersectionPoset:
    """Intersection poset built incrementally, one hyperplane at a time.

    Each new hyperplane is intersected with every known flat; canonical RREF
    keys deduplicate.  This avoids the 2^k subset blowup.
    """
    n = arrangement.n
    ambient_rows: tuple[Row, ...] = ()
    by_key: dict[tuple, tuple[Row, ...]] = {ambient_rows: ambient_rows}
    for h in arrangement.hyperplanes:
        row = h.row()
        for rows in list(by_key.values()):
            new = rref_insert(rows, row)
            if new is None or new == rows:
                continue
            by_key.setdefault(new, new)
    flats = []
    for rows in by_key.values():
        gens = frozenset(
            i for i, h in enumerate(arrangement.hyperplanes) if rref_contains(rows, h.row())
        )
        flats.append(Flat(rows=rows, dim=n - len(rows), generators=gens, ambient=n))
    return IntersectionPoset(arrangement, flats)


# ---------------------------------------------------------------------------
# Characteristic polynomial, three ways
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharPoly:
    """Characteristic polynomial; coeffs[i] multiplies t^i."""

    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def __str__(self) -> str:
        parts = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            term = f"{abs(c)}" if i == 0 else (f"t^{i}" if abs(c) == 1 else f"{abs(c)}*t^{i}")
            parts.append(("-" if c < 0 else "+") + term)
        s = " ".join(parts) if parts else "+0"
        return s.lstrip("+") or "0"


def char_poly_mobius(arrangement: Arrangement, poset: IntersectionPoset | None = None) -> CharPoly:
    """chi(t) = sum over flats of mu(x) t^{dim x}."""
    poset = poset or build_poset(arrangement)
    coeffs = [0] * (arrangement.n + 1)
    for flat, mu in zip(poset.flats, poset.mobius):
        coeffs[flat.dim] += mu
    return CharPoly(tuple(coeffs))


def char_poly_whitney(arrangement: Arrangement) -> CharPoly:
    """Signed subset sum over subsets with nonempty intersection.

    Test oracle: enumeration prunes at the first empty prefix (supersets of an
    empty intersection stay empty), but remains exponential; guarded at
    2^24 subsets.
    """
    if arrangement.k > WHITNEY_MAX_HYPERPLANES:
        raise SubsetBudgetExceeded(
            f"Whitney enumeration guard: {arrangement.k} > {WHITNEY_MAX_HYPERPLANES} hyperplanes"
        )
    n = arrangement.n
    coeffs = [0] * (n + 1)
    rows = [h.row() for h in arrangement.hyperplanes]

    def rec(start: int, state: tuple[Row, ...], size: int) -> None:
        coeffs[n - len(state)] += 1 if size % 2 == 0 else -1
        for j in range(start, arrangement.k):
            new = rref_insert(state, rows[j])
            if new is not None:
                rec(j + 1, new, size + 1)

    rec(0, (), 0)
    return CharPoly(tuple(coeffs))


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def next_primes(start: int, count: int) -> list[int]:
    """The first ``count`` primes strictly greater than ``start``."""
    out = []
    p = max(start, 1) + 1
    while len(out) < count:
        if _is_prime(p):
            out.append(p)
        p += 1
    return out


def _gf_rref(rows: list[list[int]], p: int) -> tuple[tuple[tuple[int, ...], ...], bool]:
    """Canonical RREF over GF(p); returns (nonzero rows, consistent)."""
    mat = [list(r) for r in rows]
    ncols = len(mat[0]) if mat else 0
    out: list[list[int]] = []
    for row in mat:
        for r in out:
            piv = next(j for j, v in enumerate(r) if v)
            if row[piv]:
                c = row[piv]
                for j in range(piv, ncols):
                    row[j] = (row[j] - c * r[j]) % p
        piv = None
        for j, v in enumerate(row):
            if v:
                piv = j
                break
        if piv is None:
            continue
        if piv == ncols - 1:
            return tuple(), False
        inv = pow(row[piv], -1, p)
        row = [(v * inv) % p for v in row]
        for r in out:
            if r[piv]:
                c = r[piv]
                for j in range(piv, ncols):
                    r[j] = (r[j] - c * row[j]) % p
        out.append(row)
    out.sort(key=lambda r: next(j for j, v in enumerate(r) if v))
    return tuple(tuple(r) for r in out), True


def _rows_mod_p(rows: Sequence[Row], p: int) -> list[list[int]]:
    out = []
    for r in rows:
        row = []
        for v in r:
            if v.denominator % p == 0:
                raise BadPrime(p, "denominator divisible by p")
            row.append((v.numerator * pow(v.denominator, -1, p)) % p)
        out.append(row)
    return out


def _check_prime(arrangement: Arrangement, poset: IntersectionPoset, p: int) -> None:
    """Raise BadPrime when p changes the intersection data.

    Checks: hyperplane normals survive mod p, every flat keeps its rank and
    consistency, and no two flats collapse onto the same mod-p subspace.
    """
    if not _is_prime(p):
        raise InputError(f"{p} is not prime")
    seen: dict[tuple, int] = {}
    for i, h in enumerate(arrangement.hyperplanes):
        row = _rows_mod_p([h.row()], p)[0]
        if all(v == 0 for v in row[:-1]):
            raise BadPrime(p, f"normal of hyperplane {i} vanishes mod p")
    for idx, flat in enumerate(poset.flats):
        if not flat.rows:
            continue
        reduced = _rows_mod_p(flat.rows, p)
        canon, consistent = _gf_rref(reduced, p)
        if not consistent or len(canon) != len(flat.rows):
            raise BadPrime(p, f"flat {sorted(flat.generators)} drops rank mod p")
        if canon in seen:
            other = poset.flats[seen[canon]]
            raise BadPrime(
                p,
                f"flats {sorted(other.generators)} and {sorted(flat.generators)} collide mod p",
            )
        seen[canon] = idx


def _complement_count(poset: IntersectionPoset, p: int) -> int:
    """Points of GF(p)^n off the arrangement, counted by poset stratification.

    Every point lies in the relative interior of exactly one flat, so
    p^{dim x} = sum of interior counts over flats inside x; solving that
    triangular system bottom-up gives the complement count at the ambient
    flat.  Uses only dims and order relations, never the stored Mobius
    values, so it cross-checks them.
    """
    flats = poset.flats
    order = sorted(range(len(flats)), key=lambda i: flats[i].dim)
    interior = [0] * len(flats)
    strictly_above: list[list[int]] = [[] for _ in flats]
    for j in range(len(flats)):
        for i in poset.strictly_below(j):
            strictly_above[i].append(j)
    for i in order:
        interior[i] = p ** flats[i].dim - sum(interior[j] for j in strictly_above[i])
    ambient = next(i for i, f in enumerate(flats) if not f.generators)
    return interior[ambient]


def _lagrange_interpolate(points: list[tuple[int, int]]) -> list[Fraction]:
    m = len(points)
    coeffs = [Fraction(0)] * m
    for i, (xi, yi) in enumerate(points):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j, (xj, _) in enumerate(points):
            if j == i:
                continue
            denom *= xi - xj
            new = [Fraction(0)] * (len(basis) + 1)
            for d, c in enumerate(basis):
                new[d] -= c * xj
                new[d + 1] += c
            basis = new
        scale = Fraction(yi) / denom
        for d, c in enumerate(basis):
            coeffs[d] += c * scale
    return coeffs


def char_poly_finite_field(arrangement: Arrangement, primes: Sequence[int]) -> CharPoly:
    """Characteristic polynomial via complement point counts over GF(p).

    Needs n+2 usable primes: n+1 for interpolation plus one spare for an
    exactness check.  Raises :class:`BadPrime` on the first prime that
    collapses flats mod p; the caller retries with larger primes
    (:func:`next_primes` helps).
    """
    n = arrangement.n
    if len(primes) < n + 2:
        raise InputError(f"need at least {n + 2} primes for dimension {n}, got {len(primes)}")
    poset = build_poset(arrangement)
    for p in primes:
        _check_prime(arrangement, poset, p)
    values = [(p, _complement_count(poset, p)) for p in primes[: n + 1]]
    coeffs = _lagrange_interpolate(values)
    if any(c.denominator != 1 for c in coeffs):
        raise BadPrime(primes[0], "interpolated polynomial is not integral")
    poly = CharPoly(tuple(int(c) for c in coeffs))
    for p in primes[n + 1 :]:
        if poly(p) != _complement_count(poset, p):
            raise BadPrime(p, "spare-prime check failed")
    return poly


# ---------------------------------------------------------------------------
# Derived invariants
# ---------------------------------------------------------------------------


def rank_and_essential(arrangement: Arrangement) -> tuple[int, bool]:
    """Rank of the normal matrix; essential iff it equals the ambient dimension."""
    state: tuple[Row, ...] = ()
    for h in arrangement.hyperplanes:
        new = rref_insert(state, h.normal + (Fraction(0),))
        if new is not None:
            state = new
    rank = len(state)
    return rank, rank == arrangement.n


@dataclass(frozen=True)
class RegionCounts:
    regions: int
    bounded: int
    essential: bool  # bounded is only meaningful when True


def region_counts(arrangement: Arrangement, poset: IntersectionPoset | None = None) -> RegionCounts:
    """Region and bounded-region counts from evaluations of chi at -1 and 1.

    For non-essential arrangements every region is unbounded; bounded is
    reported as 0 with the ``essential`` flag cleared.
    """
    chi = char_poly_mobius(arrangement, poset)
    n = arrangement.n
    rank, essential = rank_and_essential(arrangement)
    regions = (-1) ** n * chi(-1)
    bounded = (-1) ** rank * chi(1) if essential else 0
    return RegionCounts(regions=regions, bounded=bounded, essential=essential)


def sign_vector_at(arrangement: Arrangement, x: Sequence, eps: float = 1e-7) -> str:
    """Componentwise signs of (f_1, ..., f_k) at an interior point.

    Raises :class:`OnBoundary` when any |f_i(x)| <= eps.
    """
    signs = []
    for i, h in enumerate(arrangement.hyperplanes):
        v = float(h.evaluate(x))
        if abs(v) <= eps:
            raise OnBoundary(f"point lies within {eps} of hyperplane {i}")
        signs.append(_SIGN_CHARS[1 if v > 0 else -1])
    return "".join(signs)


def resonance_arrangement(d: int) -> Arrangement:
    """Hyperplanes through the origin normal to all nonzero 0/1 vectors in R^d."""
    if d < 1:
        raise InputError("resonance arrangement needs d >= 1")
    rows = []
    for mask in range(1, 2**d):
        normal = tuple(Fraction((mask >> j) & 1) for j in range(d))
        rows.append(Hyperplane(normal, Fraction(0)))
    return Arrangement(d, tuple(rows))
